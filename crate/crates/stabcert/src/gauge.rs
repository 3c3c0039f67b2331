//! Comparison-function library: positive-definite, class-K and class-K-infinity
//! gauges with evaluation, inversion, composition and iteration, plus the
//! constructive KL decay bound for contraction sequences and the K-infinity
//! envelope of a nondecreasing map.
//!
//! Gauges are kept inside a small closed family (linear, power, sums of power
//! terms, monotone piecewise-linear tables, scaling, composition, inversion,
//! and opaque monotone closures). Inversion is closed-form where the
//! representation allows and bisection otherwise; class membership is
//! validated by sampling, not proved.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::numerics::adaptive_simpson;

#[derive(Debug, Error)]
pub enum GaugeError {
    #[error("gauge evaluated at negative input {0}")]
    Domain(f64),
    #[error("target {y} outside the range of the gauge")]
    Range { y: f64 },
    #[error("inversion requires class K or K-infinity, got {0:?}")]
    NotInvertible(ClassTag),
    #[error("gauge construction failed: {0}")]
    Construction(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// Declared class of a gauge on the nonnegative reals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassTag {
    /// Zero at zero and positive elsewhere; not necessarily monotone.
    PositiveDefinite,
    /// Strictly increasing, zero at zero.
    K,
    /// Strictly increasing, zero at zero, unbounded.
    KInf,
}

#[derive(Clone)]
enum Repr {
    Linear(f64),
    Power { coeff: f64, exponent: f64 },
    /// Sum of power terms (coeff, exponent).
    Sum(Vec<(f64, f64)>),
    /// Monotone piecewise-linear table; extrapolates the last slope.
    Pwl(Vec<(f64, f64)>),
    Scaled { factor: f64, inner: Box<Repr> },
    Compose { outer: Box<Repr>, inner: Box<Repr> },
    Inverse(Box<Repr>),
    Custom { label: String, f: Arc<dyn Fn(f64) -> f64 + Send + Sync> },
}

/// A scalar monotone comparison function on `[0, +inf)`.
#[derive(Clone)]
pub struct GaugeFunction {
    repr: Repr,
    tag: ClassTag,
}

impl fmt::Debug for GaugeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GaugeFunction({}, {:?})", describe(&self.repr), self.tag)
    }
}

fn describe(r: &Repr) -> String {
    match r {
        Repr::Linear(a) => format!("{a}*s"),
        Repr::Power { coeff, exponent } => format!("{coeff}*s^{exponent}"),
        Repr::Sum(terms) => terms
            .iter()
            .map(|(c, e)| format!("{c}*s^{e}"))
            .collect::<Vec<_>>()
            .join(" + "),
        Repr::Pwl(pts) => format!("pwl[{} points]", pts.len()),
        Repr::Scaled { factor, inner } => format!("{factor}*({})", describe(inner)),
        Repr::Compose { outer, inner } => {
            format!("({}) o ({})", describe(outer), describe(inner))
        }
        Repr::Inverse(inner) => format!("inv({})", describe(inner)),
        Repr::Custom { label, .. } => label.clone(),
    }
}

/// Relative tolerance on the value when inverting by bisection.
pub const INVERT_TOL: f64 = 1e-10;

impl GaugeFunction {
    pub fn linear(coeff: f64, tag: ClassTag) -> GaugeFunction {
        GaugeFunction { repr: Repr::Linear(coeff), tag }
    }

    pub fn power(coeff: f64, exponent: f64, tag: ClassTag) -> GaugeFunction {
        GaugeFunction { repr: Repr::Power { coeff, exponent }, tag }
    }

    /// Affine combination of power terms `(coeff, exponent)`.
    pub fn sum(terms: Vec<(f64, f64)>, tag: ClassTag) -> GaugeFunction {
        GaugeFunction { repr: Repr::Sum(terms), tag }
    }

    /// Monotone piecewise-linear table. The table must start at x = 0 and be
    /// strictly increasing in both coordinates; beyond the last point the
    /// final slope is extrapolated.
    pub fn pwl(points: Vec<(f64, f64)>, tag: ClassTag) -> Result<GaugeFunction, GaugeError> {
        if points.len() < 2 {
            return Err(GaugeError::Construction(
                "piecewise-linear table needs at least two points".into(),
            ));
        }
        if points[0].0 != 0.0 {
            return Err(GaugeError::Construction(
                "piecewise-linear table must start at x = 0".into(),
            ));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 || w[1].1 <= w[0].1 {
                return Err(GaugeError::Construction(
                    "piecewise-linear table must be strictly increasing".into(),
                ));
            }
        }
        Ok(GaugeFunction { repr: Repr::Pwl(points), tag })
    }

    pub fn scaled(factor: f64, inner: &GaugeFunction, tag: ClassTag) -> GaugeFunction {
        GaugeFunction {
            repr: Repr::Scaled { factor, inner: Box::new(inner.repr.clone()) },
            tag,
        }
    }

    /// Composition `outer(inner(s))`.
    pub fn compose(outer: &GaugeFunction, inner: &GaugeFunction, tag: ClassTag) -> GaugeFunction {
        GaugeFunction {
            repr: Repr::Compose {
                outer: Box::new(outer.repr.clone()),
                inner: Box::new(inner.repr.clone()),
            },
            tag,
        }
    }

    /// Functional inverse of an increasing gauge.
    pub fn inverse(inner: &GaugeFunction, tag: ClassTag) -> GaugeFunction {
        GaugeFunction { repr: Repr::Inverse(Box::new(inner.repr.clone())), tag }
    }

    /// Opaque increasing closure; inversion falls back to bisection.
    pub fn custom<F>(label: &str, f: F, tag: ClassTag) -> GaugeFunction
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        GaugeFunction {
            repr: Repr::Custom { label: label.to_string(), f: Arc::new(f) },
            tag,
        }
    }

    pub fn tag(&self) -> ClassTag {
        self.tag
    }

    /// Evaluate at `s >= 0`; negative input is a domain error.
    pub fn evaluate(&self, s: f64) -> Result<f64, GaugeError> {
        if s < 0.0 {
            return Err(GaugeError::Domain(s));
        }
        Ok(eval_repr(&self.repr, s))
    }

    /// Evaluation clamping tiny negative float noise to zero.
    pub fn value(&self, s: f64) -> f64 {
        let s = if s < 0.0 { 0.0 } else { s };
        eval_repr(&self.repr, s)
    }

    /// Solve `g(s) = y` for increasing gauges; closed form where the
    /// representation allows, bisection otherwise, to value tolerance
    /// `1e-10 * max(1, y)`.
    pub fn invert(&self, y: f64) -> Result<f64, GaugeError> {
        if !matches!(self.tag, ClassTag::K | ClassTag::KInf) {
            return Err(GaugeError::NotInvertible(self.tag));
        }
        if y < 0.0 {
            return Err(GaugeError::Range { y });
        }
        invert_repr(&self.repr, y)
    }

    /// Apply the gauge `count` times; zero applications return `s`.
    pub fn iterate(&self, s: f64, count: usize) -> Result<f64, GaugeError> {
        let mut v = s;
        for _ in 0..count {
            v = self.evaluate(v)?;
        }
        Ok(v)
    }

    /// Sampled validation of the declared class tag: zero at zero, strict
    /// monotonicity on a thousand sampled pairs, divergence probe for
    /// K-infinity, positivity for positive-definite gauges.
    pub fn validate(&self) -> Result<(), GaugeError> {
        let at0 = self.value(0.0);
        if at0.abs() > 1e-12 {
            return Err(GaugeError::Construction(format!(
                "gauge value at 0 is {at0}, expected 0"
            )));
        }
        let grid = sample_grid(1000, 1e-9, 1e9);
        match self.tag {
            ClassTag::PositiveDefinite => {
                for &s in &grid {
                    if self.value(s) <= 0.0 {
                        return Err(GaugeError::Construction(format!(
                            "positive-definite gauge is nonpositive at s = {s}"
                        )));
                    }
                }
            }
            ClassTag::K | ClassTag::KInf => {
                let mut prev = at0;
                let mut prev_s = 0.0;
                for &s in &grid {
                    let v = self.value(s);
                    if v <= prev {
                        return Err(GaugeError::Construction(format!(
                            "gauge not strictly increasing between s = {prev_s} and s = {s}"
                        )));
                    }
                    prev = v;
                    prev_s = s;
                }
                // Divergence probe; the later arguments admit slowly growing
                // gauges (inverse-composed bounds can grow like a small root).
                if self.tag == ClassTag::KInf
                    && self.value(1e12) <= 1e6
                    && self.value(1e100) <= 1e6
                    && self.value(1e250) <= 1e6
                {
                    return Err(GaugeError::Construction(
                        "gauge declared K-infinity does not diverge (probes at 1e12..1e250 stay below 1e6)"
                            .into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Log-spaced sample grid on `[lo, hi]` used by validation probes.
pub(crate) fn sample_grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (llo + (lhi - llo) * (i as f64) / ((n - 1) as f64)).exp())
        .collect()
}

fn eval_repr(r: &Repr, s: f64) -> f64 {
    match r {
        Repr::Linear(a) => a * s,
        Repr::Power { coeff, exponent } => coeff * s.powf(*exponent),
        Repr::Sum(terms) => terms.iter().map(|(c, e)| c * s.powf(*e)).sum(),
        Repr::Pwl(pts) => {
            let last = pts.len() - 1;
            if s >= pts[last].0 {
                let (x0, y0) = pts[last - 1];
                let (x1, y1) = pts[last];
                return y1 + (s - x1) * (y1 - y0) / (x1 - x0);
            }
            let mut i = match pts.binary_search_by(|p| p.0.partial_cmp(&s).unwrap()) {
                Ok(i) => return pts[i].1,
                Err(i) => i,
            };
            if i == 0 {
                i = 1;
            }
            let (x0, y0) = pts[i - 1];
            let (x1, y1) = pts[i];
            y0 + (s - x0) * (y1 - y0) / (x1 - x0)
        }
        Repr::Scaled { factor, inner } => factor * eval_repr(inner, s),
        Repr::Compose { outer, inner } => eval_repr(outer, eval_repr(inner, s).max(0.0)),
        Repr::Inverse(inner) => invert_repr(inner, s).unwrap_or(f64::NAN),
        Repr::Custom { f, .. } => f(s),
    }
}

fn invert_repr(r: &Repr, y: f64) -> Result<f64, GaugeError> {
    if y == 0.0 {
        return Ok(0.0);
    }
    match r {
        Repr::Linear(a) => Ok(y / a),
        Repr::Power { coeff, exponent } => Ok((y / coeff).powf(1.0 / exponent)),
        Repr::Scaled { factor, inner } => invert_repr(inner, y / factor),
        Repr::Compose { outer, inner } => invert_repr(inner, invert_repr(outer, y)?),
        Repr::Inverse(inner) => Ok(eval_repr(inner, y)),
        Repr::Pwl(pts) => {
            let last = pts.len() - 1;
            if y >= pts[last].1 {
                let (x0, y0) = pts[last - 1];
                let (x1, y1) = pts[last];
                return Ok(x1 + (y - y1) * (x1 - x0) / (y1 - y0));
            }
            let i = match pts.binary_search_by(|p| p.1.partial_cmp(&y).unwrap()) {
                Ok(i) => return Ok(pts[i].0),
                Err(i) => i.max(1),
            };
            let (x0, y0) = pts[i - 1];
            let (x1, y1) = pts[i];
            Ok(x0 + (y - y0) * (x1 - x0) / (y1 - y0))
        }
        Repr::Sum(_) | Repr::Custom { .. } => bisect_invert(r, y),
    }
}

fn bisect_invert(r: &Repr, y: f64) -> Result<f64, GaugeError> {
    let mut hi = 1.0f64.max(y);
    let mut guard = 0;
    while eval_repr(r, hi) < y {
        hi *= 4.0;
        guard += 1;
        if guard > 500 || hi > 1e280 {
            return Err(GaugeError::Range { y });
        }
    }
    // Run to interval collapse: the value contract (1e-10 relative) follows
    // with plenty of slack, and near-machine precision keeps composed
    // inverses monotone at tiny levels.
    let mut lo = 0.0;
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if eval_repr(r, mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Provenance of a KL decay bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KlProvenance {
    ConstructedFromQ,
    UserSupplied,
}

#[derive(Clone)]
enum KlKind {
    Contraction(Arc<ContractionEnvelope>),
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

/// A two-argument decay bound: nondecreasing in the level argument,
/// nonincreasing and vanishing in the step/time argument.
#[derive(Clone)]
pub struct KLBound {
    kind: KlKind,
    pub provenance: KlProvenance,
}

impl fmt::Debug for KLBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            KlKind::Contraction(_) => write!(f, "KLBound(contraction envelope)"),
            KlKind::Custom(_) => write!(f, "KLBound(custom)"),
        }
    }
}

struct ContractionEnvelope {
    knots: Vec<f64>,
    runmax: Vec<f64>,
    g: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl ContractionEnvelope {
    /// Monotone upper envelope of `max(0, s - q(s))` over `[0, s]`,
    /// rounded up to the next grid knot.
    fn env(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let idx = match self
            .knots
            .binary_search_by(|k| k.partial_cmp(&s).unwrap())
        {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        let m = self.runmax[idx];
        let gs = (self.g)(s).clamp(0.0, s);
        m.max(gs)
    }

    fn sigma(&self, s: f64, steps: usize) -> f64 {
        let mut v = s;
        for _ in 0..steps.min(4096) {
            if v == 0.0 {
                break;
            }
            v = self.env(v);
        }
        let guard = if steps < 2048 { s * (0.5f64).powi(steps as i32) } else { 0.0 };
        v + guard
    }
}

impl KLBound {
    pub fn from_rule<F>(f: F) -> KLBound
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        KLBound { kind: KlKind::Custom(Arc::new(f)), provenance: KlProvenance::UserSupplied }
    }

    /// Bound after an integer number of contraction steps.
    pub fn eval_step(&self, s: f64, step: usize) -> f64 {
        match &self.kind {
            KlKind::Contraction(e) => e.sigma(s, step),
            KlKind::Custom(f) => f(s, step as f64),
        }
    }

    /// Bound at a continuous second argument; envelope-backed bounds floor it.
    pub fn eval(&self, s: f64, t: f64) -> f64 {
        match &self.kind {
            KlKind::Contraction(e) => e.sigma(s, t.max(0.0).floor() as usize),
            KlKind::Custom(f) => f(s, t),
        }
    }

    /// The bounds `sigma(s, 0), ..., sigma(s, steps)` in one pass.
    pub fn bounds_through(&self, s: f64, steps: usize) -> Vec<f64> {
        match &self.kind {
            KlKind::Contraction(e) => {
                let mut out = Vec::with_capacity(steps + 1);
                let mut v = s;
                for i in 0..=steps {
                    let guard = if i < 2048 { s * (0.5f64).powi(i as i32) } else { 0.0 };
                    out.push(v + guard);
                    v = e.env(v);
                }
                out
            }
            KlKind::Custom(f) => (0..=steps).map(|i| f(s, i as f64)).collect(),
        }
    }

    /// Least step count i <= max_steps with sigma(s, i) <= target, if any.
    pub fn first_step_below(&self, s: f64, target: f64, max_steps: usize) -> Option<usize> {
        match &self.kind {
            KlKind::Contraction(e) => {
                let mut v = s;
                for i in 0..=max_steps {
                    let guard = if i < 2048 { s * (0.5f64).powi(i as i32) } else { 0.0 };
                    if v + guard <= target {
                        return Some(i);
                    }
                    v = e.env(v);
                }
                None
            }
            KlKind::Custom(f) => (0..=max_steps).find(|&i| f(s, i as f64) <= target),
        }
    }
}

const KL_GRID_LO: f64 = 1e-12;
const KL_GRID_HI: f64 = 1e9;
const KL_KNOTS_PER_DECADE: usize = 600;

/// Construct a KL bound from a pointwise contraction margin `q`.
///
/// Any nonnegative sequence with `V_{i+1} <= V_i - q(V_i)` stays below the
/// returned bound: the monotone grid envelope of `s - q(s)` is iterated and a
/// geometrically vanishing term `s * 2^{-i}` keeps the bound strictly
/// increasing in the level even where the envelope plateaus.
pub fn kl_from_contraction(q: &GaugeFunction) -> Result<KLBound, GaugeError> {
    if q.tag() != ClassTag::PositiveDefinite {
        return Err(GaugeError::Precondition(
            "contraction margin must be tagged positive-definite".into(),
        ));
    }
    let decades = (KL_GRID_HI / KL_GRID_LO).log10().round() as usize;
    let n = decades * KL_KNOTS_PER_DECADE + 1;
    let mut knots = Vec::with_capacity(n + 1);
    knots.push(0.0);
    knots.extend(sample_grid(n, KL_GRID_LO, KL_GRID_HI));

    let qc = q.clone();
    let g = move |s: f64| s - qc.value(s);

    let mut runmax = Vec::with_capacity(knots.len());
    let mut m = 0.0f64;
    let mut prev = 0.0f64;
    for &u in &knots {
        // Interior samples tighten the envelope against humps inside a cell.
        for j in 1..4 {
            let mid = prev + (u - prev) * (j as f64) / 4.0;
            let gv = g(mid);
            if gv > mid + 1e-9 * mid + 1e-300 {
                return Err(GaugeError::Construction(format!(
                    "q({mid}) is negative; clip q to keep s - q(s) <= s"
                )));
            }
            m = m.max(gv.clamp(0.0, mid));
        }
        let gv = g(u);
        if gv > u + 1e-9 * u + 1e-300 {
            return Err(GaugeError::Construction(format!(
                "q({u}) is negative; clip q to keep s - q(s) <= s"
            )));
        }
        m = m.max(gv.clamp(0.0, u));
        runmax.push(m);
        prev = u;
    }

    Ok(KLBound {
        kind: KlKind::Contraction(Arc::new(ContractionEnvelope {
            knots,
            runmax,
            g: Box::new(g),
        })),
        provenance: KlProvenance::ConstructedFromQ,
    })
}

/// Class K-infinity majorant of a nondecreasing map `p` with `p(0+) = 0`:
/// `s + (1/s) * integral of p over [s, 2s]`, by adaptive quadrature.
pub fn kinf_envelope<F>(p: F, check_hi: f64) -> Result<GaugeFunction, GaugeError>
where
    F: Fn(f64) -> f64 + Send + Sync + 'static,
{
    let probe = sample_grid(400, 1e-10, check_hi.max(1.0));
    let mut prev = 0.0;
    let mut prev_s = 0.0;
    for &s in &probe {
        let v = p(s);
        if !v.is_finite() {
            return Err(GaugeError::Precondition(format!("p({s}) is not finite")));
        }
        if v + 1e-12 * (1.0 + v.abs()) < prev {
            return Err(GaugeError::Precondition(format!(
                "p is not nondecreasing between {prev_s} and {s}"
            )));
        }
        prev = prev.max(v);
        prev_s = s;
    }
    if p(1e-12) > 1e-3 {
        return Err(GaugeError::Precondition(
            "p does not vanish at 0+ (p(1e-12) > 1e-3)".into(),
        ));
    }
    let pa = Arc::new(p);
    let g = GaugeFunction::custom(
        "kinf-envelope",
        move |s: f64| {
            if s == 0.0 {
                return 0.0;
            }
            let f = |t: f64| pa(t);
            let scale = 1.0 + s * pa(2.0 * s).abs();
            let integral = adaptive_simpson(&f, s, 2.0 * s, 1e-12 * scale)
                .unwrap_or_else(|| fixed_simpson(&f, s, 2.0 * s, 1024));
            s + integral / s
        },
        ClassTag::KInf,
    );
    g.validate()?;
    Ok(g)
}

fn fixed_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels * 2;
    let h = (b - a) / (n as f64);
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * (i as f64));
    }
    acc * h / 3.0
}

/// A continuously differentiable scalar map on the nonnegative reals with
/// value zero at zero; used for the band-condition correction term.
#[derive(Clone)]
pub struct SmoothScalarMap {
    kind: MuKind,
}

#[derive(Clone)]
enum MuKind {
    Zero,
    /// Sum of power terms (coeff, exponent >= 1).
    Poly(Vec<(f64, f64)>),
    Custom {
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        df: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for SmoothScalarMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            MuKind::Zero => write!(f, "SmoothScalarMap(0)"),
            MuKind::Poly(t) => write!(f, "SmoothScalarMap(poly {t:?})"),
            MuKind::Custom { .. } => write!(f, "SmoothScalarMap(custom)"),
        }
    }
}

impl SmoothScalarMap {
    pub fn zero() -> SmoothScalarMap {
        SmoothScalarMap { kind: MuKind::Zero }
    }

    pub fn linear(coeff: f64) -> SmoothScalarMap {
        SmoothScalarMap { kind: MuKind::Poly(vec![(coeff, 1.0)]) }
    }

    pub fn poly(terms: Vec<(f64, f64)>) -> Result<SmoothScalarMap, GaugeError> {
        if terms.iter().any(|&(_, e)| e < 1.0) {
            return Err(GaugeError::Construction(
                "smooth map power terms need exponent >= 1 for a C1 value at 0".into(),
            ));
        }
        Ok(SmoothScalarMap { kind: MuKind::Poly(terms) })
    }

    pub fn custom<F, G>(f: F, df: G) -> SmoothScalarMap
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        SmoothScalarMap { kind: MuKind::Custom { f: Arc::new(f), df: Arc::new(df) } }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, MuKind::Zero)
    }

    pub fn value(&self, s: f64) -> f64 {
        match &self.kind {
            MuKind::Zero => 0.0,
            MuKind::Poly(terms) => terms.iter().map(|(c, e)| c * s.powf(*e)).sum(),
            MuKind::Custom { f, .. } => f(s),
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match &self.kind {
            MuKind::Zero => 0.0,
            MuKind::Poly(terms) => terms
                .iter()
                .map(|(c, e)| if *e == 0.0 { 0.0 } else { c * e * s.powf(e - 1.0) })
                .sum(),
            MuKind::Custom { df, .. } => df(s),
        }
    }

    /// Sampled validation: value zero at zero and derivative consistent with
    /// central differences to relative 1e-6.
    pub fn validate(&self) -> Result<(), GaugeError> {
        if self.value(0.0).abs() > 1e-12 {
            return Err(GaugeError::Construction("smooth map must vanish at 0".into()));
        }
        for &s in &sample_grid(50, 1e-3, 1e3) {
            let h = 1e-6 * (1.0 + s);
            let fd = (self.value(s + h) - self.value((s - h).max(0.0))) / (s + h - (s - h).max(0.0));
            let an = self.derivative(s);
            if (fd - an).abs() > 1e-6 * (1.0 + an.abs().max(fd.abs())) * 10.0 {
                return Err(GaugeError::Construction(format!(
                    "smooth map derivative mismatch at s = {s}: analytic {an}, sampled {fd}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn evaluate_examples() {
        let rho = GaugeFunction::linear(3.0, ClassTag::KInf);
        assert_eq!(rho.evaluate(2.0).unwrap(), 6.0);

        let lam = GaugeFunction::linear(0.5, ClassTag::K);
        assert_eq!(lam.evaluate(0.0).unwrap(), 0.0);

        // Growth bound of the first worked system with unit gain and unit
        // disturbance amplitude: (1 + p^2 K^2) s = 2 s.
        let b0 = GaugeFunction::linear(2.0, ClassTag::KInf);
        assert_eq!(b0.evaluate(1.5).unwrap(), 3.0);

        assert!(rho.evaluate(-1.0).is_err());
    }

    #[test]
    fn invert_examples() {
        let rho = GaugeFunction::linear(3.0, ClassTag::KInf);
        assert!((rho.invert(6.0).unwrap() - 2.0).abs() < 1e-12);

        let sq = GaugeFunction::power(1.0, 2.0, ClassTag::KInf);
        assert_eq!(sq.invert(0.0).unwrap(), 0.0);

        let table = GaugeFunction::pwl(vec![(0.0, 0.0), (1.0, 2.0), (2.0, 5.0)], ClassTag::K)
            .unwrap();
        assert!((table.invert(3.5).unwrap() - 1.5).abs() < 1e-12);

        let pd = GaugeFunction::linear(1.0, ClassTag::PositiveDefinite);
        assert!(pd.invert(1.0).is_err());
    }

    #[test]
    fn invert_evaluate_identity_across_family() {
        let gauges = vec![
            GaugeFunction::linear(0.37, ClassTag::KInf),
            GaugeFunction::power(2.0, 1.5, ClassTag::KInf),
            GaugeFunction::sum(vec![(1.0, 1.0), (0.25, 3.0)], ClassTag::KInf),
            GaugeFunction::pwl(vec![(0.0, 0.0), (0.5, 0.2), (2.0, 3.0), (7.0, 9.0)], ClassTag::KInf)
                .unwrap(),
            GaugeFunction::custom("s/(1+s) scaled", |s| 5.0 * s / (1.0 + 0.01 * s), ClassTag::K),
        ];
        let mut rng = StdRng::seed_from_u64(7);
        for g in &gauges {
            for _ in 0..1000 {
                let s: f64 = rng.random_range(1e-6..1e4);
                let y = g.value(s);
                let back = g.invert(y).unwrap();
                let fwd = g.value(back);
                assert!(
                    (fwd - y).abs() <= 1e-9 * 1.0f64.max(y.abs()),
                    "{g:?}: s={s} y={y} back={back} fwd={fwd}"
                );
            }
        }
    }

    #[test]
    fn invert_range_error_for_bounded_k() {
        // Bounded class-K gauge: range is [0, 5).
        let g = GaugeFunction::custom("bounded", |s| 5.0 * s / (1.0 + s), ClassTag::K);
        assert!(g.invert(4.9).is_ok());
        assert!(matches!(g.invert(5.1), Err(GaugeError::Range { .. })));
    }

    #[test]
    fn iterate_examples() {
        let half = GaugeFunction::linear(0.5, ClassTag::K);
        assert_eq!(half.iterate(8.0, 3).unwrap(), 1.0);
        assert_eq!(half.iterate(5.0, 0).unwrap(), 5.0);

        let hyp = GaugeFunction::custom("s/(1+s)", |s| s / (1.0 + s), ClassTag::K);
        let v = hyp.iterate(1.0, 2).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn iterate_nonincreasing_under_contraction() {
        let lam = GaugeFunction::custom("s/(1+s)", |s| s / (1.0 + s), ClassTag::K);
        let mut prev = f64::INFINITY;
        for i in 0..40 {
            let v = lam.iterate(3.0, i).unwrap();
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn validation_catches_class_violations() {
        assert!(GaugeFunction::linear(1.0, ClassTag::KInf).validate().is_ok());
        // Bounded gauge mistagged K-infinity.
        let g = GaugeFunction::custom("bounded", |s| s / (1.0 + s), ClassTag::KInf);
        assert!(g.validate().is_err());
        // Nonzero at zero.
        let g = GaugeFunction::custom("offset", |s| s + 1.0, ClassTag::K);
        assert!(g.validate().is_err());
        // Decreasing somewhere.
        let g = GaugeFunction::custom("hump", |s| s * (-s).exp(), ClassTag::K);
        assert!(g.validate().is_err());
    }

    fn admissible_sequence(
        q: &GaugeFunction,
        v0: f64,
        len: usize,
        rng: &mut StdRng,
    ) -> Vec<f64> {
        let mut seq = Vec::with_capacity(len + 1);
        let mut v = v0;
        seq.push(v);
        for _ in 0..len {
            let ceiling = (v - q.value(v)).max(0.0);
            v = ceiling * rng.random_range(0.0..=1.0);
            seq.push(v);
        }
        seq
    }

    #[test]
    fn kl_bound_examples() {
        let q = GaugeFunction::linear(0.5, ClassTag::PositiveDefinite);
        let sigma = kl_from_contraction(&q).unwrap();
        // Envelope of s/2 iterated three times from 8 gives 1; the guard adds
        // 8 * 2^-3 = 1.
        let v = sigma.eval_step(8.0, 3);
        assert!(v <= 2.0 + 1e-12, "sigma(8,3) = {v}");
        assert_eq!(sigma.eval_step(0.0, 5), 0.0);
        assert_eq!(sigma.eval_step(0.0, 0), 0.0);
    }

    #[test]
    fn kl_bound_majorizes_random_sequences() {
        let qs = vec![
            GaugeFunction::linear(0.5, ClassTag::PositiveDefinite),
            GaugeFunction::custom("s^2/(1+s)", |s| s * s / (1.0 + s), ClassTag::PositiveDefinite),
            GaugeFunction::custom("min(s,1)/4", |s| s.min(1.0) / 4.0, ClassTag::PositiveDefinite),
        ];
        let mut rng = StdRng::seed_from_u64(42);
        for q in &qs {
            let sigma = kl_from_contraction(q).unwrap();
            for _ in 0..2000 {
                let v0 = rng.random_range(0.0..1000.0);
                let seq = admissible_sequence(q, v0, 50, &mut rng);
                for (i, &v) in seq.iter().enumerate() {
                    let bound = sigma.eval_step(v0, i);
                    assert!(v <= bound, "violation: V_{i} = {v} > {bound} (V0 = {v0})");
                }
            }
        }
    }

    #[test]
    fn kl_bound_monotone_and_vanishing() {
        let q = GaugeFunction::custom("s^2/(1+s)", |s| s * s / (1.0 + s), ClassTag::PositiveDefinite);
        let sigma = kl_from_contraction(&q).unwrap();
        for &i in &[0usize, 1, 3, 10, 40] {
            let mut prev = 0.0;
            for &s in &[0.01, 0.1, 1.0, 10.0, 100.0] {
                let v = sigma.eval_step(s, i);
                assert!(v >= prev, "sigma not nondecreasing in s at i = {i}");
                prev = v;
            }
        }
        for &s in &[0.5, 5.0, 50.0] {
            let mut prev = f64::INFINITY;
            for i in 0..400 {
                let v = sigma.eval_step(s, i);
                assert!(v <= prev + 1e-15, "sigma increasing in i at s = {s}");
                prev = v;
            }
            // This margin contracts only harmonically, so decay is slow.
            assert!(sigma.eval_step(s, 3000) < 1e-2, "sigma does not vanish");
        }
    }

    #[test]
    fn kl_rejects_negative_margin() {
        let q = GaugeFunction::custom("negative", |s| -0.1 * s, ClassTag::PositiveDefinite);
        assert!(kl_from_contraction(&q).is_err());
    }

    #[test]
    fn kinf_envelope_examples() {
        // p(s) = s^2: integral over [s, 2s] is 7 s^3 / 3.
        let a = kinf_envelope(|s| s * s, 1e3).unwrap();
        assert!((a.value(1.0) - 10.0 / 3.0).abs() < 1e-8);

        let a = kinf_envelope(|_| 0.0, 1e3).unwrap();
        assert!((a.value(3.0) - 3.0).abs() < 1e-12);

        // p(s) = s: envelope is 5s/2 and majorizes p.
        let a = kinf_envelope(|s| s, 1e3).unwrap();
        assert!((a.value(2.0) - 5.0).abs() < 1e-8);
        for &s in &[1e-3, 0.1, 1.0, 7.0, 300.0] {
            assert!(a.value(s) >= s - 1e-12);
        }

        assert!(kinf_envelope(|s| (s - 1.0).abs(), 1e3).is_err());
    }

    #[test]
    fn smooth_map_validation() {
        let mu = SmoothScalarMap::poly(vec![(2.0, 1.0), (0.5, 2.0)]).unwrap();
        mu.validate().unwrap();
        assert_eq!(mu.value(0.0), 0.0);
        assert!((mu.derivative(1.0) - 3.0).abs() < 1e-12);

        let bad = SmoothScalarMap::custom(|s| s, |_| 2.0);
        assert!(bad.validate().is_err());
    }
}
