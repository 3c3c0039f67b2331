//! Certificate data model and its derived quantities: region classification
//! into good/transition/bad sets, the constructive dwell bound, the
//! contraction horizon T(x), and the polynomial chain bound with the first
//! time it falls below the recovery threshold.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::expr::ScalarField;
use crate::gauge::{sample_grid, ClassTag, GaugeError, GaugeFunction, SmoothScalarMap};
use crate::numerics::adaptive_simpson;

#[derive(Debug, Error)]
pub enum CertificateError {
    #[error(transparent)]
    Gauge(#[from] GaugeError),
    #[error("certificate structure invalid: {0}")]
    Structural(String),
    #[error("contraction-time quadrature failed near the decay-margin floor (condition 3.9): {0}")]
    Quadrature(String),
    #[error("dwell inequality (3.7) violated at level {s}: {detail}")]
    DwellViolation { s: f64, detail: String },
    #[error("dwell construction precondition failed: {0}")]
    DwellPrecondition(String),
}

/// The dwell-time map `r`: constant, an explicit formula, or the constructive
/// fallback assembled from the certificate data.
#[derive(Clone)]
pub enum DwellMap {
    Constant(f64),
    Formula(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for DwellMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DwellMap::Constant(c) => write!(f, "DwellMap::Constant({c})"),
            DwellMap::Formula(_) => write!(f, "DwellMap::Formula"),
        }
    }
}

impl DwellMap {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            DwellMap::Constant(c) => *c,
            DwellMap::Formula(f) => f(s),
        }
    }
}

/// Certificate with gauge-valued data: a positive definite radially unbounded
/// V, an auxiliary chain W_0..W_k, and the scalar gauges tying them together.
#[derive(Debug, Clone)]
pub struct GeneralCertificate {
    pub v: ScalarField,
    /// Auxiliary chain `W_0 .. W_k`; never empty (use an identically-zero
    /// W_0 for the classical special case).
    pub chain: Vec<ScalarField>,
    pub rho: GaugeFunction,
    pub c1: GaugeFunction,
    pub c2: GaugeFunction,
    pub g: GaugeFunction,
    /// Optional relaxed chain-floor gauge for the sign-restricted variant.
    pub g_tilde: Option<GaugeFunction>,
    pub lambda: GaugeFunction,
    pub gamma: GaugeFunction,
    /// Chain growth bounds `b_0 .. b_k`, one per chain member.
    pub b: Vec<GaugeFunction>,
    pub r: DwellMap,
    pub mu: SmoothScalarMap,
    /// Optional positive time-rescaling factor.
    pub phi: Option<ScalarField>,
    /// Set by the classical auto-completion: W_0 is identically zero, so the
    /// region `W_0 >= c2(V)` is the origin alone and region-restricted
    /// conditions hold vacuously.
    pub w0_identically_zero: bool,
}

impl GeneralCertificate {
    pub fn k(&self) -> usize {
        self.chain.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.v.dim()
    }

    /// Structural validation: gauge classes, the pointwise gauge orderings on
    /// a sampled level grid, the nondecreasing combined band gauge, and zero
    /// chain values at the origin.
    // Negated comparisons so NaN values fail validation.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), CertificateError> {
        if self.chain.is_empty() {
            return Err(CertificateError::Structural("chain must contain W_0".into()));
        }
        if self.b.len() != self.chain.len() {
            return Err(CertificateError::Structural(format!(
                "{} growth bounds for {} chain members",
                self.b.len(),
                self.chain.len()
            )));
        }
        for (label, gauge) in [
            ("rho", &self.rho),
            ("c1", &self.c1),
            ("c2", &self.c2),
            ("g", &self.g),
            ("gamma", &self.gamma),
        ] {
            gauge
                .validate()
                .map_err(|e| CertificateError::Structural(format!("gauge {label}: {e}")))?;
            if gauge.tag() != ClassTag::KInf {
                return Err(CertificateError::Structural(format!(
                    "gauge {label} must be class K-infinity"
                )));
            }
        }
        if let Some(gt) = &self.g_tilde {
            gt.validate()
                .map_err(|e| CertificateError::Structural(format!("gauge g~: {e}")))?;
        }
        self.lambda
            .validate()
            .map_err(|e| CertificateError::Structural(format!("gauge lambda: {e}")))?;
        if !matches!(self.lambda.tag(), ClassTag::K | ClassTag::KInf) {
            return Err(CertificateError::Structural("lambda must be class K".into()));
        }
        self.mu
            .validate()
            .map_err(|e| CertificateError::Structural(format!("mu: {e}")))?;

        let grid = sample_grid(400, 1e-8, 1e8);
        for &s in &grid {
            let rho = self.rho.value(s);
            let c1 = self.c1.value(s);
            let c2 = self.c2.value(s);
            if !(rho > c1) {
                return Err(CertificateError::Structural(format!(
                    "need rho(s) > c1(s); at s = {s}: {rho} vs {c1}"
                )));
            }
            if !(c1 >= c2) {
                return Err(CertificateError::Structural(format!(
                    "need c1(s) >= c2(s); at s = {s}: {c1} vs {c2}"
                )));
            }
            let lam = self.lambda.value(s);
            if !(lam < s) {
                return Err(CertificateError::Structural(format!(
                    "need lambda(s) < s; at s = {s}: {lam}"
                )));
            }
            for (i, bi) in self.b.iter().enumerate() {
                if bi.value(s) < 0.0 {
                    return Err(CertificateError::Structural(format!(
                        "growth bound b{i} negative at s = {s}"
                    )));
                }
            }
        }
        let mut prev_kappa = f64::NEG_INFINITY;
        for &s in &grid {
            let kappa = self.c1.value(s) + self.mu.value(s);
            if kappa < prev_kappa - 1e-9 * (1.0 + prev_kappa.abs()) {
                return Err(CertificateError::Structural(format!(
                    "combined band gauge c1 + mu decreases near s = {s}"
                )));
            }
            prev_kappa = prev_kappa.max(kappa);
        }

        let zero = vec![0.0; self.dim()];
        if self.v.value(&zero).abs() > 1e-12 {
            return Err(CertificateError::Structural("V(0) must be 0".into()));
        }
        for (i, w) in self.chain.iter().enumerate() {
            let w0 = w.value(&zero).abs();
            if w0 > 1e-12 {
                return Err(CertificateError::Structural(format!(
                    "W{i}(0) = {w0}, expected 0"
                )));
            }
        }
        if let Some(phi) = &self.phi {
            // Positivity probe on a coarse deterministic lattice.
            let n = self.dim();
            let mut idx = vec![0usize; n];
            loop {
                let x: Vec<f64> = idx.iter().map(|&j| -10.0 + 5.0 * j as f64).collect();
                if phi.value(&x) <= 0.0 {
                    return Err(CertificateError::Structural(format!(
                        "phi must be positive; phi({x:?}) <= 0"
                    )));
                }
                let mut c = 0;
                while c < n {
                    idx[c] += 1;
                    if idx[c] < 5 {
                        break;
                    }
                    idx[c] = 0;
                    c += 1;
                }
                if c == n {
                    break;
                }
            }
        }
        Ok(())
    }
}

/// Certificate with constant rates: every gauge is linear in the level and
/// the chain bounds, dwell and overshoot are scalars.
#[derive(Debug, Clone)]
pub struct LinearRateCertificate {
    pub v: ScalarField,
    pub chain: Vec<ScalarField>,
    pub rho: f64,
    pub c1: f64,
    pub c2: f64,
    pub g: f64,
    pub g_tilde: Option<f64>,
    pub lambda: f64,
    pub gamma: f64,
    pub mu: f64,
    pub b: Vec<f64>,
    pub r: f64,
    pub phi: Option<ScalarField>,
    /// Quadratic envelope constants `0 < K1 < K2` with
    /// `K1 |x|^2 <= V(x) <= K2 |x|^2`, required for the exponential verdict.
    pub quad_envelope: Option<(f64, f64)>,
}

impl LinearRateCertificate {
    pub fn k(&self) -> usize {
        self.chain.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.v.dim()
    }

    /// Exact verification of the constant orderings.
    pub fn validate(&self) -> Result<(), CertificateError> {
        if self.chain.is_empty() || self.b.len() != self.chain.len() {
            return Err(CertificateError::Structural(
                "chain and growth bounds must be nonempty and of equal length".into(),
            ));
        }
        if !(self.rho > self.c1 && self.c1 >= self.c2 && self.c2 > 0.0) {
            return Err(CertificateError::Structural(format!(
                "need rho > c1 >= c2 > 0, got rho = {}, c1 = {}, c2 = {}",
                self.rho, self.c1, self.c2
            )));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(CertificateError::Structural(format!(
                "need lambda in (0, 1), got {}",
                self.lambda
            )));
        }
        if self.mu < -self.c1 {
            return Err(CertificateError::Structural(format!(
                "need mu >= -c1, got mu = {}, c1 = {}",
                self.mu, self.c1
            )));
        }
        if self.b.iter().any(|&bi| bi < 0.0) {
            return Err(CertificateError::Structural(
                "growth bounds must be nonnegative".into(),
            ));
        }
        if self.b[0] < self.rho {
            return Err(CertificateError::Structural(format!(
                "need b0 >= rho, got b0 = {}, rho = {}",
                self.b[0], self.rho
            )));
        }
        if self.g <= 0.0 || self.gamma <= 0.0 || self.r <= 0.0 {
            return Err(CertificateError::Structural(
                "g, gamma and r must be positive".into(),
            ));
        }
        if let Some(gt) = self.g_tilde {
            if gt <= 0.0 {
                return Err(CertificateError::Structural("g~ must be positive".into()));
            }
        }
        if let Some((k1, k2)) = self.quad_envelope {
            if !(0.0 < k1 && k1 < k2) {
                return Err(CertificateError::Structural(format!(
                    "quadratic envelope needs 0 < K1 < K2, got ({k1}, {k2})"
                )));
            }
        }
        let zero = vec![0.0; self.dim()];
        for (i, w) in self.chain.iter().enumerate() {
            if w.value(&zero).abs() > 1e-12 {
                return Err(CertificateError::Structural(format!("W{i}(0) must be 0")));
            }
        }
        Ok(())
    }

    /// View with the constants lifted to gauges, for the shared machinery
    /// (classification, contraction horizon, contraction runs).
    pub fn to_general(&self) -> GeneralCertificate {
        GeneralCertificate {
            v: self.v.clone(),
            chain: self.chain.clone(),
            rho: GaugeFunction::linear(self.rho, ClassTag::KInf),
            c1: GaugeFunction::linear(self.c1, ClassTag::KInf),
            c2: GaugeFunction::linear(self.c2, ClassTag::KInf),
            g: GaugeFunction::linear(self.g, ClassTag::KInf),
            g_tilde: self
                .g_tilde
                .map(|gt| GaugeFunction::linear(gt, ClassTag::KInf)),
            lambda: GaugeFunction::linear(self.lambda, ClassTag::K),
            gamma: GaugeFunction::linear(self.gamma, ClassTag::KInf),
            b: self
                .b
                .iter()
                .map(|&bi| GaugeFunction::linear(bi, ClassTag::PositiveDefinite))
                .collect(),
            r: DwellMap::Constant(self.r),
            mu: SmoothScalarMap::linear(self.mu),
            phi: self.phi.clone(),
            w0_identically_zero: false,
        }
    }
}

/// A certificate in either flavor.
#[derive(Debug, Clone)]
pub enum Certificate {
    General(GeneralCertificate),
    LinearRate(LinearRateCertificate),
}

impl Certificate {
    pub fn validate(&self) -> Result<(), CertificateError> {
        match self {
            Certificate::General(c) => c.validate(),
            Certificate::LinearRate(c) => c.validate(),
        }
    }

    pub fn general_view(&self) -> GeneralCertificate {
        match self {
            Certificate::General(c) => c.clone(),
            Certificate::LinearRate(c) => c.to_general(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Certificate::General(c) => c.dim(),
            Certificate::LinearRate(c) => c.dim(),
        }
    }
}

/// Classical auto-completion: given a strict decay gauge for
/// `max_d grad V . f <= -rho(V)`, fill in the canonical certificate with an
/// identically-zero chain. The filled data follows the standard pattern
/// `c1 = (3/4) rho`, `c2(s) = (1/2) rho(s/2)`, `gamma = id`, `r = 1`, and a
/// default `lambda(s) = max{s/2, s - rho(s/2)/4}` (supply `lambda` explicitly
/// when that default fails its monotonicity validation).
pub fn classical_auto(
    v: ScalarField,
    rho: GaugeFunction,
    lambda: Option<GaugeFunction>,
) -> Result<GeneralCertificate, CertificateError> {
    let n = v.dim();
    let c1 = GaugeFunction::scaled(0.75, &rho, ClassTag::KInf);
    let rho_c2 = rho.clone();
    let c2 = GaugeFunction::custom(
        "rho(s/2)/2",
        move |s| 0.5 * rho_c2.value(0.5 * s),
        ClassTag::KInf,
    );
    let lambda = lambda.unwrap_or_else(|| {
        let rho_l = rho.clone();
        GaugeFunction::custom(
            "max(s/2, s - rho(s/2)/4)",
            move |s| (0.5 * s).max(s - 0.25 * rho_l.value(0.5 * s)),
            ClassTag::K,
        )
    });
    let cert = GeneralCertificate {
        chain: vec![ScalarField::from_expr(crate::expr::Expr::Const(0.0), n)],
        v,
        c1,
        g: c2.clone(),
        c2,
        g_tilde: None,
        lambda,
        gamma: GaugeFunction::linear(1.0, ClassTag::KInf),
        b: vec![GaugeFunction::linear(0.0, ClassTag::PositiveDefinite)],
        r: DwellMap::Constant(1.0),
        mu: SmoothScalarMap::zero(),
        phi: None,
        rho,
        w0_identically_zero: true,
    };
    cert.validate()?;
    Ok(cert)
}

/// Where a state sits relative to the recovery band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionKind {
    /// `W_0 < c2(V)`: full decay margin available.
    Good,
    /// `c2(V) <= W_0 <= c1(V)`: the band controlled by the combined gauge.
    Transition,
    /// `W_0 > c1(V)`: the derivative of V may be positive here.
    Bad,
}

#[derive(Debug, Clone)]
pub struct RegionLabel {
    pub kind: RegionKind,
    pub w0: f64,
    pub c1_v: f64,
    pub c2_v: f64,
}

impl RegionLabel {
    /// In the region where the chain conditions apply (`W_0 >= c2(V)`).
    pub fn in_chain_region(&self) -> bool {
        matches!(self.kind, RegionKind::Transition | RegionKind::Bad)
    }
}

/// Classify a state against the certificate's band, with a boundary tolerance
/// of `1e-12 * (1 + V(x))` resolved toward Transition (the band conditions
/// hold on closed regions, so the conservative label is sound).
pub fn classify(cert: &GeneralCertificate, x: &[f64]) -> RegionLabel {
    let v = cert.v.value(x);
    let w0 = cert.chain[0].value(x);
    let c1_v = cert.c1.value(v.max(0.0));
    let c2_v = cert.c2.value(v.max(0.0));
    let eps = 1e-12 * (1.0 + v.abs());
    let kind = if w0 < c2_v - eps {
        RegionKind::Good
    } else if w0 > c1_v + eps {
        RegionKind::Bad
    } else {
        RegionKind::Transition
    };
    RegionLabel { kind, w0, c1_v, c2_v }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Polynomial chain bound at elapsed time `t` from chain values `w` at the
/// segment start and the decay floor `g_floor`:
/// `sum_i t^i / i! * w[i]  -  g_floor * t^(k+1) / (k+1)!`.
pub fn chain_bound(w: &[f64], g_floor: f64, t: f64) -> f64 {
    let k = w.len() - 1;
    let mut acc = 0.0;
    let mut t_pow = 1.0;
    for (i, wi) in w.iter().enumerate() {
        acc += t_pow / factorial(i) * wi;
        t_pow *= t;
    }
    acc - g_floor * t_pow / factorial(k + 1)
}

/// The constructive dwell map built from the certificate data:
///
/// `r(s) = 1 + max{ ((k+1)! (k+1) (b0(s) - c2(lambda(s))) / g(lambda(s)))^(1/(k+1)),
///                  max_{i=1..k} ((k+1)! (k+1) b_i(s) / (i! g(lambda(s))))^(1/(k+1-i)) }`
///
/// with negative radicands clamped to zero (clamping only enlarges r, which
/// keeps the dwell inequality checkable) and `r(0) = 1`. The preconditions —
/// bounded ratios near zero — are sampled, and the produced map is verified
/// against the dwell inequality (3.7) on a thousand-point level grid.
pub fn auto_dwell(cert: &GeneralCertificate) -> Result<DwellMap, CertificateError> {
    let k = cert.k();
    for &s in &sample_grid(100, 1e-8, 1e-2) {
        let gl = cert.g.value(cert.lambda.value(s));
        if gl <= 0.0 {
            return Err(CertificateError::DwellPrecondition(format!(
                "g(lambda(s)) vanishes at s = {s}"
            )));
        }
        let head = (cert.b[0].value(s) - cert.c2.value(cert.lambda.value(s))) / gl;
        if !head.is_finite() || head > 1e12 {
            return Err(CertificateError::DwellPrecondition(format!(
                "ratio (b0(s) - c2(lambda(s))) / g(lambda(s)) explodes near 0 (s = {s}: {head})"
            )));
        }
        for (i, bi) in cert.b.iter().enumerate().skip(1) {
            let ratio = bi.value(s) / gl;
            if !ratio.is_finite() || ratio > 1e12 {
                return Err(CertificateError::DwellPrecondition(format!(
                    "ratio b{i}(s) / g(lambda(s)) explodes near 0 (s = {s}: {ratio})"
                )));
            }
        }
    }

    let b = cert.b.clone();
    let c2 = cert.c2.clone();
    let g = cert.g.clone();
    let lambda = cert.lambda.clone();
    let fac = factorial(k + 1);
    let map = DwellMap::Formula(Arc::new(move |s: f64| {
        if s <= 0.0 {
            return 1.0;
        }
        let ls = lambda.value(s);
        let gl = g.value(ls);
        let mut best = ((fac * (k + 1) as f64 * (b[0].value(s) - c2.value(ls)).max(0.0)) / gl)
            .powf(1.0 / (k + 1) as f64);
        for (i, bi) in b.iter().enumerate().skip(1) {
            let cand = ((fac * (k + 1) as f64 * bi.value(s)) / (factorial(i) * gl))
                .powf(1.0 / (k + 1 - i) as f64);
            best = best.max(cand);
        }
        1.0 + best
    }));

    for &s in &sample_grid(1000, 1e-6, 1e6) {
        let margin = dwell_margin(cert, &map, s);
        if margin <= 0.0 {
            return Err(CertificateError::DwellViolation {
                s,
                detail: format!("constructed dwell map leaves margin {margin}"),
            });
        }
    }
    Ok(map)
}

/// Slack of the dwell inequality (3.7) at level `s` for the given dwell map:
/// `c2(lambda(s)) + g(lambda(s)) r^(k+1)/(k+1)!  -  sum_i r^i/i! b_i(s)`.
pub fn dwell_margin(cert: &GeneralCertificate, r: &DwellMap, s: f64) -> f64 {
    let k = cert.k();
    let rs = r.eval(s);
    let ls = cert.lambda.value(s);
    let lhs = cert.c2.value(ls) + cert.g.value(ls) * rs.powi((k + 1) as i32) / factorial(k + 1);
    let rhs: f64 = cert
        .b
        .iter()
        .enumerate()
        .map(|(i, bi)| rs.powi(i as i32) / factorial(i) * bi.value(s))
        .sum();
    lhs - rhs
}

/// Contraction horizon `T(x) = r(V(x)) + integral over [lambda(V), gamma(V)]
/// of 1 / (rho - c1)`, with `T(0) = 1` and a hard singularity guard: a decay
/// margin below 1e-14 anywhere on the interval is reported as a failure of
/// the integrability condition rather than integrated through.
pub fn contraction_time(cert: &GeneralCertificate, x: &[f64]) -> Result<f64, CertificateError> {
    let v = cert.v.value(x);
    contraction_time_at_level(cert, v)
}

/// Same as [`contraction_time`] but from the level `s = V(x)` directly.
pub fn contraction_time_at_level(
    cert: &GeneralCertificate,
    s: f64,
) -> Result<f64, CertificateError> {
    if s <= 0.0 {
        return Ok(1.0);
    }
    let lo = cert.lambda.value(s);
    let hi = cert.gamma.value(s);
    let r = cert.r.eval(s);
    if hi <= lo {
        return Ok(r);
    }
    let mut c_min = f64::INFINITY;
    let mut rough = 0.0;
    let scan = 1024usize;
    for i in 0..=scan {
        let tau = lo + (hi - lo) * (i as f64) / (scan as f64);
        let c = cert.rho.value(tau) - cert.c1.value(tau);
        // The guard is relative to the level: a decay margin vanishing
        // faster than linearly in tau is a genuine integrability failure,
        // while any proportional margin stays integrable down to zero.
        if c < 1e-14 * tau.max(f64::MIN_POSITIVE) {
            return Err(CertificateError::Quadrature(format!(
                "rho - c1 = {c} at tau = {tau} inside [{lo}, {hi}]"
            )));
        }
        c_min = c_min.min(c);
        rough += (hi - lo) / (scan as f64) / c;
    }
    let rho = cert.rho.clone();
    let c1 = cert.c1.clone();
    let integrand = move |tau: f64| 1.0 / (rho.value(tau) - c1.value(tau));
    let tol = 1e-10 * (1.0 + rough);
    let integral = adaptive_simpson(&integrand, lo, hi, tol).ok_or_else(|| {
        CertificateError::Quadrature(format!(
            "adaptive quadrature did not converge on [{lo}, {hi}] (floor {c_min})"
        ))
    })?;
    Ok(r + integral)
}

/// Earliest `t` in `[0, r(s)]` at which the chain bound assembled from the
/// growth bounds at level `s` falls below the recovery threshold
/// `c2(lambda(s))`; guaranteed to exist by the dwell inequality, and reported
/// as a violation of it otherwise.
pub fn dwell_exit_bound(cert: &GeneralCertificate, s: f64) -> Result<f64, CertificateError> {
    let ls = cert.lambda.value(s);
    let threshold = cert.c2.value(ls);
    let g_floor = cert.g.value(ls);
    let w: Vec<f64> = cert.b.iter().map(|bi| bi.value(s)).collect();
    let rs = cert.r.eval(s);
    let bound = |t: f64| chain_bound(&w, g_floor, t);
    if bound(0.0) < threshold {
        return Ok(0.0);
    }
    let scan = 4096usize;
    let mut prev = 0.0;
    for i in 1..=scan {
        let t = rs * (i as f64) / (scan as f64);
        if bound(t) < threshold {
            // margin(t) = threshold - bound(t) crosses zero in (prev, t].
            let margin = |u: f64| threshold - bound(u);
            let t_star =
                crate::numerics::bisect_increasing(&margin, prev, t, 1e-12 * rs.max(1.0));
            return Ok(t_star);
        }
        prev = t;
    }
    Err(CertificateError::DwellViolation {
        s,
        detail: format!("chain bound stays above c2(lambda(s)) = {threshold} on [0, {rs}]"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ScalarField;

    /// Gauge data of the first worked example with unit parameters:
    /// rho(s) = s, c1 = 0.5 s, lambda = 0.5 s, b0 = 2 s,
    /// c2 = c1 lambda^2 b0^{-1} = 0.0625 s, g = 2 c2, gamma = b0.
    fn example_general() -> GeneralCertificate {
        let b0 = GaugeFunction::linear(2.0, ClassTag::KInf);
        let c2 = GaugeFunction::scaled(
            0.5 * 0.25,
            &GaugeFunction::inverse(&b0, ClassTag::KInf),
            ClassTag::KInf,
        );
        let g = GaugeFunction::scaled(2.0, &c2, ClassTag::KInf);
        let v = ScalarField::norm_squared(2);
        let w0 = ScalarField::parse("x1^2", 2).unwrap();
        let b0c = b0.clone();
        let c2c = c2.clone();
        GeneralCertificate {
            v,
            chain: vec![w0],
            rho: GaugeFunction::linear(1.0, ClassTag::KInf),
            c1: GaugeFunction::linear(0.5, ClassTag::KInf),
            c2,
            g,
            g_tilde: None,
            lambda: GaugeFunction::linear(0.5, ClassTag::K),
            gamma: b0.clone(),
            b: vec![b0],
            r: DwellMap::Formula(Arc::new(move |s| {
                if s <= 0.0 {
                    1.0
                } else {
                    0.5 + b0c.value(s) / (2.0 * c2c.value(0.5 * s))
                }
            })),
            mu: SmoothScalarMap::zero(),
            phi: None,
            w0_identically_zero: false,
        }
    }

    #[test]
    fn example_certificate_validates() {
        example_general().validate().unwrap();
    }

    #[test]
    fn classify_examples() {
        // Constants from the second worked example at the reference parameter.
        let p: f64 = 0.2366431913239846; // (1/5) sqrt(7/5)
        let c1 = 2.8594;
        let c2 = 2.6094;
        let w0_coeff = 3.0 + p * p;
        let cert = LinearRateCertificate {
            v: ScalarField::norm_squared(2),
            chain: vec![
                ScalarField::parse(&format!("{w0_coeff}*x1^2"), 2).unwrap(),
                ScalarField::parse(&format!("2*{w0_coeff}*x1*x2"), 2).unwrap(),
            ],
            rho: 3.0,
            c1,
            c2,
            g: 0.0075,
            g_tilde: Some(2.0 * w0_coeff),
            lambda: 0.9999,
            gamma: 1.02,
            mu: 10.66,
            b: vec![w0_coeff, w0_coeff],
            r: 1614.0,
            phi: None,
            quad_envelope: Some((0.5, 2.0)),
        }
        .to_general();

        // Off the coupling axis W_0 vanishes: good region.
        let lab = classify(&cert, &[0.0, 1.0]);
        assert_eq!(lab.kind, RegionKind::Good);
        assert_eq!(lab.w0, 0.0);

        // On the axis W_0 = 3 + p^2 > c1: bad region.
        let lab = classify(&cert, &[1.0, 0.0]);
        assert_eq!(lab.kind, RegionKind::Bad);
        assert!((lab.w0 - 3.056).abs() < 1e-12);
        assert!(lab.w0 > lab.c1_v);

        // Sector boundary |x2/x1| = sqrt((3 + p^2 - c2)/c2): transition.
        let y = ((w0_coeff - c2) / c2).sqrt();
        assert!((y - 0.41370).abs() < 1e-4);
        let lab = classify(&cert, &[1.0, y]);
        assert_eq!(lab.kind, RegionKind::Transition);
    }

    #[test]
    fn classify_scale_consistent_for_quadratic_forms() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let cert = example_general();
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..500 {
            let x = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            let a: f64 = rng.random_range(0.1..10.0);
            let scaled = [a * x[0], a * x[1]];
            // Both sides of the region inequalities are degree-2 homogeneous
            // here (quadratic forms against linear gauges of a quadratic V).
            let l1 = classify(&cert, &x).kind;
            let l2 = classify(&cert, &scaled).kind;
            assert_eq!(l1, l2, "x = {x:?}, a = {a}");
        }
    }

    #[test]
    fn chain_bound_examples() {
        assert_eq!(chain_bound(&[1.0, 0.0], 2.0, 1.0), 0.0);
        assert_eq!(chain_bound(&[1.0, 1.0], 1.0, 0.0), 1.0);
        // Degree-2 polynomial: 1 + t - t^2/2 at t = 2.
        assert!((chain_bound(&[1.0, 1.0], 1.0, 2.0) - 1.0).abs() < 1e-12);
        // One more chain member (zero) moves the floor term to t^3/3!.
        let v = chain_bound(&[1.0, 1.0, 0.0], 1.0, 2.0);
        assert!((v - (1.0 + 2.0 - 8.0 / 6.0)).abs() < 1e-12);
    }

    #[test]
    fn chain_bound_derivative_at_zero_is_w1() {
        let w = [0.7, -0.3, 1.1];
        let h = 1e-7;
        let fd = (chain_bound(&w, 2.0, h) - chain_bound(&w, 2.0, 0.0)) / h;
        assert!((fd - w[1]).abs() < 1e-5);
    }

    #[test]
    fn dwell_formula_constant_for_linear_data() {
        let cert = example_general();
        for &s in &[0.1, 1.0, 10.0, 1e4] {
            assert!((cert.r.eval(s) - 32.5).abs() < 1e-9, "r({s})");
        }
        assert_eq!(cert.r.eval(0.0), 1.0);
    }

    #[test]
    fn auto_dwell_matches_analytic_formula_here() {
        // With g = 2 c2 the constructive map collapses to the same constant:
        // 1 + (b0 - c2 o lambda) / (g o lambda) = 1/2 + b0 / (2 c2 o lambda).
        let cert = example_general();
        let auto = auto_dwell(&cert).unwrap();
        for &s in &[1e-3, 0.5, 2.0, 1e3] {
            assert!(
                (auto.eval(s) - 32.5).abs() < 1e-9,
                "auto r({s}) = {}",
                auto.eval(s)
            );
        }
    }

    #[test]
    fn auto_dwell_clamps_zero_bracket() {
        // k = 0 with b0 = c2 o lambda makes the radicand zero: r = 1.
        let c2 = GaugeFunction::linear(2.0, ClassTag::KInf);
        let lambda = GaugeFunction::linear(0.5, ClassTag::K);
        let b0 = GaugeFunction::linear(1.0, ClassTag::KInf); // equals c2 o lambda
        let cert = GeneralCertificate {
            v: ScalarField::norm_squared(1),
            chain: vec![ScalarField::parse("x1^2", 1).unwrap()],
            rho: GaugeFunction::linear(3.0, ClassTag::KInf),
            c1: GaugeFunction::linear(2.5, ClassTag::KInf),
            c2,
            g: GaugeFunction::linear(1.0, ClassTag::KInf),
            g_tilde: None,
            lambda,
            gamma: GaugeFunction::linear(2.0, ClassTag::KInf),
            b: vec![b0],
            r: DwellMap::Constant(1.0),
            mu: SmoothScalarMap::zero(),
            phi: None,
            w0_identically_zero: false,
        };
        let auto = auto_dwell(&cert).unwrap();
        for &s in &[0.5, 1.0, 100.0] {
            assert!((auto.eval(s) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn auto_dwell_satisfies_dwell_inequality_on_grid() {
        let cert = example_general();
        let auto = auto_dwell(&cert).unwrap();
        for &s in &sample_grid(1000, 1e-6, 1e6) {
            assert!(dwell_margin(&cert, &auto, s) > 0.0, "margin at {s}");
        }
    }

    #[test]
    fn contraction_time_closed_form_log_integral() {
        // Constant-rate data: rho = 3, c1 = 2.8594, lambda = 0.9999 and the
        // derived overshoot constant at the reference disturbance amplitude.
        let p: f64 = 0.2366431913239846;
        let lambda = 0.9999f64;
        let gamma = (3.0 + p * p) * (lambda + 1.0) * (lambda + 1.0) / (12.0 * lambda);
        let cert = LinearRateCertificate {
            v: ScalarField::norm_squared(2),
            chain: vec![ScalarField::parse("x1^2", 2).unwrap()],
            rho: 3.0,
            c1: 2.8594,
            c2: 2.6094,
            g: 1.0,
            g_tilde: None,
            lambda,
            gamma,
            mu: 0.0,
            b: vec![3.1],
            r: 7.0,
            phi: None,
            quad_envelope: None,
        }
        .to_general();
        let t = contraction_time(&cert, &[1.0, 0.0]).unwrap();
        let expected = 7.0 + (gamma.ln() - lambda.ln()) / (3.0 - 2.8594);
        assert!((t - expected).abs() < 1e-6, "{t} vs {expected}");
        assert!((expected - 7.0 - 0.13228).abs() < 1e-4);
    }

    #[test]
    fn contraction_time_degenerate_and_origin() {
        let mut cert = example_general();
        // gamma = lambda collapses the integral.
        cert.gamma = GaugeFunction::linear(0.5, ClassTag::KInf);
        let t = contraction_time(&cert, &[1.0, 1.0]).unwrap();
        assert!((t - 32.5).abs() < 1e-9);
        assert_eq!(contraction_time(&cert, &[0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn contraction_time_guards_singularity() {
        let mut cert = example_general();
        // c1 = rho makes the integrand singular.
        cert.c1 = GaugeFunction::linear(1.0, ClassTag::KInf);
        assert!(matches!(
            contraction_time(&cert, &[1.0, 1.0]),
            Err(CertificateError::Quadrature(_))
        ));
    }

    #[test]
    fn contraction_time_shrinks_with_larger_decay() {
        let cert = example_general();
        let t1 = contraction_time(&cert, &[2.0, 0.0]).unwrap();
        let mut boosted = cert.clone();
        boosted.rho = GaugeFunction::linear(2.0, ClassTag::KInf);
        let t2 = contraction_time(&boosted, &[2.0, 0.0]).unwrap();
        assert!(t2 < t1);
    }

    #[test]
    fn dwell_exit_examples() {
        let cert = example_general();
        let t = dwell_exit_bound(&cert, 1.0).unwrap();
        assert!(t >= 0.0 && t <= 32.5);
        // Dense-scan oracle agreement.
        let w: Vec<f64> = cert.b.iter().map(|b| b.value(1.0)).collect();
        let g_floor = cert.g.value(cert.lambda.value(1.0));
        let threshold = cert.c2.value(cert.lambda.value(1.0));
        let mut oracle = None;
        for i in 0..=2_000_000 {
            let u = 32.5 * (i as f64) / 2e6;
            if chain_bound(&w, g_floor, u) < threshold {
                oracle = Some(u);
                break;
            }
        }
        let oracle = oracle.expect("oracle found no exit");
        assert!((t - oracle).abs() < 32.5 / 1e6 + 1e-6, "{t} vs {oracle}");

        // Zero growth bounds drop the bound below any positive threshold
        // immediately.
        let mut zeroed = cert.clone();
        zeroed.b = vec![GaugeFunction::linear(0.0, ClassTag::PositiveDefinite)];
        assert_eq!(dwell_exit_bound(&zeroed, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn dwell_exit_monotone_in_decay_floor() {
        let w = [2.0, 1.0];
        let threshold = 0.5;
        let mut prev = f64::INFINITY;
        for &gf in &[0.5, 1.0, 2.0, 4.0, 8.0] {
            let bound = |t: f64| chain_bound(&w, gf, t);
            let mut first = None;
            for i in 0..=100_000 {
                let t = 10.0 * (i as f64) / 1e5;
                if bound(t) < threshold {
                    first = Some(t);
                    break;
                }
            }
            let t = first.unwrap();
            assert!(t <= prev);
            prev = t;
        }
    }

    #[test]
    fn dwell_exit_reports_violation() {
        let mut cert = example_general();
        // Overstated growth bound with a tiny dwell constant breaks the
        // inequality.
        cert.b = vec![GaugeFunction::linear(50.0, ClassTag::KInf)];
        cert.r = DwellMap::Constant(0.01);
        assert!(matches!(
            dwell_exit_bound(&cert, 1.0),
            Err(CertificateError::DwellViolation { .. })
        ));
    }

    #[test]
    fn linear_certificate_ordering_checks() {
        let mk = |c1: f64, c2: f64, lambda: f64, b0: f64| LinearRateCertificate {
            v: ScalarField::norm_squared(1),
            chain: vec![ScalarField::parse("x1^2", 1).unwrap()],
            rho: 3.0,
            c1,
            c2,
            g: 1.0,
            g_tilde: None,
            lambda,
            gamma: 1.5,
            mu: 0.0,
            b: vec![b0],
            r: 2.0,
            phi: None,
            quad_envelope: None,
        };
        assert!(mk(2.8, 2.6, 0.5, 3.5).validate().is_ok());
        assert!(mk(3.2, 2.6, 0.5, 3.5).validate().is_err()); // c1 >= rho
        assert!(mk(2.8, 2.9, 0.5, 3.5).validate().is_err()); // c2 > c1
        assert!(mk(2.8, 2.6, 1.0, 3.5).validate().is_err()); // lambda = 1
        assert!(mk(2.8, 2.6, 0.5, 2.0).validate().is_err()); // b0 < rho
    }
}
