//! Premise verification: every pointwise condition is checked by exact vertex
//! maximization over the disturbance box (sampled search for non-affine
//! fields) at deterministic level-shell samples plus a low-discrepancy fill,
//! and every scalar gauge inequality is checked over level grids. The result
//! is a per-condition report and an overall verdict.
//!
//! State quantification is always sampled and labeled so; only the
//! d-maximization is ever exact. Strict inequalities demand a configurable
//! slack, and boundedness-in-the-limit conditions are reported as sampled
//! trends, never as proofs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::certificate::{
    chain_bound, classify, dwell_margin, Certificate, CertificateError, GeneralCertificate,
    LinearRateCertificate,
};
use crate::expr::ScalarField;
use crate::gauge::{sample_grid, GaugeError};
use crate::numerics::scan_max;
use crate::system::UncertainSystem;

#[derive(Debug, Error)]
pub enum CheckerError {
    #[error("configuration: {0}")]
    Configuration(String),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
    #[error(transparent)]
    Gauge(#[from] GaugeError),
}

/// Outcome of a single condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// Every sample passed and the disturbance maximization was exact.
    PassExact,
    /// Every sample passed; quantification was sampled somewhere.
    PassSampled,
    Fail,
    /// No sample fell into the condition's region; densify to decide.
    Skipped,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::PassExact => "PASS-exact",
            Status::PassSampled => "PASS-sampled",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIPPED",
        }
    }

    pub fn passed(&self) -> bool {
        matches!(self, Status::PassExact | Status::PassSampled)
    }
}

/// A state (and maximizing disturbance) at which a failed condition
/// re-evaluates to a violation.
#[derive(Debug, Clone)]
pub struct Witness {
    pub x: Vec<f64>,
    pub d: Option<Vec<f64>>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct CheckEntry {
    /// Condition identifier from the toolkit's condition catalog
    /// (e.g. "3.1", "3.31"); "K1K2" for the quadratic envelope probe.
    pub condition: String,
    pub status: Status,
    /// Minimum slack observed over the evaluated samples/levels.
    pub margin: f64,
    pub samples: usize,
    pub witness: Option<Witness>,
    /// Advisory entries never influence the verdict.
    pub advisory: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct CheckReport {
    pub entries: Vec<CheckEntry>,
}

impl CheckReport {
    pub fn entry(&self, condition: &str) -> Option<&CheckEntry> {
        self.entries.iter().find(|e| e.condition == condition)
    }

    pub fn merge(&mut self, other: CheckReport) {
        self.entries.extend(other.entries);
    }

    fn gating(&self) -> impl Iterator<Item = &CheckEntry> {
        self.entries.iter().filter(|e| !e.advisory)
    }

    pub fn any_failed(&self) -> bool {
        self.gating().any(|e| e.status == Status::Fail)
    }

    pub fn any_skipped(&self) -> bool {
        self.gating().any(|e| e.status == Status::Skipped)
    }

    pub fn all_passed(&self) -> bool {
        self.gating().all(|e| e.status.passed())
    }
}

/// The verification route implied by the certificate's fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Thm31,
    Thm37,
    Cor35,
    Cor38,
    Cor39,
    Cor310,
    Remark36Auto,
}

impl Route {
    pub fn as_str(&self) -> &'static str {
        match self {
            Route::Thm31 => "Thm3.1",
            Route::Thm37 => "Thm3.7",
            Route::Cor35 => "Cor3.5",
            Route::Cor38 => "Cor3.8",
            Route::Cor39 => "Cor3.9",
            Route::Cor310 => "Cor3.10",
            Route::Remark36Auto => "Remark3.6-auto",
        }
    }

    fn is_linear(&self) -> bool {
        matches!(self, Route::Thm37 | Route::Cor38 | Route::Cor310)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conclusion {
    Urgas,
    Urges,
    Inconclusive,
}

impl Conclusion {
    pub fn as_str(&self) -> &'static str {
        match self {
            Conclusion::Urgas => "URGAS",
            Conclusion::Urges => "URGES",
            Conclusion::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub route: Route,
    pub conclusion: Conclusion,
    /// `(M, sigma)` of the exponential envelope `M exp(-sigma t) |x0|`,
    /// present only for an exponential conclusion.
    pub exponential: Option<(f64, f64)>,
    pub report: CheckReport,
}

impl Verdict {
    pub fn summary(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "route: {}\nconclusion: {}\n",
            self.route.as_str(),
            self.conclusion.as_str()
        ));
        if let Some((m, sigma)) = self.exponential {
            out.push_str(&format!(
                "envelope: |x(t)| <= {m:.6e} * exp(-{sigma:.6e} t) |x0|\n"
            ));
        }
        for e in &self.report.entries {
            out.push_str(&format!(
                "  [{}] {} margin={:.6e} samples={}{}{}\n",
                e.condition,
                e.status.as_str(),
                e.margin,
                e.samples,
                if e.advisory { " (advisory)" } else { "" },
                e.note.as_ref().map(|n| format!(" — {n}")).unwrap_or_default()
            ));
        }
        out
    }
}

/// Sampling plan: deterministic direction shells placed on level sets of V
/// plus a seeded low-discrepancy volume fill.
#[derive(Debug, Clone)]
pub struct Sampling {
    pub shells: usize,
    pub directions: usize,
    pub fill: usize,
    pub level_min: f64,
    pub level_max: f64,
    pub seed: u64,
    /// Required slack for strict inequalities, relative to the local scale.
    pub delta_strict: f64,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            shells: 40,
            directions: 128,
            fill: 1024,
            level_min: 1e-3,
            level_max: 1e3,
            seed: 0,
            delta_strict: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SamplePoint {
    pub x: Vec<f64>,
    /// Shell index into the level list for on-shell samples; None for fill.
    pub shell: Option<usize>,
}

fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Deterministic sample set: for each of `shells` log-spaced levels, scale
/// `directions` unit directions onto the level set of V by bisection along
/// the ray; then add a Halton fill of the enclosing box filtered to the level
/// range. Returns the shell levels and the samples.
pub fn sample_states(v: &ScalarField, sampling: &Sampling) -> (Vec<f64>, Vec<SamplePoint>) {
    let n = v.dim();
    let levels = sample_grid(sampling.shells.max(2), sampling.level_min, sampling.level_max);
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);

    let mut directions: Vec<Vec<f64>> = Vec::with_capacity(sampling.directions);
    match n {
        1 => {
            directions.push(vec![1.0]);
            directions.push(vec![-1.0]);
        }
        2 => {
            for j in 0..sampling.directions {
                let theta = std::f64::consts::TAU * (j as f64 + 0.38196601125)
                    / (sampling.directions as f64);
                directions.push(vec![theta.cos(), theta.sin()]);
            }
        }
        _ => {
            for _ in 0..sampling.directions {
                let mut u: Vec<f64> = (0..n).map(|_| normal_sample(&mut rng)).collect();
                let norm: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
                if norm < 1e-12 {
                    continue;
                }
                for a in &mut u {
                    *a /= norm;
                }
                directions.push(u);
            }
        }
    }

    let mut samples = Vec::new();
    let mut max_radius = 0.0f64;
    for (si, &level) in levels.iter().enumerate() {
        for u in &directions {
            if let Some(r) = radius_for_level(v, u, level) {
                max_radius = max_radius.max(r);
                let x: Vec<f64> = u.iter().map(|c| c * r).collect();
                samples.push(SamplePoint { x, shell: Some(si) });
            }
        }
    }

    let span = 1.2 * max_radius.max(1.0);
    let mut kept = 0usize;
    let mut index = 1u64;
    while kept < sampling.fill && index < 60 * sampling.fill as u64 + 1 {
        let x: Vec<f64> = (0..n)
            .map(|i| span * (2.0 * halton(index, PRIMES[i % PRIMES.len()]) - 1.0))
            .collect();
        index += 1;
        let val = v.value(&x);
        if val >= sampling.level_min && val <= sampling.level_max {
            samples.push(SamplePoint { x, shell: None });
            kept += 1;
        }
    }
    (levels, samples)
}

fn normal_sample(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller from two uniform draws.
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn radius_for_level(v: &ScalarField, u: &[f64], level: f64) -> Option<f64> {
    let at = |r: f64| {
        let x: Vec<f64> = u.iter().map(|c| c * r).collect();
        v.value(&x)
    };
    let mut hi = 1.0f64;
    let mut guard = 0;
    while at(hi) < level {
        hi *= 2.0;
        guard += 1;
        if guard > 500 {
            return None;
        }
    }
    let mut lo = hi;
    guard = 0;
    while at(lo) > level && lo > 0.0 {
        lo *= 0.5;
        guard += 1;
        if guard > 500 {
            return None;
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if at(mid) < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Families of pointwise conditions; the route decides the published ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PointwiseKind {
    Decay,
    ChainStep,
    Growth,
    Floor,
    Band,
    SignFloor,
}

struct PointwiseIds {
    decay: &'static str,
    chain: &'static str,
    growth: &'static str,
    floor: &'static str,
    band: &'static str,
    sign_floor: &'static str,
}

fn pointwise_ids(route: Route) -> PointwiseIds {
    match route {
        Route::Thm31 | Route::Remark36Auto => PointwiseIds {
            decay: "3.1",
            chain: "3.2",
            growth: "3.3",
            floor: "3.4",
            band: "3.5",
            sign_floor: "3.38",
        },
        Route::Cor35 | Route::Cor39 => PointwiseIds {
            decay: "3.22",
            chain: "3.23",
            growth: "3.3",
            floor: "3.24",
            band: "3.5",
            sign_floor: "3.38",
        },
        Route::Thm37 => PointwiseIds {
            decay: "3.26",
            chain: "3.27",
            growth: "3.28",
            floor: "3.29",
            band: "3.30",
            sign_floor: "3.45",
        },
        Route::Cor38 | Route::Cor310 => PointwiseIds {
            decay: "3.35",
            chain: "3.36",
            growth: "3.28",
            floor: "3.37",
            band: "3.30",
            sign_floor: "3.45",
        },
    }
}

/// Select the verification route from the certificate's populated fields.
pub fn select_route(cert: &Certificate) -> Route {
    match cert {
        Certificate::General(c) => {
            if c.w0_identically_zero {
                Route::Remark36Auto
            } else if c.g_tilde.is_some() {
                Route::Cor39
            } else if c.phi.is_some() {
                Route::Cor35
            } else {
                Route::Thm31
            }
        }
        Certificate::LinearRate(c) => {
            if c.g_tilde.is_some() {
                Route::Cor310
            } else if c.phi.is_some() {
                Route::Cor38
            } else {
                Route::Thm37
            }
        }
    }
}

/// One evaluated pointwise condition at one state.
struct CondEval {
    kind: PointwiseKind,
    in_region: bool,
    lhs: f64,
    rhs: f64,
    d: Option<Vec<f64>>,
}

fn eval_conditions_at(
    system: &UncertainSystem,
    gv: &GeneralCertificate,
    has_sign_floor: bool,
    x: &[f64],
) -> Vec<CondEval> {
    let k = gv.k();
    let v = gv.v.value(x);
    let grad_v = gv.v.gradient_vec(x);
    let w: Vec<f64> = gv.chain.iter().map(|wi| wi.value(x)).collect();
    let phi = gv.phi.as_ref().map(|p| p.value(x)).unwrap_or(1.0);
    let label = classify(gv, x);
    let chain_region = label.in_chain_region();
    let mut out = Vec::with_capacity(4 + k + usize::from(has_sign_floor));

    // Decay: max_d grad V . f <= phi (W_0 - rho(V)), everywhere.
    let dmax = system.max_directional(&grad_v, x);
    out.push(CondEval {
        kind: PointwiseKind::Decay,
        in_region: true,
        lhs: dmax.value,
        rhs: phi * (w[0] - gv.rho.value(v)),
        d: Some(dmax.d),
    });

    // Chain steps: max_d grad W_i . f <= phi W_{i+1} on the chain region.
    if k > 0 {
        if chain_region {
            for i in 0..k {
                let grad_wi = gv.chain[i].gradient_vec(x);
                let m = system.max_directional(&grad_wi, x);
                out.push(CondEval {
                    kind: PointwiseKind::ChainStep,
                    in_region: true,
                    lhs: m.value,
                    rhs: phi * w[i + 1],
                    d: Some(m.d),
                });
            }
        } else {
            out.push(CondEval {
                kind: PointwiseKind::ChainStep,
                in_region: false,
                lhs: 0.0,
                rhs: 0.0,
                d: None,
            });
        }
    }

    // Growth: W_i <= b_i(V) on the chain region.
    if chain_region {
        for (i, &wi) in w.iter().enumerate() {
            out.push(CondEval {
                kind: PointwiseKind::Growth,
                in_region: true,
                lhs: wi,
                rhs: gv.b[i].value(v),
                d: None,
            });
        }
    } else {
        out.push(CondEval {
            kind: PointwiseKind::Growth,
            in_region: false,
            lhs: 0.0,
            rhs: 0.0,
            d: None,
        });
    }

    // Chain floor: max_d grad W_k . f <= -phi g(V) on the chain region.
    let floor_max = if chain_region {
        let grad_wk = gv.chain[k].gradient_vec(x);
        Some(system.max_directional(&grad_wk, x))
    } else {
        None
    };
    out.push(CondEval {
        kind: PointwiseKind::Floor,
        in_region: chain_region,
        lhs: floor_max.as_ref().map(|m| m.value).unwrap_or(0.0),
        rhs: -phi * gv.g.value(v),
        d: floor_max.as_ref().map(|m| m.d.clone()),
    });

    // Sign-restricted floor with the relaxed gauge, on the part of the chain
    // region where some W_i (i >= 1) is nonnegative.
    if has_sign_floor {
        let sign_ok = k >= 1 && w[1..].iter().any(|&wi| wi >= 0.0);
        let in_region = chain_region && sign_ok;
        let m = if in_region { floor_max.clone() } else { None };
        out.push(CondEval {
            kind: PointwiseKind::SignFloor,
            in_region,
            lhs: m.as_ref().map(|m| m.value).unwrap_or(0.0),
            rhs: -phi * gv.g_tilde.as_ref().map(|g| g.value(v)).unwrap_or(0.0),
            d: m.map(|m| m.d),
        });
    }

    // Band: max_d grad W_0 . f + max_d mu'(V) grad V . f <= 0 on the band.
    let in_band = label.kind == crate::certificate::RegionKind::Transition;
    if in_band {
        let grad_w0 = gv.chain[0].gradient_vec(x);
        let m1 = system.max_directional(&grad_w0, x);
        let mu_p = gv.mu.derivative(v);
        let scaled: Vec<f64> = grad_v.iter().map(|g| mu_p * g).collect();
        let m2 = system.max_directional(&scaled, x);
        out.push(CondEval {
            kind: PointwiseKind::Band,
            in_region: true,
            lhs: m1.value + m2.value,
            rhs: 0.0,
            d: Some(m1.d),
        });
    } else {
        out.push(CondEval {
            kind: PointwiseKind::Band,
            in_region: false,
            lhs: 0.0,
            rhs: 0.0,
            d: None,
        });
    }

    out
}

struct CondAccum {
    kind: PointwiseKind,
    id: String,
    in_region: usize,
    total: usize,
    min_margin: f64,
    worst: Option<Witness>,
    failed: bool,
}

impl CondAccum {
    fn new(kind: PointwiseKind, id: &str) -> CondAccum {
        CondAccum {
            kind,
            id: id.to_string(),
            in_region: 0,
            total: 0,
            min_margin: f64::INFINITY,
            worst: None,
            failed: false,
        }
    }

    fn absorb(&mut self, x: &[f64], ev: &CondEval) {
        self.total += 1;
        if !ev.in_region {
            return;
        }
        self.in_region += 1;
        let margin = ev.rhs - ev.lhs;
        let tol = 1e-12 * (1.0 + ev.lhs.abs() + ev.rhs.abs());
        if margin < -tol {
            self.failed = true;
        }
        if margin < self.min_margin {
            self.min_margin = margin;
            self.worst = Some(Witness {
                x: x.to_vec(),
                d: ev.d.clone(),
                lhs: ev.lhs,
                rhs: ev.rhs,
            });
        }
    }

    fn into_entry(self, exact_d: bool, vacuous: bool) -> CheckEntry {
        if self.in_region == 0 {
            if vacuous {
                return CheckEntry {
                    condition: self.id,
                    status: Status::PassExact,
                    margin: 0.0,
                    samples: 0,
                    witness: None,
                    advisory: false,
                    note: Some(
                        "vacuous: W_0 is identically zero, the restricted region is the origin"
                            .into(),
                    ),
                };
            }
            return CheckEntry {
                condition: self.id,
                status: Status::Skipped,
                margin: f64::NAN,
                samples: 0,
                witness: None,
                advisory: false,
                note: Some(format!(
                    "no sample in region (0 of {} samples); densify the sampling plan",
                    self.total
                )),
            };
        }
        let status = if self.failed {
            Status::Fail
        } else if exact_d {
            Status::PassExact
        } else {
            Status::PassSampled
        };
        CheckEntry {
            condition: self.id,
            status,
            margin: self.min_margin,
            samples: self.in_region,
            witness: if self.failed { self.worst } else { None },
            advisory: false,
            note: None,
        }
    }
}

/// Pointwise verification of the route's state-space conditions at the
/// sampling plan's states.
pub fn check_pointwise(
    system: &UncertainSystem,
    cert: &Certificate,
    sampling: &Sampling,
) -> Result<CheckReport, CheckerError> {
    let gv = cert.general_view();
    let route = select_route(cert);
    let (_, samples) = sample_states(&gv.v, sampling);
    Ok(check_pointwise_at(system, &gv, route, &samples))
}

fn check_pointwise_at(
    system: &UncertainSystem,
    gv: &GeneralCertificate,
    route: Route,
    samples: &[SamplePoint],
) -> CheckReport {
    let ids = pointwise_ids(route);
    let has_sign_floor = gv.g_tilde.is_some();

    let evals: Vec<Vec<CondEval>> = samples
        .par_iter()
        .map(|sp| eval_conditions_at(system, gv, has_sign_floor, &sp.x))
        .collect();

    let mut acc: Vec<CondAccum> = vec![
        CondAccum::new(PointwiseKind::Decay, ids.decay),
        CondAccum::new(PointwiseKind::ChainStep, ids.chain),
        CondAccum::new(PointwiseKind::Growth, ids.growth),
        CondAccum::new(PointwiseKind::Floor, ids.floor),
        CondAccum::new(PointwiseKind::Band, ids.band),
    ];
    if has_sign_floor {
        acc.push(CondAccum::new(PointwiseKind::SignFloor, ids.sign_floor));
    }

    for (sp, evs) in samples.iter().zip(evals.iter()) {
        for ev in evs {
            if let Some(a) = acc.iter_mut().find(|a| a.kind == ev.kind) {
                a.absorb(&sp.x, ev);
            }
        }
    }

    let exact_d = system.affine_in_d();
    let vacuous = gv.w0_identically_zero;
    let k = gv.k();
    let mut entries = Vec::new();
    for a in acc {
        // With k = 0 there are no chain-step members: drop the family rather
        // than reporting it skipped.
        if a.kind == PointwiseKind::ChainStep && k == 0 {
            continue;
        }
        // With k = 0 the sign restriction ranges over no chain members, so
        // its region is provably empty and the condition holds vacuously.
        if a.kind == PointwiseKind::SignFloor && k == 0 && a.in_region == 0 {
            entries.push(CheckEntry {
                condition: a.id,
                status: Status::PassExact,
                margin: 0.0,
                samples: 0,
                witness: None,
                advisory: false,
                note: Some("vacuous: no chain members above W_0, the sign restriction is empty".into()),
            });
            continue;
        }
        let vac = vacuous
            && matches!(
                a.kind,
                PointwiseKind::ChainStep
                    | PointwiseKind::Growth
                    | PointwiseKind::Floor
                    | PointwiseKind::Band
                    | PointwiseKind::SignFloor
            );
        entries.push(a.into_entry(exact_d, vac));
    }
    CheckReport { entries }
}

/// Scalar gauge inequalities of the route, on a logarithmic level grid (plus
/// a near-zero extension for the boundedness-in-the-limit trends).
pub fn check_scalar(cert: &Certificate, sampling: &Sampling) -> Result<CheckReport, CheckerError> {
    let gv = cert.general_view();
    let route = select_route(cert);
    let needs_samples = matches!(route, Route::Cor39 | Route::Cor310);
    let (levels, samples) = if needs_samples {
        sample_states(&gv.v, sampling)
    } else {
        (
            sample_grid(sampling.shells.max(2), sampling.level_min, sampling.level_max),
            Vec::new(),
        )
    };
    Ok(check_scalar_at(cert, &gv, route, &levels, &samples, sampling))
}

fn check_scalar_at(
    cert: &Certificate,
    gv: &GeneralCertificate,
    route: Route,
    levels: &[f64],
    samples: &[SamplePoint],
    sampling: &Sampling,
) -> CheckReport {
    match cert {
        Certificate::General(_) => scalar_general(gv, route, levels, samples, sampling),
        Certificate::LinearRate(lc) => scalar_linear(lc, route, samples, sampling),
    }
}

fn strict_entry(
    id: &str,
    grid: &[f64],
    sampling: &Sampling,
    f: impl Fn(f64) -> (f64, f64),
) -> CheckEntry {
    let mut min_margin = f64::INFINITY;
    let mut worst = None;
    let mut failed = false;
    for &s in grid {
        let (lhs, rhs) = f(s);
        // Strict inequality lhs > rhs: demand slack above the local scale.
        let margin = lhs - rhs;
        let need = sampling.delta_strict * (1.0 + lhs.abs() + rhs.abs());
        if margin < need {
            failed = true;
        }
        if margin < min_margin {
            min_margin = margin;
            worst = Some(Witness { x: vec![s], d: None, lhs, rhs });
        }
    }
    CheckEntry {
        condition: id.to_string(),
        status: if failed { Status::Fail } else { Status::PassSampled },
        margin: min_margin,
        samples: grid.len(),
        witness: if failed { worst } else { None },
        advisory: false,
        note: None,
    }
}

fn nonstrict_entry(
    id: &str,
    grid: &[f64],
    f: impl Fn(f64) -> (f64, f64),
    note: Option<String>,
) -> CheckEntry {
    let mut min_margin = f64::INFINITY;
    let mut worst = None;
    let mut failed = false;
    let mut evaluated = 0usize;
    for &s in grid {
        let (lhs, rhs) = f(s);
        if !lhs.is_finite() || !rhs.is_finite() {
            continue;
        }
        evaluated += 1;
        let margin = lhs - rhs;
        let tol = 1e-12 * (1.0 + lhs.abs() + rhs.abs());
        if margin < -tol {
            failed = true;
        }
        if margin < min_margin {
            min_margin = margin;
            worst = Some(Witness { x: vec![s], d: None, lhs, rhs });
        }
    }
    if evaluated == 0 {
        return CheckEntry {
            condition: id.to_string(),
            status: Status::Skipped,
            margin: f64::NAN,
            samples: 0,
            witness: None,
            advisory: false,
            note: Some("no level could be evaluated".into()),
        };
    }
    CheckEntry {
        condition: id.to_string(),
        status: if failed { Status::Fail } else { Status::PassSampled },
        margin: min_margin,
        samples: evaluated,
        witness: if failed { worst } else { None },
        advisory: false,
        note,
    }
}

fn scalar_general(
    gv: &GeneralCertificate,
    route: Route,
    levels: &[f64],
    samples: &[SamplePoint],
    sampling: &Sampling,
) -> CheckReport {
    let mut entries = Vec::new();
    let grid = sample_grid(1000, sampling.level_min, sampling.level_max);
    let near_zero = sample_grid(100, 1e-8, sampling.level_min.min(1e-2));

    // Band transfer (3.6): c1(lambda(s)) + mu(lambda(s)) > c2(gamma(s)) + mu(gamma(s)).
    entries.push(strict_entry("3.6", &grid, sampling, |s| {
        let ls = gv.lambda.value(s);
        let gs = gv.gamma.value(s);
        (
            gv.c1.value(ls) + gv.mu.value(ls),
            gv.c2.value(gs) + gv.mu.value(gs),
        )
    }));

    // Dwell inequality (3.7) as a positive-margin test.
    entries.push(strict_entry("3.7", &grid, sampling, |s| {
        (dwell_margin(gv, &gv.r, s), 0.0)
    }));

    if route == Route::Cor39 {
        // Relaxed overshoot bound (3.39): per level, the inner maximum runs
        // over the dwell window and the on-shell samples.
        let g_tilde = gv.g_tilde.as_ref().expect("route requires g~");
        let mut min_margin = f64::INFINITY;
        let mut worst = None;
        let mut failed = false;
        let mut count = 0usize;
        for (si, &s) in levels.iter().enumerate() {
            let pts: Vec<_> = samples.iter().filter(|sp| sp.shell == Some(si)).collect();
            if pts.is_empty() {
                continue;
            }
            let rs = gv.r.eval(s);
            let gl = g_tilde.value(gv.lambda.value(s));
            let mut inner = f64::NEG_INFINITY;
            for sp in pts {
                let w: Vec<f64> = gv.chain.iter().map(|wi| wi.value(&sp.x)).collect();
                let (_, m) = scan_max(&|tau| chain_bound(&w, gl, tau), 0.0, rs, 256);
                inner = inner.max(m);
            }
            let rho_inv = match gv.rho.invert(inner.max(0.0)) {
                Ok(v) => v,
                Err(_) => continue,
            };
            let required = rho_inv.min(s);
            let lhs = gv.gamma.value(s);
            count += 1;
            let margin = lhs - required;
            let tol = 1e-12 * (1.0 + lhs.abs() + required.abs());
            if margin < -tol {
                failed = true;
            }
            if margin < min_margin {
                min_margin = margin;
                worst = Some(Witness { x: vec![s], d: None, lhs, rhs: required });
            }
        }
        entries.push(if count == 0 {
            CheckEntry {
                condition: "3.39".into(),
                status: Status::Skipped,
                margin: f64::NAN,
                samples: 0,
                witness: None,
                advisory: false,
                note: Some("no on-shell samples; densify the sampling plan".into()),
            }
        } else {
            CheckEntry {
                condition: "3.39".into(),
                status: if failed { Status::Fail } else { Status::PassSampled },
                margin: min_margin,
                samples: count,
                witness: if failed { worst } else { None },
                advisory: false,
                note: None,
            }
        });
    } else {
        // Overshoot bound (3.8): gamma(s) >= max{s, rho^{-1}(tau-max of the
        // growth-bound chain polynomial)}.
        entries.push(nonstrict_entry(
            "3.8",
            &grid,
            |s| {
                let rs = gv.r.eval(s);
                let gl = gv.g.value(gv.lambda.value(s));
                let w: Vec<f64> = gv.b.iter().map(|bi| bi.value(s)).collect();
                let (_, inner) = scan_max(&|tau| chain_bound(&w, gl, tau), 0.0, rs, 256);
                let required = match gv.rho.invert(inner.max(0.0)) {
                    Ok(v) => v.max(s),
                    Err(_) => return (f64::NAN, f64::NAN),
                };
                (gv.gamma.value(s), required)
            },
            None,
        ));
    }

    // Integrability trend (3.9): sampled boundedness of the recovery-time
    // integral for levels down to 1e-8. A limit claim is not finitely
    // checkable, so a bounded trend reports PASS-sampled.
    {
        let mut values = Vec::new();
        let mut quad_failure = None;
        for &s in &near_zero {
            match crate::certificate::contraction_time_at_level(gv, s) {
                Ok(t) => values.push(t - gv.r.eval(s)),
                Err(e) => {
                    quad_failure = Some(format!("{e}"));
                    break;
                }
            }
        }
        let entry = if let Some(msg) = quad_failure {
            CheckEntry {
                condition: "3.9".into(),
                status: Status::Fail,
                margin: f64::NEG_INFINITY,
                samples: values.len(),
                witness: None,
                advisory: false,
                note: Some(msg),
            }
        } else {
            let quarter = (values.len() / 4).max(1);
            let small_max = values[..quarter].iter().copied().fold(0.0f64, f64::max);
            let large_max = values[values.len() - quarter..]
                .iter()
                .copied()
                .fold(0.0f64, f64::max);
            let diverging = small_max > 3.0 * large_max + 1e-9;
            CheckEntry {
                condition: "3.9".into(),
                status: if diverging { Status::Fail } else { Status::PassSampled },
                margin: small_max,
                samples: values.len(),
                witness: None,
                advisory: false,
                note: Some(format!(
                    "sampled integral: {small_max:.6e} near 1e-8 vs {large_max:.6e} at the range top"
                )),
            }
        };
        entries.push(entry);
    }

    // Advisory: sampled boundedness of the constructive-dwell ratios near 0.
    {
        let mut sup: f64 = 0.0;
        let mut ok = true;
        for &s in &near_zero {
            let gl = gv.g.value(gv.lambda.value(s));
            if gl <= 0.0 {
                ok = false;
                break;
            }
            let head = (gv.b[0].value(s) - gv.c2.value(gv.lambda.value(s))) / gl;
            sup = sup.max(head);
            for bi in gv.b.iter().skip(1) {
                sup = sup.max(bi.value(s) / gl);
            }
            if !sup.is_finite() || sup > 1e12 {
                ok = false;
                break;
            }
        }
        entries.push(CheckEntry {
            condition: "R3.2".into(),
            status: if ok { Status::PassSampled } else { Status::Fail },
            margin: sup,
            samples: near_zero.len(),
            witness: None,
            advisory: true,
            note: Some("sampled growth/decay ratios near 0 (dwell construction premise)".into()),
        });
    }

    // Advisory: sufficient small-level test for the integrability condition.
    {
        let mut k_star = f64::INFINITY;
        for &s in &near_zero {
            let a = (gv.rho.value(s) - gv.c1.value(s)) / s;
            let b = gv.lambda.value(s) / gv.gamma.value(s).max(1e-300);
            k_star = k_star.min(a.min(b));
        }
        let holds = k_star > 1e-12;
        entries.push(CheckEntry {
            condition: "R3.3".into(),
            status: if holds { Status::PassSampled } else { Status::Skipped },
            margin: k_star.min(1.0),
            samples: near_zero.len(),
            witness: None,
            advisory: true,
            note: Some(if holds {
                format!("sufficient test holds with K = {:.3e}", k_star.min(0.999))
            } else {
                "sufficient test inconclusive (it is not necessary)".into()
            }),
        });
    }

    CheckReport { entries }
}

fn scalar_linear(
    lc: &LinearRateCertificate,
    route: Route,
    samples: &[SamplePoint],
    sampling: &Sampling,
) -> CheckReport {
    let mut entries = Vec::new();
    let k = lc.k();
    let fac = |n: usize| (1..=n).map(|i| i as f64).product::<f64>();

    // Band transfer (3.31): (c1 + mu) lambda > (c2 + mu) gamma.
    {
        let lhs = (lc.c1 + lc.mu) * lc.lambda;
        let rhs = (lc.c2 + lc.mu) * lc.gamma;
        let margin = lhs - rhs;
        let need = sampling.delta_strict * (1.0 + lhs.abs() + rhs.abs());
        entries.push(CheckEntry {
            condition: "3.31".into(),
            status: if margin >= need { Status::PassExact } else { Status::Fail },
            margin,
            samples: 1,
            witness: if margin >= need {
                None
            } else {
                Some(Witness { x: vec![], d: None, lhs, rhs })
            },
            advisory: false,
            note: None,
        });
    }

    // Dwell inequality (3.32).
    {
        let lhs = lc.c2 * lc.lambda + lc.g * lc.lambda * lc.r.powi((k + 1) as i32) / fac(k + 1);
        let rhs: f64 = lc
            .b
            .iter()
            .enumerate()
            .map(|(i, bi)| lc.r.powi(i as i32) / fac(i) * bi)
            .sum();
        let margin = lhs - rhs;
        let need = sampling.delta_strict * (1.0 + lhs.abs() + rhs.abs());
        entries.push(CheckEntry {
            condition: "3.32".into(),
            status: if margin >= need { Status::PassExact } else { Status::Fail },
            margin,
            samples: 1,
            witness: if margin >= need {
                None
            } else {
                Some(Witness { x: vec![], d: None, lhs, rhs })
            },
            advisory: false,
            note: None,
        });
    }

    let exp_branch = ((lc.b[0] - lc.rho) * lc.r).exp();
    if route == Route::Cor310 {
        // Relaxed overshoot bound (3.46): gamma >= min{ exp branch, sup over
        // the dwell window and samples of the normalized chain polynomial }.
        let g_tilde = lc.g_tilde.expect("route requires g~");
        let mut sup = f64::NEG_INFINITY;
        let mut used = 0usize;
        for sp in samples {
            let v = lc.v.value(&sp.x);
            if v <= 0.0 {
                continue;
            }
            used += 1;
            let w: Vec<f64> = lc.chain.iter().map(|wi| wi.value(&sp.x) / v).collect();
            let (_, m) = scan_max(
                &|tau| chain_bound(&w, g_tilde * lc.lambda, tau) / lc.rho,
                0.0,
                lc.r,
                256,
            );
            sup = sup.max(m);
        }
        if used == 0 {
            entries.push(CheckEntry {
                condition: "3.46".into(),
                status: Status::Skipped,
                margin: f64::NAN,
                samples: 0,
                witness: None,
                advisory: false,
                note: Some("no state samples available for the normalized supremum".into()),
            });
        } else {
            let required = exp_branch.min(sup);
            let margin = lc.gamma - required;
            let tol = 1e-12 * (1.0 + lc.gamma.abs() + required.abs());
            entries.push(CheckEntry {
                condition: "3.46".into(),
                status: if margin >= -tol { Status::PassSampled } else { Status::Fail },
                margin,
                samples: used,
                witness: if margin >= -tol {
                    None
                } else {
                    Some(Witness { x: vec![], d: None, lhs: lc.gamma, rhs: required })
                },
                advisory: false,
                note: Some(format!(
                    "branches: exp = {exp_branch:.6e}, normalized-chain sup = {sup:.6e}"
                )),
            });
        }
    } else {
        // Overshoot bound (3.33): gamma >= min{ exp branch, tau-max of the
        // growth-bound chain polynomial / rho }.
        let (_, poly_branch) = scan_max(
            &|tau| chain_bound(&lc.b, lc.g * lc.lambda, tau) / lc.rho,
            0.0,
            lc.r,
            256,
        );
        let required = exp_branch.min(poly_branch.max(0.0));
        let margin = lc.gamma - required;
        let tol = 1e-12 * (1.0 + lc.gamma.abs() + required.abs());
        entries.push(CheckEntry {
            condition: "3.33".into(),
            status: if margin >= -tol { Status::PassSampled } else { Status::Fail },
            margin,
            samples: 1,
            witness: if margin >= -tol {
                None
            } else {
                Some(Witness { x: vec![], d: None, lhs: lc.gamma, rhs: required })
            },
            advisory: false,
            note: Some(format!(
                "branches: exp = {exp_branch:.6e}, chain poly max = {poly_branch:.6e}"
            )),
        });
    }

    CheckReport { entries }
}

/// Run the full verification: structural validation, scalar inequalities,
/// pointwise conditions, and the verdict with exponential constants when the
/// route and the quadratic envelope warrant them.
pub fn certify(
    system: &UncertainSystem,
    cert: &Certificate,
    sampling: &Sampling,
) -> Result<Verdict, CheckerError> {
    if system.dim() != cert.dim() {
        return Err(CheckerError::Configuration(format!(
            "system dimension {} does not match certificate dimension {}",
            system.dim(),
            cert.dim()
        )));
    }
    cert.validate()?;
    let gv = cert.general_view();
    let route = select_route(cert);
    let (levels, samples) = sample_states(&gv.v, sampling);

    let mut report = check_scalar_at(cert, &gv, route, &levels, &samples, sampling);
    report.merge(check_pointwise_at(system, &gv, route, &samples));

    // Quadratic envelope probe for the exponential tail.
    let mut envelope_ok = false;
    let mut phi_min = f64::INFINITY;
    if let Certificate::LinearRate(lc) = cert {
        if let Some((k1, k2)) = lc.quad_envelope {
            let mut min_margin = f64::INFINITY;
            let mut failed = false;
            let mut worst = None;
            for sp in &samples {
                let norm2: f64 = sp.x.iter().map(|a| a * a).sum();
                let v = lc.v.value(&sp.x);
                let m_low = v - k1 * norm2;
                let m_high = k2 * norm2 - v;
                let m = m_low.min(m_high);
                let tol = 1e-12 * (1.0 + v.abs() + norm2);
                if m < -tol {
                    failed = true;
                }
                if m < min_margin {
                    min_margin = m;
                    worst = Some(Witness { x: sp.x.clone(), d: None, lhs: k1 * norm2, rhs: v });
                }
            }
            envelope_ok = !failed && !samples.is_empty();
            report.entries.push(CheckEntry {
                condition: "K1K2".into(),
                status: if envelope_ok { Status::PassSampled } else { Status::Fail },
                margin: min_margin,
                samples: samples.len(),
                witness: if failed { worst } else { None },
                advisory: false,
                note: Some(format!("quadratic envelope K1 = {k1}, K2 = {k2}")),
            });
        }
        if let Some(phi) = &lc.phi {
            for sp in &samples {
                phi_min = phi_min.min(phi.value(&sp.x));
            }
        }
    }

    let conclusion = if report.any_failed() || report.any_skipped() {
        Conclusion::Inconclusive
    } else if route.is_linear() && envelope_ok {
        Conclusion::Urges
    } else {
        Conclusion::Urgas
    };

    let exponential = if conclusion == Conclusion::Urges {
        if let Certificate::LinearRate(lc) = cert {
            let (k1, k2) = lc.quad_envelope.expect("envelope verified");
            // Per-step horizon of the discretized contraction induced by this
            // certificate, and the level amplification across one step.
            let horizon = lc.r + (lc.gamma.ln() - lc.lambda.ln()) / (lc.rho - lc.c1);
            let m_a = ((lc.b[0] - lc.rho) * horizon).exp();
            let q_frac = 1.0 - lc.lambda;
            let (m, sigma) = crate::discretize::exponential_constants(m_a, horizon, q_frac, k1, k2)
                .map_err(|e| CheckerError::Configuration(format!("{e}")))?;
            // A positive lower bound on phi transfers the rescaled-time decay
            // back to original time; with no phi the factor is one.
            let rate_scale = if lc.phi.is_some() {
                phi_min.clamp(0.0, 1.0)
            } else {
                1.0
            };
            Some((m, sigma * rate_scale))
        } else {
            None
        }
    } else {
        None
    };

    Ok(Verdict { route, conclusion, exponential, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::{DwellMap, GeneralCertificate};
    use crate::expr::{parse, ScalarField};
    use crate::gauge::{ClassTag, GaugeFunction, SmoothScalarMap};
    use crate::system::{DisturbanceBox, Regularity};

    fn default_sampling() -> Sampling {
        Sampling { shells: 12, directions: 48, fill: 128, ..Sampling::default() }
    }

    fn classical_cert_with_rho(rho_coeff: f64) -> Certificate {
        // Auto-completion pattern on dx/dt = -x with V = x^2: zero chain,
        // c1 = (3/4) rho, c2(s) = (1/2) rho(s/2), gamma = id, r = 1.
        let rho = GaugeFunction::linear(rho_coeff, ClassTag::KInf);
        Certificate::General(GeneralCertificate {
            v: ScalarField::norm_squared(1),
            chain: vec![ScalarField::from_expr(crate::expr::Expr::Const(0.0), 1)],
            c1: GaugeFunction::scaled(0.75, &rho, ClassTag::KInf),
            c2: GaugeFunction::linear(0.25 * rho_coeff, ClassTag::KInf),
            g: GaugeFunction::linear(1.0, ClassTag::KInf),
            g_tilde: None,
            lambda: GaugeFunction::linear(0.875, ClassTag::K),
            gamma: GaugeFunction::linear(1.0, ClassTag::KInf),
            b: vec![GaugeFunction::linear(0.0, ClassTag::PositiveDefinite)],
            r: DwellMap::Constant(1.0),
            mu: SmoothScalarMap::zero(),
            phi: None,
            rho,
            w0_identically_zero: true,
        })
    }

    fn scalar_decay_system() -> UncertainSystem {
        UncertainSystem::from_exprs(
            "decay",
            vec![parse("-x1", 1, 0).unwrap()],
            DisturbanceBox::empty(),
            Regularity::default(),
        )
        .unwrap()
    }

    #[test]
    fn classical_auto_completion_is_urgas() {
        let verdict =
            certify(&scalar_decay_system(), &classical_cert_with_rho(2.0), &default_sampling())
                .unwrap();
        assert_eq!(verdict.route, Route::Remark36Auto);
        assert_eq!(verdict.conclusion, Conclusion::Urgas, "{}", verdict.summary());
        for id in ["3.3", "3.4", "3.5"] {
            let e = verdict.report.entry(id).unwrap();
            assert_eq!(e.status, Status::PassExact, "{id}");
            assert!(e.note.as_deref().unwrap_or("").contains("vacuous"), "{id}");
        }
        assert!(verdict.report.entry("3.1").unwrap().status.passed());
    }

    #[test]
    fn sampling_is_deterministic_and_on_shell() {
        let v = ScalarField::norm_squared(2);
        let s = default_sampling();
        let (levels, a) = sample_states(&v, &s);
        let (_, b) = sample_states(&v, &s);
        assert_eq!(a.len(), b.len());
        for (p, q) in a.iter().zip(b.iter()) {
            assert_eq!(p.x, q.x);
        }
        for sp in &a {
            let val = v.value(&sp.x);
            if let Some(si) = sp.shell {
                assert!((val - levels[si]).abs() <= 1e-9 * levels[si].max(1e-12));
            } else {
                assert!(val >= s.level_min && val <= s.level_max);
            }
        }
    }

    #[test]
    fn failed_condition_carries_reevaluable_witness() {
        // Claim a decay rate the system does not have: rho(s) = 3s against
        // dx/dt = -x with V = x^2, whose true rate gauge is 2s.
        let cert = classical_cert_with_rho(3.0);
        let sys = scalar_decay_system();
        let verdict = certify(&sys, &cert, &default_sampling()).unwrap();
        assert_eq!(verdict.conclusion, Conclusion::Inconclusive);
        let decay = verdict.report.entry("3.1").unwrap();
        assert_eq!(decay.status, Status::Fail);
        let w = decay.witness.as_ref().expect("witness");
        let gv = cert.general_view();
        let grad = gv.v.gradient_vec(&w.x);
        let m = sys.max_directional(&grad, &w.x);
        let rhs = gv.chain[0].value(&w.x) - gv.rho.value(gv.v.value(&w.x));
        assert!(m.value > rhs, "witness does not re-evaluate to a violation");
        assert!((m.value - w.lhs).abs() <= 1e-12 * (1.0 + w.lhs.abs()));
        assert!((rhs - w.rhs).abs() <= 1e-12 * (1.0 + w.rhs.abs()));
    }

    #[test]
    fn witness_is_seed_independent() {
        let cert = classical_cert_with_rho(3.0);
        let sys = scalar_decay_system();
        for seed in [1u64, 99, 4242] {
            let sampling = Sampling { seed, ..default_sampling() };
            let verdict = certify(&sys, &cert, &sampling).unwrap();
            let w = verdict.report.entry("3.1").unwrap().witness.as_ref().unwrap().clone();
            let gv = cert.general_view();
            let grad = gv.v.gradient_vec(&w.x);
            let m = sys.max_directional(&grad, &w.x);
            let rhs = gv.chain[0].value(&w.x) - gv.rho.value(gv.v.value(&w.x));
            assert!(m.value > rhs, "seed {seed}");
        }
    }

    #[test]
    fn route_selection_follows_certificate_fields() {
        use crate::examples::{
            build_example41, build_example42, Example41Beta, Example42Params,
        };
        let e41 = build_example41(&Example41Beta::linear(), 1.0, 0.5, 0.5).unwrap();
        assert_eq!(select_route(&Certificate::General(e41.clone())), Route::Thm31);
        let mut with_phi = e41.clone();
        with_phi.phi = Some(ScalarField::from_closure(|_: &[f64]| 1.0, 2));
        assert_eq!(select_route(&Certificate::General(with_phi)), Route::Cor35);
        let mut with_gt = e41;
        with_gt.g_tilde = Some(with_gt.g.clone());
        assert_eq!(select_route(&Certificate::General(with_gt)), Route::Cor39);

        let p = crate::examples::example42_reference_amplitude();
        let params = Example42Params::new(p, 2.8594, 2.6094, 0.9999).unwrap();
        let e42 = build_example42(&params).unwrap();
        assert_eq!(select_route(&Certificate::LinearRate(e42.clone())), Route::Cor310);
        let mut no_gt = e42.clone();
        no_gt.g_tilde = None;
        assert_eq!(select_route(&Certificate::LinearRate(no_gt.clone())), Route::Cor38);
        no_gt.phi = None;
        assert_eq!(select_route(&Certificate::LinearRate(no_gt)), Route::Thm37);
    }

    #[test]
    fn enlarging_the_box_never_turns_fail_into_pass() {
        use crate::examples::{build_example42, example42_system, Example42Params};
        // Same (infeasible) certificate against nested disturbance boxes: the
        // chain-floor margins can only shrink when the box grows.
        let params = Example42Params::new_diagnostic(0.75, 2.8594, 2.6094, 0.9999).unwrap();
        let cert = Certificate::LinearRate(build_example42(&params).unwrap());
        let sampling = default_sampling();
        let margin_at = |p_box: f64| {
            let sys = example42_system(p_box).unwrap();
            let report = check_pointwise(&sys, &cert, &sampling).unwrap();
            report.entry("3.37").unwrap().margin
        };
        let m_small = margin_at(0.75);
        let m_large = margin_at(0.9);
        assert!(m_small < 0.0, "expected a failing chain floor, margin {m_small}");
        assert!(m_large <= m_small + 1e-12, "{m_large} vs {m_small}");
    }

    #[test]
    fn quadratic_homogeneity_gives_radius_independent_verdicts() {
        use crate::examples::{
            build_example42, example42_reference_amplitude, example42_system, Example42Params,
        };
        // Quadratic forms against constant rates and a linear field: the
        // verdict on the unit sphere matches the verdict on radius ten.
        let p = example42_reference_amplitude();
        let params = Example42Params::new(p, 2.8594, 2.6094, 0.9999).unwrap();
        let cert = Certificate::LinearRate(build_example42(&params).unwrap());
        let sys = example42_system(p).unwrap();
        let shell = |level: f64| Sampling {
            shells: 2,
            directions: 96,
            fill: 0,
            level_min: level * 0.999,
            level_max: level * 1.001,
            ..Sampling::default()
        };
        let unit = check_pointwise(&sys, &cert, &shell(1.0)).unwrap();
        let wide = check_pointwise(&sys, &cert, &shell(100.0)).unwrap();
        for (a, b) in unit.entries.iter().zip(wide.entries.iter()) {
            assert_eq!(a.condition, b.condition);
            assert_eq!(a.status, b.status, "{}", a.condition);
        }
    }

    #[test]
    fn rescaled_field_passes_the_phi_route() {
        use crate::examples::{build_example41, Example41Beta};
        // Scaling the field by a positive factor phi and declaring the same
        // phi in the certificate reduces every condition to the unscaled one.
        let mut cert = build_example41(&Example41Beta::linear(), 1.0, 0.5, 0.5).unwrap();
        cert.phi = Some(ScalarField::parse("1 + x1^2", 2).unwrap());
        let f1 = parse("(1 + x1^2)*(-x1)", 2, 1).unwrap();
        let f2 = parse("(1 + x1^2)*(d1*x1 - x2)", 2, 1).unwrap();
        let sys = UncertainSystem::from_exprs(
            "rescaled",
            vec![f1, f2],
            DisturbanceBox::new(vec![(-1.0, 1.0)]).unwrap(),
            Regularity::default(),
        )
        .unwrap();
        let verdict = certify(&sys, &Certificate::General(cert), &default_sampling()).unwrap();
        assert_eq!(verdict.route, Route::Cor35);
        assert_eq!(verdict.conclusion, Conclusion::Urgas, "{}", verdict.summary());
        assert!(verdict.report.entry("3.22").unwrap().status.passed());
        assert!(verdict.report.entry("3.24").unwrap().status.passed());
    }

    #[test]
    fn relaxed_floor_route_passes_with_matching_gauge() {
        use crate::examples::{build_example41, Example41Beta};
        // Supplying the relaxed floor equal to the strict one makes the
        // sign-restricted condition a weakening of the unrestricted floor,
        // and the relaxed overshoot bound is easier than the strict one.
        let mut cert = build_example41(&Example41Beta::linear(), 1.0, 0.5, 0.5).unwrap();
        cert.g_tilde = Some(cert.g.clone());
        let sys = crate::examples::example41_system(&Example41Beta::linear(), 1.0).unwrap();
        let verdict = certify(&sys, &Certificate::General(cert), &default_sampling()).unwrap();
        assert_eq!(verdict.route, Route::Cor39);
        assert_eq!(verdict.conclusion, Conclusion::Urgas, "{}", verdict.summary());
        assert!(verdict.report.entry("3.39").unwrap().status.passed());
        assert!(verdict.report.entry("3.38").unwrap().status.passed());
    }

    #[test]
    fn dimension_mismatch_is_configuration_error() {
        let cert = classical_cert_with_rho(2.0);
        let sys2 = UncertainSystem::from_exprs(
            "planar",
            vec![parse("-x1", 2, 0).unwrap(), parse("-x2", 2, 0).unwrap()],
            DisturbanceBox::empty(),
            Regularity::default(),
        )
        .unwrap();
        assert!(matches!(
            certify(&sys2, &cert, &default_sampling()),
            Err(CheckerError::Configuration(_))
        ));
    }
}
