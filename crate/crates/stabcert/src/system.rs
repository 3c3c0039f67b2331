//! Uncertain system models `dx/dt = f(d, x)` with a compact disturbance box,
//! piecewise-constant disturbance-signal generation, and exact maximization of
//! directional derivatives over the box for fields affine in the disturbance.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::expr::Expr;

#[derive(Debug, Error)]
pub enum SystemError {
    #[error("disturbance box is empty or unbounded")]
    BadBox,
    #[error("equilibrium probe failed: |f(d, 0)| = {residual} for d = {d:?}")]
    NotEquilibrium { d: Vec<f64>, residual: f64 },
    #[error("field dimension mismatch: state is {n}, field produced {got} components")]
    DimensionMismatch { n: usize, got: usize },
    #[error("{0}")]
    Configuration(String),
}

/// Per-coordinate closed intervals forming the compact disturbance set.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl DisturbanceBox {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<DisturbanceBox, SystemError> {
        for &(a, b) in &intervals {
            if !(a.is_finite() && b.is_finite()) || a > b {
                return Err(SystemError::BadBox);
            }
        }
        let (lo, hi) = intervals.into_iter().unzip();
        Ok(DisturbanceBox { lo, hi })
    }

    /// Degenerate box for disturbance-free systems.
    pub fn empty() -> DisturbanceBox {
        DisturbanceBox { lo: Vec::new(), hi: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn interval(&self, i: usize) -> (f64, f64) {
        (self.lo[i], self.hi[i])
    }

    pub fn contains(&self, d: &[f64]) -> bool {
        d.len() == self.dim()
            && d.iter()
                .zip(self.lo.iter().zip(self.hi.iter()))
                .all(|(v, (a, b))| *v >= *a - 1e-12 && *v <= *b + 1e-12)
    }

    /// All extreme points, in lexicographic bit order (2^l vertices).
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let l = self.dim();
        let count = 1usize << l;
        let mut out = Vec::with_capacity(count);
        for mask in 0..count {
            let v = (0..l)
                .map(|i| if mask >> i & 1 == 1 { self.hi[i] } else { self.lo[i] })
                .collect();
            out.push(v);
        }
        out
    }

    pub fn sample_uniform(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.lo
            .iter()
            .zip(self.hi.iter())
            .map(|(&a, &b)| if a == b { a } else { rng.random_range(a..=b) })
            .collect()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lo.iter().zip(self.hi.iter()).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

/// Declared regularity of the vector field. The compactness hypothesis is
/// enforced by the box itself and the equilibrium hypothesis is probed at
/// construction; the Lipschitz-type declarations are sampled on demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Regularity {
    /// One-sided Lipschitz declaration (implied by `lipschitz`).
    pub one_sided_lipschitz: bool,
    /// Local Lipschitz continuity in the state.
    pub lipschitz: bool,
}

impl Default for Regularity {
    fn default() -> Self {
        Regularity { one_sided_lipschitz: true, lipschitz: true }
    }
}

type FieldClosure = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

#[derive(Clone)]
enum Field {
    Exprs(Arc<Vec<Expr>>),
    Closure(FieldClosure),
}

/// An uncertain autonomous system `dx/dt = f(d, x)` with `d` ranging over a
/// compact box.
#[derive(Clone)]
pub struct UncertainSystem {
    n: usize,
    field: Field,
    pub disturbance_box: DisturbanceBox,
    affine_in_d: bool,
    pub regularity: Regularity,
    pub name: String,
}

impl fmt::Debug for UncertainSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "UncertainSystem({}, n={}, l={}, affine_in_d={})",
            self.name,
            self.n,
            self.disturbance_box.dim(),
            self.affine_in_d
        )
    }
}

impl UncertainSystem {
    /// Build from per-coordinate expressions; affinity in the disturbance is
    /// derived from the expression trees.
    pub fn from_exprs(
        name: &str,
        exprs: Vec<Expr>,
        disturbance_box: DisturbanceBox,
        regularity: Regularity,
    ) -> Result<UncertainSystem, SystemError> {
        let n = exprs.len();
        if n == 0 {
            return Err(SystemError::Configuration("state dimension is zero".into()));
        }
        let affine = exprs.iter().all(|e| e.is_affine_in_disturbance());
        let sys = UncertainSystem {
            n,
            field: Field::Exprs(Arc::new(exprs)),
            disturbance_box,
            affine_in_d: affine,
            regularity,
            name: name.to_string(),
        };
        sys.probe_equilibrium()?;
        Ok(sys)
    }

    pub fn from_closure<F>(
        name: &str,
        n: usize,
        field: F,
        disturbance_box: DisturbanceBox,
        affine_in_d: bool,
        regularity: Regularity,
    ) -> Result<UncertainSystem, SystemError>
    where
        F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        if n == 0 {
            return Err(SystemError::Configuration("state dimension is zero".into()));
        }
        let sys = UncertainSystem {
            n,
            field: Field::Closure(Arc::new(field)),
            disturbance_box,
            affine_in_d,
            regularity,
            name: name.to_string(),
        };
        sys.probe_equilibrium()?;
        Ok(sys)
    }

    /// Internal constructor without the equilibrium probe, for augmented
    /// dynamics (e.g. a rescaling clock) whose extra coordinates do not
    /// vanish at the origin.
    pub(crate) fn from_closure_unprobed<F>(
        name: &str,
        n: usize,
        field: F,
        disturbance_box: DisturbanceBox,
        affine_in_d: bool,
        regularity: Regularity,
    ) -> UncertainSystem
    where
        F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        UncertainSystem {
            n,
            field: Field::Closure(Arc::new(field)),
            disturbance_box,
            affine_in_d,
            regularity,
            name: name.to_string(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn affine_in_d(&self) -> bool {
        self.affine_in_d
    }

    pub fn eval_field(&self, d: &[f64], x: &[f64], out: &mut [f64]) {
        match &self.field {
            Field::Exprs(es) => {
                for (o, e) in out.iter_mut().zip(es.iter()) {
                    *o = e.eval(x, d);
                }
            }
            Field::Closure(f) => f(d, x, out),
        }
    }

    pub fn field_at(&self, d: &[f64], x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.eval_field(d, x, &mut out);
        out
    }

    /// The origin must be an equilibrium for every disturbance: probe
    /// `f(d, 0)` at the box vertices, midpoint and 100 seeded samples.
    fn probe_equilibrium(&self) -> Result<(), SystemError> {
        let zero = vec![0.0; self.n];
        let mut out = vec![0.0; self.n];
        let mut check = |d: &[f64]| -> Result<(), SystemError> {
            self.eval_field(d, &zero, &mut out);
            let residual = out.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
            if residual > 1e-12 {
                return Err(SystemError::NotEquilibrium { d: d.to_vec(), residual });
            }
            Ok(())
        };
        let vertices = self.disturbance_box.vertices();
        // Vertex count is 2^l; probe at most the first 64 plus samples.
        for d in vertices.iter().take(64) {
            check(d)?;
        }
        check(&self.disturbance_box.midpoint())?;
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..100 {
            let d = self.disturbance_box.sample_uniform(&mut rng);
            check(&d)?;
        }
        Ok(())
    }

    /// Sampled supremum of difference quotients |f(d,x)-f(d,y)| / |x-y| over
    /// the ball of the given radius; a declared-Lipschitz field must produce a
    /// finite value.
    pub fn probe_lipschitz(&self, radius: f64, pairs: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sup: f64 = 0.0;
        let mut fx = vec![0.0; self.n];
        let mut fy = vec![0.0; self.n];
        for _ in 0..pairs {
            let d = self.disturbance_box.sample_uniform(&mut rng);
            let x: Vec<f64> = (0..self.n).map(|_| rng.random_range(-radius..=radius)).collect();
            let mut y = x.clone();
            // Perturb at a random scale to probe both local and coarse quotients.
            let scale = 10f64.powf(rng.random_range(-6.0..0.0)) * radius;
            for v in &mut y {
                *v += rng.random_range(-scale..=scale);
            }
            let dist: f64 = x
                .iter()
                .zip(y.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if dist == 0.0 {
                continue;
            }
            self.eval_field(&d, &x, &mut fx);
            self.eval_field(&d, &y, &mut fy);
            let df: f64 = fx
                .iter()
                .zip(fy.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            sup = sup.max(df / dist);
        }
        sup
    }

    /// Maximize `gradient . f(d, x)` over the disturbance box.
    ///
    /// Fields affine in `d` are maximized exactly by vertex enumeration;
    /// otherwise a multistart coordinate search returns a certified lower
    /// bound and the result is flagged as inexact.
    pub fn max_directional(&self, gradient: &[f64], x: &[f64]) -> DirectionalMax {
        let objective = |d: &[f64]| -> f64 {
            let f = self.field_at(d, x);
            gradient.iter().zip(f.iter()).map(|(g, v)| g * v).sum()
        };
        if self.disturbance_box.dim() == 0 {
            let value = objective(&[]);
            return DirectionalMax { value, d: Vec::new(), exact: true };
        }
        if self.affine_in_d {
            let mut best_v = f64::NEG_INFINITY;
            let mut best_d = Vec::new();
            for d in self.disturbance_box.vertices() {
                let v = objective(&d);
                if v > best_v {
                    best_v = v;
                    best_d = d;
                }
            }
            DirectionalMax { value: best_v, d: best_d, exact: true }
        } else {
            let (value, d) = self.coordinate_search_max(&objective);
            DirectionalMax { value, d, exact: false }
        }
    }

    /// Multistart cyclic coordinate ascent over the box: grid seeds plus the
    /// vertices, each refined by per-coordinate golden section.
    fn coordinate_search_max(&self, objective: &dyn Fn(&[f64]) -> f64) -> (f64, Vec<f64>) {
        use crate::numerics::golden_max;
        let l = self.disturbance_box.dim();
        let mut starts = self.disturbance_box.vertices();
        starts.truncate(64);
        starts.push(self.disturbance_box.midpoint());
        // A modest per-coordinate grid keeps the seed count bounded.
        let grid = 3usize;
        let mut seed = vec![0usize; l];
        loop {
            let d: Vec<f64> = (0..l)
                .map(|i| {
                    let (a, b) = self.disturbance_box.interval(i);
                    a + (b - a) * (seed[i] as f64) / ((grid - 1) as f64)
                })
                .collect();
            starts.push(d);
            let mut k = 0;
            while k < l {
                seed[k] += 1;
                if seed[k] < grid {
                    break;
                }
                seed[k] = 0;
                k += 1;
            }
            if k == l {
                break;
            }
            if starts.len() > 200 {
                break;
            }
        }
        let mut best_v = f64::NEG_INFINITY;
        let mut best_d = self.disturbance_box.midpoint();
        for start in starts {
            let mut d = start;
            let mut v = objective(&d);
            for _sweep in 0..4 {
                for i in 0..l {
                    let (a, b) = self.disturbance_box.interval(i);
                    if a == b {
                        continue;
                    }
                    let di = d.clone();
                    let f1 = |t: f64| {
                        let mut dd = di.clone();
                        dd[i] = t;
                        objective(&dd)
                    };
                    let (t, fv) = golden_max(&f1, a, b, 40);
                    if fv > v {
                        v = fv;
                        d[i] = t;
                    }
                }
            }
            if v > best_v {
                best_v = v;
                best_d = d;
            }
        }
        (best_v, best_d)
    }

    pub fn sample_signal(
        &self,
        horizon: f64,
        dwell: f64,
        strategy: SignalStrategy,
        seed: u64,
    ) -> Result<DisturbanceSignal, SystemError> {
        if horizon <= 0.0 || dwell <= 0.0 {
            return Err(SystemError::Configuration(
                "signal horizon and dwell must be positive".into(),
            ));
        }
        if self.disturbance_box.dim() == 0 {
            return Ok(DisturbanceSignal {
                breakpoints: vec![0.0],
                values: vec![Vec::new()],
                horizon,
                provenance: format!("{strategy:?} seed={seed} (disturbance-free)"),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut breakpoints = Vec::new();
        let mut values = Vec::new();
        let mut i = 0u64;
        loop {
            let t = i as f64 * dwell;
            if t >= horizon * (1.0 - 1e-12) {
                break;
            }
            breakpoints.push(t);
            let value = match strategy {
                SignalStrategy::Vertices => self.draw_vertex(&mut rng),
                SignalStrategy::Uniform => self.disturbance_box.sample_uniform(&mut rng),
                SignalStrategy::Mixed => {
                    if rng.random_bool(0.5) {
                        self.draw_vertex(&mut rng)
                    } else {
                        self.disturbance_box.sample_uniform(&mut rng)
                    }
                }
            };
            values.push(value);
            i += 1;
        }
        Ok(DisturbanceSignal {
            breakpoints,
            values,
            horizon,
            provenance: format!("{strategy:?} seed={seed} dwell={dwell}"),
        })
    }

    fn draw_vertex(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..self.disturbance_box.dim())
            .map(|i| {
                let (a, b) = self.disturbance_box.interval(i);
                if rng.random_bool(0.5) {
                    b
                } else {
                    a
                }
            })
            .collect()
    }
}

/// Result of a directional-derivative maximization over the box.
#[derive(Debug, Clone)]
pub struct DirectionalMax {
    pub value: f64,
    pub d: Vec<f64>,
    /// True when found by vertex enumeration of an affine-in-d objective;
    /// false means the value is only a certified lower bound of the max.
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalStrategy {
    Vertices,
    Uniform,
    Mixed,
}

impl std::str::FromStr for SignalStrategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vertices" => Ok(SignalStrategy::Vertices),
            "uniform" => Ok(SignalStrategy::Uniform),
            "mixed" => Ok(SignalStrategy::Mixed),
            other => Err(format!("unknown signal strategy `{other}`")),
        }
    }
}

/// Piecewise-constant disturbance signal: value `values[i]` holds on
/// `[breakpoints[i], breakpoints[i+1])` and the last value holds to the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceSignal {
    breakpoints: Vec<f64>,
    values: Vec<Vec<f64>>,
    pub horizon: f64,
    pub provenance: String,
}

impl DisturbanceSignal {
    pub fn piecewise(
        breakpoints: Vec<f64>,
        values: Vec<Vec<f64>>,
        horizon: f64,
    ) -> Result<DisturbanceSignal, SystemError> {
        if breakpoints.is_empty() || breakpoints[0] != 0.0 {
            return Err(SystemError::Configuration(
                "signal breakpoints must start at 0".into(),
            ));
        }
        if breakpoints.len() != values.len() {
            return Err(SystemError::Configuration(
                "one value per breakpoint segment required".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SystemError::Configuration(
                "signal breakpoints must be strictly increasing".into(),
            ));
        }
        Ok(DisturbanceSignal {
            breakpoints,
            values,
            horizon,
            provenance: "explicit".into(),
        })
    }

    pub fn constant(d: Vec<f64>, horizon: f64) -> DisturbanceSignal {
        DisturbanceSignal {
            breakpoints: vec![0.0],
            values: vec![d],
            horizon,
            provenance: "constant".into(),
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn segment_index(&self, t: f64) -> usize {
        match self
            .breakpoints
            .binary_search_by(|b| b.partial_cmp(&t).unwrap())
        {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        }
    }

    pub fn value_at(&self, t: f64) -> &[f64] {
        &self.values[self.segment_index(t.max(0.0))]
    }

    /// Same signal with breakpoints additionally placed on a uniform grid of
    /// spacing `max_dwell`, forcing integrator nodes at least that dense
    /// (dense-output interpolation error shrinks with the node spacing).
    pub fn with_node_grid(&self, horizon: f64, max_dwell: f64) -> DisturbanceSignal {
        let mut breaks: Vec<f64> = self
            .breakpoints
            .iter()
            .copied()
            .filter(|&b| b < horizon)
            .collect();
        let mut k = 1u64;
        loop {
            let t = k as f64 * max_dwell;
            if t >= horizon {
                break;
            }
            breaks.push(t);
            k += 1;
        }
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * horizon.max(1.0));
        let values: Vec<Vec<f64>> = breaks
            .iter()
            .map(|&b| self.value_at(b + 1e-12 * horizon.max(1.0)).to_vec())
            .collect();
        DisturbanceSignal {
            breakpoints: breaks,
            values,
            horizon: self.horizon,
            provenance: format!("{} + node grid {max_dwell}", self.provenance),
        }
    }

    /// Time-shifted signal `d(. + tau)` on the remaining horizon.
    pub fn shift(&self, tau: f64) -> DisturbanceSignal {
        let mut breakpoints = vec![0.0];
        let mut values = vec![self.value_at(tau).to_vec()];
        for (b, v) in self.breakpoints.iter().zip(self.values.iter()) {
            if *b > tau {
                breakpoints.push(b - tau);
                values.push(v.clone());
            }
        }
        DisturbanceSignal {
            breakpoints,
            values,
            horizon: (self.horizon - tau).max(0.0),
            provenance: format!("{} shifted by {tau}", self.provenance),
        }
    }
}
