//! Adaptive explicit Runge-Kutta integration under piecewise-constant
//! disturbance signals, with dense output for minimum search and
//! first-crossing detection.
//!
//! The integrator is a Dormand-Prince 5(4) pair with standard step control.
//! Integration restarts at every signal breakpoint so a discontinuity in the
//! disturbance never crosses a step; dense output between accepted steps is
//! cubic Hermite from the stored endpoint derivatives. Results are bitwise
//! reproducible for a fixed tolerance and signal.

use thiserror::Error;

use crate::numerics::golden_min;
use crate::system::{DisturbanceSignal, UncertainSystem};

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("integration diverged at t = {t}: step size underflow or state blowup")]
    Divergence { t: f64, state: Vec<f64> },
    #[error("window [0, {requested}] exceeds trajectory range [0, {available}]")]
    WindowOutOfRange { requested: f64, available: f64 },
    #[error("{0}")]
    Configuration(String),
}

/// A stored solution: strictly increasing node times, one state per node, and
/// per-interval endpoint derivatives for dense evaluation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    deriv_left: Vec<Vec<f64>>,
    deriv_right: Vec<Vec<f64>>,
    pub signal: DisturbanceSignal,
    pub tol: f64,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    /// Dense evaluation by cubic Hermite interpolation on the containing
    /// interval; node times return the stored states exactly.
    pub fn state_at(&self, t: f64) -> Vec<f64> {
        let t = t.clamp(self.times[0], self.final_time());
        let idx = match self.times.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => return self.states[i].clone(),
            Err(i) => i.saturating_sub(1).min(self.times.len() - 2),
        };
        let t0 = self.times[idx];
        let t1 = self.times[idx + 1];
        let h = t1 - t0;
        let theta = (t - t0) / h;
        let (y0, y1) = (&self.states[idx], &self.states[idx + 1]);
        let (f0, f1) = (&self.deriv_left[idx], &self.deriv_right[idx]);
        let t2 = theta * theta;
        let t3 = t2 * theta;
        let c00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let c10 = t3 - 2.0 * t2 + theta;
        let c01 = -2.0 * t3 + 3.0 * t2;
        let c11 = t3 - t2;
        (0..y0.len())
            .map(|i| c00 * y0[i] + c10 * h * f0[i] + c01 * y1[i] + c11 * h * f1[i])
            .collect()
    }
}

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const MAX_TOTAL_STEPS: usize = 50_000_000;

// Dormand-Prince 5(4) coefficients.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Error coefficients: fifth-order weights minus the embedded fourth-order ones.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrate the system from `x0` under `signal` over `[0, horizon]` at
/// relative/absolute tolerance `tol`.
pub fn integrate(
    system: &UncertainSystem,
    x0: &[f64],
    signal: &DisturbanceSignal,
    horizon: f64,
    tol: f64,
) -> Result<Trajectory, SimulateError> {
    if horizon <= 0.0 || tol <= 0.0 {
        return Err(SimulateError::Configuration(
            "horizon and tolerance must be positive".into(),
        ));
    }
    if signal.horizon < horizon - 1e-9 * horizon.max(1.0) {
        return Err(SimulateError::Configuration(format!(
            "signal covers [0, {}] but horizon is {horizon}",
            signal.horizon
        )));
    }
    let n = system.dim();
    if x0.len() != n {
        return Err(SimulateError::Configuration(format!(
            "initial state has {} components, system has {n}",
            x0.len()
        )));
    }

    let mut boundaries: Vec<f64> = signal
        .breakpoints()
        .iter()
        .copied()
        .filter(|&b| b > 0.0 && b < horizon)
        .collect();
    boundaries.push(horizon);

    let mut times = vec![0.0];
    let mut states = vec![x0.to_vec()];
    let mut deriv_left: Vec<Vec<f64>> = Vec::new();
    let mut deriv_right: Vec<Vec<f64>> = Vec::new();

    let mut y = x0.to_vec();
    let mut t = 0.0;
    let mut total_steps = 0usize;

    let mut k = vec![vec![0.0; n]; 7];
    let mut y_stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];

    for &tb in &boundaries {
        if tb - t <= 1e-14 * tb.max(1.0) {
            t = t.max(tb);
            continue;
        }
        let d = signal.value_at(0.5 * (t + tb)).to_vec();
        system.eval_field(&d, &y, &mut k[0]);
        let seg_len = tb - t;
        let mut h = initial_step(&y, &k[0], tol, seg_len);

        while tb - t > 1e-14 * tb.max(1.0) {
            h = h.min(tb - t);
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(SimulateError::Divergence { t, state: y });
            }
            total_steps += 1;
            if total_steps > MAX_TOTAL_STEPS {
                return Err(SimulateError::Divergence { t, state: y });
            }

            // Stages 2..6.
            for i in 0..n {
                y_stage[i] = y[i] + h * A21 * k[0][i];
            }
            system.eval_field(&d, &y_stage, &mut k[1]);
            for i in 0..n {
                y_stage[i] = y[i] + h * (A31 * k[0][i] + A32 * k[1][i]);
            }
            system.eval_field(&d, &y_stage, &mut k[2]);
            for i in 0..n {
                y_stage[i] = y[i] + h * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
            }
            system.eval_field(&d, &y_stage, &mut k[3]);
            for i in 0..n {
                y_stage[i] = y[i]
                    + h * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
            }
            system.eval_field(&d, &y_stage, &mut k[4]);
            for i in 0..n {
                y_stage[i] = y[i]
                    + h * (A61 * k[0][i]
                        + A62 * k[1][i]
                        + A63 * k[2][i]
                        + A64 * k[3][i]
                        + A65 * k[4][i]);
            }
            system.eval_field(&d, &y_stage, &mut k[5]);
            // Fifth-order solution (the b row doubles as stage 7, FSAL).
            for i in 0..n {
                y_new[i] = y[i]
                    + h * (B1 * k[0][i] + B3 * k[2][i] + B4 * k[3][i] + B5 * k[4][i]
                        + B6 * k[5][i]);
            }
            system.eval_field(&d, &y_new, &mut k[6]);

            let mut err_acc = 0.0;
            for i in 0..n {
                let e = E1 * k[0][i]
                    + E3 * k[2][i]
                    + E4 * k[3][i]
                    + E5 * k[4][i]
                    + E6 * k[5][i]
                    + E7 * k[6][i];
                let sc = tol + tol * y[i].abs().max(y_new[i].abs());
                let r = h * e / sc;
                err_acc += r * r;
            }
            let err = (err_acc / n as f64).sqrt();

            if err <= 1.0 {
                t += h;
                if y_new.iter().any(|v| !v.is_finite() || v.abs() > 1e150) {
                    return Err(SimulateError::Divergence { t, state: y_new.clone() });
                }
                deriv_left.push(k[0].clone());
                deriv_right.push(k[6].clone());
                y.copy_from_slice(&y_new);
                k.swap(0, 6); // FSAL
                times.push(t);
                states.push(y.clone());
                let factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                h *= factor;
            } else {
                let factor = (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
                h *= factor;
            }
        }
        t = tb;
    }

    Ok(Trajectory {
        times,
        states,
        deriv_left,
        deriv_right,
        signal: signal.clone(),
        tol,
    })
}

fn initial_step(y: &[f64], f: &[f64], tol: f64, seg_len: f64) -> f64 {
    let n = y.len() as f64;
    let d0 = (y
        .iter()
        .map(|v| {
            let sc = tol + tol * v.abs();
            (v / sc) * (v / sc)
        })
        .sum::<f64>()
        / n)
        .sqrt();
    let d1 = (f
        .iter()
        .zip(y.iter())
        .map(|(fv, yv)| {
            let sc = tol + tol * yv.abs();
            (fv / sc) * (fv / sc)
        })
        .sum::<f64>()
        / n)
        .sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-3 * seg_len
    } else {
        0.01 * d0 / d1
    };
    h.clamp(1e-12f64.min(seg_len), seg_len)
}

/// Minimum of a scalar function of the state over the dense output on
/// `[0, window_end]`: a grid of at least a thousand points refined by
/// golden-section on the bracketing interval, ties broken toward earlier time.
pub fn min_on_trajectory(
    traj: &Trajectory,
    scalar: &dyn Fn(&[f64]) -> f64,
    window_end: f64,
) -> Result<(f64, f64), SimulateError> {
    let t_final = traj.final_time();
    if window_end > t_final * (1.0 + 1e-12) + 1e-300 {
        return Err(SimulateError::WindowOutOfRange { requested: window_end, available: t_final });
    }
    let window_end = window_end.min(t_final);
    let nodes_inside = traj.times().iter().filter(|&&t| t <= window_end).count();
    let grid = (4 * nodes_inside).max(1000);

    let eval = |t: f64| scalar(&traj.state_at(t));
    let mut best_t = 0.0;
    let mut best_v = eval(0.0);
    let mut best_i = 0usize;
    for i in 1..=grid {
        let t = window_end * (i as f64) / (grid as f64);
        let v = eval(t);
        if v < best_v {
            best_v = v;
            best_t = t;
            best_i = i;
        }
    }
    let lo = if best_i == 0 { 0.0 } else { window_end * ((best_i - 1) as f64) / (grid as f64) };
    let hi = if best_i == grid {
        window_end
    } else {
        window_end * ((best_i + 1) as f64) / (grid as f64)
    };
    let (tr, vr) = golden_min(&eval, lo, hi, 80);
    if vr < best_v {
        best_t = tr;
        best_v = vr;
    }
    // Stored nodes are authoritative sample points; never report worse.
    for (t, x) in traj.times().iter().zip(traj.states().iter()) {
        if *t <= window_end {
            let v = scalar(x);
            if v < best_v {
                best_v = v;
                best_t = *t;
            }
        }
    }
    Ok((best_t, best_v))
}

/// Maximum of a scalar of the state over `[0, window_end]` on the dense grid.
pub fn max_on_trajectory(
    traj: &Trajectory,
    scalar: &dyn Fn(&[f64]) -> f64,
    window_end: f64,
) -> Result<(f64, f64), SimulateError> {
    let (t, v) = min_on_trajectory(traj, &|x| -scalar(x), window_end)?;
    Ok((t, -v))
}

/// Earliest time where the continuous margin `g(x(t))` becomes nonnegative,
/// refined by sign-change bisection on the dense output to a time tolerance of
/// `1e-9` of the trajectory span. Crossings narrower than the scan grid
/// spacing can be missed.
pub fn first_crossing(traj: &Trajectory, margin: &dyn Fn(&[f64]) -> f64) -> Option<f64> {
    let t_final = traj.final_time();
    let grid = (4 * traj.times().len()).max(1000);
    let eval = |t: f64| margin(&traj.state_at(t));
    if eval(0.0) >= 0.0 {
        return Some(0.0);
    }
    let mut prev_t = 0.0;
    for i in 1..=grid {
        let t = t_final * (i as f64) / (grid as f64);
        if eval(t) >= 0.0 {
            // Bisect the sign change in (prev_t, t].
            let mut lo = prev_t;
            let mut hi = t;
            let tol = 1e-9 * t_final;
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                if eval(mid) >= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some(hi);
        }
        prev_t = t;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::system::{DisturbanceBox, Regularity, SignalStrategy};

    fn scalar_decay() -> UncertainSystem {
        UncertainSystem::from_exprs(
            "decay",
            vec![parse("-x1", 1, 0).unwrap()],
            DisturbanceBox::empty(),
            Regularity::default(),
        )
        .unwrap()
    }

    fn planar(p: f64, beta_gain: f64) -> UncertainSystem {
        let f1 = parse("-x1", 2, 1).unwrap();
        let f2 = parse(&format!("d1*({beta_gain}*x1) - x2"), 2, 1).unwrap();
        UncertainSystem::from_exprs(
            "planar",
            vec![f1, f2],
            DisturbanceBox::new(vec![(-p, p)]).unwrap(),
            Regularity::default(),
        )
        .unwrap()
    }

    fn no_signal(horizon: f64) -> DisturbanceSignal {
        DisturbanceSignal::constant(Vec::new(), horizon)
    }

    #[test]
    fn exponential_decay_closed_form() {
        let sys = scalar_decay();
        let traj = integrate(&sys, &[1.0], &no_signal(1.0), 1.0, 1e-9).unwrap();
        let x1 = traj.final_state()[0];
        assert!((x1 - (-1.0f64).exp()).abs() < 1e-6, "{x1}");
    }

    #[test]
    fn decoupled_planar_decay() {
        let sys = planar(1.0, 0.0);
        let sig = sys.sample_signal(1.0, 0.1, SignalStrategy::Vertices, 1).unwrap();
        let traj = integrate(&sys, &[1.0, 1.0], &sig, 1.0, 1e-9).unwrap();
        let e1 = (-1.0f64).exp();
        assert!((traj.final_state()[0] - e1).abs() < 1e-6);
        assert!((traj.final_state()[1] - e1).abs() < 1e-6);
    }

    #[test]
    fn equilibrium_stays_at_zero() {
        let sys = planar(1.0, 1.0);
        let sig = sys.sample_signal(5.0, 0.5, SignalStrategy::Mixed, 7).unwrap();
        let traj = integrate(&sys, &[0.0, 0.0], &sig, 5.0, 1e-8).unwrap();
        for s in traj.states() {
            assert!(s.iter().all(|v| v.abs() == 0.0));
        }
    }

    #[test]
    fn divergence_reports_last_state() {
        // dx/dt = x^2 from 1 blows up at t = 1.
        let sys = UncertainSystem::from_exprs(
            "blowup",
            vec![parse("x1^2", 1, 0).unwrap()],
            DisturbanceBox::empty(),
            Regularity { one_sided_lipschitz: true, lipschitz: true },
        )
        .unwrap();
        let err = integrate(&sys, &[1.0], &no_signal(2.0), 2.0, 1e-8);
        match err {
            Err(SimulateError::Divergence { t, state }) => {
                assert!(t <= 1.01, "diverged at {t}");
                assert!(state[0] > 1e3, "last valid state {state:?}");
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn dense_output_matches_nodes_and_tolerance() {
        let sys = scalar_decay();
        let traj = integrate(&sys, &[1.0], &no_signal(2.0), 2.0, 1e-9).unwrap();
        for (t, s) in traj.times().iter().zip(traj.states().iter()) {
            assert_eq!(&traj.state_at(*t), s);
        }
        for i in 0..=200 {
            let t = 2.0 * (i as f64) / 200.0;
            let v = traj.state_at(t)[0];
            assert!((v - (-t).exp()).abs() < 1e-7, "t={t}");
        }
    }

    #[test]
    fn min_on_trajectory_boundary_minimum() {
        let sys = scalar_decay();
        let traj = integrate(&sys, &[1.0], &no_signal(1.0), 1.0, 1e-9).unwrap();
        let (tm, vm) = min_on_trajectory(&traj, &|x| x[0] * x[0], 1.0).unwrap();
        assert!((tm - 1.0).abs() < 1e-9);
        assert!((vm - (-2.0f64).exp()).abs() < 1e-7);
    }

    #[test]
    fn min_on_trajectory_equilibrium() {
        let sys = planar(1.0, 1.0);
        let sig = sys.sample_signal(1.0, 0.25, SignalStrategy::Vertices, 2).unwrap();
        let traj = integrate(&sys, &[0.0, 0.0], &sig, 1.0, 1e-8).unwrap();
        let (tm, vm) = min_on_trajectory(&traj, &|x| x[0] * x[0] + x[1] * x[1], 1.0).unwrap();
        assert_eq!(tm, 0.0);
        assert_eq!(vm, 0.0);
    }

    #[test]
    fn min_matches_dense_scan_on_damped_oscillator() {
        let f1 = parse("x2", 2, 0).unwrap();
        let f2 = parse("-x1 - 0.2*x2", 2, 0).unwrap();
        let sys = UncertainSystem::from_exprs(
            "oscillator",
            vec![f1, f2],
            DisturbanceBox::empty(),
            Regularity::default(),
        )
        .unwrap();
        let traj = integrate(&sys, &[1.0, 0.0], &no_signal(10.0), 10.0, 1e-10).unwrap();
        let v = |x: &[f64]| x[0] * x[0] + x[1] * x[1];
        let (_, vm) = min_on_trajectory(&traj, &v, 10.0).unwrap();
        let mut brute = f64::INFINITY;
        for i in 0..=1_000_000 {
            let t = 10.0 * (i as f64) / 1e6;
            brute = brute.min(v(&traj.state_at(t)));
        }
        assert!((vm - brute).abs() <= 1e-8 * (1.0 + brute));
        assert!(vm <= brute + 1e-15);
    }

    #[test]
    fn min_never_exceeds_stored_nodes() {
        let sys = planar(1.0, 1.0);
        let sig = sys.sample_signal(4.0, 0.5, SignalStrategy::Mixed, 9).unwrap();
        let traj = integrate(&sys, &[2.0, -1.0], &sig, 4.0, 1e-8).unwrap();
        let v = |x: &[f64]| x[0] * x[0] + x[1] * x[1];
        let (_, vm) = min_on_trajectory(&traj, &v, 4.0).unwrap();
        for (t, s) in traj.times().iter().zip(traj.states().iter()) {
            if *t <= 4.0 {
                assert!(vm <= v(s) + 1e-15);
            }
        }
    }

    #[test]
    fn window_out_of_range_is_an_error() {
        let sys = scalar_decay();
        let traj = integrate(&sys, &[1.0], &no_signal(1.0), 1.0, 1e-8).unwrap();
        assert!(matches!(
            min_on_trajectory(&traj, &|x| x[0], 2.0),
            Err(SimulateError::WindowOutOfRange { .. })
        ));
    }

    #[test]
    fn first_crossing_closed_form() {
        let sys = scalar_decay();
        let traj = integrate(&sys, &[1.0], &no_signal(1.0), 1.0, 1e-10).unwrap();
        // x(t)^2 <= 0.5 first holds at t = ln(2)/2.
        let t = first_crossing(&traj, &|x| 0.5 - x[0] * x[0]).unwrap();
        assert!((t - 0.5 * 2.0f64.ln()).abs() < 1e-6, "{t}");
    }

    #[test]
    fn first_crossing_immediate_and_absent() {
        let sys = scalar_decay();
        let traj = integrate(&sys, &[1.0], &no_signal(1.0), 1.0, 1e-8).unwrap();
        assert_eq!(first_crossing(&traj, &|x| 2.0 - x[0]), Some(0.0));
        assert_eq!(first_crossing(&traj, &|x| -1.0 - x[0]), None);
    }

    #[test]
    fn semigroup_restart_reproduces_tail() {
        let sys = planar(1.0, 1.0);
        let sig = sys.sample_signal(4.0, 0.7, SignalStrategy::Mixed, 17).unwrap();
        let tol = 1e-9;
        let traj = integrate(&sys, &[1.5, -0.5], &sig, 4.0, tol).unwrap();
        // Restart from a stored node near the middle.
        let idx = traj.times().iter().position(|&t| t > 2.0).unwrap();
        let tau = traj.times()[idx];
        let x_tau = traj.states()[idx].clone();
        let shifted = sig.shift(tau);
        let tail = integrate(&sys, &x_tau, &shifted, 4.0 - tau, tol).unwrap();
        for i in 0..=20 {
            let s = (4.0 - tau) * (i as f64) / 20.0;
            let a = traj.state_at(tau + s);
            let b = tail.state_at(s);
            let diff: f64 = a
                .iter()
                .zip(b.iter())
                .map(|(u, v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt();
            assert!(diff <= 10.0 * tol, "semigroup deviation {diff} at offset {s}");
        }
    }

    #[test]
    fn halving_tolerance_at_least_halves_error() {
        let sys = planar(1.0, 0.0);
        let sig = DisturbanceSignal::constant(vec![0.5], 3.0);
        let x0 = [1.0, -2.0];
        let reference = integrate(&sys, &x0, &sig, 3.0, 1e-4 / 100.0).unwrap();
        let err_at = |tol: f64| -> f64 {
            let traj = integrate(&sys, &x0, &sig, 3.0, tol).unwrap();
            traj.final_state()
                .iter()
                .zip(reference.final_state().iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        };
        let e_full = err_at(1e-4);
        let e_half = err_at(5e-5);
        assert!(
            e_half <= 0.5 * e_full,
            "halving tol: error went {e_full} -> {e_half}"
        );
    }
}
