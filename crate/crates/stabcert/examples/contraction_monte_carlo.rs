//! Discretized-contraction verification by simulation: for the first built-in
//! system, run a Monte Carlo ensemble of contraction steps under vertex
//! disturbance signals with the certificate-derived horizon T(x) and margin
//! q(s) = s - lambda(s), then check the ensemble against the constructed
//! decay envelope.
//!
//! Run: `cargo run --example contraction_monte_carlo`

use stabcert::certificate::contraction_time;
use stabcert::discretize::{decay_envelope, run_contraction};
use stabcert::examples::{build_example41, example41_system, Example41Beta};
use stabcert::gauge::{ClassTag, GaugeFunction};
use stabcert::system::SignalStrategy;

fn main() {
    let beta = Example41Beta::linear();
    let p = 1.0;
    let system = example41_system(&beta, p).expect("system");
    let cert = build_example41(&beta, p, 0.5, 0.5).expect("certificate");

    let horizon_map = {
        let cert = cert.clone();
        move |x: &[f64]| contraction_time(&cert, x).map_err(|e| format!("{e}"))
    };
    let lambda = cert.lambda.clone();
    let q = GaugeFunction::custom(
        "s - lambda(s)",
        move |s| s - lambda.value(s),
        ClassTag::PositiveDefinite,
    );

    let t_unit = horizon_map(&[1.0, 0.0]).expect("horizon");
    println!("contraction horizon T(x) = {t_unit:.4} (level-independent here)");

    let steps = 6usize;
    let mut runs = Vec::new();
    for idx in 0..40u64 {
        let theta = std::f64::consts::TAU * (idx as f64) / 40.0;
        let r = 1.0 + 9.0 * (idx as f64) / 39.0;
        let x0 = [r * theta.cos(), r * theta.sin()];
        let signal = system
            .sample_signal(t_unit * steps as f64 * 1.2 + 1.0, 2.0, SignalStrategy::Vertices, idx)
            .expect("signal");
        let run = run_contraction(
            &system, &cert.v, &horizon_map, &q, &x0, &signal, steps, 1e-6, None,
        )
        .expect("run");
        runs.push(run);
    }

    let passed = runs.iter().filter(|r| r.all_passed()).count();
    println!("runs passing the per-step contraction: {passed}/{}", runs.len());
    let worst_ratio = runs
        .iter()
        .flat_map(|r| r.v_values.windows(2).map(|w| w[1] / w[0].max(1e-300)))
        .fold(0.0f64, f64::max);
    println!("worst per-step level ratio: {worst_ratio:.3e} (certificate guarantees 0.5)");

    let (_, conformance) = decay_envelope(&runs, &q).expect("envelope");
    println!(
        "decay envelope: max observed ratio to the bound {:.3e}, violations {}",
        conformance.max_ratio,
        conformance.violations.len()
    );
}
