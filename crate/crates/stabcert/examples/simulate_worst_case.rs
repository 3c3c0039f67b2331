//! Simulate the second built-in system under switching vertex disturbances,
//! locate the level minimum and the first entry into a target set, and write
//! one trajectory as CSV.
//!
//! Run: `cargo run --example simulate_worst_case`

use stabcert::examples::{example42_reference_amplitude, example42_system};
use stabcert::expr::ScalarField;
use stabcert::simulate::{first_crossing, integrate, min_on_trajectory};
use stabcert::system::SignalStrategy;

fn main() {
    let p = example42_reference_amplitude();
    let system = example42_system(p).expect("system");
    let v = ScalarField::norm_squared(2);
    let x0 = [1.0, 0.0];
    let horizon = 8.0;

    let signal = system
        .sample_signal(horizon, 0.5, SignalStrategy::Vertices, 3)
        .expect("signal");
    let traj = integrate(&system, &x0, &signal, horizon, 1e-9).expect("trajectory");

    let vf = |x: &[f64]| v.value(x);
    let (t_min, v_min) = min_on_trajectory(&traj, &vf, horizon).expect("minimum");
    println!("level minimum over [0, {horizon}]: V = {v_min:.6e} at t = {t_min:.4}");

    // First time the level halves.
    let half = first_crossing(&traj, &|x: &[f64]| 0.5 - v.value(x));
    match half {
        Some(t) => println!("level first halves at t = {t:.6}"),
        None => println!("level never halves on the horizon"),
    }

    // The derivative of V is not sign definite: under the constant worst
    // vertex the level grows right after leaving the x1 axis.
    let constant = stabcert::system::DisturbanceSignal::constant(vec![p], 1.0);
    let hold = integrate(&system, &x0, &constant, 1.0, 1e-9).expect("trajectory");
    let mut grew = None;
    for w in hold.times().windows(2) {
        let a = v.value(&hold.state_at(w[0]));
        let b = v.value(&hold.state_at(w[1]));
        if b > a * (1.0 + 1e-9) {
            grew = Some((w[0], a, w[1], b));
            break;
        }
    }
    if let Some((t0, a, t1, b)) = grew {
        println!("under d = {p:.4} held constant, V grows on [{t0:.4}, {t1:.4}]: {a:.6e} -> {b:.6e}");
    }

    println!("\nfirst rows of the trajectory CSV:");
    print!("t,x_1,x_2,d_1,V\n");
    for (t, x) in traj.times().iter().zip(traj.states().iter()).take(8) {
        let d = traj.signal.value_at(*t);
        println!("{t},{},{},{},{}", x[0], x[1], d[0], v.value(x));
    }
    println!("... ({} nodes total)", traj.times().len());
}
