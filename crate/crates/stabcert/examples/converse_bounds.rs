//! Converse construction and attractivity estimate: from a continuous decay
//! bound, recover the overshoot gauge and the level-indexed horizon; from a
//! contraction margin, estimate the time to reach a target level from a ball
//! of initial states, and assemble exponential-envelope constants.
//!
//! Run: `cargo run --example converse_bounds`

use stabcert::discretize::{attractivity_estimate, converse_data, exponential_constants};
use stabcert::expr::ScalarField;
use stabcert::gauge::{ClassTag, GaugeFunction, KLBound};

fn main() {
    // Converse data from sigma(s, t) = s e^{-t} with identity envelopes and a
    // contraction fraction of one half: the crossing time is ln 2 at every
    // level, so the horizon is ln 2 + 1.
    let sigma = KLBound::from_rule(|s, t| s * (-t).exp());
    let id = GaugeFunction::linear(1.0, ClassTag::KInf);
    let conv = converse_data(&sigma, &id, &id, 0.5).expect("converse data");
    println!("converse horizon T(s) = t(s) + 1:");
    for &s in &[0.01, 1.0, 100.0] {
        println!("  T({s:>6}) = {:.6} (expected {:.6})", conv.horizon_at_level(s).unwrap(), 2f64.ln() + 1.0);
    }
    println!("overshoot gauge a(3) = {:.6}", conv.a.value(3.0));

    // Attractivity: V = |x|^2 on the plane, unit overshoot gauge, margin
    // q(s) = s/2 and unit horizons; time to bring the ball of radius 2 into
    // the level set { V <= 0.5 }.
    let v = ScalarField::norm_squared(2);
    let a = GaugeFunction::linear(1.0, ClassTag::KInf);
    let q = GaugeFunction::linear(0.5, ClassTag::PositiveDefinite);
    let unit = |_: &[f64]| -> Result<f64, String> { Ok(1.0) };
    let t_hat = attractivity_estimate(&v, &a, &q, &unit, 0.5, 2.0).expect("estimate");
    println!("\nattractivity estimate for eps = 0.5, R = 2: T^ = {t_hat:.4}");
    let t_zero = attractivity_estimate(&v, &a, &q, &unit, 5.0, 2.0).expect("estimate");
    println!("already inside the target level (eps = 5): T^ = {t_zero}");

    // Exponential constants from a constant-horizon contraction.
    let (m, sigma_rate) = exponential_constants(1.5, 2.0, 0.75, 0.5, 2.0).expect("constants");
    println!("\nexponential envelope for (M_a, r, q, K1, K2) = (1.5, 2, 0.75, 0.5, 2):");
    println!("  |x(t)| <= {m:.6} * exp(-{sigma_rate:.6} t) |x0|");
}
