//! Construct a decay bound from a pointwise contraction margin and stress it
//! against randomized admissible sequences, then majorize a nondecreasing map
//! by its smooth unbounded envelope.
//!
//! Run: `cargo run --example kl_construction`

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use stabcert::gauge::{kinf_envelope, kl_from_contraction, ClassTag, GaugeFunction};

fn main() {
    let q = GaugeFunction::custom(
        "s^2/(1+s)",
        |s| s * s / (1.0 + s),
        ClassTag::PositiveDefinite,
    );
    let sigma = kl_from_contraction(&q).expect("decay bound");

    println!("decay bound for the margin q(s) = s^2/(1+s):");
    for &s in &[1.0, 10.0, 100.0] {
        let row: Vec<String> = [0usize, 1, 2, 5, 10, 50]
            .iter()
            .map(|&i| format!("{:.4}", sigma.eval_step(s, i)))
            .collect();
        println!("  sigma({s:>5}, i) for i in [0,1,2,5,10,50]: {}", row.join("  "));
    }

    let mut rng = StdRng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let trials = 50_000usize;
    for _ in 0..trials {
        let v0: f64 = rng.random_range(0.0..500.0);
        let bounds = sigma.bounds_through(v0, 60);
        let mut v = v0;
        for (i, bound) in bounds.iter().enumerate() {
            assert!(v <= *bound, "sequence escaped the bound at step {i}");
            if *bound > 0.0 {
                worst = worst.max(v / bound);
            }
            let ceiling = (v - q.value(v)).max(0.0);
            v = ceiling * rng.random_range(0.0..=1.0f64);
        }
    }
    println!("{trials} admissible sequences stayed below the bound (worst ratio {worst:.4})");

    // Unbounded increasing envelope of a nondecreasing map.
    let envelope = kinf_envelope(|s| s * s, 1e4).expect("envelope");
    println!("\nenvelope of p(s) = s^2: value at 1 is {:.6} (exact 10/3)", envelope.value(1.0));
    for &s in &[0.1, 1.0, 5.0, 50.0] {
        assert!(envelope.value(s) >= s * s);
    }
    println!("envelope majorizes p on the probe grid");
}
