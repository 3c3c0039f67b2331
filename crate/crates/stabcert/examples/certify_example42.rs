//! Certify the built-in linear uncertain system `dx1 = x2,
//! dx2 = -(1+d) x1 - 2 x2` with `V = |x|^2` at the reference disturbance
//! amplitude, and show the failure with witnesses at an amplitude beyond the
//! threshold window.
//!
//! Run: `cargo run --example certify_example42`

use stabcert::certificate::Certificate;
use stabcert::checker::{certify, Sampling};
use stabcert::examples::{
    build_example42, example42_reference_amplitude, example42_system, example42_window_entry,
    Example42Params,
};

fn run_at(p: f64) {
    let (c1, c2, lambda) = (2.8594, 2.6094, 0.9999);
    println!("== amplitude p = {p:.6}");
    let window = example42_window_entry(p, c2);
    println!(
        "   window inequality: {} (margin {:.6})",
        window.status.as_str(),
        window.margin
    );
    let params = match Example42Params::new(p, c1, c2, lambda) {
        Ok(params) => params,
        Err(e) => {
            println!("   strict derivation rejected: {e}");
            println!("   falling back to the diagnostic derivation for witnesses");
            Example42Params::new_diagnostic(p, c1, c2, lambda).expect("diagnostic")
        }
    };
    let cert = build_example42(&params).expect("certificate");
    let system = example42_system(p).expect("system");
    let verdict = certify(&system, &Certificate::LinearRate(cert), &Sampling::default())
        .expect("verdict");
    print!("{}", verdict.summary());
    if let Some(w) = verdict
        .report
        .entries
        .iter()
        .find_map(|e| e.witness.as_ref().filter(|w| !w.x.is_empty()))
    {
        println!(
            "   witness state: ({}), lhs {:.6} vs rhs {:.6}",
            w.x.iter().map(|c| format!("{c:.4}")).collect::<Vec<_>>().join(", "),
            w.lhs,
            w.rhs
        );
    }
    println!();
}

fn main() {
    run_at(example42_reference_amplitude());
    run_at(0.75);
}
