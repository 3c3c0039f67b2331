//! Certify the built-in planar system `dx1 = -x1, dx2 = d beta(x1) - x2`
//! with `V = |x|^2` through the general (gauge-valued) route, for both a
//! linear and a cubic coupling.
//!
//! Run: `cargo run --example certify_example41`

use stabcert::certificate::Certificate;
use stabcert::checker::{certify, Sampling};
use stabcert::examples::{build_example41, example41_system, Example41Beta};

fn main() {
    let sampling = Sampling::default();
    for (label, beta) in [
        ("linear coupling", Example41Beta { gain: 1.0, exponent: 1 }),
        ("cubic coupling", Example41Beta { gain: 1.0, exponent: 3 }),
    ] {
        let p = 1.0;
        let system = example41_system(&beta, p).expect("system");
        let cert = build_example41(&beta, p, 0.5, 0.5).expect("certificate");
        println!(
            "== {label}: amplitude p = {p}, dwell r(1) = {:.3}, recovery threshold c2(1) = {:.6}",
            cert.r.eval(1.0),
            cert.c2.value(1.0)
        );
        let verdict = certify(&system, &Certificate::General(cert), &sampling).expect("verdict");
        print!("{}", verdict.summary());
        println!();
    }
}
