//! The classical special case: a strict decay gauge
//! `max_d grad V . f <= -rho(V)` auto-completes to a full certificate with an
//! identically-zero auxiliary chain, and every region-restricted condition
//! passes vacuously.
//!
//! Run: `cargo run --example classical_lyapunov`

use stabcert::certificate::{classical_auto, Certificate};
use stabcert::checker::{certify, Sampling};
use stabcert::expr::{parse, ScalarField};
use stabcert::gauge::{ClassTag, GaugeFunction};
use stabcert::system::{DisturbanceBox, Regularity, UncertainSystem};

fn main() {
    // dx/dt = -x with V = x^2: the derivative gauge is exactly 2s.
    let system = UncertainSystem::from_exprs(
        "scalar decay",
        vec![parse("-x1", 1, 0).expect("expr")],
        DisturbanceBox::empty(),
        Regularity::default(),
    )
    .expect("system");

    let cert = classical_auto(
        ScalarField::norm_squared(1),
        GaugeFunction::linear(2.0, ClassTag::KInf),
        None,
    )
    .expect("auto-completion");
    println!(
        "auto-completed data: c1(1) = {:.3}, c2(1) = {:.3}, lambda(1) = {:.3}, r = {:.1}",
        cert.c1.value(1.0),
        cert.c2.value(1.0),
        cert.lambda.value(1.0),
        cert.r.eval(1.0)
    );

    let verdict = certify(&system, &Certificate::General(cert), &Sampling::default())
        .expect("verdict");
    print!("{}", verdict.summary());
}
