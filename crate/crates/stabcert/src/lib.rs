//! Certification toolkit for robust global stability of uncertain ODE systems
//! `dx/dt = f(d, x)` using positive definite functions whose derivative need
//! not be sign definite.
//!
//! The toolkit decides, by numerical verification of a scalar inequality
//! system and pointwise state-space checks, whether a candidate function V
//! together with an auxiliary-function chain certifies uniform robust global
//! asymptotic or exponential stability, and cross-validates each verdict by
//! simulation: discretized contraction runs, decay-envelope conformance and
//! chain-bound diagnostics along trajectories.
//!
//! Module map:
//! - [`gauge`] — comparison functions (positive definite, class K, class
//!   K-infinity), KL decay bounds and envelope constructions;
//! - [`system`] — uncertain systems, disturbance boxes and signals, exact
//!   directional maximization over the disturbance set;
//! - [`simulate`] — adaptive integration with dense output, minimum search
//!   and crossing detection;
//! - [`certificate`] — certificate data model, region classification and the
//!   derived dwell/overshoot/contraction-time quantities;
//! - [`checker`] — premise verification and verdicts;
//! - [`discretize`] — simulation-side contraction verifier and converse data;
//! - [`examples`] — built-in reconstructions of the two worked systems;
//! - [`cli`] + [`config`] — command front end, run configuration and CSV
//!   artifacts.
//!
//! The runnable programs under `examples/` demonstrate one capability each;
//! `src/main.rs` is a thin command-line wrapper over [`cli::run`].

pub mod certificate;
pub mod checker;
pub mod cli;
pub mod config;
pub mod discretize;
pub mod examples;
pub mod expr;
pub mod gauge;
pub mod numerics;
pub mod simulate;
pub mod system;
