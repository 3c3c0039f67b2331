//! Sweep the disturbance amplitude of the second built-in system through the
//! feasibility inequality, then search for the largest certifiable amplitude
//! over the default parameter ranges.
//!
//! Run: `cargo run --example disturbance_sweep`

use stabcert::examples::{
    example42_amplitude_cap, feasible_p, feasible_p_limit, maximize_p, SearchRanges,
};

fn main() {
    let (c1, c2, lambda) = (2.8594, 2.6094, 0.9999);
    println!("feasibility at c1 = {c1}, c2 = {c2}, lambda = {lambda}:");
    println!("{:>8} {:>14} {:>14} {:>9}", "p", "margin", "limit margin", "feasible");
    for k in 0..=12 {
        let p = 0.05 + 0.25 * (k as f64) / 12.0;
        let (ok, margin) = feasible_p(p, c1, c2, lambda).expect("margin");
        let (_, limit) = feasible_p_limit(p, c1, c2).expect("limit margin");
        println!("{p:>8.4} {margin:>14.6e} {limit:>14.6e} {ok:>9}");
    }
    println!("\nhard amplitude cap (window closes): {:.6}", example42_amplitude_cap());

    let search = SearchRanges::default();
    let result = maximize_p(&search).expect("search");
    println!("largest certifiable amplitude over default ranges: {:.6}", result.p_best);
    if let Some(best) = result.best {
        println!(
            "  at c1 = {:.6}, c2 = {:.6}, lambda = {:.9} (margin {:.3e})",
            best.c1, best.c2, best.lambda, best.margin
        );
    }
    println!("  frontier rows explored: {}", result.frontier.len());
}
