//! Shared one-dimensional numerics: adaptive quadrature, golden-section
//! extremum refinement and scalar bisection.

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
///
/// Returns None when the recursion cannot resolve the integrand (depth
/// exhaustion on a non-integrable singularity).
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Option<f64> {
    if a == b {
        return Some(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    if !(fa.is_finite() && fb.is_finite() && fm.is_finite()) {
        return None;
    }
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fb, fm, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Option<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    if !(flm.is_finite() && frm.is_finite()) {
        return None;
    }
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol || (b - a).abs() < 1e-15 * (1.0 + a.abs() + b.abs()) {
        return Some(left + right + delta / 15.0);
    }
    if depth == 0 {
        return None;
    }
    let lv = simpson_rec(f, a, m, fa, fm, flm, left, 0.5 * tol, depth - 1)?;
    let rv = simpson_rec(f, m, b, fm, fb, frm, right, 0.5 * tol, depth - 1)?;
    Some(lv + rv)
}

const INV_GOLDEN: f64 = 0.381_966_011_250_105_1; // 2 - phi

/// Golden-section search for the minimum of `f` on `[a, b]`.
/// Returns `(x_min, f_min)`.
pub fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let mut x1 = a + INV_GOLDEN * (b - a);
    let mut x2 = b - INV_GOLDEN * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs() + b.abs()) {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = a + INV_GOLDEN * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = b - INV_GOLDEN * (b - a);
            f2 = f(x2);
        }
    }
    if f1 < f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Golden-section search for the maximum of `f` on `[a, b]`.
pub fn golden_max(f: &dyn Fn(f64) -> f64, a: f64, b: f64, iters: usize) -> (f64, f64) {
    let (x, neg) = golden_min(&|t| -f(t), a, b, iters);
    (x, -neg)
}

/// Maximum of `f` over `[a, b]`: dense scan on `points + 1` nodes followed by
/// golden-section refinement around the best bracket. Endpoints included.
pub fn scan_max(f: &dyn Fn(f64) -> f64, a: f64, b: f64, points: usize) -> (f64, f64) {
    if b <= a {
        return (a, f(a));
    }
    let n = points.max(2);
    let mut best_i = 0usize;
    let mut best_x = a;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..=n {
        let x = a + (b - a) * (i as f64) / (n as f64);
        let v = f(x);
        if v > best_v {
            best_v = v;
            best_x = x;
            best_i = i;
        }
    }
    let lo = if best_i == 0 { a } else { a + (b - a) * ((best_i - 1) as f64) / (n as f64) };
    let hi = if best_i == n { b } else { a + (b - a) * ((best_i + 1) as f64) / (n as f64) };
    let (xr, vr) = golden_max(f, lo, hi, 60);
    if vr > best_v {
        (xr, vr)
    } else {
        (best_x, best_v)
    }
}

/// Minimum of `f` over `[a, b]` by dense scan plus golden refinement,
/// ties broken toward the smaller abscissa.
pub fn scan_min(f: &dyn Fn(f64) -> f64, a: f64, b: f64, points: usize) -> (f64, f64) {
    if b <= a {
        return (a, f(a));
    }
    let n = points.max(2);
    let mut best_i = 0usize;
    let mut best_x = a;
    let mut best_v = f64::INFINITY;
    for i in 0..=n {
        let x = a + (b - a) * (i as f64) / (n as f64);
        let v = f(x);
        if v < best_v {
            best_v = v;
            best_x = x;
            best_i = i;
        }
    }
    let lo = if best_i == 0 { a } else { a + (b - a) * ((best_i - 1) as f64) / (n as f64) };
    let hi = if best_i == n { b } else { a + (b - a) * ((best_i + 1) as f64) / (n as f64) };
    let (xr, vr) = golden_min(f, lo, hi, 60);
    if vr < best_v {
        (xr, vr)
    } else {
        (best_x, best_v)
    }
}

/// Bisection root of the increasing-crossing `f(x) = 0` on `[lo, hi]` with
/// `f(lo) <= 0 <= f(hi)`; absolute tolerance on x.
pub fn bisect_increasing(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, xtol: f64) -> f64 {
    for _ in 0..200 {
        if hi - lo <= xtol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_exact_on_polynomials() {
        let v = adaptive_simpson(&|x| x * x, 1.0, 2.0, 1e-12).unwrap();
        assert!((v - 7.0 / 3.0).abs() < 1e-10);
        let v = adaptive_simpson(&|x| x.powi(3) - x, -1.0, 3.0, 1e-12).unwrap();
        assert!((v - (20.0 - 4.0)).abs() < 1e-9);
    }

    #[test]
    fn simpson_rejects_singularity() {
        assert!(adaptive_simpson(&|x| 1.0 / x, 0.0, 1.0, 1e-10).is_none());
    }

    #[test]
    fn golden_finds_parabola_vertex() {
        // Minimizer location is sqrt(eps)-limited for a quadratic valley.
        let (x, v) = golden_min(&|t| (t - 1.25).powi(2) + 3.0, -4.0, 6.0, 80);
        assert!((x - 1.25).abs() < 1e-6);
        assert!((v - 3.0).abs() < 1e-12);
    }

    #[test]
    fn scan_max_catches_boundary_and_interior() {
        let (x, v) = scan_max(&|t| -t, 0.0, 5.0, 64);
        assert!(x.abs() < 1e-12 && v.abs() < 1e-12);
        let (x, v) = scan_max(&|t| t * (3.0 - t), 0.0, 5.0, 64);
        assert!((x - 1.5).abs() < 1e-6);
        assert!((v - 2.25).abs() < 1e-12);
    }

    #[test]
    fn bisect_solves_crossing() {
        let r = bisect_increasing(&|x| x * x - 2.0, 0.0, 2.0, 1e-13);
        assert!((r - std::f64::consts::SQRT_2).abs() < 1e-12);
    }
}
