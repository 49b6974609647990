//! One-dimensional search helpers shared by the analytic layer.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a maximum of `f` on `[a, b]`.
///
/// Returns the best point seen (including the bracket ends), so a multimodal
/// bracket never yields something worse than its endpoints.
pub(crate) fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut best = (a, f(a));
    let fb = f(b);
    if fb > best.1 {
        best = (b, fb);
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        // `>=` keeps the left sub-bracket on ties
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    for (x, fx) in [(c, fc), (d, fd)] {
        if fx > best.1 || (fx == best.1 && x < best.0) {
            best = (x, fx);
        }
    }
    best
}

/// Scan sorted points, then polish the best bracket with golden section.
/// Ties on the scan go to the smaller abscissa.
pub(crate) fn scan_then_golden<F: Fn(f64) -> f64>(f: F, xs: &[f64], tol: f64) -> (f64, f64) {
    debug_assert!(!xs.is_empty());
    let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut i_best = 0;
    for i in 1..xs.len() {
        if vals[i] > vals[i_best] {
            i_best = i;
        }
    }
    let lo = xs[i_best.saturating_sub(1)];
    let hi = xs[(i_best + 1).min(xs.len() - 1)];
    let (x, fx) = golden_max(&f, lo, hi, tol);
    if fx > vals[i_best] {
        (x, fx)
    } else {
        (xs[i_best], vals[i_best])
    }
}

/// Bisection on a bracket with a sign change; `None` when the signs agree.
pub(crate) fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> Option<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return None;
    }
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Some(0.5 * (a + b))
}
