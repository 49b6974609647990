//! Rate functions, overlap parameters and thresholds.
//!
//! Everything here is a pure function of its arguments. Quantities that would
//! underflow as probabilities are kept in log space throughout.

use crate::error::{LabError, Result};
use crate::optim;
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

/// Points per unit interval in the coarse scan of [`maximize_psi`].
const PSI_GRID: usize = 10_000;
/// Log-spaced probes near each endpoint: `0.5 * 10^-t` for `t` in `[0, 16)`.
const PSI_EDGE_DECADES: usize = 16;
const PSI_EDGE_STEPS_PER_DECADE: usize = 100;
const X_TOL: f64 = 1e-10;
const R_TOL: f64 = 1e-8;

fn pow2(e: i32) -> f64 {
    2f64.powi(e)
}

/// `2^(k-1) - 1`, the number of bichromatic patterns divided by two.
fn half_bichromatic(k: u32) -> f64 {
    pow2(k as i32 - 1) - 1.0
}

/// Expected fraction of critical edges among bichromatic ones, `k / (2^(k-1) - 1)`.
pub fn critical_fraction(k: u32) -> f64 {
    k as f64 / half_bichromatic(k)
}

/// Model parameters of the critical-planted setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub k: u32,
    pub r: f64,
    pub beta: f64,
    pub lambda: f64,
}

impl Params {
    /// Build from `(k, r, beta)`; `lambda = (1 + beta) k r / (2^(k-1) - 1)`.
    pub fn new(k: u32, r: f64, beta: f64) -> Result<Self> {
        if k < 3 {
            return Err(LabError::param(format!("k must be at least 3, got {k}")));
        }
        if !(r >= 0.0) || !r.is_finite() {
            return Err(LabError::param(format!("r must be finite and non-negative, got {r}")));
        }
        if !(beta.abs() < 1.0) {
            return Err(LabError::param(format!("|beta| must be below 1, got {beta}")));
        }
        let lambda = (1.0 + beta) * critical_fraction(k) * r;
        Ok(Params { k, r, beta, lambda })
    }
}

/// Bundles the evaluators at fixed parameters.
#[derive(Debug, Clone, Copy)]
pub struct RateFunctionSet {
    pub params: Params,
}

impl RateFunctionSet {
    pub fn new(params: Params) -> Self {
        RateFunctionSet { params }
    }

    pub fn h(&self, x: f64) -> Result<f64> {
        binary_entropy(x)
    }

    pub fn phi(&self, x: f64) -> Result<f64> {
        chernoff_phi(x)
    }

    pub fn psi(&self, x: f64) -> Result<f64> {
        psi(self.params.k, self.params.r, x)
    }

    pub fn g(&self, alpha: f64) -> Result<f64> {
        pair_rate(self.params.k, self.params.r, self.params.beta, alpha)
    }

    pub fn overlap(&self, alpha: f64) -> Result<OverlapParams> {
        overlap_params(self.params.k, alpha)
    }

    pub fn xi(&self) -> f64 {
        local_cluster_rate(self.params.k, self.params.lambda)
    }
}

/// `(1/n) ln E[Z]` in the limit: `ln 2 + r ln(1 - 2^(1-k))`.
pub fn first_moment_rate(k: u32, r: f64) -> f64 {
    LN_2 + r * (-pow2(1 - k as i32)).ln_1p()
}

/// `C(n, k)` as a float; exact while the value fits in 53 bits.
pub fn binom_f64(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let s: f64 = terms.iter().map(|&t| (t - max).exp()).sum();
    max + s.ln()
}

/// Natural log of the exact expectation of `Z` over `H_k(n, m)`.
pub fn ln_exact_first_moment(n: u64, m: u64, k: u32) -> Result<f64> {
    let kk = k as u64;
    if k < 3 || kk > n {
        return Err(LabError::param(format!("need 3 <= k <= n, got n={n}, k={k}")));
    }
    let total = binom_f64(n, kk);
    if m as f64 > total {
        return Err(LabError::param(format!("m = {m} exceeds C({n},{k}) = {total}")));
    }
    let mut terms = Vec::with_capacity(n as usize + 1);
    let mut ln_cnj = 0.0f64;
    for j in 0..=n {
        if j > 0 {
            ln_cnj += ((n - j + 1) as f64 / j as f64).ln();
        }
        let bad = binom_f64(j, kk) + binom_f64(n - j, kk);
        if total - bad < m as f64 {
            continue;
        }
        // ln[C(total - bad, m) / C(total, m)] as a product of ratios
        let mut t = ln_cnj;
        if bad > 0.0 {
            for i in 0..m {
                t += (-bad / (total - i as f64)).ln_1p();
            }
        }
        terms.push(t);
    }
    Ok(log_sum_exp(&terms))
}

/// Exact finite-`n` expectation `E[Z]` over the uniform model `H_k(n, m)`.
pub fn exact_first_moment(n: u64, m: u64, k: u32) -> Result<f64> {
    Ok(ln_exact_first_moment(n, m, k)?.exp())
}

/// `x ln x` with the limit value 0 at `x = 0`.
fn xlnx(x: f64) -> f64 {
    if x <= 1e-300 {
        0.0
    } else {
        x * x.ln()
    }
}

fn entropy_raw(x: f64) -> f64 {
    let tail = if 1.0 - x <= 1e-16 { 0.0 } else { (1.0 - x) * (-x).ln_1p() };
    -xlnx(x) - tail
}

/// Binary entropy in nats, `h(0) = h(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(LabError::domain(format!("entropy argument {x} outside [0, 1]")));
    }
    Ok(entropy_raw(x))
}

fn phi_raw(x: f64) -> f64 {
    (1.0 + x) * x.ln_1p() - x
}

/// `phi(x) = (1 + x) ln(1 + x) - x`, defined for `x > -1`.
pub fn chernoff_phi(x: f64) -> Result<f64> {
    if !(x > -1.0) {
        return Err(LabError::domain(format!("phi argument {x} must exceed -1")));
    }
    Ok(phi_raw(x))
}

/// Asymptotic `ln Pr[Bin(n, p) = np + t]` without the polynomial prefactor:
/// `-mu phi(t / mu) - (n - mu) phi(-t / (n - mu))` with `mu = np`.
///
/// This is `-n KL((mu + t)/n || p)`. `n` may be a real count.
pub fn binomial_point_rate(n: f64, p: f64, t: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(LabError::domain(format!("p = {p} outside (0, 1)")));
    }
    let mu = n * p;
    if !(mu + t > 0.0 && mu + t < n) {
        return Err(LabError::domain(format!("mu + t = {} outside (0, {n})", mu + t)));
    }
    let rest = n - mu;
    Ok(-mu * phi_raw(t / mu) - rest * phi_raw(-t / rest))
}

/// `-n KL(x/n || p)` for real `n`, allowing the endpoints `x in {0, n}` and
/// degenerate `p`.
fn binomial_rate_closed(n: f64, p: f64, x: f64) -> f64 {
    if n <= 0.0 {
        return if x.abs() <= 1e-12 { 0.0 } else { f64::NEG_INFINITY };
    }
    let x = x.clamp(0.0, n);
    if p <= 0.0 {
        return if x == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if p >= 1.0 {
        return if x == n { 0.0 } else { f64::NEG_INFINITY };
    }
    if x == 0.0 {
        return n * (-p).ln_1p();
    }
    if x == n {
        return n * p.ln();
    }
    let mu = n * p;
    let t = x - mu;
    -mu * phi_raw(t / mu) - (n - mu) * phi_raw(-t / (n - mu))
}

/// Symmetrized evaluation; bit-identical at `x` and `1 - x`, with limits at 0 and 1.
fn psi_raw(k: u32, r: f64, x: f64) -> f64 {
    let y = if x > 0.5 { 1.0 - x } else { x };
    let y = y.max(0.0);
    // probability that a random k-set is bichromatic under a y-biased coloring
    let bichromatic = -((k as f64) * (-y).ln_1p()).exp_m1() - y.powi(k as i32);
    let arg = -bichromatic / half_bichromatic(k);
    debug_assert!(arg > -1.0);
    entropy_raw(y) + r * arg.ln_1p()
}

/// `psi_{k,r}(x) = h(x) + r ln[1 - (1 - x^k - (1-x)^k) / (2^(k-1) - 1)]`.
pub fn psi(k: u32, r: f64, x: f64) -> Result<f64> {
    if k < 3 {
        return Err(LabError::param(format!("k must be at least 3, got {k}")));
    }
    if !(x > 0.0 && x < 1.0) {
        return Err(LabError::domain(format!("psi argument {x} outside (0, 1)")));
    }
    Ok(psi_raw(k, r, x))
}

fn psi_scan_points(lo: f64, hi: f64) -> Vec<f64> {
    let w = hi - lo;
    let mut xs: Vec<f64> = (1..PSI_GRID).map(|i| lo + w * i as f64 / PSI_GRID as f64).collect();
    let steps = PSI_EDGE_DECADES * PSI_EDGE_STEPS_PER_DECADE;
    for s in 0..steps {
        let off = w * 0.5 * 10f64.powf(-(s as f64) / PSI_EDGE_STEPS_PER_DECADE as f64);
        for x in [lo + off, hi - off] {
            if x > lo && x < hi {
                xs.push(x);
            }
        }
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

fn maximize_psi_raw(k: u32, r: f64, lo: f64, hi: f64) -> (f64, f64) {
    let xs = psi_scan_points(lo, hi);
    optim::scan_then_golden(|x| psi_raw(k, r, x), &xs, X_TOL)
}

/// Global maximizer of `psi` over `(lo, hi)`.
///
/// A uniform scan is complemented by log-spaced probes at both ends because
/// the competing maximum sits near `x = 2^-k`, far below the uniform spacing.
pub fn maximize_psi(k: u32, r: f64, lo: f64, hi: f64) -> Result<(f64, f64)> {
    if k < 3 {
        return Err(LabError::param(format!("k must be at least 3, got {k}")));
    }
    if !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err(LabError::param(format!("degenerate interval ({lo}, {hi})")));
    }
    Ok(maximize_psi_raw(k, r, lo, hi))
}

/// Threshold summary for one `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub k: u32,
    pub r_first_exact: f64,
    pub r_first_asymptotic: f64,
    pub r_second: f64,
    pub r_second_asymptotic: f64,
    pub r_cond: f64,
    pub r_crit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_crit_diagnostic: Option<String>,
    pub r_conjectured: f64,
}

/// Exact root of `first_moment_rate(k, .) = 0`.
pub fn r_first(k: u32) -> f64 {
    -LN_2 / (-pow2(1 - k as i32)).ln_1p()
}

pub fn r_cond(k: u32) -> f64 {
    pow2(k as i32 - 1) * LN_2 - LN_2
}

pub fn r_conjectured(k: u32) -> f64 {
    pow2(k as i32 - 1) * LN_2 - (LN_2 / 2.0 + 0.25)
}

fn half_is_global_max(k: u32, r: f64) -> bool {
    let a = pow2(-(k as i32)).sqrt();
    let (x_all, _) = maximize_psi_raw(k, r, 0.0, 1.0);
    let (x_mid, _) = maximize_psi_raw(k, r, a, 1.0 - a);
    (x_all - 0.5).abs() <= 1e-6 && (x_mid - 0.5).abs() <= 1e-6
}

/// Largest density at which `x = 1/2` is the global maximizer of `psi`.
pub fn r_second(k: u32) -> f64 {
    let (mut lo, mut hi) = (0.0, r_first(k));
    if half_is_global_max(k, hi) {
        return hi;
    }
    while hi - lo > R_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if half_is_global_max(k, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn r_crit_search(k: u32) -> std::result::Result<f64, String> {
    let c = r_cond(k);
    let q = critical_fraction(k);
    let f = |r: f64| local_cluster_rate(k, q * r) - first_moment_rate(k, r) - 16f64.powi(-(k as i32));
    let (a, b) = (c - 2.0, c + 2.0);
    optim::bisect(f, a, b, R_TOL).ok_or_else(|| {
        format!(
            "no sign change on [{a}, {b}]: residuals {:.6e} and {:.6e}",
            f(a),
            f(b)
        )
    })
}

pub fn thresholds(k: u32) -> Result<ThresholdReport> {
    if k < 3 {
        return Err(LabError::param(format!("k must be at least 3, got {k}")));
    }
    let top = pow2(k as i32 - 1) * LN_2;
    let (r_crit, r_crit_diagnostic) = match r_crit_search(k) {
        Ok(r) => (Some(r), None),
        Err(d) => (None, Some(d)),
    };
    Ok(ThresholdReport {
        k,
        r_first_exact: r_first(k),
        r_first_asymptotic: top - LN_2 / 2.0,
        r_second: r_second(k),
        r_second_asymptotic: top - (1.0 + LN_2) / 2.0,
        r_cond: r_cond(k),
        r_crit,
        r_crit_diagnostic,
        r_conjectured: r_conjectured(k),
    })
}

/// Transition probabilities of a single edge between a coloring and a
/// reference at relative distance `alpha`.
///
/// `u1`/`v1`: a reference-critical edge becomes critical / monochromatic.
/// `u2`/`v2`: a reference-bichromatic non-critical edge becomes critical /
/// monochromatic. The second class is empty for `k = 3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapParams {
    pub u1: f64,
    pub v1: f64,
    pub u2: f64,
    pub v2: f64,
    pub noncritical_class_empty: bool,
    /// The printed closed form for `v2`, kept for comparison.
    pub v2_closed_form: f64,
    /// `v2_closed_form - v2`.
    pub v2_discrepancy: f64,
}

impl OverlapParams {
    pub fn q1(&self) -> f64 {
        self.u1 / (1.0 - self.v1)
    }

    pub fn q2(&self) -> f64 {
        if self.noncritical_class_empty {
            0.0
        } else {
            self.u2 / (1.0 - self.v2)
        }
    }
}

pub fn overlap_params(k: u32, alpha: f64) -> Result<OverlapParams> {
    if k < 3 {
        return Err(LabError::param(format!("k must be at least 3, got {k}")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(LabError::domain(format!("alpha = {alpha} outside [0, 1]")));
    }
    let ki = k as i32;
    let kf = k as f64;
    let a = alpha;
    let b = 1.0 - alpha;
    let u1 = b.powi(ki)
        + a.powi(ki)
        + (kf - 1.0) * a * a * b.powi(ki - 2)
        + (kf - 1.0) * a.powi(ki - 2) * b * b;
    let v1 = a * b.powi(ki - 1) + b * a.powi(ki - 1);

    let classes = pow2(ki) - 2.0 * kf - 2.0;
    let (mut u2, mut v2) = (0.0, 0.0);
    let mut binom = kf * (kf - 1.0) / 2.0;
    for l in 2..=(ki - 2) {
        let lf = l as f64;
        let rest = kf - lf;
        v2 += binom * (a.powi(l) * b.powi(ki - l) + b.powi(l) * a.powi(ki - l));
        u2 += binom
            * (lf * a.powi(l - 1) * b.powi(ki - l + 1)
                + lf * b.powi(l - 1) * a.powi(ki - l + 1)
                + rest * b.powi(l + 1) * a.powi(ki - l - 1)
                + rest * a.powi(l + 1) * b.powi(ki - l - 1));
        binom = binom * rest / (lf + 1.0);
    }
    let empty = classes <= 0.0;
    if !empty {
        u2 /= classes;
        v2 /= classes;
    }
    let v2_closed_form = if empty {
        0.0
    } else {
        (1.0 - 2.0
            * (a.powi(ki)
                + b.powi(ki)
                + 2.0 * kf * a * b.powi(ki - 1)
                + 2.0 * kf * a.powi(ki - 1) * b))
            / classes
    };
    Ok(OverlapParams {
        u1,
        v1,
        u2,
        v2,
        noncritical_class_empty: empty,
        v2_closed_form,
        v2_discrepancy: v2_closed_form - v2,
    })
}

/// Scan resolution of the split fraction in [`pair_rate`].
const SPLIT_GRID: usize = 1000;

/// Exponential rate `g(alpha)` of the expected number of `(1+beta)`-critical
/// colorings at relative distance `alpha` in the critical-planted model.
pub fn pair_rate(k: u32, r: f64, beta: f64, alpha: f64) -> Result<f64> {
    let p = Params::new(k, r, beta)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(LabError::domain(format!("alpha = {alpha} outside (0, 1)")));
    }
    let mu1 = p.lambda;
    if !(mu1 > 0.0 && mu1 < r) {
        return Err(LabError::param(format!(
            "critical density {mu1} must lie in (0, r = {r})"
        )));
    }
    let mu2 = r - mu1;
    let op = overlap_params(k, alpha)?;
    let (q1, q2) = (op.q1(), op.q2());
    if !(0.0..=1.0).contains(&q1) || !(0.0..=1.0).contains(&q2) {
        return Err(LabError::domain(format!(
            "conditional probabilities out of range: q1 = {q1}, q2 = {q2}"
        )));
    }
    // the two portions must together contribute exactly mu1 critical edges
    let s_lo = (1.0 - mu2 / mu1).max(0.0);
    let split = |s: f64| binomial_rate_closed(mu1, q1, s * mu1) + binomial_rate_closed(mu2, q2, (1.0 - s) * mu1);
    let grid: Vec<f64> = (0..=SPLIT_GRID)
        .map(|i| s_lo + (1.0 - s_lo) * i as f64 / SPLIT_GRID as f64)
        .collect();
    let (_, rate) = optim::scan_then_golden(split, &grid, 1e-13);
    let v2_term = if mu2 > 0.0 { mu2 * (-op.v2).ln_1p() } else { 0.0 };
    Ok(entropy_raw(alpha) + mu1 * (-op.v1).ln_1p() + v2_term + rate)
}

/// `Xi(lambda) = e^-lambda [1 - C(k,2) e^-lambda ln 2] ln 2 - 7^-k`.
pub fn local_cluster_rate(k: u32, lambda: f64) -> f64 {
    cluster_upper_rate(k, lambda) - 7f64.powi(-(k as i32))
}

/// Per-vertex entropy upper bound of the planted cluster at support density `lambda`.
pub fn cluster_upper_rate(k: u32, lambda: f64) -> f64 {
    let e = (-lambda).exp();
    let pairs = (k as f64) * (k as f64 - 1.0) / 2.0;
    e * (1.0 - pairs * e * LN_2) * LN_2
}

/// Predicted `|U|/n = e^-lambda + lambda (k-1) e^-2lambda`.
pub fn whitening_size_prediction(k: u32, lambda: f64) -> f64 {
    let e = (-lambda).exp();
    e + lambda * (k as f64 - 1.0) * e * e
}

/// `Pr[Po(lambda) = l]`.
pub fn poisson_pmf(lambda: f64, l: u32) -> f64 {
    if lambda == 0.0 {
        return if l == 0 { 1.0 } else { 0.0 };
    }
    let mut ln = l as f64 * lambda.ln() - lambda;
    for i in 2..=l {
        ln -= (i as f64).ln();
    }
    ln.exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceSum {
    /// `ln sum_{d=1}^{n-1} exp(n rate(d/n))`.
    pub sum_log: f64,
    /// Sum divided by its largest term.
    pub ratio: f64,
}

/// Log of `sum_{d=1}^{n-1} exp(n * rate(d/n))` and its ratio to the largest term.
pub fn laplace_sum<F>(rate: F, n: u64) -> Result<LaplaceSum>
where
    F: Fn(f64) -> Result<f64>,
{
    if n < 10 {
        return Err(LabError::param(format!("n must be at least 10, got {n}")));
    }
    let nf = n as f64;
    let terms = (1..n)
        .map(|d| rate(d as f64 / nf).map(|v| nf * v))
        .collect::<Result<Vec<f64>>>()?;
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum_log = log_sum_exp(&terms);
    Ok(LaplaceSum {
        sum_log,
        ratio: (sum_log - max).exp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn entropy_and_phi_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), LN_2);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        let h = -0.25 * 0.25f64.ln() - 0.75 * 0.75f64.ln();
        assert!(close(binary_entropy(0.25).unwrap(), h, 1e-15));
        assert!(binary_entropy(1.5).is_err());
        assert_eq!(chernoff_phi(0.0).unwrap(), 0.0);
        assert!(close(chernoff_phi(1.0).unwrap(), 2.0 * LN_2 - 1.0, 1e-15));
        assert!(close(chernoff_phi(-0.5).unwrap(), 0.5 * 0.5f64.ln() + 0.5, 1e-15));
        assert!(chernoff_phi(-1.0).is_err());
    }

    #[test]
    fn first_moment_values() {
        assert_eq!(first_moment_rate(3, 0.0), LN_2);
        // high-precision reference values
        assert!(close(first_moment_rate(3, 3.0 * LN_2), 0.094_929_128_307_163_72, 1e-15));
        let direct = LN_2 + 3.0 * LN_2 * 0.75f64.ln();
        assert!(close(first_moment_rate(3, 3.0 * LN_2), direct, 1e-15));
        let fm = first_moment_rate(10, r_cond(10));
        assert!(close(fm, 6.773_426_654_920_309e-4, 1e-15), "{fm}");
        // leading-order form ln2 / 2^k with an O(4^-k) correction
        assert!((fm - LN_2 / 1024.0).abs() < 4.0 * 4f64.powi(-10));
    }

    fn brute_first_moment(n: usize, m: usize, k: usize) -> f64 {
        let mut edges = Vec::new();
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize == k {
                edges.push(mask);
            }
        }
        // enumerate all m-subsets of edges
        fn rec(edges: &[u32], start: usize, m: usize, chosen: &mut Vec<u32>, n: usize, acc: &mut (f64, f64)) {
            if chosen.len() == m {
                let z = (0u32..(1 << n))
                    .filter(|&c| chosen.iter().all(|&e| c & e != 0 && c & e != e))
                    .count();
                acc.0 += z as f64;
                acc.1 += 1.0;
                return;
            }
            for i in start..edges.len() {
                chosen.push(edges[i]);
                rec(edges, i + 1, m, chosen, n, acc);
                chosen.pop();
            }
        }
        let mut acc = (0.0, 0.0);
        rec(&edges, 0, m, &mut Vec::new(), n, &mut acc);
        acc.0 / acc.1
    }

    #[test]
    fn exact_first_moment_against_enumeration() {
        assert!(close(exact_first_moment(4, 2, 3).unwrap(), 10.0, 1e-12));
        assert!(close(exact_first_moment(5, 0, 3).unwrap(), 32.0, 1e-12));
        for &(n, m, k) in &[(6usize, 1usize, 3usize), (6, 2, 3), (5, 3, 3), (6, 2, 4), (7, 2, 3)] {
            let want = brute_first_moment(n, m, k);
            let got = exact_first_moment(n as u64, m as u64, k as u32).unwrap();
            assert!(close(got, want, 1e-10 * want), "n={n} m={m} k={k}: {got} vs {want}");
        }
        assert!(exact_first_moment(4, 5, 3).is_err());
        assert!(exact_first_moment(2, 0, 3).is_err());
    }

    #[test]
    fn psi_direct_evaluation() {
        let want = binary_entropy(0.25).unwrap()
            + 2.0 * (1.0 - (1.0 - 0.25f64.powi(3) - 0.75f64.powi(3)) / 3.0).ln();
        assert!(close(psi(3, 2.0, 0.25).unwrap(), want, 1e-14));
        assert!(close(psi(7, 40.0, 0.3).unwrap(), psi(7, 40.0, 0.7).unwrap(), 1e-12));
        assert!(psi(3, 1.0, 0.0).is_err());
    }

    #[test]
    fn maximize_psi_below_second_moment_threshold() {
        let k = 7;
        let r = r_second(k) - 0.5;
        let a = 2f64.powf(-3.5);
        let (x, _) = maximize_psi(k, r, a, 1.0 - a).unwrap();
        assert!(close(x, 0.5, 1e-6), "{x}");
        assert!(maximize_psi(k, r, 0.4, 0.4).is_err());
    }

    #[test]
    fn maximize_psi_at_condensation_k20() {
        let k = 20;
        let r = r_cond(k);
        let half = psi(k, r, 0.5).unwrap();
        let a = 2f64.powi(-10);
        let (_, near_zero) = maximize_psi(k, r, 0.0, a).unwrap();
        assert!(near_zero > half, "{near_zero} vs {half}");
        let (_, middle) = maximize_psi(k, r, a, 0.5 - a).unwrap();
        assert!(middle < -half, "{middle} vs {half}");
    }

    #[test]
    fn threshold_formulas() {
        assert!(close(r_cond(10), 511.0 * LN_2, 1e-12));
        assert!(close(r_cond(10), 354.198, 1e-3));
        assert!(first_moment_rate(12, r_first(12)).abs() < 1e-12);
        assert!(close(r_conjectured(10), 512.0 * LN_2 - LN_2 / 2.0 - 0.25, 1e-12));
    }

    #[test]
    fn overlap_at_half_k5() {
        let op = overlap_params(5, 0.5).unwrap();
        assert!(close(op.u1, 0.3125, 1e-15));
        assert!(close(op.v1, 0.0625, 1e-15));
        assert!(close(op.q1(), 1.0 / 3.0, 1e-15));
        // the printed closed form disagrees with the summation
        assert!(op.v2_closed_form < 0.0);
        assert!(op.v2_discrepancy.abs() > 1e-3);
    }

    #[test]
    fn overlap_at_zero_and_empty_class() {
        let op = overlap_params(7, 0.0).unwrap();
        assert_eq!((op.u1, op.v1, op.u2, op.v2), (1.0, 0.0, 0.0, 0.0));
        let op3 = overlap_params(3, 0.3).unwrap();
        assert!(op3.noncritical_class_empty);
        assert_eq!((op3.u2, op3.v2), (0.0, 0.0));
        assert!(!overlap_params(4, 0.3).unwrap().noncritical_class_empty);
    }

    #[test]
    fn pair_rate_reduces_at_half() {
        for &(k, r) in &[(5u32, 5.0), (7, 30.0), (10, 300.0)] {
            let g = pair_rate(k, r, 0.0, 0.5).unwrap();
            assert!(close(g, first_moment_rate(k, r), 1e-9), "k={k}: {g}");
        }
        assert!(pair_rate(7, 30.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn binomial_rate_against_log_pmf() {
        // ln pmf via lgamma-free summation
        fn ln_pmf(n: u64, p: f64, x: u64) -> f64 {
            let mut ln_c = 0.0;
            for i in 0..x {
                ln_c += ((n - i) as f64 / (i + 1) as f64).ln();
            }
            ln_c + x as f64 * p.ln() + (n - x) as f64 * (1.0 - p).ln()
        }
        assert_eq!(binomial_point_rate(100.0, 0.5, 0.0).unwrap(), 0.0);
        for t in [50.0, -50.0] {
            let x = (300.0 + t) as u64;
            let exact = ln_pmf(1000, 0.3, x);
            let rate = binomial_point_rate(1000.0, 0.3, t).unwrap();
            assert!((rate - exact).abs() <= 6.0);
            // with the Stirling prefactor the agreement is much tighter
            let a = x as f64 / 1000.0;
            let corrected = rate - 0.5 * (2.0 * std::f64::consts::PI * 1000.0 * a * (1.0 - a)).ln();
            assert!((corrected - exact).abs() < 1e-2, "{corrected} vs {exact}");
        }
        assert!(binomial_point_rate(10.0, 0.3, 8.0).is_err());
    }

    #[test]
    fn cluster_rate_values() {
        assert!(close(local_cluster_rate(10, 200.0), -7f64.powi(-10), 1e-20));
        let xi = local_cluster_rate(10, 10.0 * LN_2);
        let want = 2f64.powi(-10) * (1.0 - 45.0 * 2f64.powi(-10) * LN_2) * LN_2 - 7f64.powi(-10);
        assert!(close(xi, want, 1e-18));
        assert!(close(xi, 6.562_791_968_997_776e-4, 1e-15));
        let fm = first_moment_rate(10, r_cond(10));
        assert!((xi - fm).abs() <= 0.1 * fm);
    }

    #[test]
    fn poisson_pmf_sums_to_one() {
        let s: f64 = (0..60).map(|l| poisson_pmf(6.93, l)).sum();
        assert!(close(s, 1.0, 1e-12));
        assert!(close(poisson_pmf(2.0, 3), 8.0 / 6.0 * (-2.0f64).exp(), 1e-15));
    }

    #[test]
    fn laplace_trivial_rate() {
        let s = laplace_sum(|_| Ok(0.0), 100).unwrap();
        assert!(close(s.sum_log, 99f64.ln(), 1e-12));
        assert!(close(s.ratio, 99.0, 1e-9));
        assert!(laplace_sum(|_| Ok(0.0), 5).is_err());
        let failing = laplace_sum(|x| psi(3, 1.0, x - 1.0), 20);
        assert!(failing.is_err());
    }
}
