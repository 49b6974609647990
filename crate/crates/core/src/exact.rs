//! Exhaustive computations on small instances.
//!
//! Two engines are used. A Gray-code sweep visits all `2^(n-1)` colorings with
//! vertex 0 fixed to color 0 and keeps per-edge one-counts up to date, so each
//! step costs the degree of the flipped vertex. A depth-first counter prunes on
//! closed edges and is used when only proper colorings matter.

use crate::analytic::critical_fraction;
use crate::error::{LabError, Result};
use crate::model::{sample_uniform, trial_rng, Coloring, Hypergraph};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest vertex count accepted by the exhaustive routines.
pub const ENUMERATION_CAP: usize = 30;

const CHUNK_MIN_LOG2: u32 = 14;

pub(crate) fn check_cap(n: usize) -> Result<()> {
    if n > ENUMERATION_CAP {
        return Err(LabError::CapExceeded {
            n,
            cap: ENUMERATION_CAP,
        });
    }
    Ok(())
}

/// Vertex masks of the edges.
pub fn edge_masks(h: &Hypergraph) -> Vec<u64> {
    h.edges()
        .map(|e| e.iter().fold(0u64, |m, &v| m | (1u64 << v)))
        .collect()
}

struct Sweep {
    n: usize,
    k: u8,
    masks: Vec<u64>,
    incident: Vec<Vec<u32>>,
}

impl Sweep {
    fn new(h: &Hypergraph) -> Result<Self> {
        check_cap(h.n())?;
        let mut incident = vec![Vec::new(); h.n()];
        for (i, e) in h.edges().enumerate() {
            for &v in e {
                incident[v as usize].push(i as u32);
            }
        }
        Ok(Sweep {
            n: h.n(),
            k: h.k() as u8,
            masks: edge_masks(h),
            incident,
        })
    }

    fn mono(&self, c: u8) -> bool {
        c == 0 || c == self.k
    }

    fn crit(&self, c: u8) -> bool {
        c == 1 || c + 1 == self.k
    }

    /// Visit the colorings with Gray indices in `lo..hi`; the callback receives
    /// `(mask, monochromatic count, critical count)`.
    fn run<F: FnMut(u64, u32, u32)>(&self, lo: u64, hi: u64, f: &mut F) {
        let gray = |g: u64| (g ^ (g >> 1)) << 1;
        let mut mask = gray(lo);
        let mut cnt: Vec<u8> = self.masks.iter().map(|&em| (mask & em).count_ones() as u8).collect();
        let mut w = cnt.iter().filter(|&&c| self.mono(c)).count() as i64;
        let mut cr = cnt.iter().filter(|&&c| self.crit(c)).count() as i64;
        f(mask, w as u32, cr as u32);
        for g in lo + 1..hi {
            let v = g.trailing_zeros() as usize + 1;
            let was_one = (mask >> v) & 1 == 1;
            mask ^= 1 << v;
            for &e in &self.incident[v] {
                let e = e as usize;
                let old = cnt[e];
                let new = if was_one { old - 1 } else { old + 1 };
                cnt[e] = new;
                w += self.mono(new) as i64 - self.mono(old) as i64;
                cr += self.crit(new) as i64 - self.crit(old) as i64;
            }
            f(mask, w as u32, cr as u32);
        }
    }

    /// Parallel fold over all colorings with vertex 0 colored 0.
    fn fold<A, I, S, M>(&self, init: I, step: S, merge: M) -> A
    where
        A: Send,
        I: Fn() -> A + Sync + Send,
        S: Fn(&mut A, u64, u32, u32) + Sync + Send,
        M: Fn(A, A) -> A + Sync + Send,
    {
        let total = 1u64 << (self.n - 1);
        let log2 = (self.n - 1) as u32;
        let chunks = if log2 > CHUNK_MIN_LOG2 { 1u64 << (log2 - CHUNK_MIN_LOG2).min(8) } else { 1 };
        let size = total / chunks;
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = init();
                self.run(c * size, (c + 1) * size, &mut |m, w, cr| step(&mut acc, m, w, cr));
                acc
            })
            .reduce(&init, merge)
    }
}

fn neumaier_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Counts of colorings by number of monochromatic edges, with derived totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionCensus {
    pub n: usize,
    /// Number of proper 2-colorings.
    pub z: u64,
    /// Number of equitable proper 2-colorings.
    pub z_equitable: u64,
    /// `s_mu[mu]` colorings with exactly `mu` monochromatic edges.
    pub s_mu: Vec<u64>,
    /// `(b, Z_b)` pairs.
    pub z_b: Vec<(f64, f64)>,
}

impl SolutionCensus {
    /// `Z_b = sum_mu S_mu exp(-b mu)`.
    pub fn partition_function(&self, b: f64) -> f64 {
        partition_from_histogram(&self.s_mu, b)
    }
}

fn partition_from_histogram(s_mu: &[u64], b: f64) -> f64 {
    neumaier_sum(
        s_mu.iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(mu, &c)| c as f64 * (-b * mu as f64).exp()),
    )
}

pub fn solution_census(h: &Hypergraph, b_list: &[f64]) -> Result<SolutionCensus> {
    let sw = Sweep::new(h)?;
    let m = h.m();
    let half = h.n() / 2;
    let even = h.n() % 2 == 0;
    let (mut hist, ze) = sw.fold(
        || (vec![0u64; m + 1], 0u64),
        |acc, mask, w, _| {
            acc.0[w as usize] += 1;
            if w == 0 && even && mask.count_ones() as usize == half {
                acc.1 += 1;
            }
        },
        |mut a, b| {
            for (x, y) in a.0.iter_mut().zip(&b.0) {
                *x += y;
            }
            (a.0, a.1 + b.1)
        },
    );
    // complementing preserves the monochromatic count
    for c in hist.iter_mut() {
        *c *= 2;
    }
    let z_b = b_list
        .iter()
        .map(|&b| (b, partition_from_histogram(&hist, b)))
        .collect();
    Ok(SolutionCensus {
        n: h.n(),
        z: hist[0],
        z_equitable: 2 * ze,
        s_mu: hist,
        z_b,
    })
}

/// Number of proper colorings at each Hamming distance from a reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceProfile {
    pub reference: String,
    pub reference_proper: bool,
    pub equitable_only: bool,
    /// `counts[d]` for `d = 0..=n`.
    pub counts: Vec<u64>,
}

impl DistanceProfile {
    pub fn n(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `|C_alpha(sigma)|`: proper colorings within distance `alpha n`.
    pub fn local_cluster_size(&self, alpha: f64) -> u64 {
        let lim = alpha * self.n() as f64;
        self.counts
            .iter()
            .enumerate()
            .filter(|(d, _)| *d as f64 <= lim)
            .map(|(_, &c)| c)
            .sum()
    }

    /// True when no proper coloring lies at distance strictly between
    /// `alpha n` and `beta n`.
    pub fn window_empty(&self, alpha: f64, beta: f64) -> bool {
        let n = self.n() as f64;
        self.counts
            .iter()
            .enumerate()
            .all(|(d, &c)| c == 0 || !(d as f64 > alpha * n && (d as f64) < beta * n))
    }
}

pub fn distance_profile(h: &Hypergraph, sigma: &Coloring, equitable_only: bool) -> Result<DistanceProfile> {
    let sw = Sweep::new(h)?;
    let n = h.n();
    if sigma.len() != n {
        return Err(LabError::param("coloring length differs from vertex count"));
    }
    let s = sigma.mask().expect("n within cap");
    let half = n / 2;
    let counts = sw.fold(
        || vec![0u64; n + 1],
        |acc, mask, w, _| {
            if w != 0 {
                return;
            }
            if equitable_only && (n % 2 != 0 || mask.count_ones() as usize != half) {
                return;
            }
            let d = (mask ^ s).count_ones() as usize;
            acc[d] += 1;
            // the complement sits at distance n - d
            acc[n - d] += 1;
        },
        |mut a, b| {
            for (x, y) in a.iter_mut().zip(&b) {
                *x += y;
            }
            a
        },
    );
    let proper = crate::model::violations(h, sigma)? == 0;
    Ok(DistanceProfile {
        reference: sigma.to_string(),
        reference_proper: proper,
        equitable_only,
        counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Shattered,
    Condensed,
    /// Window empty and the cluster share equals the threshold exactly.
    Tie,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub reference: String,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub z: u64,
    pub distance_profile: Vec<u64>,
    pub local_cluster_size: u64,
    pub gap_found: bool,
    pub verdict: Verdict,
}

/// Classify the solution geometry around the profile's reference coloring.
pub fn geometry_verdict(profile: &DistanceProfile, alpha: f64, beta: f64, gamma: f64) -> Result<ClusterReport> {
    if !(0.0 < alpha && alpha < beta && beta <= 0.5) {
        return Err(LabError::param(format!(
            "need 0 < alpha < beta <= 1/2, got alpha={alpha}, beta={beta}"
        )));
    }
    if !(gamma >= 0.0) {
        return Err(LabError::param(format!("gamma must be non-negative, got {gamma}")));
    }
    let n = profile.n() as f64;
    let z = profile.total();
    let local = profile.local_cluster_size(alpha);
    let gap = profile.window_empty(alpha, beta);
    let threshold = (-gamma * n).exp() * z as f64;
    let c = local as f64;
    let tie = (c - threshold).abs() <= 1e-12 * threshold.max(1.0);
    let verdict = if !gap || z == 0 {
        Verdict::Neither
    } else if tie {
        Verdict::Tie
    } else if c < threshold {
        Verdict::Shattered
    } else {
        Verdict::Condensed
    };
    Ok(ClusterReport {
        reference: profile.reference.clone(),
        alpha,
        beta,
        gamma,
        z,
        distance_profile: profile.counts.clone(),
        local_cluster_size: local,
        gap_found: gap,
        verdict,
    })
}

/// Critical-edge target `round((1 + beta) k m / (2^(k-1) - 1))`, ties upward.
pub fn critical_target(k: usize, m: usize, beta: f64) -> u64 {
    let x = (1.0 + beta) * critical_fraction(k as u32) * m as f64;
    (x + 0.5).floor().max(0.0) as u64
}

/// Equitable proper colorings with exactly `target` critical edges.
pub fn count_critical_colorings_at(h: &Hypergraph, target: u64) -> Result<u64> {
    if h.n() % 2 != 0 {
        return Err(LabError::param(format!("equitable colorings need even n, got {}", h.n())));
    }
    let sw = Sweep::new(h)?;
    let half = h.n() / 2;
    let count = sw.fold(
        || 0u64,
        |acc, mask, w, cr| {
            if w == 0 && cr as u64 == target && mask.count_ones() as usize == half {
                *acc += 1;
            }
        },
        |a, b| a + b,
    );
    Ok(2 * count)
}

pub fn count_critical_colorings(h: &Hypergraph, beta: f64) -> Result<u64> {
    if h.k() < 3 {
        return Err(LabError::param("critical colorings need k >= 3"));
    }
    count_critical_colorings_at(h, critical_target(h.k(), h.m(), beta))
}

/// Calls `f(mask)` for every coloring with no monochromatic edge (both halves).
pub fn for_each_proper<F: FnMut(u64)>(h: &Hypergraph, mut f: F) -> Result<()> {
    let sw = Sweep::new(h)?;
    let full = if h.n() == 64 { u64::MAX } else { (1u64 << h.n()) - 1 };
    sw.run(0, 1u64 << (h.n() - 1), &mut |mask, w, _| {
        if w == 0 {
            f(mask);
            f(mask ^ full);
        }
    });
    Ok(())
}

/// Kinds of clause accepted by [`Csp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    NotAllEqual,
    NotAllZero,
    NotAllOne,
}

impl Constraint {
    fn holds(self, x: u64, em: u64) -> bool {
        match self {
            Constraint::NotAllEqual => x != 0 && x != em,
            Constraint::NotAllZero => x != 0,
            Constraint::NotAllOne => x != em,
        }
    }
}

/// Boolean constraint system over `n` variables, counted by depth-first search
/// with clause checks at the position of each clause's last variable.
pub struct Csp {
    /// Position to variable.
    order: Vec<u32>,
    /// Per position, clauses (mask over positions) closing there.
    closing: Vec<Vec<(u64, Constraint)>>,
    free: u32,
    symmetric: bool,
}

impl Csp {
    /// `clauses` hold variable lists in `0..n`; an empty list is unsatisfiable.
    pub fn new(n: usize, clauses: &[(Vec<u32>, Constraint)]) -> Result<Self> {
        check_cap(n)?;
        let symmetric = clauses.iter().all(|(_, c)| *c == Constraint::NotAllEqual);
        let mut deg = vec![0usize; n];
        let mut inc: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, (vars, _)) in clauses.iter().enumerate() {
            for &v in vars {
                deg[v as usize] += 1;
                inc[v as usize].push(i);
            }
        }
        let mut placed = vec![false; n];
        let mut remaining: Vec<usize> = clauses.iter().map(|(v, _)| v.len()).collect();
        let mut touched = vec![0usize; n];
        let active: Vec<usize> = (0..n).filter(|&v| deg[v] > 0).collect();
        let mut order = Vec::with_capacity(active.len());
        for _ in 0..active.len() {
            // close as many clauses as possible, then stay connected, then high degree
            let best = active
                .iter()
                .copied()
                .filter(|&v| !placed[v])
                .max_by_key(|&v| {
                    let closes = inc[v].iter().filter(|&&c| remaining[c] == 1).count();
                    (closes, touched[v], deg[v], std::cmp::Reverse(v))
                })
                .unwrap();
            placed[best] = true;
            order.push(best as u32);
            for &c in &inc[best] {
                remaining[c] -= 1;
                for &u in &clauses[c].0 {
                    touched[u as usize] += 1;
                }
            }
        }
        let mut pos = vec![usize::MAX; n];
        for (i, &v) in order.iter().enumerate() {
            pos[v as usize] = i;
        }
        let mut closing = vec![Vec::new(); order.len().max(1)];
        let mut infeasible = false;
        for (vars, c) in clauses {
            if vars.is_empty() {
                infeasible = true;
                continue;
            }
            let m = vars.iter().fold(0u64, |m, &v| m | (1u64 << pos[v as usize]));
            let last = vars.iter().map(|&v| pos[v as usize]).max().unwrap();
            closing[last].push((m, *c));
        }
        if infeasible {
            // a clause over no variables can never hold
            closing[0].push((0, Constraint::NotAllZero));
        }
        Ok(Csp {
            free: (n - active.len()) as u32,
            order,
            closing,
            symmetric,
        })
    }

    fn ok(&self, p: usize, bits: u64) -> bool {
        self.closing[p].iter().all(|&(em, c)| c.holds(bits & em, em))
    }

    fn count_from(&self, p: usize, bits: u64) -> u64 {
        if p == self.order.len() {
            return 1;
        }
        let mut total = 0;
        for c in 0..2u64 {
            let b = bits | (c << p);
            if self.ok(p, b) {
                total += self.count_from(p + 1, b);
            }
        }
        total
    }

    /// Number of satisfying assignments.
    pub fn count(&self) -> u64 {
        let free = 1u64 << self.free;
        if self.order.is_empty() {
            return if self.ok(0, 0) { free } else { 0 };
        }
        if self.symmetric {
            // complementing preserves not-all-equal clauses
            let sub = if self.ok(0, 0) { self.count_from(1, 0) } else { 0 };
            2 * sub * free
        } else {
            self.count_from(0, 0) * free
        }
    }
}

/// Depth-first proper-coloring counter for a fixed hypergraph.
pub struct Counter(Csp);

impl Counter {
    pub fn new(h: &Hypergraph) -> Result<Self> {
        let clauses: Vec<(Vec<u32>, Constraint)> =
            h.edges().map(|e| (e.to_vec(), Constraint::NotAllEqual)).collect();
        Ok(Counter(Csp::new(h.n(), &clauses)?))
    }

    /// Number of proper 2-colorings.
    pub fn count(&self) -> u64 {
        self.0.count()
    }
}

/// Number of proper 2-colorings, via the depth-first counter.
pub fn count_solutions(h: &Hypergraph) -> Result<u64> {
    Ok(Counter::new(h)?.count())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub trials: usize,
    pub mean: f64,
    pub stderr: f64,
    /// Empirical mean of `Z^2`.
    pub mean_sq: f64,
}

/// Mean of `Z` and `Z^2` over i.i.d. samples of `H_k(n, m)`; trial `i` uses
/// the seed `hash64(seed, i)`.
pub fn mean_z_over_trials(n: usize, m: usize, k: usize, trials: usize, seed: u64) -> Result<MomentEstimate> {
    check_cap(n)?;
    if trials == 0 {
        return Err(LabError::param("trials must be at least 1"));
    }
    let zs = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let h = sample_uniform(n, m, k, &mut rng)?;
            count_solutions(&h)
        })
        .collect::<Result<Vec<u64>>>()?;
    Ok(moments(&zs))
}

pub(crate) fn moments(zs: &[u64]) -> MomentEstimate {
    let t = zs.len() as f64;
    let mean = zs.iter().map(|&z| z as f64).sum::<f64>() / t;
    let mean_sq = zs.iter().map(|&z| (z as f64) * (z as f64)).sum::<f64>() / t;
    let var = if zs.len() > 1 {
        zs.iter().map(|&z| (z as f64 - mean).powi(2)).sum::<f64>() / (t - 1.0)
    } else {
        0.0
    };
    MomentEstimate {
        trials: zs.len(),
        mean,
        stderr: (var / t).sqrt(),
        mean_sq,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(n: usize, k: usize, e: &[&[u32]]) -> Hypergraph {
        Hypergraph::new(n, k, e.iter().map(|x| x.to_vec()).collect()).unwrap()
    }

    #[test]
    fn census_fixtures() {
        let c = solution_census(&Hypergraph::empty(3, 3).unwrap(), &[0.0, 1.0, 7.0]).unwrap();
        assert_eq!(c.z, 8);
        assert!(c.z_b.iter().all(|&(_, z)| z == 8.0));
        let c = solution_census(&h(3, 3, &[&[0, 1, 2]]), &[1.0]).unwrap();
        assert_eq!(c.z, 6);
        assert_eq!(c.s_mu, vec![6, 2]);
        assert!((c.z_b[0].1 - (6.0 + 2.0 * (-1.0f64).exp())).abs() < 1e-14);
        let c = solution_census(&h(4, 3, &[&[0, 1, 2], &[0, 1, 3]]), &[]).unwrap();
        assert_eq!((c.z, c.z_equitable), (10, 6));
    }

    #[test]
    fn counter_matches_sweep() {
        let hh = h(6, 3, &[&[0, 1, 2], &[2, 3, 4], &[1, 4, 5], &[0, 3, 5]]);
        let c = solution_census(&hh, &[]).unwrap();
        assert_eq!(count_solutions(&hh).unwrap(), c.z);
        assert_eq!(count_solutions(&Hypergraph::empty(5, 3).unwrap()).unwrap(), 32);
    }

    #[test]
    fn profile_of_empty_graph_is_binomial() {
        let p = distance_profile(&Hypergraph::empty(4, 3).unwrap(), &Coloring::constant(4, 0), false).unwrap();
        assert_eq!(p.counts, vec![1, 4, 6, 4, 1]);
        let r = geometry_verdict(&p, 0.1, 0.5, 0.1).unwrap();
        assert_eq!(r.verdict, Verdict::Neither);
        assert!(geometry_verdict(&p, 0.3, 0.2, 0.1).is_err());
    }

    #[test]
    fn critical_counts_on_complete_k3_n4() {
        let all = h(4, 3, &[&[0, 1, 2], &[0, 1, 3], &[0, 2, 3], &[1, 2, 3]]);
        assert_eq!(critical_target(3, 4, 0.0), 4);
        assert_eq!(count_critical_colorings(&all, 0.0).unwrap(), 6);
        let empty = Hypergraph::empty(6, 3).unwrap();
        assert_eq!(count_critical_colorings_at(&empty, 0).unwrap(), 20);
        assert_eq!(count_critical_colorings_at(&empty, 1).unwrap(), 0);
    }

    #[test]
    fn target_rounds_half_up() {
        // k=3: 3m/3 = m, so (1+beta) m lands on .5 for m=1, beta=0.5
        assert_eq!(critical_target(3, 1, 0.5), 2);
        assert_eq!(critical_target(3, 1, 0.49), 1);
    }

    #[test]
    fn csp_with_one_sided_clauses() {
        // x0 != x1 as NAE, x1 must not be 0, x2 unconstrained
        let c = Csp::new(
            3,
            &[(vec![0, 1], Constraint::NotAllEqual), (vec![1], Constraint::NotAllZero)],
        )
        .unwrap();
        assert_eq!(c.count(), 2);
        let none = Csp::new(2, &[(vec![], Constraint::NotAllEqual)]).unwrap();
        assert_eq!(none.count(), 0);
        let all_free = Csp::new(2, &[]).unwrap();
        assert_eq!(all_free.count(), 4);
    }

    #[test]
    fn cap_is_enforced() {
        let big = Hypergraph::empty(31, 3).unwrap();
        assert!(matches!(solution_census(&big, &[]), Err(LabError::CapExceeded { .. })));
        assert!(count_solutions(&big).is_err());
    }

    #[test]
    fn trivial_moments() {
        let est = mean_z_over_trials(6, 0, 3, 5, 1).unwrap();
        assert_eq!(est.mean, 64.0);
        assert_eq!(est.stderr, 0.0);
        assert_eq!(est.mean_sq, 4096.0);
    }
}
