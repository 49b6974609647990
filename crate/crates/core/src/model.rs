//! Hypergraphs, colorings and the random-model samplers.

use crate::analytic::binom_f64;
use crate::error::{LabError, Result};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

/// Rejection samplers give up after this many draws per requested edge.
pub const DRAWS_PER_EDGE: u64 = 1_000_000;

/// Fixed 64-bit mix used to derive per-trial seeds from a master seed.
pub fn hash64(master: u64, i: u64) -> u64 {
    let mut z = master ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(i.wrapping_add(1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for trial `i` of a batch seeded by `master`.
pub fn trial_rng(master: u64, i: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(hash64(master, i))
}

/// A `k`-uniform hypergraph on vertices `0..n` with distinct, sorted edges.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Hypergraph {
    n: usize,
    k: usize,
    // row-major, stride k; rows sorted lexicographically
    flat: Vec<u32>,
}

impl Hypergraph {
    pub fn empty(n: usize, k: usize) -> Result<Self> {
        Self::from_flat(n, k, Vec::new())
    }

    pub fn new(n: usize, k: usize, edges: Vec<Vec<u32>>) -> Result<Self> {
        let mut flat = Vec::with_capacity(edges.len() * k);
        for (i, e) in edges.iter().enumerate() {
            if e.len() != k {
                return Err(LabError::param(format!("edge {i} has {} vertices, expected {k}", e.len())));
            }
            flat.extend_from_slice(e);
        }
        Self::from_flat(n, k, flat)
    }

    /// Validate and canonicalize a row-major edge buffer.
    pub fn from_flat(n: usize, k: usize, mut flat: Vec<u32>) -> Result<Self> {
        if k < 2 {
            return Err(LabError::param(format!("uniformity must be at least 2, got {k}")));
        }
        if k > n {
            return Err(LabError::param(format!("uniformity {k} exceeds vertex count {n}")));
        }
        if n > u32::MAX as usize {
            return Err(LabError::param("vertex count does not fit in 32 bits"));
        }
        if flat.len() % k != 0 {
            return Err(LabError::param("edge buffer length is not a multiple of k"));
        }
        for (i, e) in flat.chunks_exact_mut(k).enumerate() {
            e.sort_unstable();
            if e[k - 1] as usize >= n {
                return Err(LabError::param(format!("edge {i} has vertex {} >= n = {n}", e[k - 1])));
            }
            if e.windows(2).any(|w| w[0] == w[1]) {
                return Err(LabError::param(format!("edge {i} repeats a vertex")));
            }
        }
        let mut rows: Vec<&[u32]> = flat.chunks_exact(k).collect();
        rows.sort_unstable();
        if rows.windows(2).any(|w| w[0] == w[1]) {
            return Err(LabError::param("duplicate edge"));
        }
        let sorted: Vec<u32> = rows.concat();
        Ok(Hypergraph { n, k, flat: sorted })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of edges.
    pub fn m(&self) -> usize {
        self.flat.len() / self.k
    }

    pub fn edge(&self, i: usize) -> &[u32] {
        &self.flat[i * self.k..(i + 1) * self.k]
    }

    pub fn edges(&self) -> std::slice::ChunksExact<'_, u32> {
        self.flat.chunks_exact(self.k)
    }

    pub fn contains_edge(&self, e: &[u32]) -> bool {
        let mut key = e.to_vec();
        key.sort_unstable();
        let rows: Vec<&[u32]> = self.edges().collect();
        rows.binary_search(&key.as_slice()).is_ok()
    }

    /// Copy with one more edge; fails on a duplicate or malformed edge.
    pub fn with_edge(&self, e: &[u32]) -> Result<Self> {
        let mut flat = self.flat.clone();
        flat.extend_from_slice(e);
        Self::from_flat(self.n, self.k, flat)
    }

    /// Vertex-to-edge incidence in compressed form.
    pub fn incidence(&self) -> Incidence {
        let mut offsets = vec![0u32; self.n + 1];
        for &v in &self.flat {
            offsets[v as usize + 1] += 1;
        }
        for v in 0..self.n {
            offsets[v + 1] += offsets[v];
        }
        let mut fill = offsets.clone();
        let mut list = vec![0u32; self.flat.len()];
        for (i, e) in self.edges().enumerate() {
            for &v in e {
                list[fill[v as usize] as usize] = i as u32;
                fill[v as usize] += 1;
            }
        }
        Incidence { offsets, list }
    }

    pub fn degrees(&self) -> Vec<u32> {
        let mut d = vec![0u32; self.n];
        for &v in &self.flat {
            d[v as usize] += 1;
        }
        d
    }

    /// Serialize as `n k m` followed by one edge per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {} {}\n", self.n, self.k, self.m());
        for e in self.edges() {
            let line: Vec<String> = e.iter().map(|v| v.to_string()).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (hl, header) = lines.next().ok_or(LabError::Format {
            line: 1,
            msg: "missing header".into(),
        })?;
        let nums = parse_numbers(header, hl + 1)?;
        if nums.len() != 3 {
            return Err(LabError::Format {
                line: hl + 1,
                msg: "header must be `n k m`".into(),
            });
        }
        let (n, k, m) = (nums[0] as usize, nums[1] as usize, nums[2] as usize);
        let mut flat = Vec::with_capacity(m * k);
        let mut count = 0;
        for (ln, line) in lines {
            let e = parse_numbers(line, ln + 1)?;
            if e.len() != k {
                return Err(LabError::Format {
                    line: ln + 1,
                    msg: format!("expected {k} vertices, found {}", e.len()),
                });
            }
            flat.extend(e.iter().map(|&v| v as u32));
            count += 1;
        }
        if count != m {
            return Err(LabError::Format {
                line: hl + 1,
                msg: format!("header announces {m} edges, found {count}"),
            });
        }
        Self::from_flat(n, k, flat)
    }
}

fn parse_numbers(line: &str, ln: usize) -> Result<Vec<u64>> {
    line.split_whitespace()
        .map(|t| {
            t.parse::<u64>().map_err(|_| LabError::Format {
                line: ln,
                msg: format!("not a non-negative integer: {t:?}"),
            })
        })
        .collect()
}

impl fmt::Display for Hypergraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl FromStr for Hypergraph {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_text(s)
    }
}

/// Compressed vertex-to-edge lists.
#[derive(Debug, Clone)]
pub struct Incidence {
    offsets: Vec<u32>,
    list: Vec<u32>,
}

impl Incidence {
    pub fn edges_of(&self, v: usize) -> &[u32] {
        &self.list[self.offsets[v] as usize..self.offsets[v + 1] as usize]
    }
}

/// A 0/1 assignment to the vertices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coloring(Vec<u8>);

impl Coloring {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(i) = bits.iter().position(|&b| b > 1) {
            return Err(LabError::param(format!("color at position {i} is not 0 or 1")));
        }
        Ok(Coloring(bits))
    }

    pub fn constant(n: usize, color: u8) -> Self {
        Coloring(vec![color & 1; n])
    }

    /// First half colored 0, second half colored 1.
    pub fn canonical_equitable(n: usize) -> Result<Self> {
        if n % 2 != 0 {
            return Err(LabError::param(format!("equitable colorings need even n, got {n}")));
        }
        Ok(Coloring((0..n).map(|v| u8::from(v >= n / 2)).collect()))
    }

    /// Uniformly random equitable coloring.
    pub fn random_equitable<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        if n % 2 != 0 {
            return Err(LabError::param(format!("equitable colorings need even n, got {n}")));
        }
        let mut bits = vec![0u8; n];
        for v in index::sample(rng, n, n / 2) {
            bits[v] = 1;
        }
        Ok(Coloring(bits))
    }

    /// Bit `v` of `mask` is the color of vertex `v`.
    pub fn from_mask(mask: u64, n: usize) -> Self {
        Coloring((0..n).map(|v| ((mask >> v) & 1) as u8).collect())
    }

    pub fn mask(&self) -> Option<u64> {
        if self.0.len() > 64 {
            return None;
        }
        Some(self.0.iter().enumerate().fold(0u64, |m, (v, &b)| m | ((b as u64) << v)))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, v: usize) -> u8 {
        self.0[v]
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    pub fn is_equitable(&self) -> bool {
        self.0.len() % 2 == 0 && self.ones() * 2 == self.0.len()
    }

    pub fn complement(&self) -> Self {
        Coloring(self.0.iter().map(|&b| b ^ 1).collect())
    }

    /// Hamming distance.
    pub fn distance(&self, other: &Coloring) -> Result<usize> {
        if self.len() != other.len() {
            return Err(LabError::param("colorings have different lengths"));
        }
        Ok(self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count())
    }

    /// Vertices of color `c`, ascending.
    pub fn class(&self, c: u8) -> Vec<u32> {
        (0..self.0.len() as u32).filter(|&v| self.0[v as usize] == c).collect()
    }
}

impl fmt::Display for Coloring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Coloring {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(LabError::Format {
                    line: 1,
                    msg: format!("unexpected character {c:?} in coloring"),
                }),
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(Coloring(bits))
    }
}

fn check_sizes(h: &Hypergraph, sigma: &Coloring) -> Result<()> {
    if h.n() != sigma.len() {
        return Err(LabError::param(format!(
            "coloring has length {}, hypergraph has {} vertices",
            sigma.len(),
            h.n()
        )));
    }
    Ok(())
}

/// Label of one edge under a reference coloring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeClass {
    Monochromatic,
    /// Exactly one vertex has its color; that vertex supports the edge.
    Critical { support: u32 },
    OtherBichromatic,
}

pub fn edge_class(e: &[u32], sigma: &Coloring) -> EdgeClass {
    let ones = e.iter().filter(|&&v| sigma.get(v as usize) == 1).count();
    let k = e.len();
    if ones == 0 || ones == k {
        EdgeClass::Monochromatic
    } else if ones == 1 {
        let support = *e.iter().find(|&&v| sigma.get(v as usize) == 1).unwrap();
        EdgeClass::Critical { support }
    } else if ones == k - 1 {
        let support = *e.iter().find(|&&v| sigma.get(v as usize) == 0).unwrap();
        EdgeClass::Critical { support }
    } else {
        EdgeClass::OtherBichromatic
    }
}

/// Per-edge labels and per-vertex support degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeClassification {
    pub labels: Vec<EdgeClass>,
    /// `s(v)`: number of edges supported by `v`.
    pub support: Vec<u32>,
    pub critical: usize,
    pub monochromatic: usize,
    pub other_bichromatic: usize,
}

impl EdgeClassification {
    /// Histogram of support degrees, index `l` counts vertices with `s(v) = l`.
    pub fn support_histogram(&self) -> Vec<usize> {
        let max = self.support.iter().copied().max().unwrap_or(0) as usize;
        let mut hist = vec![0usize; max + 1];
        for &s in &self.support {
            hist[s as usize] += 1;
        }
        hist
    }
}

/// Classify every edge relative to `sigma`.
///
/// For `k = 2` both vertices of a bichromatic edge qualify as support; the
/// vertex colored 1 is reported.
pub fn classify_edges(h: &Hypergraph, sigma: &Coloring) -> Result<EdgeClassification> {
    check_sizes(h, sigma)?;
    let mut support = vec![0u32; h.n()];
    let mut labels = Vec::with_capacity(h.m());
    let (mut crit, mut mono, mut other) = (0, 0, 0);
    for e in h.edges() {
        let c = edge_class(e, sigma);
        match c {
            EdgeClass::Monochromatic => mono += 1,
            EdgeClass::Critical { support: v } => {
                crit += 1;
                support[v as usize] += 1;
            }
            EdgeClass::OtherBichromatic => other += 1,
        }
        labels.push(c);
    }
    Ok(EdgeClassification {
        labels,
        support,
        critical: crit,
        monochromatic: mono,
        other_bichromatic: other,
    })
}

/// Number of monochromatic edges `w(sigma)`.
pub fn violations(h: &Hypergraph, sigma: &Coloring) -> Result<usize> {
    check_sizes(h, sigma)?;
    Ok(h.edges()
        .filter(|e| matches!(edge_class(e, sigma), EdgeClass::Monochromatic))
        .count())
}

fn random_ksubset<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Vec<u32> {
    let mut e: Vec<u32> = index::sample(rng, n, k).into_iter().map(|v| v as u32).collect();
    e.sort_unstable();
    e
}

/// Collects distinct edges produced by `draw`, rejecting `None` and duplicates.
fn collect_distinct<R, F>(rng: &mut R, k: usize, m: usize, context: &'static str, mut draw: F) -> Result<Vec<u32>>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> Option<Vec<u32>>,
{
    let cap = DRAWS_PER_EDGE.saturating_mul(m as u64);
    let mut seen: HashSet<Box<[u32]>> = HashSet::with_capacity(m);
    let mut flat = Vec::with_capacity(m * k);
    let mut draws = 0u64;
    while seen.len() < m {
        if draws >= cap {
            return Err(LabError::DrawCap {
                cap,
                accepted: seen.len(),
                context,
            });
        }
        draws += 1;
        if let Some(e) = draw(rng) {
            if !seen.contains(e.as_slice()) {
                flat.extend_from_slice(&e);
                seen.insert(e.into_boxed_slice());
            }
        }
    }
    Ok(flat)
}

/// `m` distinct uniformly random `k`-subsets of `0..n`.
pub fn sample_uniform<R: Rng + ?Sized>(n: usize, m: usize, k: usize, rng: &mut R) -> Result<Hypergraph> {
    if k < 2 || k > n {
        return Err(LabError::param(format!("need 2 <= k <= n, got n={n}, k={k}")));
    }
    let total = binom_f64(n as u64, k as u64);
    if m as f64 > total {
        return Err(LabError::param(format!("m = {m} exceeds C({n},{k}) = {total}")));
    }
    let flat = collect_distinct(rng, k, m, "uniform", |rng| Some(random_ksubset(rng, n, k)))?;
    Hypergraph::from_flat(n, k, flat)
}

/// Sizes of the σ-pools: (bichromatic, critical).
pub fn pool_sizes(n: usize, k: usize, sigma: &Coloring) -> (f64, f64) {
    let n1 = sigma.ones() as u64;
    let n0 = n as u64 - n1;
    let kk = k as u64;
    let all = binom_f64(n as u64, kk);
    let bichromatic = all - binom_f64(n0, kk) - binom_f64(n1, kk);
    let critical = if k == 2 {
        bichromatic
    } else {
        n0 as f64 * binom_f64(n1, kk - 1) + n1 as f64 * binom_f64(n0, kk - 1)
    };
    (bichromatic, critical)
}

fn check_model(n: usize, k: usize, sigma: &Coloring) -> Result<()> {
    if k < 3 || k > n {
        return Err(LabError::param(format!("need 3 <= k <= n, got n={n}, k={k}")));
    }
    if sigma.len() != n {
        return Err(LabError::param(format!("coloring has length {}, expected {n}", sigma.len())));
    }
    Ok(())
}

fn is_bichromatic(e: &[u32], sigma: &Coloring) -> bool {
    let first = sigma.get(e[0] as usize);
    e.iter().any(|&v| sigma.get(v as usize) != first)
}

/// `m` distinct uniformly random edges that are bichromatic under `sigma`.
pub fn sample_planted<R: Rng + ?Sized>(n: usize, m: usize, k: usize, sigma: &Coloring, rng: &mut R) -> Result<Hypergraph> {
    check_model(n, k, sigma)?;
    let (bichromatic, _) = pool_sizes(n, k, sigma);
    if m as f64 > bichromatic {
        return Err(LabError::param(format!(
            "coloring admits {bichromatic} bichromatic edges, {m} requested"
        )));
    }
    let flat = collect_distinct(rng, k, m, "planted", |rng| {
        let e = random_ksubset(rng, n, k);
        is_bichromatic(&e, sigma).then_some(e)
    })?;
    Hypergraph::from_flat(n, k, flat)
}

/// `m1` distinct σ-critical edges plus `m2` distinct bichromatic non-critical edges.
pub fn sample_planted_critical<R: Rng + ?Sized>(
    n: usize,
    m1: usize,
    m2: usize,
    k: usize,
    sigma: &Coloring,
    rng: &mut R,
) -> Result<Hypergraph> {
    check_model(n, k, sigma)?;
    let (bichromatic, critical) = pool_sizes(n, k, sigma);
    if m1 as f64 > critical {
        return Err(LabError::param(format!("only {critical} critical edges exist, {m1} requested")));
    }
    if m2 as f64 > bichromatic - critical {
        return Err(LabError::param(format!(
            "only {} non-critical bichromatic edges exist, {m2} requested",
            bichromatic - critical
        )));
    }
    let classes = [sigma.class(0), sigma.class(1)];
    // weight of "support vertex has color c"
    let w = [
        classes[0].len() as f64 * binom_f64(classes[1].len() as u64, k as u64 - 1),
        classes[1].len() as f64 * binom_f64(classes[0].len() as u64, k as u64 - 1),
    ];
    let p0 = if m1 > 0 { w[0] / (w[0] + w[1]) } else { 0.0 };
    let mut flat = collect_distinct(rng, k, m1, "planted-critical E1", |rng| {
        let c = usize::from(!rng.random_bool(p0));
        let (own, other) = (&classes[c], &classes[1 - c]);
        let v = own[rng.random_range(0..own.len())];
        let mut e: Vec<u32> = index::sample(rng, other.len(), k - 1)
            .into_iter()
            .map(|i| other[i])
            .collect();
        e.push(v);
        e.sort_unstable();
        Some(e)
    })?;
    let rest = collect_distinct(rng, k, m2, "planted-critical E2", |rng| {
        let e = random_ksubset(rng, n, k);
        matches!(edge_class(&e, sigma), EdgeClass::OtherBichromatic).then_some(e)
    })?;
    flat.extend_from_slice(&rest);
    Hypergraph::from_flat(n, k, flat)
}

/// How [`sample_binomial_planted`] realizes the independent edge choices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinomialMode {
    /// Visit every bichromatic `k`-subset and keep it with probability `p`.
    Exact,
    /// Draw the edge count from `Bin(#bichromatic, p)`, then that many
    /// distinct bichromatic edges uniformly. Same law, feasible for large `n`.
    CountThenSample,
}

/// Largest number of candidate subsets visited in [`BinomialMode::Exact`].
pub const EXACT_ENUMERATION_LIMIT: f64 = 5e7;

/// Each σ-bichromatic `k`-subset present independently with probability `p`.
pub fn sample_binomial_planted<R: Rng + ?Sized>(
    n: usize,
    p: f64,
    k: usize,
    sigma: &Coloring,
    mode: BinomialMode,
    rng: &mut R,
) -> Result<Hypergraph> {
    check_model(n, k, sigma)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(LabError::param(format!("edge probability {p} outside [0, 1]")));
    }
    match mode {
        BinomialMode::Exact => {
            let total = binom_f64(n as u64, k as u64);
            if total > EXACT_ENUMERATION_LIMIT {
                return Err(LabError::param(format!(
                    "exact mode would visit {total} subsets; use count-then-sample"
                )));
            }
            let mut flat = Vec::new();
            let mut e: Vec<u32> = (0..k as u32).collect();
            loop {
                if is_bichromatic(&e, sigma) && rng.random_bool(p) {
                    flat.extend_from_slice(&e);
                }
                if !next_combination(&mut e, n) {
                    break;
                }
            }
            Hypergraph::from_flat(n, k, flat)
        }
        BinomialMode::CountThenSample => {
            let (bichromatic, _) = pool_sizes(n, k, sigma);
            if bichromatic > u64::MAX as f64 / 2.0 {
                return Err(LabError::param("bichromatic pool too large"));
            }
            let count = Binomial::new(bichromatic as u64, p)
                .map_err(|e| LabError::param(e.to_string()))?
                .sample(rng);
            sample_planted(n, count as usize, k, sigma, rng)
        }
    }
}

/// Advance a sorted combination of `0..n` in lexicographic order.
pub fn next_combination(e: &mut [u32], n: usize) -> bool {
    let k = e.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if (e[i] as usize) < n - k + i {
            e[i] += 1;
            for j in i + 1..k {
                e[j] = e[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_sort_and_validation() {
        let h = Hypergraph::new(5, 3, vec![vec![4, 2, 0], vec![1, 0, 2]]).unwrap();
        assert_eq!(h.edge(0), &[0, 1, 2]);
        assert_eq!(h.edge(1), &[0, 2, 4]);
        assert!(Hypergraph::new(5, 3, vec![vec![0, 0, 1]]).is_err());
        assert!(Hypergraph::new(5, 3, vec![vec![0, 1, 5]]).is_err());
        assert!(Hypergraph::new(5, 3, vec![vec![0, 1, 2], vec![2, 1, 0]]).is_err());
        assert!(h.contains_edge(&[2, 4, 0]));
    }

    #[test]
    fn text_round_trip() {
        let h = Hypergraph::new(6, 3, vec![vec![0, 3, 4], vec![1, 4, 5]]).unwrap();
        let t = h.to_text();
        assert_eq!(t, "6 3 2\n0 3 4\n1 4 5\n");
        assert_eq!(Hypergraph::from_text(&t).unwrap(), h);
        assert!(Hypergraph::from_text("6 3 3\n0 1 2\n").is_err());
        let c: Coloring = "001101".parse().unwrap();
        assert_eq!(c.to_string(), "001101");
        assert!("0x1".parse::<Coloring>().is_err());
    }

    #[test]
    fn classify_small_cases() {
        let h = Hypergraph::new(3, 3, vec![vec![0, 1, 2]]).unwrap();
        let c = classify_edges(&h, &"011".parse().unwrap()).unwrap();
        assert_eq!(c.labels[0], EdgeClass::Critical { support: 0 });
        assert_eq!(c.support, vec![1, 0, 0]);
        let h4 = Hypergraph::new(4, 4, vec![vec![0, 1, 2, 3]]).unwrap();
        let c4 = classify_edges(&h4, &"0011".parse().unwrap()).unwrap();
        assert_eq!(c4.labels[0], EdgeClass::OtherBichromatic);
    }

    #[test]
    fn violations_examples() {
        let h = Hypergraph::empty(4, 3).unwrap();
        assert_eq!(violations(&h, &Coloring::constant(4, 0)).unwrap(), 0);
        let h = Hypergraph::new(4, 3, vec![vec![0, 1, 2]]).unwrap();
        assert_eq!(violations(&h, &Coloring::constant(4, 0)).unwrap(), 1);
        let h = Hypergraph::new(4, 3, vec![vec![0, 1, 2], vec![0, 1, 3]]).unwrap();
        assert_eq!(violations(&h, &"0011".parse().unwrap()).unwrap(), 0);
        assert!(violations(&h, &"001".parse().unwrap()).is_err());
    }

    #[test]
    fn sampler_trivial_cases() {
        let mut rng = trial_rng(1, 0);
        assert_eq!(sample_uniform(6, 0, 3, &mut rng).unwrap().m(), 0);
        let h = sample_uniform(3, 1, 3, &mut rng).unwrap();
        assert_eq!(h.edge(0), &[0, 1, 2]);
        assert!(sample_uniform(4, 5, 3, &mut rng).is_err());
        let sigma: Coloring = "0011".parse().unwrap();
        let h = sample_planted_critical(4, 4, 0, 3, &sigma, &mut rng).unwrap();
        assert_eq!(h.m(), 4);
        assert!(sample_planted(4, 1, 3, &Coloring::constant(4, 0), &mut rng).is_err());
    }

    #[test]
    fn binomial_planted_extremes() {
        let sigma: Coloring = "0011".parse().unwrap();
        let mut rng = trial_rng(2, 0);
        for mode in [BinomialMode::Exact, BinomialMode::CountThenSample] {
            assert_eq!(sample_binomial_planted(4, 0.0, 3, &sigma, mode, &mut rng).unwrap().m(), 0);
            assert_eq!(sample_binomial_planted(4, 1.0, 3, &sigma, mode, &mut rng).unwrap().m(), 4);
        }
    }

    #[test]
    fn combinations_enumerate_all() {
        let mut e = vec![0u32, 1, 2];
        let mut count = 1;
        while next_combination(&mut e, 6) {
            count += 1;
        }
        assert_eq!(count, 20);
    }

    #[test]
    fn seed_mix_spreads() {
        assert_ne!(hash64(0, 0), hash64(0, 1));
        assert_ne!(hash64(0, 0), hash64(1, 0));
        assert_eq!(hash64(42, 7), hash64(42, 7));
    }
}
