//! Whitening, core and attachment fixpoints, rigidity, the residual component
//! census and cluster-entropy estimates.
//!
//! Every process here is driven by the support relation: a σ-critical edge is
//! supported by its unique vertex of the minority color. Monochromatic and
//! non-critical bichromatic edges never support anything.

use crate::analytic::binom_f64;
use crate::error::{LabError, Result};
use crate::exact::{check_cap, for_each_proper, Constraint, Csp};
use crate::model::{edge_class, EdgeClass, Hypergraph};
use crate::Coloring;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

/// Default core parameter `l`.
pub const DEFAULT_L: usize = 10;

/// Components with at most this many vertices get an exact canonical form.
pub const CANONICAL_VERTEX_CAP: usize = 12;

const CANONICAL_PERMUTATION_CAP: u64 = 50_000;

fn check_sizes(h: &Hypergraph, sigma: &Coloring) -> Result<()> {
    if sigma.len() != h.n() {
        return Err(LabError::param(format!(
            "coloring has length {}, hypergraph has {} vertices",
            sigma.len(),
            h.n()
        )));
    }
    Ok(())
}

fn check_vertex_set(n: usize, set: &[u32], what: &str) -> Result<Vec<bool>> {
    let mut mark = vec![false; n];
    for &v in set {
        if v as usize >= n {
            return Err(LabError::param(format!("{what} contains vertex {v} outside 0..{n}")));
        }
        mark[v as usize] = true;
    }
    Ok(mark)
}

fn members(mark: &[bool]) -> Vec<u32> {
    mark.iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(v, _)| v as u32)
        .collect()
}

/// Critical edges with their supporters and compressed incidence.
struct Support {
    k: usize,
    edges: Vec<u32>,
    sup: Vec<u32>,
    offsets: Vec<u32>,
    list: Vec<u32>,
    s: Vec<u32>,
    mono: usize,
}

impl Support {
    fn new(h: &Hypergraph, sigma: &Coloring) -> Result<Self> {
        check_sizes(h, sigma)?;
        let n = h.n();
        let mut edges = Vec::new();
        let mut sup = Vec::new();
        let mut s = vec![0u32; n];
        let mut mono = 0;
        for e in h.edges() {
            match edge_class(e, sigma) {
                EdgeClass::Critical { support } => {
                    edges.extend_from_slice(e);
                    sup.push(support);
                    s[support as usize] += 1;
                }
                EdgeClass::Monochromatic => mono += 1,
                EdgeClass::OtherBichromatic => {}
            }
        }
        let mut offsets = vec![0u32; n + 1];
        for &v in &edges {
            offsets[v as usize + 1] += 1;
        }
        for v in 0..n {
            offsets[v + 1] += offsets[v];
        }
        let mut fill = offsets.clone();
        let mut list = vec![0u32; edges.len()];
        for (i, e) in edges.chunks_exact(h.k()).enumerate() {
            for &v in e {
                list[fill[v as usize] as usize] = i as u32;
                fill[v as usize] += 1;
            }
        }
        Ok(Support {
            k: h.k(),
            edges,
            sup,
            offsets,
            list,
            s,
            mono,
        })
    }

    fn n(&self) -> usize {
        self.s.len()
    }

    fn m(&self) -> usize {
        self.sup.len()
    }

    fn edge(&self, i: usize) -> &[u32] {
        &self.edges[i * self.k..(i + 1) * self.k]
    }

    fn incident(&self, v: usize) -> &[u32] {
        &self.list[self.offsets[v] as usize..self.offsets[v + 1] as usize]
    }
}

/// Outcome of the whitening process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhiteningResult {
    pub n: usize,
    /// The whitening set, sorted.
    pub u: Vec<u32>,
    /// `rounds[t]` holds the vertices added in round `t`; round 0 is `S0`.
    pub rounds: Vec<Vec<u32>>,
    /// Projections `e ∩ U` of critical edges meeting `U` at least twice.
    pub h_u: Vec<Vec<u32>>,
    /// Supporter of the critical edge behind each `h_u` entry.
    pub h_u_support: Vec<u32>,
    /// Support-free vertices.
    pub s0: Vec<u32>,
    /// Vertices supporting one edge whose projection is a pair meeting `S0`.
    pub s1: Vec<u32>,
    /// `|H_U| - |S1|`.
    pub extra_edges: usize,
    /// Support degrees `s(v)`.
    pub support: Vec<u32>,
    pub warning: Option<String>,
}

impl WhiteningResult {
    pub fn in_u(&self) -> Vec<bool> {
        let mut mark = vec![false; self.n];
        for &v in &self.u {
            mark[v as usize] = true;
        }
        mark
    }

    /// `S0` vertices paired with some `S1` vertex in `H_U`.
    pub fn s1_partners(&self) -> Vec<u32> {
        let s1: HashSet<u32> = self.s1.iter().copied().collect();
        let mut out: Vec<u32> = self
            .h_u
            .iter()
            .zip(&self.h_u_support)
            .filter(|(_, s)| s1.contains(s))
            .map(|(e, &s)| if e[0] == s { e[1] } else { e[0] })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// `round,vertex` lines.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("round,vertex\n");
        for (t, r) in self.rounds.iter().enumerate() {
            for v in r {
                out.push_str(&format!("{t},{v}\n"));
            }
        }
        out
    }
}

fn whiten_support(sp: &Support) -> (Vec<bool>, Vec<Vec<u32>>) {
    let n = sp.n();
    let mut in_u = vec![false; n];
    let mut blocking = sp.s.clone();
    let mut hits = vec![0u32; sp.m()];
    let round0: Vec<u32> = (0..n as u32).filter(|&v| sp.s[v as usize] == 0).collect();
    for &v in &round0 {
        in_u[v as usize] = true;
    }
    let mut rounds = vec![round0];
    loop {
        let mut next = Vec::new();
        for &u in rounds.last().unwrap() {
            for &e in sp.incident(u as usize) {
                let e = e as usize;
                hits[e] += 1;
                if hits[e] == 1 {
                    let w = sp.sup[e] as usize;
                    if !in_u[w] {
                        blocking[w] -= 1;
                        if blocking[w] == 0 {
                            in_u[w] = true;
                            next.push(w as u32);
                        }
                    }
                }
            }
        }
        if next.is_empty() {
            break;
        }
        next.sort_unstable();
        rounds.push(next);
    }
    (in_u, rounds)
}

/// Least fixpoint `U`: start from support-free vertices and add any vertex
/// all of whose supported edges meet `U`. Linear in the total edge size.
pub fn whiten(h: &Hypergraph, sigma: &Coloring) -> Result<WhiteningResult> {
    let sp = Support::new(h, sigma)?;
    let (in_u, rounds) = whiten_support(&sp);
    let mut h_u = Vec::new();
    let mut h_u_support = Vec::new();
    let mut proj_of_sup: Vec<Option<usize>> = vec![None; sp.n()];
    for i in 0..sp.m() {
        let p: Vec<u32> = sp.edge(i).iter().copied().filter(|&v| in_u[v as usize]).collect();
        if p.len() >= 2 {
            let w = sp.sup[i] as usize;
            if sp.s[w] == 1 {
                proj_of_sup[w] = Some(h_u.len());
            }
            h_u.push(p);
            h_u_support.push(sp.sup[i]);
        }
    }
    let s0 = rounds[0].clone();
    let s1: Vec<u32> = (0..sp.n())
        .filter(|&v| sp.s[v] == 1)
        .filter(|&v| match proj_of_sup[v] {
            Some(j) => {
                let p = &h_u[j];
                p.len() == 2 && p.iter().any(|&w| w as usize != v && sp.s[w as usize] == 0)
            }
            None => false,
        })
        .map(|v| v as u32)
        .collect();
    let warning = (sp.mono > 0).then(|| format!("coloring is not proper: {} monochromatic edges", sp.mono));
    Ok(WhiteningResult {
        n: sp.n(),
        u: members(&in_u),
        rounds,
        extra_edges: h_u.len() - s1.len(),
        h_u,
        h_u_support,
        s0,
        s1,
        support: sp.s,
        warning,
    })
}

/// Reference whitening: sweep `order` repeatedly until nothing changes.
pub fn whiten_naive(h: &Hypergraph, sigma: &Coloring, order: &[u32]) -> Result<Vec<u32>> {
    let sp = Support::new(h, sigma)?;
    let mut in_u = vec![false; sp.n()];
    loop {
        let mut changed = false;
        for &v in order {
            let v = v as usize;
            if in_u[v] {
                continue;
            }
            let ok = sp
                .incident(v)
                .iter()
                .filter(|&&e| sp.sup[e as usize] as usize == v)
                .all(|&e| sp.edge(e as usize).iter().any(|&w| in_u[w as usize]));
            if ok {
                in_u[v] = true;
                changed = true;
            }
        }
        if !changed {
            return Ok(members(&in_u));
        }
    }
}

/// One line of a census table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusRow {
    pub statistic: String,
    pub observed: f64,
    pub predicted: Option<f64>,
}

/// Whitening statistics next to their predictions at `λ = critical edges / n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UCensus {
    pub n: usize,
    pub lambda: f64,
    pub rows: Vec<CensusRow>,
    /// `|U| = |S0| + |S1| + |rest|` holds.
    pub conserved: bool,
}

impl UCensus {
    pub fn get(&self, statistic: &str) -> Option<&CensusRow> {
        self.rows.iter().find(|r| r.statistic == statistic)
    }

    /// `statistic,observed,predicted` table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("statistic,observed,predicted\n");
        for r in &self.rows {
            let p = r.predicted.map(|p| format!("{p:.16e}")).unwrap_or_default();
            out.push_str(&format!("{},{:.16e},{}\n", r.statistic, r.observed, p));
        }
        out
    }
}

pub fn u_census(result: &WhiteningResult, h: &Hypergraph, sigma: &Coloring) -> Result<UCensus> {
    check_sizes(h, sigma)?;
    if result.n != h.n() {
        return Err(LabError::param("whitening result belongs to another hypergraph"));
    }
    let n = h.n() as f64;
    let k = h.k() as f64;
    let critical: usize = result.support.iter().map(|&s| s as usize).sum();
    let lambda = critical as f64 / n;
    let p0 = (-lambda).exp();
    let p1 = lambda * (k - 1.0) * (-2.0 * lambda).exp();
    let in_u = result.in_u();
    let in_s0: HashSet<u32> = result.s0.iter().copied().collect();
    let in_s1: HashSet<u32> = result.s1.iter().copied().collect();
    let rest = result
        .u
        .iter()
        .filter(|v| !in_s0.contains(v) && !in_s1.contains(v))
        .count();
    let conserved = result.s0.iter().chain(&result.s1).all(|&v| in_u[v as usize])
        && result.u.len() == result.s0.len() + result.s1.len() + rest;
    let row = |s: &str, o: f64, p: Option<f64>| CensusRow {
        statistic: s.to_string(),
        observed: o,
        predicted: p,
    };
    Ok(UCensus {
        n: h.n(),
        lambda,
        rows: vec![
            row("u_size", result.u.len() as f64 / n, Some(p0 + p1)),
            row("s0_size", result.s0.len() as f64 / n, Some(p0)),
            row("s1_size", result.s1.len() as f64 / n, Some(p1)),
            row("u_rest", rest as f64 / n, None),
            row("extra_edges", result.extra_edges as f64 / n, None),
            row("h_u_edges", result.h_u.len() as f64 / n, None),
        ],
        conserved,
    })
}

/// Core and attachment sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreResult {
    /// Core vertices, sorted.
    pub c: Vec<u32>,
    /// Vertices in the order the peeling removed them.
    pub removed_trace: Vec<u32>,
    /// Attached set, sorted; equals `c` until [`attach`] runs.
    pub a: Vec<u32>,
    pub l: Option<usize>,
}

fn check_l(l: usize) -> Result<usize> {
    if l < 2 || l % 2 != 0 {
        return Err(LabError::param(format!("core parameter l must be even and >= 2, got {l}")));
    }
    Ok(l / 2)
}

/// Largest set in which every member supports at least `l/2` edges lying
/// entirely inside the set, found by worklist peeling.
pub fn core(h: &Hypergraph, sigma: &Coloring, l: usize) -> Result<CoreResult> {
    let half = check_l(l)? as u32;
    let sp = Support::new(h, sigma)?;
    let n = sp.n();
    let mut in_s: Vec<bool> = sp.s.iter().map(|&s| s >= half).collect();
    let mut outside = vec![0u32; sp.m()];
    let mut inside = vec![0u32; n];
    for i in 0..sp.m() {
        outside[i] = sp.edge(i).iter().filter(|&&v| !in_s[v as usize]).count() as u32;
        if outside[i] == 0 {
            inside[sp.sup[i] as usize] += 1;
        }
    }
    let mut queue: VecDeque<u32> = (0..n as u32)
        .filter(|&v| in_s[v as usize] && inside[v as usize] < half)
        .collect();
    let mut trace = Vec::new();
    while let Some(v) = queue.pop_front() {
        let v = v as usize;
        if !in_s[v] {
            continue;
        }
        in_s[v] = false;
        trace.push(v as u32);
        for &e in sp.incident(v) {
            let e = e as usize;
            outside[e] += 1;
            if outside[e] == 1 {
                let w = sp.sup[e] as usize;
                inside[w] -= 1;
                if in_s[w] && inside[w] + 1 == half {
                    queue.push_back(w as u32);
                }
            }
        }
    }
    let c = members(&in_s);
    Ok(CoreResult {
        a: c.clone(),
        c,
        removed_trace: trace,
        l: Some(l),
    })
}

/// Reference core: sweep `order` repeatedly, dropping any vertex short of support.
pub fn core_naive(h: &Hypergraph, sigma: &Coloring, l: usize, order: &[u32]) -> Result<Vec<u32>> {
    let half = check_l(l)? as u32;
    let sp = Support::new(h, sigma)?;
    let mut in_s: Vec<bool> = sp.s.iter().map(|&s| s >= half).collect();
    loop {
        let mut changed = false;
        for &v in order {
            let v = v as usize;
            if !in_s[v] {
                continue;
            }
            let good = sp
                .incident(v)
                .iter()
                .filter(|&&e| sp.sup[e as usize] as usize == v)
                .filter(|&&e| sp.edge(e as usize).iter().all(|&w| in_s[w as usize]))
                .count() as u32;
            if good < half {
                in_s[v] = false;
                changed = true;
            }
        }
        if !changed {
            return Ok(members(&in_s));
        }
    }
}

/// Least superset `A` of `c` closed under: a vertex joins when it supports an
/// edge whose other vertices are all in `A`.
pub fn attach(h: &Hypergraph, sigma: &Coloring, c: &[u32]) -> Result<CoreResult> {
    let sp = Support::new(h, sigma)?;
    let mut in_a = check_vertex_set(sp.n(), c, "C")?;
    let mut missing = vec![0u32; sp.m()];
    let mut queue = VecDeque::new();
    for i in 0..sp.m() {
        let w = sp.sup[i];
        missing[i] = sp
            .edge(i)
            .iter()
            .filter(|&&v| v != w && !in_a[v as usize])
            .count() as u32;
    }
    for i in 0..sp.m() {
        let w = sp.sup[i];
        if missing[i] == 0 && !in_a[w as usize] {
            in_a[w as usize] = true;
            queue.push_back(w);
        }
    }
    while let Some(v) = queue.pop_front() {
        for &e in sp.incident(v as usize) {
            let e = e as usize;
            let w = sp.sup[e];
            if w == v {
                continue;
            }
            missing[e] -= 1;
            if missing[e] == 0 && !in_a[w as usize] {
                in_a[w as usize] = true;
                queue.push_back(w);
            }
        }
    }
    let mut cs = c.to_vec();
    cs.sort_unstable();
    cs.dedup();
    Ok(CoreResult {
        c: cs,
        removed_trace: Vec::new(),
        a: members(&in_a),
        l: None,
    })
}

/// Reference attachment: sweep `order` repeatedly until nothing joins.
pub fn attach_naive(h: &Hypergraph, sigma: &Coloring, c: &[u32], order: &[u32]) -> Result<Vec<u32>> {
    let sp = Support::new(h, sigma)?;
    let mut in_a = check_vertex_set(sp.n(), c, "C")?;
    loop {
        let mut changed = false;
        for &v in order {
            let v = v as usize;
            if in_a[v] {
                continue;
            }
            let joins = sp.incident(v).iter().any(|&e| {
                sp.sup[e as usize] as usize == v
                    && sp.edge(e as usize).iter().all(|&w| w as usize == v || in_a[w as usize])
            });
            if joins {
                in_a[v] = true;
                changed = true;
            }
        }
        if !changed {
            return Ok(members(&in_a));
        }
    }
}

/// True iff every proper coloring that differs from `sigma` somewhere on `r`
/// differs on at least `theta` vertices of `r`. Exhaustive.
pub fn rigid_check(h: &Hypergraph, sigma: &Coloring, r: &[u32], theta: usize) -> Result<bool> {
    check_sizes(h, sigma)?;
    check_cap(h.n())?;
    check_vertex_set(h.n(), r, "R")?;
    let s = sigma.mask().ok_or_else(|| LabError::param("coloring too long for a mask"))?;
    let rm = r.iter().fold(0u64, |m, &v| m | (1u64 << v));
    let mut rigid = true;
    for_each_proper(h, |tau| {
        let d = ((tau ^ s) & rm).count_ones() as usize;
        if d >= 1 && d < theta {
            rigid = false;
        }
    })?;
    Ok(rigid)
}

/// What an edge of `H` imposes on its residual part `e \ C` once the core is
/// colored by `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualKind {
    /// `e` misses the core: the usual not-all-equal condition.
    NotAllEqual,
    /// Core part is all 0: the residual part may not be all 0.
    NotAllZero,
    /// Core part is all 1: the residual part may not be all 1.
    NotAllOne,
    /// Core part is already bichromatic.
    Satisfied,
}

impl ResidualKind {
    fn tag(self) -> char {
        match self {
            ResidualKind::NotAllEqual => 'E',
            ResidualKind::NotAllZero => 'Z',
            ResidualKind::NotAllOne => 'O',
            ResidualKind::Satisfied => 'S',
        }
    }

    fn constraint(self) -> Option<Constraint> {
        match self {
            ResidualKind::NotAllEqual => Some(Constraint::NotAllEqual),
            ResidualKind::NotAllZero => Some(Constraint::NotAllZero),
            ResidualKind::NotAllOne => Some(Constraint::NotAllOne),
            ResidualKind::Satisfied => None,
        }
    }
}

/// One isomorphism class of residual components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentType {
    /// Canonical form, or a `large:` signature above the relabeling cap.
    pub form: String,
    pub multiplicity: usize,
    pub vertex_count: usize,
    pub edge_count: usize,
    /// Admissible colorings of one copy; absent above the enumeration cap.
    pub z_t: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentCensus {
    pub components: Vec<ComponentType>,
    pub residual_vertices: usize,
    /// `Σ multiplicity · ln z_T` over the colored components.
    pub entropy_estimate: f64,
    /// Components too large to color.
    pub uncolored: usize,
    /// Some edge inside the core is monochromatic under `sigma`.
    pub core_contradiction: bool,
}

impl ComponentCensus {
    /// `Σ multiplicity · vertex_count`.
    pub fn covered_vertices(&self) -> usize {
        self.components.iter().map(|c| c.multiplicity * c.vertex_count).sum()
    }
}

struct Dsu(Vec<u32>);

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu((0..n as u32).collect())
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.0[x as usize] != x {
            let p = self.0[x as usize];
            self.0[x as usize] = self.0[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b) as usize] = a.min(b);
        }
    }
}

type Clause = (Vec<u32>, ResidualKind);

fn encode(clauses: &[Clause], label: &[u32]) -> Vec<(ResidualKind, Vec<u32>)> {
    let mut out: Vec<(ResidualKind, Vec<u32>)> = clauses
        .iter()
        .map(|(vs, kind)| {
            let mut w: Vec<u32> = vs.iter().map(|&v| label[v as usize]).collect();
            w.sort_unstable();
            (*kind, w)
        })
        .collect();
    out.sort();
    out
}

fn render(nv: usize, enc: &[(ResidualKind, Vec<u32>)]) -> String {
    let body: Vec<String> = enc
        .iter()
        .map(|(kind, w)| {
            let vs: Vec<String> = w.iter().map(|v| v.to_string()).collect();
            format!("{}{}", kind.tag(), vs.join("."))
        })
        .collect();
    format!("v{nv}|{}", body.join(","))
}

/// Color refinement: returns a canonical rank per vertex.
fn refine(nv: usize, clauses: &[Clause]) -> Vec<u32> {
    let mut inc: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for (i, (vs, _)) in clauses.iter().enumerate() {
        for &v in vs {
            inc[v as usize].push(i);
        }
    }
    let mut color = vec![0u32; nv];
    let mut classes = 1;
    loop {
        let sigs: Vec<(u32, Vec<(ResidualKind, usize, Vec<u32>)>)> = (0..nv)
            .map(|v| {
                let mut s: Vec<(ResidualKind, usize, Vec<u32>)> = inc[v]
                    .iter()
                    .map(|&c| {
                        let (vs, kind) = &clauses[c];
                        let mut cs: Vec<u32> = vs
                            .iter()
                            .filter(|&&w| w as usize != v)
                            .map(|&w| color[w as usize])
                            .collect();
                        cs.sort_unstable();
                        (*kind, vs.len(), cs)
                    })
                    .collect();
                s.sort();
                (color[v], s)
            })
            .collect();
        let mut distinct: Vec<_> = sigs.clone();
        distinct.sort();
        distinct.dedup();
        for v in 0..nv {
            color[v] = distinct.binary_search(&sigs[v]).unwrap() as u32;
        }
        if distinct.len() == classes {
            return color;
        }
        classes = distinct.len();
    }
}

fn factorial_product(sizes: &[usize], cap: u64) -> Option<u64> {
    let mut p: u64 = 1;
    for &s in sizes {
        for i in 2..=s as u64 {
            p = p.checked_mul(i)?;
            if p > cap {
                return None;
            }
        }
    }
    Some(p)
}

/// Canonical form of a small labelled clause system, `None` when relabeling
/// would be too expensive.
fn canonical_form(nv: usize, clauses: &[Clause]) -> Option<String> {
    if nv > CANONICAL_VERTEX_CAP {
        return None;
    }
    let color = refine(nv, clauses);
    let ncells = color.iter().copied().max().map_or(0, |c| c as usize + 1);
    let mut cells: Vec<Vec<u32>> = vec![Vec::new(); ncells];
    for v in 0..nv {
        cells[color[v] as usize].push(v as u32);
    }
    let sizes: Vec<usize> = cells.iter().map(|c| c.len()).collect();
    factorial_product(&sizes, CANONICAL_PERMUTATION_CAP)?;
    // position p receives label p; positions are grouped by cell
    let slot_cell: Vec<usize> = cells.iter().enumerate().flat_map(|(i, c)| vec![i; c.len()]).collect();
    let mut label = vec![u32::MAX; nv];
    let mut best: Option<Vec<(ResidualKind, Vec<u32>)>> = None;
    fn go(
        p: usize,
        slot_cell: &[usize],
        cells: &[Vec<u32>],
        label: &mut Vec<u32>,
        clauses: &[Clause],
        best: &mut Option<Vec<(ResidualKind, Vec<u32>)>>,
    ) {
        if p == slot_cell.len() {
            let enc = encode(clauses, label);
            if best.as_ref().map_or(true, |b| enc < *b) {
                *best = Some(enc);
            }
            return;
        }
        for &v in &cells[slot_cell[p]] {
            if label[v as usize] == u32::MAX {
                label[v as usize] = p as u32;
                go(p + 1, slot_cell, cells, label, clauses, best);
                label[v as usize] = u32::MAX;
            }
        }
    }
    go(0, &slot_cell, &cells, &mut label, clauses, &mut best);
    Some(render(nv, &best.unwrap_or_default()))
}

fn signature(nv: usize, clauses: &[Clause]) -> String {
    let mut sizes: Vec<(char, usize)> = clauses.iter().map(|(vs, k)| (k.tag(), vs.len())).collect();
    sizes.sort_unstable();
    let body: Vec<String> = sizes.iter().map(|(t, s)| format!("{t}{s}")).collect();
    format!("large:v{nv}|{}", body.join(","))
}

/// Components of the residual hypergraph on `V \ C`, grouped by type, with
/// exact coloring counts.
///
/// Each edge `e` contributes `e \ C` labelled by what the σ-colored part
/// `e ∩ C` still demands, so the product of the `z_T` equals the number of
/// proper colorings that agree with `sigma` on `C`. Pieces of size two or more
/// connect components; single-vertex pieces act as unary conditions.
pub fn residual_census(h: &Hypergraph, sigma: &Coloring, c: &[u32]) -> Result<ComponentCensus> {
    check_sizes(h, sigma)?;
    let n = h.n();
    let in_c = check_vertex_set(n, c, "C")?;
    let mut dsu = Dsu::new(n);
    let mut pieces: Vec<Clause> = Vec::new();
    let mut contradiction = false;
    for e in h.edges() {
        let core_colors: Vec<u8> = e.iter().filter(|&&v| in_c[v as usize]).map(|&v| sigma.get(v as usize)).collect();
        let rest: Vec<u32> = e.iter().copied().filter(|&v| !in_c[v as usize]).collect();
        let kind = if core_colors.is_empty() {
            ResidualKind::NotAllEqual
        } else if core_colors.iter().all(|&x| x == 0) {
            ResidualKind::NotAllZero
        } else if core_colors.iter().all(|&x| x == 1) {
            ResidualKind::NotAllOne
        } else {
            ResidualKind::Satisfied
        };
        if rest.is_empty() {
            contradiction |= kind != ResidualKind::Satisfied;
            continue;
        }
        if rest.len() == 1 && kind == ResidualKind::Satisfied {
            continue;
        }
        for w in rest.windows(2) {
            dsu.union(w[0], w[1]);
        }
        pieces.push((rest, kind));
    }
    let residual: Vec<u32> = (0..n as u32).filter(|&v| !in_c[v as usize]).collect();
    let mut groups: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for &v in &residual {
        groups.entry(dsu.find(v)).or_default().push(v);
    }
    let mut local = vec![u32::MAX; n];
    for vs in groups.values() {
        for (i, &v) in vs.iter().enumerate() {
            local[v as usize] = i as u32;
        }
    }
    let mut by_root: HashMap<u32, Vec<Clause>> = HashMap::new();
    for (vs, kind) in pieces {
        let root = dsu.find(vs[0]);
        let lv = vs.iter().map(|&v| local[v as usize]).collect();
        by_root.entry(root).or_default().push((lv, kind));
    }
    let mut types: BTreeMap<(String, Option<u64>), ComponentType> = BTreeMap::new();
    let mut memo: HashMap<String, Option<u64>> = HashMap::new();
    for (root, vs) in &groups {
        let clauses = by_root.remove(root).unwrap_or_default();
        let nv = vs.len();
        let exact = canonical_form(nv, &clauses);
        let count = |cl: &[Clause]| -> Option<u64> {
            let csp_clauses: Vec<(Vec<u32>, Constraint)> = cl
                .iter()
                .filter_map(|(vs, k)| k.constraint().map(|c| (vs.clone(), c)))
                .collect();
            Csp::new(nv, &csp_clauses).ok().map(|c| c.count())
        };
        let (form, z) = match exact {
            Some(f) => {
                let z = *memo.entry(f.clone()).or_insert_with(|| count(&clauses));
                (f, z)
            }
            None => (signature(nv, &clauses), count(&clauses)),
        };
        let entry = types.entry((form.clone(), z)).or_insert(ComponentType {
            form,
            multiplicity: 0,
            vertex_count: nv,
            edge_count: clauses.len(),
            z_t: z,
        });
        entry.multiplicity += 1;
    }
    let components: Vec<ComponentType> = types.into_values().collect();
    let uncolored = components.iter().filter(|t| t.z_t.is_none()).map(|t| t.multiplicity).sum();
    let entropy_estimate = components
        .iter()
        .filter_map(|t| t.z_t.map(|z| t.multiplicity as f64 * (z as f64).ln()))
        .sum();
    Ok(ComponentCensus {
        components,
        residual_vertices: residual.len(),
        entropy_estimate,
        uncolored,
        core_contradiction: contradiction,
    })
}

/// Upper and lower estimates of `ln |C(σ)|` built from the whitening set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterBounds {
    pub n: usize,
    pub s0: usize,
    pub s1: usize,
    pub s1_partners: usize,
    /// Relevant non-critical edges with both `U`-vertices in `S0 \ N(S1)`.
    pub e2_prime: usize,
    /// Greedy matching thinned from `e2_prime`.
    pub e2_matching: usize,
    /// Relevant non-critical edges with three or more `U`-vertices.
    pub e3_prime: usize,
    /// `|F1 ∪ F2 ∪ F3|`.
    pub exceptional: usize,
    /// Pairs left after removing the exceptional set, used by the lower bound.
    pub e2_lower: usize,
    pub upper: f64,
    pub lower: f64,
    pub upper_per_n: f64,
    pub lower_per_n: f64,
}

/// True when a non-critical edge can constrain the whitening set: it meets
/// `U` at least twice and its vertices outside `U` share one color.
pub fn is_relevant_noncritical(e: &[u32], in_u: &[bool], sigma: &Coloring) -> bool {
    let mut hits = 0;
    let mut color = None;
    for &v in e {
        if in_u[v as usize] {
            hits += 1;
        } else {
            let c = sigma.get(v as usize);
            match color {
                None => color = Some(c),
                Some(x) if x != c => return false,
                _ => {}
            }
        }
    }
    hits >= 2
}

fn closure(mark: &mut [bool], seeds: &[u32], adj: &[Vec<u32>]) {
    let mut stack: Vec<u32> = seeds.to_vec();
    for &s in seeds {
        mark[s as usize] = true;
    }
    while let Some(v) = stack.pop() {
        for &w in &adj[v as usize] {
            if !mark[w as usize] {
                mark[w as usize] = true;
                stack.push(w);
            }
        }
    }
}

/// Bounds from a whitening result and the relevant non-critical edges
/// (see [`is_relevant_noncritical`]). Used directly by streaming experiments.
pub fn cluster_bounds_from_parts(wr: &WhiteningResult, relevant: &[Vec<u32>]) -> ClusterBounds {
    let n = wr.n;
    let in_u = wr.in_u();
    let mut in_s0 = vec![false; n];
    for &v in &wr.s0 {
        in_s0[v as usize] = true;
    }
    let partners = wr.s1_partners();
    let mut is_partner = vec![false; n];
    for &v in &partners {
        is_partner[v as usize] = true;
    }
    let upair = |e: &[u32]| -> Vec<u32> { e.iter().copied().filter(|&v| in_u[v as usize]).collect() };

    let mut e2: Vec<Vec<u32>> = Vec::new();
    let mut e2_wide: Vec<Vec<u32>> = Vec::new();
    let mut e3_seeds: Vec<u32> = Vec::new();
    let mut e3 = 0;
    let mut sorted: Vec<&Vec<u32>> = relevant.iter().collect();
    sorted.sort();
    sorted.dedup();
    for e in sorted {
        let p = upair(e);
        if p.len() == 2 {
            if p.iter().all(|&v| in_s0[v as usize] && !is_partner[v as usize]) {
                e2.push(p.clone());
            }
            e2_wide.push(p);
        } else if p.len() >= 3 {
            e3 += 1;
            e3_seeds.extend(p);
        }
    }
    let mut used = vec![false; n];
    let mut matching = 0;
    for p in &e2 {
        if !used[p[0] as usize] && !used[p[1] as usize] {
            used[p[0] as usize] = true;
            used[p[1] as usize] = true;
            matching += 1;
        }
    }

    // exceptional set: H_U-reachability from irregular structure
    let s1: HashSet<u32> = wr.s1.iter().copied().collect();
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut f1_seeds = Vec::new();
    for (e, s) in wr.h_u.iter().zip(&wr.h_u_support) {
        for w in e.windows(2) {
            adj[w[0] as usize].push(w[1]);
            adj[w[1] as usize].push(w[0]);
        }
        if !(e.len() == 2 && s1.contains(s)) {
            f1_seeds.extend_from_slice(e);
        }
    }
    let mut f = vec![false; n];
    closure(&mut f, &f1_seeds, &adj);
    closure(&mut f, &e3_seeds, &adj);
    let mut incident_e2 = vec![0u32; n];
    let mut f2_seeds = Vec::new();
    for p in &e2_wide {
        for &v in p {
            incident_e2[v as usize] += 1;
            if (is_partner[v as usize] || !in_s0[v as usize]) && !f[v as usize] {
                f2_seeds.push(v);
            }
        }
    }
    f2_seeds.extend((0..n as u32).filter(|&v| in_s0[v as usize] && incident_e2[v as usize] >= 2));
    closure(&mut f, &f2_seeds, &adj);
    let exceptional = f.iter().filter(|&&b| b).count();
    let e2_lower = e2_wide
        .iter()
        .filter(|p| p.iter().all(|&v| in_s0[v as usize] && !f[v as usize]))
        .count();

    let ln2 = std::f64::consts::LN_2;
    let s0 = wr.s0.len();
    let upper = (s0 as f64 - matching as f64) * ln2;
    let lower = (s0 as f64 - exceptional as f64 - e2_lower as f64) * ln2;
    ClusterBounds {
        n,
        s0,
        s1: wr.s1.len(),
        s1_partners: partners.len(),
        e2_prime: e2.len(),
        e2_matching: matching,
        e3_prime: e3,
        exceptional,
        e2_lower,
        upper,
        lower,
        upper_per_n: upper / n as f64,
        lower_per_n: lower / n as f64,
    }
}

/// Cluster-entropy estimates for `H` under `sigma`.
pub fn cluster_entropy_bounds(h: &Hypergraph, sigma: &Coloring) -> Result<ClusterBounds> {
    let wr = whiten(h, sigma)?;
    let in_u = wr.in_u();
    let relevant: Vec<Vec<u32>> = h
        .edges()
        .filter(|e| matches!(edge_class(e, sigma), EdgeClass::OtherBichromatic))
        .filter(|e| is_relevant_noncritical(e, &in_u, sigma))
        .map(|e| e.to_vec())
        .collect();
    Ok(cluster_bounds_from_parts(&wr, &relevant))
}

/// Expansion audit at one set size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionRow {
    pub size: usize,
    pub samples: usize,
    /// Samples with more than `1.01 |S|` edges meeting `S` twice.
    pub violations: usize,
    /// Largest observed ratio of such edges to `|S|`.
    pub max_ratio: f64,
}

/// Grow connected vertex sets of the given sizes and count edges meeting each
/// set in two or more vertices. A diagnostic, not a test.
pub fn expansion_audit<R: Rng + ?Sized>(
    h: &Hypergraph,
    sizes: &[usize],
    samples: usize,
    rng: &mut R,
) -> Result<Vec<ExpansionRow>> {
    let n = h.n();
    if let Some(&s) = sizes.iter().find(|&&s| s == 0 || s > n) {
        return Err(LabError::param(format!("set size {s} outside 1..={n}")));
    }
    let inc = h.incidence();
    let mut rows = Vec::new();
    for &size in sizes {
        let mut violations = 0;
        let mut max_ratio = 0.0f64;
        for _ in 0..samples {
            let mut in_s = vec![false; n];
            let mut set = Vec::with_capacity(size);
            let mut frontier: Vec<u32> = Vec::new();
            while set.len() < size {
                let v = loop {
                    if frontier.is_empty() {
                        break rng.random_range(0..n as u32);
                    }
                    let i = rng.random_range(0..frontier.len());
                    let v = frontier.swap_remove(i);
                    if !in_s[v as usize] {
                        break v;
                    }
                };
                if in_s[v as usize] {
                    continue;
                }
                in_s[v as usize] = true;
                set.push(v);
                for &e in inc.edges_of(v as usize) {
                    frontier.extend(h.edge(e as usize).iter().filter(|&&w| !in_s[w as usize]));
                }
            }
            let mut seen = HashSet::new();
            let mut dense = 0usize;
            for &v in &set {
                for &e in inc.edges_of(v as usize) {
                    if seen.insert(e) && h.edge(e as usize).iter().filter(|&&w| in_s[w as usize]).count() >= 2 {
                        dense += 1;
                    }
                }
            }
            let ratio = dense as f64 / size as f64;
            max_ratio = max_ratio.max(ratio);
            if ratio > 1.01 {
                violations += 1;
            }
        }
        rows.push(ExpansionRow {
            size,
            samples,
            violations,
            max_ratio,
        });
    }
    Ok(rows)
}

/// Expected number of relevant pairs per vertex in the upper-bound construction.
pub fn predicted_pair_density(k: usize, lambda: f64) -> f64 {
    binom_f64(k as u64, 2) * (-2.0 * lambda).exp() * std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(s: &str) -> Coloring {
        s.parse().unwrap()
    }

    fn six() -> (Hypergraph, Coloring) {
        let h = Hypergraph::new(
            6,
            3,
            vec![vec![0, 3, 4], vec![1, 4, 5], vec![2, 3, 5], vec![3, 0, 1], vec![4, 1, 2], vec![5, 0, 2]],
        )
        .unwrap();
        (h, sig("000111"))
    }

    #[test]
    fn edgeless_whitens_everything() {
        let h = Hypergraph::empty(5, 3).unwrap();
        let w = whiten(&h, &sig("01010")).unwrap();
        assert_eq!(w.u, vec![0, 1, 2, 3, 4]);
        assert_eq!(w.s0.len(), 5);
        assert!(w.s1.is_empty());
        assert_eq!(w.extra_edges, 0);
    }

    #[test]
    fn single_edge_trace() {
        let h = Hypergraph::new(3, 3, vec![vec![0, 1, 2]]).unwrap();
        let w = whiten(&h, &sig("011")).unwrap();
        assert_eq!(w.u, vec![0, 1, 2]);
        assert_eq!(w.rounds, vec![vec![1, 2], vec![0]]);
        assert_eq!(w.s0, vec![1, 2]);
        assert!(w.s1.is_empty());
        assert_eq!(w.h_u, vec![vec![0, 1, 2]]);
        assert_eq!(w.extra_edges, 1);
        assert_eq!(w.trace_csv(), "round,vertex\n0,1\n0,2\n1,0\n");
    }

    #[test]
    fn six_vertex_instance() {
        let (h, s) = six();
        assert!(whiten(&h, &s).unwrap().u.is_empty());
        let c = core(&h, &s, 2).unwrap();
        assert_eq!(c.c, vec![0, 1, 2, 3, 4, 5]);
        assert!(c.removed_trace.is_empty());
        assert!(core(&h, &s, 4).unwrap().c.is_empty());
    }

    #[test]
    fn attach_examples() {
        let h = Hypergraph::new(3, 3, vec![vec![0, 1, 2]]).unwrap();
        let s = sig("011");
        assert_eq!(attach(&h, &s, &[1, 2]).unwrap().a, vec![0, 1, 2]);
        assert!(attach(&h, &s, &[]).unwrap().a.is_empty());
        assert_eq!(attach(&h, &s, &[0, 1, 2]).unwrap().a, vec![0, 1, 2]);
    }

    #[test]
    fn bad_core_parameter() {
        let (h, s) = six();
        assert!(core(&h, &s, 3).is_err());
        assert!(core(&h, &s, 0).is_err());
    }

    #[test]
    fn rigidity_examples() {
        let h = Hypergraph::new(3, 3, vec![vec![0, 1, 2]]).unwrap();
        let s = sig("011");
        assert!(rigid_check(&h, &s, &[], 5).unwrap());
        assert!(rigid_check(&h, &s, &[1], 1).unwrap());
        assert!(!rigid_check(&h, &s, &[1], 2).unwrap());
        let e = Hypergraph::empty(3, 3).unwrap();
        assert!(!rigid_check(&e, &s, &[0], 2).unwrap());
    }

    #[test]
    fn residual_trivial_cases() {
        let (h, s) = six();
        let all = residual_census(&h, &s, &[0, 1, 2, 3, 4, 5]).unwrap();
        assert!(all.components.is_empty());
        assert_eq!(all.entropy_estimate, 0.0);
        let e = Hypergraph::empty(7, 3).unwrap();
        let c = residual_census(&e, &Coloring::constant(7, 0), &[]).unwrap();
        assert_eq!(c.components.len(), 1);
        assert_eq!(c.components[0].multiplicity, 7);
        assert_eq!(c.components[0].z_t, Some(2));
        assert!((c.entropy_estimate - 7.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn residual_labels_follow_core_colors() {
        // core {0}: colour 0, so {1,2} may not be all 0
        let h = Hypergraph::new(3, 3, vec![vec![0, 1, 2]]).unwrap();
        let c = residual_census(&h, &sig("011"), &[0]).unwrap();
        assert_eq!(c.components.len(), 1);
        assert_eq!(c.components[0].z_t, Some(3));
        assert_eq!(c.components[0].form, "v2|Z0.1");
    }

    #[test]
    fn canonical_form_ignores_labels() {
        let a: Vec<Clause> = vec![(vec![0, 1, 2], ResidualKind::NotAllEqual), (vec![2, 3, 4], ResidualKind::NotAllEqual)];
        let b: Vec<Clause> = vec![(vec![4, 0, 3], ResidualKind::NotAllEqual), (vec![1, 2, 3], ResidualKind::NotAllEqual)];
        assert_eq!(canonical_form(5, &a), canonical_form(5, &b));
        let c: Vec<Clause> = vec![(vec![0, 1, 2], ResidualKind::NotAllEqual), (vec![2, 3, 4], ResidualKind::NotAllZero)];
        assert_ne!(canonical_form(5, &a), canonical_form(5, &c));
    }

    #[test]
    fn edgeless_cluster_bounds() {
        let h = Hypergraph::empty(9, 4).unwrap();
        let b = cluster_entropy_bounds(&h, &Coloring::constant(9, 1)).unwrap();
        let full = 9.0 * std::f64::consts::LN_2;
        assert!((b.upper - full).abs() < 1e-12);
        assert!((b.lower - full).abs() < 1e-12);
    }

    #[test]
    fn u_census_single_edge() {
        let h = Hypergraph::new(3, 3, vec![vec![0, 1, 2]]).unwrap();
        let s = sig("011");
        let w = whiten(&h, &s).unwrap();
        let c = u_census(&w, &h, &s).unwrap();
        assert!(c.conserved);
        assert_eq!(c.get("s0_size").unwrap().observed, 2.0 / 3.0);
        assert_eq!(c.get("extra_edges").unwrap().observed, 1.0 / 3.0);
    }
}
