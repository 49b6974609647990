//! Monte-Carlo orchestration: seeded trials, per-trial records, aggregated
//! curves and the two scans.
//!
//! Trial `j` of a run (counted across the whole grid) draws its randomness
//! from `trial_rng(master_seed, j)`, so results do not depend on the worker
//! count or on scheduling. Records carry no wall-clock data.

use crate::analytic::{
    cluster_upper_rate, critical_fraction, first_moment_rate, ln_exact_first_moment, local_cluster_rate,
    poisson_pmf, r_cond, r_first, r_second,
};
use crate::error::{LabError, Result};
use crate::exact::{check_cap, moments, solution_census, Counter};
use crate::model::{
    edge_class, sample_binomial_planted, sample_planted, sample_planted_critical, sample_uniform, trial_rng,
    BinomialMode, EdgeClass, Hypergraph,
};
use crate::optim::bisect;
use crate::whitening::{
    attach, cluster_bounds_from_parts, core, is_relevant_noncritical, whiten, ClusterBounds, DEFAULT_L,
};
use crate::Coloring;
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::Instant;

/// Version of the record layout.
pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    DegreeLaw,
    USize,
    CondensationScan,
    ClusterEntropyScan,
    MomentCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Uniform,
    Planted,
    PlantedCritical,
    BinomialPlanted,
}

fn default_l() -> usize {
    DEFAULT_L
}

/// Everything a run depends on.
///
/// For `degree_law`, `u_size` and `cluster_entropy_scan` the grid holds `λ`
/// and the planted-critical model uses `m1 = round(λ n)`. For the other kinds
/// the grid holds `r` with `m = round(r n)`, unless `edges` lists `m` directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub k: usize,
    pub n: usize,
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub grid: Vec<f64>,
    #[serde(default)]
    pub edges: Vec<usize>,
    pub model: ModelKind,
    /// Planted-critical excess `β` when the grid holds `r`.
    #[serde(default)]
    pub beta: f64,
    /// Total density for the non-critical part of λ-grid runs:
    /// `m2 = round(r n) - m1`. Absent means `m2 = 0`.
    #[serde(default)]
    pub fill_to_r: Option<f64>,
    #[serde(default)]
    pub b_list: Vec<f64>,
    #[serde(default = "default_l")]
    pub l: usize,
    #[serde(default)]
    pub workers: Option<usize>,
    /// Trials that take longer are recorded as timed out.
    #[serde(default)]
    pub time_budget_secs: Option<f64>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, model: ModelKind, k: usize, n: usize, trials: usize, master_seed: u64) -> Self {
        ExperimentConfig {
            kind,
            k,
            n,
            trials,
            master_seed,
            grid: Vec::new(),
            edges: Vec::new(),
            model,
            beta: 0.0,
            fill_to_r: None,
            b_list: Vec::new(),
            l: DEFAULT_L,
            workers: None,
            time_budget_secs: None,
        }
    }

    fn lambda_grid(&self) -> bool {
        matches!(
            self.kind,
            ExperimentKind::DegreeLaw | ExperimentKind::USize | ExperimentKind::ClusterEntropyScan
        )
    }

    /// Grid abscissae: `λ`, `r`, or `m / n` for explicit edge counts.
    pub fn points(&self) -> Vec<f64> {
        if !self.edges.is_empty() && !self.lambda_grid() {
            self.edges.iter().map(|&m| m as f64 / self.n as f64).collect()
        } else {
            self.grid.clone()
        }
    }

    fn edge_count(&self, g: usize) -> usize {
        if !self.edges.is_empty() && !self.lambda_grid() {
            self.edges[g]
        } else {
            (self.grid[g] * self.n as f64).round() as usize
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(LabError::param("trials must be >= 1"));
        }
        if self.k < 2 || self.k > self.n {
            return Err(LabError::param(format!("need 2 <= k <= n, got k={} n={}", self.k, self.n)));
        }
        if self.points().is_empty() {
            return Err(LabError::param("grid is empty"));
        }
        if self.grid.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(LabError::param("grid values must be finite and non-negative"));
        }
        let planted = self.lambda_grid() || self.model != ModelKind::Uniform;
        if planted && self.n % 2 != 0 {
            return Err(LabError::param(format!("planted models need even n, got {}", self.n)));
        }
        if self.lambda_grid() && self.model != ModelKind::PlantedCritical {
            return Err(LabError::param("this kind runs on the planted_critical model"));
        }
        if matches!(self.kind, ExperimentKind::CondensationScan | ExperimentKind::MomentCheck) {
            check_cap(self.n)?;
        }
        if self.l < 2 || self.l % 2 != 0 {
            return Err(LabError::param("l must be even and >= 2"));
        }
        if self.workers == Some(0) {
            return Err(LabError::param("workers must be >= 1"));
        }
        Ok(())
    }
}

/// One published statistic name. A trailing `[]` marks an indexed family.
pub struct StatKey {
    pub name: &'static str,
    pub description: &'static str,
    /// Missing entries count as zero when aggregating.
    pub zero_default: bool,
}

const fn key(name: &'static str, description: &'static str) -> StatKey {
    StatKey {
        name,
        description,
        zero_default: false,
    }
}

/// Every statistic a record may carry.
pub const STAT_KEYS: &[StatKey] = &[
    key("m", "edge count"),
    key("m1", "critical edge count"),
    key("m2", "non-critical edge count"),
    key("z", "number of proper 2-colorings"),
    key("ln1p_z_per_n", "ln(1 + Z) / n"),
    key("z_equitable", "number of equitable proper 2-colorings"),
    key("z_b[]", "partition function at inverse temperature b"),
    StatKey {
        name: "support_frac[]",
        description: "fraction of vertices supporting exactly l edges",
        zero_default: true,
    },
    key("u_frac", "|U| / n"),
    key("s0_frac", "|S0| / n"),
    key("s1_frac", "|S1| / n"),
    key("extra_edges_frac", "(|H_U| - |S1|) / n"),
    key("core_frac", "|C| / n"),
    key("attached_frac", "|A| / n"),
    key("s0_entropy_per_n", "|S0| ln 2 / n"),
    key("upper_per_n", "cluster entropy upper estimate / n"),
    key("lower_per_n", "cluster entropy lower estimate / n"),
    key("e2_matching", "matched pairs in the upper estimate"),
    key("exceptional", "size of the exceptional set in the lower estimate"),
];

/// True when `name` is in [`STAT_KEYS`], directly or as `family[index]`.
pub fn is_published_key(name: &str) -> bool {
    let family = match name.find('[') {
        Some(i) if name.ends_with(']') => format!("{}[]", &name[..i]),
        _ => name.to_string(),
    };
    STAT_KEYS.iter().any(|k| k.name == family)
}

fn zero_default(name: &str) -> bool {
    name.find('[')
        .map(|i| format!("{}[]", &name[..i]))
        .and_then(|f| STAT_KEYS.iter().find(|k| k.name == f))
        .is_some_and(|k| k.zero_default)
}

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub schema: u32,
    pub kind: ExperimentKind,
    pub model: ModelKind,
    pub k: usize,
    pub n: usize,
    pub grid_index: usize,
    /// `r` or `λ`.
    pub x: f64,
    pub trial: usize,
    pub seed: u64,
    pub stats: BTreeMap<String, f64>,
    pub error: Option<String>,
    pub timed_out: bool,
}

impl TrialRecord {
    pub fn ok(&self) -> bool {
        self.error.is_none() && !self.timed_out
    }
}

fn sample_model<R: Rng + ?Sized>(
    cfg: &ExperimentConfig,
    m: usize,
    rng: &mut R,
) -> Result<(Hypergraph, Option<Coloring>)> {
    let (n, k) = (cfg.n, cfg.k);
    match cfg.model {
        ModelKind::Uniform => Ok((sample_uniform(n, m, k, rng)?, None)),
        ModelKind::Planted => {
            let s = Coloring::random_equitable(n, rng)?;
            Ok((sample_planted(n, m, k, &s, rng)?, Some(s)))
        }
        ModelKind::PlantedCritical => {
            let s = Coloring::random_equitable(n, rng)?;
            let m1 = ((1.0 + cfg.beta) * critical_fraction(k as u32) * m as f64).round() as usize;
            let m1 = m1.min(m);
            Ok((sample_planted_critical(n, m1, m - m1, k, &s, rng)?, Some(s)))
        }
        ModelKind::BinomialPlanted => {
            let s = Coloring::random_equitable(n, rng)?;
            let pool = crate::model::pool_sizes(n, k, &s).0;
            let p = (m as f64 / pool).min(1.0);
            Ok((sample_binomial_planted(n, p, k, &s, BinomialMode::CountThenSample, rng)?, Some(s)))
        }
    }
}

/// Draws `m2` non-critical bichromatic edges one at a time and keeps only those
/// that can constrain the whitening set; nothing else is stored.
fn stream_relevant<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    m2: usize,
    sigma: &Coloring,
    in_u: &[bool],
    rng: &mut R,
) -> Result<Vec<Vec<u32>>> {
    let mut kept = Vec::new();
    let mut e = Vec::with_capacity(k);
    let cap = (m2 as u64).saturating_mul(crate::model::DRAWS_PER_EDGE).max(1);
    let mut draws = 0u64;
    for accepted in 0..m2 {
        loop {
            draws += 1;
            if draws > cap {
                return Err(LabError::DrawCap {
                    cap,
                    accepted,
                    context: "streamed non-critical edges",
                });
            }
            e.clear();
            e.extend(index::sample(rng, n, k).into_iter().map(|v| v as u32));
            if matches!(edge_class(&e, sigma), EdgeClass::OtherBichromatic) {
                break;
            }
        }
        if is_relevant_noncritical(&e, in_u, sigma) {
            let mut s = e.clone();
            s.sort_unstable();
            kept.push(s);
        }
    }
    Ok(kept)
}

/// Cluster estimates for a planted-critical instance whose non-critical part
/// is streamed instead of stored.
pub fn planted_critical_cluster_bounds<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    m1: usize,
    m2: usize,
    sigma: &Coloring,
    rng: &mut R,
) -> Result<ClusterBounds> {
    let h1 = sample_planted_critical(n, m1, 0, k, sigma, rng)?;
    let wr = whiten(&h1, sigma)?;
    let relevant = stream_relevant(n, k, m2, sigma, &wr.in_u(), rng)?;
    Ok(cluster_bounds_from_parts(&wr, &relevant))
}

fn lambda_split(cfg: &ExperimentConfig, lambda: f64) -> (usize, usize) {
    let m1 = (lambda * cfg.n as f64).round() as usize;
    let m2 = cfg
        .fill_to_r
        .map(|r| ((r * cfg.n as f64).round() as usize).saturating_sub(m1))
        .unwrap_or(0);
    (m1, m2)
}

fn trial_stats(cfg: &ExperimentConfig, g: usize, seed_index: u64) -> Result<BTreeMap<String, f64>> {
    let mut rng = trial_rng(cfg.master_seed, seed_index);
    let n = cfg.n as f64;
    let mut st = BTreeMap::new();
    let mut put = |k: &str, v: f64| {
        st.insert(k.to_string(), v);
    };
    match cfg.kind {
        ExperimentKind::MomentCheck | ExperimentKind::CondensationScan => {
            let m = cfg.edge_count(g);
            let (h, _) = sample_model(cfg, m, &mut rng)?;
            put("m", m as f64);
            let z = if cfg.b_list.is_empty() {
                Counter::new(&h)?.count()
            } else {
                let c = solution_census(&h, &cfg.b_list)?;
                for (b, zb) in &c.z_b {
                    put(&format!("z_b[{b}]"), *zb);
                }
                put("z_equitable", c.z_equitable as f64);
                c.z
            };
            put("z", z as f64);
            put("ln1p_z_per_n", (z as f64).ln_1p() / n);
        }
        ExperimentKind::DegreeLaw | ExperimentKind::USize => {
            let (m1, m2) = lambda_split(cfg, cfg.grid[g]);
            let sigma = Coloring::random_equitable(cfg.n, &mut rng)?;
            let h = sample_planted_critical(cfg.n, m1, m2, cfg.k, &sigma, &mut rng)?;
            put("m1", m1 as f64);
            put("m2", m2 as f64);
            let w = whiten(&h, &sigma)?;
            if cfg.kind == ExperimentKind::DegreeLaw {
                let max = w.support.iter().copied().max().unwrap_or(0) as usize;
                let mut hist = vec![0usize; max + 1];
                for &s in &w.support {
                    hist[s as usize] += 1;
                }
                for (l, c) in hist.iter().enumerate() {
                    put(&format!("support_frac[{l}]"), *c as f64 / n);
                }
            } else {
                put("u_frac", w.u.len() as f64 / n);
                put("s0_frac", w.s0.len() as f64 / n);
                put("s1_frac", w.s1.len() as f64 / n);
                put("extra_edges_frac", w.extra_edges as f64 / n);
                let c = core(&h, &sigma, cfg.l)?;
                let a = attach(&h, &sigma, &c.c)?;
                put("core_frac", c.c.len() as f64 / n);
                put("attached_frac", a.a.len() as f64 / n);
            }
        }
        ExperimentKind::ClusterEntropyScan => {
            let (m1, m2) = lambda_split(cfg, cfg.grid[g]);
            let sigma = Coloring::random_equitable(cfg.n, &mut rng)?;
            let b = planted_critical_cluster_bounds(cfg.n, cfg.k, m1, m2, &sigma, &mut rng)?;
            put("m1", m1 as f64);
            put("m2", m2 as f64);
            put("s0_entropy_per_n", b.s0 as f64 * std::f64::consts::LN_2 / n);
            put("upper_per_n", b.upper_per_n);
            put("lower_per_n", b.lower_per_n);
            put("e2_matching", b.e2_matching as f64);
            put("exceptional", b.exceptional as f64);
        }
    }
    Ok(st)
}

fn run_one(cfg: &ExperimentConfig, g: usize, x: f64, trial: usize) -> TrialRecord {
    let seed_index = (g * cfg.trials + trial) as u64;
    let start = Instant::now();
    let result = trial_stats(cfg, g, seed_index);
    let timed_out = cfg
        .time_budget_secs
        .is_some_and(|b| start.elapsed().as_secs_f64() > b);
    let (stats, error) = match result {
        Ok(s) if !timed_out => (s, None),
        Ok(_) => (BTreeMap::new(), None),
        Err(e) => (BTreeMap::new(), Some(e.to_string())),
    };
    TrialRecord {
        schema: SCHEMA,
        kind: cfg.kind,
        model: cfg.model,
        k: cfg.k,
        n: cfg.n,
        grid_index: g,
        x,
        trial,
        seed: crate::model::hash64(cfg.master_seed, seed_index),
        stats,
        error,
        timed_out,
    }
}

/// Runs every trial, handing records to `sink` in grid-then-trial order as
/// each grid point completes.
pub fn run_trials_with_sink<F: FnMut(&TrialRecord)>(cfg: &ExperimentConfig, mut sink: F) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| LabError::param(format!("worker pool: {e}")))?;
    let points = cfg.points();
    let mut out = Vec::with_capacity(points.len() * cfg.trials);
    for (g, &x) in points.iter().enumerate() {
        let batch: Vec<TrialRecord> =
            pool.install(|| (0..cfg.trials).into_par_iter().map(|t| run_one(cfg, g, x, t)).collect());
        for r in &batch {
            sink(r);
        }
        out.extend(batch);
    }
    Ok(out)
}

pub fn run_trials(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    run_trials_with_sink(cfg, |_| {})
}

/// One row of an aggregated curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub r_or_lambda: f64,
    pub statistic: String,
    pub mean: f64,
    pub stderr: f64,
    pub analytic_value: Option<f64>,
}

pub const CURVE_HEADER: &str = "r_or_lambda,statistic,mean,stderr,analytic_value";

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV in the curve schema; floats carry 17 significant digits.
pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(r.r_or_lambda),
            r.statistic,
            fmt_f64(r.mean),
            fmt_f64(r.stderr),
            r.analytic_value.map(fmt_f64).unwrap_or_default()
        ));
    }
    out
}

/// Mean and standard error of a sample; zero error for a single value.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let t = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / t;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (t - 1.0);
    (mean, (var / t).sqrt())
}

/// Prediction for a statistic at grid value `x`, where one exists.
pub fn analytic_value(cfg: &ExperimentConfig, x: f64, m: Option<usize>, statistic: &str) -> Option<f64> {
    let k = cfg.k as u32;
    let kf = cfg.k as f64;
    let ln2 = std::f64::consts::LN_2;
    if cfg.lambda_grid() {
        let l = x;
        return match statistic {
            "s0_frac" => Some((-l).exp()),
            "s1_frac" => Some(l * (kf - 1.0) * (-2.0 * l).exp()),
            "u_frac" => Some((-l).exp() + l * (kf - 1.0) * (-2.0 * l).exp()),
            "s0_entropy_per_n" => Some((-l).exp() * ln2),
            "upper_per_n" => Some(cluster_upper_rate(k, l)),
            "lower_per_n" => Some(local_cluster_rate(k, l)),
            "m1" => Some((l * cfg.n as f64).round()),
            s if s.starts_with("support_frac[") => {
                let i: u32 = s["support_frac[".len()..s.len() - 1].parse().ok()?;
                Some(poisson_pmf(l, i))
            }
            _ => None,
        };
    }
    let m = m? as u64;
    let n = cfg.n as u64;
    match (statistic, cfg.model) {
        ("z", ModelKind::Uniform) => ln_exact_first_moment(n, m, k).ok().map(f64::exp),
        // Jensen reference: E ln(1+Z) <= ln(1 + E Z)
        ("ln1p_z_per_n", ModelKind::Uniform) => {
            ln1p_expected_z(cfg.n, m as usize, cfg.k).ok().map(|v| v / cfg.n as f64)
        }
        ("m", _) => Some(m as f64),
        _ => None,
    }
}

/// `ln(1 + E Z)`; exact at `m = 0`, where `E Z = 2^n`.
fn ln1p_expected_z(n: usize, m: usize, k: usize) -> Result<f64> {
    if m == 0 {
        return Ok(2f64.powi(n as i32).ln_1p());
    }
    Ok(ln1p_exp(ln_exact_first_moment(n as u64, m as u64, k as u32)?))
}

/// `ln(1 + e^x)` without overflow.
fn ln1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Pure fold of records into curve rows, sorted by grid point then statistic.
pub fn aggregate(cfg: &ExperimentConfig, records: &[TrialRecord]) -> Vec<CurveRow> {
    let points = cfg.points();
    let mut groups: BTreeMap<(usize, String), Vec<f64>> = BTreeMap::new();
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for r in records.iter().filter(|r| r.ok()) {
        *counts.entry(r.grid_index).or_default() += 1;
        for (k, v) in &r.stats {
            groups.entry((r.grid_index, k.clone())).or_default().push(*v);
        }
    }
    let mut rows = Vec::new();
    for ((g, stat), mut xs) in groups {
        if zero_default(&stat) {
            xs.resize(counts[&g], 0.0);
        }
        let (mean, stderr) = mean_stderr(&xs);
        let m = (!cfg.lambda_grid()).then(|| cfg.edge_count(g));
        rows.push(CurveRow {
            r_or_lambda: points[g],
            analytic_value: analytic_value(cfg, points[g], m, &stat),
            statistic: stat,
            mean,
            stderr,
        });
    }
    rows
}

/// One grid point of the condensation scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondensationPoint {
    pub r: f64,
    pub m: usize,
    pub trials: usize,
    /// Mean of `ln(1 + Z) / n`.
    pub mean: f64,
    pub stderr: f64,
    /// `ln(1 + E Z) / n`.
    pub rate: f64,
    /// `rate - mean`.
    pub gap: f64,
    /// `gap >= -3 stderr`.
    pub jensen_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondensationCurve {
    pub k: usize,
    pub n: usize,
    pub points: Vec<CondensationPoint>,
    pub r_second: f64,
    pub r_cond: f64,
    pub r_first: f64,
}

impl CondensationCurve {
    pub fn to_rows(&self) -> Vec<CurveRow> {
        let mut rows = Vec::new();
        for p in &self.points {
            let row = |s: &str, mean: f64, stderr: f64, a: Option<f64>| CurveRow {
                r_or_lambda: p.r,
                statistic: s.to_string(),
                mean,
                stderr,
                analytic_value: a,
            };
            rows.push(row("ln1p_z_per_n", p.mean, p.stderr, Some(p.rate)));
            rows.push(row("gap", p.gap, p.stderr, Some(0.0)));
            rows.push(row("jensen_ok", f64::from(u8::from(p.jensen_ok)), 0.0, None));
            rows.push(row("r_second", self.r_second, 0.0, Some(self.r_second)));
            rows.push(row("r_cond", self.r_cond, 0.0, Some(self.r_cond)));
            rows.push(row("r_first", self.r_first, 0.0, Some(self.r_first)));
        }
        rows
    }

    pub fn to_csv(&self) -> String {
        curve_csv(&self.to_rows())
    }
}

/// Exact `ln(1+Z)/n` on uniform instances against `ln(1 + E Z)/n`.
pub fn condensation_scan(k: usize, n: usize, r_grid: &[f64], trials: usize, seed: u64) -> Result<CondensationCurve> {
    let mut cfg = ExperimentConfig::new(ExperimentKind::CondensationScan, ModelKind::Uniform, k, n, trials, seed);
    cfg.grid = r_grid.to_vec();
    condensation_scan_with(&cfg)
}

pub fn condensation_scan_with(cfg: &ExperimentConfig) -> Result<CondensationCurve> {
    if cfg.kind != ExperimentKind::CondensationScan || cfg.model != ModelKind::Uniform {
        return Err(LabError::param("condensation scan runs condensation_scan on the uniform model"));
    }
    let records = run_trials(cfg)?;
    let mut points = Vec::new();
    for (g, &r) in cfg.points().iter().enumerate() {
        let zs: Vec<u64> = records
            .iter()
            .filter(|t| t.grid_index == g && t.ok())
            .map(|t| t.stats["z"] as u64)
            .collect();
        if zs.is_empty() {
            return Err(LabError::domain(format!("every trial failed at r = {r}")));
        }
        let ys: Vec<f64> = zs.iter().map(|&z| (z as f64).ln_1p() / cfg.n as f64).collect();
        let (mean, stderr) = mean_stderr(&ys);
        let m = cfg.edge_count(g);
        let rate = ln1p_expected_z(cfg.n, m, cfg.k)? / cfg.n as f64;
        let gap = rate - mean;
        points.push(CondensationPoint {
            r,
            m,
            trials: zs.len(),
            mean,
            stderr,
            rate,
            gap,
            jensen_ok: gap >= -3.0 * stderr,
        });
    }
    let k = cfg.k as u32;
    Ok(CondensationCurve {
        k: cfg.k,
        n: cfg.n,
        points,
        r_second: r_second(k),
        r_cond: r_cond(k),
        r_first: r_first(k),
    })
}

/// Monte-Carlo mean of the exact count over trials, with its moment summary.
pub fn moment_check(n: usize, m: usize, k: usize, trials: usize, seed: u64) -> Result<crate::exact::MomentEstimate> {
    let mut cfg = ExperimentConfig::new(ExperimentKind::MomentCheck, ModelKind::Uniform, k, n, trials, seed);
    cfg.edges = vec![m];
    let records = run_trials(&cfg)?;
    let zs: Vec<u64> = records.iter().filter(|t| t.ok()).map(|t| t.stats["z"] as u64).collect();
    Ok(moments(&zs))
}

/// Cluster-entropy curves over a `λ` grid.
pub fn cluster_entropy_scan(
    k: usize,
    n: usize,
    lambda_grid: &[f64],
    trials: usize,
    seed: u64,
    fill_to_r: Option<f64>,
) -> Result<Vec<CurveRow>> {
    let mut cfg =
        ExperimentConfig::new(ExperimentKind::ClusterEntropyScan, ModelKind::PlantedCritical, k, n, trials, seed);
    cfg.grid = lambda_grid.to_vec();
    cfg.fill_to_r = fill_to_r;
    cluster_entropy_scan_with(&cfg)
}

pub fn cluster_entropy_scan_with(cfg: &ExperimentConfig) -> Result<Vec<CurveRow>> {
    if cfg.kind != ExperimentKind::ClusterEntropyScan {
        return Err(LabError::param("expected a cluster_entropy_scan configuration"));
    }
    let records = run_trials(cfg)?;
    let mut rows = aggregate(cfg, &records);
    let k = cfg.k as u32;
    for &l in &cfg.grid {
        rows.push(CurveRow {
            r_or_lambda: l,
            statistic: "first_moment_rate".into(),
            mean: f64::NAN,
            stderr: 0.0,
            analytic_value: Some(first_moment_rate(k, density_for_lambda(k, l))),
        });
    }
    rows.sort_by(|a, b| a.r_or_lambda.total_cmp(&b.r_or_lambda).then(a.statistic.cmp(&b.statistic)));
    Ok(rows)
}

/// Density `r` whose expected support degree is `λ`: `λ (2^(k-1) - 1) / k`.
pub fn density_for_lambda(k: u32, lambda: f64) -> f64 {
    lambda / critical_fraction(k)
}

/// Grid bracket and refined root of a sign change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub lo: f64,
    pub hi: f64,
    pub root: f64,
}

/// First sign change of `f` along `grid`, refined by bisection.
pub fn find_crossing<F: Fn(f64) -> f64>(f: F, grid: &[f64]) -> Option<Crossing> {
    grid.windows(2).find_map(|w| {
        let (a, b) = (f(w[0]), f(w[1]));
        if a == 0.0 || a.signum() != b.signum() {
            bisect(&f, w[0], w[1], 1e-12).map(|root| Crossing { lo: w[0], hi: w[1], root })
        } else {
            None
        }
    })
}

/// Where the analytic cluster upper curve meets the first-moment rate at the
/// matching density.
pub fn cluster_first_moment_crossing(k: u32, lambda_grid: &[f64]) -> Option<Crossing> {
    find_crossing(
        |l| cluster_upper_rate(k, l) - first_moment_rate(k, density_for_lambda(k, l)),
        lambda_grid,
    )
}

/// JSON lines, one record per line.
pub fn records_jsonl(records: &[TrialRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).map_err(|e| LabError::domain(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_hypergraph_counts_everything() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::MomentCheck, ModelKind::Uniform, 3, 10, 1, 1);
        cfg.edges = vec![0];
        let recs = run_trials(&cfg).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].stats["z"], 1024.0);
    }

    #[test]
    fn published_keys() {
        assert!(is_published_key("z"));
        assert!(is_published_key("support_frac[3]"));
        assert!(is_published_key("z_b[0.5]"));
        assert!(!is_published_key("runtime"));
        assert!(!is_published_key("support_frac"));
    }

    #[test]
    fn validation() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::DegreeLaw, ModelKind::PlantedCritical, 3, 11, 1, 1);
        cfg.grid = vec![1.0];
        assert!(cfg.validate().is_err());
        cfg.n = 12;
        assert!(cfg.validate().is_ok());
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
        cfg.trials = 1;
        cfg.grid.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn failures_are_recorded() {
        // far more critical edges than exist on 8 vertices
        let mut cfg = ExperimentConfig::new(ExperimentKind::USize, ModelKind::PlantedCritical, 3, 8, 2, 1);
        cfg.grid = vec![100.0];
        let recs = run_trials(&cfg).unwrap();
        assert_eq!(recs.len(), 2);
        assert!(recs.iter().all(|r| r.error.is_some() && r.stats.is_empty()));
        assert!(aggregate(&cfg, &recs).is_empty());
    }

    #[test]
    fn crossing_of_a_line() {
        let grid: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let c = find_crossing(|x| x - 0.33, &grid).unwrap();
        assert_eq!((c.lo, c.hi), (0.30000000000000004, 0.4));
        assert!((c.root - 0.33).abs() < 1e-11);
        assert!(find_crossing(|x| x + 1.0, &grid).is_none());
    }

    #[test]
    fn mean_and_stderr() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_stderr(&[7.0]), (7.0, 0.0));
    }
}
