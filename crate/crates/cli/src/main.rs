use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use condlab::analytic::{pair_rate, psi, thresholds};
use condlab::exact::{distance_profile, geometry_verdict, solution_census};
use condlab::experiments::{
    aggregate, cluster_entropy_scan_with, condensation_scan_with, curve_csv, run_trials, CurveRow,
    ExperimentConfig, ExperimentKind, ModelKind,
};
use condlab::model::{
    sample_binomial_planted, sample_planted, sample_planted_critical, sample_uniform, trial_rng, BinomialMode,
};
use condlab::whitening::{
    attach, cluster_entropy_bounds, core, residual_census, u_census, whiten, DEFAULT_L,
};
use condlab::{Coloring, Hypergraph, LabError};

/// Seed used when `--seed` is absent.
const DEFAULT_SEED: u64 = 20_130_611;

#[derive(Parser, Debug)]
#[command(
    name = "condlab",
    version,
    about = "Condensation experiments for random hypergraph 2-coloring",
    args_override_self = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case", tag = "subcommand")]
enum Cmd {
    /// Density thresholds for one k.
    Thresholds(ThresholdsArgs),
    /// The rate function psi(x) on a grid of x.
    RateCurve(RateCurveArgs),
    /// The pair rate g(alpha) on a grid of alpha.
    PairCurve(PairCurveArgs),
    /// Draw one hypergraph.
    Sample(SampleArgs),
    /// Exact solution census of a small hypergraph.
    Count(CountArgs),
    /// Distance profile and cluster verdict around a coloring.
    Profile(ProfileArgs),
    /// Whitening set, its census and the cluster entropy bounds.
    Whiten(WhitenArgs),
    /// Core and attachment sets.
    Core(CoreArgs),
    /// Residual component census outside the core.
    Census(CoreArgs),
    /// Jensen-gap scan over a density grid on exactly counted instances.
    ScanCondensation(ScanCondensationArgs),
    /// Cluster entropy bounds over a support-density grid.
    ScanCluster(LambdaScanArgs),
    /// Support-degree law over a support-density grid.
    DegreeLaw(LambdaScanArgs),
}

#[derive(Args, Debug, Serialize)]
struct Common {
    /// Master seed.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads for trial batches.
    #[arg(long, env = "CONDENSATION_LAB_WORKERS")]
    workers: Option<usize>,
    /// JSON file with the same keys as the flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Serialize)]
struct ThresholdsArgs {
    #[arg(long)]
    k: u32,
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
}

#[derive(Args, Debug, Serialize)]
struct RateCurveArgs {
    #[arg(long)]
    k: u32,
    #[arg(long)]
    r: f64,
    /// Interior grid points of (0, 1).
    #[arg(long, default_value_t = 1000)]
    points: usize,
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
}

#[derive(Args, Debug, Serialize)]
struct PairCurveArgs {
    #[arg(long)]
    k: u32,
    #[arg(long)]
    r: f64,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    #[arg(long, default_value_t = 200)]
    points: usize,
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Model {
    Uniform,
    Planted,
    PlantedCritical,
    BinomialPlanted,
}

#[derive(Args, Debug, Serialize)]
struct SampleArgs {
    #[arg(long, value_enum, default_value_t = Model::Uniform)]
    model: Model,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    /// Edge count; the critical part for planted-critical.
    #[arg(long, default_value_t = 0)]
    m: usize,
    /// Non-critical bichromatic edges for planted-critical.
    #[arg(long, default_value_t = 0)]
    m2: usize,
    /// Edge probability for binomial-planted.
    #[arg(long, default_value_t = 0.0)]
    p: f64,
    /// Where to write the planted coloring.
    #[arg(long)]
    sigma_out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
}

#[derive(Args, Debug, Serialize)]
struct CountArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Inverse temperatures for Z_b.
    #[arg(long, value_delimiter = ',')]
    b: Vec<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
}

#[derive(Args, Debug, Serialize)]
struct Instance {
    #[arg(long = "in")]
    input: PathBuf,
    /// Reference coloring file; the canonical equitable coloring when absent.
    #[arg(long)]
    sigma: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct ProfileArgs {
    #[command(flatten)]
    #[serde(flatten)]
    instance: Instance,
    #[arg(long)]
    equitable_only: bool,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 0.4)]
    beta: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Table {
    Census,
    Trace,
}

#[derive(Args, Debug, Serialize)]
struct WhitenArgs {
    #[command(flatten)]
    #[serde(flatten)]
    instance: Instance,
    /// CSV table to emit.
    #[arg(long, value_enum, default_value_t = Table::Census)]
    table: Table,
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
}

#[derive(Args, Debug, Serialize)]
struct CoreArgs {
    #[command(flatten)]
    #[serde(flatten)]
    instance: Instance,
    #[arg(long, default_value_t = DEFAULT_L)]
    l: usize,
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
}

#[derive(Args, Debug, Serialize)]
struct ScanCondensationArgs {
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 24)]
    n: usize,
    #[arg(long, value_delimiter = ',')]
    r_grid: Vec<f64>,
    /// Explicit edge counts instead of a density grid.
    #[arg(long, value_delimiter = ',')]
    edges: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long)]
    time_budget: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
}

#[derive(Args, Debug, Serialize)]
struct LambdaScanArgs {
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Fill non-critical edges up to this total density.
    #[arg(long)]
    fill_to_r: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_L)]
    l: usize,
    #[arg(long)]
    time_budget: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
}

impl Cmd {
    fn common(&self) -> &Common {
        match self {
            Cmd::Thresholds(a) => &a.common,
            Cmd::RateCurve(a) => &a.common,
            Cmd::PairCurve(a) => &a.common,
            Cmd::Sample(a) => &a.common,
            Cmd::Count(a) => &a.common,
            Cmd::Profile(a) => &a.common,
            Cmd::Whiten(a) => &a.common,
            Cmd::Core(a) | Cmd::Census(a) => &a.common,
            Cmd::ScanCondensation(a) => &a.common,
            Cmd::ScanCluster(a) | Cmd::DegreeLaw(a) => &a.common,
        }
    }
}

/// Writes floats with 17 significant digits.
struct Sig17;

impl serde_json::ser::Formatter for Sig17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String, LabError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17);
    v.serialize(&mut ser).map_err(|e| LabError::Domain(e.to_string()))?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

fn f17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Expands `--config FILE` into flag tokens placed ahead of the command line,
/// so explicit flags override file values.
fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let mut path = None;
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = it.next().map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let text = fs::read_to_string(&path).map_err(|e| format!("reading {}: {e}", path.display()))?;
    let obj: serde_json::Map<String, Value> = serde_json::from_str(&text)
        .map_err(|e| format!("config {} must be a JSON object: {e}", path.display()))?;
    let explicit: Vec<String> = argv
        .iter()
        .skip(2)
        .filter_map(|a| a.to_str())
        .filter(|a| a.starts_with("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect();
    let mut injected = Vec::new();
    for (key, value) in obj {
        let flag = format!("--{}", key.replace('_', "-"));
        // list flags accumulate, so explicit ones must replace file values outright
        if explicit.contains(&flag) {
            continue;
        }
        match value {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => injected.push(flag.into()),
            Value::Array(items) => {
                let parts: Vec<String> = items.iter().map(scalar).collect::<Result<_, _>>()?;
                injected.push(flag.into());
                injected.push(parts.join(",").into());
            }
            other => {
                injected.push(flag.into());
                injected.push(scalar(&other)?.into());
            }
        }
    }
    // subcommand first, then file values, then the remaining flags
    let mut out = Vec::with_capacity(argv.len() + injected.len());
    out.extend(argv.iter().take(2).cloned());
    out.extend(injected);
    out.extend(argv.iter().skip(2).cloned());
    Ok(out)
}

fn scalar(v: &Value) -> Result<String, String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        other => Err(format!("unsupported config value {other}")),
    }
}

fn read_hypergraph(path: &Path) -> Result<Hypergraph, LabError> {
    Hypergraph::from_text(&fs::read_to_string(path)?)
}

fn read_instance(inst: &Instance) -> Result<(Hypergraph, Coloring), LabError> {
    let h = read_hypergraph(&inst.input)?;
    let sigma = match &inst.sigma {
        Some(p) => {
            let text = fs::read_to_string(p)?;
            let line = text
                .lines()
                .map(str::trim)
                .find(|l| !l.is_empty() && !l.starts_with('#'))
                .unwrap_or("");
            line.parse::<Coloring>()?
        }
        None => Coloring::canonical_equitable(h.n())?,
    };
    if sigma.len() != h.n() {
        return Err(LabError::Parameter(format!(
            "coloring has length {}, hypergraph has {} vertices",
            sigma.len(),
            h.n()
        )));
    }
    Ok((h, sigma))
}

/// What a subcommand produced, before formatting.
struct Output {
    json: Value,
    csv: String,
}

fn value<T: Serialize>(v: &T) -> Result<Value, LabError> {
    serde_json::to_value(v).map_err(|e| LabError::Domain(e.to_string()))
}

fn grid(points: usize) -> Vec<f64> {
    (1..=points).map(|i| i as f64 / (points + 1) as f64).collect()
}

fn scan_config(kind: ExperimentKind, model: ModelKind, k: usize, n: usize, trials: usize, c: &Common) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(kind, model, k, n, trials, c.seed);
    cfg.workers = c.workers;
    cfg
}

fn curve_output(rows: &[CurveRow]) -> Result<Output, LabError> {
    Ok(Output {
        json: value(&rows)?,
        csv: curve_csv(rows),
    })
}

fn run(cmd: &Cmd) -> Result<Output, LabError> {
    match cmd {
        Cmd::Thresholds(a) => {
            let t = thresholds(a.k)?;
            let mut csv = String::from("quantity,value\n");
            let mut row = |name: &str, x: Option<f64>| {
                csv.push_str(&format!("{name},{}\n", x.map(f17).unwrap_or_default()));
            };
            row("r_second", Some(t.r_second));
            row("r_second_asymptotic", Some(t.r_second_asymptotic));
            row("r_cond", Some(t.r_cond));
            row("r_crit", t.r_crit);
            row("r_conjectured", Some(t.r_conjectured));
            row("r_first_exact", Some(t.r_first_exact));
            row("r_first_asymptotic", Some(t.r_first_asymptotic));
            Ok(Output { json: value(&t)?, csv })
        }
        Cmd::RateCurve(a) => {
            let mut csv = String::from("x,psi\n");
            let mut pts = Vec::with_capacity(a.points);
            for x in grid(a.points) {
                let y = psi(a.k, a.r, x)?;
                csv.push_str(&format!("{},{}\n", f17(x), f17(y)));
                pts.push(serde_json::json!({ "x": x, "psi": y }));
            }
            Ok(Output { json: Value::Array(pts), csv })
        }
        Cmd::PairCurve(a) => {
            let mut csv = String::from("alpha,g\n");
            let mut pts = Vec::with_capacity(a.points);
            for x in grid(a.points) {
                let y = pair_rate(a.k, a.r, a.beta, x)?;
                csv.push_str(&format!("{},{}\n", f17(x), f17(y)));
                pts.push(serde_json::json!({ "alpha": x, "g": y }));
            }
            Ok(Output { json: Value::Array(pts), csv })
        }
        Cmd::Sample(a) => sample(a),
        Cmd::Count(a) => {
            let h = read_hypergraph(&a.input)?;
            let c = solution_census(&h, &a.b)?;
            let mut csv = String::from("mu,count\n");
            for (mu, n) in c.s_mu.iter().enumerate() {
                csv.push_str(&format!("{mu},{n}\n"));
            }
            Ok(Output { json: value(&c)?, csv })
        }
        Cmd::Profile(a) => {
            let (h, sigma) = read_instance(&a.instance)?;
            let p = distance_profile(&h, &sigma, a.equitable_only)?;
            let report = geometry_verdict(&p, a.alpha, a.beta, a.gamma)?;
            let mut csv = String::from("d,count\n");
            for (d, n) in p.counts.iter().enumerate() {
                csv.push_str(&format!("{d},{n}\n"));
            }
            Ok(Output { json: value(&report)?, csv })
        }
        Cmd::Whiten(a) => {
            let (h, sigma) = read_instance(&a.instance)?;
            let w = whiten(&h, &sigma)?;
            let census = u_census(&w, &h, &sigma)?;
            let bounds = cluster_entropy_bounds(&h, &sigma)?;
            let csv = match a.table {
                Table::Census => census.to_csv(),
                Table::Trace => w.trace_csv(),
            };
            let json = serde_json::json!({
                "whitening": value(&w)?,
                "census": value(&census)?,
                "bounds": value(&bounds)?,
            });
            Ok(Output { json, csv })
        }
        Cmd::Core(a) => {
            let (h, sigma) = read_instance(&a.instance)?;
            let c = core(&h, &sigma, a.l)?;
            let att = attach(&h, &sigma, &c.c)?;
            let mut in_c = vec![false; h.n()];
            let mut in_a = vec![false; h.n()];
            c.c.iter().for_each(|&v| in_c[v as usize] = true);
            att.a.iter().for_each(|&v| in_a[v as usize] = true);
            let mut csv = String::from("vertex,in_core,in_attachment\n");
            for v in 0..h.n() {
                csv.push_str(&format!("{v},{},{}\n", u8::from(in_c[v]), u8::from(in_a[v])));
            }
            Ok(Output { json: value(&att)?, csv })
        }
        Cmd::Census(a) => {
            let (h, sigma) = read_instance(&a.instance)?;
            let c = core(&h, &sigma, a.l)?;
            let census = residual_census(&h, &sigma, &c.c)?;
            let mut csv = String::from("form,multiplicity,vertex_count,edge_count,z_t\n");
            for t in &census.components {
                csv.push_str(&format!(
                    "\"{}\",{},{},{},{}\n",
                    t.form.replace('"', "\"\""),
                    t.multiplicity,
                    t.vertex_count,
                    t.edge_count,
                    t.z_t.map(|z| z.to_string()).unwrap_or_default()
                ));
            }
            let json = serde_json::json!({ "core_size": c.c.len(), "census": value(&census)? });
            Ok(Output { json, csv })
        }
        Cmd::ScanCondensation(a) => {
            let mut cfg = scan_config(ExperimentKind::CondensationScan, ModelKind::Uniform, a.k, a.n, a.trials, &a.common);
            cfg.grid = a.r_grid.clone();
            cfg.edges = a.edges.clone();
            cfg.time_budget_secs = a.time_budget;
            let curve = condensation_scan_with(&cfg)?;
            Ok(Output {
                json: value(&curve)?,
                csv: curve.to_csv(),
            })
        }
        Cmd::ScanCluster(a) | Cmd::DegreeLaw(a) => {
            let kind = if matches!(cmd, Cmd::ScanCluster(_)) {
                ExperimentKind::ClusterEntropyScan
            } else {
                ExperimentKind::DegreeLaw
            };
            let mut cfg = scan_config(kind, ModelKind::PlantedCritical, a.k, a.n, a.trials, &a.common);
            cfg.grid = a.lambda_grid.clone();
            cfg.fill_to_r = a.fill_to_r;
            cfg.l = a.l;
            cfg.time_budget_secs = a.time_budget;
            let rows = if kind == ExperimentKind::ClusterEntropyScan {
                cluster_entropy_scan_with(&cfg)?
            } else {
                aggregate(&cfg, &run_trials(&cfg)?)
            };
            curve_output(&rows)
        }
    }
}

fn sample(a: &SampleArgs) -> Result<Output, LabError> {
    let mut rng = trial_rng(a.common.seed, 0);
    let (h, sigma) = match a.model {
        Model::Uniform => (sample_uniform(a.n, a.m, a.k, &mut rng)?, None),
        model => {
            let sigma = Coloring::random_equitable(a.n, &mut rng)?;
            let h = match model {
                Model::Planted => sample_planted(a.n, a.m, a.k, &sigma, &mut rng)?,
                Model::PlantedCritical => sample_planted_critical(a.n, a.m, a.m2, a.k, &sigma, &mut rng)?,
                _ => sample_binomial_planted(a.n, a.p, a.k, &sigma, BinomialMode::CountThenSample, &mut rng)?,
            };
            (h, Some(sigma))
        }
    };
    if let (Some(path), Some(s)) = (&a.sigma_out, &sigma) {
        fs::write(path, format!("{s}\n"))?;
    }
    let json = serde_json::json!({
        "hypergraph": h.to_text(),
        "sigma": sigma.map(|s| s.to_string()),
    });
    Ok(Output { json, csv: h.to_text() })
}

fn render(cmd: &Cmd, out: Output) -> Result<String, LabError> {
    let header = to_json(cmd)?;
    Ok(match cmd.common().format {
        Format::Csv => format!("# {header}\n{}", out.csv),
        Format::Json => {
            let doc = serde_json::json!({ "config": value(cmd)?, "result": out.json });
            let mut s = to_json(&doc)?;
            s.push('\n');
            s
        }
    })
}

fn execute(cmd: &Cmd) -> Result<(), LabError> {
    let out = run(cmd)?;
    let text = render(cmd, out)?;
    match &cmd.common().out {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let argv = match expand_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(&cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_tokens_precede_flags() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, r#"{"r_grid": [0.5, 1], "trials": 3, "equitable_only": true, "out": null}"#).unwrap();
        let ps = p.to_str().unwrap();
        let got = expand_config(os(&["condlab", "scan-condensation", "--config", ps, "--trials", "9"])).unwrap();
        assert_eq!(
            got,
            os(&["condlab", "scan-condensation", "--equitable-only", "--r-grid", "0.5,1", "--config", ps, "--trials", "9"])
        );
        let plain = os(&["condlab", "thresholds", "--k", "3"]);
        assert_eq!(expand_config(plain.clone()).unwrap(), plain);
    }

    #[test]
    fn floats_keep_seventeen_digits() {
        assert_eq!(to_json(&0.1f64).unwrap(), "1.0000000000000001e-1");
        assert_eq!(f17(354.0), "3.5400000000000000e2");
    }
}
