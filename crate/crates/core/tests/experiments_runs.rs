use condlab::analytic::{cluster_upper_rate, poisson_pmf, r_cond, r_first, r_second};
use condlab::experiments::*;
use condlab::model::trial_rng;
use condlab::Coloring;

const LN2: f64 = std::f64::consts::LN_2;

#[test]
fn zero_edges_give_zero_gap() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::CondensationScan, ModelKind::Uniform, 3, 12, 3, 9);
    cfg.edges = vec![0];
    let curve = condensation_scan_with(&cfg).unwrap();
    assert_eq!(curve.points[0].gap, 0.0);
    assert_eq!(curve.points[0].stderr, 0.0);
}

#[test]
fn condensation_csv_carries_reference_lines() {
    let curve = condensation_scan(3, 10, &[0.5, 1.0], 5, 4).unwrap();
    let csv = curve.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CURVE_HEADER));
    for (name, value) in [("r_second", r_second(3)), ("r_cond", r_cond(3)), ("r_first", r_first(3))] {
        let rows: Vec<&str> = csv.lines().filter(|l| l.split(',').nth(1) == Some(name)).collect();
        assert_eq!(rows.len(), 2, "{name}");
        let analytic: f64 = rows[0].split(',').nth(4).unwrap().parse().unwrap();
        assert_eq!(analytic, value);
    }
}

#[test]
fn same_seed_same_bytes() {
    let a = condensation_scan(3, 12, &[0.5, 1.5], 20, 77).unwrap().to_csv();
    let b = condensation_scan(3, 12, &[0.5, 1.5], 20, 77).unwrap().to_csv();
    assert_eq!(a, b);
    let c = condensation_scan(3, 12, &[0.5, 1.5], 20, 78).unwrap().to_csv();
    assert_ne!(a, c);

    let mut cfg = ExperimentConfig::new(ExperimentKind::USize, ModelKind::PlantedCritical, 5, 2000, 4, 3);
    cfg.grid = vec![1.0, 2.0];
    cfg.workers = Some(1);
    let one = records_jsonl(&run_trials(&cfg).unwrap()).unwrap();
    cfg.workers = Some(3);
    let three = records_jsonl(&run_trials(&cfg).unwrap()).unwrap();
    assert_eq!(one, three);
}

#[test]
fn degree_law_records_are_complete() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::DegreeLaw, ModelKind::PlantedCritical, 4, 400, 100, 5);
    cfg.grid = vec![2.0];
    let mut streamed = 0;
    let recs = run_trials_with_sink(&cfg, |_| streamed += 1).unwrap();
    assert_eq!(recs.len(), 100);
    assert_eq!(streamed, 100);
    for r in &recs {
        assert!(r.ok());
        assert_eq!(r.schema, SCHEMA);
        let total: f64 = r.stats.iter().filter(|(k, _)| k.starts_with("support_frac[")).map(|(_, v)| v).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(r.stats.keys().all(|k| is_published_key(k)));
    }
    let rows = aggregate(&cfg, &recs);
    let p0 = rows.iter().find(|r| r.statistic == "support_frac[0]").unwrap();
    assert_eq!(p0.analytic_value, Some(poisson_pmf(2.0, 0)));
}

#[test]
fn degree_law_at_k7() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::DegreeLaw, ModelKind::PlantedCritical, 7, 100_000, 4, 11);
    let lambda = 7.0 * LN2;
    cfg.grid = vec![lambda];
    let rows = aggregate(&cfg, &run_trials(&cfg).unwrap());
    for l in 0..=5u32 {
        let row = rows.iter().find(|r| r.statistic == format!("support_frac[{l}]")).unwrap();
        assert!((row.mean - poisson_pmf(lambda, l)).abs() <= 0.005, "l={l}: {}", row.mean);
    }
}

#[test]
fn moment_check_trivial_and_seeded() {
    let est = moment_check(8, 0, 3, 1, 0).unwrap();
    assert_eq!(est.mean, 256.0);
    let a = moment_check(10, 12, 3, 50, 2).unwrap();
    let b = condlab::exact::mean_z_over_trials(10, 12, 3, 50, 2).unwrap();
    assert_eq!(a, b);
}

#[test]
fn cluster_entropy_vanishes_at_large_lambda() {
    let rows = cluster_entropy_scan(5, 2000, &[30.0], 2, 1, None).unwrap();
    let s0 = rows.iter().find(|r| r.statistic == "s0_entropy_per_n").unwrap();
    assert_eq!(s0.mean, 0.0);
    let up = rows.iter().find(|r| r.statistic == "upper_per_n").unwrap();
    assert!(up.mean.abs() < 1e-12);
}

#[test]
fn support_free_entropy_tracks_poisson_at_k10() {
    let grid = [5.0, 6.0, 7.0, 8.0, 9.0];
    let rows = cluster_entropy_scan(10, 100_000, &grid, 3, 21, None).unwrap();
    for &l in &grid {
        let r = rows
            .iter()
            .find(|r| r.r_or_lambda == l && r.statistic == "s0_entropy_per_n")
            .unwrap();
        let want = (-l).exp() * LN2;
        let tol = (0.1 * want).max(3.0 * r.stderr);
        assert!((r.mean - want).abs() <= tol, "lambda {l}: {} vs {want}", r.mean);
    }
}

#[test]
fn analytic_crossing_brackets_the_condensation_density() {
    for k in [10u32, 15] {
        let target = k as f64 * LN2;
        let grid: Vec<f64> = (0..=1200).map(|i| 1.0 + 0.05 * i as f64).collect();
        let c = cluster_first_moment_crossing(k, &grid).unwrap();
        assert!(c.lo <= c.root && c.root <= c.hi);
        assert!(c.lo >= 0.9 * target && c.hi <= 1.1 * target, "k={k}: {c:?}");
    }
}

#[test]
fn streamed_upper_estimate_near_prediction() {
    let (n, k) = (100_000usize, 10usize);
    let lambda = 10.0 * LN2;
    let m1 = (lambda * n as f64).round() as usize;
    let m2 = (r_cond(10) * n as f64).round() as usize - m1;
    let mut uppers = Vec::new();
    for seed in 0..10u64 {
        let mut rng = trial_rng(1000 + seed, 0);
        let sigma = Coloring::random_equitable(n, &mut rng).unwrap();
        let b = planted_critical_cluster_bounds(n, k, m1, m2, &sigma, &mut rng).unwrap();
        assert!(b.lower_per_n <= b.upper_per_n);
        uppers.push(b.upper_per_n);
    }
    let mean = uppers.iter().sum::<f64>() / uppers.len() as f64;
    let want = cluster_upper_rate(10, lambda);
    assert!((mean / want - 1.0).abs() <= 0.2, "{mean} vs {want}");
}
