use condlab::exact::*;
use condlab::model::{sample_planted, sample_uniform, trial_rng};
use condlab::{Coloring, Hypergraph};
use proptest::prelude::*;

fn proper(h: &Hypergraph, mask: u64) -> bool {
    h.edges().all(|e| {
        let ones = e.iter().filter(|&&v| (mask >> v) & 1 == 1).count();
        ones != 0 && ones != e.len()
    })
}

fn critical_edges(h: &Hypergraph, mask: u64) -> usize {
    h.edges()
        .filter(|e| {
            let ones = e.iter().filter(|&&v| (mask >> v) & 1 == 1).count();
            ones == 1 || ones == e.len() - 1
        })
        .count()
}

#[test]
fn distance_profile_against_naive_enumeration() {
    let n = 16;
    let sigma = Coloring::canonical_equitable(n).unwrap();
    let s = sigma.mask().unwrap();
    for seed in 0..4 {
        let h = sample_uniform(n, 40, 3, &mut trial_rng(seed, 0)).unwrap();
        let mut naive = vec![0u64; n + 1];
        for mask in 0..1u64 << n {
            if proper(&h, mask) {
                naive[(mask ^ s).count_ones() as usize] += 1;
            }
        }
        let p = distance_profile(&h, &sigma, false).unwrap();
        assert_eq!(p.counts, naive);
        assert_eq!(p.total(), count_solutions(&h).unwrap());
        for d in 0..=n {
            assert_eq!(p.counts[d], p.counts[n - d]);
        }
    }
}

#[test]
fn planted_reference_sits_at_distance_zero() {
    let n = 18;
    let mut rng = trial_rng(9, 0);
    let sigma = Coloring::random_equitable(n, &mut rng).unwrap();
    let h = sample_planted(n, 60, 4, &sigma, &mut rng).unwrap();
    let p = distance_profile(&h, &sigma, false).unwrap();
    assert!(p.reference_proper);
    assert_eq!(p.counts[0], 1);
    assert_eq!(p.counts[n], 1);
    let eq = distance_profile(&h, &sigma, true).unwrap();
    let census = solution_census(&h, &[]).unwrap();
    assert_eq!(eq.total(), census.z_equitable);
    assert!(eq.counts.iter().zip(&p.counts).all(|(a, b)| a <= b));
}

#[test]
fn critical_coloring_count_against_brute_force() {
    let n = 14;
    for seed in 0..5 {
        let h = sample_uniform(n, 12, 4, &mut trial_rng(seed, 1)).unwrap();
        for target in 0..=12u64 {
            let naive = (0..1u64 << n)
                .filter(|&x| {
                    x.count_ones() as usize == n / 2
                        && proper(&h, x)
                        && critical_edges(&h, x) as u64 == target
                })
                .count() as u64;
            assert_eq!(count_critical_colorings_at(&h, target).unwrap(), naive);
        }
    }
    // target = round((1 + beta) k m / (2^(k-1) - 1)) with ties upward
    assert_eq!(critical_target(4, 14, 0.0), 8);
    assert_eq!(critical_target(3, 3, 0.0), 3);
    assert_eq!(critical_target(3, 1, 0.5), 2);
    let odd = sample_uniform(5, 2, 3, &mut trial_rng(0, 0)).unwrap();
    assert!(count_critical_colorings(&odd, 0.0).is_err());
}

#[test]
fn geometry_verdicts() {
    let sigma = Coloring::canonical_equitable(10).unwrap();
    // every coloring is proper: no gap anywhere
    let empty = Hypergraph::empty(10, 3).unwrap();
    let p = distance_profile(&empty, &sigma, false).unwrap();
    assert_eq!(p.total(), 1024);
    let r = geometry_verdict(&p, 0.1, 0.4, 0.01).unwrap();
    assert_eq!(r.verdict, Verdict::Neither);
    assert!(!r.gap_found);

    // complete bipartite graph across the classes: only sigma and its complement survive
    let mut two = Vec::new();
    for &a in &sigma.class(0) {
        for &b in &sigma.class(1) {
            two.push(vec![a.min(b), a.max(b)]);
        }
    }
    let h = Hypergraph::new(10, 2, two).unwrap();
    let p = distance_profile(&h, &sigma, false).unwrap();
    assert_eq!(p.total(), 2);
    assert_eq!((p.counts[0], p.counts[10]), (1, 1));
    let r = geometry_verdict(&p, 0.1, 0.5, 0.0).unwrap();
    assert!(r.gap_found);
    assert_eq!(r.local_cluster_size, 1);
    assert_eq!(r.verdict, Verdict::Shattered);
    let r = geometry_verdict(&p, 0.1, 0.5, 2f64.ln() / 10.0).unwrap();
    assert_eq!(r.verdict, Verdict::Tie);
    let r = geometry_verdict(&p, 0.1, 0.5, 0.5).unwrap();
    assert_eq!(r.verdict, Verdict::Condensed);

    assert!(geometry_verdict(&p, 0.3, 0.2, 0.0).is_err());
    assert!(geometry_verdict(&p, 0.1, 0.6, 0.0).is_err());
}

#[test]
fn partition_function_limits() {
    let h = sample_uniform(12, 30, 3, &mut trial_rng(4, 4)).unwrap();
    let c = solution_census(&h, &[0.0, 50.0]).unwrap();
    assert_eq!(c.s_mu.iter().sum::<u64>(), 1 << 12);
    assert!((c.z_b[0].1 - 4096.0).abs() < 1e-9);
    assert!((c.z_b[1].1 - c.z as f64).abs() <= 1e-12 * 4096.0);
    // direct histogram
    let mut hist = vec![0u64; 31];
    for x in 0..1u64 << 12 {
        let mono = h
            .edges()
            .filter(|e| {
                let ones = e.iter().filter(|&&v| (x >> v) & 1 == 1).count();
                ones == 0 || ones == 3
            })
            .count();
        hist[mono] += 1;
    }
    assert_eq!(c.s_mu, hist);
}

#[test]
fn mean_z_matches_a_direct_average() {
    let (n, m, k, trials, seed) = (10, 8, 3, 40, 21);
    let est = mean_z_over_trials(n, m, k, trials, seed).unwrap();
    let direct: f64 = (0..trials as u64)
        .map(|i| {
            let h = sample_uniform(n, m, k, &mut trial_rng(seed, i)).unwrap();
            (0..1u64 << n).filter(|&x| proper(&h, x)).count() as f64
        })
        .sum::<f64>()
        / trials as f64;
    assert!((est.mean - direct).abs() <= 1e-9 * direct, "{} vs {direct}", est.mean);
}

#[test]
fn csp_with_mixed_constraints() {
    let clauses = vec![
        (vec![0, 1, 2], Constraint::NotAllEqual),
        (vec![1, 3], Constraint::NotAllZero),
        (vec![2, 3], Constraint::NotAllOne),
    ];
    let csp = Csp::new(4, &clauses).unwrap();
    let naive = (0..16u64)
        .filter(|&x| {
            clauses.iter().all(|(vs, c)| {
                let ones = vs.iter().filter(|&&v| (x >> v) & 1 == 1).count();
                match c {
                    Constraint::NotAllEqual => ones != 0 && ones != vs.len(),
                    Constraint::NotAllZero => ones != 0,
                    Constraint::NotAllOne => ones != vs.len(),
                }
            })
        })
        .count() as u64;
    assert_eq!(csp.count(), naive);
    let infeasible = Csp::new(3, &[(vec![], Constraint::NotAllEqual)]).unwrap();
    assert_eq!(infeasible.count(), 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn counter_agrees_with_census(seed in any::<u64>(), n in 4usize..15, k in 2usize..5, m in 0usize..40) {
        let k = k.min(n);
        let pool = (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1));
        let h = sample_uniform(n, m.min(pool), k, &mut trial_rng(seed, 0)).unwrap();
        let c = solution_census(&h, &[]).unwrap();
        prop_assert_eq!(count_solutions(&h).unwrap(), c.z);
        prop_assert_eq!(Counter::new(&h).unwrap().count(), c.z);
        let naive = (0..1u64 << n).filter(|&x| proper(&h, x)).count() as u64;
        prop_assert_eq!(c.z, naive);
        let mut visited = 0u64;
        for_each_proper(&h, |x| {
            assert!(proper(&h, x));
            visited += 1;
        })
        .unwrap();
        prop_assert_eq!(visited, naive);
    }
}
