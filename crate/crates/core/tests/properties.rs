//! Property tests against brute-force and independent-LP oracles.

use proptest::prelude::*;

use wcett::dag::{diamond_chain, EdgeWeights, PathVec, ProgramDag};
use wcett::estimator::{
    estimate_wcett, iterative_basis, solve_bound, solve_delta, solve_worst, EstimateOptions, MeasurementSource,
};
use wcett::milp::{solve_lp, solve_milp, MilpModel, Relation};
use wcett::platform::{layered_dag, perturb, random_weights, MeasurementSet, PlatformModel};
use wcett::spanner::{compute_spanner, express_in_basis};
use wcett::Sense;
use wcett_oracle as oracle;

fn small_dag() -> impl Strategy<Value = ProgramDag> {
    prop_oneof![
        (1usize..=4).prop_map(diamond_chain),
        (1usize..=4, 1usize..=3, 0.2f64..0.9, any::<u64>())
            .prop_map(|(l, w, p, s)| layered_dag(l, w, p, s).expect("valid parameters")),
    ]
}

fn edge_lists(paths: &[PathVec]) -> Vec<Vec<usize>> {
    paths.iter().map(|p| p.edges().to_vec()).collect()
}

fn pairs(set: &MeasurementSet) -> Vec<(Vec<usize>, f64)> {
    set.iter().map(|m| (m.path.edges().to_vec(), m.length)).collect()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn path_count_matches_enumeration(dag in small_dag()) {
        let all = dag.enumerate_paths(false).unwrap();
        prop_assert_eq!(all.len() as u128, dag.count_paths());
        let mut sorted = all.clone();
        sorted.sort();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), all.len());
    }

    #[test]
    fn series_merge_is_a_bijection_on_paths(dag in small_dag()) {
        let merge = dag.merge_series();
        prop_assert_eq!(merge.merged().count_paths(), dag.count_paths());
        prop_assert_eq!(merge.merged().path_space_dim(), dag.path_space_dim());
        for p in dag.enumerate_paths(false).unwrap() {
            let m = merge.to_merged_path(&p).unwrap();
            prop_assert_eq!(merge.to_original_path(&m), p);
        }
    }

    #[test]
    fn extreme_path_matches_brute_force(dag in small_dag(), seed in any::<u64>()) {
        let w = random_weights(dag.edge_count(), seed);
        let all = dag.enumerate_paths(false).unwrap();
        for sense in [Sense::Max, Sense::Min] {
            let (p, v) = dag.extreme_path(&w, sense);
            prop_assert!((p.weight(&w) - v).abs() < 1e-9);
            let best = all.iter().map(|q| q.weight(&w)).fold(
                if sense == Sense::Max { f64::NEG_INFINITY } else { f64::INFINITY },
                |acc, x| if sense == Sense::Max { acc.max(x) } else { acc.min(x) },
            );
            prop_assert!((best - v).abs() < 1e-9);
        }
    }

    #[test]
    fn milp_matches_enumeration(
        n in 2usize..=8,
        values in prop::collection::vec(-5i32..=10, 8),
        rows in prop::collection::vec((prop::collection::vec(-3i32..=6, 8), 0i32..=12), 1..=3),
    ) {
        let mut model = MilpModel::new();
        let x: Vec<_> = (0..n).map(|i| model.add_binary(format!("x{i}"))).collect();
        for (i, (coeffs, rhs)) in rows.iter().enumerate() {
            model.add_constraint(
                format!("r{i}"),
                x.iter().zip(coeffs).map(|(&v, &c)| (v, c as f64)),
                Relation::Le,
                *rhs as f64,
            );
        }
        model.set_objective(Sense::Max, x.iter().zip(&values).map(|(&v, &c)| (v, c as f64)));
        let brute = oracle::best_binary(
            n,
            |bits| rows.iter().all(|(c, r)| bits.iter().zip(c).map(|(&b, &a)| if b { a } else { 0 }).sum::<i32>() <= *r),
            |bits| bits.iter().zip(&values).map(|(&b, &v)| if b { v as f64 } else { 0.0 }).sum(),
        );
        let sol = solve_milp(&model).unwrap();
        let relaxed = solve_lp(&model).unwrap();
        match brute {
            // x = 0 satisfies every row since rhs >= 0.
            None => prop_assert!(false, "zero vector is always feasible"),
            Some(v) => {
                prop_assert!(sol.is_optimal());
                prop_assert!((sol.objective - v).abs() < 1e-6, "milp {} brute {}", sol.objective, v);
                prop_assert!(model.max_violation(&sol.values) < 1e-6);
                prop_assert!(relaxed.objective >= v - 1e-6);
            }
        }
    }

    #[test]
    fn lp_matches_oracle(
        c in prop::collection::vec(-5i32..=5, 4),
        rows in prop::collection::vec((prop::collection::vec(-4i32..=4, 4), -3i32..=10), 1..=4),
    ) {
        let mut model = MilpModel::new();
        let x: Vec<_> = (0..4).map(|i| model.add_continuous(format!("x{i}"), 0.0, 10.0)).collect();
        let mut orows = Vec::new();
        for (i, (a, r)) in rows.iter().enumerate() {
            model.add_constraint(format!("r{i}"), x.iter().zip(a).map(|(&v, &k)| (v, k as f64)), Relation::Le, *r as f64);
            orows.push(oracle::Row::new(a.iter().map(|&k| k as f64).collect(), oracle::Cmp::Le, *r as f64));
        }
        for i in 0..4 {
            let mut a = vec![0.0; 4];
            a[i] = 1.0;
            orows.push(oracle::Row::new(a, oracle::Cmp::Le, 10.0));
        }
        model.set_objective(Sense::Max, x.iter().zip(&c).map(|(&v, &k)| (v, k as f64)));
        let cf: Vec<f64> = c.iter().map(|&k| k as f64).collect();
        let ours = solve_lp(&model);
        match oracle::lp_max(&cf, &orows, &[false; 4]) {
            oracle::LpResult::Optimal { value, .. } => {
                let s = ours.unwrap();
                prop_assert!(s.is_optimal());
                prop_assert!((s.objective - value).abs() < 1e-6);
            }
            oracle::LpResult::Infeasible => {
                prop_assert!(ours.map(|s| !s.is_optimal()).unwrap_or(true));
            }
            oracle::LpResult::Unbounded => prop_assert!(false, "box-bounded LP cannot be unbounded"),
        }
    }

    #[test]
    fn delta_matches_independent_lp(
        dag in small_dag(),
        lengths in prop::collection::vec(0.0f64..100.0, 12),
        take in 1usize..12,
    ) {
        let all = dag.enumerate_paths(false).unwrap();
        let mut set = MeasurementSet::new();
        for (p, l) in all.iter().zip(&lengths).take(take) {
            set.insert(p.clone(), *l);
        }
        let ours = solve_delta(&dag, &set).unwrap();
        let theirs = oracle::delta_by_lp(dag.edge_count(), &pairs(&set));
        prop_assert!((ours.d - theirs).abs() <= 1e-6 * theirs.max(1.0), "ours {} oracle {}", ours.d, theirs);
        prop_assert!(ours.d >= -1e-12);
    }

    #[test]
    fn worst_path_matches_enumeration(dag in small_dag(), seed in any::<u64>(), mu in 0.0f64..5.0) {
        let platform = PlatformModel::uniform(random_weights(dag.edge_count(), seed), mu, seed).unwrap();
        let basis = compute_spanner(&dag);
        let set = platform.measure_all(basis.paths());
        let d = solve_delta(&dag, &set).unwrap().d + 1e-9;
        let worst = solve_worst(&dag, &set, d, &[]).unwrap();
        let all = dag.enumerate_paths(false).unwrap();
        let (best, _) = oracle::worst_by_enumeration(&edge_lists(&all), dag.edge_count(), &pairs(&set), d).unwrap();
        prop_assert!(close(worst.predicted, best, 1e-5), "milp {} brute {}", worst.predicted, best);
        // The returned path attains the optimum under the returned weights.
        prop_assert!(close(worst.path.weight(&worst.weights), worst.predicted, 1e-6));
        for m in set.iter() {
            prop_assert!((m.path.weight(&worst.weights) - m.length).abs() <= d + 1e-6);
        }
    }

    #[test]
    fn accuracy_constant_matches_enumeration(dag in small_dag(), extra in prop::collection::vec(any::<prop::sample::Index>(), 0..4)) {
        let all = dag.enumerate_paths(false).unwrap();
        let mut measured: Vec<PathVec> = compute_spanner(&dag).paths().to_vec();
        for i in &extra {
            let p = i.get(&all).clone();
            if !measured.contains(&p) {
                measured.push(p);
            }
        }
        let ours = solve_bound(&dag, &measured, &[]).unwrap();
        let theirs = oracle::accuracy_by_enumeration(&edge_lists(&all), dag.edge_count(), &edge_lists(&measured));
        prop_assert!(close(ours.k, theirs, 1e-5), "milp {} brute {}", ours.k, theirs);
        prop_assert!(ours.k >= 1.0 - 1e-9);
        prop_assert!(ours.k <= 2.0 * measured.len() as f64 + 1e-6);
    }

    #[test]
    fn spanner_coefficients_are_bounded(dag in small_dag()) {
        let basis = compute_spanner(&dag);
        prop_assert_eq!(basis.len(), dag.path_space_dim());
        for f in basis.swap_factors() {
            prop_assert!(*f > 2.0);
        }
        for p in dag.enumerate_paths(false).unwrap() {
            let c = express_in_basis(&basis, &p).unwrap();
            prop_assert!(c.iter().all(|x| x.abs() <= 2.0 + 1e-9), "coefficients {:?}", c);
            let mut rebuilt = vec![0.0; dag.edge_count()];
            for (ci, b) in c.iter().zip(basis.paths()) {
                for &e in b.edges() {
                    rebuilt[e] += ci;
                }
            }
            for (e, v) in rebuilt.iter().enumerate() {
                let want = if p.contains(e) { 1.0 } else { 0.0 };
                prop_assert!((v - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn refinement_sequence_is_monotone(dag in small_dag(), target in 1.0f64..3.0) {
        let seed = compute_spanner(&dag).paths().to_vec();
        let r = iterative_basis(&dag, target, seed, &dag).unwrap();
        prop_assert!(r.k <= target + 1e-6);
        for pair in r.iterations.windows(2) {
            prop_assert!(pair[1].k <= pair[0].k + 1e-6, "k rose from {} to {}", pair[0].k, pair[1].k);
        }
    }

    #[test]
    fn platform_is_deterministic(dag in small_dag(), seed in any::<u64>(), mu in 0.0f64..10.0) {
        let a = PlatformModel::uniform(random_weights(dag.edge_count(), seed), mu, seed).unwrap();
        let b = PlatformModel::from_json(&a.to_json()).unwrap();
        for p in dag.enumerate_paths(false).unwrap() {
            prop_assert_eq!(a.measure(&p), b.measure(&p));
            prop_assert!((a.measure(&p) - a.baseline(&p)).abs() <= mu);
        }
    }

    #[test]
    fn perturbation_stays_in_band(dag in small_dag(), seed in any::<u64>(), level in 0.0f64..60.0) {
        let platform = PlatformModel::uniform(random_weights(dag.edge_count(), seed), 0.0, seed).unwrap();
        let set = platform.measure_all(&dag.enumerate_paths(false).unwrap());
        let noisy = perturb(&set, level, seed);
        prop_assert_eq!(noisy.clone(), perturb(&set, level, seed));
        for (m, n) in set.iter().zip(noisy.iter()) {
            prop_assert_eq!(&m.path, &n.path);
            prop_assert!((n.length - m.length).abs() <= m.length * level / 100.0 + 1e-9);
        }
        let round = MeasurementSet::from_csv(&dag, &set.to_csv()).unwrap();
        prop_assert_eq!(round.len(), set.len());
    }

    #[test]
    fn ranked_paths_are_distinct_and_sorted(dag in small_dag(), seed in any::<u64>()) {
        let platform = PlatformModel::uniform(random_weights(dag.edge_count(), seed), 1.0, seed).unwrap();
        let opts = EstimateOptions { top: 4, ..EstimateOptions::default() };
        let r = estimate_wcett(&dag, MeasurementSource::Platform(&platform), &opts).unwrap();
        let expected = (dag.count_paths() as usize).min(4);
        prop_assert_eq!(r.ranked.len(), expected);
        for pair in r.ranked.windows(2) {
            prop_assert!(pair[1].predicted <= pair[0].predicted + 1e-6);
            prop_assert!(pair[0].path != pair[1].path);
        }
        prop_assert!((r.band_halfwidth - 2.0 * r.k * r.d).abs() < 1e-9);
        prop_assert!(r.k <= 2.0 + 1e-6);
    }
}

#[test]
fn weights_helper_rejects_wrong_length() {
    let dag = diamond_chain(1);
    assert!(EdgeWeights::for_dag(&dag, vec![1.0; 3]).is_err());
    assert!(EdgeWeights::for_dag(&dag, vec![1.0; 4]).is_ok());
}
