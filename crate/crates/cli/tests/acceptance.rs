//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use wcett::dag::{diamond_chain, EdgeWeights, PathVec, ProgramDag};
use wcett::estimator::{
    estimate_wcett, iterative_basis, solve_bound, solve_delta, solve_worst, EstimateOptions, MeasurementSource,
};
use wcett::platform::{layered_dag, perturb, random_weights, with_random_exclusions, PerturbationLaw, PlatformModel};
use wcett::spanner::{compute_spanner, express_in_basis};
use wcett::{MeasurementSet, Sense};
use wcett_oracle as oracle;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

/// Integer weights in [14, 113]; every s-t path has at least two edges, so
/// its baseline is at least 28 and any mu_max up to 25 is admissible.
fn weights(dag: &ProgramDag, seed: u64) -> EdgeWeights {
    EdgeWeights::new(random_weights(dag.edge_count(), seed).iter().map(|w| w + 13.0).collect())
}

fn random_walk(dag: &ProgramDag, rng: &mut ChaCha8Rng) -> PathVec {
    let mut v = dag.source();
    let mut edges = Vec::new();
    while v != dag.sink() {
        let e = *dag.out_edges(v).choose(rng).expect("every vertex reaches the sink");
        edges.push(e);
        v = dag.head(e);
    }
    dag.path(edges).expect("walk is a path")
}

fn feasible_paths(dag: &ProgramDag) -> Vec<PathVec> {
    dag.enumerate_paths(true).expect("small graph")
}

fn edge_lists(paths: &[PathVec]) -> Vec<Vec<usize>> {
    paths.iter().map(|p| p.edges().to_vec()).collect()
}

/// Layered graphs with at most `max_edges` edges after series merging and
/// at most `max_paths` paths.
fn layered_graphs(count: usize, max_edges: usize, max_paths: u128, seed: u64) -> Vec<ProgramDag> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let layers = rng.gen_range(2..=6);
        let width = rng.gen_range(2..=4);
        let p = rng.gen_range(0.25..0.6);
        let dag = layered_dag(layers, width, p, rng.gen()).expect("valid parameters");
        if dag.merge_series().merged().edge_count() <= max_edges && dag.count_paths() <= max_paths {
            out.push(dag);
        }
    }
    out
}

/// Fixture set used by several criteria: diamond chains, layered graphs and
/// layered graphs with exclusions, all with at most `max_paths` paths.
fn fixtures(max_diamonds: usize, max_paths: u128, with_exclusions: bool) -> Vec<(String, ProgramDag)> {
    let mut out = Vec::new();
    for n in 1..=max_diamonds {
        out.push((format!("diamond{n}"), diamond_chain(n)));
    }
    for (i, g) in layered_graphs(4, 40, max_paths, 17).into_iter().enumerate() {
        out.push((format!("layered{i}"), g));
    }
    if with_exclusions {
        for (i, g) in layered_graphs(3, 40, max_paths, 29).into_iter().enumerate() {
            let g = with_random_exclusions(&g, 2, 100 + i as u64, 100_000);
            out.push((format!("excluded{i}"), g));
        }
        out.push(("diamond3x".into(), with_random_exclusions(&diamond_chain(3), 2, 5, 100_000)));
    }
    out
}

struct Trial {
    mu: f64,
    k: f64,
    d: f64,
    /// Largest |predicted − baseline| over the extracted paths.
    baseline_err: f64,
    /// Largest |predicted − measured| over the extracted paths.
    measured_err: f64,
}

fn soundness_trials() -> Vec<Trial> {
    let mut graphs: Vec<ProgramDag> = (1..=8).map(diamond_chain).collect();
    graphs.extend(layered_graphs(13, 40, u128::MAX, 3));
    for (i, g) in layered_graphs(4, 40, 20_000, 5).into_iter().enumerate() {
        graphs.push(with_random_exclusions(&g, 2, 200 + i as u64, 100_000));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut trials = Vec::new();
    for (gi, dag) in graphs.iter().enumerate() {
        for mu in [0.0, 1.0, 5.0, 25.0] {
            for adversarial in [false, true] {
                let seed = (gi * 100) as u64 + mu as u64;
                let w = weights(dag, seed);
                let law = if adversarial {
                    let (longest, _) = dag.extreme_path(&w, Sense::Max);
                    let mut targets = BTreeMap::new();
                    // Hide the longest path and inflate a few random ones.
                    for _ in 0..4 {
                        targets.insert(random_walk(dag, &mut rng).edges().to_vec(), mu);
                    }
                    targets.insert(longest.edges().to_vec(), -mu);
                    PerturbationLaw::Adversarial(targets)
                } else {
                    PerturbationLaw::Uniform
                };
                let platform = PlatformModel::new(w, mu, law, seed).expect("valid platform");
                let opts = EstimateOptions {
                    top: 2,
                    ..EstimateOptions::default()
                };
                let r = estimate_wcett(dag, MeasurementSource::Platform(&platform), &opts).expect("estimate runs");
                let mut baseline_err: f64 = 0.0;
                let mut measured_err: f64 = 0.0;
                for row in &r.ranked {
                    baseline_err = baseline_err.max((row.predicted - platform.baseline(&row.path)).abs());
                    measured_err = measured_err.max((row.predicted - platform.measure(&row.path)).abs());
                }
                trials.push(Trial {
                    mu,
                    k: r.k,
                    d: r.d,
                    baseline_err,
                    measured_err,
                });
            }
        }
    }
    trials
}

fn criterion_1(trials: &[Trial]) -> Outcome {
    let tol = |t: &Trial| 1e-6 * (1.0 + t.baseline_err);
    let ok = trials
        .iter()
        .filter(|t| t.baseline_err <= 2.0 * t.k * t.mu + tol(t))
        .count();
    let with_d = trials
        .iter()
        .filter(|t| t.measured_err <= (2.0 * t.k + 1.0) * t.mu + tol(t))
        .count();
    let worst = trials
        .iter()
        .filter(|t| t.mu > 0.0)
        .map(|t| t.baseline_err / (2.0 * t.k * t.mu))
        .fold(0.0, f64::max);
    Outcome::new(
        trials.len() >= 200 && ok == trials.len(),
        format!(
            "{ok}/{} trials with |T - baseline| <= 2k*mu_max (largest ratio {worst:.3}); \
             including d_tau, {with_d}/{} within (2k+1)*mu_max",
            trials.len(),
            trials.len()
        ),
    )
}

fn criterion_2(trials: &[Trial]) -> Outcome {
    let bounded = trials.iter().filter(|t| t.d <= t.mu + 1e-6).count();
    let zero: Vec<&Trial> = trials.iter().filter(|t| t.mu == 0.0).collect();
    let exact = zero.iter().filter(|t| t.d.abs() <= 1e-6).count();
    Outcome::new(
        bounded == trials.len() && exact == zero.len(),
        format!(
            "D <= mu_max in {bounded}/{} trials; D = 0 in {exact}/{} noiseless trials",
            trials.len(),
            zero.len()
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut graphs = 0;
    let mut subsets = 0;
    let mut failures = Vec::new();
    for (name, dag) in fixtures(5, 64, true) {
        let all = feasible_paths(&dag);
        if all.len() < 2 || all.len() > 512 {
            continue;
        }
        graphs += 1;
        let cuts: Vec<Vec<usize>> = dag.exclusions().to_vec();
        for i in 0..50 {
            // Half the subsets drop only one or two paths, which keeps them
            // spanning; the rest are arbitrary.
            let size = if i % 2 == 0 {
                all.len() - rng.gen_range(1..=2.min(all.len() - 1))
            } else {
                rng.gen_range(1..all.len())
            };
            let mut subset = all.clone();
            subset.shuffle(&mut rng);
            subset.truncate(size);
            let k = solve_bound(&dag, &subset, &cuts).expect("bound solves").k;
            subsets += 1;
            if !(k > 1.0 + 1e-9) {
                failures.push(format!("{name}: |S| = {size}, k = {k}"));
            }
        }
        let k = solve_bound(&dag, &all, &cuts).expect("bound solves").k;
        if (k - 1.0).abs() > 1e-6 {
            failures.push(format!("{name}: full set k = {k}"));
        }
    }
    Outcome::new(
        failures.is_empty() && graphs > 0,
        format!(
            "{subsets} strict subsets over {graphs} graphs all give k > 1, full sets give k = 1{}",
            if failures.is_empty() {
                String::new()
            } else {
                format!("; failures: {}", failures.join(", "))
            }
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut failures = Vec::new();
    let mut full = 0;
    let mut refined = 0;
    for (name, dag) in fixtures(6, 64, true) {
        let all = feasible_paths(&dag);
        let seed: Vec<PathVec> = compute_spanner(&dag)
            .paths()
            .iter()
            .filter(|p| dag.is_feasible(p))
            .cloned()
            .collect();
        if dag.exclusions().is_empty() {
            let r = iterative_basis(&dag, 1.0, seed.clone(), &dag).expect("refinement runs");
            let mut got = r.paths.clone();
            got.sort();
            got.dedup();
            let mut want = all.clone();
            want.sort();
            if got != want || r.paths.len() != all.len() {
                failures.push(format!("{name}: A = 1 kept {} of {} paths", r.paths.len(), all.len()));
            }
            full += 1;
        }
        let r = iterative_basis(&dag, 2.0, seed, &dag).expect("refinement runs");
        let cuts = r.cuts.clone();
        let last = solve_bound(&dag, &r.paths, &cuts).expect("bound solves").k;
        let monotone = r.iterations.windows(2).all(|w| w[1].k <= w[0].k + 1e-6);
        if last > 2.0 + 1e-6 || !monotone {
            failures.push(format!("{name}: A = 2 ended at k = {last}, monotone = {monotone}"));
        }
        refined += 1;
    }
    Outcome::new(
        failures.is_empty(),
        format!(
            "A = 1 recovered every path on {full} graphs; A = 2 reached k <= 2 with weakly decreasing k on {refined} graphs{}",
            if failures.is_empty() {
                String::new()
            } else {
                format!("; failures: {}", failures.join(", "))
            }
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut graphs: Vec<(String, ProgramDag)> = (1..=10).map(|n| (format!("diamond{n}"), diamond_chain(n))).collect();
    for (i, g) in layered_graphs(8, 60, 10_000, 55).into_iter().enumerate() {
        graphs.push((format!("layered{i}"), g));
    }
    let mut paths = 0usize;
    let mut worst_c: f64 = 0.0;
    let mut worst_res: f64 = 0.0;
    for (_, dag) in &graphs {
        let basis = compute_spanner(dag);
        for p in dag.enumerate_paths(false).expect("at most 10^4 paths") {
            let c = express_in_basis(&basis, &p).expect("every path is in the span");
            worst_c = c.iter().fold(worst_c, |m, x| m.max(x.abs()));
            let mut rebuilt = vec![0.0; dag.edge_count()];
            for (ci, b) in c.iter().zip(basis.paths()) {
                for &e in b.edges() {
                    rebuilt[e] += ci;
                }
            }
            let res = rebuilt
                .iter()
                .enumerate()
                .map(|(e, v)| (v - if p.contains(e) { 1.0 } else { 0.0 }).abs())
                .fold(0.0, f64::max);
            worst_res = worst_res.max(res);
            paths += 1;
        }
    }
    let dag = diamond_chain(3);
    let basis = compute_spanner(&dag);
    let bottom = dag.path(vec![1, 3, 5, 7, 9, 11]).expect("valid path");
    let c = express_in_basis(&basis, &bottom).expect("in span");
    let fig = c.iter().zip([-2.0, 1.0, 1.0, 1.0]).all(|(a, b)| (a - b).abs() < 1e-9);
    Outcome::new(
        worst_c <= 2.0 + 1e-9 && worst_res <= 1e-8 && fig,
        format!(
            "{paths} paths over {} graphs: max |c| = {worst_c:.6}, max residual = {worst_res:.1e}; \
             3-diamond all-bottom coefficients {:?}",
            graphs.len(),
            c.iter().map(|x| (x * 1e6).round() / 1e6).collect::<Vec<_>>()
        ),
    )
}

fn criterion_6() -> Outcome {
    let graphs = fixtures(4, 64, true);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut n = 0;
    let mut worst_rel: f64 = 0.0;
    let mut failures = Vec::new();
    for round in 0..10 {
        for (name, dag) in &graphs {
            let all = feasible_paths(dag);
            let mu = [0.0, 1.0, 5.0, 25.0][rng.gen_range(0..4)];
            let platform = PlatformModel::uniform(weights(dag, rng.gen()), mu, rng.gen()).expect("valid");
            // The spanner plus a few extra feasible paths: the spanner alone
            // makes the windows bounded whenever it is fully feasible.
            let mut measured: Vec<PathVec> = compute_spanner(dag).paths().to_vec();
            for _ in 0..round % 5 {
                measured.push(all.choose(&mut rng).expect("nonempty").clone());
            }
            measured.sort();
            measured.dedup();
            let set = platform.measure_all(&measured);
            let d = solve_delta(dag, &set).expect("delta solves").d + rng.gen_range(0.0..2.0);
            let cuts = dag.exclusions().to_vec();
            let ours = solve_worst(dag, &set, d, &cuts).expect("worst solves").predicted;
            let pairs: Vec<(Vec<usize>, f64)> = set.iter().map(|m| (m.path.edges().to_vec(), m.length)).collect();
            let (brute, _) = oracle::worst_by_enumeration(&edge_lists(&all), dag.edge_count(), &pairs, d)
                .expect("windows are feasible");
            let rel = (ours - brute).abs() / brute.abs().max(1.0);
            worst_rel = worst_rel.max(rel);
            if !(rel <= 1e-5) {
                failures.push(format!("{name}: milp {ours} brute {brute}"));
            }
            n += 1;
        }
    }
    Outcome::new(
        n >= 100 && failures.is_empty(),
        format!(
            "{n} instances, largest relative gap {worst_rel:.2e}{}",
            if failures.is_empty() {
                String::new()
            } else {
                format!("; failures: {}", failures.join(", "))
            }
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut failures = Vec::new();
    let graphs = fixtures(5, 64, true);
    for (i, (name, dag)) in graphs.iter().enumerate() {
        let platform = PlatformModel::uniform(weights(dag, i as u64), 0.0, 0).expect("valid");
        let all = feasible_paths(dag);
        let set = platform.measure_all(&all);
        let longest = all.iter().map(|p| platform.baseline(p)).fold(f64::NEG_INFINITY, f64::max);
        let r = estimate_wcett(dag, MeasurementSource::Fixed(&set), &EstimateOptions::default())
            .expect("estimate runs");
        let top = &r.ranked[0];
        let measured = top.measured.expect("path was measured");
        let good = (top.predicted - measured).abs() <= 1e-6 * longest.max(1.0)
            && (measured - longest).abs() <= 1e-9 * longest.max(1.0)
            && r.band_halfwidth.abs() <= 1e-6;
        if !good {
            failures.push(format!(
                "{name}: predicted {} measured {measured} longest {longest} band {}",
                top.predicted, r.band_halfwidth
            ));
        }
    }
    Outcome::new(
        failures.is_empty(),
        format!(
            "{} fixtures: predicted = measured = true longest, band = 0{}",
            graphs.len(),
            if failures.is_empty() {
                String::new()
            } else {
                format!("; failures: {}", failures.join(", "))
            }
        ),
    )
}

fn criterion_8() -> Outcome {
    let levels = [0.0, 10.0, 25.0, 50.0];
    let mut lines = Vec::new();
    let mut pass = true;
    for (i, (name, dag)) in [("diamond4", diamond_chain(4)), ("diamond6", diamond_chain(6))]
        .into_iter()
        // Independent path sets fit any lengths exactly, so the layered graph
        // must have more paths than its path-space dimension.
        .chain(
            layered_graphs(20, 40, 512, 8)
                .into_iter()
                .filter(|g| g.count_paths() >= 2 * g.path_space_dim() as u128)
                .take(1)
                .map(|g| ("layered", g)),
        )
        .enumerate()
    {
        let platform = PlatformModel::uniform(weights(&dag, 80 + i as u64), 0.0, 0).expect("valid");
        let base: MeasurementSet = platform.measure_all(&feasible_paths(&dag));
        let means: Vec<f64> = levels
            .iter()
            .map(|&level| {
                let total: f64 = (0..20u64)
                    .map(|seed| solve_delta(&dag, &perturb(&base, level, seed)).expect("delta solves").d)
                    .sum();
                total / 20.0
            })
            .collect();
        pass &= means.windows(2).all(|w| w[1] > w[0]);
        lines.push(format!(
            "{name} [{}]",
            means.iter().map(|m| format!("{m:.3}")).collect::<Vec<_>>().join(", ")
        ));
    }
    Outcome::new(
        pass,
        format!("mean D over 20 seeds at levels 0,10,25,50: {}", lines.join("; ")),
    )
}

fn wcett(args: &[&str], cwd: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_wcett"))
        .args(args)
        .current_dir(cwd)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn criterion_9() -> Outcome {
    let tmp = TempDir::new().expect("temp dir");
    let d = tmp.path();
    let instances: [&[&str]; 6] = [
        &["--family", "diamond", "--n", "3"],
        &["--family", "diamond", "--n", "5"],
        &["--family", "layered", "--layers", "3", "--width", "3"],
        &["--family", "layered", "--layers", "4", "--width", "3", "--p", "0.4"],
        &["--family", "layered", "--layers", "5", "--width", "2", "--exclusions", "2"],
        &["--family", "layered", "--layers", "4", "--width", "4", "--p", "0.3"],
    ];
    let mut dag_args = Vec::new();
    for (i, extra) in instances.iter().enumerate() {
        let out = format!("g{i}");
        let seed = (i + 1).to_string();
        let mut args = vec!["gen", "--mu-max", "5", "--seed", &seed, "--out", &out];
        args.extend_from_slice(extra);
        if !wcett(&args, d) {
            return Outcome::new(false, format!("gen failed for instance {i}"));
        }
        dag_args.push(out);
    }
    let mut args = vec!["compare".to_string()];
    for g in &dag_args {
        args.extend(["--dag".into(), format!("{g}/dag.json"), "--platform".into(), format!("{g}/platform.json")]);
    }
    args.extend(["--out".into(), "c".into()]);
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    if !wcett(&refs, d) {
        return Outcome::new(false, "compare failed");
    }
    let csv = fs::read_to_string(d.join("c/compare.csv")).unwrap_or_default();
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("c/compare_summary.json")).unwrap_or_default())
            .unwrap_or_default();
    let header = csv.lines().next().unwrap_or("");
    let has_columns = header.contains("baseline_bound") && header.contains("our_bound");
    let rows: Vec<String> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            format!("2|B|={} 2k={}", f[2], f[4].parse::<f64>().map(|v| format!("{v:.3}")).unwrap_or(f[4].into()))
        })
        .collect();
    Outcome::new(
        has_columns && rows.len() == instances.len() && summary["fraction"].is_number(),
        format!(
            "fraction with 2k <= 2|B|: {} (spanner measurements only: {}); {}",
            summary["fraction"],
            summary["spanner_fraction"],
            rows.join(", ")
        ),
    )
}

fn criterion_10() -> Outcome {
    let tmp = TempDir::new().expect("temp dir");
    let d = tmp.path();
    let commands: Vec<(&str, Vec<&str>)> = vec![
        (
            "gen",
            vec!["gen", "--family", "layered", "--layers", "4", "--width", "3", "--exclusions", "1", "--mu-max", "3", "--seed", "9"],
        ),
        ("measure", vec!["measure", "--dag", "g/dag.json", "--platform", "g/platform.json"]),
        ("basis", vec!["basis", "--dag", "g/dag.json", "--accuracy", "1.5"]),
        ("estimate", vec!["estimate", "--dag", "g/dag.json", "--platform", "g/platform.json", "--emit-lp"]),
        ("topk", vec!["topk", "--dag", "g/dag.json", "--platform", "g/platform.json", "--top", "3"]),
        ("perturb", vec!["perturb", "--dag", "g/dag.json", "--platform", "g/platform.json", "--seeds", "3"]),
        ("compare", vec!["compare", "--dag", "g/dag.json", "--platform", "g/platform.json"]),
    ];
    if !wcett(&[commands[0].1.as_slice(), &["--out", "g"]].concat(), d) {
        return Outcome::new(false, "gen failed");
    }
    let mut checked = 0;
    let mut differing = Vec::new();
    for (name, args) in &commands {
        let a = format!("{name}_a");
        let b = format!("{name}_b");
        for out in [&a, &b] {
            if !wcett(&[args.as_slice(), &["--out", out]].concat(), d) {
                return Outcome::new(false, format!("{name} failed"));
            }
        }
        let mut files: Vec<_> = fs::read_dir(d.join(&a))
            .expect("output dir")
            .map(|e| e.expect("entry").file_name())
            .collect();
        files.sort();
        for f in files {
            checked += 1;
            if fs::read(d.join(&a).join(&f)).ok() != fs::read(d.join(&b).join(&f)).ok() {
                differing.push(format!("{name}/{}", f.to_string_lossy()));
            }
        }
    }
    Outcome::new(
        differing.is_empty(),
        format!(
            "{checked} output files across {} commands byte-identical on rerun{}",
            commands.len(),
            if differing.is_empty() {
                String::new()
            } else {
                format!("; differing: {}", differing.join(", "))
            }
        ),
    )
}

fn main() {
    let start = Instant::now();
    let names = [
        "soundness of the error band",
        "repeatability bound",
        "k = 1 only for the full path set",
        "basis refinement",
        "spanner coefficients",
        "worst-path program vs brute force",
        "exactness at zero noise",
        "perturbation trend",
        "baseline comparison report",
        "determinism",
    ];
    let outcomes: Vec<Outcome> = std::thread::scope(|s| {
        let trials = s.spawn(soundness_trials);
        let others = [
            s.spawn(criterion_3),
            s.spawn(criterion_4),
            s.spawn(criterion_5),
            s.spawn(criterion_6),
            s.spawn(criterion_7),
            s.spawn(criterion_8),
            s.spawn(criterion_9),
            s.spawn(criterion_10),
        ];
        let trials = trials.join().expect("soundness trials");
        let mut out = vec![criterion_1(&trials), criterion_2(&trials)];
        out.extend(others.into_iter().map(|h| h.join().expect("criterion runs")));
        out
    });
    let mut failed = 0;
    for (i, (name, o)) in names.iter().zip(&outcomes).enumerate() {
        println!(
            "criterion {:>2} [{}] {name}: {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        outcomes.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
