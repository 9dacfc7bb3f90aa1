use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use wcett::dag::{diamond_chain, EdgeWeights, PathVec, ProgramDag};
use wcett::estimator::{
    estimate_wcett, iterative_basis, solve_delta, EstimateOptions, EstimateReport, MeasurementSource,
};
use wcett::milp::write_lp;
use wcett::platform::{
    layered_dag, perturb, random_weights, with_random_exclusions, MeasurementSet, PerturbationLaw, PlatformModel,
};
use wcett::spanner::{baseline_estimate, compute_spanner, path_rank, PathBasis};
use wcett::Sense;

use crate::{
    BasisArgs, Cli, CliError, Command, CompareArgs, EstimateArgs, Family, GenArgs, Law, MeasureArgs, PerturbArgs,
    WeightKind,
};

const EXCLUSION_CHECK_CAP: u128 = 100_000;

/// Runs one parsed command.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Gen(a) => gen(&cli.command, a),
        Command::Measure(a) => measure(&cli.command, a),
        Command::Basis(a) => basis(&cli.command, a),
        Command::Estimate(a) => estimate(&cli.command, a, 1),
        Command::Topk(a) => estimate(&cli.command, a, 5),
        Command::Perturb(a) => perturb_sweep(&cli.command, a),
        Command::Compare(a) => compare(&cli.command, a),
    }
}

fn prepare_out(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))
}

fn write_file(out: &Path, name: &str, text: &str) -> Result<(), CliError> {
    let p = out.join(name);
    fs::write(&p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v > 0.0 {
        "inf".into()
    } else if v < 0.0 {
        "-inf".into()
    } else {
        "nan".into()
    }
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::Io(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn edges_field(p: &PathVec) -> String {
    p.edges().iter().map(|e| e.to_string()).collect::<Vec<_>>().join(" ")
}

fn seconds(start: Instant, wall_clock: bool) -> f64 {
    if wall_clock {
        start.elapsed().as_secs_f64()
    } else {
        0.0
    }
}

/// Lexicographically last source-to-sink path: the largest out-edge id at
/// every vertex.
fn last_path(dag: &ProgramDag) -> PathVec {
    let mut v = dag.source();
    let mut edges = Vec::new();
    while v != dag.sink() {
        let e = *dag.out_edges(v).iter().max().expect("every vertex reaches the sink");
        edges.push(e);
        v = dag.head(e);
    }
    dag.path(edges).expect("walk is a path")
}

fn feasible_spanner(dag: &ProgramDag) -> Vec<PathVec> {
    compute_spanner(dag)
        .paths()
        .iter()
        .filter(|p| dag.is_feasible(p))
        .cloned()
        .collect()
}

fn gen(cmd: &Command, a: &GenArgs) -> Result<(), CliError> {
    let base = match a.family {
        Family::Diamond => {
            if a.n == 0 {
                return Err(CliError::Config("--n must be at least 1".into()));
            }
            diamond_chain(a.n)
        }
        Family::Layered => layered_dag(a.layers, a.width, a.p, a.seed)?,
    };
    let dag = if a.exclusions > 0 {
        with_random_exclusions(&base, a.exclusions, a.seed, EXCLUSION_CHECK_CAP)
    } else {
        base
    };
    let weights = match a.weights {
        WeightKind::Random => random_weights(dag.edge_count(), a.seed),
        WeightKind::Unit => EdgeWeights::new(vec![1.0; dag.edge_count()]),
    };
    let (_, shortest) = dag.extreme_path(&weights, Sense::Min);
    if !(a.mu_max >= 0.0) || a.mu_max > shortest {
        return Err(CliError::Config(format!(
            "--mu-max must lie in [0, {shortest}] (the shortest path baseline), got {}",
            a.mu_max
        )));
    }
    let law = match a.law {
        Law::Uniform => PerturbationLaw::Uniform,
        Law::Adversarial => {
            let mut targets = BTreeMap::new();
            targets.insert(last_path(&dag).edges().to_vec(), a.mu_max);
            PerturbationLaw::Adversarial(targets)
        }
    };
    let platform = PlatformModel::new(weights, a.mu_max, law, a.seed)?;

    prepare_out(&a.out)?;
    write_file(&a.out, "dag.json", &dag.to_json())?;
    write_file(&a.out, "platform.json", &platform.to_json())?;
    println!("# Nodes  # Edges  # Paths");
    println!("{:>7}  {:>7}  {:>7}", dag.vertex_count(), dag.edge_count(), dag.count_paths());
    crate::manifest::write(&a.out, cmd, &[], &["dag.json", "platform.json"])
}

fn measure(cmd: &Command, a: &MeasureArgs) -> Result<(), CliError> {
    let dag = ProgramDag::read(&a.dag)?;
    let platform = PlatformModel::read(&a.platform)?;
    platform.check_dag(&dag)?;
    let paths = if a.all {
        dag.enumerate_paths(true)?
    } else {
        feasible_spanner(&dag)
    };
    let set = platform.measure_all(&paths);
    prepare_out(&a.out)?;
    write_file(&a.out, "measurements.csv", &set.to_csv())?;
    crate::manifest::write(&a.out, cmd, &[&a.dag, &a.platform], &["measurements.csv"])
}

#[derive(Serialize)]
struct BasisFile {
    paths: Vec<Vec<usize>>,
    rank: usize,
    k: Option<f64>,
}

fn basis(cmd: &Command, a: &BasisArgs) -> Result<(), CliError> {
    let dag = ProgramDag::read(&a.dag)?;
    let start = Instant::now();
    let merge = dag.merge_series();
    let work = merge.merged();
    let refined = iterative_basis(work, a.accuracy, feasible_spanner(work), work)?;
    let paths: Vec<PathVec> = refined.paths.iter().map(|p| merge.to_original_path(p)).collect();
    let total = seconds(start, a.wall_clock);

    let file = BasisFile {
        paths: paths.iter().map(|p| p.edges().to_vec()).collect(),
        rank: path_rank(&paths, dag.edge_count()),
        k: refined.k.is_finite().then_some(refined.k),
    };
    let mut json = serde_json::to_string_pretty(&file).expect("basis serializes");
    json.push('\n');
    let iterations: Vec<Vec<String>> = refined
        .iterations
        .iter()
        .enumerate()
        .map(|(i, it)| vec![i.to_string(), num(it.k), num(if a.wall_clock { it.seconds } else { 0.0 })])
        .collect();
    let summary = vec![vec![num(a.accuracy), num(refined.k), paths.len().to_string(), num(total)]];

    prepare_out(&a.out)?;
    write_file(&a.out, "basis.json", &json)?;
    write_file(&a.out, "iterations.csv", &csv_text(&["iteration", "k", "seconds"], &iterations)?)?;
    write_file(
        &a.out,
        "summary.csv",
        &csv_text(&["desired_k", "actual_k", "paths", "seconds"], &summary)?,
    )?;
    crate::manifest::write(&a.out, cmd, &[&a.dag], &["basis.json", "iterations.csv", "summary.csv"])
}

fn estimate(cmd: &Command, a: &EstimateArgs, default_top: usize) -> Result<(), CliError> {
    let dag = ProgramDag::read(&a.dag)?;
    let options = EstimateOptions {
        accuracy: a.accuracy,
        top: a.top.unwrap_or(default_top),
        early_stop: a.early_stop,
        keep_model: a.emit_lp,
        ..EstimateOptions::default()
    };
    let start = Instant::now();
    let (report, inputs): (EstimateReport, Vec<&Path>) = match (&a.platform, &a.measurements) {
        (Some(p), None) => {
            let platform = PlatformModel::read(p)?;
            (
                estimate_wcett(&dag, MeasurementSource::Platform(&platform), &options)?,
                vec![a.dag.as_path(), p.as_path()],
            )
        }
        (None, Some(m)) => {
            let set = MeasurementSet::read(&dag, m)?;
            (
                estimate_wcett(&dag, MeasurementSource::Fixed(&set), &options)?,
                vec![a.dag.as_path(), m.as_path()],
            )
        }
        _ => return Err(CliError::Config("give exactly one of --platform and --measurements".into())),
    };
    let total = seconds(start, a.wall_clock);

    let rows: Vec<Vec<String>> = report
        .ranked
        .iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                (i + 1).to_string(),
                edges_field(&r.path),
                num(r.predicted),
                num(report.band_halfwidth),
                r.measured.map(num).unwrap_or_default(),
                num(total),
            ]
        })
        .collect();

    prepare_out(&a.out)?;
    write_file(&a.out, "report.json", &report.to_json(a.wall_clock))?;
    write_file(
        &a.out,
        "table.csv",
        &csv_text(&["rank", "edges", "predicted", "band", "measured", "seconds"], &rows)?,
    )?;
    let mut files = vec!["report.json", "table.csv"];
    if let Some(model) = &report.model {
        write_file(&a.out, "worst.lp", &write_lp(model))?;
        files.push("worst.lp");
    }
    files.sort_unstable();
    if let Some(top) = report.ranked.first() {
        println!(
            "longest path {} predicted {} band {} (k = {}, D = {})",
            edges_field(&top.path),
            num(top.predicted),
            num(report.band_halfwidth),
            num(report.k),
            num(report.d)
        );
    }
    crate::manifest::write(&a.out, cmd, &inputs, &files)
}

fn parse_levels(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| CliError::Config(format!("bad perturbation level {s:?}")))
        })
        .collect()
}

fn perturb_sweep(cmd: &Command, a: &PerturbArgs) -> Result<(), CliError> {
    let dag = ProgramDag::read(&a.dag)?;
    let levels = parse_levels(&a.levels)?;
    let (baseline, input): (MeasurementSet, &Path) = match (&a.platform, &a.measurements) {
        (Some(p), None) => {
            let platform = PlatformModel::read(p)?;
            platform.check_dag(&dag)?;
            (platform.measure_all(&dag.enumerate_paths(true)?), p.as_path())
        }
        (None, Some(m)) => (MeasurementSet::read(&dag, m)?, m.as_path()),
        _ => return Err(CliError::Config("give exactly one of --platform and --measurements".into())),
    };
    let mut rows = Vec::new();
    for &level in &levels {
        for s in 0..a.seeds {
            let noisy = perturb(&baseline, level, a.seed.wrapping_add(s));
            let d = solve_delta(&dag, &noisy)?.d;
            rows.push(vec![num(level), num(d)]);
        }
    }
    prepare_out(&a.out)?;
    write_file(&a.out, "perturb.csv", &csv_text(&["level", "D"], &rows)?)?;
    crate::manifest::write(&a.out, cmd, &[a.dag.as_path(), input], &["perturb.csv"])
}

#[derive(Serialize)]
struct CompareSummary {
    instances: usize,
    /// Instances where the refined basis gives `2k <= 2|B|`.
    ours_not_worse: usize,
    fraction: f64,
    /// Same count for `k` of the unrefined spanner measurements.
    spanner_not_worse: usize,
    spanner_fraction: f64,
}

fn compare(cmd: &Command, a: &CompareArgs) -> Result<(), CliError> {
    if a.dag.len() != a.platform.len() {
        return Err(CliError::Config(format!(
            "--dag and --platform must pair up, got {} and {}",
            a.dag.len(),
            a.platform.len()
        )));
    }
    let mut rows = Vec::new();
    let (mut not_worse, mut spanner_not_worse) = (0, 0);
    for (i, (dag_path, platform_path)) in a.dag.iter().zip(&a.platform).enumerate() {
        let dag = ProgramDag::read(dag_path)?;
        let platform = PlatformModel::read(platform_path)?;
        platform.check_dag(&dag)?;
        let basis = PathBasis::from_paths(feasible_spanner(&dag), dag.edge_count())?;
        let set = platform.measure_all(basis.paths());
        let baseline = baseline_estimate(&basis, &set, &dag)?;
        // Both methods on the spanner measurements alone, then the full
        // pipeline, which may measure further paths to reach k <= 2.
        let fixed = estimate_wcett(&dag, MeasurementSource::Fixed(&set), &EstimateOptions::default())?;
        let ours = estimate_wcett(&dag, MeasurementSource::Platform(&platform), &EstimateOptions::default())?;
        let spanner_bound = 2.0 * fixed.k;
        let our_bound = 2.0 * ours.k;
        if spanner_bound <= baseline.bound() + 1e-9 {
            spanner_not_worse += 1;
        }
        if our_bound <= baseline.bound() + 1e-9 {
            not_worse += 1;
        }
        let top = &ours.ranked[0];
        rows.push(vec![
            i.to_string(),
            basis.len().to_string(),
            num(baseline.bound()),
            num(spanner_bound),
            num(our_bound),
            ours.measurements.len().to_string(),
            num(baseline.predicted),
            num(platform.measure(&baseline.path)),
            num(top.predicted),
            num(platform.measure(&top.path)),
        ]);
    }
    let n = rows.len();
    let summary = CompareSummary {
        instances: n,
        ours_not_worse: not_worse,
        fraction: not_worse as f64 / n as f64,
        spanner_not_worse,
        spanner_fraction: spanner_not_worse as f64 / n as f64,
    };
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    println!(
        "2k <= 2|B| on {not_worse} of {n} instances (fraction {}); spanner measurements only: {spanner_not_worse} of {n}",
        num(summary.fraction)
    );

    prepare_out(&a.out)?;
    write_file(
        &a.out,
        "compare.csv",
        &csv_text(
            &[
                "instance",
                "basis_paths",
                "baseline_bound",
                "spanner_bound",
                "our_bound",
                "our_paths",
                "baseline_predicted",
                "baseline_measured",
                "ours_predicted",
                "ours_measured",
            ],
            &rows,
        )?,
    )?;
    write_file(&a.out, "compare_summary.json", &json)?;
    let inputs: Vec<&Path> = a.dag.iter().chain(&a.platform).map(|p| p.as_path()).collect();
    crate::manifest::write(&a.out, cmd, &inputs, &["compare.csv", "compare_summary.json"])
}
