//! Experiment runner and per-subsystem command-line entry points. The
//! heavy lifting lives in the library; this binary parses arguments,
//! wires files to library calls and sets the exit code from the checks.

use a2lab::averaging::{averaging_identity_check, enumerate_goodness, really_good_adjust};
use a2lab::bellman::{bellman_hessian_check, tau_carleson_experiment, BellmanParams};
use a2lab::coloring;
use a2lab::experiment::{
    emit_report, parallel_map, run_experiments, ExperimentConfig, Table, WeightFamilySpec,
};
use a2lab::goodness::{estimate_bad_probability, GoodnessParams};
use a2lab::haar::build_haar_system;
use a2lab::kernel::{
    build_model_operator, decay_check_in, decay_check_out, haar_coefficient_table,
    subtract_paraproducts, KernelKind,
};
use a2lab::lattice::{
    build_hierarchy, enumerate_hierarchies, GridMode, HierarchyParams, LatticeSample,
    DEFAULT_ENUMERATION_CAP,
};
use a2lab::linalg::Mat;
use a2lab::metric::{space_from_json, DoublingMeasure, FiniteMetricSpace, KernelProfile};
use a2lab::rng::Rng;
use a2lab::shift::shift_bound_experiment;
use a2lab::tree::{build_cubes, verify_cover, CubeTree};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "a2lab",
    version,
    about = "Random dyadic lattices, weighted Haar systems and dyadic shift experiments on finite metric spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration of experiments and emit a report.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
    },
    /// Random lattice construction.
    Lattice {
        #[command(subcommand)]
        command: LatticeCmd,
    },
    /// Proper-coloring census.
    Census {
        #[command(subcommand)]
        command: CensusCmd,
    },
    /// Good/bad cube probabilities.
    Goodness {
        #[command(subcommand)]
        command: GoodnessCmd,
    },
    /// Dyadic shift norms.
    Shift {
        #[command(subcommand)]
        command: ShiftCmd,
    },
    /// Bellman function checks.
    Bellman {
        #[command(subcommand)]
        command: BellmanCmd,
    },
    /// Model-operator decomposition checks.
    Decompose {
        #[command(subcommand)]
        command: DecomposeCmd,
    },
}

#[derive(Subcommand)]
enum LatticeCmd {
    /// Build one random lattice sample and write it as JSON.
    Build(LatticeBuild),
    /// Enumerate the whole probability space of lattices.
    Enumerate(LatticeEnumerate),
}

#[derive(Args)]
struct LatticeBuild {
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    levels: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Use exact-uniform grid draws (enumerates candidate grids).
    #[arg(long)]
    exact: bool,
}

#[derive(Args)]
struct LatticeEnumerate {
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    levels: usize,
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    cap: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CensusCmd {
    /// Enumerate 1-lattices of a small space and run the recoloring map.
    Run(CensusRun),
}

#[derive(Args)]
struct CensusRun {
    #[arg(long)]
    space: PathBuf,
    /// Distinguished point index.
    #[arg(long)]
    v: usize,
    #[arg(long, default_value_t = 12)]
    max_points: usize,
    /// Threshold in the input file's distance units.
    #[arg(long, default_value_t = 1.0)]
    threshold: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum GoodnessCmd {
    /// Sweep r and report Monte Carlo bad-cube frequencies.
    Pbad(PbadArgs),
}

#[derive(Args)]
struct PbadArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 2)]
    levels: usize,
    #[arg(long, default_value_t = 0.25)]
    gamma: f64,
    /// Range lo:hi inclusive.
    #[arg(long, value_parser = parse_range)]
    r_sweep: (usize, usize),
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum ShiftCmd {
    /// Norm-vs-characteristic scaling table.
    Bench(ShiftBenchArgs),
}

#[derive(Args)]
struct ShiftBenchArgs {
    /// Lattice sample file written by `lattice build`.
    #[arg(long)]
    tree: PathBuf,
    /// Complexities as m,n pairs.
    #[arg(long, num_args = 1.., value_parser = parse_pair, required = true)]
    complexities: Vec<(usize, usize)>,
    #[arg(long, value_parser = WeightFamilySpec::parse, conflicts_with = "weight_file")]
    weights: Option<WeightFamilySpec>,
    /// JSON file {"w": [...]} with one explicit weight.
    #[arg(long)]
    weight_file: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    draws: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum BellmanCmd {
    /// Hessian inequality sweep over the domain.
    Check(BellmanCheck),
    /// tau Carleson scaling over a weight family.
    Tau(BellmanTau),
}

#[derive(Args)]
struct BellmanCheck {
    #[arg(long)]
    alpha: f64,
    #[arg(long = "Q")]
    q: f64,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BellmanTau {
    #[arg(long)]
    tree: PathBuf,
    #[arg(long)]
    alpha: f64,
    #[arg(long, value_parser = WeightFamilySpec::parse, conflicts_with = "weight_file")]
    weights: Option<WeightFamilySpec>,
    /// JSON file {"w": [...]} with one explicit weight.
    #[arg(long)]
    weight_file: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum DecomposeCmd {
    /// Kernel bounds and the decay of matrix coefficients.
    Check(DecomposeCheck),
    /// Exact averaging identity over the enumerated lattice space.
    AvgIdentity(AvgIdentityArgs),
}

#[derive(Args)]
struct DecomposeCheck {
    #[arg(long)]
    space: PathBuf,
    #[arg(long, default_value = "inv-dist")]
    kernel: String,
    #[arg(long, default_value_t = 2)]
    r0: usize,
    #[arg(long, default_value_t = 0.25)]
    delta: f64,
    #[arg(long, default_value_t = 3)]
    levels: usize,
    #[arg(long, default_value_t = 3)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AvgIdentityArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long, default_value_t = 0.25)]
    delta: f64,
    #[arg(long, default_value_t = 2)]
    levels: usize,
    /// Number of random operators (each against as many (f, g) pairs).
    #[arg(long, default_value_t = 5)]
    trials: usize,
    #[arg(long)]
    seed: u64,
}

fn parse_range(text: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = text.split_once(':').ok_or("expected lo:hi")?;
    Ok((
        lo.parse().map_err(|_| "bad lo")?,
        hi.parse().map_err(|_| "bad hi")?,
    ))
}

fn parse_pair(text: &str) -> Result<(usize, usize), String> {
    let (m, n) = text.split_once(',').ok_or("expected m,n")?;
    Ok((
        m.parse().map_err(|_| "bad m")?,
        n.parse().map_err(|_| "bad n")?,
    ))
}

/// Self-contained sample file: the lattice, its cube membership arrays and
/// the space it was built on.
#[derive(Serialize, Deserialize)]
struct SampleFile {
    sample: LatticeSample,
    /// cube member point ids per generation.
    cubes: Vec<Vec<Vec<usize>>>,
    space: SpaceFile,
}

#[derive(Serialize, Deserialize)]
struct SpaceFile {
    distance_matrix: Vec<Vec<f64>>,
    mass: Vec<f64>,
}

#[derive(Deserialize)]
struct WeightFile {
    w: Vec<f64>,
}

fn resolve_weights(
    family: &Option<WeightFamilySpec>,
    file: &Option<PathBuf>,
    space: &FiniteMetricSpace,
    measure: &DoublingMeasure,
) -> Result<Vec<a2lab::shift::Weighted>, String> {
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
        let parsed: WeightFile = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        let a2 = a2lab::weights::a2_characteristic(space, measure, &parsed.w);
        return Ok(vec![a2lab::shift::Weighted { w: parsed.w, a2 }]);
    }
    match family {
        Some(f) => f.build(space, measure).map_err(|e| e.to_string()),
        None => Err("need --weights or --weight-file".into()),
    }
}

fn load_space(path: &PathBuf) -> Result<(FiniteMetricSpace, DoublingMeasure), String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    space_from_json(&text).map_err(|e| e.to_string())
}

fn load_sample(path: &PathBuf) -> Result<(FiniteMetricSpace, DoublingMeasure, CubeTree), String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let file: SampleFile = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let space =
        FiniteMetricSpace::from_matrix(file.space.distance_matrix).map_err(|e| e.to_string())?;
    let measure = DoublingMeasure::new(file.space.mass).map_err(|e| e.to_string())?;
    let tree = build_cubes(&space, &file.sample);
    Ok((space, measure, tree))
}

fn write_table(table: &Table, path: &PathBuf) -> Result<(), String> {
    std::fs::write(path, table.to_csv()).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool, String> {
    match cli.command {
        Command::Run { config, out_dir } => {
            let text = std::fs::read_to_string(&config).map_err(|e| e.to_string())?;
            let config: ExperimentConfig =
                serde_json::from_str(&text).map_err(|e| format!("config parse: {e}"))?;
            let report = run_experiments(&config).map_err(|e| e.to_string())?;
            let written = emit_report(&report, &out_dir).map_err(|e| e.to_string())?;
            for exp in &report.experiments {
                println!(
                    "{:14} {}  ({:.2}s)",
                    exp.name,
                    if exp.pass { "pass" } else { "FAIL" },
                    exp.runtime_s
                );
                for note in &exp.notes {
                    println!("               note: {note}");
                }
            }
            println!("report: {}", written[0].display());
            Ok(report.all_passed())
        }
        Command::Lattice { command } => match command {
            LatticeCmd::Build(args) => {
                let (space, measure) = load_space(&args.space)?;
                let params = HierarchyParams {
                    delta: args.delta,
                    levels: args.levels,
                    seed: args.seed,
                };
                if let Some(warning) = params.validate().map_err(|e| e.to_string())? {
                    eprintln!("warning: {warning}");
                }
                let mode = if args.exact {
                    GridMode::ExactUniform
                } else {
                    GridMode::Greedy
                };
                let sample =
                    build_hierarchy(&space, &params, mode, args.levels, DEFAULT_ENUMERATION_CAP)
                        .map_err(|e| e.to_string())?;
                let tree = build_cubes(&space, &sample);
                let cover = verify_cover(&space, &tree).map_err(|e| e.to_string())?;
                let n = space.len();
                let file = SampleFile {
                    cubes: tree
                        .cubes
                        .iter()
                        .map(|level| level.iter().map(|c| c.members.clone()).collect())
                        .collect(),
                    sample,
                    space: SpaceFile {
                        distance_matrix: (0..n)
                            .map(|i| (0..n).map(|j| space.dist(i, j)).collect())
                            .collect(),
                        mass: (0..n).map(|i| measure.mass(i)).collect(),
                    },
                };
                std::fs::write(&args.out, serde_json::to_string(&file).unwrap())
                    .map_err(|e| e.to_string())?;
                println!(
                    "lattice: {} generations, worst proximity ratio {:.3}, written to {}",
                    args.levels + 1,
                    cover.worst_proximity_ratio,
                    args.out.display()
                );
                Ok(true)
            }
            LatticeCmd::Enumerate(args) => {
                let (space, _) = load_space(&args.space)?;
                let params = HierarchyParams {
                    delta: args.delta,
                    levels: args.levels,
                    seed: 0,
                };
                let all =
                    enumerate_hierarchies(&space, &params, args.cap).map_err(|e| e.to_string())?;
                let total: f64 = all.iter().map(|s| s.weight).sum();
                println!("events: {}  total weight: {total:.15}", all.len());
                if let Some(out) = args.out {
                    std::fs::write(&out, serde_json::to_string(&all).unwrap())
                        .map_err(|e| e.to_string())?;
                    println!("written to {}", out.display());
                }
                Ok((total - 1.0).abs() < 1e-9)
            }
        },
        Command::Census { command } => match command {
            CensusCmd::Run(args) => {
                let (space, _) = load_space(&args.space)?;
                let threshold = args.threshold / space.scale;
                let report = coloring::census(&space, threshold, args.v, args.max_points)
                    .map_err(|e| e.to_string())?;
                let mut table = Table {
                    name: "census".into(),
                    columns: vec![
                        "s_mask".into(),
                        "card_ws".into(),
                        "distinct_images".into(),
                        "card_b".into(),
                        "fraction".into(),
                    ],
                    rows: Vec::new(),
                };
                for entry in &report.per_s {
                    table.rows.push(vec![
                        entry.s_mask as f64,
                        entry.card_ws as f64,
                        entry.distinct_images as f64,
                        report.card_b as f64,
                        report.fraction,
                    ]);
                }
                write_table(&table, &args.out)?;
                println!(
                    "colorings: {}  v-red: {}  fraction {:.6} >= bound {:.6}: {}",
                    report.total_colorings,
                    report.card_b,
                    report.fraction,
                    report.lower_bound,
                    report.fraction >= report.lower_bound - 1e-12
                );
                Ok(report.injective_everywhere && report.fraction >= report.lower_bound - 1e-12)
            }
        },
        Command::Goodness { command } => match command {
            GoodnessCmd::Pbad(args) => {
                let (space, _) = load_space(&args.space)?;
                let hierarchy = HierarchyParams {
                    delta: args.delta,
                    levels: args.levels,
                    seed: args.seed,
                };
                let (r_lo, r_hi) = args.r_sweep;
                let rs: Vec<usize> = (r_lo..=r_hi).collect();
                let rows = parallel_map(rs.len(), |i| {
                    let goodness = GoodnessParams {
                        gamma: args.gamma,
                        r: rs[i],
                        a: 0.5,
                        eta: 0.0,
                    };
                    estimate_bad_probability(
                        &space,
                        &hierarchy,
                        &goodness,
                        args.levels,
                        args.trials,
                        DEFAULT_ENUMERATION_CAP,
                    )
                    .map_err(|e| e.to_string())
                });
                let mut table = Table {
                    name: "pbad".into(),
                    columns: vec![
                        "r".into(),
                        "trials".into(),
                        "worst_frequency".into(),
                        "stderr".into(),
                    ],
                    rows: Vec::new(),
                };
                let mut below_half_somewhere = false;
                for (i, res) in rows.into_iter().enumerate() {
                    let rep = res?;
                    println!(
                        "r = {}: worst bad-frequency {:.4} +- {:.4}",
                        rs[i], rep.worst_frequency, rep.stderr
                    );
                    below_half_somewhere |= rep.worst_frequency + 2.0 * rep.stderr <= 0.5;
                    table.rows.push(vec![
                        rs[i] as f64,
                        args.trials as f64,
                        rep.worst_frequency,
                        rep.stderr,
                    ]);
                }
                write_table(&table, &args.out)?;
                Ok(below_half_somewhere)
            }
        },
        Command::Shift { command } => match command {
            ShiftCmd::Bench(args) => {
                let (tree_space, measure, tree) = load_sample(&args.tree)?;
                let sys = build_haar_system(&tree, &measure).map_err(|e| e.to_string())?;
                let weights =
                    resolve_weights(&args.weights, &args.weight_file, &tree_space, &measure)?;
                let bench = shift_bound_experiment(
                    &tree,
                    &measure,
                    &sys,
                    &weights,
                    &args.complexities,
                    args.draws,
                    args.seed,
                    tree_space.len(),
                )
                .map_err(|e| e.to_string())?;
                let mut table = Table {
                    name: "shift".into(),
                    columns: vec![
                        "complexity".into(),
                        "m".into(),
                        "n".into(),
                        "a2".into(),
                        "norm".into(),
                        "slope".into(),
                    ],
                    rows: Vec::new(),
                };
                let mut pass = bench.method_agreement <= 1e-6;
                for row in &bench.rows {
                    let slope = bench
                        .slopes
                        .iter()
                        .find(|(m, n, _)| *m == row.m && *n == row.n)
                        .map(|(_, _, s)| *s)
                        .unwrap_or(f64::NAN);
                    table.rows.push(vec![
                        (row.m + row.n + 1) as f64,
                        row.m as f64,
                        row.n as f64,
                        row.a2,
                        row.worst_norm,
                        slope,
                    ]);
                }
                for (m, n, slope) in &bench.slopes {
                    println!("complexity ({m}, {n}): slope {slope:.4}");
                    pass &= *slope <= 1.05;
                }
                write_table(&table, &args.out)?;
                Ok(pass)
            }
        },
        Command::Bellman { command } => match command {
            BellmanCmd::Check(args) => {
                let params = BellmanParams::new(args.alpha, args.q).map_err(|e| e.to_string())?;
                let rep = bellman_hessian_check(&params, args.samples, 8, args.seed);
                println!(
                    "worst slack {:.3e}  fd error {:.3e}  concavity {:.3e}  range {:.6}",
                    rep.worst_slack, rep.worst_fd_error, rep.worst_concavity, rep.range_ratio
                );
                Ok(rep.worst_slack >= -1e-9
                    && rep.worst_fd_error < 1e-6
                    && rep.worst_concavity >= -1e-12
                    && rep.range_ratio <= 1.0 + 1e-9)
            }
            BellmanCmd::Tau(args) => {
                let (tree_space, measure, tree) = load_sample(&args.tree)?;
                let weights =
                    resolve_weights(&args.weights, &args.weight_file, &tree_space, &measure)?;
                let pairs: Vec<(Vec<f64>, f64)> =
                    weights.into_iter().map(|w| (w.w, w.a2)).collect();
                let table = tau_carleson_experiment(&tree, &measure, &pairs, args.alpha)
                    .map_err(|e| e.to_string())?;
                let mut csv = Table {
                    name: "tau".into(),
                    columns: vec!["a2".into(), "carleson".into(), "midpoint_min".into()],
                    rows: Vec::new(),
                };
                let mut midpoint_ok = true;
                for row in &table.rows {
                    csv.rows
                        .push(vec![row.a2, row.carleson_constant, row.midpoint_min]);
                    midpoint_ok &= row.midpoint_min >= -1e-9;
                }
                write_table(&csv, &args.out)?;
                println!(
                    "slope {:.4}  midpoint nonnegative: {midpoint_ok}",
                    table.slope
                );
                Ok(midpoint_ok && table.slope <= args.alpha + 0.05)
            }
        },
        Command::Decompose { command } => match command {
            DecomposeCmd::Check(args) => {
                let (space, measure) = load_space(&args.space)?;
                let kind = match args.kernel.as_str() {
                    "inv-dist" => KernelKind::InvDist,
                    "inv-dist-signed" => KernelKind::InvDistSigned,
                    "zero" => KernelKind::Zero,
                    other => return Err(format!("unknown kernel {other}")),
                };
                let profile = KernelProfile::radius();
                let (op, bounds) = build_model_operator(&space, &measure, kind, profile.clone())
                    .map_err(|e| e.to_string())?;
                let params = HierarchyParams {
                    delta: args.delta,
                    levels: args.levels,
                    seed: args.seed,
                };
                let sample = build_hierarchy(
                    &space,
                    &params,
                    GridMode::Greedy,
                    args.levels,
                    DEFAULT_ENUMERATION_CAP,
                )
                .map_err(|e| e.to_string())?;
                let tree = build_cubes(&space, &sample);
                let sys = build_haar_system(&tree, &measure).map_err(|e| e.to_string())?;
                let sub = subtract_paraproducts(&op.matrix, &tree, &measure, &sys);
                let table = haar_coefficient_table(&sub.t_tilde, &tree, &measure, &sys);
                let goodness = GoodnessParams::plain(0.25, args.r0);
                let good = a2lab::goodness::classify_all(&space, &tree, &goodness);
                let rep_in = decay_check_in(&table, &tree, &sys, &good, args.r0, profile.holder_eps);
                let rep_out = decay_check_out(
                    &table,
                    &space,
                    &tree,
                    &measure,
                    &sys,
                    &good,
                    &profile,
                    profile.holder_eps,
                );
                let mut csv = Table {
                    name: "decay".into(),
                    columns: vec![
                        "bucket".into(),
                        "gap".into(),
                        "s_bin".into(),
                        "pairs".into(),
                        "max_ratio".into(),
                    ],
                    rows: Vec::new(),
                };
                for row in &rep_in.rows {
                    csv.rows
                        .push(vec![0.0, row.gap as f64, -1.0, row.pairs as f64, row.max_ratio]);
                }
                for row in &rep_out.rows {
                    csv.rows.push(vec![
                        1.0,
                        row.gap as f64,
                        row.s_bin.map(|s| s as f64).unwrap_or(-1.0),
                        row.pairs as f64,
                        row.max_ratio,
                    ]);
                }
                write_table(&csv, &args.out)?;
                println!(
                    "kernel size {:.3}  holder {:.3}  worst in-ratio {:.3}  worst out-ratio {:.3}",
                    bounds.size_constant, bounds.holder_x, rep_in.worst_ratio, rep_out.worst_ratio
                );
                Ok(rep_in.worst_ratio.is_finite() && rep_out.worst_ratio.is_finite())
            }
            DecomposeCmd::AvgIdentity(args) => {
                let (space, measure) = load_space(&args.space)?;
                let hierarchy = HierarchyParams {
                    delta: args.delta,
                    levels: args.levels,
                    seed: args.seed,
                };
                let goodness = GoodnessParams::from_kernel(1.0, 2.0, 1, 0.05, args.delta);
                let e = enumerate_goodness(&space, &hierarchy, &goodness, DEFAULT_ENUMERATION_CAP)
                    .map_err(|e| e.to_string())?;
                let a = 0.5 * e.min_p();
                let adjust = really_good_adjust(&e, a).map_err(|e| e.to_string())?;
                let mut rng = Rng::new(args.seed);
                let mut worst = 0.0f64;
                for _ in 0..args.trials {
                    let mut op = Mat::zeros(space.len(), space.len());
                    for v in op.data.iter_mut() {
                        *v = rng.symmetric() * 2.0;
                    }
                    for _ in 0..args.trials {
                        let f: Vec<f64> = (0..space.len()).map(|_| rng.symmetric()).collect();
                        let g: Vec<f64> = (0..space.len()).map(|_| rng.symmetric()).collect();
                        let res = averaging_identity_check(&measure, &e, a, &op, &f, &g)
                            .map_err(|e| e.to_string())?;
                        worst = worst
                            .max(res.residual_geq / res.scale)
                            .max(res.residual_strict / res.scale);
                    }
                }
                println!(
                    "events {}  a = {a:.6}  equalization deviation {:.2e}  worst identity residual {:.2e}",
                    e.events.len(),
                    adjust.worst_deviation,
                    worst
                );
                Ok(worst <= 1e-12 && adjust.worst_deviation <= 1e-12)
            }
        },
    }
}
