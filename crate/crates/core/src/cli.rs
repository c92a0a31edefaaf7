//! Command-line front end. Every command writes its outputs plus a
//! `manifest.json` into `--out-dir`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::construct::{construct_relu_attractor_with, ConstructedFile, DEFAULT_C_MAX};
use crate::dynsys::{DynamicalSystem, SystemFile};
use crate::equilibria::{find_equilibria, EquilibriumReport, SearchOptions, DEFAULT_ETA};
use crate::error::{Error, Result};
use crate::probe::{
    build_probes, load_idx, stratification_study, synth_blobs, train, Category, CheckpointSchedule, Dataset,
    JacobianTarget, TinyNet, TrainConfig,
};
use crate::sampling::SampleBox;
use crate::simulate::{self, fmt_f64, Trajectory};
use crate::spectral::{self, DEFAULT_RANK_TOL};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_TRAINING: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "attractor", version, about = "Find, build and measure continuous attractors")]
pub struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Relative tolerance for numerical rank.
    #[arg(long, global = true, default_value_t = DEFAULT_RANK_TOL)]
    pub rank_tol: f64,
    /// Worker threads for multistart solving and batch spectra.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a ReLU network with a known m-dimensional attractor and verify it.
    Construct(ConstructArgs),
    /// Multistart equilibrium search with per-point spectra and dimensions.
    Analyze(AnalyzeArgs),
    /// Iterate a map or integrate a flow and report slow-fast diagnostics.
    Simulate(SimulateArgs),
    /// Train the probe classifier and trace Jacobian singular-value CV.
    Probe(ProbeArgs),
    /// Singular values, CV and gap statistics of a matrix file.
    SvdReport(SvdReportArgs),
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub z: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = DEFAULT_C_MAX)]
    pub c_max: f64,
    /// Attractor points checked by the verification report.
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// System JSON (plain or with a ground_truth block).
    pub system: PathBuf,
    /// `LO:HI` for every coordinate or `LO:HI,LO:HI,...`. Defaults to the padded
    /// sign-preserving box around the known attractor when the file has one, else -2:2.
    #[arg(long = "box")]
    pub sample_box: Option<String>,
    #[arg(long, default_value_t = 64)]
    pub starts: usize,
    #[arg(long, default_value_t = DEFAULT_ETA)]
    pub eta: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// System JSON; omit when using --stratified or --control.
    #[arg(required_unless_present_any = ["stratified", "control"])]
    pub system: Option<PathBuf>,
    /// Generate a spectrally stratified sine map of this dimension.
    #[arg(long, conflicts_with_all = ["system", "control"])]
    pub stratified: Option<usize>,
    /// Generate a spectrally uniform sine map of this dimension.
    #[arg(long, conflicts_with_all = ["system", "stratified"])]
    pub control: Option<usize>,
    /// Largest over smallest singular value of the stratified map.
    #[arg(long, default_value_t = 100.0)]
    pub ratio: f64,
    /// Map iterations (discrete systems).
    #[arg(long, default_value_t = simulate::DEFAULT_LONG_RUN)]
    pub steps: usize,
    /// Integration horizon (continuous systems).
    #[arg(long, default_value_t = 10.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 0.01)]
    pub h: f64,
    /// Comma-separated initial state; seeded random in [-1, 1]^n by default.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    /// Steps at which to emit the state, e.g. 50,100,200,20000.
    #[arg(long, value_delimiter = ',')]
    pub snapshots: Option<Vec<usize>>,
    #[arg(long, default_value_t = simulate::DEFAULT_THETA)]
    pub theta: f64,
    #[arg(long, default_value_t = simulate::DEFAULT_EPS_CONV)]
    pub eps_conv: f64,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    /// Train on Gaussian blobs.
    #[arg(long, conflicts_with = "mnist", required_unless_present = "mnist")]
    pub synthetic: bool,
    /// IDX image and label files.
    #[arg(long, num_args = 2, value_names = ["IMAGES", "LABELS"])]
    pub mnist: Option<Vec<PathBuf>>,
    #[arg(long, default_value_t = 1000)]
    pub max: usize,
    #[arg(long, default_value_t = 9)]
    pub holdout_digit: usize,
    /// Digit used as natural noise; defaults to the digit below the held-out one.
    #[arg(long)]
    pub natural_digit: Option<usize>,
    /// Trained classes of the synthetic task.
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 200)]
    pub per_class: usize,
    #[arg(long, default_value_t = 8.0)]
    pub separation: f64,
    /// Hidden layer sizes.
    #[arg(long, value_delimiter = ',', default_value = "128,64")]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, default_value_t = 5e-4)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 20)]
    pub probes_per_category: usize,
    #[arg(long, default_value_t = 50)]
    pub study_samples: usize,
    /// `softmax` or `logits`.
    #[arg(long, default_value = "softmax")]
    pub jacobian_at: JacobianTarget,
}

#[derive(Debug, Args)]
pub struct SvdReportArgs {
    /// System JSON (its W is analysed) or a headerless CSV matrix.
    pub matrix: PathBuf,
    /// Also report eigenvalues (square matrices only).
    #[arg(long)]
    pub eigen: bool,
}

#[derive(Debug, Serialize)]
struct FileHash {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    command_line: Vec<String>,
    seed: u64,
    tool_version: &'static str,
    inputs: Vec<FileHash>,
    outputs: Vec<FileHash>,
    wall_clock_seconds: f64,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Tracks what a command read and wrote. Files are written to a temporary
/// name first and renamed into place.
struct Run {
    dir: PathBuf,
    inputs: Vec<FileHash>,
    outputs: Vec<FileHash>,
}

impl Run {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    fn read_input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path)?;
        self.inputs.push(FileHash {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(bytes)
    }

    fn hash_input(&mut self, path: &Path) -> Result<()> {
        self.read_input(path).map(drop)
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = write_atomic(&self.dir, name, bytes)?;
        self.outputs.push(FileHash {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn finish(self, argv: &[String], seed: u64, started: Instant) -> Result<()> {
        let manifest = RunManifest {
            command_line: argv.to_vec(),
            seed,
            tool_version: env!("CARGO_PKG_VERSION"),
            inputs: self.inputs,
            outputs: self.outputs,
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        write_atomic(&self.dir, "manifest.json", text.as_bytes())?;
        Ok(())
    }
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, &path)?;
    Ok(path)
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Divergence { .. } => EXIT_DIVERGENCE,
        Error::TrainingDiverged { .. } => EXIT_TRAINING,
        Error::InvalidInput(_)
        | Error::DimensionMismatch { .. }
        | Error::Format { .. }
        | Error::Length { .. }
        | Error::Io(_)
        | Error::Json(_)
        | Error::Csv(_) => EXIT_USAGE,
        _ => 1,
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match execute(&cli, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Divergence { last_state, .. } = &e {
                let s: Vec<String> = last_state.iter().map(|v| fmt_f64(*v)).collect();
                eprintln!("last state: {}", s.join(","));
            }
            if matches!(e, Error::TrainingDiverged { .. }) {
                eprintln!("hint: lower the learning rate (--lr)");
            }
            exit_code(&e)
        }
    }
}

fn execute(cli: &Cli, argv: &[String]) -> Result<()> {
    if !(cli.rank_tol > 0.0 && cli.rank_tol < 1.0) {
        return Err(Error::invalid("--rank-tol must lie in (0, 1)"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let started = Instant::now();
    let mut run = Run::new(&cli.out_dir)?;
    pool.install(|| match &cli.command {
        Command::Construct(a) => cmd_construct(cli, a, &mut run),
        Command::Analyze(a) => cmd_analyze(cli, a, &mut run),
        Command::Simulate(a) => cmd_simulate(cli, a, &mut run),
        Command::Probe(a) => cmd_probe(cli, a, &mut run),
        Command::SvdReport(a) => cmd_svd_report(cli, a, &mut run),
    })?;
    run.finish(argv, cli.seed, started)
}

fn cmd_construct(cli: &Cli, a: &ConstructArgs, run: &mut Run) -> Result<()> {
    let ca = construct_relu_attractor_with(a.p, a.z, a.m, cli.seed, a.c_max)?;
    let report = ca.verify(a.samples, cli.seed)?;
    run.write_json("system.json", &ca.to_file())?;
    run.write_json("verification.json", &report)?;
    let n = ca.n();
    let ranks: Vec<usize> = report.samples.iter().map(|s| s.rank).collect();
    let rank = if ranks.iter().all(|&r| r == report.expected_rank) {
        report.expected_rank.to_string()
    } else {
        format!("{ranks:?}")
    };
    println!("rank = {rank} = n − m ({n} − {})", ca.m());
    println!(
        "verification: {} ({} samples, {} failures)",
        if report.passed() { "passed" } else { "FAILED" },
        report.samples.len(),
        report.failures.len()
    );
    if report.passed() {
        Ok(())
    } else {
        Err(Error::ConstructionFailed("verification failed".into()))
    }
}

/// A system file, plus the known attractor when it carries a ground-truth block.
fn load_system(run: &mut Run, path: &Path) -> Result<(DynamicalSystem, Option<ConstructedFile>)> {
    let bytes = run.read_input(path)?;
    let value: serde_json::Value = serde_json::from_slice(&bytes)?;
    if value.get("ground_truth").is_some() {
        let file: ConstructedFile = serde_json::from_value(value)?;
        let sys = file.clone().into_attractor()?.system().clone();
        Ok((sys, Some(file)))
    } else {
        let file: SystemFile = serde_json::from_value(value)?;
        Ok((file.into_system()?, None))
    }
}

#[derive(Serialize)]
struct AnalysisOutput<'a> {
    sample_box: (&'a [f64], &'a [f64]),
    starts: usize,
    equilibria: &'a [EquilibriumReport],
}

fn cmd_analyze(cli: &Cli, a: &AnalyzeArgs, run: &mut Run) -> Result<()> {
    let (sys, truth) = load_system(run, &a.system)?;
    let sample_box = match (&a.sample_box, truth) {
        (Some(spec), _) => spec.parse::<SampleBox>()?.broadcast(sys.n())?,
        (None, Some(file)) => {
            let ca = file.into_attractor()?;
            ca.search_box(64, cli.seed)?
        }
        (None, None) => SampleBox::cube(sys.n(), -2.0, 2.0)?,
    };
    let opts = SearchOptions {
        rank_tol: cli.rank_tol,
        eta: a.eta,
        ..SearchOptions::default()
    };
    let found = find_equilibria(&sys, &sample_box, a.starts, cli.seed, &opts)?;
    run.write_json(
        "analysis.json",
        &AnalysisOutput {
            sample_box: (sample_box.lo(), sample_box.hi()),
            starts: a.starts,
            equilibria: &found,
        },
    )?;
    println!("{} equilibria from {} starts", found.len(), a.starts);
    println!("{:>4}  {:>12}  {:>4}  {:>3}  {:<9}  point", "#", "residual", "rank", "dim", "stability");
    for (i, e) in found.iter().enumerate() {
        let point: Vec<String> = e.point.iter().map(|v| format!("{v:.4}")).collect();
        println!(
            "{i:>4}  {:>12.3e}  {:>4}  {:>3}  {:<9}  [{}]",
            e.residual,
            e.spectrum.numerical_rank,
            e.attractor_dim,
            format!("{:?}", e.stability).to_lowercase(),
            point.join(", ")
        );
    }
    Ok(())
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs, run: &mut Run) -> Result<()> {
    let sys = if let Some(n) = a.stratified {
        simulate::stratified_sine_map(n, a.ratio, cli.seed)?
    } else if let Some(n) = a.control {
        simulate::uniform_sine_map(n, simulate::UNIFORM_LEVEL, cli.seed)?
    } else {
        let path = a.system.as_ref().expect("clap requires a system");
        load_system(run, path)?.0
    };
    if a.stratified.is_some() || a.control.is_some() {
        run.write_json("system.json", &sys.to_file())?;
    }
    let x0 = match &a.x0 {
        Some(v) if v.len() != sys.n() => {
            return Err(Error::DimensionMismatch {
                context: "--x0",
                expected: sys.n(),
                found: v.len(),
            })
        }
        Some(v) => DVector::from_vec(v.clone()),
        None => simulate::default_start(sys.n(), cli.seed),
    };
    let traj = if sys.form().is_continuous() {
        simulate::integrate_rk4(&sys, &x0, a.t_end, a.h)?
    } else {
        simulate::iterate_map(&sys, &x0, a.steps)?
    };
    let report = simulate::slow_fast_report(&traj, a.theta, a.eps_conv)?;
    let mut csv = Vec::new();
    traj.write_csv(&mut csv)?;
    run.write("trajectory.csv", &csv)?;
    run.write_json("slow_fast.json", &report)?;
    if let Some(steps) = &a.snapshots {
        run.write("snapshots.csv", &snapshot_csv(&traj, steps)?)?;
    }
    println!(
        "collapse_step = {}, terminal_drift = {:.6e}, drift_ratio = {:.3}, converged = {}",
        report.collapse_step, report.terminal_drift, report.drift_ratio, report.converged
    );
    Ok(())
}

fn snapshot_csv(traj: &Trajectory, steps: &[usize]) -> Result<Vec<u8>> {
    let snaps = traj.snapshots(steps)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["step".to_string()];
    header.extend((1..=traj.dim()).map(|i| format!("x_{i}")));
    w.write_record(&header)?;
    for (step, x) in snaps {
        let mut row = vec![step.to_string()];
        row.extend(x.iter().map(|v| fmt_f64(*v)));
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Training set plus held-out and natural-noise pools, and per-class groups for the study.
struct ProbeData {
    train: Dataset,
    held_out: Vec<DVector<f64>>,
    natural: Vec<DVector<f64>>,
    class_names: Vec<String>,
}

fn probe_data(cli: &Cli, a: &ProbeArgs, run: &mut Run) -> Result<ProbeData> {
    if let Some(paths) = &a.mnist {
        run.hash_input(&paths[0])?;
        run.hash_input(&paths[1])?;
        let all = load_idx(&paths[0], &paths[1], a.max)?;
        let natural_digit = a
            .natural_digit
            .unwrap_or(if a.holdout_digit == 0 { 1 } else { a.holdout_digit - 1 });
        if a.holdout_digit >= all.classes() || natural_digit >= all.classes() || natural_digit == a.holdout_digit {
            return Err(Error::invalid("held-out and natural digits must be distinct labels"));
        }
        let (train, kept) = all.without_classes(&[a.holdout_digit, natural_digit])?;
        Ok(ProbeData {
            held_out: all.of_class(a.holdout_digit),
            natural: all.of_class(natural_digit),
            class_names: kept.iter().map(|d| format!("digit_{d}")).collect(),
            train,
        })
    } else {
        let c = a.classes;
        let all = synth_blobs(c + 2, a.dim, a.per_class, a.separation, cli.seed)?;
        let (train, _) = all.without_classes(&[c, c + 1])?;
        Ok(ProbeData {
            held_out: all.of_class(c),
            natural: all.of_class(c + 1),
            class_names: (0..c).map(|i| format!("class_{i}")).collect(),
            train,
        })
    }
}

#[derive(Serialize)]
struct ProbeSummary {
    parameter_count: usize,
    train_samples: usize,
    classes: usize,
    config: TrainConfig,
    jacobian_at: JacobianTarget,
    final_accuracy: f64,
    epoch_losses: Vec<f64>,
    final_checkpoint: usize,
    final_mean_cv: Vec<(Category, Option<f64>)>,
}

fn cmd_probe(cli: &Cli, a: &ProbeArgs, run: &mut Run) -> Result<()> {
    let data = probe_data(cli, a, run)?;
    let mut dims = vec![data.train.dim()];
    dims.extend(&a.hidden);
    dims.push(data.train.classes());
    let net = TinyNet::new(&dims, crate::Activation::Relu, cli.seed)?;
    let cfg = TrainConfig {
        learning_rate: a.lr,
        momentum: a.momentum,
        weight_decay: a.weight_decay,
        batch_size: a.batch_size,
        epochs: a.epochs,
        seed: cli.seed,
    };
    let probes = build_probes(&data.train, &data.held_out, &data.natural, a.probes_per_category, cli.seed);
    let parameter_count = net.parameter_count();
    let out = train(net, &data.train, &cfg, &CheckpointSchedule::default(), &probes, a.jacobian_at)?;

    let mut groups: Vec<(String, Vec<DVector<f64>>)> = data
        .class_names
        .iter()
        .enumerate()
        .map(|(k, name)| (name.clone(), data.train.of_class(k)))
        .collect();
    groups.push(("held_out_class".into(), data.held_out.clone()));
    groups.push(("natural_noise".into(), data.natural.clone()));
    let noise = build_probes(&data.train, &[], &[], a.study_samples, cli.seed ^ 0x5eed)
        .into_iter()
        .filter(|p| p.category == Category::RandomNoise)
        .map(|p| p.x)
        .collect();
    groups.push(("random_noise".into(), noise));
    let study = stratification_study(&out.net, &groups, a.study_samples, a.jacobian_at)?;
    for name in &study.skipped {
        eprintln!("warning: group `{name}` has no usable samples, skipped");
    }

    let mut buf = Vec::new();
    out.trace.write_csv(&mut buf)?;
    run.write("cv_trace.csv", &buf)?;
    let mut buf = Vec::new();
    study.write_csv(&mut buf)?;
    run.write("stratification.csv", &buf)?;
    let mut buf = Vec::new();
    study.write_samples_csv(&mut buf)?;
    run.write("stratification_samples.csv", &buf)?;
    run.write_json("model.json", &out.net.to_file())?;

    let last = out.trace.checkpoints().last().copied().unwrap_or(0);
    let summary = ProbeSummary {
        parameter_count,
        train_samples: data.train.len(),
        classes: data.train.classes(),
        config: cfg,
        jacobian_at: a.jacobian_at,
        final_accuracy: out.final_accuracy,
        epoch_losses: out.epoch_losses,
        final_checkpoint: last,
        final_mean_cv: Category::ALL.iter().map(|&c| (c, out.trace.mean_cv(last, c))).collect(),
    };
    run.write_json("probe_summary.json", &summary)?;
    println!("train accuracy = {:.4}", summary.final_accuracy);
    for (c, cv) in &summary.final_mean_cv {
        println!("{:<15} mean CV at checkpoint {last}: {}", c.name(), cv.map_or("n/a".into(), |v| format!("{v:.4}")));
    }
    for g in &study.groups {
        println!("{:<15} mean CV {:.4}  median {:.4}  (n = {})", g.name, g.mean_cv, g.median_cv, g.samples);
    }
    Ok(())
}

/// Headerless CSV of numbers, one matrix row per line.
fn parse_csv_matrix(bytes: &[u8]) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|t| t.parse::<f64>().map_err(|_| Error::invalid(format!("bad number `{t}` in matrix"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::invalid("matrix file is empty"));
    }
    crate::dynsys::matrix_from_rows(&rows, "matrix file")
}

fn cmd_svd_report(cli: &Cli, a: &SvdReportArgs, run: &mut Run) -> Result<()> {
    let bytes = run.read_input(&a.matrix)?;
    let is_json = bytes.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'{');
    let m = if is_json {
        let file: SystemFile = serde_json::from_slice(&bytes)?;
        file.into_system()?.w().clone()
    } else {
        parse_csv_matrix(&bytes)?
    };
    let report = if a.eigen {
        spectral::full_spectrum(&m, cli.rank_tol)?
    } else {
        spectral::svd_spectrum_with_tol(&m, cli.rank_tol)?
    };
    run.write_json("svd_report.json", &report)?;
    let sv: Vec<String> = report.singular_values.iter().map(|v| format!("{v:.6e}")).collect();
    println!("singular values: {}", sv.join(" "));
    println!(
        "rank = {} (tol {:.1e}), cv = {}, max gap ratio = {}",
        report.numerical_rank,
        report.tol_used,
        report.cv.map_or("undefined".into(), |v| format!("{v:.6}")),
        report.max_gap_ratio
    );
    Ok(())
}
