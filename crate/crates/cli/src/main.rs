//! Command-line front end for the grid-world path-pair toolkit.
//!
//! Subcommands cover the whole workflow: `generate` seeded map-pair
//! datasets, re-`plan` or rule-`label` them, `rasterize` and `augment`
//! path images, `train` and `evaluate` the fork/detour classifier,
//! `identify` attacks in two stages, `bench` identification throughput,
//! `import` externally produced path pairs, and run a full `experiment`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 internal error (I/O and other environmental failures).

mod svg;

use std::fmt;
use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use advpath::classifier::{self, ClassifierError, SvmParams};
use advpath::gridworld::{Cell, PathPair, Scenario};
use advpath::imaging::{self, AugmentOp, ImageError};
use advpath::metrics::{self, EvalReport, MetricsError};
use advpath::perturb::Placement;
use advpath::pipeline::{self, ExperimentConfig, PipelineError, Stage};
use advpath::planner::{self, PlannerConfig, PlannerMode};
use advpath::storage::{self, Manifest, Record, StorageError};
use advpath::taxonomy::{Label, DEFAULT_THRESHOLD};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.code());
        }
    }
}

/// Runtime failures, split by exit code.
enum CliError {
    /// Bad input data or a violated domain invariant (exit 2).
    Data(String),
    /// Environmental failure — I/O, filesystem (exit 3).
    Internal(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Data(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

impl From<StorageError> for CliError {
    fn from(e: StorageError) -> Self {
        match e {
            StorageError::Io { .. } => CliError::Internal(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ClassifierError> for CliError {
    fn from(e: ClassifierError) -> Self {
        match e {
            ClassifierError::Io(_) => CliError::Internal(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Io { .. } => CliError::Internal(e.to_string()),
            PipelineError::Storage(s) => s.into(),
            PipelineError::Classifier(c) => c.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ImageError> for CliError {
    fn from(e: ImageError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(format!("config is not valid json: {e}"))
    }
}

#[derive(Parser)]
#[command(
    name = "advpath",
    version,
    about = "Grid-world path-pair generation, attack identification, and classifier experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate map pairs, plan their paths, rule-label them, and write a dataset
    Generate(GenerateArgs),
    /// Re-plan the paths of a dataset's stored maps (labels are cleared)
    Plan(PlanArgs),
    /// Rule-label every record of a dataset (the labeling oracle)
    Label(LabelArgs),
    /// Export each record's path image as a portable pixmap
    Rasterize(RasterizeArgs),
    /// Apply a flip or rotation to one record's path image
    Augment(AugmentArgs),
    /// Train the fork/detour classifier on a labeled dataset
    Train(TrainArgs),
    /// Score a labeled dataset with a trained model and report metrics
    Evaluate(EvaluateArgs),
    /// Two-stage attack identification over a dataset
    Identify(IdentifyArgs),
    /// Time the identification stages over a dataset
    Bench(BenchArgs),
    /// Import externally produced path pairs into the canonical format
    Import(ImportArgs),
    /// Run the full generate-train-evaluate experiment
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, Debug)]
struct GridDims {
    width: usize,
    height: usize,
}

fn parse_grid(s: &str) -> Result<GridDims, String> {
    let (w, h) = s
        .split_once('x')
        .ok_or_else(|| format!("expected WxH (e.g. 28x28), got {s:?}"))?;
    let width: usize = w.parse().map_err(|_| format!("bad width {w:?}"))?;
    let height: usize = h.parse().map_err(|_| format!("bad height {h:?}"))?;
    if width == 0 || height == 0 {
        return Err("grid dimensions must be positive".to_string());
    }
    Ok(GridDims { width, height })
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PlacementArg {
    /// Any free non-endpoint cell
    Random,
    /// An interior cell of the original path
    OnPath,
    /// A free cell within --radius of the original path
    NearPath,
}

impl PlacementArg {
    fn to_placement(self, radius: u32) -> Placement {
        match self {
            PlacementArg::Random => Placement::Random,
            PlacementArg::OnPath => Placement::OnPath,
            PlacementArg::NearPath => Placement::NearPath { radius },
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OpArg {
    #[value(name = "flip-h")]
    FlipH,
    #[value(name = "flip-v")]
    FlipV,
    #[value(name = "rot90")]
    Rot90,
    #[value(name = "rot180")]
    Rot180,
    #[value(name = "rot270")]
    Rot270,
}

impl OpArg {
    fn to_op(self) -> AugmentOp {
        match self {
            OpArg::FlipH => AugmentOp::FlipH,
            OpArg::FlipV => AugmentOp::FlipV,
            OpArg::Rot90 => AugmentOp::Rot90,
            OpArg::Rot180 => AugmentOp::Rot180,
            OpArg::Rot270 => AugmentOp::Rot270,
        }
    }
}

#[derive(clap::Args)]
struct GenerateArgs {
    /// Number of map pairs to generate (defaults to the config's count)
    #[arg(long, required_unless_present = "config")]
    count: Option<usize>,
    /// Manifest JSON supplying generator, planner, and threshold settings;
    /// the flags below override individual fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; pair k draws from stream seed+k
    #[arg(long)]
    seed: Option<u64>,
    /// Grid dimensions as WxH
    #[arg(long, value_parser = parse_grid)]
    grid: Option<GridDims>,
    /// Independent per-cell obstacle probability
    #[arg(long)]
    density: Option<f64>,
    #[arg(long, value_enum)]
    placement: Option<PlacementArg>,
    /// Chebyshev radius for near-path placement
    #[arg(long, default_value_t = 2)]
    radius: u32,
    /// Run value iteration for exactly K sweeps instead of to convergence
    #[arg(long, value_name = "K")]
    limited: Option<usize>,
    /// Fork/detour divergence threshold in cells
    #[arg(long)]
    threshold: Option<u32>,
    /// Output records file
    #[arg(long)]
    out: PathBuf,
    /// Manifest creation time (seconds since epoch); defaults to now
    #[arg(long)]
    timestamp: Option<u64>,
}

#[derive(clap::Args)]
struct PlanArgs {
    /// Input records file (must store maps)
    #[arg(long)]
    input: PathBuf,
    /// Output records file
    #[arg(long)]
    out: PathBuf,
    /// Run value iteration for exactly K sweeps instead of to convergence
    #[arg(long, value_name = "K")]
    limited: Option<usize>,
    #[arg(long)]
    timestamp: Option<u64>,
}

#[derive(clap::Args)]
struct LabelArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Fork/detour threshold; defaults to the input manifest's, then 4
    #[arg(long)]
    threshold: Option<u32>,
    #[arg(long)]
    timestamp: Option<u64>,
}

#[derive(clap::Args)]
struct RasterizeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Directory for pair_<no>.ppm files
    #[arg(long)]
    out_dir: PathBuf,
    /// Stop after this many records
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(clap::Args)]
struct AugmentArgs {
    #[arg(long)]
    input: PathBuf,
    /// Record number to rasterize
    #[arg(long)]
    no: u64,
    #[arg(long, value_enum)]
    op: OpArg,
    /// Output pixmap file
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct TrainArgs {
    /// Labeled input records file
    #[arg(long)]
    input: PathBuf,
    /// Where to write the trained model
    #[arg(long)]
    model_out: PathBuf,
    /// Skip minority-class augmentation balancing
    #[arg(long)]
    no_balance: bool,
    /// Seed for balancing augmentation draws
    #[arg(long, default_value_t = 0)]
    balance_seed: u64,
    /// Fraction of images used for training
    #[arg(long, default_value_t = 0.7)]
    train_fraction: f64,
    /// Seed for the train/test shuffle
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    /// Soft-margin penalty C
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Convergence tolerance on the projected gradient
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    #[arg(long, default_value_t = 50)]
    max_passes: usize,
    /// Seed for the per-pass coordinate shuffle
    #[arg(long, default_value_t = 0)]
    svm_seed: u64,
}

#[derive(clap::Args)]
struct EvaluateArgs {
    /// Labeled input records file
    #[arg(long)]
    input: PathBuf,
    /// Trained model file
    #[arg(long)]
    model: PathBuf,
    /// Directory for report.txt, roc/pr CSVs and SVG plots
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct IdentifyArgs {
    #[arg(long)]
    input: PathBuf,
    /// Trained model for the image stage
    #[arg(long, conflicts_with = "rule_only", required_unless_present = "rule_only")]
    model: Option<PathBuf>,
    /// Decide fork/detour by the divergence rule instead of the model
    #[arg(long)]
    rule_only: bool,
    /// Fork/detour threshold; defaults to the input manifest's, then 4
    #[arg(long)]
    threshold: Option<u32>,
    /// Directory for labeled.records plus the adversarial.records view
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    timestamp: Option<u64>,
}

#[derive(clap::Args)]
struct BenchArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Fork/detour threshold; defaults to the input manifest's, then 4
    #[arg(long)]
    threshold: Option<u32>,
}

#[derive(clap::Args)]
struct ImportArgs {
    /// Externally produced records file
    #[arg(long)]
    input: PathBuf,
    /// Grid dimensions the paths were planned on
    #[arg(long, value_parser = parse_grid)]
    grid: GridDims,
    /// Canonical output records file
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    timestamp: Option<u64>,
}

#[derive(clap::Args)]
struct ExperimentArgs {
    /// Output directory for all artifacts
    #[arg(long)]
    out: PathBuf,
    /// JSON experiment config; flags below override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_grid)]
    grid: Option<GridDims>,
    #[arg(long)]
    density: Option<f64>,
    /// Run value iteration for exactly K sweeps instead of to convergence
    #[arg(long, value_name = "K", conflicts_with = "exact")]
    limited: Option<usize>,
    /// Force exact value iteration
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    threshold: Option<u32>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    timestamp: Option<u64>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(args) => run_generate(args),
        Command::Plan(args) => run_plan(args),
        Command::Label(args) => run_label(args),
        Command::Rasterize(args) => run_rasterize(args),
        Command::Augment(args) => run_augment(args),
        Command::Train(args) => run_train(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Identify(args) => run_identify(args),
        Command::Bench(args) => run_bench(args),
        Command::Import(args) => run_import(args),
        Command::Experiment(args) => run_experiment_cmd(args),
    }
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn file_stem(path: &FsPath) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn label_summary(labels: impl Iterator<Item = Label>) -> String {
    let mut counts = [0usize; 4];
    let mut attacks = 0usize;
    let mut total = 0usize;
    for label in labels {
        let slot = Label::ALL.iter().position(|l| *l == label).unwrap();
        counts[slot] += 1;
        if advpath::taxonomy::attack_verdict(label) {
            attacks += 1;
        }
        total += 1;
    }
    let parts: Vec<String> = Label::ALL
        .iter()
        .zip(counts)
        .map(|(l, n)| format!("{} {}", l.as_str(), n))
        .collect();
    format!("{} ({} of {} are attacks)", parts.join(", "), attacks, total)
}

fn stage_str(stage: Stage) -> &'static str {
    match stage {
        Stage::Rule => "rule",
        Stage::Image => "image",
    }
}

fn run_generate(args: GenerateArgs) -> Result<(), CliError> {
    let base: Option<Manifest> = match &args.config {
        Some(path) => Some(serde_json::from_str(&fs::read_to_string(path)?)?),
        None => None,
    };
    let mut gen = base
        .as_ref()
        .and_then(|m| m.generator)
        .unwrap_or_default();
    if let Some(GridDims { width, height }) = args.grid {
        gen.width = width;
        gen.height = height;
    }
    if let Some(density) = args.density {
        gen.obstacle_density = density;
    }
    if let Some(placement) = args.placement {
        gen.placement = placement.to_placement(args.radius);
    }
    if let Some(seed) = args.seed {
        gen.seed = seed;
    }
    let planner_cfg = match (args.limited, base.as_ref().and_then(|m| m.planner)) {
        (Some(k), _) => PlannerConfig::limited_for(gen.width, gen.height, k),
        // Keep the configured mode but size the rollout budget to the grid
        // actually being generated.
        (None, Some(stored)) => PlannerConfig {
            mode: stored.mode,
            ..PlannerConfig::exact_for(gen.width, gen.height)
        },
        (None, None) => PlannerConfig::exact_for(gen.width, gen.height),
    };
    let threshold = args
        .threshold
        .or(base.as_ref().and_then(|m| m.threshold))
        .unwrap_or(DEFAULT_THRESHOLD);
    let count = args
        .count
        .or(base.as_ref().map(|m| m.record_count as usize))
        .expect("clap requires --count without --config");

    let planned = pipeline::generate_pairs(&gen, &planner_cfg, count)?;
    let labels = pipeline::rule_labels(&planned, threshold);
    let records = pipeline::to_records(&planned, &labels);
    let template = Manifest {
        dataset_id: file_stem(&args.out),
        generator: Some(gen),
        planner: Some(planner_cfg),
        threshold: Some(threshold),
        ..Manifest::template(gen.width, gen.height, args.timestamp.unwrap_or_else(now_unix))
    };
    let manifest = storage::write_records(&args.out, &records, &template)?;
    println!("wrote {} records to {}", manifest.record_count, args.out.display());
    println!("labels: {}", label_summary(labels.into_iter()));
    Ok(())
}

fn run_plan(args: PlanArgs) -> Result<(), CliError> {
    let (records, manifest) = storage::read_records(&args.input)?;
    let planner_cfg = match args.limited {
        Some(k) => PlannerConfig::limited_for(manifest.width, manifest.height, k),
        None => PlannerConfig::exact_for(manifest.width, manifest.height),
    };
    let mut replanned = Vec::new();
    let mut skipped = 0usize;
    for record in &records {
        let (original_map, adversarial_map) = record.maps.clone().ok_or_else(|| {
            CliError::Data(format!("record {} stores no maps; re-planning needs them", record.no))
        })?;
        let start = record.paths.original.first().expect("records hold non-empty paths");
        let goal = record.paths.original.last().expect("records hold non-empty paths");
        let original_scenario = Scenario { map: original_map.clone(), start, goal };
        let adversarial_scenario = Scenario { map: adversarial_map.clone(), start, goal };
        let original = planner::plan(&original_scenario, &planner_cfg);
        if !planner::reaches_goal(&original, goal) {
            skipped += 1;
            continue;
        }
        let adversarial = planner::plan(&adversarial_scenario, &planner_cfg);
        replanned.push(Record::new(
            record.no,
            Some((original_map, adversarial_map)),
            PathPair { original, adversarial },
        ));
    }
    let template = Manifest {
        dataset_id: file_stem(&args.out),
        generator: manifest.generator,
        planner: Some(planner_cfg),
        threshold: None,
        ..Manifest::template(manifest.width, manifest.height, args.timestamp.unwrap_or_else(now_unix))
    };
    let written = storage::write_records(&args.out, &replanned, &template)?;
    println!(
        "re-planned {} records to {} ({} skipped: original no longer reaches its goal)",
        written.record_count,
        args.out.display(),
        skipped
    );
    Ok(())
}

fn run_label(args: LabelArgs) -> Result<(), CliError> {
    let (records, manifest) = storage::read_records(&args.input)?;
    let threshold = args.threshold.or(manifest.threshold).unwrap_or(DEFAULT_THRESHOLD);
    let results = pipeline::identify_rule_only(&records, threshold)?;
    let labeled: Vec<Record> = records
        .iter()
        .zip(&results)
        .map(|(record, result)| record.clone().with_label(result.label))
        .collect();
    let template = Manifest {
        dataset_id: file_stem(&args.out),
        generator: manifest.generator,
        planner: manifest.planner,
        threshold: Some(threshold),
        ..Manifest::template(manifest.width, manifest.height, args.timestamp.unwrap_or_else(now_unix))
    };
    storage::write_records(&args.out, &labeled, &template)?;
    println!("labeled {} records to {}", labeled.len(), args.out.display());
    println!("labels: {}", label_summary(results.iter().map(|r| r.label)));
    Ok(())
}

fn run_rasterize(args: RasterizeArgs) -> Result<(), CliError> {
    let (records, manifest) = storage::read_records(&args.input)?;
    fs::create_dir_all(&args.out_dir)?;
    let take = args.limit.unwrap_or(records.len());
    let mut written = 0usize;
    for record in records.iter().take(take) {
        let image = imaging::rasterize(&record.paths, manifest.width, manifest.height)?;
        let path = args.out_dir.join(format!("pair_{:05}.ppm", record.no));
        fs::write(&path, imaging::to_ppm(&image))?;
        written += 1;
    }
    println!("wrote {written} pixmaps to {}", args.out_dir.display());
    Ok(())
}

fn run_augment(args: AugmentArgs) -> Result<(), CliError> {
    let (records, manifest) = storage::read_records(&args.input)?;
    let record = records
        .iter()
        .find(|r| r.no == args.no)
        .ok_or_else(|| CliError::Data(format!("no record numbered {}", args.no)))?;
    let image = imaging::rasterize(&record.paths, manifest.width, manifest.height)?;
    let augmented = imaging::apply_augment(&image, args.op.to_op())?;
    fs::write(&args.out, imaging::to_ppm(&augmented))?;
    println!("wrote augmented pixmap of record {} to {}", args.no, args.out.display());
    Ok(())
}

fn print_eval(report: &EvalReport) {
    print!("{}", metrics::render_text(report));
}

fn write_curve_files(report: &EvalReport, dir: &FsPath) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.txt"), metrics::render_text(report))?;
    fs::write(dir.join("roc.csv"), metrics::roc_csv(report))?;
    fs::write(dir.join("pr.csv"), metrics::pr_csv(report))?;
    let roc_points: Vec<(f64, f64)> = report
        .roc
        .iter()
        .map(|p| (p.false_positive_rate, p.true_positive_rate))
        .collect();
    fs::write(
        dir.join("roc.svg"),
        svg::curve_svg(&roc_points, "roc curve", "false positive rate", "true positive rate"),
    )?;
    let pr_points: Vec<(f64, f64)> =
        report.pr.iter().map(|p| (p.recall, p.precision)).collect();
    fs::write(
        dir.join("pr.svg"),
        svg::curve_svg(&pr_points, "precision-recall curve", "recall", "precision"),
    )?;
    Ok(())
}

fn run_train(args: TrainArgs) -> Result<(), CliError> {
    let (records, manifest) = storage::read_records(&args.input)?;
    let balance = if args.no_balance { None } else { Some(args.balance_seed) };
    let image_set = pipeline::build_image_set(
        &records,
        manifest.width,
        manifest.height,
        balance,
        manifest.sha256_hex.clone(),
    )?;
    let (train_set, test_set) =
        classifier::split(&image_set, args.train_fraction, args.split_seed);
    let params = SvmParams {
        c: args.c,
        tol: args.tol,
        max_passes: args.max_passes,
        seed: args.svm_seed,
    };
    let trained = classifier::train(&train_set, &params)?;
    classifier::save_model(&trained.model, &args.model_out)?;
    println!(
        "trained on {} images ({} held out); {} passes, kkt violation {:.6}",
        train_set.len(),
        test_set.len(),
        trained.passes_run,
        trained.kkt_violation
    );
    println!("model written to {}", args.model_out.display());
    if !test_set.is_empty() {
        let scored: Result<Vec<(f64, advpath::ImageClass)>, ClassifierError> = test_set
            .items
            .iter()
            .map(|(x, truth)| classifier::predict(&trained.model, x).map(|(_, s)| (s, *truth)))
            .collect();
        match metrics::evaluate(&scored.map_err(CliError::from)?) {
            Ok(report) => print_eval(&report),
            Err(MetricsError::SingleClassTestSet { accuracy }) => {
                println!(
                    "held-out split contains one class; accuracy {accuracy:.4}, curves undefined"
                );
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

fn run_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let (records, manifest) = storage::read_records(&args.input)?;
    let model = classifier::load_model(&args.model)?;
    let mut scored = Vec::new();
    for record in &records {
        let truth = match record.label.and_then(advpath::ImageClass::from_label) {
            Some(class) => class,
            None => continue,
        };
        let image = imaging::rasterize(&record.paths, manifest.width, manifest.height)?;
        let (_, score) = classifier::predict(&model, &imaging::flatten(&image))?;
        scored.push((score, truth));
    }
    let report = metrics::evaluate(&scored)?;
    print_eval(&report);
    if let Some(dir) = &args.out {
        write_curve_files(&report, dir)?;
        println!("report, csv curves, and svg plots written to {}", dir.display());
    }
    Ok(())
}

fn run_identify(args: IdentifyArgs) -> Result<(), CliError> {
    let (records, manifest) = storage::read_records(&args.input)?;
    let threshold = args.threshold.or(manifest.threshold).unwrap_or(DEFAULT_THRESHOLD);
    let results = if args.rule_only {
        pipeline::identify_rule_only(&records, threshold)?
    } else {
        let model_path = args.model.as_ref().expect("clap requires --model without --rule-only");
        let model = classifier::load_model(model_path)?;
        pipeline::identify(&records, Some(&model), threshold, manifest.width, manifest.height)?
    };
    println!("no|label|attack|stage|score");
    for r in &results {
        let score = r.score.map(|s| format!("{s:.6}")).unwrap_or_else(|| "-".to_string());
        println!(
            "{}|{}|{}|{}|{}",
            r.no,
            r.label,
            if r.attack { 1 } else { 0 },
            stage_str(r.stage),
            score
        );
    }
    println!("labels: {}", label_summary(results.iter().map(|r| r.label)));
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        let timestamp = args.timestamp.unwrap_or_else(now_unix);
        let labeled: Vec<Record> = records
            .iter()
            .zip(&results)
            .map(|(record, result)| record.clone().with_label(result.label))
            .collect();
        let adversarial: Vec<Record> =
            labeled.iter().filter(|r| r.attack == Some(true)).cloned().collect();
        for (name, subset) in [("labeled", &labeled), ("adversarial", &adversarial)] {
            let template = Manifest {
                dataset_id: name.to_string(),
                generator: manifest.generator,
                planner: manifest.planner,
                threshold: Some(threshold),
                ..Manifest::template(manifest.width, manifest.height, timestamp)
            };
            let path = dir.join(format!("{name}.records"));
            storage::write_records(&path, subset, &template)?;
        }
        println!(
            "full labeled set and the {}-record adversarial view written to {}",
            adversarial.len(),
            dir.display()
        );
    }
    Ok(())
}

fn run_bench(args: BenchArgs) -> Result<(), CliError> {
    let (records, manifest) = storage::read_records(&args.input)?;
    let threshold = args.threshold.or(manifest.threshold).unwrap_or(DEFAULT_THRESHOLD);
    let model = classifier::load_model(&args.model)?;
    let pairs: Vec<(PathPair, Cell)> = records
        .iter()
        .map(|r| {
            let goal = r.goal().expect("records hold non-empty paths");
            (r.paths.clone(), goal)
        })
        .collect();
    let report =
        metrics::timing_bench(&model, &pairs, threshold, manifest.width, manifest.height);
    println!("identification timing over {} pairs", report.pairs);
    println!("  rule stage   {:.6} s", report.rule_stage_seconds);
    println!("  rasterize    {:.6} s", report.rasterize_seconds);
    println!("  predict      {:.6} s", report.predict_seconds);
    println!("  total        {:.6} s", report.total_seconds());
    println!("  per pair     {:.6} s", report.seconds_per_pair());
    Ok(())
}

fn run_import(args: ImportArgs) -> Result<(), CliError> {
    let GridDims { width, height } = args.grid;
    let mut records = storage::import_external_pathpairs(&args.input, width, height)?;
    records.sort_by_key(|r| r.no);
    let template = Manifest {
        dataset_id: file_stem(&args.out),
        ..Manifest::template(width, height, args.timestamp.unwrap_or_else(now_unix))
    };
    let manifest = storage::write_records(&args.out, &records, &template)?;
    println!(
        "imported {} records to {}",
        manifest.record_count,
        args.out.display()
    );
    Ok(())
}

fn run_experiment_cmd(args: ExperimentArgs) -> Result<(), CliError> {
    let mut cfg: ExperimentConfig = match &args.config {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(count) = args.count {
        cfg.pair_count = count;
    }
    if let Some(seed) = args.seed {
        cfg.gen.seed = seed;
    }
    if let Some(GridDims { width, height }) = args.grid {
        cfg.gen.width = width;
        cfg.gen.height = height;
    }
    if let Some(density) = args.density {
        cfg.gen.obstacle_density = density;
    }
    // Planner geometry follows the grid; rebuild it when either the grid or
    // the mode changes on the command line.
    if args.grid.is_some() || args.limited.is_some() || args.exact {
        let mode = if args.exact {
            PlannerMode::Exact
        } else if let Some(k) = args.limited {
            PlannerMode::Limited { max_iterations: k }
        } else {
            cfg.planner.mode
        };
        cfg.planner = PlannerConfig {
            mode,
            ..PlannerConfig::exact_for(cfg.gen.width, cfg.gen.height)
        };
    }
    if let Some(threshold) = args.threshold {
        cfg.threshold = threshold;
    }
    if let Some(fraction) = args.train_fraction {
        cfg.train_fraction = fraction;
    }
    cfg.created_unix = args.timestamp.unwrap_or(cfg.created_unix);

    let outcome = pipeline::run_experiment(&cfg, &args.out)?;
    write_curve_files(&outcome.report, &args.out)?;
    println!("experiment finished; artifacts in {}", args.out.display());
    println!(
        "labels: {}",
        label_summary(
            outcome
                .label_counts
                .iter()
                .flat_map(|(l, n)| std::iter::repeat(*l).take(*n))
        )
    );
    println!(
        "images: {} train / {} test; training ran {} passes (kkt violation {:.6})",
        outcome.train_size, outcome.test_size, outcome.passes_run, outcome.kkt_violation
    );
    println!(
        "accuracy {:.4}, roc auc {:.4}, average precision {:.4}",
        outcome.report.accuracy, outcome.report.auc, outcome.report.average_precision
    );
    Ok(())
}
