//! End-to-end orchestration: pair generation, two-stage identification,
//! and the full train-and-evaluate experiment.
//!
//! Identification is staged. The rule stage settles the cases that need no
//! learning — the adversarial path misses the goal (`UrP`) or the paths are
//! identical (`UcP`). Every remaining pair is rasterized and scored by the
//! linear classifier, which decides between fork (`FP`) and detour (`DP`).
//! The goal a record is judged against is recovered from the original
//! path's endpoint, so stored datasets carry everything identification
//! needs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{
    self, ClassifierError, ClassifierModel, ImageClass, LabeledImageSet, SvmParams,
};
use crate::gridworld::{MapPair, PathPair, ValidationError};
use crate::imaging::{self, ImageError, PathImage};
use crate::metrics::{self, EvalReport, MetricsError};
use crate::perturb::{self, GenConfig, GenError};
use crate::planner::{self, PlannerConfig};
use crate::storage::{self, Manifest, Record, StorageError};
use crate::taxonomy::{classify_rule, Label, TaxonomyConfig, DEFAULT_THRESHOLD};

/// Retries per pair index before generation gives up. Each retry redraws
/// from the same per-pair RNG stream, so results stay reproducible.
pub const MAX_PAIR_RETRIES: u32 = 64;

/// Which stage of the identification cascade produced a label.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Rule,
    Image,
}

/// The verdict for one record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentificationResult {
    pub no: u64,
    pub label: Label,
    pub attack: bool,
    pub stage: Stage,
    /// Classifier score, present only for image-stage decisions.
    pub score: Option<f64>,
}

/// A generated map pair together with the paths planned on it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlannedPair {
    pub pair: MapPair,
    pub paths: PathPair,
}

/// Pipeline failures.
#[derive(Clone, Debug, PartialEq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error("record {no} needs the image stage but no model was supplied")]
    ModelMissing { no: u64 },
    #[error("pair {index} still had no usable scenario after {attempts} attempts")]
    GenerationRetriesExhausted { index: u64, attempts: u32 },
    #[error("io failed on {path}: {reason}")]
    Io { path: String, reason: String },
}

fn io_error(path: &FsPath, e: std::io::Error) -> PipelineError {
    PipelineError::Io { path: path.display().to_string(), reason: e.to_string() }
}

/// Generates `count` planned pairs. Each pair index owns one RNG stream
/// and redraws until the original path actually reaches the goal with at
/// least three steps, so the goal can always be recovered from the stored
/// original path, and until the perturbation finds a cell to block.
pub fn generate_pairs(
    gen: &GenConfig,
    planner_cfg: &PlannerConfig,
    count: usize,
) -> Result<Vec<PlannedPair>, PipelineError> {
    gen.validate()?;
    let mut out = Vec::with_capacity(count);
    for index in 0..count as u64 {
        let mut rng = perturb::rng_for_pair(gen.seed, index);
        let mut found = None;
        for _ in 0..MAX_PAIR_RETRIES {
            let scenario = match perturb::generate_scenario(gen, &mut rng) {
                Ok(s) => s,
                Err(e @ (GenError::DegenerateGrid { .. } | GenError::InvalidDensity { .. })) => {
                    return Err(e.into());
                }
                Err(_) => continue,
            };
            let original = planner::plan(&scenario, planner_cfg);
            if original.len() < 3 || !planner::reaches_goal(&original, scenario.goal) {
                continue;
            }
            let pair = match perturb::perturb(index, &scenario, Some(&original), gen, &mut rng) {
                Ok(p) => p,
                Err(_) => continue,
            };
            let adversarial = planner::plan(&pair.adversarial, planner_cfg);
            found = Some(PlannedPair {
                pair,
                paths: PathPair { original, adversarial },
            });
            break;
        }
        match found {
            Some(p) => out.push(p),
            None => {
                return Err(PipelineError::GenerationRetriesExhausted {
                    index,
                    attempts: MAX_PAIR_RETRIES,
                });
            }
        }
    }
    Ok(out)
}

/// Rule-classifies each planned pair against its scenario's goal.
pub fn rule_labels(planned: &[PlannedPair], threshold: u32) -> Vec<Label> {
    planned
        .iter()
        .map(|p| {
            let cfg = TaxonomyConfig { threshold, goal: p.pair.original.goal };
            classify_rule(&p.paths, &cfg)
        })
        .collect()
}

/// Converts planned pairs and their labels into dataset records.
pub fn to_records(planned: &[PlannedPair], labels: &[Label]) -> Vec<Record> {
    planned
        .iter()
        .zip(labels)
        .map(|(p, &label)| {
            Record::new(
                p.pair.id,
                Some((p.pair.original.map.clone(), p.pair.adversarial.map.clone())),
                p.paths.clone(),
            )
            .with_label(label)
        })
        .collect()
}

fn record_goal(record: &Record) -> Result<crate::gridworld::Cell, PipelineError> {
    record.goal().ok_or(PipelineError::Invalid(ValidationError::EmptyPath))
}

/// Two-stage identification. Records the rule stage cannot settle go to
/// the classifier; if any such record exists and `model` is `None`, the
/// call fails with [`PipelineError::ModelMissing`].
pub fn identify(
    records: &[Record],
    model: Option<&ClassifierModel>,
    threshold: u32,
    width: usize,
    height: usize,
) -> Result<Vec<IdentificationResult>, PipelineError> {
    let mut results = Vec::with_capacity(records.len());
    for record in records {
        let goal = record_goal(record)?;
        let cfg = TaxonomyConfig { threshold, goal };
        let rule = classify_rule(&record.paths, &cfg);
        let result = match rule {
            Label::Unreached | Label::Unchanged => IdentificationResult {
                no: record.no,
                label: rule,
                attack: crate::taxonomy::attack_verdict(rule),
                stage: Stage::Rule,
                score: None,
            },
            Label::Fork | Label::Detour => {
                let model = model.ok_or(PipelineError::ModelMissing { no: record.no })?;
                let image = imaging::rasterize(&record.paths, width, height)?;
                let (class, score) = classifier::predict(model, &imaging::flatten(&image))?;
                let label = class.to_label();
                IdentificationResult {
                    no: record.no,
                    label,
                    attack: crate::taxonomy::attack_verdict(label),
                    stage: Stage::Image,
                    score: Some(score),
                }
            }
        };
        results.push(result);
    }
    Ok(results)
}

/// Identification with the rule stage only: the divergence comparison also
/// settles fork versus detour. Serves as the reference judgment the
/// classifier is trained to imitate.
pub fn identify_rule_only(
    records: &[Record],
    threshold: u32,
) -> Result<Vec<IdentificationResult>, PipelineError> {
    records
        .iter()
        .map(|record| {
            let goal = record_goal(record)?;
            let cfg = TaxonomyConfig { threshold, goal };
            let label = classify_rule(&record.paths, &cfg);
            Ok(IdentificationResult {
                no: record.no,
                label,
                attack: crate::taxonomy::attack_verdict(label),
                stage: Stage::Rule,
                score: None,
            })
        })
        .collect()
}

/// Rasterizes every fork- or detour-labeled record and flattens the images
/// into a training set. With `balance_seed` set, the minority class is
/// padded to the majority count with seeded augmented copies; balancing is
/// skipped when either class is absent.
pub fn build_image_set(
    records: &[Record],
    width: usize,
    height: usize,
    balance_seed: Option<u64>,
    provenance: impl Into<String>,
) -> Result<LabeledImageSet, PipelineError> {
    let mut forks: Vec<PathImage> = Vec::new();
    let mut detours: Vec<PathImage> = Vec::new();
    for record in records {
        match record.label {
            Some(Label::Fork) => forks.push(imaging::rasterize(&record.paths, width, height)?),
            Some(Label::Detour) => {
                detours.push(imaging::rasterize(&record.paths, width, height)?);
            }
            _ => {}
        }
    }
    if let Some(seed) = balance_seed {
        if !forks.is_empty() && !detours.is_empty() {
            if forks.len() < detours.len() {
                forks = imaging::balance_classes(&forks, detours.len(), seed)?;
            } else if detours.len() < forks.len() {
                detours = imaging::balance_classes(&detours, forks.len(), seed)?;
            }
        }
    }
    let mut items = Vec::with_capacity(forks.len() + detours.len());
    for img in &forks {
        items.push((imaging::flatten(img), ImageClass::Fork));
    }
    for img in &detours {
        items.push((imaging::flatten(img), ImageClass::Detour));
    }
    Ok(LabeledImageSet::new(items, provenance))
}

/// Everything a full experiment run needs, in one serializable bundle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub gen: GenConfig,
    pub planner: PlannerConfig,
    pub threshold: u32,
    pub svm: SvmParams,
    /// Fraction of the (balanced) image set used for training.
    pub train_fraction: f64,
    pub pair_count: usize,
    /// Timestamp stamped into the manifest; an input so that reruns are
    /// byte-identical.
    pub created_unix: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        // Defaults picked so the stock experiment separates well: a sparser
        // grid than the generator default keeps detours tight, and the pass
        // budget is high enough for training to converge rather than stop
        // at the cap.
        let gen = GenConfig { obstacle_density: 0.12, ..GenConfig::default() };
        ExperimentConfig {
            planner: PlannerConfig::limited_for(gen.width, gen.height, 20),
            gen,
            threshold: DEFAULT_THRESHOLD,
            svm: SvmParams { max_passes: 200, ..SvmParams::default() },
            train_fraction: 0.7,
            pair_count: 1000,
            created_unix: 0,
        }
    }
}

/// Artifacts and measurements from one experiment run.
#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub manifest: Manifest,
    pub label_counts: BTreeMap<Label, usize>,
    pub train_size: usize,
    pub test_size: usize,
    pub report: EvalReport,
    pub model: ClassifierModel,
    pub kkt_violation: f64,
    pub passes_run: usize,
    pub dataset_path: PathBuf,
    pub model_path: PathBuf,
    pub report_path: PathBuf,
    pub roc_path: PathBuf,
    pub pr_path: PathBuf,
}

impl ExperimentOutcome {
    pub fn attack_count(&self) -> usize {
        self.label_counts
            .iter()
            .filter(|(l, _)| crate::taxonomy::attack_verdict(**l))
            .map(|(_, n)| n)
            .sum()
    }
}

fn render_experiment_report(outcome_report: &EvalReport, counts: &BTreeMap<Label, usize>, kkt: f64, passes: usize) -> String {
    let mut out = String::new();
    out.push_str("label counts\n");
    for label in Label::ALL {
        out.push_str(&format!(
            "  {:<4} {}\n",
            label.as_str(),
            counts.get(&label).copied().unwrap_or(0)
        ));
    }
    out.push_str(&format!(
        "training\n  passes {passes}\n  kkt violation {kkt}\n"
    ));
    out.push_str(&metrics::render_text(outcome_report));
    out
}

/// Runs the whole pipeline: generate pairs, rule-label them, persist the
/// dataset, train the fork/detour classifier on balanced path images, and
/// evaluate on the held-out split. Writes `dataset.records` (plus its
/// manifest), `model.txt`, `report.txt`, `roc.csv`, and `pr.csv` under
/// `out_dir`. With a fixed config, every byte written is reproducible.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &FsPath,
) -> Result<ExperimentOutcome, PipelineError> {
    fs::create_dir_all(out_dir).map_err(|e| io_error(out_dir, e))?;

    let planned = generate_pairs(&cfg.gen, &cfg.planner, cfg.pair_count)?;
    let labels = rule_labels(&planned, cfg.threshold);
    let records = to_records(&planned, &labels);

    let mut label_counts = BTreeMap::new();
    for &label in &labels {
        *label_counts.entry(label).or_insert(0usize) += 1;
    }

    let dataset_path = out_dir.join("dataset.records");
    let template = Manifest {
        dataset_id: "dataset".to_string(),
        generator: Some(cfg.gen),
        planner: Some(cfg.planner),
        threshold: Some(cfg.threshold),
        ..Manifest::template(cfg.gen.width, cfg.gen.height, cfg.created_unix)
    };
    let manifest = storage::write_records(&dataset_path, &records, &template)?;

    let image_set = build_image_set(
        &records,
        cfg.gen.width,
        cfg.gen.height,
        Some(cfg.gen.seed),
        manifest.sha256_hex.clone(),
    )?;
    let (train_set, test_set) = classifier::split(&image_set, cfg.train_fraction, cfg.gen.seed);
    let trained = classifier::train(&train_set, &cfg.svm)?;

    let scored: Vec<(f64, ImageClass)> = test_set
        .items
        .iter()
        .map(|(x, truth)| classifier::predict(&trained.model, x).map(|(_, s)| (s, *truth)))
        .collect::<Result<_, _>>()?;
    let report = metrics::evaluate(&scored)?;

    let model_path = out_dir.join("model.txt");
    classifier::save_model(&trained.model, &model_path)?;
    let report_path = out_dir.join("report.txt");
    let report_text =
        render_experiment_report(&report, &label_counts, trained.kkt_violation, trained.passes_run);
    fs::write(&report_path, report_text).map_err(|e| io_error(&report_path, e))?;
    let roc_path = out_dir.join("roc.csv");
    fs::write(&roc_path, metrics::roc_csv(&report)).map_err(|e| io_error(&roc_path, e))?;
    let pr_path = out_dir.join("pr.csv");
    fs::write(&pr_path, metrics::pr_csv(&report)).map_err(|e| io_error(&pr_path, e))?;

    Ok(ExperimentOutcome {
        manifest,
        label_counts,
        train_size: train_set.len(),
        test_size: test_set.len(),
        report,
        model: trained.model,
        kkt_violation: trained.kkt_violation,
        passes_run: trained.passes_run,
        dataset_path,
        model_path,
        report_path,
        roc_path,
        pr_path,
    })
}
