//! Evaluation metrics and timing benchmarks for the fork/detour classifier.
//!
//! Forks are the positive class everywhere. The ROC sweep walks unique
//! scores descending with tied scores grouped into a single operating
//! point; the area is accumulated over integers (trapezoids on raw counts)
//! and divided once at the end, which makes it exactly the pairwise ranking
//! statistic with ties counted half.

use std::time::Instant;

use thiserror::Error;

use crate::classifier::{self, ClassifierModel, ImageClass};
use crate::gridworld::{Cell, PathPair};
use crate::imaging;
use crate::taxonomy::{self, TaxonomyConfig};

/// Binary confusion counts at the fixed `score > 0` operating point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.true_positives + self.false_positives + self.true_negatives + self.false_negatives
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        (self.true_positives + self.true_negatives) as f64 / total as f64
    }
}

/// One point on the ROC curve, in raw counts plus rates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub true_positive_rate: f64,
    pub false_positive_rate: f64,
}

/// One point on the precision-recall curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Full evaluation of a scored test set.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub confusion: ConfusionCounts,
    pub accuracy: f64,
    pub auc: f64,
    pub average_precision: f64,
    pub roc: Vec<RocPoint>,
    pub pr: Vec<PrPoint>,
    pub positives: usize,
    pub negatives: usize,
}

/// Metric failures.
#[derive(Clone, Debug, PartialEq, Error)]
pub enum MetricsError {
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("test set holds a single class; accuracy {accuracy} still reported, curves undefined")]
    SingleClassTestSet { accuracy: f64 },
}

/// Computes the confusion matrix, ranking curves, and their areas from
/// `(score, truth)` pairs. Scores above zero predict fork.
pub fn evaluate(scored: &[(f64, ImageClass)]) -> Result<EvalReport, MetricsError> {
    if scored.is_empty() {
        return Err(MetricsError::EmptyTestSet);
    }

    let mut confusion = ConfusionCounts::default();
    for &(score, truth) in scored {
        let predicted_fork = score > 0.0;
        match (predicted_fork, truth) {
            (true, ImageClass::Fork) => confusion.true_positives += 1,
            (true, ImageClass::Detour) => confusion.false_positives += 1,
            (false, ImageClass::Detour) => confusion.true_negatives += 1,
            (false, ImageClass::Fork) => confusion.false_negatives += 1,
        }
    }
    let accuracy = confusion.accuracy();

    let positives = scored.iter().filter(|(_, t)| *t == ImageClass::Fork).count();
    let negatives = scored.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricsError::SingleClassTestSet { accuracy });
    }

    // Sort descending by score; group ties into a single sweep step.
    let mut sorted: Vec<(f64, ImageClass)> = scored.to_vec();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("scores must not be NaN"));

    let mut roc = vec![RocPoint {
        threshold: f64::INFINITY,
        true_positive_rate: 0.0,
        false_positive_rate: 0.0,
    }];
    let mut pr = Vec::new();
    let mut tp: usize = 0;
    let mut fp: usize = 0;
    // Twice the raw ROC area, accumulated exactly in integers.
    let mut area2: u128 = 0;
    let mut ap_accum = 0.0;
    let mut prev_recall = 0.0;

    let mut i = 0;
    while i < sorted.len() {
        let threshold = sorted[i].0;
        let mut tied_tp = 0usize;
        let mut tied_fp = 0usize;
        while i < sorted.len() && sorted[i].0 == threshold {
            match sorted[i].1 {
                ImageClass::Fork => tied_tp += 1,
                ImageClass::Detour => tied_fp += 1,
            }
            i += 1;
        }
        // Trapezoid over the tie group: d_fp * (tp_before + tp_after).
        area2 += (tied_fp as u128) * ((2 * tp + tied_tp) as u128);
        tp += tied_tp;
        fp += tied_fp;

        roc.push(RocPoint {
            threshold,
            true_positive_rate: tp as f64 / positives as f64,
            false_positive_rate: fp as f64 / negatives as f64,
        });
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / positives as f64;
        ap_accum += (recall - prev_recall) * precision;
        prev_recall = recall;
        pr.push(PrPoint { threshold, precision, recall });
    }

    let auc = area2 as f64 / (2.0 * positives as f64 * negatives as f64);
    Ok(EvalReport {
        confusion,
        accuracy,
        auc,
        average_precision: ap_accum,
        roc,
        pr,
        positives,
        negatives,
    })
}

/// Renders the report as a small human-readable block.
pub fn render_text(report: &EvalReport) -> String {
    let c = &report.confusion;
    let mut out = String::new();
    out.push_str("evaluation report\n");
    out.push_str("  positive class: fork; ap uses the step-function definition (no interpolation)\n");
    out.push_str(&format!(
        "  test items        {} ({} fork, {} detour)\n",
        c.total(),
        report.positives,
        report.negatives
    ));
    out.push_str(&format!("  accuracy          {:.4}\n", report.accuracy));
    out.push_str(&format!("  roc auc           {:.4}\n", report.auc));
    out.push_str(&format!("  average precision {:.4}\n", report.average_precision));
    out.push_str("  confusion (rows = truth fork/detour, cols = predicted fork/detour)\n");
    out.push_str(&format!(
        "    {:>6} {:>6}\n",
        c.true_positives, c.false_negatives
    ));
    out.push_str(&format!(
        "    {:>6} {:>6}\n",
        c.false_positives, c.true_negatives
    ));
    out
}

/// ROC curve as CSV (`threshold,fpr,tpr`).
pub fn roc_csv(report: &EvalReport) -> String {
    let mut out = String::from("threshold,false_positive_rate,true_positive_rate\n");
    for p in &report.roc {
        out.push_str(&format!(
            "{},{},{}\n",
            p.threshold, p.false_positive_rate, p.true_positive_rate
        ));
    }
    out
}

/// Precision-recall curve as CSV (`threshold,recall,precision`).
pub fn pr_csv(report: &EvalReport) -> String {
    let mut out = String::from("threshold,recall,precision\n");
    for p in &report.pr {
        out.push_str(&format!("{},{},{}\n", p.threshold, p.recall, p.precision));
    }
    out
}

/// Wall-clock timing of the identification stages over a batch of path
/// pairs, separated into the rule stage and the two image-stage phases.
#[derive(Clone, Copy, Debug, Default)]
pub struct BenchReport {
    pub pairs: usize,
    pub rule_stage_seconds: f64,
    pub rasterize_seconds: f64,
    pub predict_seconds: f64,
}

impl BenchReport {
    pub fn total_seconds(&self) -> f64 {
        self.rule_stage_seconds + self.rasterize_seconds + self.predict_seconds
    }

    pub fn seconds_per_pair(&self) -> f64 {
        if self.pairs == 0 {
            0.0
        } else {
            self.total_seconds() / self.pairs as f64
        }
    }
}

/// Times rule classification, rasterization, and model scoring across the
/// batch. Pairs are processed exactly as the identification pipeline would,
/// but every pair runs through every phase so each phase is measured on the
/// full batch.
pub fn timing_bench(
    model: &ClassifierModel,
    pairs: &[(PathPair, Cell)],
    threshold: u32,
    width: usize,
    height: usize,
) -> BenchReport {
    let mut report = BenchReport { pairs: pairs.len(), ..BenchReport::default() };

    let started = Instant::now();
    for (pair, goal) in pairs {
        let cfg = TaxonomyConfig { threshold, goal: *goal };
        std::hint::black_box(taxonomy::classify_rule(pair, &cfg));
    }
    report.rule_stage_seconds = started.elapsed().as_secs_f64();

    let mut features = Vec::with_capacity(pairs.len());
    let started = Instant::now();
    for (pair, _) in pairs {
        if let Ok(image) = imaging::rasterize(pair, width, height) {
            features.push(imaging::flatten(&image));
        }
    }
    report.rasterize_seconds = started.elapsed().as_secs_f64();

    let started = Instant::now();
    for x in &features {
        if let Ok(scored) = classifier::predict(model, x) {
            std::hint::black_box(scored);
        }
    }
    report.predict_seconds = started.elapsed().as_secs_f64();

    report
}
