//! From-scratch soft-margin linear SVM for fork/detour path images.
//!
//! Training solves the L1-loss dual by single-coordinate ascent with the
//! bias folded in as a constant feature, which removes the equality
//! constraint and leaves a pure box-constrained problem:
//!
//! ```text
//! min_a  1/2 a'Qa - sum(a)   s.t. 0 <= a_i <= C,
//! Q_ij = y_i y_j (x_i . x_j + 1)
//! ```
//!
//! Primal weights are maintained incrementally (`w = sum a_i y_i x~_i`), so
//! each coordinate update costs one dot product and one axpy. Coordinate
//! order is reshuffled every pass with a seeded RNG; a fixed seed therefore
//! reproduces the trained model bit for bit.

use std::fs;
use std::io::Write as _;
use std::path::Path as FsPath;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::Label;

/// The two classes the image stage separates. `Fork` is the positive class
/// throughout the workspace (scores above zero mean fork).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ImageClass {
    Fork,
    Detour,
}

impl ImageClass {
    pub fn to_label(self) -> Label {
        match self {
            ImageClass::Fork => Label::Fork,
            ImageClass::Detour => Label::Detour,
        }
    }

    pub fn from_label(label: Label) -> Option<ImageClass> {
        match label {
            Label::Fork => Some(ImageClass::Fork),
            Label::Detour => Some(ImageClass::Detour),
            _ => None,
        }
    }

    /// The SVM target: +1 for fork, -1 for detour.
    pub fn sign(self) -> f64 {
        match self {
            ImageClass::Fork => 1.0,
            ImageClass::Detour => -1.0,
        }
    }
}

/// SVM hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    /// Soft-margin penalty; the box constraint on dual variables.
    pub c: f64,
    /// Training stops once the largest projected-gradient violation falls
    /// below this.
    pub tol: f64,
    /// Training also stops after this many full passes over the data.
    pub max_passes: usize,
    /// Seed for the per-pass coordinate shuffle.
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c: 1.0, tol: 1e-3, max_passes: 50, seed: 0 }
    }
}

/// Flattened path-image features with their rule labels, plus a provenance
/// string recording where the items came from (a dataset content hash, a
/// fixture name, ...). Splits carry the provenance through to both halves.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledImageSet {
    pub items: Vec<(Vec<f64>, ImageClass)>,
    pub provenance: String,
}

impl LabeledImageSet {
    pub fn new(items: Vec<(Vec<f64>, ImageClass)>, provenance: impl Into<String>) -> Self {
        LabeledImageSet { items, provenance: provenance.into() }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Count of `(fork, detour)` items.
    pub fn class_counts(&self) -> (usize, usize) {
        let fork = self.items.iter().filter(|(_, c)| *c == ImageClass::Fork).count();
        (fork, self.items.len() - fork)
    }
}

/// A trained linear decision function: `score(x) = w . x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub params: SvmParams,
    /// Provenance of the training set (see [`LabeledImageSet::provenance`]).
    pub provenance: String,
}

/// Training artifacts beyond the model itself, kept for auditing: the dual
/// variables and the final optimality measures.
#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub model: ClassifierModel,
    pub alphas: Vec<f64>,
    /// Largest projected-gradient violation at the last pass.
    pub kkt_violation: f64,
    pub passes_run: usize,
}

/// Classifier failures.
#[derive(Clone, Debug, PartialEq, Error)]
pub enum ClassifierError {
    #[error("training data contains a single class only")]
    SingleClassData,
    #[error("feature vector has {got} entries, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training data is empty")]
    EmptyTrainingSet,
    #[error("model file is malformed at line {line}: {reason}")]
    MalformedModel { line: usize, reason: String },
    #[error("model io failed: {0}")]
    Io(String),
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Trains on the image set by dual coordinate ascent.
///
/// Both classes must be present and all feature vectors must share one
/// dimension. Passes stop early once every projected-gradient component is
/// within `tol` of optimal.
pub fn train(data: &LabeledImageSet, params: &SvmParams) -> Result<TrainOutput, ClassifierError> {
    let n = data.items.len();
    if n == 0 {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    let dim = data.items[0].0.len();
    for (x, _) in &data.items {
        if x.len() != dim {
            return Err(ClassifierError::DimensionMismatch { expected: dim, got: x.len() });
        }
    }
    let (fork, detour) = data.class_counts();
    if fork == 0 || detour == 0 {
        return Err(ClassifierError::SingleClassData);
    }

    let y: Vec<f64> = data.items.iter().map(|(_, c)| c.sign()).collect();
    // Diagonal of Q: ||x~_i||^2 with the constant bias feature included.
    let q_diag: Vec<f64> = data.items.iter().map(|(x, _)| dot(x, x) + 1.0).collect();

    let mut weights = vec![0.0; dim];
    let mut bias = 0.0;
    let mut alphas = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut violation = f64::INFINITY;
    let mut passes_run = 0;
    for _ in 0..params.max_passes {
        // Fisher-Yates reshuffle of the coordinate order.
        for i in (1..n).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let mut pg_max = f64::NEG_INFINITY;
        let mut pg_min = f64::INFINITY;
        for &i in &order {
            let (x, _) = &data.items[i];
            let g = y[i] * (dot(&weights, x) + bias) - 1.0;
            let a = alphas[i];
            let pg = if a <= 0.0 {
                g.min(0.0)
            } else if a >= params.c {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg != 0.0 {
                let a_new = (a - g / q_diag[i]).clamp(0.0, params.c);
                let delta = (a_new - a) * y[i];
                if delta != 0.0 {
                    for (w, xi) in weights.iter_mut().zip(x) {
                        *w += delta * xi;
                    }
                    bias += delta;
                    alphas[i] = a_new;
                }
            }
        }
        passes_run += 1;
        violation = (pg_max - pg_min).max(pg_max.abs()).max(pg_min.abs());
        if violation < params.tol {
            break;
        }
    }

    Ok(TrainOutput {
        model: ClassifierModel {
            weights,
            bias,
            params: *params,
            provenance: data.provenance.clone(),
        },
        alphas,
        kkt_violation: violation,
        passes_run,
    })
}

/// Scores a feature vector and thresholds at zero: positive scores are
/// forks, anything else (including an exact zero) is a detour.
pub fn predict(model: &ClassifierModel, x: &[f64]) -> Result<(ImageClass, f64), ClassifierError> {
    if x.len() != model.weights.len() {
        return Err(ClassifierError::DimensionMismatch {
            expected: model.weights.len(),
            got: x.len(),
        });
    }
    let score = dot(&model.weights, x) + model.bias;
    let class = if score > 0.0 { ImageClass::Fork } else { ImageClass::Detour };
    Ok((class, score))
}

/// Splits the set into `(train, test)` after a seeded shuffle. The train
/// half receives `round(len * train_fraction)` items; both halves keep the
/// provenance string.
pub fn split(
    data: &LabeledImageSet,
    train_fraction: f64,
    seed: u64,
) -> (LabeledImageSet, LabeledImageSet) {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..data.items.len()).collect();
    for i in (1..indices.len()).rev() {
        indices.swap(i, rng.gen_range(0..=i));
    }
    let train_len = ((data.items.len() as f64) * train_fraction).round() as usize;
    let train_len = train_len.min(data.items.len());
    let take = |slice: &[usize]| {
        LabeledImageSet::new(
            slice.iter().map(|&i| data.items[i].clone()).collect(),
            data.provenance.clone(),
        )
    };
    (take(&indices[..train_len]), take(&indices[train_len..]))
}

const MODEL_MAGIC: &str = "advpath-model v1";

/// Serializes the model as line-oriented text. Floats are written in
/// shortest round-trip form, so save/load reproduces the model exactly.
pub fn model_to_text(model: &ClassifierModel) -> String {
    let mut out = String::new();
    out.push_str(MODEL_MAGIC);
    out.push('\n');
    out.push_str(&format!("dim {}\n", model.weights.len()));
    out.push_str(&format!("c {}\n", model.params.c));
    out.push_str(&format!("tol {}\n", model.params.tol));
    out.push_str(&format!("max_passes {}\n", model.params.max_passes));
    out.push_str(&format!("seed {}\n", model.params.seed));
    let provenance = if model.provenance.is_empty() { "-" } else { &model.provenance };
    out.push_str(&format!("provenance {provenance}\n"));
    out.push_str(&format!("bias {}\n", model.bias));
    out.push_str("weights\n");
    for w in &model.weights {
        out.push_str(&format!("{w}\n"));
    }
    out
}

pub fn model_from_text(text: &str) -> Result<ClassifierModel, ClassifierError> {
    let malformed = |line: usize, reason: &str| ClassifierError::MalformedModel {
        line,
        reason: reason.to_string(),
    };
    let mut lines = text.lines().enumerate();
    let mut expect = |key: &str| -> Result<(usize, String), ClassifierError> {
        let (i, line) = lines
            .next()
            .ok_or_else(|| malformed(0, &format!("missing {key} line")))?;
        if key.is_empty() {
            return Ok((i + 1, line.to_string()));
        }
        let value = line
            .strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .ok_or_else(|| malformed(i + 1, &format!("expected `{key} ...`")))?;
        Ok((i + 1, value.to_string()))
    };

    let (line, magic) = expect("")?;
    if magic != MODEL_MAGIC {
        return Err(malformed(line, "unrecognized model header"));
    }
    let (line, dim) = expect("dim")?;
    let dim: usize = dim.parse().map_err(|_| malformed(line, "bad dim"))?;
    let (line, c) = expect("c")?;
    let c: f64 = c.parse().map_err(|_| malformed(line, "bad c"))?;
    let (line, tol) = expect("tol")?;
    let tol: f64 = tol.parse().map_err(|_| malformed(line, "bad tol"))?;
    let (line, max_passes) = expect("max_passes")?;
    let max_passes: usize =
        max_passes.parse().map_err(|_| malformed(line, "bad max_passes"))?;
    let (line, seed) = expect("seed")?;
    let seed: u64 = seed.parse().map_err(|_| malformed(line, "bad seed"))?;
    let (_, provenance) = expect("provenance")?;
    let provenance = if provenance == "-" { String::new() } else { provenance };
    let (line, bias) = expect("bias")?;
    let bias: f64 = bias.parse().map_err(|_| malformed(line, "bad bias"))?;
    let (line, marker) = expect("")?;
    if marker != "weights" {
        return Err(malformed(line, "expected `weights`"));
    }
    let mut weights = Vec::with_capacity(dim);
    for (i, raw) in lines {
        let w: f64 = raw
            .trim()
            .parse()
            .map_err(|_| malformed(i + 1, "bad weight"))?;
        weights.push(w);
    }
    if weights.len() != dim {
        return Err(malformed(0, &format!("expected {dim} weights, found {}", weights.len())));
    }
    Ok(ClassifierModel {
        weights,
        bias,
        params: SvmParams { c, tol, max_passes, seed },
        provenance,
    })
}

/// Writes the model file atomically (temp file + rename).
pub fn save_model(model: &ClassifierModel, path: &FsPath) -> Result<(), ClassifierError> {
    let io_err = |e: std::io::Error| ClassifierError::Io(e.to_string());
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(io_err)?;
        f.write_all(model_to_text(model).as_bytes()).map_err(io_err)?;
    }
    fs::rename(&tmp, path).map_err(io_err)
}

pub fn load_model(path: &FsPath) -> Result<ClassifierModel, ClassifierError> {
    let text = fs::read_to_string(path).map_err(|e| ClassifierError::Io(e.to_string()))?;
    model_from_text(&text)
}
