//! Grid-world tooling for finding path-planning inputs that a single added
//! obstacle breaks.
//!
//! The workflow: generate an occupancy grid with a start and goal, plan a
//! path on it by value iteration, add one obstacle, and plan again. The
//! resulting path pair falls into one of four outcomes — the adversarial
//! path misses the goal (`UrP`), forks onto a substantially different route
//! (`FP`), takes a local detour (`DP`), or is unchanged (`UcP`). The first
//! two count as successful attacks on the planner. `UrP` and `UcP` follow
//! directly from comparing the paths; fork versus detour is decided by a
//! linear classifier trained on two-channel rasterizations of the pairs.
//!
//! Modules, in dependency order:
//!
//! * [`gridworld`] — cells, occupancy grids, scenarios, paths, validation.
//! * [`planner`] — value iteration (exact or sweep-limited) and greedy
//!   rollout.
//! * [`perturb`] — seeded scenario generation and single-obstacle
//!   perturbations.
//! * [`taxonomy`] — divergence measurement and the four-way rule
//!   classification.
//! * [`imaging`] — path-pair rasters, augmentation, class balancing.
//! * [`classifier`] — the from-scratch soft-margin linear SVM.
//! * [`metrics`] — confusion counts, ROC/PR curves, timing benchmarks.
//! * [`storage`] — the records file format with hashed manifests.
//! * [`pipeline`] — generation, two-stage identification, and full
//!   experiment runs.
//!
//! Every random choice flows from explicit seeds, and file writers take
//! timestamps as inputs, so any dataset, model, or report can be rebuilt
//! byte for byte from its configuration.

pub mod classifier;
pub mod gridworld;
pub mod imaging;
pub mod metrics;
pub mod perturb;
pub mod pipeline;
pub mod planner;
pub mod storage;
pub mod taxonomy;

pub use classifier::{ClassifierModel, ImageClass, LabeledImageSet, SvmParams};
pub use gridworld::{Cell, GridMap, MapPair, Path, PathPair, Scenario, DEFAULT_GRID};
pub use imaging::{AugmentOp, PathImage, PixelClass};
pub use metrics::{BenchReport, ConfusionCounts, EvalReport};
pub use perturb::{GenConfig, Placement};
pub use pipeline::{
    ExperimentConfig, ExperimentOutcome, IdentificationResult, PipelineError, Stage,
};
pub use planner::{PlannerConfig, PlannerMode, ValueField};
pub use storage::{Manifest, Record};
pub use taxonomy::{DivergenceReport, Label, TaxonomyConfig, DEFAULT_THRESHOLD};
