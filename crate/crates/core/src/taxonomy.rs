//! Rule-based taxonomy of path pairs.
//!
//! Comparing the path planned on an original map with the path planned after
//! one obstacle was added yields exactly one of four outcomes:
//!
//! * **UrP** (unreached) — the adversarial path never arrives at the goal.
//! * **UcP** (unchanged) — both paths are element-wise identical.
//! * **FP** (fork) — the adversarial path reroutes far from the original.
//! * **DP** (detour) — the adversarial path bypasses the obstacle locally.
//!
//! Fork versus detour is decided by *divergence*: how far the noncoincident
//! cells of one path sit from the noncoincident cells of the other, measured
//! per row (horizontal gaps) and per column (vertical gaps). A cell that
//! shares neither a row nor a column with any noncoincident cell of the
//! other path has diverged beyond any finite gap, so its mere existence
//! marks a fork.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;

use crate::gridworld::{Cell, PathPair};

/// Default fork threshold in cells, sized for 28x28 grids. Larger grids
/// deserve a proportionally larger threshold.
pub const DEFAULT_THRESHOLD: u32 = 4;

/// The four path-pair outcomes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    /// Adversarial path missed the goal ("UrP").
    Unreached,
    /// Adversarial path reroutes beyond the threshold ("FP").
    Fork,
    /// Adversarial path deviates only locally ("DP").
    Detour,
    /// Paths are identical ("UcP").
    Unchanged,
}

impl Label {
    pub const ALL: [Label; 4] = [Label::Unreached, Label::Fork, Label::Detour, Label::Unchanged];

    /// Canonical serialized form.
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Unreached => "UrP",
            Label::Fork => "FP",
            Label::Detour => "DP",
            Label::Unchanged => "UcP",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        Label::ALL.into_iter().find(|l| l.as_str() == s)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Parameters for rule classification: the goal the adversarial path is
/// expected to reach and the fork threshold in cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TaxonomyConfig {
    pub threshold: u32,
    pub goal: Cell,
}

/// Divergence measurements over the noncoincident parts of a path pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DivergenceReport {
    /// Largest row-wise gap: the maximum, over all noncoincident cells with
    /// at least one same-row counterpart on the other side, of the distance
    /// to the nearest such counterpart. Zero when nothing matches.
    pub dx_max: u32,
    /// Largest column-wise gap, defined symmetrically.
    pub dy_max: u32,
    /// Noncoincident cells (from either side) with no same-row counterpart.
    pub disjoint_rows: usize,
    /// Noncoincident cells with no same-column counterpart.
    pub disjoint_cols: usize,
    /// Noncoincident cells with neither a same-row nor a same-column
    /// counterpart; any such cell marks a fork.
    pub fully_disjoint: usize,
}

/// Splits a path pair into (original-only, adversarial-only) cell sets.
/// Cells visited by both paths drop out entirely.
pub fn noncoincident_parts(pp: &PathPair) -> (BTreeSet<Cell>, BTreeSet<Cell>) {
    let original = pp.original.cell_set();
    let adversarial = pp.adversarial.cell_set();
    let original_only = original.difference(&adversarial).copied().collect();
    let adversarial_only = adversarial.difference(&original).copied().collect();
    (original_only, adversarial_only)
}

/// Sorted coordinate lists keyed by the other coordinate: `rows[y]` holds
/// the sorted x's in row `y`, `cols[x]` the sorted y's in column `x`.
struct AxisIndex {
    rows: BTreeMap<i32, Vec<i32>>,
    cols: BTreeMap<i32, Vec<i32>>,
}

impl AxisIndex {
    fn build(cells: &BTreeSet<Cell>) -> Self {
        let mut rows: BTreeMap<i32, Vec<i32>> = BTreeMap::new();
        let mut cols: BTreeMap<i32, Vec<i32>> = BTreeMap::new();
        for c in cells {
            rows.entry(c.y).or_default().push(c.x);
            cols.entry(c.x).or_default().push(c.y);
        }
        for xs in rows.values_mut() {
            xs.sort_unstable();
        }
        for ys in cols.values_mut() {
            ys.sort_unstable();
        }
        AxisIndex { rows, cols }
    }

    /// Distance from `value` to the nearest entry of the sorted list keyed
    /// by `key`, or `None` when the key has no entries.
    fn nearest(map: &BTreeMap<i32, Vec<i32>>, key: i32, value: i32) -> Option<u32> {
        let sorted = map.get(&key)?;
        let i = sorted.partition_point(|&v| v < value);
        let mut best = u32::MAX;
        if i < sorted.len() {
            best = best.min((sorted[i] - value).unsigned_abs());
        }
        if i > 0 {
            best = best.min((value - sorted[i - 1]).unsigned_abs());
        }
        Some(best)
    }
}

/// Measures row-wise and column-wise gaps between the noncoincident parts.
///
/// Each cell of one side is matched against the nearest same-row cell of
/// the other side (for `dx`) and the nearest same-column cell (for `dy`);
/// both directions contribute to the same maxima. Identical paths produce
/// the all-zero report.
pub fn divergence(pp: &PathPair) -> DivergenceReport {
    let (original_only, adversarial_only) = noncoincident_parts(pp);
    let mut report = DivergenceReport::default();
    let original_index = AxisIndex::build(&original_only);
    let adversarial_index = AxisIndex::build(&adversarial_only);
    for (cells, other) in [
        (&adversarial_only, &original_index),
        (&original_only, &adversarial_index),
    ] {
        for c in cells {
            let dx = AxisIndex::nearest(&other.rows, c.y, c.x);
            let dy = AxisIndex::nearest(&other.cols, c.x, c.y);
            match dx {
                Some(gap) => report.dx_max = report.dx_max.max(gap),
                None => report.disjoint_rows += 1,
            }
            match dy {
                Some(gap) => report.dy_max = report.dy_max.max(gap),
                None => report.disjoint_cols += 1,
            }
            if dx.is_none() && dy.is_none() {
                report.fully_disjoint += 1;
            }
        }
    }
    report
}

/// Assigns exactly one label to a path pair.
///
/// The order of the checks matters: a truncated path that happens to be a
/// prefix of the original must come out as `Unreached`, not `Unchanged`,
/// so the goal test runs first. Fork detection fires when either axis gap
/// exceeds the threshold or any noncoincident cell is fully disjoint.
pub fn classify_rule(pp: &PathPair, cfg: &TaxonomyConfig) -> Label {
    if pp.adversarial.last() != Some(cfg.goal) {
        return Label::Unreached;
    }
    if pp.original.steps == pp.adversarial.steps {
        return Label::Unchanged;
    }
    let d = divergence(pp);
    if d.dx_max > cfg.threshold || d.dy_max > cfg.threshold || d.fully_disjoint > 0 {
        Label::Fork
    } else {
        Label::Detour
    }
}

/// A pair is an attack exactly when the outcome is unreached or fork.
pub fn attack_verdict(label: Label) -> bool {
    matches!(label, Label::Unreached | Label::Fork)
}
