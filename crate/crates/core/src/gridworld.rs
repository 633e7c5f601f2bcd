//! Core grid-world types: cells, occupancy maps, planning scenarios, map
//! pairs, and paths, together with explicit validation of their invariants.
//!
//! The coordinate convention used everywhere in this workspace: `x` is the
//! column, `y` is the row, and the origin is the top-left corner. Occupancy
//! grids are row-major, moves are 8-connected (any neighbor at Chebyshev
//! distance 1), and diagonal moves never require the orthogonally adjacent
//! cells to be free.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// Default grid edge length used across the toolkit.
pub const DEFAULT_GRID: usize = 28;

/// A single grid cell addressed by column (`x`) and row (`y`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    /// Chebyshev distance: the minimum number of 8-connected steps between
    /// two cells on an empty grid.
    pub fn chebyshev(self, other: Cell) -> u32 {
        let dx = (self.x - other.x).unsigned_abs();
        let dy = (self.y - other.y).unsigned_abs();
        dx.max(dy)
    }

    /// True when `other` is reachable from `self` in exactly one move.
    pub fn adjacent8(self, other: Cell) -> bool {
        self != other && self.chebyshev(other) == 1
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.x, self.y)
    }
}

/// Rectangular occupancy grid with an explicit obstacle set.
///
/// The obstacle set is ordered so that iteration (and thus serialization) is
/// deterministic regardless of insertion order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridMap {
    pub width: usize,
    pub height: usize,
    pub obstacles: BTreeSet<Cell>,
}

impl GridMap {
    /// An empty map of the given dimensions.
    pub fn new(width: usize, height: usize) -> Self {
        GridMap { width, height, obstacles: BTreeSet::new() }
    }

    pub fn with_obstacles(
        width: usize,
        height: usize,
        obstacles: impl IntoIterator<Item = Cell>,
    ) -> Self {
        GridMap { width, height, obstacles: obstacles.into_iter().collect() }
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height
    }

    pub fn is_obstacle(&self, c: Cell) -> bool {
        self.obstacles.contains(&c)
    }

    /// In bounds and not an obstacle.
    pub fn is_free(&self, c: Cell) -> bool {
        self.in_bounds(c) && !self.is_obstacle(c)
    }

    /// Row-major index of an in-bounds cell.
    pub fn index(&self, c: Cell) -> usize {
        debug_assert!(self.in_bounds(c));
        c.y as usize * self.width + c.x as usize
    }

    /// All cells in row-major order (row 0 first, columns ascending).
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        let width = self.width;
        (0..self.width * self.height)
            .map(move |i| Cell::new((i % width) as i32, (i / width) as i32))
    }

    /// In-bounds 8-connected neighbors of `c`, ordered by ascending `(y, x)`.
    ///
    /// The ordering is load-bearing: the planner's rollout tie-break relies
    /// on scanning neighbors smallest-`(y, x)` first.
    pub fn neighbors8(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        const OFFSETS: [(i32, i32); 8] = [
            (-1, -1),
            (0, -1),
            (1, -1),
            (-1, 0),
            (1, 0),
            (-1, 1),
            (0, 1),
            (1, 1),
        ];
        OFFSETS
            .iter()
            .map(move |&(dx, dy)| Cell::new(c.x + dx, c.y + dy))
            .filter(|&n| self.in_bounds(n))
    }

    /// In-bounds, obstacle-free 8-connected neighbors, same ordering as
    /// [`GridMap::neighbors8`].
    pub fn free_neighbors8(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        self.neighbors8(c).filter(|&n| !self.is_obstacle(n))
    }
}

impl Default for GridMap {
    fn default() -> Self {
        GridMap::new(DEFAULT_GRID, DEFAULT_GRID)
    }
}

/// A planning problem: a map plus start and goal cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub map: GridMap,
    pub start: Cell,
    pub goal: Cell,
}

/// An original scenario and its perturbed twin, which differs by exactly one
/// added obstacle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MapPair {
    /// Record number; unique within a dataset.
    pub id: u64,
    pub original: Scenario,
    pub adversarial: Scenario,
}

impl MapPair {
    /// Builds a pair by adding one obstacle to a copy of `original`.
    pub fn from_added_obstacle(
        id: u64,
        original: Scenario,
        added: Cell,
    ) -> Result<Self, ValidationError> {
        if !original.map.is_free(added) {
            return Err(ValidationError::OutOfBounds { cell: added });
        }
        if added == original.start || added == original.goal {
            return Err(ValidationError::ObstacleOnEndpoint { cell: added });
        }
        let mut adversarial = original.clone();
        adversarial.map.obstacles.insert(added);
        Ok(MapPair { id, original, adversarial })
    }

    /// The obstacle present only in the adversarial map, if the pair is
    /// well-formed.
    pub fn added_obstacle(&self) -> Option<Cell> {
        let mut diff = self
            .adversarial
            .map
            .obstacles
            .difference(&self.original.map.obstacles);
        match (diff.next(), diff.next()) {
            (Some(&c), None) => Some(c),
            _ => None,
        }
    }
}

/// A sequence of visited cells, including start and final cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Path {
    pub steps: Vec<Cell>,
}

impl Path {
    pub fn new(steps: Vec<Cell>) -> Self {
        Path { steps }
    }

    pub fn first(&self) -> Option<Cell> {
        self.steps.first().copied()
    }

    pub fn last(&self) -> Option<Cell> {
        self.steps.last().copied()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The set of distinct cells the path visits.
    pub fn cell_set(&self) -> BTreeSet<Cell> {
        self.steps.iter().copied().collect()
    }
}

/// The paths planned on the two maps of a pair. Both begin at the shared
/// start cell; they need not end at the same cell (the adversarial path may
/// fail to reach the goal).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathPair {
    pub original: Path,
    pub adversarial: Path,
}

/// Violations of grid-world invariants.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("cell {cell} is out of bounds or blocked")]
    OutOfBounds { cell: Cell },
    #[error("start cell {cell} lies on an obstacle")]
    StartOnObstacle { cell: Cell },
    #[error("goal cell {cell} lies on an obstacle")]
    GoalOnObstacle { cell: Cell },
    #[error("start and goal are both {cell}")]
    StartEqualsGoal { cell: Cell },
    #[error("an added obstacle may not cover the start or goal cell {cell}")]
    ObstacleOnEndpoint { cell: Cell },
    #[error("path is empty")]
    EmptyPath,
    #[error("step {index} moves from {from} to {to}, which are not 8-adjacent")]
    NonAdjacentStep { index: usize, from: Cell, to: Cell },
    #[error("step {index} visits obstacle cell {cell}")]
    StepOnObstacle { index: usize, cell: Cell },
    #[error("cell {cell} is visited more than once")]
    RepeatedCell { cell: Cell },
    #[error("paths start at {original} and {adversarial}, not a shared cell")]
    MismatchedStart { original: Cell, adversarial: Cell },
    #[error("map pair does not differ by exactly one added obstacle")]
    NotSingleObstacleDiff,
    #[error("map pair scenarios disagree on dimensions or endpoints")]
    MismatchedScenarios,
}

/// Checks bounds, obstacle placement, and endpoint distinctness.
pub fn validate_scenario(s: &Scenario) -> Result<(), ValidationError> {
    for &cell in [s.start, s.goal].iter() {
        if !s.map.in_bounds(cell) {
            return Err(ValidationError::OutOfBounds { cell });
        }
    }
    for &cell in &s.map.obstacles {
        if !s.map.in_bounds(cell) {
            return Err(ValidationError::OutOfBounds { cell });
        }
    }
    if s.map.is_obstacle(s.start) {
        return Err(ValidationError::StartOnObstacle { cell: s.start });
    }
    if s.map.is_obstacle(s.goal) {
        return Err(ValidationError::GoalOnObstacle { cell: s.goal });
    }
    if s.start == s.goal {
        return Err(ValidationError::StartEqualsGoal { cell: s.start });
    }
    Ok(())
}

/// Checks a planner-produced path against its scenario: non-empty, every
/// step in bounds and obstacle-free, consecutive cells 8-adjacent, and no
/// cell visited twice.
pub fn validate_path(p: &Path, s: &Scenario) -> Result<(), ValidationError> {
    if p.is_empty() {
        return Err(ValidationError::EmptyPath);
    }
    let mut seen = BTreeSet::new();
    for (index, &cell) in p.steps.iter().enumerate() {
        if !s.map.in_bounds(cell) {
            return Err(ValidationError::OutOfBounds { cell });
        }
        if s.map.is_obstacle(cell) {
            return Err(ValidationError::StepOnObstacle { index, cell });
        }
        if !seen.insert(cell) {
            return Err(ValidationError::RepeatedCell { cell });
        }
        if index > 0 {
            let from = p.steps[index - 1];
            if !from.adjacent8(cell) {
                return Err(ValidationError::NonAdjacentStep { index, from, to: cell });
            }
        }
    }
    Ok(())
}

/// Adjacency-only path check used for externally produced paths: revisits
/// are permitted and no map is consulted.
pub fn validate_path_adjacency(p: &Path) -> Result<(), ValidationError> {
    if p.is_empty() {
        return Err(ValidationError::EmptyPath);
    }
    for (index, window) in p.steps.windows(2).enumerate() {
        if !window[0].adjacent8(window[1]) {
            return Err(ValidationError::NonAdjacentStep {
                index: index + 1,
                from: window[0],
                to: window[1],
            });
        }
    }
    Ok(())
}

/// Checks both scenarios of a pair plus the single-added-obstacle rule.
pub fn validate_map_pair(mp: &MapPair) -> Result<(), ValidationError> {
    validate_scenario(&mp.original)?;
    validate_scenario(&mp.adversarial)?;
    let same_frame = mp.original.map.width == mp.adversarial.map.width
        && mp.original.map.height == mp.adversarial.map.height
        && mp.original.start == mp.adversarial.start
        && mp.original.goal == mp.adversarial.goal;
    if !same_frame {
        return Err(ValidationError::MismatchedScenarios);
    }
    let extra: Vec<&Cell> = mp
        .adversarial
        .map
        .obstacles
        .difference(&mp.original.map.obstacles)
        .collect();
    let missing = mp
        .original
        .map
        .obstacles
        .difference(&mp.adversarial.map.obstacles)
        .count();
    if extra.len() != 1 || missing != 0 {
        return Err(ValidationError::NotSingleObstacleDiff);
    }
    if *extra[0] == mp.original.start || *extra[0] == mp.original.goal {
        return Err(ValidationError::ObstacleOnEndpoint { cell: *extra[0] });
    }
    Ok(())
}

/// Checks that both paths are non-empty and begin at the same cell.
pub fn validate_path_pair(pp: &PathPair) -> Result<(), ValidationError> {
    let original = pp.original.first().ok_or(ValidationError::EmptyPath)?;
    let adversarial = pp.adversarial.first().ok_or(ValidationError::EmptyPath)?;
    if original != adversarial {
        return Err(ValidationError::MismatchedStart { original, adversarial });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open_scenario() -> Scenario {
        Scenario {
            map: GridMap::new(5, 5),
            start: Cell::new(0, 0),
            goal: Cell::new(4, 4),
        }
    }

    #[test]
    fn valid_scenario_passes() {
        assert_eq!(validate_scenario(&open_scenario()), Ok(()));
    }

    #[test]
    fn start_on_obstacle_is_rejected() {
        let mut s = open_scenario();
        s.map.obstacles.insert(s.start);
        assert_eq!(
            validate_scenario(&s),
            Err(ValidationError::StartOnObstacle { cell: s.start })
        );
    }

    #[test]
    fn coincident_start_and_goal_are_rejected() {
        let mut s = open_scenario();
        s.goal = s.start;
        assert_eq!(
            validate_scenario(&s),
            Err(ValidationError::StartEqualsGoal { cell: s.start })
        );
    }

    #[test]
    fn out_of_bounds_goal_is_rejected() {
        let mut s = open_scenario();
        s.goal = Cell::new(5, 0);
        assert_eq!(
            validate_scenario(&s),
            Err(ValidationError::OutOfBounds { cell: s.goal })
        );
    }

    #[test]
    fn diagonal_steps_are_valid_moves() {
        let s = open_scenario();
        let p = Path::new(vec![
            Cell::new(0, 0),
            Cell::new(1, 1),
            Cell::new(2, 2),
            Cell::new(3, 3),
            Cell::new(4, 4),
        ]);
        assert_eq!(validate_path(&p, &s), Ok(()));
    }

    #[test]
    fn chebyshev_two_jump_is_not_adjacent() {
        let s = open_scenario();
        let p = Path::new(vec![Cell::new(0, 0), Cell::new(2, 1)]);
        assert_eq!(
            validate_path(&p, &s),
            Err(ValidationError::NonAdjacentStep {
                index: 1,
                from: Cell::new(0, 0),
                to: Cell::new(2, 1),
            })
        );
    }

    #[test]
    fn path_through_obstacle_is_rejected() {
        let mut s = open_scenario();
        s.map.obstacles.insert(Cell::new(1, 1));
        let p = Path::new(vec![Cell::new(0, 0), Cell::new(1, 1), Cell::new(2, 2)]);
        assert_eq!(
            validate_path(&p, &s),
            Err(ValidationError::StepOnObstacle { index: 1, cell: Cell::new(1, 1) })
        );
    }

    #[test]
    fn revisiting_a_cell_is_rejected_for_planner_paths() {
        let s = open_scenario();
        let p = Path::new(vec![Cell::new(0, 0), Cell::new(1, 0), Cell::new(0, 0)]);
        assert_eq!(
            validate_path(&p, &s),
            Err(ValidationError::RepeatedCell { cell: Cell::new(0, 0) })
        );
    }

    #[test]
    fn adjacency_only_check_permits_revisits() {
        let p = Path::new(vec![Cell::new(0, 0), Cell::new(1, 0), Cell::new(0, 0)]);
        assert_eq!(validate_path_adjacency(&p), Ok(()));
    }

    #[test]
    fn map_pair_exposes_its_added_obstacle() {
        let mp =
            MapPair::from_added_obstacle(1, open_scenario(), Cell::new(2, 2)).unwrap();
        assert_eq!(mp.added_obstacle(), Some(Cell::new(2, 2)));
        assert_eq!(validate_map_pair(&mp), Ok(()));
        assert!(mp.original.map.obstacles.is_empty());
    }

    #[test]
    fn added_obstacle_may_not_cover_the_goal() {
        let s = open_scenario();
        let goal = s.goal;
        assert_eq!(
            MapPair::from_added_obstacle(1, s, goal),
            Err(ValidationError::ObstacleOnEndpoint { cell: goal })
        );
    }

    #[test]
    fn map_pair_with_two_extra_obstacles_is_rejected() {
        let mut mp =
            MapPair::from_added_obstacle(1, open_scenario(), Cell::new(2, 2)).unwrap();
        mp.adversarial.map.obstacles.insert(Cell::new(3, 3));
        assert_eq!(
            validate_map_pair(&mp),
            Err(ValidationError::NotSingleObstacleDiff)
        );
    }

    #[test]
    fn path_pair_must_share_its_start() {
        let pp = PathPair {
            original: Path::new(vec![Cell::new(0, 0), Cell::new(1, 0)]),
            adversarial: Path::new(vec![Cell::new(1, 1), Cell::new(2, 2)]),
        };
        assert_eq!(
            validate_path_pair(&pp),
            Err(ValidationError::MismatchedStart {
                original: Cell::new(0, 0),
                adversarial: Cell::new(1, 1),
            })
        );
    }

    #[test]
    fn neighbors_scan_in_row_major_order() {
        let map = GridMap::new(3, 3);
        let order: Vec<Cell> = map.neighbors8(Cell::new(1, 1)).collect();
        assert_eq!(
            order,
            vec![
                Cell::new(0, 0),
                Cell::new(1, 0),
                Cell::new(2, 0),
                Cell::new(0, 1),
                Cell::new(2, 1),
                Cell::new(0, 2),
                Cell::new(1, 2),
                Cell::new(2, 2),
            ]
        );
    }

    #[test]
    fn corner_cells_have_three_neighbors() {
        let map = GridMap::new(3, 3);
        assert_eq!(map.neighbors8(Cell::new(0, 0)).count(), 3);
        assert_eq!(map.neighbors8(Cell::new(2, 2)).count(), 3);
    }
}
