//! Value-iteration planner over 8-connected occupancy grids.
//!
//! The planner computes a value field by synchronous Bellman sweeps and then
//! extracts a path by greedy rollout. Two modes exist on purpose:
//!
//! * **Exact** — sweeps run until the field stops changing, so greedy
//!   rollout follows a shortest path whenever the goal is reachable.
//! * **Limited** — exactly `max_iterations` sweeps run. Cells farther from
//!   the goal than the sweep horizon still carry the unreachable sentinel,
//!   so rollouts can dead-end. This intentionally imperfect mode is how the
//!   dataset acquires unreached and strongly diverging paths.
//!
//! Everything here is deterministic: ties during rollout are broken toward
//! the smallest `(y, x)` neighbor.

use serde::{Deserialize, Serialize};

use crate::gridworld::{Cell, MapPair, Path, PathPair, Scenario};

/// Sentinel value for cells with no known route to the goal (and for
/// obstacle cells, which never participate in planning).
pub const UNREACHABLE_VALUE: f64 = f64::NEG_INFINITY;

/// Convergence tolerance for exact-mode sweeps.
pub const CONVERGENCE_TOL: f64 = 1e-9;

/// How the value field is iterated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerMode {
    /// Sweep until the field converges.
    Exact,
    /// Run exactly this many sweeps, converged or not.
    Limited { max_iterations: usize },
}

/// Planner parameters. Rewards follow the usual shortest-path shaping: a
/// negative per-step reward and a positive goal reward, so cell values
/// decrease with distance from the goal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub mode: PlannerMode,
    /// Rollout step budget; rollouts stop here even if still improving.
    pub max_rollout_steps: usize,
    pub step_reward: f64,
    pub goal_reward: f64,
}

impl PlannerConfig {
    /// Exact planning with the default rewards and a rollout budget of
    /// `4 * width * height` steps.
    pub fn exact_for(width: usize, height: usize) -> Self {
        PlannerConfig {
            mode: PlannerMode::Exact,
            max_rollout_steps: 4 * width * height,
            step_reward: -1.0,
            goal_reward: 10.0,
        }
    }

    /// Limited planning with the default rewards.
    pub fn limited_for(width: usize, height: usize, max_iterations: usize) -> Self {
        PlannerConfig {
            mode: PlannerMode::Limited { max_iterations },
            ..PlannerConfig::exact_for(width, height)
        }
    }
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig::exact_for(crate::gridworld::DEFAULT_GRID, crate::gridworld::DEFAULT_GRID)
    }
}

/// The result of value iteration: one value per cell, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueField {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    /// Number of sweeps actually executed.
    pub iterations_run: usize,
}

impl ValueField {
    pub fn value(&self, c: Cell) -> f64 {
        if c.x < 0 || c.y < 0 || c.x as usize >= self.width || c.y as usize >= self.height {
            return UNREACHABLE_VALUE;
        }
        self.values[c.y as usize * self.width + c.x as usize]
    }
}

/// Runs synchronous (Jacobi) Bellman sweeps over the scenario's grid.
///
/// The goal cell is pinned at `goal_reward`; obstacle cells keep the
/// unreachable sentinel and are never read as sources or targets. Every
/// other free cell receives `step_reward + max(value of free neighbors)`.
pub fn value_iterate(s: &Scenario, cfg: &PlannerConfig) -> ValueField {
    let width = s.map.width;
    let height = s.map.height;
    let n = width * height;
    let goal_idx = s.map.index(s.goal);

    // Precompute neighbor index lists once; the sweep loop is the hot path.
    let mut free = vec![false; n];
    for c in s.map.cells() {
        free[s.map.index(c)] = s.map.is_free(c);
    }
    let mut neighbors: Vec<Vec<u32>> = vec![Vec::new(); n];
    for c in s.map.cells() {
        let i = s.map.index(c);
        if !free[i] || i == goal_idx {
            continue;
        }
        neighbors[i] = s
            .map
            .free_neighbors8(c)
            .map(|nb| s.map.index(nb) as u32)
            .collect();
    }

    let mut values = vec![UNREACHABLE_VALUE; n];
    values[goal_idx] = cfg.goal_reward;
    let mut next = values.clone();

    let (sweep_cap, run_to_convergence) = match cfg.mode {
        PlannerMode::Exact => (n + 2, true),
        PlannerMode::Limited { max_iterations } => (max_iterations, false),
    };

    let mut iterations_run = 0;
    for _ in 0..sweep_cap {
        let mut max_delta = 0.0f64;
        for i in 0..n {
            if !free[i] || i == goal_idx {
                continue;
            }
            let mut best = UNREACHABLE_VALUE;
            for &nb in &neighbors[i] {
                let v = values[nb as usize];
                if v > best {
                    best = v;
                }
            }
            let updated = if best == UNREACHABLE_VALUE {
                UNREACHABLE_VALUE
            } else {
                cfg.step_reward + best
            };
            if updated != values[i] {
                let delta = (updated - values[i]).abs();
                if delta > max_delta {
                    max_delta = delta;
                }
            }
            next[i] = updated;
        }
        std::mem::swap(&mut values, &mut next);
        iterations_run += 1;
        if run_to_convergence && max_delta <= CONVERGENCE_TOL {
            break;
        }
    }

    ValueField { width, height, values, iterations_run }
}

/// Greedy rollout over the value field of `s`.
///
/// Starting from the start cell, the rollout repeatedly moves to the
/// highest-valued free neighbor, breaking ties toward the smallest `(y, x)`.
/// It stops at the goal, after `max_rollout_steps` moves, or as soon as no
/// neighbor strictly improves on the current cell's value — so a start cell
/// with no route in the field yields the single-cell path `[start]`.
/// Because each move strictly increases the cell value, rollouts never
/// revisit a cell.
pub fn plan(s: &Scenario, cfg: &PlannerConfig) -> Path {
    let field = value_iterate(s, cfg);
    let mut steps = vec![s.start];
    let mut current = s.start;
    while current != s.goal && steps.len() - 1 < cfg.max_rollout_steps {
        let here = field.value(current);
        let mut best: Option<(Cell, f64)> = None;
        for nb in s.map.free_neighbors8(current) {
            let v = field.value(nb);
            if best.map_or(true, |(_, bv)| v > bv) {
                best = Some((nb, v));
            }
        }
        match best {
            Some((cell, v)) if v > here => {
                steps.push(cell);
                current = cell;
            }
            _ => break,
        }
    }
    Path::new(steps)
}

/// Plans both maps of a pair with the same configuration.
pub fn plan_pair(mp: &MapPair, cfg: &PlannerConfig) -> PathPair {
    PathPair {
        original: plan(&mp.original, cfg),
        adversarial: plan(&mp.adversarial, cfg),
    }
}

/// True when the path's final cell is the goal.
pub fn reaches_goal(p: &Path, goal: Cell) -> bool {
    p.last() == Some(goal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::{validate_path, GridMap};
    use std::collections::VecDeque;

    fn scenario(width: usize, height: usize, start: (i32, i32), goal: (i32, i32)) -> Scenario {
        Scenario {
            map: GridMap::new(width, height),
            start: Cell::new(start.0, start.1),
            goal: Cell::new(goal.0, goal.1),
        }
    }

    /// Breadth-first search step count; the independent yardstick for
    /// exact-mode rollouts (uniform move cost makes BFS optimal).
    fn bfs_steps(s: &Scenario) -> Option<usize> {
        let mut dist = vec![usize::MAX; s.map.width * s.map.height];
        let mut queue = VecDeque::new();
        dist[s.map.index(s.start)] = 0;
        queue.push_back(s.start);
        while let Some(c) = queue.pop_front() {
            let d = dist[s.map.index(c)];
            if c == s.goal {
                return Some(d);
            }
            for nb in s.map.free_neighbors8(c) {
                let i = s.map.index(nb);
                if dist[i] == usize::MAX {
                    dist[i] = d + 1;
                    queue.push_back(nb);
                }
            }
        }
        None
    }

    #[test]
    fn one_step_from_goal_costs_one_step_reward() {
        let s = scenario(2, 1, (0, 0), (1, 0));
        let field = value_iterate(&s, &PlannerConfig::exact_for(2, 1));
        assert_eq!(field.value(Cell::new(1, 0)), 10.0);
        assert_eq!(field.value(Cell::new(0, 0)), 9.0);
    }

    #[test]
    fn goal_cell_keeps_goal_reward_in_both_modes() {
        let s = scenario(4, 4, (0, 0), (3, 3));
        let exact = value_iterate(&s, &PlannerConfig::exact_for(4, 4));
        let limited = value_iterate(&s, &PlannerConfig::limited_for(4, 4, 1));
        assert_eq!(exact.value(s.goal), 10.0);
        assert_eq!(limited.value(s.goal), 10.0);
    }

    #[test]
    fn obstacles_keep_the_unreachable_sentinel() {
        let mut s = scenario(3, 3, (0, 0), (2, 2));
        s.map.obstacles.insert(Cell::new(1, 0));
        let field = value_iterate(&s, &PlannerConfig::exact_for(3, 3));
        assert_eq!(field.value(Cell::new(1, 0)), UNREACHABLE_VALUE);
    }

    #[test]
    fn empty_grid_rollout_takes_the_tie_broken_diagonal() {
        let s = scenario(3, 3, (0, 0), (2, 2));
        let path = plan(&s, &PlannerConfig::exact_for(3, 3));
        assert_eq!(
            path.steps,
            vec![Cell::new(0, 0), Cell::new(1, 1), Cell::new(2, 2)]
        );
    }

    #[test]
    fn coincident_start_and_goal_yield_a_single_cell_path() {
        // Not a valid scenario, but the rollout must still behave sanely.
        let s = scenario(3, 3, (1, 1), (1, 1));
        let path = plan(&s, &PlannerConfig::exact_for(3, 3));
        assert_eq!(path.steps, vec![Cell::new(1, 1)]);
    }

    #[test]
    fn unreachable_goal_leaves_the_planner_at_the_start() {
        let mut s = scenario(4, 4, (0, 0), (3, 3));
        // Wall the goal into its corner.
        s.map.obstacles.extend([Cell::new(2, 2), Cell::new(2, 3), Cell::new(3, 2)]);
        let path = plan(&s, &PlannerConfig::exact_for(4, 4));
        assert_eq!(path.steps, vec![Cell::new(0, 0)]);
    }

    #[test]
    fn exact_rollouts_match_bfs_lengths_on_random_grids() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let cfg = PlannerConfig::exact_for(8, 8);
        for _ in 0..200 {
            let mut s = scenario(8, 8, (0, 0), (7, 7));
            for c in GridMap::new(8, 8).cells() {
                if c != s.start && c != s.goal && rng.gen_bool(0.25) {
                    s.map.obstacles.insert(c);
                }
            }
            let path = plan(&s, &cfg);
            match bfs_steps(&s) {
                Some(steps) => {
                    assert_eq!(path.len() - 1, steps, "suboptimal rollout on {s:?}");
                    assert_eq!(path.last(), Some(s.goal));
                    validate_path(&path, &s).unwrap();
                }
                None => assert_eq!(path.steps, vec![s.start]),
            }
        }
    }

    #[test]
    fn limited_mode_runs_exactly_the_requested_sweeps() {
        let s = scenario(6, 6, (0, 0), (5, 5));
        let field = value_iterate(&s, &PlannerConfig::limited_for(6, 6, 3));
        assert_eq!(field.iterations_run, 3);
        // Cells beyond the three-sweep horizon are still unreachable.
        assert_eq!(field.value(Cell::new(0, 0)), UNREACHABLE_VALUE);
        assert!(field.value(Cell::new(3, 3)) > UNREACHABLE_VALUE);
    }

    #[test]
    fn limited_mode_with_enough_sweeps_equals_exact() {
        let mut s = scenario(6, 6, (0, 0), (5, 5));
        s.map.obstacles.extend([
            Cell::new(2, 0),
            Cell::new(2, 1),
            Cell::new(2, 2),
            Cell::new(2, 3),
            Cell::new(4, 5),
            Cell::new(4, 4),
        ]);
        let exact = value_iterate(&s, &PlannerConfig::exact_for(6, 6));
        let limited = value_iterate(&s, &PlannerConfig::limited_for(6, 6, 36));
        for (a, b) in exact.values.iter().zip(&limited.values) {
            if a.is_finite() || b.is_finite() {
                assert!((a - b).abs() <= CONVERGENCE_TOL, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn short_rollout_budget_truncates_the_path() {
        let s = scenario(8, 1, (0, 0), (7, 0));
        let mut cfg = PlannerConfig::exact_for(8, 1);
        cfg.max_rollout_steps = 3;
        let path = plan(&s, &cfg);
        assert_eq!(path.len(), 4);
        assert_ne!(path.last(), Some(s.goal));
    }

    #[test]
    fn planning_is_deterministic() {
        let mut s = scenario(10, 10, (0, 3), (9, 6));
        s.map.obstacles.extend([Cell::new(4, 4), Cell::new(4, 5), Cell::new(5, 4)]);
        let cfg = PlannerConfig::exact_for(10, 10);
        assert_eq!(plan(&s, &cfg), plan(&s, &cfg));
        assert_eq!(value_iterate(&s, &cfg), value_iterate(&s, &cfg));
    }

    #[test]
    fn off_corridor_obstacle_leaves_both_paths_identical() {
        let s = scenario(6, 6, (0, 0), (5, 5));
        let mp = MapPair::from_added_obstacle(1, s, Cell::new(5, 0)).unwrap();
        let pp = plan_pair(&mp, &PlannerConfig::exact_for(6, 6));
        assert_eq!(pp.original.steps, pp.adversarial.steps);
    }

    #[test]
    fn on_path_obstacle_forces_the_adversarial_path_around_it() {
        let s = scenario(6, 6, (0, 0), (5, 5));
        let cfg = PlannerConfig::exact_for(6, 6);
        let original = plan(&s, &cfg);
        let blocked = original.steps[2];
        let mp = MapPair::from_added_obstacle(1, s, blocked).unwrap();
        let pp = plan_pair(&mp, &cfg);
        assert!(pp.original.steps.contains(&blocked));
        assert!(!pp.adversarial.steps.contains(&blocked));
        assert_eq!(pp.adversarial.last(), Some(mp.adversarial.goal));
    }

    #[test]
    fn walling_off_the_goal_strands_the_adversarial_path() {
        let mut s = scenario(4, 4, (0, 0), (3, 3));
        s.map.obstacles.extend([Cell::new(2, 3), Cell::new(3, 2)]);
        let mp = MapPair::from_added_obstacle(1, s, Cell::new(2, 2)).unwrap();
        let pp = plan_pair(&mp, &PlannerConfig::exact_for(4, 4));
        assert_eq!(pp.original.last(), Some(Cell::new(3, 3)));
        assert_ne!(pp.adversarial.last(), Some(Cell::new(3, 3)));
    }
}
