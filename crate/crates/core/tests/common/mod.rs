//! Independent reference implementations shared by the integration suites.
//!
//! Every function here recomputes, by deliberate brute force, a quantity the
//! library computes more cleverly. None of them call into the library code
//! paths they are used to check; agreement between the two is what the
//! acceptance suite asserts.

// Each integration target compiles this module separately and uses its own
// subset of the oracles.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use advpath::classifier::ImageClass;
use advpath::gridworld::{Cell, GridMap, Path, PathPair};
use advpath::taxonomy::DivergenceReport;

/// Shortest 8-connected move count from `start` to `goal` over free cells,
/// or `None` when the goal is unreachable. Classic binary-heap Dijkstra with
/// unit edge costs.
pub fn dijkstra_steps(map: &GridMap, start: Cell, goal: Cell) -> Option<usize> {
    if !map.is_free(start) || !map.is_free(goal) {
        return None;
    }
    let n = map.width * map.height;
    let mut dist: Vec<usize> = vec![usize::MAX; n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = BinaryHeap::new();
    let idx = |c: Cell| c.y as usize * map.width + c.x as usize;
    dist[idx(start)] = 0;
    heap.push(Reverse((0, idx(start))));
    while let Some(Reverse((d, i))) = heap.pop() {
        if d > dist[i] {
            continue;
        }
        let cell = Cell::new((i % map.width) as i32, (i / map.width) as i32);
        if cell == goal {
            return Some(d);
        }
        for dy in -1..=1 {
            for dx in -1..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let next = Cell::new(cell.x + dx, cell.y + dy);
                if !map.is_free(next) {
                    continue;
                }
                let j = idx(next);
                if d + 1 < dist[j] {
                    dist[j] = d + 1;
                    heap.push(Reverse((d + 1, j)));
                }
            }
        }
    }
    None
}

/// True when `path` is a well-formed route from `start` to `goal`: nonempty,
/// correct endpoints, every cell free, every step 8-adjacent.
pub fn path_is_valid(map: &GridMap, path: &Path, start: Cell, goal: Cell) -> bool {
    let steps = &path.steps;
    if steps.first() != Some(&start) || steps.last() != Some(&goal) {
        return false;
    }
    if steps.iter().any(|&c| !map.is_free(c)) {
        return false;
    }
    steps.windows(2).all(|w| w[0].adjacent8(w[1]))
}

/// Divergence recomputed by an O(n·m) scan: every noncoincident cell of one
/// side is compared against every noncoincident cell of the other, keeping
/// the nearest same-row and same-column distances.
pub fn divergence_scan(pp: &PathPair) -> DivergenceReport {
    let original: Vec<Cell> = pp
        .original
        .cell_set()
        .difference(&pp.adversarial.cell_set())
        .copied()
        .collect();
    let adversarial: Vec<Cell> = pp
        .adversarial
        .cell_set()
        .difference(&pp.original.cell_set())
        .copied()
        .collect();
    let mut report = DivergenceReport::default();
    for (side, other) in [(&adversarial, &original), (&original, &adversarial)] {
        for &c in side {
            let mut best_dx: Option<u32> = None;
            let mut best_dy: Option<u32> = None;
            for &o in other {
                if o.y == c.y {
                    let gap = (o.x - c.x).unsigned_abs();
                    best_dx = Some(best_dx.map_or(gap, |b| b.min(gap)));
                }
                if o.x == c.x {
                    let gap = (o.y - c.y).unsigned_abs();
                    best_dy = Some(best_dy.map_or(gap, |b| b.min(gap)));
                }
            }
            match best_dx {
                Some(gap) => report.dx_max = report.dx_max.max(gap),
                None => report.disjoint_rows += 1,
            }
            match best_dy {
                Some(gap) => report.dy_max = report.dy_max.max(gap),
                None => report.disjoint_cols += 1,
            }
            if best_dx.is_none() && best_dy.is_none() {
                report.fully_disjoint += 1;
            }
        }
    }
    report
}

/// The pairwise ranking statistic: over every (fork, detour) pair, a fork
/// scored strictly higher counts 1, a tie counts 1/2. Computed in integers
/// (doubled) and divided once, so it is exact up to the final division.
pub fn pairwise_auc(scored: &[(f64, ImageClass)]) -> f64 {
    let forks: Vec<f64> =
        scored.iter().filter(|(_, c)| *c == ImageClass::Fork).map(|(s, _)| *s).collect();
    let detours: Vec<f64> =
        scored.iter().filter(|(_, c)| *c == ImageClass::Detour).map(|(s, _)| *s).collect();
    let mut doubled_wins: u64 = 0;
    for &f in &forks {
        for &d in &detours {
            if f > d {
                doubled_wins += 2;
            } else if f == d {
                doubled_wins += 1;
            }
        }
    }
    doubled_wins as f64 / (2 * forks.len() * detours.len()) as f64
}

/// A reference solution of the soft-margin dual problem.
pub struct QpSolution {
    pub alphas: Vec<f64>,
    /// `w` over the inputs followed by the bias term.
    pub augmented_weights: Vec<f64>,
}

/// Solves min ½·aᵀQa − 1ᵀa over the box [0, C]ⁿ by projected gradient
/// descent, where Qᵢⱼ = yᵢyⱼ(⟨xᵢ,xⱼ⟩ + 1). The +1 mirrors a constant
/// feature, so the bias is part of the weight vector being learned.
pub fn qp_reference(points: &[(Vec<f64>, f64)], c: f64) -> QpSolution {
    let n = points.len();
    let mut q = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..n {
            let dot: f64 =
                points[i].0.iter().zip(&points[j].0).map(|(a, b)| a * b).sum::<f64>() + 1.0;
            q[i][j] = points[i].1 * points[j].1 * dot;
        }
    }
    // 1/L step size, with L bounded by the infinity norm of Q.
    let l = q
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(f64::MIN, f64::max)
        .max(1e-12);
    let step = 1.0 / l;
    let mut alphas = vec![0.0f64; n];
    for _ in 0..2_000_000 {
        let mut worst = 0.0f64;
        for i in 0..n {
            let grad: f64 = q[i].iter().zip(&alphas).map(|(qij, a)| qij * a).sum::<f64>() - 1.0;
            let projected = if alphas[i] <= 0.0 {
                grad.min(0.0)
            } else if alphas[i] >= c {
                grad.max(0.0)
            } else {
                grad
            };
            worst = worst.max(projected.abs());
            alphas[i] = (alphas[i] - step * grad).clamp(0.0, c);
        }
        if worst < 1e-10 {
            break;
        }
    }
    let dim = points[0].0.len();
    let mut augmented_weights = vec![0.0f64; dim + 1];
    for (i, (x, y)) in points.iter().enumerate() {
        for (d, v) in x.iter().enumerate() {
            augmented_weights[d] += alphas[i] * y * v;
        }
        augmented_weights[dim] += alphas[i] * y;
    }
    QpSolution { alphas, augmented_weights }
}

/// A random 8-connected walk of `len` cells staying inside a `width`×`height`
/// box. Revisits are allowed; only adjacency and bounds are guaranteed.
pub fn random_walk(rng: &mut ChaCha8Rng, len: usize, width: usize, height: usize) -> Path {
    let mut steps = Vec::with_capacity(len);
    let mut cur =
        Cell::new(rng.gen_range(0..width as i32), rng.gen_range(0..height as i32));
    steps.push(cur);
    while steps.len() < len {
        let dx = rng.gen_range(-1..=1);
        let dy = rng.gen_range(-1..=1);
        if dx == 0 && dy == 0 {
            continue;
        }
        let next = Cell::new(cur.x + dx, cur.y + dy);
        if next.x < 0 || next.y < 0 || next.x >= width as i32 || next.y >= height as i32 {
            continue;
        }
        steps.push(next);
        cur = next;
    }
    Path::new(steps)
}

/// A randomized path pair mixing the interesting shapes: identical pairs,
/// truncated adversarial paths, and independent walks (half of which are
/// bent to end at the original's goal so the fork/detour rule is exercised).
pub fn random_path_pair(
    rng: &mut ChaCha8Rng,
    max_len: usize,
    width: usize,
    height: usize,
) -> PathPair {
    let len = rng.gen_range(1..=max_len);
    let original = random_walk(rng, len, width, height);
    let adversarial = match rng.gen_range(0..10u32) {
        0 | 1 => original.clone(),
        2 | 3 => {
            let cut = rng.gen_range(1..=original.steps.len());
            Path::new(original.steps[..cut].to_vec())
        }
        _ => {
            let walk_len = rng.gen_range(1..=max_len);
            let mut walk = random_walk(rng, walk_len, width, height);
            // Share the start, as planned pairs always do.
            walk.steps[0] = original.steps[0];
            if rng.gen_bool(0.5) {
                let last = walk.steps.len() - 1;
                walk.steps[last] = original.steps[original.steps.len() - 1];
            }
            walk
        }
    };
    PathPair { original, adversarial }
}
