//! Seeded random maps and scenes in the style of the benchmark's `random-*`
//! family.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grid::{Cell, GridMap};
use crate::scenario::AgentTask;

/// A `width x height` map with `round(density * cells)` random obstacles.
pub fn random_map(name: &str, width: usize, height: usize, density: f64, seed: u64) -> GridMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = width * height;
    let obstacles = ((density * cells as f64).round() as usize).min(cells.saturating_sub(1));
    let mut idx: Vec<usize> = (0..cells).collect();
    idx.shuffle(&mut rng);
    let mut blocked = vec![false; cells];
    for &i in &idx[..obstacles] {
        blocked[i] = true;
    }
    GridMap::new(name, width, height, blocked)
}

/// Free cells of the largest 4-connected component, in row-major order.
pub fn largest_component(map: &GridMap) -> Vec<Cell> {
    let mut label = vec![usize::MAX; map.num_cells()];
    let mut best: Vec<Cell> = Vec::new();
    for start in map.free_cells() {
        let si = map.index(start).unwrap();
        if label[si] != usize::MAX {
            continue;
        }
        label[si] = si;
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(c) = queue.pop_front() {
            for n in map.neighbors(c) {
                let ni = map.index(n).unwrap();
                if label[ni] == usize::MAX {
                    label[ni] = si;
                    comp.push(n);
                    queue.push_back(n);
                }
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    best.sort();
    best
}

/// `n` agents with distinct starts and distinct goals drawn from the largest
/// component, so every goal is reachable.
///
/// Panics if the component has fewer than `n` cells.
pub fn random_tasks(map: &GridMap, n: usize, seed: u64) -> Vec<AgentTask> {
    let free = largest_component(map);
    assert!(free.len() >= n, "not enough free cells for {n} agents");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<Cell> = free.choose_multiple(&mut rng, n).copied().collect();
    let goals: Vec<Cell> = free.choose_multiple(&mut rng, n).copied().collect();
    starts
        .into_iter()
        .zip(goals)
        .map(|(s, g)| AgentTask::new(s, g))
        .collect()
}

/// `.scen` text for `tasks` on `map`, optimal lengths left at 0.
pub fn scen_text(map: &GridMap, tasks: &[AgentTask]) -> String {
    let mut out = String::from("version 1\n");
    for t in tasks {
        out.push_str(&format!(
            "0\t{}.map\t{}\t{}\t{}\t{}\t{}\t{}\t0\n",
            map.name(),
            map.width(),
            map.height(),
            t.start.col,
            t.start.row,
            t.goal.col,
            t.goal.row
        ));
    }
    out
}

/// The benchmark-shaped `random-32-32-10` stand-in used by tests and demos.
pub fn random_32_32_10(seed: u64) -> Arc<GridMap> {
    Arc::new(random_map("random-32-32-10", 32, 32, 0.10, seed))
}
