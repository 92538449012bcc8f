#![allow(dead_code)]

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use mapf::generate::{largest_component, random_map, random_tasks};
use mapf::{Action, ActionDist, Cell, GridMap, Scenario, SimState};

/// A random instance on a `w x h` map, `n` capped by the free component.
pub fn random_scenario<R: Rng>(rng: &mut R, w: usize, h: usize, density: f64, n: usize) -> Arc<Scenario> {
    let map = random_map("fuzz", w, h, density, rng.gen());
    let free = largest_component(&map);
    let n = n.clamp(1, free.len());
    let tasks = random_tasks(&map, n, rng.gen());
    Arc::new(Scenario::new(Arc::new(map), tasks, rng.gen()).unwrap())
}

/// Agents scattered anywhere in the goal component, with random priorities.
pub fn scattered_state<R: Rng>(rng: &mut R, scen: Arc<Scenario>) -> SimState {
    let free = largest_component(scen.map());
    let positions: Vec<Cell> = free.choose_multiple(rng, scen.num_agents()).copied().collect();
    let mut s = SimState::with_positions(scen, positions);
    let prios = (0..s.num_agents()).map(|_| rng.gen_range(0.0..50.0)).collect();
    s.set_priorities(prios);
    s
}

pub fn random_dist<R: Rng>(rng: &mut R) -> ActionDist {
    let mut p = [0.0; Action::COUNT];
    // Sparse supports exercise the zero-probability tail of sampling.
    for x in &mut p {
        if rng.gen_bool(0.7) {
            *x = rng.gen::<f64>();
        }
    }
    let s: f64 = p.iter().sum();
    if s == 0.0 {
        return ActionDist::one_hot(Action::ALL[rng.gen_range(0..Action::COUNT)]);
    }
    ActionDist::new(p.map(|x| x / s)).unwrap()
}

/// One of: fully random, one-hot on a random action, or greedy.
pub fn mixed_dists<R: Rng>(rng: &mut R, state: &SimState) -> Vec<ActionDist> {
    let greedy = mapf::policy::greedy_policy(state);
    (0..state.num_agents())
        .map(|i| match rng.gen_range(0..3) {
            0 => random_dist(rng),
            1 => ActionDist::one_hot(Action::ALL[rng.gen_range(0..Action::COUNT)]),
            _ => greedy[i],
        })
        .collect()
}

/// Independent check of one joint step: every move is legal and there are
/// no vertex or edge collisions.
pub fn check_step(map: &GridMap, from: &[Cell], actions: &[Action]) -> Result<(), String> {
    let to: Vec<Cell> = from.iter().zip(actions).map(|(c, a)| c.step(*a)).collect();
    for (i, t) in to.iter().enumerate() {
        if t.row < 0 || t.col < 0 || t.row as usize >= map.height() || t.col as usize >= map.width() {
            return Err(format!("agent {i} leaves the map to {t}"));
        }
        if !map.is_free(*t) {
            return Err(format!("agent {i} enters obstacle {t}"));
        }
    }
    let mut seen: HashMap<Cell, usize> = HashMap::new();
    for (i, t) in to.iter().enumerate() {
        if let Some(j) = seen.insert(*t, i) {
            return Err(format!("vertex collision of {j} and {i} at {t}"));
        }
    }
    let moves: HashSet<(Cell, Cell)> = from.iter().zip(&to).filter(|(a, b)| a != b).map(|(a, b)| (*a, *b)).collect();
    for &(a, b) in &moves {
        if moves.contains(&(b, a)) {
            return Err(format!("edge collision between {a} and {b}"));
        }
    }
    Ok(())
}

/// All-pairs shortest paths by Floyd-Warshall, indexed by cell index.
pub fn floyd_warshall(map: &GridMap) -> Vec<Vec<u32>> {
    const INF: u32 = u32::MAX / 4;
    let n = map.num_cells();
    let mut d = vec![vec![INF; n]; n];
    for i in 0..n {
        let c = map.cell_at(i);
        if !map.is_free(c) {
            continue;
        }
        d[i][i] = 0;
        for (dr, dc) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
            let nb = Cell::new(c.row + dr, c.col + dc);
            if map.is_free(nb) {
                d[i][map.index(nb).unwrap()] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    for row in &mut d {
        for x in row.iter_mut() {
            if *x >= INF {
                *x = u32::MAX;
            }
        }
    }
    d
}

/// Neighbor lists by exhaustive search over all agent pairs.
pub fn brute_neighbors(positions: &[Cell], radius: i32, max: usize) -> Vec<Vec<u32>> {
    positions
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut v: Vec<(i64, usize)> = positions
                .iter()
                .enumerate()
                .filter(|(j, q)| {
                    *j != i && (p.row - q.row).abs().max((p.col - q.col).abs()) <= radius
                })
                .map(|(j, q)| {
                    let (dr, dc) = ((p.row - q.row) as i64, (p.col - q.col) as i64);
                    (dr * dr + dc * dc, j)
                })
                .collect();
            v.sort();
            v.into_iter().take(max).map(|(_, j)| j as u32).collect()
        })
        .collect()
}

/// Distances to `goal` by repeated relaxation sweeps until nothing changes.
pub fn relaxed_distances(map: &GridMap, goal: Cell) -> Vec<Option<u32>> {
    let mut d: Vec<Option<u32>> = vec![None; map.num_cells()];
    d[map.index(goal).unwrap()] = Some(0);
    loop {
        let mut changed = false;
        for i in 0..map.num_cells() {
            let c = map.cell_at(i);
            if !map.is_free(c) {
                continue;
            }
            for (dr, dc) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
                let nb = Cell::new(c.row + dr, c.col + dc);
                if !map.is_free(nb) {
                    continue;
                }
                if let Some(x) = d[map.index(nb).unwrap()] {
                    if d[i].is_none_or(|y| x + 1 < y) {
                        d[i] = Some(x + 1);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return d;
        }
    }
}
