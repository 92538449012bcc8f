//! Per-agent field-of-view features and the agent communication graph.

use crate::grid::{Action, Cell, GridMap};
use crate::heuristics::{greedy_action_vector, HeuristicTable};

/// Side length `2R + 1` of a field of view with radius `R`.
pub fn fov_size(radius: usize) -> usize {
    2 * radius + 1
}

/// Three `D x D` images centered on an agent plus its greedy-action vector.
///
/// Images are row-major with the agent at `(R, R)`; row offsets follow map
/// rows, so image row 0 is `R` cells north of the agent.
#[derive(Debug, Clone, PartialEq)]
pub struct FovTensor {
    pub radius: usize,
    /// 1 for blocked or off-map cells.
    pub obstacle: Vec<f32>,
    /// `clamp((h(cell) - h(center)) / 2R, -1, 1)`, +1 off-map or unreachable.
    pub heuristic: Vec<f32>,
    /// 1 where an agent stands.
    pub occupancy: Vec<f32>,
    pub greedy: [f32; Action::COUNT],
}

impl FovTensor {
    pub fn size(&self) -> usize {
        fov_size(self.radius)
    }

    /// Channels concatenated as `[obstacle, heuristic, occupancy]`.
    pub fn channels(&self) -> impl Iterator<Item = &[f32]> {
        [&self.obstacle[..], &self.heuristic[..], &self.occupancy[..]].into_iter()
    }
}

/// Dense agent-occupancy lookup for one timestep.
#[derive(Debug, Clone)]
pub struct Occupancy {
    agent_at: Vec<u32>,
}

impl Occupancy {
    const EMPTY: u32 = u32::MAX;

    pub fn new(map: &GridMap, positions: &[Cell]) -> Self {
        let mut agent_at = vec![Self::EMPTY; map.num_cells()];
        for (i, p) in positions.iter().enumerate() {
            if let Some(idx) = map.index(*p) {
                agent_at[idx] = i as u32;
            }
        }
        Self { agent_at }
    }

    pub fn agent_at(&self, map: &GridMap, cell: Cell) -> Option<usize> {
        let idx = map.index(cell)?;
        let a = self.agent_at[idx];
        (a != Self::EMPTY).then_some(a as usize)
    }
}

/// Field-of-view tensor for the agent standing at `pos`.
///
/// Panics if `pos` cannot reach the goal of `table`.
pub fn extract_fov(
    map: &GridMap,
    occupancy: &Occupancy,
    pos: Cell,
    table: &HeuristicTable,
    radius: usize,
) -> FovTensor {
    let d = fov_size(radius);
    let r = radius as i32;
    let center_h = table.get(pos).expect("agent must reach its goal") as f32;
    let scale = (2 * radius).max(1) as f32;
    let mut obstacle = vec![0.0; d * d];
    let mut heuristic = vec![0.0; d * d];
    let mut occ = vec![0.0; d * d];
    for dr in -r..=r {
        for dc in -r..=r {
            let k = (dr + r) as usize * d + (dc + r) as usize;
            let cell = Cell::new(pos.row + dr, pos.col + dc);
            if !map.is_free(cell) {
                obstacle[k] = 1.0;
            }
            heuristic[k] = match table.get(cell) {
                Some(h) => ((h as f32 - center_h) / scale).clamp(-1.0, 1.0),
                None => 1.0,
            };
            if occupancy.agent_at(map, cell).is_some() {
                occ[k] = 1.0;
            }
        }
    }
    let greedy = greedy_action_vector(table, pos, map)
        .expect("agent must reach its goal")
        .map(|g| if g { 1.0 } else { 0.0 });
    FovTensor {
        radius,
        obstacle,
        heuristic,
        occupancy: occ,
        greedy,
    }
}

/// Features for every agent at once.
pub fn extract_all(
    map: &GridMap,
    positions: &[Cell],
    tables: &[impl AsRef<HeuristicTable>],
    radius: usize,
) -> Vec<FovTensor> {
    let occupancy = Occupancy::new(map, positions);
    positions
        .iter()
        .zip(tables)
        .map(|(p, t)| extract_fov(map, &occupancy, *p, t.as_ref(), radius))
        .collect()
}

/// For each agent, up to `max_neighbors` other agents inside its square
/// field of view, nearest first by Euclidean distance, ties by index.
pub fn build_graph(map: &GridMap, positions: &[Cell], radius: usize, max_neighbors: usize) -> Vec<Vec<u32>> {
    let occupancy = Occupancy::new(map, positions);
    let r = radius as i32;
    let window = fov_size(radius) * fov_size(radius);
    positions
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let mut near: Vec<(i64, usize)> = Vec::new();
            if positions.len() < window {
                near.extend(
                    positions
                        .iter()
                        .enumerate()
                        .filter(|&(j, q)| j != i && p.chebyshev(*q) <= r)
                        .map(|(j, q)| (p.euclid_sq(*q), j)),
                );
            } else {
                for dr in -r..=r {
                    for dc in -r..=r {
                        let q = Cell::new(p.row + dr, p.col + dc);
                        if let Some(j) = occupancy.agent_at(map, q) {
                            if j != i {
                                near.push((p.euclid_sq(q), j));
                            }
                        }
                    }
                }
            }
            near.sort_unstable();
            near.truncate(max_neighbors);
            near.into_iter().map(|(_, j)| j as u32).collect()
        })
        .collect()
}
