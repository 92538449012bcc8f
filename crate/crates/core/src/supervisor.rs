//! Expert planner for imitation data: prioritized space-time A*.
//!
//! Agents are planned one at a time against a reservation table filled by
//! the agents planned before them. An agent that reaches its goal parks
//! there for good, so later agents treat the goal as an obstacle from the
//! arrival time on.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grid::{Action, Cell, GridMap};
use crate::heuristics::HeuristicTable;
use crate::scenario::Scenario;
use crate::solution::Solution;

/// Space-time occupancy of already planned agents.
#[derive(Debug, Clone, Default)]
pub struct ReservationTable {
    vertex: HashSet<(Cell, usize)>,
    /// `(from, to, t)`: moving `from -> to` between `t` and `t + 1` is forbidden.
    edge: HashSet<(Cell, Cell, usize)>,
    /// Cell occupied forever from the given timestep.
    parked: HashMap<Cell, usize>,
    /// Latest timestep with a vertex reservation, per cell.
    last_visit: HashMap<Cell, usize>,
}

impl ReservationTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reserve_vertex(&mut self, cell: Cell, t: usize) {
        self.vertex.insert((cell, t));
        let last = self.last_visit.entry(cell).or_insert(t);
        *last = (*last).max(t);
    }

    /// Forbids the move `from -> to` between `t` and `t + 1`.
    pub fn reserve_edge(&mut self, from: Cell, to: Cell, t: usize) {
        self.edge.insert((from, to, t));
    }

    pub fn park(&mut self, cell: Cell, from_t: usize) {
        let p = self.parked.entry(cell).or_insert(from_t);
        *p = (*p).min(from_t);
    }

    /// Reserves a whole path, parking the agent at its final cell.
    pub fn reserve_path(&mut self, path: &[Cell]) {
        for (t, &cell) in path.iter().enumerate() {
            self.reserve_vertex(cell, t);
            if let Some(&next) = path.get(t + 1) {
                if next != cell {
                    self.reserve_edge(next, cell, t);
                }
            }
        }
        if let Some(&last) = path.last() {
            self.park(last, path.len() - 1);
        }
    }

    pub fn vertex_free(&self, cell: Cell, t: usize) -> bool {
        !self.vertex.contains(&(cell, t)) && self.parked.get(&cell).is_none_or(|&p| t < p)
    }

    pub fn move_free(&self, from: Cell, to: Cell, t: usize) -> bool {
        from == to || !self.edge.contains(&(from, to, t))
    }

    /// Whether an agent could arrive at `cell` at `t` and stay forever.
    pub fn can_park(&self, cell: Cell, t: usize) -> bool {
        !self.parked.contains_key(&cell) && self.last_visit.get(&cell).is_none_or(|&last| last < t)
    }
}

/// Minimal-arrival-time path avoiding all reservations, arriving no later
/// than `horizon`. The returned path ends with the agent parked at `goal`.
pub fn space_time_astar(
    map: &GridMap,
    start: Cell,
    goal: Cell,
    table: &ReservationTable,
    heuristic: &HeuristicTable,
    horizon: usize,
) -> Option<Vec<Cell>> {
    debug_assert_eq!(heuristic.goal(), goal);
    let h = |c: Cell| heuristic.get(c).map(|d| d as usize);
    let h0 = h(start)?;
    if !table.vertex_free(start, 0) {
        return None;
    }
    // (f, -g, cell, t); parents keyed by (cell, t).
    let mut open = BinaryHeap::new();
    let mut parent: HashMap<(Cell, usize), (Cell, usize)> = HashMap::new();
    let mut closed: HashSet<(Cell, usize)> = HashSet::new();
    open.push(Reverse((h0, Reverse(0usize), start, 0usize)));
    while let Some(Reverse((_, _, cell, t))) = open.pop() {
        if !closed.insert((cell, t)) {
            continue;
        }
        if cell == goal && table.can_park(cell, t) {
            let mut path = vec![cell];
            let mut key = (cell, t);
            while let Some(&prev) = parent.get(&key) {
                path.push(prev.0);
                key = prev;
            }
            path.reverse();
            return Some(path);
        }
        if t >= horizon {
            continue;
        }
        for a in Action::ALL {
            let next = cell.step(a);
            if !map.is_free(next) {
                continue;
            }
            let Some(hn) = h(next) else { continue };
            let nt = t + 1;
            if nt + hn > horizon
                || closed.contains(&(next, nt))
                || !table.vertex_free(next, nt)
                || !table.move_free(cell, next, t)
            {
                continue;
            }
            if let std::collections::hash_map::Entry::Vacant(e) = parent.entry((next, nt)) {
                e.insert((cell, t));
                open.push(Reverse((nt + hn, Reverse(nt), next, nt)));
            }
        }
    }
    None
}

#[derive(Debug, Clone)]
pub struct PlannerConfig {
    /// Additional random priority orders tried after the first.
    pub restarts: usize,
    pub seed: u64,
    pub timeout: Option<Duration>,
    /// Overrides the default search horizon.
    pub horizon: Option<usize>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            seed: 0,
            timeout: Some(Duration::from_secs(120)),
            horizon: None,
        }
    }
}

/// Search horizon `max(4 * max_i h_i(start_i), 128)`.
pub fn default_horizon(scen: &Scenario) -> usize {
    (4 * scen.max_start_distance() as usize).max(128)
}

/// Plans all agents in `order`, or reports the first agent that failed.
pub fn plan_in_order(scen: &Scenario, order: &[usize], horizon: usize) -> Result<Solution, usize> {
    let mut table = ReservationTable::new();
    let mut paths = vec![Vec::new(); scen.num_agents()];
    for &i in order {
        let task = scen.agents()[i];
        let path = space_time_astar(scen.map(), task.start, task.goal, &table, scen.table(i), horizon)
            .ok_or(i)?;
        table.reserve_path(&path);
        paths[i] = path;
    }
    Ok(Solution::new(paths).expect("every agent planned"))
}

/// Prioritized planning with random restarts.
///
/// The first order plans agents farthest from their goals first; later
/// attempts use seeded random orders. Returns `None` once restarts or the
/// timeout are exhausted.
pub fn prioritized_plan(scen: &Arc<Scenario>, config: &PlannerConfig) -> Option<Solution> {
    let started = Instant::now();
    let horizon = config.horizon.unwrap_or_else(|| default_horizon(scen));
    let mut order: Vec<usize> = (0..scen.num_agents()).collect();
    order.sort_by_key(|&i| (Reverse(scen.start_distance(i)), i));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for attempt in 0..=config.restarts {
        if attempt > 0 {
            if config.timeout.is_some_and(|t| started.elapsed() >= t) {
                return None;
            }
            order.shuffle(&mut rng);
        }
        if let Ok(sol) = plan_in_order(scen, &order, horizon) {
            return Some(sol);
        }
    }
    None
}
