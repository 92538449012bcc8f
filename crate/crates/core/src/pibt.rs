//! Priority inheritance with backtracking (PIBT).
//!
//! [`pibt_step`] turns per-agent action preferences into one collision-free
//! joint action. Agents are processed by descending priority. An agent that
//! wants a cell occupied by an undecided agent lends it its priority; the
//! occupant must then move somewhere else (never back into the requester's
//! cell), and if it cannot, the requester backtracks to its next preference.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{Action, Cell, GridMap};
use crate::heuristics::HeuristicTable;
use crate::limits::Limits;
use crate::scenario::Scenario;
use crate::solution::Solution;

/// One agent's actions, most preferred first. Always a permutation of the
/// five actions.
pub type ActionOrdering = [Action; Action::COUNT];

/// Positions and PIBT priorities of all agents at one timestep.
#[derive(Debug, Clone)]
pub struct SimState {
    scenario: Arc<Scenario>,
    positions: Vec<Cell>,
    priorities: Vec<f64>,
    tie_breaks: Vec<f64>,
    timestep: usize,
}

impl SimState {
    /// Agents at their starts. Each agent gets a tie-breaking fraction in
    /// `[0, 1)` drawn from the scenario seed, which is also its initial
    /// priority.
    pub fn new(scenario: Arc<Scenario>) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed());
        let tie_breaks: Vec<f64> = (0..scenario.num_agents()).map(|_| rng.gen()).collect();
        Self {
            positions: scenario.starts(),
            priorities: tie_breaks.clone(),
            tie_breaks,
            timestep: 0,
            scenario,
        }
    }

    /// A state at arbitrary (pairwise distinct, free) positions.
    pub fn with_positions(scenario: Arc<Scenario>, positions: Vec<Cell>) -> Self {
        assert_eq!(positions.len(), scenario.num_agents());
        let mut s = Self::new(scenario);
        s.positions = positions;
        s
    }

    pub fn scenario(&self) -> &Arc<Scenario> {
        &self.scenario
    }

    pub fn map(&self) -> &GridMap {
        self.scenario.map()
    }

    pub fn positions(&self) -> &[Cell] {
        &self.positions
    }

    pub fn priorities(&self) -> &[f64] {
        &self.priorities
    }

    pub fn set_priorities(&mut self, priorities: Vec<f64>) {
        assert_eq!(priorities.len(), self.positions.len());
        self.priorities = priorities;
    }

    pub fn timestep(&self) -> usize {
        self.timestep
    }

    pub fn num_agents(&self) -> usize {
        self.positions.len()
    }

    pub fn at_goal(&self, agent: usize) -> bool {
        self.positions[agent] == self.scenario.agents()[agent].goal
    }

    pub fn all_at_goal(&self) -> bool {
        (0..self.num_agents()).all(|i| self.at_goal(i))
    }

    /// Executes a joint action and updates priorities: an agent resting at
    /// its goal drops back to its tie-break fraction, every other agent
    /// gains one.
    pub fn apply(&mut self, actions: &[Action]) {
        assert_eq!(actions.len(), self.positions.len());
        for (pos, a) in self.positions.iter_mut().zip(actions) {
            *pos = pos.step(*a);
            debug_assert!(self.scenario.map().is_free(*pos));
        }
        for i in 0..self.positions.len() {
            if self.at_goal(i) {
                self.priorities[i] = self.tie_breaks[i];
            } else {
                self.priorities[i] += 1.0;
            }
        }
        self.timestep += 1;
    }

    /// Agent indices by descending priority, ties by index.
    pub fn priority_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.num_agents()).collect();
        order.sort_by(|&a, &b| {
            self.priorities[b]
                .total_cmp(&self.priorities[a])
                .then(a.cmp(&b))
        });
        order
    }
}

/// Actions sorted by the cost-to-goal of the cell they lead to; illegal
/// moves last, ties in action index order.
pub fn greedy_ordering(table: &HeuristicTable, pos: Cell, map: &GridMap) -> ActionOrdering {
    let mut order = Action::ALL;
    order.sort_by_key(|a| {
        let next = pos.step(*a);
        if map.is_free(next) {
            table.get(next).unwrap_or(u32::MAX)
        } else {
            u32::MAX
        }
    });
    order
}

const NONE: u32 = u32::MAX;

struct Step<'a> {
    map: &'a GridMap,
    positions: &'a [Cell],
    orderings: &'a [ActionOrdering],
    occupied_now: Vec<u32>,
    occupied_next: Vec<u32>,
    next: Vec<u32>,
}

impl Step<'_> {
    fn plan(&mut self, agent: usize, parent: Option<usize>) -> bool {
        let here = self.positions[agent];
        for &action in &self.orderings[agent] {
            let target = here.step(action);
            let Some(ti) = self.map.index(target) else {
                continue;
            };
            if self.map.is_blocked_index(ti) || self.occupied_next[ti] != NONE {
                continue;
            }
            if parent.is_some_and(|p| self.positions[p] == target) {
                continue;
            }
            self.occupied_next[ti] = agent as u32;
            self.next[agent] = ti as u32;
            let occupant = self.occupied_now[ti];
            if occupant != NONE
                && occupant as usize != agent
                && self.next[occupant as usize] == NONE
                && !self.plan(occupant as usize, Some(agent))
            {
                continue;
            }
            return true;
        }
        let hi = self.map.index(here).unwrap();
        self.occupied_next[hi] = agent as u32;
        self.next[agent] = hi as u32;
        false
    }
}

/// One PIBT step: a collision-free joint action honoring `orderings`.
pub fn pibt_step(state: &SimState, orderings: &[ActionOrdering]) -> Vec<Action> {
    let map = state.map();
    let positions = state.positions();
    assert_eq!(orderings.len(), positions.len(), "one ordering per agent");
    let mut step = Step {
        map,
        positions,
        orderings,
        occupied_now: vec![NONE; map.num_cells()],
        occupied_next: vec![NONE; map.num_cells()],
        next: vec![NONE; positions.len()],
    };
    for (i, p) in positions.iter().enumerate() {
        let idx = map.index(*p).expect("agent on the map");
        debug_assert_eq!(step.occupied_now[idx], NONE, "agents must not share cells");
        step.occupied_now[idx] = i as u32;
    }
    for agent in state.priority_order() {
        if step.next[agent] == NONE {
            let ok = step.plan(agent, None);
            // Waiting is always available to an undecided root agent.
            assert!(ok, "PIBT root agent {agent} failed");
        }
    }
    step.next
        .iter()
        .zip(positions)
        .map(|(&n, &p)| {
            Action::between(p, map.cell_at(n as usize)).expect("PIBT moves are adjacent")
        })
        .collect()
}

/// Outcome of a closed-loop run: the executed prefix and whether every agent
/// ended at its goal.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub solution: Solution,
    pub success: bool,
    pub steps: usize,
}

/// Greedy PIBT until all agents rest at their goals or the limits are hit.
pub fn run_pibt(scen: &Arc<Scenario>, limits: &Limits) -> RunOutcome {
    let started = Instant::now();
    let map = Arc::clone(scen.map());
    let step_limit = limits.step_limit(scen);
    let mut state = SimState::new(Arc::clone(scen));
    let mut history = vec![state.positions().to_vec()];
    while !state.all_at_goal() && state.timestep() < step_limit {
        if limits.timeout.is_some_and(|t| started.elapsed() >= t) {
            break;
        }
        let orderings: Vec<ActionOrdering> = state
            .positions()
            .iter()
            .enumerate()
            .map(|(i, &p)| greedy_ordering(scen.table(i), p, &map))
            .collect();
        let actions = pibt_step(&state, &orderings);
        state.apply(&actions);
        history.push(state.positions().to_vec());
    }
    RunOutcome {
        solution: Solution::from_steps(&history).expect("non-empty history"),
        success: state.all_at_goal(),
        steps: state.timestep(),
    }
}
