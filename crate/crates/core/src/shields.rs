//! Collision shields: turn per-agent action preferences into a joint action
//! with no vertex or edge collisions.
//!
//! * [`cs_naive`] freezes every agent involved in a conflict.
//! * [`cs_pibt`] ranks each agent's actions by the policy's probabilities and
//!   lets [`pibt_step`] resolve conflicts.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;

use crate::grid::{Action, Cell};
use crate::pibt::{pibt_step, ActionOrdering, SimState};

const SUM_TOLERANCE: f64 = 1e-6;

/// A probability distribution over the five actions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionDist {
    probs: [f64; Action::COUNT],
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum DistError {
    #[error("probability {0} is negative or not finite")]
    BadEntry(f64),
    #[error("probabilities sum to {0}, expected 1")]
    BadSum(f64),
}

impl ActionDist {
    /// Validates and renormalizes. The entries must be non-negative and sum
    /// to 1 within 1e-6.
    pub fn new(probs: [f64; Action::COUNT]) -> Result<Self, DistError> {
        if let Some(&bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(DistError::BadEntry(bad));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(DistError::BadSum(sum));
        }
        Ok(Self {
            probs: probs.map(|p| p / sum),
        })
    }

    pub fn uniform() -> Self {
        Self {
            probs: [0.2; Action::COUNT],
        }
    }

    pub fn one_hot(action: Action) -> Self {
        let mut probs = [0.0; Action::COUNT];
        probs[action.index()] = 1.0;
        Self { probs }
    }

    /// Uniform over the actions marked in `mask`. Panics on an empty mask.
    pub fn uniform_over(mask: &[bool; Action::COUNT]) -> Self {
        let k = mask.iter().filter(|m| **m).count();
        assert!(k > 0, "empty action mask");
        Self {
            probs: mask.map(|m| if m { 1.0 / k as f64 } else { 0.0 }),
        }
    }

    pub fn probs(&self) -> &[f64; Action::COUNT] {
        &self.probs
    }

    pub fn prob(&self, action: Action) -> f64 {
        self.probs[action.index()]
    }

    /// Most likely action, lowest index on ties.
    pub fn argmax(&self) -> Action {
        let mut best = 0;
        for i in 1..Action::COUNT {
            if self.probs[i] > self.probs[best] {
                best = i;
            }
        }
        Action::ALL[best]
    }
}

/// How a distribution is turned into a preference order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OrderingMode {
    /// Draw without replacement, proportional to probability.
    #[default]
    Sample,
    /// Descending probability, ties by action index.
    Sort,
}

impl fmt::Display for OrderingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OrderingMode::Sample => "sample",
            OrderingMode::Sort => "sort",
        })
    }
}

pub fn dist_to_ordering<R: Rng + ?Sized>(dist: &ActionDist, mode: OrderingMode, rng: &mut R) -> ActionOrdering {
    let mut order = Action::ALL;
    match mode {
        OrderingMode::Sort => {
            order.sort_by(|a, b| dist.prob(*b).total_cmp(&dist.prob(*a)));
        }
        OrderingMode::Sample => {
            let mut remaining: Vec<Action> = Action::ALL
                .into_iter()
                .filter(|a| dist.prob(*a) > 0.0)
                .collect();
            let mut k = 0;
            while !remaining.is_empty() {
                let total: f64 = remaining.iter().map(|a| dist.prob(*a)).sum();
                let mut u = rng.gen::<f64>() * total;
                let mut pick = remaining.len() - 1;
                for (j, a) in remaining.iter().enumerate() {
                    u -= dist.prob(*a);
                    if u < 0.0 {
                        pick = j;
                        break;
                    }
                }
                order[k] = remaining.remove(pick);
                k += 1;
            }
            for a in Action::ALL {
                if dist.prob(a) == 0.0 {
                    order[k] = a;
                    k += 1;
                }
            }
        }
    }
    order
}

/// Accepts proposals that are conflict-free and freezes the rest, repeating
/// until no accepted move conflicts with anything.
///
/// A frozen agent keeps its current cell, which can in turn reject movers
/// heading into it. All parties to a conflict are frozen.
pub fn cs_naive(proposals: &[Action], state: &SimState) -> Vec<Action> {
    let map = state.map();
    let positions = state.positions();
    assert_eq!(proposals.len(), positions.len());
    let mut accepted: Vec<bool> = proposals
        .iter()
        .zip(positions)
        .map(|(a, p)| *a != Action::Wait && map.is_free(p.step(*a)))
        .collect();
    let occupant: HashMap<Cell, usize> = positions.iter().enumerate().map(|(i, p)| (*p, i)).collect();
    let target = |i: usize, accepted: &[bool]| {
        if accepted[i] {
            positions[i].step(proposals[i])
        } else {
            positions[i]
        }
    };

    let mut claims: HashMap<Cell, Vec<usize>> = HashMap::with_capacity(positions.len());
    loop {
        claims.clear();
        for i in 0..positions.len() {
            claims.entry(target(i, &accepted)).or_default().push(i);
        }
        let mut changed = false;
        for agents in claims.values() {
            if agents.len() > 1 {
                for &i in agents {
                    changed |= std::mem::replace(&mut accepted[i], false);
                }
            }
        }
        for i in 0..positions.len() {
            if !accepted[i] {
                continue;
            }
            let to = positions[i].step(proposals[i]);
            if let Some(&j) = occupant.get(&to) {
                if accepted[j] && target(j, &accepted) == positions[i] {
                    accepted[i] = false;
                    accepted[j] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    (0..positions.len())
        .map(|i| if accepted[i] { proposals[i] } else { Action::Wait })
        .collect()
}

/// PIBT driven by policy probabilities instead of greedy preferences.
pub fn cs_pibt<R: Rng + ?Sized>(
    dists: &[ActionDist],
    state: &SimState,
    mode: OrderingMode,
    rng: &mut R,
) -> Vec<Action> {
    assert_eq!(dists.len(), state.num_agents());
    let orderings: Vec<ActionOrdering> = dists
        .iter()
        .map(|d| dist_to_ordering(d, mode, rng))
        .collect();
    pibt_step(state, &orderings)
}
