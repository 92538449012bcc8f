//! Gridworld multi-agent path finding.
//!
//! * [`grid`], [`scenario`], [`solution`]: Moving-AI maps and scenes, paths,
//!   collision checking and sum-of-costs.
//! * [`heuristics`]: exact cost-to-goal fields.
//! * [`pibt`]: priority inheritance with backtracking.
//! * [`shields`]: naive (freeze) and PIBT-based collision shields.
//! * [`supervisor`]: prioritized space-time A* for expert trajectories.
//! * [`features`], [`dataset`]: field-of-view tensors, agent graphs and the
//!   binary training-set format.
//! * [`policy`]: greedy, random and neural single-step policies.
//! * [`simulator`]: closed-loop episodes and suite evaluation.

pub mod dataset;
pub mod error;
pub mod features;
pub mod generate;
pub mod grid;
pub mod heuristics;
mod limits;
pub mod pibt;
pub mod policy;
pub mod scenario;
pub mod shields;
pub mod simulator;
pub mod solution;
pub mod supervisor;

pub use error::{DatasetError, HeuristicError, ParseError, ScenarioError, SolutionError, WeightsError};
pub use grid::{parse_map, Action, Cell, GridMap};
pub use heuristics::{backward_dijkstra, greedy_action_vector, HeuristicCache, HeuristicTable};
pub use limits::Limits;
pub use pibt::{pibt_step, run_pibt, ActionOrdering, RunOutcome, SimState};
pub use scenario::{parse_scenario, AgentTask, Scenario};
pub use shields::{cs_naive, cs_pibt, dist_to_ordering, ActionDist, OrderingMode};
pub use simulator::{run_episode, EpisodeResult, Shield};
pub use solution::{sum_of_costs, validate_solution, Solution, ValidationReport};
