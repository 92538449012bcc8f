//! Single-step policies producing an [`ActionDist`] per agent.

mod neural;
mod weights;

use std::sync::Arc;

use rand::RngCore;

pub use neural::{neural_logits, softmax, GraphInput, LAYER_NORM_EPS, LEAKY_SLOPE};
pub use weights::{
    load_weights, read_weights, Architecture, Tensor, WeightsFile, GNN_LAYERS, WEIGHTS_MAGIC,
    WEIGHTS_VERSION,
};

use crate::dataset::FeatureParams;
use crate::error::WeightsError;
use crate::features::{build_graph, extract_all};
use crate::heuristics::greedy_action_vector;
use crate::pibt::SimState;
use crate::shields::ActionDist;

/// Something that proposes action distributions for every agent.
pub trait Policy: Send {
    fn name(&self) -> &str;

    fn action_dists(&mut self, state: &SimState, rng: &mut dyn RngCore) -> Vec<ActionDist>;
}

/// Uniform over the actions that minimize each agent's cost-to-goal.
pub fn greedy_policy(state: &SimState) -> Vec<ActionDist> {
    let scen = state.scenario();
    state
        .positions()
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let mask = greedy_action_vector(scen.table(i), p, scen.map()).expect("agents stay reachable");
            ActionDist::uniform_over(&mask)
        })
        .collect()
}

/// Uniform over all five actions, legal or not.
pub fn random_policy(state: &SimState) -> Vec<ActionDist> {
    vec![ActionDist::uniform(); state.num_agents()]
}

/// Forward pass over one graph, returning a distribution per agent.
pub fn neural_forward(weights: &WeightsFile, graph: &GraphInput) -> Result<Vec<ActionDist>, WeightsError> {
    Ok(neural_logits(weights, graph)?
        .iter()
        .map(|l| ActionDist::new(softmax(l)).expect("softmax output is a distribution"))
        .collect())
}

/// Feature extraction plus graph construction for a simulator state.
pub fn graph_input(state: &SimState, params: FeatureParams) -> GraphInput {
    let scen = state.scenario();
    GraphInput {
        fovs: extract_all(scen.map(), state.positions(), scen.tables(), params.radius),
        neighbors: build_graph(scen.map(), state.positions(), params.radius, params.max_neighbors),
    }
}

pub struct GreedyPolicy;

impl Policy for GreedyPolicy {
    fn name(&self) -> &str {
        "greedy"
    }

    fn action_dists(&mut self, state: &SimState, _rng: &mut dyn RngCore) -> Vec<ActionDist> {
        greedy_policy(state)
    }
}

pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn action_dists(&mut self, state: &SimState, _rng: &mut dyn RngCore) -> Vec<ActionDist> {
        random_policy(state)
    }
}

pub struct NeuralPolicy {
    weights: Arc<WeightsFile>,
    params: FeatureParams,
}

impl NeuralPolicy {
    /// Features are extracted at the radius recorded in the weights.
    pub fn new(weights: Arc<WeightsFile>, max_neighbors: usize) -> Self {
        let radius = weights.architecture().radius;
        Self {
            weights,
            params: FeatureParams {
                radius,
                max_neighbors,
            },
        }
    }

    pub fn params(&self) -> FeatureParams {
        self.params
    }
}

impl Policy for NeuralPolicy {
    fn name(&self) -> &str {
        "neural"
    }

    fn action_dists(&mut self, state: &SimState, _rng: &mut dyn RngCore) -> Vec<ActionDist> {
        let graph = graph_input(state, self.params);
        neural_forward(&self.weights, &graph).expect("features built from the weights' radius")
    }
}
