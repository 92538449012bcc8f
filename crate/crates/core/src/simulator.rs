//! Closed-loop execution of a policy behind a collision shield, and suite
//! evaluation.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::grid::{parse_map, Action};
use crate::heuristics::HeuristicCache;
use crate::limits::Limits;
use crate::pibt::{run_pibt, SimState};
use crate::policy::{GreedyPolicy, NeuralPolicy, Policy, RandomPolicy, WeightsFile};
use crate::scenario::{parse_scenario_cached, Scenario};
use crate::shields::{cs_naive, cs_pibt, OrderingMode};
use crate::solution::{sum_of_costs, Solution};
use crate::supervisor::{prioritized_plan, PlannerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shield {
    /// Per-agent argmax proposals, conflicting agents frozen.
    Naive,
    Pibt(OrderingMode),
}

impl fmt::Display for Shield {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shield::Naive => f.write_str("naive"),
            Shield::Pibt(mode) => write!(f, "pibt-{mode}"),
        }
    }
}

impl std::str::FromStr for Shield {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "naive" => Ok(Shield::Naive),
            "pibt-sort" => Ok(Shield::Pibt(OrderingMode::Sort)),
            "pibt-sample" | "pibt" => Ok(Shield::Pibt(OrderingMode::Sample)),
            other => Err(format!("unknown shield `{other}` (naive | pibt-sort | pibt-sample)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub success: bool,
    /// Executed prefix, also on failure.
    pub solution: Solution,
    pub sum_of_costs: u64,
    /// `sum_of_costs / N`.
    pub per_agent_cost: f64,
    pub wall: Duration,
    pub ms_per_step: f64,
    pub steps: usize,
}

impl EpisodeResult {
    fn new(scen: &Scenario, solution: Solution, success: bool, steps: usize, wall: Duration) -> Self {
        let soc = sum_of_costs(&solution, scen);
        Self {
            success,
            sum_of_costs: soc,
            per_agent_cost: soc as f64 / scen.num_agents() as f64,
            ms_per_step: wall.as_secs_f64() * 1e3 / steps.max(1) as f64,
            wall,
            steps,
            solution,
        }
    }
}

/// One shielded step: policy distributions in, collision-free joint action out.
pub fn shielded_step(
    state: &SimState,
    policy: &mut dyn Policy,
    shield: Shield,
    rng: &mut ChaCha8Rng,
) -> Vec<Action> {
    let dists = policy.action_dists(state, rng);
    match shield {
        Shield::Naive => {
            let proposals: Vec<Action> = dists.iter().map(|d| d.argmax()).collect();
            cs_naive(&proposals, state)
        }
        Shield::Pibt(mode) => cs_pibt(&dists, state, mode, rng),
    }
}

/// Runs until every agent rests at its goal or a limit is hit.
pub fn run_episode(
    scen: &Arc<Scenario>,
    policy: &mut dyn Policy,
    shield: Shield,
    limits: &Limits,
    rng: &mut ChaCha8Rng,
) -> EpisodeResult {
    let started = Instant::now();
    let step_limit = limits.step_limit(scen);
    let mut state = SimState::new(Arc::clone(scen));
    let mut history = vec![state.positions().to_vec()];
    while !state.all_at_goal() && state.timestep() < step_limit {
        if limits.timeout.is_some_and(|t| started.elapsed() >= t) {
            break;
        }
        let actions = shielded_step(&state, policy, shield, rng);
        state.apply(&actions);
        history.push(state.positions().to_vec());
    }
    let solution = Solution::from_steps(&history).expect("non-empty history");
    EpisodeResult::new(scen, solution, state.all_at_goal(), state.timestep(), started.elapsed())
}

#[derive(Clone)]
pub enum PolicyKind {
    Greedy,
    Random,
    Neural {
        weights: Arc<WeightsFile>,
        max_neighbors: usize,
    },
}

impl PolicyKind {
    pub fn build(&self) -> Box<dyn Policy> {
        match self {
            PolicyKind::Greedy => Box::new(GreedyPolicy),
            PolicyKind::Random => Box::new(RandomPolicy),
            PolicyKind::Neural {
                weights,
                max_neighbors,
            } => Box::new(NeuralPolicy::new(Arc::clone(weights), *max_neighbors)),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Greedy => "greedy",
            PolicyKind::Random => "random",
            PolicyKind::Neural { .. } => "neural",
        }
    }
}

impl fmt::Debug for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What to run on an instance.
#[derive(Debug, Clone)]
pub enum Method {
    Pibt,
    Oracle(PlannerConfig),
    Policy { policy: PolicyKind, shield: Shield },
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Pibt => "pibt".into(),
            Method::Oracle(_) => "oracle".into(),
            Method::Policy { policy, .. } => format!("policy:{}", policy.name()),
        }
    }

    pub fn shield_label(&self) -> String {
        match self {
            Method::Policy { shield, .. } => shield.to_string(),
            _ => "-".into(),
        }
    }

    /// Runs on one instance. `seed` drives policy sampling and planner restarts.
    pub fn run(&self, scen: &Arc<Scenario>, limits: &Limits, seed: u64) -> EpisodeResult {
        match self {
            Method::Pibt => {
                let started = Instant::now();
                let out = run_pibt(scen, limits);
                EpisodeResult::new(scen, out.solution, out.success, out.steps, started.elapsed())
            }
            Method::Oracle(cfg) => {
                let started = Instant::now();
                let cfg = PlannerConfig {
                    seed,
                    timeout: limits.timeout.or(cfg.timeout),
                    ..cfg.clone()
                };
                match prioritized_plan(scen, &cfg) {
                    Some(sol) => {
                        let steps = sol.makespan();
                        EpisodeResult::new(scen, sol, true, steps, started.elapsed())
                    }
                    None => {
                        let stay = Solution::from_steps(&[scen.starts()]).expect("agents exist");
                        EpisodeResult::new(scen, stay, false, 0, started.elapsed())
                    }
                }
            }
            Method::Policy { policy, shield } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut p = policy.build();
                run_episode(scen, p.as_mut(), *shield, limits, &mut rng)
            }
        }
    }
}

/// Stable 64-bit seed from a global seed and labels.
pub fn derive_seed(global: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(global.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// One map with its scene files and agent counts.
#[derive(Debug, Clone)]
pub struct SuiteEntry {
    pub map: PathBuf,
    pub scenes: Vec<PathBuf>,
    pub agent_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub map: String,
    pub scene: String,
    pub n_agents: usize,
    pub method: String,
    pub shield: String,
    pub seed: u64,
    pub success: bool,
    pub steps: usize,
    pub sum_of_costs: u64,
    pub per_agent_cost: f64,
    pub wall_ms: f64,
    pub ms_per_step: f64,
}

pub const CSV_HEADER: [&str; 12] = [
    "map",
    "scene",
    "n_agents",
    "method",
    "shield",
    "seed",
    "success",
    "steps",
    "sum_of_costs",
    "per_agent_cost",
    "wall_ms",
    "ms_per_step",
];

#[derive(Debug, Clone, Default)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    /// Cells that could not be run, with the reason.
    pub errors: Vec<String>,
}

fn file_stem(p: &std::path::Path) -> String {
    p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned())
}

struct Cell {
    map: String,
    scene: String,
    n: usize,
    method: usize,
    scenario: Arc<Scenario>,
}

/// Runs every (map, scene, agent count, method) cell on `workers` threads.
///
/// Rows come back in suite order regardless of scheduling. Problems loading
/// a map, scene or instance are recorded per cell and skipped.
pub fn evaluate(
    suite: &[SuiteEntry],
    methods: &[Method],
    limits: &Limits,
    global_seed: u64,
    workers: usize,
) -> EvalReport {
    let mut report = EvalReport::default();
    let mut cells = Vec::new();
    for entry in suite {
        let map_name = file_stem(&entry.map);
        let map = match std::fs::read_to_string(&entry.map)
            .map_err(|e| e.to_string())
            .and_then(|t| parse_map(&t, map_name.clone()).map_err(|e| e.to_string()))
        {
            Ok(m) => Arc::new(m),
            Err(e) => {
                report.errors.push(format!("{}: {e}", entry.map.display()));
                continue;
            }
        };
        let cache = HeuristicCache::new(map);
        for scen_path in &entry.scenes {
            let scene = file_stem(scen_path);
            let text = match std::fs::read_to_string(scen_path) {
                Ok(t) => t,
                Err(e) => {
                    report.errors.push(format!("{}: {e}", scen_path.display()));
                    continue;
                }
            };
            for &n in &entry.agent_counts {
                let seed = derive_seed(global_seed, &[&map_name, &scene, &n.to_string()]);
                match parse_scenario_cached(&text, &cache, n, seed) {
                    Ok(s) => {
                        let scenario = Arc::new(s);
                        for method in 0..methods.len() {
                            cells.push(Cell {
                                map: map_name.clone(),
                                scene: scene.clone(),
                                n,
                                method,
                                scenario: Arc::clone(&scenario),
                            });
                        }
                    }
                    Err(e) => report
                        .errors
                        .push(format!("{} n={n}: {e}", scen_path.display())),
                }
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    report.rows = pool.install(|| {
        cells
            .par_iter()
            .map(|c| {
                let m = &methods[c.method];
                let (label, shield) = (m.label(), m.shield_label());
                let seed = derive_seed(
                    global_seed,
                    &[&c.map, &c.scene, &c.n.to_string(), &label, &shield],
                );
                let r = m.run(&c.scenario, limits, seed);
                EvalRow {
                    map: c.map.clone(),
                    scene: c.scene.clone(),
                    n_agents: c.n,
                    method: label,
                    shield,
                    seed,
                    success: r.success,
                    steps: r.steps,
                    sum_of_costs: r.sum_of_costs,
                    per_agent_cost: r.per_agent_cost,
                    wall_ms: r.wall.as_secs_f64() * 1e3,
                    ms_per_step: r.ms_per_step,
                }
            })
            .collect()
    });
    report
}

pub fn write_csv<W: Write>(rows: &[EvalRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.map.clone(),
            r.scene.clone(),
            r.n_agents.to_string(),
            r.method.clone(),
            r.shield.clone(),
            r.seed.to_string(),
            u8::from(r.success).to_string(),
            r.steps.to_string(),
            r.sum_of_costs.to_string(),
            format!("{:.4}", r.per_agent_cost),
            format!("{:.3}", r.wall_ms),
            format!("{:.4}", r.ms_per_step),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Aggregate over scenes for one (map, n, method, shield).
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub map: String,
    pub n_agents: usize,
    pub method: String,
    pub shield: String,
    pub episodes: usize,
    pub success_rate: f64,
    /// Mean per-agent cost over successful episodes only.
    pub mean_per_agent_cost: Option<f64>,
    pub mean_wall_ms: f64,
}

pub fn summarize(rows: &[EvalRow]) -> Vec<Summary> {
    let mut keys: Vec<(String, usize, String, String)> = Vec::new();
    for r in rows {
        let k = (r.map.clone(), r.n_agents, r.method.clone(), r.shield.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(map, n_agents, method, shield)| {
            let group: Vec<&EvalRow> = rows
                .iter()
                .filter(|r| r.map == map && r.n_agents == n_agents && r.method == method && r.shield == shield)
                .collect();
            let wins: Vec<&&EvalRow> = group.iter().filter(|r| r.success).collect();
            Summary {
                episodes: group.len(),
                success_rate: wins.len() as f64 / group.len() as f64,
                mean_per_agent_cost: (!wins.is_empty())
                    .then(|| wins.iter().map(|r| r.per_agent_cost).sum::<f64>() / wins.len() as f64),
                mean_wall_ms: group.iter().map(|r| r.wall_ms).sum::<f64>() / group.len() as f64,
                map,
                n_agents,
                method,
                shield,
            }
        })
        .collect()
}
