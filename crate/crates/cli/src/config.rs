//! Instance loading, method strings and suite files shared by subcommands.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use mapf::policy::load_weights;
use mapf::scenario::parse_scenario_cached;
use mapf::simulator::{derive_seed, Method, PolicyKind, SuiteEntry};
use mapf::supervisor::PlannerConfig;
use mapf::{parse_map, GridMap, HeuristicCache, Limits, Scenario, Shield};

pub const WORKERS_ENV: &str = "MAPF_WORKERS";

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub fn stem(p: &Path) -> String {
    p.file_stem()
        .map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned())
}

pub fn load_map(path: &Path) -> Result<Arc<GridMap>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("--map {}", path.display()))?;
    let map = parse_map(&text, stem(path)).with_context(|| format!("--map {}", path.display()))?;
    Ok(Arc::new(map))
}

/// One (map, scene, n) instance. Its scenario seed depends only on those
/// three and the global seed, so every method sees the same tie-breaks.
pub struct Instance {
    pub map_name: String,
    pub scene: String,
    pub n: usize,
    pub scenario: Arc<Scenario>,
}

impl Instance {
    pub fn load(cache: &HeuristicCache, scen_path: &Path, n: usize, global_seed: u64) -> Result<Self> {
        let text =
            std::fs::read_to_string(scen_path).with_context(|| format!("--scen {}", scen_path.display()))?;
        let map_name = cache.map().name().to_string();
        let scene = stem(scen_path);
        let seed = derive_seed(global_seed, &[&map_name, &scene, &n.to_string()]);
        let scenario = parse_scenario_cached(&text, cache, n, seed)
            .with_context(|| format!("--scen {} with --agents {n}", scen_path.display()))?;
        Ok(Self {
            map_name,
            scene,
            n,
            scenario: Arc::new(scenario),
        })
    }

    pub fn method_seed(&self, global_seed: u64, method: &Method) -> u64 {
        derive_seed(
            global_seed,
            &[
                &self.map_name,
                &self.scene,
                &self.n.to_string(),
                &method.label(),
                &method.shield_label(),
            ],
        )
    }
}

/// Options that turn a method name into a runnable [`Method`].
#[derive(Debug, Clone, Default)]
pub struct MethodOptions {
    pub weights: Option<PathBuf>,
    pub neighbors: usize,
    pub radius: Option<usize>,
    pub restarts: usize,
}

/// Parses `pibt`, `oracle` or `policy:<greedy|random|neural>`. `shield` is
/// only accepted for policy methods and defaults to `pibt-sample`.
pub fn parse_method(name: &str, shield: Option<Shield>, opts: &MethodOptions) -> Result<Method> {
    let method = match name {
        "pibt" => Method::Pibt,
        "oracle" => Method::Oracle(PlannerConfig {
            restarts: opts.restarts,
            ..PlannerConfig::default()
        }),
        _ => {
            let policy = match name.strip_prefix("policy:") {
                Some("greedy") => PolicyKind::Greedy,
                Some("random") => PolicyKind::Random,
                Some("neural") => {
                    let path = opts
                        .weights
                        .as_ref()
                        .ok_or_else(|| anyhow!("--method policy:neural requires --weights"))?;
                    let weights = load_weights(path).with_context(|| format!("--weights {}", path.display()))?;
                    if let Some(r) = opts.radius {
                        let trained = weights.architecture().radius;
                        if r != trained {
                            bail!("--radius {r} does not match the weights' radius {trained}");
                        }
                    }
                    PolicyKind::Neural {
                        weights: Arc::new(weights),
                        max_neighbors: opts.neighbors,
                    }
                }
                _ => bail!(
                    "--method `{name}` is not one of pibt, oracle, policy:greedy, policy:random, policy:neural"
                ),
            };
            return Ok(Method::Policy {
                policy,
                shield: shield.unwrap_or(Shield::Pibt(mapf::OrderingMode::Sample)),
            });
        }
    };
    if let Some(s) = shield {
        bail!("--shield {s} only applies to policy:* methods, not `{name}`");
    }
    Ok(method)
}

/// `name` or `name/shield`, as used in method lists.
pub fn parse_method_spec(spec: &str, opts: &MethodOptions) -> Result<Method> {
    match spec.split_once('/') {
        Some((name, shield)) => {
            let shield: Shield = shield.parse().map_err(|e: String| anyhow!("--methods: {e}"))?;
            parse_method(name, Some(shield), opts)
        }
        None => parse_method(spec, None, opts),
    }
}

pub fn limits(timeout_secs: f64, step_multiplier: u32, max_steps: Option<usize>) -> Result<Limits> {
    if timeout_secs < 0.0 || !timeout_secs.is_finite() {
        bail!("--timeout must be a non-negative number of seconds");
    }
    if step_multiplier == 0 {
        bail!("--step-multiplier must be positive");
    }
    Ok(Limits {
        step_multiplier,
        max_steps,
        timeout: (timeout_secs > 0.0).then(|| Duration::from_secs_f64(timeout_secs)),
        ..Limits::default()
    })
}

/// Suite file layout:
///
/// ```toml
/// seed = 0
/// methods = ["pibt", "policy:greedy/naive"]
///
/// [[entry]]
/// map = "maps/random-32-32-10.map"
/// scenes = ["scen/random-32-32-10-random-1.scen"]
/// agents = [50, 100]
/// ```
///
/// Relative paths resolve against the suite file's directory.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteFile {
    pub seed: Option<u64>,
    #[serde(default)]
    pub methods: Vec<String>,
    #[serde(rename = "entry")]
    pub entries: Vec<SuiteFileEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteFileEntry {
    pub map: PathBuf,
    pub scenes: Vec<PathBuf>,
    pub agents: Vec<usize>,
}

impl SuiteFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("--suite {}", path.display()))?;
        let mut suite: SuiteFile = toml::from_str(&text).with_context(|| format!("--suite {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for e in &mut suite.entries {
            e.map = base.join(&e.map);
            for s in &mut e.scenes {
                *s = base.join(&*s);
            }
        }
        Ok(suite)
    }

    pub fn entries(&self) -> Vec<SuiteEntry> {
        self.entries
            .iter()
            .map(|e| SuiteEntry {
                map: e.map.clone(),
                scenes: e.scenes.clone(),
                agent_counts: e.agents.clone(),
            })
            .collect()
    }
}
