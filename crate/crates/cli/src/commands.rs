use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use mapf::dataset::{export_dataset_file, FeatureParams};
use mapf::simulator::{evaluate as run_suite, summarize, write_csv, Method, SuiteEntry};
use mapf::solution::parse_cells;
use mapf::supervisor::{prioritized_plan, PlannerConfig};
use mapf::{validate_solution, Action, HeuristicCache, Scenario, SimState, Solution, ValidationReport};

use crate::config::{self, Instance, MethodOptions, SuiteFile};
use crate::{CollectArgs, EvaluateArgs, ExportArgs, InferArgs, PolicyArgs, SolveArgs, ValidateArgs};

fn method_options(p: &PolicyArgs) -> MethodOptions {
    MethodOptions {
        weights: p.weights.clone(),
        neighbors: p.neighbors,
        radius: p.radius,
        restarts: p.restarts,
    }
}

fn report_line(r: &ValidationReport) -> String {
    format!(
        "valid {} all_at_goal {} vertex_collisions {} edge_collisions {} sum_of_costs {}",
        r.is_valid_solution(),
        r.all_at_goal,
        r.vertex_collisions.len(),
        r.edge_collisions.len(),
        r.sum_of_costs
    )
}

pub fn solve(a: SolveArgs) -> Result<ExitCode> {
    let method = config::parse_method(&a.method, a.shield, &method_options(&a.policy))?;
    let limits = config::limits(a.limits.timeout, a.limits.step_multiplier, a.limits.max_steps)?;
    let cache = HeuristicCache::new(config::load_map(&a.map)?);
    let inst = Instance::load(&cache, &a.scen, a.agents, a.seed)?;
    let result = method.run(&inst.scenario, &limits, inst.method_seed(a.seed, &method));
    let report = validate_solution(&result.solution, &inst.scenario)?;
    let text = result.solution.to_text();
    let summary = format!(
        "method {} shield {} success {} steps {} {}",
        method.label(),
        method.shield_label(),
        result.success,
        result.steps,
        report_line(&report)
    );
    match &a.out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("--out {}", path.display()))?;
            println!("{summary}");
        }
        None => {
            print!("{text}");
            eprintln!("{summary}");
        }
    }
    Ok(if report.collision_free() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

/// Map path, scene paths and agent counts from either a suite file or flags.
fn suite_from(
    suite: &Option<PathBuf>,
    map: &Option<PathBuf>,
    scen: &[PathBuf],
    agents: &[usize],
) -> Result<(Vec<SuiteEntry>, Option<SuiteFile>)> {
    if let Some(path) = suite {
        let file = SuiteFile::load(path)?;
        return Ok((file.entries(), Some(file)));
    }
    let map = map.clone().ok_or_else(|| anyhow!("--map is required without --suite"))?;
    if scen.is_empty() {
        bail!("--scen is required without --suite");
    }
    if agents.is_empty() {
        bail!("--agents is required without --suite");
    }
    if agents.contains(&0) {
        bail!("--agents must be positive");
    }
    Ok((
        vec![SuiteEntry {
            map,
            scenes: scen.to_vec(),
            agent_counts: agents.to_vec(),
        }],
        None,
    ))
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let n = workers.unwrap_or_else(config::default_workers);
    if n == 0 {
        bail!("--workers must be positive");
    }
    Ok(rayon::ThreadPoolBuilder::new().num_threads(n).build()?)
}

pub const MANIFEST: &str = "manifest.tsv";

pub fn collect(a: CollectArgs) -> Result<ExitCode> {
    let (suite, _) = suite_from(&a.suite, &a.map, &a.scen, &a.agents)?;
    if a.timeout < 0.0 || !a.timeout.is_finite() {
        bail!("--timeout must be a non-negative number of seconds");
    }
    let planner = PlannerConfig {
        restarts: a.restarts,
        timeout: (a.timeout > 0.0).then(|| Duration::from_secs_f64(a.timeout)),
        ..PlannerConfig::default()
    };
    let method = Method::Oracle(planner.clone());
    let mut jobs = Vec::new();
    for entry in &suite {
        let cache = HeuristicCache::new(config::load_map(&entry.map)?);
        for scen in &entry.scenes {
            for &n in &entry.agent_counts {
                jobs.push((entry.map.clone(), scen.clone(), Instance::load(&cache, scen, n, a.seed)?));
            }
        }
    }
    fs::create_dir_all(&a.out).with_context(|| format!("--out {}", a.out.display()))?;
    let solved: Vec<Option<Solution>> = pool(a.workers)?.install(|| {
        jobs.par_iter()
            .map(|(_, _, inst)| {
                let cfg = PlannerConfig {
                    seed: inst.method_seed(a.seed, &method),
                    ..planner.clone()
                };
                prioritized_plan(&inst.scenario, &cfg)
            })
            .collect()
    });

    let mut manifest = String::new();
    let mut planned = 0;
    for ((map, scen, inst), sol) in jobs.iter().zip(solved) {
        let Some(sol) = sol else {
            eprintln!("no plan: {} {} n={}", inst.map_name, inst.scene, inst.n);
            continue;
        };
        let file = format!("{}-{}-n{}.sol", inst.map_name, inst.scene, inst.n);
        fs::write(a.out.join(&file), sol.to_text())?;
        let abs = |p: &Path| fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
        writeln!(
            manifest,
            "{}\t{}\t{}\t{}",
            abs(map).display(),
            abs(scen).display(),
            inst.n,
            file
        )?;
        planned += 1;
    }
    fs::write(a.out.join(MANIFEST), manifest)?;
    println!("planned {planned} of {} instances", jobs.len());
    Ok(ExitCode::SUCCESS)
}

pub fn export_dataset(a: ExportArgs) -> Result<ExitCode> {
    let text = fs::read_to_string(&a.manifest).with_context(|| format!("--manifest {}", a.manifest.display()))?;
    let base = a.manifest.parent().unwrap_or(Path::new("."));
    let mut caches: HashMap<PathBuf, HeuristicCache> = HashMap::new();
    let mut pairs: Vec<(Scenario, Solution)> = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let ctx = || format!("--manifest {} line {}", a.manifest.display(), i + 1);
        let fields: Vec<&str> = line.split('\t').collect();
        let [map, scen, n, sol] = fields[..] else {
            bail!("{}: expected 4 tab-separated fields", ctx());
        };
        let n: usize = n.parse().with_context(ctx)?;
        let map = base.join(map);
        if !caches.contains_key(&map) {
            caches.insert(map.clone(), HeuristicCache::new(config::load_map(&map).with_context(ctx)?));
        }
        let inst = Instance::load(&caches[&map], &base.join(scen), n, 0).with_context(ctx)?;
        let sol_path = base.join(sol);
        let sol_text = fs::read_to_string(&sol_path).with_context(|| format!("{} ({})", ctx(), sol_path.display()))?;
        let sol = Solution::from_text(&sol_text).with_context(|| format!("{} ({})", ctx(), sol_path.display()))?;
        pairs.push(((*inst.scenario).clone(), sol));
    }
    let params = FeatureParams {
        radius: a.radius,
        max_neighbors: a.neighbors,
    };
    let stats = export_dataset_file(&pairs, params, &a.out).with_context(|| format!("--out {}", a.out.display()))?;
    let labels: Vec<String> = Action::ALL
        .iter()
        .map(|act| format!("{}={}", act.name(), stats.label_histogram[act.index()]))
        .collect();
    println!(
        "graphs {} records {} labels {}",
        stats.graphs,
        stats.agent_records,
        labels.join(" ")
    );
    Ok(ExitCode::SUCCESS)
}

pub fn evaluate(a: EvaluateArgs) -> Result<ExitCode> {
    let (suite, file) = suite_from(&a.suite, &a.map, &a.scen, &a.agents)?;
    let specs = if !a.methods.is_empty() {
        a.methods.clone()
    } else {
        file.as_ref().map(|f| f.methods.clone()).unwrap_or_default()
    };
    if specs.is_empty() {
        bail!("--methods is required (or `methods` in the suite file)");
    }
    let opts = method_options(&a.policy);
    let methods = specs
        .iter()
        .map(|s| config::parse_method_spec(s.trim(), &opts))
        .collect::<Result<Vec<Method>>>()?;
    let seed = a.seed.or(file.as_ref().and_then(|f| f.seed)).unwrap_or(0);
    let limits = config::limits(a.limits.timeout, a.limits.step_multiplier, a.limits.max_steps)?;
    let workers = a.workers.unwrap_or_else(config::default_workers);
    if workers == 0 {
        bail!("--workers must be positive");
    }
    let report = run_suite(&suite, &methods, &limits, seed, workers);
    let out = fs::File::create(&a.out).with_context(|| format!("--out {}", a.out.display()))?;
    write_csv(&report.rows, std::io::BufWriter::new(out))?;
    println!(
        "{:<24} {:>6} {:<16} {:<12} {:>8} {:>8} {:>14} {:>10}",
        "map", "n", "method", "shield", "episodes", "success", "per_agent_cost", "wall_ms"
    );
    for s in summarize(&report.rows) {
        let cost = s.mean_per_agent_cost.map_or_else(|| "-".to_string(), |c| format!("{c:.3}"));
        println!(
            "{:<24} {:>6} {:<16} {:<12} {:>8} {:>8.3} {:>14} {:>10.1}",
            s.map, s.n_agents, s.method, s.shield, s.episodes, s.success_rate, cost, s.mean_wall_ms
        );
    }
    for e in &report.errors {
        eprintln!("error: {e}");
    }
    Ok(if report.errors.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

pub fn validate(a: ValidateArgs) -> Result<ExitCode> {
    let cache = HeuristicCache::new(config::load_map(&a.map)?);
    let inst = Instance::load(&cache, &a.scen, a.agents, 0)?;
    let text = fs::read_to_string(&a.solution).with_context(|| format!("--solution {}", a.solution.display()))?;
    let sol = Solution::from_text(&text).with_context(|| format!("--solution {}", a.solution.display()))?;
    let report = validate_solution(&sol, &inst.scenario).with_context(|| format!("--solution {}", a.solution.display()))?;
    for c in &report.vertex_collisions {
        println!("vertex collision t={} agents {} {} at {}", c.t, c.a, c.b, c.cell);
    }
    for c in &report.edge_collisions {
        println!("edge collision t={} agents {} {}", c.t, c.a, c.b);
    }
    println!("makespan {} {}", sol.makespan(), report_line(&report));
    Ok(if report.is_valid_solution() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

pub fn infer(a: InferArgs) -> Result<ExitCode> {
    let method = config::parse_method(&a.method, None, &method_options(&a.policy))?;
    let Method::Policy { policy, .. } = &method else {
        bail!("--method must be a policy:* method");
    };
    let cache = HeuristicCache::new(config::load_map(&a.map)?);
    let inst = Instance::load(&cache, &a.scen, a.agents, a.seed)?;
    let scen = Arc::clone(&inst.scenario);
    let state = match &a.positions {
        None => SimState::new(scen),
        Some(path) => {
            let ctx = || format!("--positions {}", path.display());
            let text = fs::read_to_string(path).with_context(ctx)?;
            let cells = parse_cells(text.trim()).map_err(|e| anyhow!("{}: {e}", ctx()))?;
            if cells.len() != a.agents {
                bail!("{}: {} cells for {} agents", ctx(), cells.len(), a.agents);
            }
            let mut seen = std::collections::HashSet::new();
            for (i, c) in cells.iter().enumerate() {
                if !scen.map().is_free(*c) {
                    bail!("{}: agent {i} at {c} is not a free cell", ctx());
                }
                if !seen.insert(*c) {
                    bail!("{}: two agents at {c}", ctx());
                }
                if scen.table(i).get(*c).is_none() {
                    bail!("{}: agent {i} at {c} cannot reach its goal", ctx());
                }
            }
            SimState::with_positions(scen, cells)
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(inst.method_seed(a.seed, &method));
    let dists = policy.build().action_dists(&state, &mut rng);
    for (i, (d, pos)) in dists.iter().zip(state.positions()).enumerate() {
        let probs: Vec<String> = Action::ALL
            .iter()
            .map(|act| format!("{}={:.6}", act.name(), d.prob(*act)))
            .collect();
        println!("agent {i} at {pos} {} argmax={}", probs.join(" "), d.argmax().name());
    }
    Ok(ExitCode::SUCCESS)
}
