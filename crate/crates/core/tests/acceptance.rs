//! End-to-end acceptance checks. Each check prints one PASS/FAIL line; the
//! process exits nonzero if any check fails.

mod common;

use std::fs;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use common::*;
use mapf::dataset::{export_dataset, read_dataset, FeatureParams};
use mapf::features::{build_graph, extract_all};
use mapf::generate::{largest_component, random_32_32_10, random_map, random_tasks, scen_text};
use mapf::policy::{graph_input, greedy_policy, neural_forward, neural_logits, Architecture, GraphInput, WeightsFile};
use mapf::simulator::{derive_seed, evaluate, summarize, Method, PolicyKind, SuiteEntry};
use mapf::supervisor::{prioritized_plan, PlannerConfig};
use mapf::{
    backward_dijkstra, cs_naive, cs_pibt, run_episode, run_pibt, validate_solution, Action, ActionDist, Limits,
    OrderingMode, Scenario, Shield, SimState,
};

type Check = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn no_timeout() -> Limits {
    Limits {
        timeout: None,
        ..Limits::default()
    }
}

fn safety() -> Outcome {
    let started = Instant::now();
    let mut r = rng(1);
    let (mut naive_calls, mut pibt_calls) = (0usize, 0usize);
    let mut failures = Vec::new();
    for _ in 0..500 {
        let (w, h) = (r.gen_range(4..=32), r.gen_range(4..=32));
        let density = r.gen_range(0.0..0.3);
        let n = r.gen_range(2..=200);
        let scen = random_scenario(&mut r, w, h, density, n);
        if scen.num_agents() < 2 {
            continue;
        }
        for k in 0..10 {
            let state = scattered_state(&mut r, Arc::clone(&scen));
            let dists = mixed_dists(&mut r, &state);
            let proposals: Vec<Action> = dists.iter().map(ActionDist::argmax).collect();
            let naive = cs_naive(&proposals, &state);
            naive_calls += 1;
            if let Err(e) = check_step(state.map(), state.positions(), &naive) {
                failures.push(format!("cs_naive: {e}"));
            }
            let mode = if k % 2 == 0 { OrderingMode::Sample } else { OrderingMode::Sort };
            let acts = cs_pibt(&dists, &state, mode, &mut r);
            pibt_calls += 1;
            if let Err(e) = check_step(state.map(), state.positions(), &acts) {
                failures.push(format!("cs_pibt: {e}"));
            }
        }
    }
    let elapsed = started.elapsed();
    let total = naive_calls + pibt_calls;
    outcome(
        failures.is_empty() && total >= 10_000 && elapsed < Duration::from_secs(120),
        format!(
            "{total} invocations ({naive_calls} naive, {pibt_calls} pibt), {} unsafe, {:.1}s{}",
            failures.len(),
            elapsed.as_secs_f64(),
            failures.first().map(|f| format!(", first: {f}")).unwrap_or_default()
        ),
    )
}

fn pibt_equivalence() -> Outcome {
    let map = random_32_32_10(10);
    let mut cells = Vec::new();
    for scene in 0..10u64 {
        let tasks = random_tasks(&map, 200, 1000 + scene);
        for n in [20, 50, 100, 150, 200] {
            cells.push((scene, n, tasks[..n].to_vec()));
        }
    }
    let mismatches: Vec<String> = cells
        .par_iter()
        .filter_map(|(scene, n, tasks)| {
            let seed = derive_seed(0, &["random-32-32-10", &scene.to_string(), &n.to_string()]);
            let scen = Arc::new(Scenario::new(Arc::clone(&map), tasks.clone(), seed).unwrap());
            let reference = run_pibt(&scen, &no_timeout());
            let shielded = run_episode(
                &scen,
                &mut mapf::policy::GreedyPolicy,
                Shield::Pibt(OrderingMode::Sort),
                &no_timeout(),
                &mut rng(seed),
            );
            (shielded.solution.to_text() != reference.solution.to_text()).then(|| format!("scene {scene} n={n}"))
        })
        .collect();
    outcome(
        mismatches.is_empty(),
        format!("{} cells, {} mismatched {:?}", cells.len(), mismatches.len(), mismatches),
    )
}

fn heuristic_oracle() -> Outcome {
    let mut r = rng(3);
    let mut tables = 0;
    let mut bad = Vec::new();
    for m in 0..200 {
        let (w, h) = (r.gen_range(1..=16), r.gen_range(1..=16));
        let map = random_map("h", w, h, r.gen_range(0.0..0.45), r.gen());
        let free: Vec<_> = map.free_cells().collect();
        for goal in free.choose_multiple(&mut r, 8) {
            let table = backward_dijkstra(&map, *goal).unwrap();
            let expected = relaxed_distances(&map, *goal);
            let got: Vec<Option<u32>> = (0..map.num_cells()).map(|i| table.get(map.cell_at(i))).collect();
            if got != expected {
                bad.push(format!("map {m} goal {goal}"));
            }
            tables += 1;
        }
    }
    outcome(
        bad.is_empty(),
        format!("200 maps, {tables} goal fields, {} mismatched {:?}", bad.len(), bad),
    )
}

fn feature_invariants() -> Outcome {
    let mut r = rng(4);
    let mut problems = Vec::new();
    for s in 0..1000 {
        let (w, h) = (r.gen_range(2..=32), r.gen_range(2..=32));
        let (density, n) = (r.gen_range(0.0..0.3), r.gen_range(1..=120));
        let scen = random_scenario(&mut r, w, h, density, n);
        let state = scattered_state(&mut r, scen);
        let radius = r.gen_range(1..=5);
        let m = r.gen_range(0..=8);
        let fovs = extract_all(state.map(), state.positions(), state.scenario().tables(), radius);
        let center = radius * (2 * radius + 1) + radius;
        for (i, f) in fovs.iter().enumerate() {
            if f.heuristic[center] != 0.0 || !f.heuristic.iter().all(|v| (-1.0..=1.0).contains(v)) {
                problems.push(format!("state {s} agent {i}: heuristic channel out of range"));
            }
        }
        let graph = build_graph(state.map(), state.positions(), radius, m);
        let respects = graph.iter().enumerate().all(|(i, nb)| {
            nb.len() <= m
                && nb.iter().all(|&j| {
                    j as usize != i && state.positions()[i].chebyshev(state.positions()[j as usize]) <= radius as i32
                })
        });
        if !respects || graph != brute_neighbors(state.positions(), radius as i32, m) {
            problems.push(format!("state {s}: neighbor lists"));
        }
    }

    let mut round_trips = 0;
    for k in 0..20u64 {
        let mut r = rng(400 + k);
        let scen = random_scenario(&mut r, 16, 16, 0.1, 12);
        let Some(sol) = prioritized_plan(&scen, &PlannerConfig { seed: k, timeout: None, ..Default::default() }) else {
            continue;
        };
        let params = FeatureParams::default();
        let mut bytes = Vec::new();
        export_dataset(&[((*scen).clone(), sol.clone())], params, &mut bytes).unwrap();
        let back = read_dataset(&bytes[..]).unwrap();
        let mut again = Vec::new();
        let mut w = mapf::dataset::DatasetWriter::new(&mut again, back.params, back.graphs.len() as u64).unwrap();
        for g in &back.graphs {
            w.write_graph(g).unwrap();
        }
        w.finish().unwrap();
        if again != bytes {
            problems.push(format!("dataset {k} not bit-exact"));
        }
        round_trips += 1;
    }
    outcome(
        problems.is_empty() && round_trips >= 10,
        format!("1000 states, {round_trips} dataset round-trips, {} problems {:?}", problems.len(), problems.first()),
    )
}

fn dominance() -> Outcome {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let map = random_32_32_10(0);
    let map_path = dir.path().join("random-32-32-10.map");
    fs::write(&map_path, map.to_map_text()).unwrap();
    let scenes: Vec<PathBuf> = (1..=25u64)
        .map(|s| {
            let p = dir.path().join(format!("random-32-32-10-random-{s}.scen"));
            fs::write(&p, scen_text(&map, &random_tasks(&map, 200, s))).unwrap();
            p
        })
        .collect();
    let counts = [50, 100, 150, 200];
    let suite = [SuiteEntry {
        map: map_path,
        scenes,
        agent_counts: counts.to_vec(),
    }];
    let methods = [
        Method::Policy {
            policy: PolicyKind::Greedy,
            shield: Shield::Pibt(OrderingMode::Sample),
        },
        Method::Policy {
            policy: PolicyKind::Greedy,
            shield: Shield::Naive,
        },
    ];
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let report = evaluate(&suite, &methods, &Limits::default(), 0, workers);
    let summary = summarize(&report.rows);
    let rate = |n: usize, shield: &str| {
        summary
            .iter()
            .find(|s| s.n_agents == n && s.shield == shield)
            .map_or(f64::NAN, |s| s.success_rate)
    };
    let mut all_ge = report.errors.is_empty();
    let mut any_gt = false;
    let mut parts = Vec::new();
    for n in counts {
        let (p, q) = (rate(n, "pibt-sample"), rate(n, "naive"));
        all_ge &= p >= q;
        any_gt |= p > q;
        parts.push(format!("n={n} cs_pibt {p:.2} vs naive {q:.2}"));
    }
    let elapsed = started.elapsed();
    outcome(
        all_ge && any_gt && elapsed < Duration::from_secs(600),
        format!("{}; {:.1}s", parts.join(", "), elapsed.as_secs_f64()),
    )
}

fn throughput() -> Outcome {
    // den312d is 81 x 65 with about half the cells free.
    let map = Arc::new(random_map("den312d-scale", 81, 65, 0.35, 312));
    let free = largest_component(&map).len();
    let scen = Arc::new(Scenario::new(Arc::clone(&map), random_tasks(&map, 500, 7), 7).unwrap());
    let mut state = SimState::new(scen);
    let mut r = rng(0);
    let mut times = Vec::new();
    for _ in 0..60 {
        let t0 = Instant::now();
        let dists = greedy_policy(&state);
        let acts = cs_pibt(&dists, &state, OrderingMode::Sort, &mut r);
        times.push(t0.elapsed());
        state.apply(&acts);
    }
    times.sort();
    let median = times[times.len() / 2];
    outcome(
        median < Duration::from_millis(50),
        format!(
            "500 agents on 81x65 ({free} free cells): median {:.3} ms per step, max {:.3} ms",
            median.as_secs_f64() * 1e3,
            times.last().unwrap().as_secs_f64() * 1e3
        ),
    )
}

fn supervisor_validity() -> Outcome {
    let results: Vec<Result<(), String>> = (0..100u64)
        .into_par_iter()
        .map(|k| {
            let mut r = rng(700 + k);
            let side = r.gen_range(10..=24);
            let n = r.gen_range(2..=25);
            let scen = random_scenario(&mut r, side, side, 0.1, n);
            let cfg = PlannerConfig {
                seed: k,
                timeout: None,
                ..Default::default()
            };
            let sol = prioritized_plan(&scen, &cfg).ok_or(format!("fixture {k}: no plan"))?;
            let rep = validate_solution(&sol, &scen).map_err(|e| format!("fixture {k}: {e}"))?;
            if !rep.is_valid_solution() {
                return Err(format!("fixture {k}: invalid {rep:?}"));
            }
            if rep.sum_of_costs < scen.distance_lower_bound() {
                return Err(format!("fixture {k}: cost below lower bound"));
            }
            Ok(())
        })
        .collect();
    let bad: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    outcome(bad.is_empty(), format!("100 runs, {} failed {:?}", bad.len(), bad))
}

fn neural() -> Outcome {
    let arch = Architecture::default();
    let zero = WeightsFile::zeros(arch);
    let mut problems = Vec::new();
    let mut r = rng(8);
    for k in 0..50u64 {
        let n = r.gen_range(1..=30);
        let scen = random_scenario(&mut r, 20, 20, 0.15, n);
        let state = scattered_state(&mut r, scen);
        let g = graph_input(&state, FeatureParams::default());
        if k < 5 {
            for d in neural_forward(&zero, &g).unwrap() {
                if d.probs().iter().any(|p| (p - 0.2).abs() > 1e-12) {
                    problems.push(format!("fixture {k}: zero weights gave {:?}", d.probs()));
                }
            }
        }
        let w = WeightsFile::random(arch, k);
        let out = neural_logits(&w, &g).unwrap();
        let mut perm: Vec<usize> = (0..state.num_agents()).collect();
        perm.shuffle(&mut r);
        let mut inv = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let permuted = GraphInput {
            fovs: perm.iter().map(|&o| g.fovs[o].clone()).collect(),
            neighbors: perm
                .iter()
                .map(|&o| g.neighbors[o].iter().map(|&j| inv[j as usize] as u32).collect())
                .collect(),
        };
        let out_p = neural_logits(&w, &permuted).unwrap();
        if perm.iter().enumerate().any(|(new, &old)| out_p[new] != out[old]) {
            problems.push(format!("fixture {k}: not equivariant"));
        }
    }
    outcome(
        problems.is_empty(),
        format!("zero weights uniform on 5 graphs, equivariance on 50 fixtures, {} problems {:?}", problems.len(), problems.first()),
    )
}

fn main() {
    let checks: [Check; 8] = [
        ("shield safety", safety),
        ("pibt equivalence", pibt_equivalence),
        ("heuristic oracle", heuristic_oracle),
        ("feature invariants", feature_invariants),
        ("shield dominance", dominance),
        ("step throughput", throughput),
        ("supervisor validity", supervisor_validity),
        ("neural inference", neural),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let t0 = Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t0.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
