mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use mapf::dataset::{export_dataset, read_dataset, DatasetWriter, FeatureParams};
use mapf::features::{build_graph, extract_all};
use mapf::generate::random_map;
use mapf::policy::{graph_input, neural_logits, Architecture, GraphInput, GreedyPolicy, RandomPolicy, WeightsFile};
use mapf::supervisor::{prioritized_plan, PlannerConfig};
use mapf::{
    backward_dijkstra, cs_naive, cs_pibt, parse_map, run_episode, run_pibt, validate_solution, Action, ActionDist,
    AgentTask, Cell, GridMap, Limits, OrderingMode, Scenario, Shield, SimState,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn map_text_round_trips(w in 1usize..20, h in 1usize..20, density in 0.0f64..0.6, seed: u64) {
        let m = random_map("m", w, h, density, seed);
        let back = parse_map(&m.to_map_text(), "m").unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn bfs_matches_floyd_warshall(w in 1usize..8, h in 1usize..8, density in 0.0f64..0.5, seed: u64, pick: usize) {
        let m = random_map("m", w, h, density, seed);
        let free: Vec<Cell> = m.free_cells().collect();
        prop_assume!(!free.is_empty());
        let goal = free[pick % free.len()];
        let table = backward_dijkstra(&m, goal).unwrap();
        let fw = floyd_warshall(&m);
        let g = m.index(goal).unwrap();
        for i in 0..m.num_cells() {
            let expected = (fw[i][g] != u32::MAX).then_some(fw[i][g]);
            prop_assert_eq!(table.get(m.cell_at(i)), expected, "cell {}", m.cell_at(i));
        }
    }

    #[test]
    fn shields_never_collide(w in 2usize..14, h in 2usize..14, density in 0.0f64..0.35, n in 2usize..60, seed: u64) {
        let mut r = rng(seed);
        let scen = random_scenario(&mut r, w, h, density, n);
        let state = scattered_state(&mut r, scen);
        let dists = mixed_dists(&mut r, &state);
        let proposals: Vec<Action> = dists.iter().map(ActionDist::argmax).collect();
        let naive = cs_naive(&proposals, &state);
        check_step(state.map(), state.positions(), &naive).map_err(TestCaseError::fail)?;
        for (p, a) in proposals.iter().zip(&naive) {
            prop_assert!(a == p || *a == Action::Wait);
        }
        for mode in [OrderingMode::Sort, OrderingMode::Sample] {
            let acts = cs_pibt(&dists, &state, mode, &mut r);
            check_step(state.map(), state.positions(), &acts).map_err(TestCaseError::fail)?;
        }
    }

    #[test]
    fn features_are_bounded_and_graph_matches_brute_force(
        w in 1usize..20, h in 1usize..20, density in 0.0f64..0.4, n in 1usize..40, radius in 1usize..5, m in 0usize..7, seed: u64,
    ) {
        let mut r = rng(seed);
        let scen = random_scenario(&mut r, w, h, density, n);
        let state = scattered_state(&mut r, scen);
        let map = state.map();
        let fovs = extract_all(map, state.positions(), state.scenario().tables(), radius);
        let d = 2 * radius + 1;
        let center = radius * d + radius;
        for f in &fovs {
            prop_assert_eq!(f.heuristic[center], 0.0);
            prop_assert_eq!(f.occupancy[center], 1.0);
            prop_assert_eq!(f.obstacle[center], 0.0);
            for c in f.channels() {
                prop_assert_eq!(c.len(), d * d);
            }
            prop_assert!(f.heuristic.iter().all(|v| (-1.0..=1.0).contains(v)));
            prop_assert!(f.obstacle.iter().chain(&f.occupancy).all(|v| *v == 0.0 || *v == 1.0));
            prop_assert!(f.greedy.contains(&1.0));
        }
        let graph = build_graph(map, state.positions(), radius, m);
        prop_assert_eq!(&graph, &brute_neighbors(state.positions(), radius as i32, m));
    }

    #[test]
    fn fov_is_translation_equivariant(
        n in 1usize..8, dr in -3i32..=3, dc in -3i32..=3, seed: u64,
    ) {
        // On an open map, shifting every agent and goal moves nothing in
        // any window that stays inside the map.
        let map = Arc::new(GridMap::empty("open", 24, 24));
        let mut r = rng(seed);
        let base = random_scenario(&mut r, 10, 10, 0.0, n);
        let shift = |c: Cell| Cell::new(c.row + 7, c.col + 7);
        let moved = |c: Cell| Cell::new(c.row + 7 + dr, c.col + 7 + dc);
        let tasks_a: Vec<AgentTask> = base.agents().iter().map(|t| AgentTask::new(shift(t.start), shift(t.goal))).collect();
        let tasks_b: Vec<AgentTask> = base.agents().iter().map(|t| AgentTask::new(moved(t.start), moved(t.goal))).collect();
        let a = Scenario::new(Arc::clone(&map), tasks_a, 0).unwrap();
        let b = Scenario::new(Arc::clone(&map), tasks_b, 0).unwrap();
        let fa = extract_all(&map, &a.starts(), a.tables(), 3);
        let fb = extract_all(&map, &b.starts(), b.tables(), 3);
        prop_assert_eq!(fa, fb);
        prop_assert_eq!(build_graph(&map, &a.starts(), 3, 5), build_graph(&map, &b.starts(), 3, 5));
    }

    #[test]
    fn pibt_runs_are_valid_and_above_the_lower_bound(w in 3usize..16, h in 3usize..16, density in 0.0f64..0.25, n in 1usize..30, seed: u64) {
        let mut r = rng(seed);
        let scen = random_scenario(&mut r, w, h, density, n);
        let out = run_pibt(&scen, &Limits::steps(200));
        let rep = validate_solution(&out.solution, &scen).unwrap();
        prop_assert!(rep.collision_free());
        prop_assert!(out.steps <= 200);
        if out.success {
            prop_assert!(rep.all_at_goal);
            prop_assert!(rep.sum_of_costs >= scen.distance_lower_bound());
        }
    }

    #[test]
    fn supervisor_plans_are_valid(w in 3usize..12, h in 3usize..12, density in 0.0f64..0.25, n in 1usize..12, seed: u64) {
        let mut r = rng(seed);
        let scen = random_scenario(&mut r, w, h, density, n);
        let cfg = PlannerConfig { seed, timeout: None, ..PlannerConfig::default() };
        if let Some(sol) = prioritized_plan(&scen, &cfg) {
            let rep = validate_solution(&sol, &scen).unwrap();
            prop_assert!(rep.is_valid_solution(), "{:?}", rep);
            prop_assert!(rep.sum_of_costs >= scen.distance_lower_bound());
        }
    }

    #[test]
    fn episodes_are_deterministic(n in 2usize..25, seed: u64, naive: bool) {
        let mut r = rng(seed);
        let scen = random_scenario(&mut r, 12, 12, 0.15, n);
        let shield = if naive { Shield::Naive } else { Shield::Pibt(OrderingMode::Sample) };
        let limits = Limits::steps(60);
        let a = run_episode(&scen, &mut RandomPolicy, shield, &limits, &mut rng(seed ^ 1));
        let b = run_episode(&scen, &mut RandomPolicy, shield, &limits, &mut rng(seed ^ 1));
        prop_assert_eq!(a.solution, b.solution);
    }

    #[test]
    fn dataset_round_trip_is_bit_exact(n in 1usize..10, radius in 1usize..5, m in 0usize..6, seed: u64) {
        let mut r = rng(seed);
        let scen = random_scenario(&mut r, 10, 10, 0.15, n);
        let cfg = PlannerConfig { seed, timeout: None, ..PlannerConfig::default() };
        let Some(sol) = prioritized_plan(&scen, &cfg) else { return Ok(()) };
        let params = FeatureParams { radius, max_neighbors: m };
        let mut bytes = Vec::new();
        let stats = export_dataset(&[((*scen).clone(), sol.clone())], params, &mut bytes).unwrap();
        prop_assert_eq!(stats.graphs, sol.makespan() as u64);
        let data = read_dataset(&bytes[..]).unwrap();
        prop_assert_eq!(data.params, params);
        prop_assert_eq!(data.graphs.len(), sol.makespan());
        let mut again = Vec::new();
        let mut w = DatasetWriter::new(&mut again, params, data.graphs.len() as u64).unwrap();
        for g in &data.graphs {
            w.write_graph(g).unwrap();
        }
        w.finish().unwrap();
        prop_assert_eq!(again, bytes);
        for (t, g) in data.graphs.iter().enumerate() {
            for (i, a) in g.agents.iter().enumerate() {
                prop_assert_eq!(Some(a.label), sol.action_at(i, t));
            }
        }
    }

    #[test]
    fn neural_outputs_are_distributions_and_permutation_equivariant(n in 1usize..12, seed: u64, perm_seed: u64) {
        use rand::seq::SliceRandom;
        let arch = Architecture { radius: 2, conv_channels: 4, embed_dim: 16 };
        let w = WeightsFile::random(arch, seed);
        let mut r = rng(seed);
        let scen = random_scenario(&mut r, 9, 9, 0.1, n);
        let state = scattered_state(&mut r, scen);
        let g = graph_input(&state, FeatureParams { radius: 2, max_neighbors: 4 });
        let out = neural_logits(&w, &g).unwrap();
        prop_assert_eq!(&out, &neural_logits(&w, &g).unwrap());
        for l in &out {
            let p = mapf::policy::softmax(l);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            prop_assert!(p.iter().all(|x| *x >= 0.0));
        }
        let mut perm: Vec<usize> = (0..n.min(state.num_agents())).collect();
        perm.shuffle(&mut rng(perm_seed));
        let permuted = permute_graph(&g, &perm);
        let out_p = neural_logits(&w, &permuted).unwrap();
        for (new, &old) in perm.iter().enumerate() {
            prop_assert_eq!(out_p[new], out[old]);
        }
    }
}

/// Agent `new` of the result is agent `perm[new]` of `g`; neighbor ids are
/// relabeled and keep their order.
fn permute_graph(g: &GraphInput, perm: &[usize]) -> GraphInput {
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let fovs = perm.iter().map(|&old| g.fovs[old].clone()).collect();
    let neighbors = perm
        .iter()
        .map(|&old| g.neighbors[old].iter().map(|&j| inv[j as usize] as u32).collect())
        .collect();
    GraphInput { fovs, neighbors }
}

/// Every joint proposal for up to three agents on tiny maps.
#[test]
fn exhaustive_joint_actions_on_tiny_maps() {
    let mut r = rng(17);
    let mut checked = 0usize;
    for case in 0..60 {
        let (w, h) = (2 + case % 3, 2 + (case / 3) % 3);
        let n = 1 + case % 3;
        let scen = random_scenario(&mut r, w, h, 0.15, n);
        let state = scattered_state(&mut r, scen);
        let n = state.num_agents();
        for code in 0..5usize.pow(n as u32) {
            let proposals: Vec<Action> = (0..n).map(|i| Action::ALL[(code / 5usize.pow(i as u32)) % 5]).collect();
            let joint_ok = check_step(state.map(), state.positions(), &proposals).is_ok();
            let naive = cs_naive(&proposals, &state);
            check_step(state.map(), state.positions(), &naive).unwrap();
            let dists: Vec<ActionDist> = proposals.iter().map(|a| ActionDist::one_hot(*a)).collect();
            let pibt = cs_pibt(&dists, &state, OrderingMode::Sort, &mut r);
            check_step(state.map(), state.positions(), &pibt).unwrap();
            if joint_ok {
                // A safe joint action passes both shields untouched.
                assert_eq!(naive, proposals, "{:?}", state.positions());
                assert_eq!(pibt, proposals, "{:?}", state.positions());
            }
            checked += 1;
        }
    }
    assert!(checked > 1000);
}

#[test]
fn greedy_sort_shield_mimics_pibt_on_small_instances() {
    for seed in 0..30u64 {
        let mut r = rng(seed);
        let scen = random_scenario(&mut r, 12, 12, 0.15, 5 + seed as usize);
        let limits = Limits::steps(100);
        let reference = run_pibt(&scen, &limits);
        let shielded = run_episode(&scen, &mut GreedyPolicy, Shield::Pibt(OrderingMode::Sort), &limits, &mut rng(0));
        assert_eq!(shielded.solution.to_text(), reference.solution.to_text(), "seed {seed}");
    }
}

#[test]
fn state_helpers_respect_instance() {
    let mut r = rng(3);
    let scen = random_scenario(&mut r, 8, 8, 0.2, 10);
    let s: SimState = scattered_state(&mut r, Arc::clone(&scen));
    let mut seen = std::collections::HashSet::new();
    for p in s.positions() {
        assert!(scen.map().is_free(*p));
        assert!(seen.insert(*p));
    }
}
