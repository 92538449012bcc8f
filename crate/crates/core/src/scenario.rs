//! Scenarios: a map plus per-agent start and goal cells.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{ParseError, ScenarioError};
use crate::grid::{Cell, GridMap};
use crate::heuristics::{HeuristicCache, HeuristicTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentTask {
    pub start: Cell,
    pub goal: Cell,
}

impl AgentTask {
    pub fn new(start: Cell, goal: Cell) -> Self {
        Self { start, goal }
    }
}

/// A validated MAPF instance.
///
/// Construction computes each agent's cost-to-goal table, which also proves
/// every goal reachable.
#[derive(Debug, Clone)]
pub struct Scenario {
    map: Arc<GridMap>,
    agents: Vec<AgentTask>,
    seed: u64,
    tables: Vec<Arc<HeuristicTable>>,
}

impl Scenario {
    pub fn new(map: Arc<GridMap>, agents: Vec<AgentTask>, seed: u64) -> Result<Self, ScenarioError> {
        let cache = HeuristicCache::new(Arc::clone(&map));
        Self::with_cache(&cache, agents, seed)
    }

    /// Like [`Scenario::new`] but reuses tables from a shared cache.
    pub fn with_cache(
        cache: &HeuristicCache,
        agents: Vec<AgentTask>,
        seed: u64,
    ) -> Result<Self, ScenarioError> {
        let map = Arc::clone(cache.map());
        if agents.is_empty() {
            return Err(ScenarioError::NoAgents);
        }
        let mut starts: HashMap<Cell, usize> = HashMap::with_capacity(agents.len());
        let mut goals: HashMap<Cell, usize> = HashMap::with_capacity(agents.len());
        for (i, task) in agents.iter().enumerate() {
            for (which, cell, seen) in [
                ("start", task.start, &mut starts),
                ("goal", task.goal, &mut goals),
            ] {
                if !map.in_bounds(cell) {
                    return Err(ScenarioError::OutOfBounds { agent: i, which, cell });
                }
                if !map.is_free(cell) {
                    return Err(ScenarioError::Blocked { agent: i, which });
                }
                if let Some(&other) = seen.get(&cell) {
                    return Err(ScenarioError::Duplicate {
                        agent: i,
                        other,
                        which,
                        cell,
                    });
                }
                seen.insert(cell, i);
            }
        }
        let mut tables = Vec::with_capacity(agents.len());
        for (i, task) in agents.iter().enumerate() {
            let table = cache.get(task.goal).expect("goal checked free");
            if table.get(task.start).is_none() {
                return Err(ScenarioError::Unreachable { agent: i });
            }
            tables.push(table);
        }
        Ok(Self {
            map,
            agents,
            seed,
            tables,
        })
    }

    pub fn map(&self) -> &Arc<GridMap> {
        &self.map
    }

    pub fn agents(&self) -> &[AgentTask] {
        &self.agents
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Same instance with a different tie-breaking seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn starts(&self) -> Vec<Cell> {
        self.agents.iter().map(|a| a.start).collect()
    }

    pub fn goals(&self) -> Vec<Cell> {
        self.agents.iter().map(|a| a.goal).collect()
    }

    pub fn table(&self, agent: usize) -> &HeuristicTable {
        &self.tables[agent]
    }

    pub fn tables(&self) -> &[Arc<HeuristicTable>] {
        &self.tables
    }

    /// Cost-to-goal of agent `agent` from its start.
    pub fn start_distance(&self, agent: usize) -> u32 {
        self.tables[agent]
            .get(self.agents[agent].start)
            .expect("reachability checked at construction")
    }

    /// Sum of start distances: a lower bound on any solution's sum of costs.
    pub fn distance_lower_bound(&self) -> u64 {
        (0..self.num_agents()).map(|i| self.start_distance(i) as u64).sum()
    }

    pub fn max_start_distance(&self) -> u32 {
        (0..self.num_agents()).map(|i| self.start_distance(i)).max().unwrap_or(0)
    }
}

/// One data line of a `.scen` file, coordinates already converted to `(row, col)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenEntry {
    pub bucket: u32,
    pub map_name: String,
    pub start: Cell,
    pub goal: Cell,
    pub optimal_length: f64,
}

/// Reads every entry of a `.scen` file without checking it against a map.
pub fn parse_scen_entries(text: &str) -> Result<Vec<ScenEntry>, ParseError> {
    let mut lines = text
        .lines()
        .map(|l| l.trim_end_matches('\r'))
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, l)) if l.trim_start().starts_with("version") => {}
        Some((no, l)) => return Err(ParseError::new(no + 1, format!("expected `version` header, found `{l}`"))),
        None => return Err(ParseError::new(1, "missing `version` header")),
    }
    let mut entries = Vec::new();
    for (no, line) in lines {
        let mut fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 9 {
            fields = line.split_whitespace().collect();
        }
        if fields.len() < 9 {
            return Err(ParseError::new(no + 1, format!("expected 9 fields, found {}", fields.len())));
        }
        let int = |k: usize, what: &str| -> Result<i32, ParseError> {
            fields[k]
                .trim()
                .parse::<i32>()
                .map_err(|_| ParseError::new(no + 1, format!("bad {what} `{}`", fields[k])))
        };
        let bucket = int(0, "bucket")?;
        let (sx, sy, gx, gy) = (int(4, "start x")?, int(5, "start y")?, int(6, "goal x")?, int(7, "goal y")?);
        let optimal_length = fields[8]
            .trim()
            .parse::<f64>()
            .map_err(|_| ParseError::new(no + 1, format!("bad optimal length `{}`", fields[8])))?;
        entries.push(ScenEntry {
            bucket: bucket.max(0) as u32,
            map_name: fields[1].to_string(),
            start: Cell::new(sy, sx),
            goal: Cell::new(gy, gx),
            optimal_length,
        });
    }
    Ok(entries)
}

/// Builds a scenario from the first `n` entries of a `.scen` file.
pub fn parse_scenario(text: &str, map: Arc<GridMap>, n: usize) -> Result<Scenario, ScenarioError> {
    let cache = HeuristicCache::new(map);
    parse_scenario_cached(text, &cache, n, 0)
}

pub fn parse_scenario_cached(
    text: &str,
    cache: &HeuristicCache,
    n: usize,
    seed: u64,
) -> Result<Scenario, ScenarioError> {
    if n == 0 {
        return Err(ScenarioError::NoAgents);
    }
    let entries = parse_scen_entries(text)?;
    if n > entries.len() {
        return Err(ScenarioError::TooManyAgents {
            requested: n,
            available: entries.len(),
        });
    }
    let agents = entries[..n]
        .iter()
        .map(|e| AgentTask::new(e.start, e.goal))
        .collect();
    Scenario::with_cache(cache, agents, seed)
}

/// Formats a scenario as `.scen` text (bucket 0, optimal length = start distance).
pub fn to_scen_text(scen: &Scenario) -> String {
    let map = scen.map();
    let mut out = String::from("version 1\n");
    for (i, a) in scen.agents().iter().enumerate() {
        out.push_str(&format!(
            "0\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            map.name(),
            map.width(),
            map.height(),
            a.start.col,
            a.start.row,
            a.goal.col,
            a.goal.row,
            scen.start_distance(i)
        ));
    }
    out
}
