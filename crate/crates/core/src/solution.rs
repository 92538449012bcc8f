//! Solutions, collision checking and cost accounting.

use std::collections::HashMap;

use crate::error::SolutionError;
use crate::grid::{Action, Cell, GridMap};
use crate::scenario::Scenario;

/// Per-agent paths padded to a common makespan.
///
/// Every path holds `makespan + 1` cells, `paths[i][t]` being agent `i`'s cell
/// at timestep `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    paths: Vec<Vec<Cell>>,
}

impl Solution {
    /// Pads every path with its final cell up to the longest one.
    pub fn new(mut paths: Vec<Vec<Cell>>) -> Result<Self, SolutionError> {
        if paths.is_empty() || paths.iter().any(|p| p.is_empty()) {
            return Err(SolutionError::Empty);
        }
        let len = paths.iter().map(Vec::len).max().unwrap();
        for p in &mut paths {
            let last = *p.last().unwrap();
            p.resize(len, last);
        }
        Ok(Self { paths })
    }

    /// Builds a solution from a per-timestep sequence of joint positions.
    pub fn from_steps(steps: &[Vec<Cell>]) -> Result<Self, SolutionError> {
        let Some(first) = steps.first() else {
            return Err(SolutionError::Empty);
        };
        let paths = (0..first.len())
            .map(|i| steps.iter().map(|s| s[i]).collect())
            .collect();
        Self::new(paths)
    }

    pub fn paths(&self) -> &[Vec<Cell>] {
        &self.paths
    }

    pub fn num_agents(&self) -> usize {
        self.paths.len()
    }

    pub fn makespan(&self) -> usize {
        self.paths[0].len() - 1
    }

    /// Joint positions at timestep `t` (clamped to the makespan).
    pub fn positions_at(&self, t: usize) -> Vec<Cell> {
        let t = t.min(self.makespan());
        self.paths.iter().map(|p| p[t]).collect()
    }

    /// Action taken by agent `agent` between `t` and `t + 1`.
    pub fn action_at(&self, agent: usize, t: usize) -> Option<Action> {
        let p = &self.paths[agent];
        Action::between(p[t], p[t + 1])
    }

    /// Plain-text form: `makespan T agents N`, then one line of `(r,c)` per agent.
    pub fn to_text(&self) -> String {
        let mut out = format!("makespan {} agents {}\n", self.makespan(), self.num_agents());
        for p in &self.paths {
            let line: Vec<String> = p.iter().map(Cell::to_string).collect();
            out.push_str(&line.join(""));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, SolutionError> {
        let fmt_err = |line: usize, message: String| SolutionError::Format { line, message };
        let mut lines = text.lines().map(|l| l.trim_end_matches('\r')).enumerate();
        let (_, header) = lines.next().ok_or_else(|| fmt_err(1, "missing header".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        let (makespan, agents) = match h.as_slice() {
            ["makespan", t, "agents", n] => (
                t.parse::<usize>().map_err(|_| fmt_err(1, format!("bad makespan `{t}`")))?,
                n.parse::<usize>().map_err(|_| fmt_err(1, format!("bad agent count `{n}`")))?,
            ),
            _ => return Err(fmt_err(1, format!("bad header `{header}`"))),
        };
        let mut paths = Vec::with_capacity(agents);
        for (no, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let path = parse_cells(line).map_err(|m| fmt_err(no + 1, m))?;
            if path.len() != makespan + 1 {
                return Err(fmt_err(
                    no + 1,
                    format!("path has {} cells, expected {}", path.len(), makespan + 1),
                ));
            }
            paths.push(path);
        }
        if paths.len() != agents {
            return Err(fmt_err(0, format!("found {} paths, header says {agents}", paths.len())));
        }
        Self::new(paths)
    }
}

/// Parses a run of `(r,c)` pairs.
pub fn parse_cells(line: &str) -> Result<Vec<Cell>, String> {
    let mut cells = Vec::new();
    let mut rest = line.trim();
    while !rest.is_empty() {
        let open = rest.strip_prefix('(').ok_or_else(|| format!("expected `(` at `{rest}`"))?;
        let close = open.find(')').ok_or("unterminated cell")?;
        let (r, c) = open[..close].split_once(',').ok_or("expected `r,c`")?;
        let row = r.trim().parse().map_err(|_| format!("bad row `{r}`"))?;
        let col = c.trim().parse().map_err(|_| format!("bad col `{c}`"))?;
        cells.push(Cell::new(row, col));
        rest = open[close + 1..].trim_start();
    }
    Ok(cells)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VertexCollision {
    pub t: usize,
    pub a: usize,
    pub b: usize,
    pub cell: Cell,
}

/// Agents `a` and `b` swap cells between `t` and `t + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeCollision {
    pub t: usize,
    pub a: usize,
    pub b: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub vertex_collisions: Vec<VertexCollision>,
    pub edge_collisions: Vec<EdgeCollision>,
    pub all_at_goal: bool,
    pub sum_of_costs: u64,
}

impl ValidationReport {
    pub fn collision_free(&self) -> bool {
        self.vertex_collisions.is_empty() && self.edge_collisions.is_empty()
    }

    pub fn is_valid_solution(&self) -> bool {
        self.collision_free() && self.all_at_goal
    }
}

/// Checks move legality, then lists every vertex and edge collision.
pub fn find_collisions(
    paths: &[Vec<Cell>],
    map: &GridMap,
) -> Result<(Vec<VertexCollision>, Vec<EdgeCollision>), SolutionError> {
    let Some(len) = paths.first().map(Vec::len) else {
        return Ok((Vec::new(), Vec::new()));
    };
    for (i, p) in paths.iter().enumerate() {
        if p.len() != len {
            return Err(SolutionError::Length {
                agent: i,
                expected: len,
                found: p.len(),
            });
        }
        for (t, &cell) in p.iter().enumerate() {
            if !map.is_free(cell) {
                return Err(SolutionError::NotFree { agent: i, t, cell });
            }
            if t + 1 < len && Action::between(cell, p[t + 1]).is_none() {
                return Err(SolutionError::IllegalMove {
                    agent: i,
                    t,
                    from: cell,
                    to: p[t + 1],
                });
            }
        }
    }

    let mut vertex = Vec::new();
    let mut edge = Vec::new();
    let mut at: HashMap<Cell, Vec<usize>> = HashMap::new();
    let mut prev: HashMap<Cell, usize> = HashMap::new();
    for t in 0..len {
        at.clear();
        for (i, p) in paths.iter().enumerate() {
            at.entry(p[t]).or_default().push(i);
        }
        let mut found: Vec<VertexCollision> = Vec::new();
        for (&cell, agents) in &at {
            for (k, &a) in agents.iter().enumerate() {
                for &b in &agents[k + 1..] {
                    found.push(VertexCollision { t, a, b, cell });
                }
            }
        }
        found.sort_by_key(|v| (v.a, v.b));
        vertex.extend(found);

        if t + 1 < len {
            prev.clear();
            for (i, p) in paths.iter().enumerate() {
                prev.insert(p[t], i);
            }
            for (a, p) in paths.iter().enumerate() {
                let (from, to) = (p[t], p[t + 1]);
                if from == to {
                    continue;
                }
                if let Some(&b) = prev.get(&to) {
                    if b > a && paths[b][t + 1] == from {
                        edge.push(EdgeCollision { t, a, b });
                    }
                }
            }
        }
    }
    Ok((vertex, edge))
}

/// Full check of a solution against its scenario.
pub fn validate_solution(sol: &Solution, scen: &Scenario) -> Result<ValidationReport, SolutionError> {
    if sol.num_agents() != scen.num_agents() {
        return Err(SolutionError::AgentCount {
            expected: scen.num_agents(),
            found: sol.num_agents(),
        });
    }
    for (i, (p, task)) in sol.paths().iter().zip(scen.agents()).enumerate() {
        if p[0] != task.start {
            return Err(SolutionError::WrongStart {
                agent: i,
                expected: task.start,
                found: p[0],
            });
        }
    }
    let (vertex_collisions, edge_collisions) = find_collisions(sol.paths(), scen.map())?;
    let all_at_goal = sol
        .paths()
        .iter()
        .zip(scen.agents())
        .all(|(p, task)| *p.last().unwrap() == task.goal);
    Ok(ValidationReport {
        vertex_collisions,
        edge_collisions,
        all_at_goal,
        sum_of_costs: sum_of_costs(sol, scen),
    })
}

/// Arrival time of one path: the first `t` after which it never leaves `goal`.
///
/// A path that does not end at its goal is charged its full length.
pub fn path_cost(path: &[Cell], goal: Cell) -> u64 {
    match path.iter().rposition(|&c| c != goal) {
        None => 0,
        Some(last_away) => (last_away + 1) as u64,
    }
}

pub fn sum_of_costs(sol: &Solution, scen: &Scenario) -> u64 {
    sol.paths()
        .iter()
        .zip(scen.agents())
        .map(|(p, task)| path_cost(p, task.goal))
        .sum()
}
