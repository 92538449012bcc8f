//! Imitation-learning datasets: one labeled graph per solution timestep.
//!
//! File layout (little-endian):
//!
//! ```text
//! magic "MAPFDS1\0" | u32 version=1 | u32 R | u32 M | u64 graph count
//! per graph:  u32 agent count N | u32 timestep
//! per agent:  i32 row | i32 col | i32 goal_row | i32 goal_col | u8 label
//!             u8 k | k x u32 neighbor | 3*D*D x f32 channels | 5 x f32 greedy
//! ```
//!
//! The map name is not part of the file; decoded graphs carry an empty name.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use rayon::prelude::*;

use crate::error::DatasetError;
use crate::features::{build_graph, extract_fov, fov_size, FovTensor, Occupancy};
use crate::grid::{Action, Cell};
use crate::scenario::Scenario;
use crate::solution::{validate_solution, Solution};

pub const DATASET_MAGIC: &[u8; 8] = b"MAPFDS1\0";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct AgentRecord {
    pub position: Cell,
    pub goal: Cell,
    pub fov: FovTensor,
    /// Expert action from this timestep to the next.
    pub label: Action,
    /// In-neighbors, nearest first.
    pub neighbors: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphExample {
    pub map_name: String,
    pub timestep: u32,
    pub agents: Vec<AgentRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureParams {
    pub radius: usize,
    pub max_neighbors: usize,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self {
            radius: 4,
            max_neighbors: 5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetStats {
    pub graphs: u64,
    pub agent_records: u64,
    /// Label counts in action index order.
    pub label_histogram: [u64; Action::COUNT],
}

impl DatasetStats {
    pub fn add(&mut self, graph: &GraphExample) {
        self.graphs += 1;
        self.agent_records += graph.agents.len() as u64;
        for a in &graph.agents {
            self.label_histogram[a.label.index()] += 1;
        }
    }

    pub fn label_fraction(&self, action: Action) -> f64 {
        if self.agent_records == 0 {
            return 0.0;
        }
        self.label_histogram[action.index()] as f64 / self.agent_records as f64
    }
}

/// Labeled graphs for timesteps `0..makespan` of an expert solution.
pub fn solution_examples(scen: &Scenario, sol: &Solution, params: FeatureParams) -> Vec<GraphExample> {
    let map = scen.map();
    (0..sol.makespan())
        .map(|t| {
            let positions = sol.positions_at(t);
            let occupancy = Occupancy::new(map, &positions);
            let graph = build_graph(map, &positions, params.radius, params.max_neighbors);
            let agents = graph
                .into_iter()
                .enumerate()
                .map(|(i, neighbors)| AgentRecord {
                    position: positions[i],
                    goal: scen.agents()[i].goal,
                    fov: extract_fov(map, &occupancy, positions[i], scen.table(i), params.radius),
                    label: sol.action_at(i, t).expect("validated solution"),
                    neighbors,
                })
                .collect();
            GraphExample {
                map_name: map.name().to_string(),
                timestep: t as u32,
                agents,
            }
        })
        .collect()
}

/// Streams graphs to a dataset file. The graph count is fixed up front.
pub struct DatasetWriter<W: Write> {
    out: W,
    params: FeatureParams,
    expected: u64,
    written: u64,
}

impl<W: Write> DatasetWriter<W> {
    /// Fails without writing if `max_neighbors` does not fit the one-byte
    /// neighbor count.
    pub fn new(mut out: W, params: FeatureParams, graph_count: u64) -> io::Result<Self> {
        if params.max_neighbors > u8::MAX as usize {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                format!("at most 255 neighbors per agent, got {}", params.max_neighbors),
            ));
        }
        out.write_all(DATASET_MAGIC)?;
        out.write_u32::<LE>(DATASET_VERSION)?;
        out.write_u32::<LE>(params.radius as u32)?;
        out.write_u32::<LE>(params.max_neighbors as u32)?;
        out.write_u64::<LE>(graph_count)?;
        Ok(Self {
            out,
            params,
            expected: graph_count,
            written: 0,
        })
    }

    pub fn write_graph(&mut self, g: &GraphExample) -> io::Result<()> {
        assert!(self.written < self.expected, "more graphs than declared");
        let w = &mut self.out;
        w.write_u32::<LE>(g.agents.len() as u32)?;
        w.write_u32::<LE>(g.timestep)?;
        for a in &g.agents {
            assert_eq!(a.fov.radius, self.params.radius, "radius mismatch");
            w.write_i32::<LE>(a.position.row)?;
            w.write_i32::<LE>(a.position.col)?;
            w.write_i32::<LE>(a.goal.row)?;
            w.write_i32::<LE>(a.goal.col)?;
            w.write_u8(a.label as u8)?;
            w.write_u8(a.neighbors.len() as u8)?;
            for &n in &a.neighbors {
                w.write_u32::<LE>(n)?;
            }
            for channel in a.fov.channels() {
                for &v in channel {
                    w.write_f32::<LE>(v)?;
                }
            }
            for &v in &a.fov.greedy {
                w.write_f32::<LE>(v)?;
            }
        }
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> io::Result<W> {
        assert_eq!(self.written, self.expected, "fewer graphs than declared");
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Decoded dataset header plus graphs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub params: FeatureParams,
    pub graphs: Vec<GraphExample>,
}

pub fn read_dataset<R: Read>(mut input: R) -> Result<Dataset, DatasetError> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(|_| DatasetError::BadMagic)?;
    if &magic != DATASET_MAGIC {
        return Err(DatasetError::BadMagic);
    }
    let version = input.read_u32::<LE>()?;
    if version != DATASET_VERSION {
        return Err(DatasetError::Version(version));
    }
    let radius = input.read_u32::<LE>()? as usize;
    let max_neighbors = input.read_u32::<LE>()? as usize;
    let count = input.read_u64::<LE>()?;
    let d = fov_size(radius);
    let mut graphs = Vec::with_capacity(count.min(1 << 16) as usize);
    for gi in 0..count {
        let eof = |_: io::Error| DatasetError::Eof(gi);
        let n = input.read_u32::<LE>().map_err(eof)?;
        let timestep = input.read_u32::<LE>().map_err(eof)?;
        let mut agents = Vec::with_capacity(n.min(1 << 16) as usize);
        for _ in 0..n {
            let mut ints = [0i32; 4];
            input.read_i32_into::<LE>(&mut ints).map_err(eof)?;
            let label_byte = input.read_u8().map_err(eof)?;
            let label = Action::from_index(label_byte as usize).ok_or(DatasetError::Corrupt {
                graph: gi,
                reason: format!("label {label_byte}"),
            })?;
            let k = input.read_u8().map_err(eof)? as usize;
            let mut neighbors = vec![0u32; k];
            input.read_u32_into::<LE>(&mut neighbors).map_err(eof)?;
            let mut channels = vec![0f32; 3 * d * d];
            input.read_f32_into::<LE>(&mut channels).map_err(eof)?;
            let mut greedy = [0f32; Action::COUNT];
            input.read_f32_into::<LE>(&mut greedy).map_err(eof)?;
            let occupancy = channels.split_off(2 * d * d);
            let heuristic = channels.split_off(d * d);
            agents.push(AgentRecord {
                position: Cell::new(ints[0], ints[1]),
                goal: Cell::new(ints[2], ints[3]),
                fov: FovTensor {
                    radius,
                    obstacle: channels,
                    heuristic,
                    occupancy,
                    greedy,
                },
                label,
                neighbors,
            });
        }
        graphs.push(GraphExample {
            map_name: String::new(),
            timestep,
            agents,
        });
    }
    Ok(Dataset {
        params: FeatureParams {
            radius,
            max_neighbors,
        },
        graphs,
    })
}

pub fn read_dataset_file(path: &Path) -> Result<Dataset, DatasetError> {
    read_dataset(BufReader::new(File::open(path)?))
}

/// Writes every timestep of every solution to `out`.
///
/// Solutions are validated first; features are built in parallel and
/// written in input order.
pub fn export_dataset<W: Write>(
    solutions: &[(Scenario, Solution)],
    params: FeatureParams,
    out: W,
) -> Result<DatasetStats, DatasetError> {
    for (scen, sol) in solutions {
        let invalid = |reason: String| DatasetError::InvalidSolution {
            map: scen.map().name().to_string(),
            reason,
        };
        let report = validate_solution(sol, scen).map_err(|e| invalid(e.to_string()))?;
        if !report.is_valid_solution() {
            return Err(invalid(format!(
                "{} vertex / {} edge collisions, all at goal: {}",
                report.vertex_collisions.len(),
                report.edge_collisions.len(),
                report.all_at_goal
            )));
        }
    }
    let total: u64 = solutions.iter().map(|(_, s)| s.makespan() as u64).sum();
    let mut writer = DatasetWriter::new(out, params, total)?;
    let mut stats = DatasetStats::default();
    // Bounded batches keep memory flat on large corpora.
    for batch in solutions.chunks(rayon::current_num_threads().max(1) * 2) {
        let built: Vec<Vec<GraphExample>> = batch
            .par_iter()
            .map(|(scen, sol)| solution_examples(scen, sol, params))
            .collect();
        for g in built.iter().flatten() {
            writer.write_graph(g)?;
            stats.add(g);
        }
    }
    writer.finish()?;
    Ok(stats)
}

pub fn export_dataset_file(
    solutions: &[(Scenario, Solution)],
    params: FeatureParams,
    path: &Path,
) -> Result<DatasetStats, DatasetError> {
    export_dataset(solutions, params, BufWriter::new(File::create(path)?))
}
