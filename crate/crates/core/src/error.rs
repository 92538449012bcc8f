use std::io;

use thiserror::Error;

use crate::grid::Cell;

/// Malformed `.map` or `.scen` text.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("agent count must be positive")]
    NoAgents,
    #[error("requested {requested} agents but the scenario has {available}")]
    TooManyAgents { requested: usize, available: usize },
    #[error("agent {agent} {which} {cell} is out of bounds")]
    OutOfBounds {
        agent: usize,
        which: &'static str,
        cell: Cell,
    },
    #[error("agent {agent} {which} blocked")]
    Blocked { agent: usize, which: &'static str },
    #[error("agent {agent} {which} {cell} duplicates agent {other}")]
    Duplicate {
        agent: usize,
        other: usize,
        which: &'static str,
        cell: Cell,
    },
    #[error("agent {agent} goal unreachable from start")]
    Unreachable { agent: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HeuristicError {
    #[error("goal {0} is out of bounds")]
    OutOfBounds(Cell),
    #[error("goal {0} is blocked")]
    Blocked(Cell),
    #[error("cell {0} cannot reach the goal")]
    Unreachable(Cell),
}

/// A path that is not a legal sequence of moves.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolutionError {
    #[error("solution has {found} paths, scenario has {expected} agents")]
    AgentCount { expected: usize, found: usize },
    #[error("agent {agent} path has length {found}, expected {expected}")]
    Length {
        agent: usize,
        expected: usize,
        found: usize,
    },
    #[error("agent {agent} starts at {found}, expected {expected}")]
    WrongStart {
        agent: usize,
        expected: Cell,
        found: Cell,
    },
    #[error("agent {agent} at t={t}: illegal move {from} -> {to}")]
    IllegalMove {
        agent: usize,
        t: usize,
        from: Cell,
        to: Cell,
    },
    #[error("agent {agent} at t={t}: cell {cell} is blocked or off the map")]
    NotFree { agent: usize, t: usize, cell: Cell },
    #[error("empty solution")]
    Empty,
    #[error("solution file line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic, not a weights file")]
    BadMagic,
    #[error("unsupported weights version {0}")]
    Version(u32),
    #[error("unexpected EOF in {0}")]
    Eof(String),
    #[error("missing tensor {0}")]
    Missing(String),
    #[error("tensor {name}: expected shape {expected:?}, found {found:?}")]
    Shape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("tensor name is not utf-8")]
    Name,
    #[error("graph does not match weights: {0}")]
    Input(String),
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic, not a dataset file")]
    BadMagic,
    #[error("unsupported dataset version {0}")]
    Version(u32),
    #[error("unexpected EOF in graph {0}")]
    Eof(u64),
    #[error("invalid solution for map {map}: {reason}")]
    InvalidSolution { map: String, reason: String },
    #[error("corrupt record in graph {graph}: {reason}")]
    Corrupt { graph: u64, reason: String },
}
