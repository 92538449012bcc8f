use std::time::Duration;

use crate::scenario::Scenario;

/// Episode budget: a step limit derived from the instance plus an optional
/// wall-clock timeout.
#[derive(Debug, Clone, PartialEq)]
pub struct Limits {
    /// Step limit is `step_multiplier * max_i h_i(start_i)` ...
    pub step_multiplier: u32,
    /// ... but never below this floor.
    pub step_floor: usize,
    /// Absolute override of the derived step limit.
    pub max_steps: Option<usize>,
    pub timeout: Option<Duration>,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            step_multiplier: 3,
            step_floor: 64,
            max_steps: None,
            timeout: Some(Duration::from_secs(120)),
        }
    }
}

impl Limits {
    pub fn steps(max_steps: usize) -> Self {
        Self {
            max_steps: Some(max_steps),
            timeout: None,
            ..Self::default()
        }
    }

    pub fn step_limit(&self, scen: &Scenario) -> usize {
        self.max_steps.unwrap_or_else(|| {
            (self.step_multiplier as usize * scen.max_start_distance() as usize).max(self.step_floor)
        })
    }
}
