use std::fmt;
use std::str::FromStr;

use anyhow::Result;
use serde::{Deserialize, Serialize};

/// Rejected user input (exit code 2).
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct Invalid(pub String);

macro_rules! invalid {
    ($($arg:tt)*) => {
        return Err(crate::config::Invalid(format!($($arg)*)).into())
    };
}
pub(crate) use invalid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Fig1,
    Continuous,
    Fig4,
    Demo,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Fig1 => "fig1",
            Scenario::Continuous => "continuous",
            Scenario::Fig4 => "fig4",
            Scenario::Demo => "demo",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "fig1" => Scenario::Fig1,
            "continuous" => Scenario::Continuous,
            "fig4" => Scenario::Fig4,
            "demo" => Scenario::Demo,
            other => {
                invalid!("unknown scenario {other:?} (expected fig1, continuous, fig4 or demo)")
            }
        })
    }
}

/// Parameters of one experiment. Fields a scenario does not use are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    /// Alphabet sizes.
    pub ns: Vec<usize>,
    /// Codebook counts.
    pub ks: Vec<usize>,
    /// Number of content items `J`.
    pub items: usize,
    /// Symbols per content item `L`.
    pub len: usize,
    /// Design sample size `S` (continuous).
    pub samples: usize,
    /// Held-out evaluation sample size (continuous).
    pub eval_samples: usize,
    /// Number of consecutive seeds averaged (continuous).
    pub seeds: usize,
    /// Grid step of the exhaustive baseline (continuous).
    pub grid_step: f64,
    /// Trace values of the joint preference matrix (two-user).
    pub alphas: Vec<f64>,
    /// Per-user codebook budgets `(K1t, K2t)` (two-user).
    pub budget: (usize, usize),
    pub seed: u64,
    pub restarts: usize,
    /// Fill the `runtime_ms` column (makes output nondeterministic).
    pub timing: bool,
}

impl ScenarioConfig {
    pub fn defaults(scenario: Scenario) -> Self {
        let base = ScenarioConfig {
            scenario,
            ns: vec![3, 4, 5],
            ks: (1..=10).collect(),
            items: 1000,
            len: 20,
            samples: 1000,
            eval_samples: 100_000,
            seeds: 10,
            grid_step: 0.025,
            alphas: (0..=10).map(|i| i as f64 / 10.0).collect(),
            budget: (4, 4),
            seed: 42,
            restarts: 10,
            timing: false,
        };
        match scenario {
            Scenario::Continuous => ScenarioConfig {
                ns: vec![3],
                ks: vec![2],
                ..base
            },
            Scenario::Fig4 => ScenarioConfig {
                restarts: 5,
                ..base
            },
            Scenario::Fig1 | Scenario::Demo => base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ns.is_empty() || self.ks.is_empty() || self.alphas.is_empty() {
            invalid!("parameter grids must be nonempty");
        }
        if self.ns.iter().any(|&n| n < 2) {
            invalid!("alphabet sizes must be at least 2");
        }
        if self.ks.contains(&0) {
            invalid!("codebook counts must be positive");
        }
        if self.len == 0
            || self.items == 0
            || self.samples == 0
            || self.eval_samples == 0
            || self.seeds == 0
        {
            invalid!("L, J, S, evaluation size and seed count must be positive");
        }
        if self.restarts == 0 {
            invalid!("restarts must be positive");
        }
        if self.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            invalid!("alpha values must lie in [0, 1]");
        }
        if self.budget.0 == 0 || self.budget.1 == 0 {
            invalid!("budgets must be positive");
        }
        if !(self.grid_step > 0.0 && self.grid_step <= 0.5) {
            invalid!("grid step must lie in (0, 0.5]");
        }
        if self.scenario == Scenario::Continuous && self.ns.iter().any(|&n| n != 3) {
            // The radial density and the exhaustive grid are set up for N = 3.
            invalid!("the continuous scenario supports N = 3 only");
        }
        if self.scenario == Scenario::Fig4 && self.items < 2 {
            invalid!("the two-user scenario needs J >= 2");
        }
        Ok(())
    }
}
