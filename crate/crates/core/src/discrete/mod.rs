//! Codebook design for discrete preferences: KL k-means++ and the DC-programming
//! pipeline.

mod dc;
mod kmeans;

pub use dc::{
    convex_subproblem, dc_objective, dc_transform, design_dca, design_dca_from, DcLayout,
    DcProblem, DcaDiagnostics, SoftAssignment, SubproblemOutcome,
};
pub use kmeans::{
    center_update, design_kmeanspp, design_kmeanspp_from, kmeanspp_extend, kmeanspp_seed,
};

pub(crate) use dc::{dca_run, round_and_polish};
pub(crate) use kmeans::seed_centers;

use std::f64::consts::LOG2_E;

use serde::{Deserialize, Serialize};

use crate::cluster::{BlockModel, LloydOutcome};
use crate::error::{Error, Result};
use crate::model::{Codebook, CodebookSet, DiscretePreference, PartitionAssignment};

/// Knobs shared by every designer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignOptions {
    pub restarts: usize,
    pub max_iters: usize,
    /// Outer stopping tolerance of the DC iteration (bits per symbol); also the
    /// center-shift tolerance of the sample-average iteration.
    pub epsilon: f64,
    pub subproblem_tol: f64,
    pub subproblem_max_iters: usize,
    pub seed: u64,
}

impl Default for DesignOptions {
    fn default() -> Self {
        DesignOptions {
            restarts: 10,
            max_iters: 1000,
            epsilon: 1e-6,
            subproblem_tol: 1e-8,
            subproblem_max_iters: 10_000,
            seed: 42,
        }
    }
}

impl DesignOptions {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_iters == 0 || self.subproblem_max_iters == 0 {
            return Err(Error::InvalidArgument(
                "restarts and iteration limits must be positive".into(),
            ));
        }
        if !(self.epsilon > 0.0 && self.subproblem_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        DesignOptions { seed, ..self }
    }

    pub fn with_restarts(self, restarts: usize) -> Self {
        DesignOptions { restarts, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignResult {
    pub set: CodebookSet,
    pub assignment: PartitionAssignment,
    /// `sum_j f_j min_k D(p_j || q_k)` in bits per symbol.
    pub objective: f64,
    pub iterations: usize,
    /// Objective after every step of the winning run (bits per symbol).
    pub trace: Vec<f64>,
    /// Index of the winning restart (`usize::MAX` for a warm-started run).
    pub restart: usize,
    /// Diagnostics of every DC restart, in restart order (empty for k-means++).
    pub dca_runs: Vec<DcaDiagnostics>,
}

/// Which discrete designer to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignMethod {
    Kmeanspp,
    Dca,
}

impl DesignMethod {
    pub fn name(self) -> &'static str {
        match self {
            DesignMethod::Kmeanspp => "kmeanspp",
            DesignMethod::Dca => "dca",
        }
    }
}

impl std::str::FromStr for DesignMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kmeanspp" => Ok(DesignMethod::Kmeanspp),
            "dca" => Ok(DesignMethod::Dca),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

/// Restart index recorded for runs started from a caller-supplied design.
pub const WARM_START: usize = usize::MAX;

pub(crate) fn validate_k(pref: &DiscretePreference, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("K must be positive".into()));
    }
    let _ = pref;
    Ok(())
}

pub(crate) fn single_model(pref: &DiscretePreference, k: usize) -> BlockModel {
    let refs: Vec<&[f64]> = pref.spvs().iter().map(|p| p.probs()).collect();
    BlockModel::single(&refs, pref.probs(), k)
}

pub(crate) fn result_from_lloyd(
    out: LloydOutcome,
    mut trace: Vec<f64>,
    iterations: usize,
    restart: usize,
    dca: Option<DcaDiagnostics>,
) -> Result<DesignResult> {
    trace.extend_from_slice(&out.trace_bits);
    let set = CodebookSet::new(
        out.centers
            .into_iter()
            .map(Codebook::new)
            .collect::<Result<Vec<_>>>()?,
    )?;
    Ok(DesignResult {
        set,
        assignment: PartitionAssignment::new(out.owner),
        objective: out.objective_nats * LOG2_E,
        iterations,
        trace,
        restart,
        dca_runs: dca.into_iter().collect(),
    })
}

/// Smallest objective wins; ties go to the earlier candidate.
pub(crate) fn pick_best(runs: Vec<Result<DesignResult>>) -> Result<DesignResult> {
    let mut best: Option<DesignResult> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().is_none_or(|b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("no restarts".into()))
}
