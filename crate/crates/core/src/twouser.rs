//! Two users sharing one edge server: `K0` common codebooks serve multicast
//! transmissions (both users asked for the same item) and either user's
//! unicast traffic; `K1`/`K2` exclusive codebooks serve one user only.

use std::f64::consts::LOG2_E;
use std::io::Read;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{
    d2_draw, lloyd, Block, BlockModel, EmptyPolicy, Init, LloydOutcome, StopRule,
};
use crate::discrete::{
    dca_run, design_dca, design_kmeanspp, round_and_polish, DcProblem, DcaDiagnostics,
    DesignMethod, DesignOptions,
};
use crate::error::{Error, Result};
use crate::info::{entropy, kl_nats_pre, log_table, neg_entropy_nats};
use crate::model::{Codebook, DiscretePreference, Spv, PROB_TOL};
use crate::rng::{derive_seed, stream_rng};

/// `F[i][j]`: probability that user 1 requests item `i` while user 2 requests item `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPreference {
    j: usize,
    f: Vec<f64>,
}

impl JointPreference {
    /// `f` is row-major `J x J`.
    pub fn new(j: usize, f: Vec<f64>) -> Result<Self> {
        if j == 0 || f.len() != j * j {
            return Err(Error::DimensionMismatch {
                expected: j * j,
                actual: f.len(),
            });
        }
        if f.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidPreference(
                "joint probabilities must be nonnegative".into(),
            ));
        }
        let sum: f64 = f.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidPreference(format!(
                "joint probabilities sum to {sum}"
            )));
        }
        Ok(JointPreference { j, f })
    }

    /// Dense comma-separated matrix, one row per line.
    pub fn from_csv<R: Read>(mut reader: R) -> Result<Self> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        let mut rows = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let row = line
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::InvalidPreference(format!("{v:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        let j = rows.len();
        if rows.iter().any(|r| r.len() != j) {
            return Err(Error::InvalidPreference(
                "joint preference matrix must be square".into(),
            ));
        }
        JointPreference::new(j, rows.concat())
    }

    pub fn items(&self) -> usize {
        self.j
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.f[i * self.j + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.j).map(|i| self.get(i, i)).sum()
    }

    /// Per-item multicast weight `f_jj`.
    pub fn diag(&self) -> Vec<f64> {
        (0..self.j).map(|i| self.get(i, i)).collect()
    }

    /// `sum_{i != j} f_{j,i}`: user 1 asks for `j`, user 2 for something else.
    pub fn w1(&self) -> Vec<f64> {
        (0..self.j)
            .map(|a| {
                (0..self.j)
                    .filter(|&b| b != a)
                    .map(|b| self.get(a, b))
                    .sum()
            })
            .collect()
    }

    /// `sum_{i != j} f_{i,j}`.
    pub fn w2(&self) -> Vec<f64> {
        (0..self.j)
            .map(|a| {
                (0..self.j)
                    .filter(|&b| b != a)
                    .map(|b| self.get(b, a))
                    .sum()
            })
            .collect()
    }
}

/// Diagonal `alpha / J`, off-diagonal `(1 - alpha) / (J (J - 1))`.
pub fn joint_pref_alpha(j: usize, alpha: f64) -> Result<JointPreference> {
    if j < 2 {
        return Err(Error::InvalidArgument("need at least 2 items".into()));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!(
            "alpha {alpha} outside [0, 1]"
        )));
    }
    let on = alpha / j as f64;
    let off = (1.0 - alpha) / (j * (j - 1)) as f64;
    let f = (0..j * j)
        .map(|m| if m / j == m % j { on } else { off })
        .collect();
    JointPreference::new(j, f)
}

/// Codebooks available to user 1 (`K0 + K1`) and user 2 (`K0 + K2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoUserBudget {
    pub k1_total: usize,
    pub k2_total: usize,
}

impl TwoUserBudget {
    pub fn new(k1_total: usize, k2_total: usize) -> Result<Self> {
        if k1_total == 0 || k2_total == 0 {
            return Err(Error::InvalidArgument(
                "both budgets must be positive".into(),
            ));
        }
        Ok(TwoUserBudget { k1_total, k2_total })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoUserDesign {
    pub common: Vec<Codebook>,
    pub excl1: Vec<Codebook>,
    pub excl2: Vec<Codebook>,
}

impl TwoUserDesign {
    pub fn k0(&self) -> usize {
        self.common.len()
    }

    pub fn n(&self) -> usize {
        self.common
            .iter()
            .chain(&self.excl1)
            .chain(&self.excl2)
            .map(Codebook::len)
            .next()
            .unwrap_or(0)
    }

    pub fn satisfies(&self, budget: &TwoUserBudget) -> bool {
        self.common.len() + self.excl1.len() == budget.k1_total
            && self.common.len() + self.excl2.len() == budget.k2_total
    }
}

fn min_div(p: &[f64], ne: f64, logs: &[&Vec<f64>]) -> f64 {
    logs.iter()
        .map(|lq| kl_nats_pre(p, ne, lq))
        .fold(f64::INFINITY, f64::min)
}

/// Expected bits to serve one request pair with `len`-symbol items.
///
/// Multicast requests (both users want item `j`) are sent once with the best
/// common codebook; every other request is sent to its user with the best
/// codebook that user holds. Without common codebooks a multicast request is
/// sent separately to each user.
pub fn two_user_cost(
    spvs: &[Spv],
    f: &JointPreference,
    design: &TwoUserDesign,
    len: usize,
) -> Result<f64> {
    if spvs.len() != f.items() {
        return Err(Error::DimensionMismatch {
            expected: f.items(),
            actual: spvs.len(),
        });
    }
    let n = spvs.first().map(Spv::len).unwrap_or(0);
    if let Some(bad) = design
        .common
        .iter()
        .chain(&design.excl1)
        .chain(&design.excl2)
        .find(|q| q.len() != n)
    {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: bad.len(),
        });
    }
    let logs0: Vec<Vec<f64>> = design.common.iter().map(|q| log_table(q.q())).collect();
    let logs1: Vec<Vec<f64>> = design.excl1.iter().map(|q| log_table(q.q())).collect();
    let logs2: Vec<Vec<f64>> = design.excl2.iter().map(|q| log_table(q.q())).collect();
    let set0: Vec<&Vec<f64>> = logs0.iter().collect();
    let set1: Vec<&Vec<f64>> = logs0.iter().chain(&logs1).collect();
    let set2: Vec<&Vec<f64>> = logs0.iter().chain(&logs2).collect();
    let (d, w1, w2) = (f.diag(), f.w1(), f.w2());
    let mut total = 0.0;
    for (j, p) in spvs.iter().enumerate() {
        let pr = p.probs();
        let ne = neg_entropy_nats(pr);
        let h = entropy(p);
        let mut term = |w: f64, set: &[&Vec<f64>]| -> Result<()> {
            if w > 0.0 {
                let dv = min_div(pr, ne, set);
                if dv.is_infinite() {
                    return Err(Error::AllInfinite { item: j });
                }
                total += w * (h + dv * LOG2_E);
            }
            Ok(())
        };
        if set0.is_empty() {
            term(d[j], &set1)?;
            term(d[j], &set2)?;
        } else {
            term(d[j], &set0)?;
        }
        term(w1[j], &set1)?;
        term(w2[j], &set2)?;
    }
    Ok(len as f64 * total)
}

/// A two-user design with its per-symbol cost.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoUserOutcome {
    pub design: TwoUserDesign,
    /// Expected bits per symbol position of the request pair; multiply by `L`
    /// for bits per request pair.
    pub objective_bits: f64,
    /// Best objective found for every `K0 = 0, 1, ..., min(K1t, K2t)`.
    pub per_k0: Vec<f64>,
    /// Diagnostics of every DC run performed (empty for k-means++).
    pub dca_runs: Vec<DcaDiagnostics>,
}

fn validate(spvs: &[Spv], f: &JointPreference, opts: &DesignOptions) -> Result<()> {
    opts.validate()?;
    if spvs.len() != f.items() {
        return Err(Error::DimensionMismatch {
            expected: f.items(),
            actual: spvs.len(),
        });
    }
    let n = spvs[0].len();
    if let Some(bad) = spvs.iter().find(|p| p.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: bad.len(),
        });
    }
    Ok(())
}

/// Block model for `K0 >= 1`: clusters `[common | excl1 | excl2]`, three blocks
/// per item (multicast, user 1 only, user 2 only).
fn two_user_model(
    spvs: &[Spv],
    f: &JointPreference,
    k0: usize,
    k1: usize,
    k2: usize,
) -> BlockModel {
    let refs: Vec<&[f64]> = spvs.iter().map(|p| p.probs()).collect();
    let common: Vec<usize> = (0..k0).collect();
    let e1: Vec<usize> = (0..k0 + k1).collect();
    let e2: Vec<usize> = (0..k0).chain(k0 + k1..k0 + k1 + k2).collect();
    let (d, w1, w2) = (f.diag(), f.w1(), f.w2());
    let mut blocks = Vec::with_capacity(3 * spvs.len());
    for j in 0..spvs.len() {
        blocks.push(Block {
            item: j,
            weight: d[j],
            eligible: common.clone(),
        });
        blocks.push(Block {
            item: j,
            weight: w1[j],
            eligible: e1.clone(),
        });
        blocks.push(Block {
            item: j,
            weight: w2[j],
            eligible: e2.clone(),
        });
    }
    BlockModel::new(refs[0].len(), k0 + k1 + k2, &refs, blocks)
}

fn seed_two_user<R: Rng + ?Sized>(
    model: &BlockModel,
    f: &JointPreference,
    k0: usize,
    k1: usize,
    k2: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let (d, w1, w2) = (f.diag(), f.w1(), f.w2());
    let all: Vec<f64> = (0..d.len()).map(|j| d[j] + w1[j] + w2[j]).collect();
    let mut common: Vec<Vec<f64>> = Vec::with_capacity(k0);
    while common.len() < k0 {
        let pick = d2_draw(model, &all, &common, rng).unwrap_or(0);
        common.push(model.point(pick).to_vec());
    }
    let mut exclusive = |w: &[f64], k: usize| -> Vec<Vec<f64>> {
        let mut chosen: Vec<Vec<f64>> = Vec::with_capacity(k);
        while chosen.len() < k {
            let existing: Vec<Vec<f64>> = common.iter().chain(&chosen).cloned().collect();
            let c = d2_draw(model, w, &existing, rng)
                .or_else(|| d2_draw(model, &all, &existing, rng))
                .map(|j| model.point(j).to_vec())
                .unwrap_or_else(|| existing[0].clone());
            chosen.push(c);
        }
        chosen
    };
    let e1 = exclusive(&w1, k1);
    let e2 = exclusive(&w2, k2);
    common.into_iter().chain(e1).chain(e2).collect()
}

fn design_from_centers(centers: Vec<Vec<f64>>, k0: usize, k1: usize) -> Result<TwoUserDesign> {
    let mut books = centers
        .into_iter()
        .map(Codebook::new)
        .collect::<Result<Vec<_>>>()?;
    let excl2 = books.split_off(k0 + k1);
    let excl1 = books.split_off(k0);
    Ok(TwoUserDesign {
        common: books,
        excl1,
        excl2,
    })
}

fn marginals(
    spvs: &[Spv],
    f: &JointPreference,
) -> Result<(DiscretePreference, DiscretePreference)> {
    let (d, w1, w2) = (f.diag(), f.w1(), f.w2());
    let row: Vec<f64> = (0..d.len()).map(|j| d[j] + w1[j]).collect();
    let col: Vec<f64> = (0..d.len()).map(|j| d[j] + w2[j]).collect();
    Ok((
        DiscretePreference::from_weights(spvs.to_vec(), row)?,
        DiscretePreference::from_weights(spvs.to_vec(), col)?,
    ))
}

/// The `K0 = 0` design: each user gets an independent single-user design on
/// its own request marginal.
pub fn design_independent(
    spvs: &[Spv],
    f: &JointPreference,
    budget: &TwoUserBudget,
    method: DesignMethod,
    opts: &DesignOptions,
) -> Result<(TwoUserDesign, Vec<DcaDiagnostics>)> {
    let (m1, m2) = marginals(spvs, f)?;
    let run = |pref: &DiscretePreference, k: usize| match method {
        DesignMethod::Kmeanspp => design_kmeanspp(pref, k, opts),
        DesignMethod::Dca => design_dca(pref, k, opts),
    };
    let r1 = run(&m1, budget.k1_total)?;
    let r2 = run(&m2, budget.k2_total)?;
    let mut diags = r1.dca_runs.clone();
    diags.extend(r2.dca_runs.iter().cloned());
    let design = TwoUserDesign {
        common: Vec::new(),
        excl1: r1.set.codebooks().to_vec(),
        excl2: r2.set.codebooks().to_vec(),
    };
    Ok((design, diags))
}

fn search_k0<F>(
    spvs: &[Spv],
    f: &JointPreference,
    budget: &TwoUserBudget,
    method: DesignMethod,
    opts: &DesignOptions,
    per_k0: F,
) -> Result<TwoUserOutcome>
where
    F: Fn(usize) -> Result<(TwoUserDesign, Vec<DcaDiagnostics>)> + Sync,
{
    validate(spvs, f, opts)?;
    let max_k0 = budget.k1_total.min(budget.k2_total);
    let candidates: Vec<Result<(TwoUserDesign, Vec<DcaDiagnostics>)>> = (0..=max_k0)
        .into_par_iter()
        .map(|k0| {
            if k0 == 0 {
                design_independent(spvs, f, budget, method, opts)
            } else {
                per_k0(k0)
            }
        })
        .collect();
    let mut best: Option<(TwoUserDesign, f64)> = None;
    let mut costs = Vec::with_capacity(candidates.len());
    let mut dca_runs = Vec::new();
    for cand in candidates {
        let (design, diags) = cand?;
        let cost = two_user_cost(spvs, f, &design, 1)?;
        costs.push(cost);
        dca_runs.extend(diags);
        if best.as_ref().is_none_or(|(_, c)| cost < *c) {
            best = Some((design, cost));
        }
    }
    let (design, objective_bits) = best.expect("K0 = 0 is always evaluated");
    Ok(TwoUserOutcome {
        design,
        objective_bits,
        per_k0: costs,
        dca_runs,
    })
}

fn restart_seed(opts: &DesignOptions, k0: usize) -> u64 {
    derive_seed(opts.seed, 0x2000 + k0 as u64)
}

fn best_lloyd(outcomes: Vec<LloydOutcome>) -> LloydOutcome {
    let mut best: Option<LloydOutcome> = None;
    for out in outcomes {
        if best
            .as_ref()
            .is_none_or(|b| out.objective_nats < b.objective_nats)
        {
            best = Some(out);
        }
    }
    best.expect("at least one restart")
}

/// Two-user k-means++ design: for every `K0`, seeded alternating subset and
/// center updates (best of `opts.restarts`); returns the cheapest `K0`, ties
/// to the smaller.
pub fn design_twouser_kmeanspp(
    spvs: &[Spv],
    f: &JointPreference,
    budget: &TwoUserBudget,
    opts: &DesignOptions,
) -> Result<TwoUserOutcome> {
    search_k0(spvs, f, budget, DesignMethod::Kmeanspp, opts, |k0| {
        let (k1, k2) = (budget.k1_total - k0, budget.k2_total - k0);
        let model = two_user_model(spvs, f, k0, k1, k2);
        let seed = restart_seed(opts, k0);
        let runs: Vec<LloydOutcome> = (0..opts.restarts)
            .into_par_iter()
            .map(|restart| {
                let mut rng = stream_rng(seed, restart as u64);
                let centers = seed_two_user(&model, f, k0, k1, k2, &mut rng);
                lloyd(
                    &model,
                    Init::Centers(centers),
                    EmptyPolicy::Retain,
                    StopRule::FixedPoint,
                    opts.max_iters,
                )
            })
            .collect();
        Ok((
            design_from_centers(best_lloyd(runs).centers, k0, k1)?,
            Vec::new(),
        ))
    })
}

/// Two-user DC-programming design: for every `K0`, DC iterations from random
/// soft assignments, hard rounding and polishing; returns the cheapest `K0`.
pub fn design_twouser_dca(
    spvs: &[Spv],
    f: &JointPreference,
    budget: &TwoUserBudget,
    opts: &DesignOptions,
) -> Result<TwoUserOutcome> {
    search_k0(spvs, f, budget, DesignMethod::Dca, opts, |k0| {
        let (k1, k2) = (budget.k1_total - k0, budget.k2_total - k0);
        let problem = DcProblem::new(two_user_model(spvs, f, k0, k1, k2));
        let seed = restart_seed(opts, k0);
        let runs: Vec<(LloydOutcome, DcaDiagnostics)> = (0..opts.restarts)
            .into_par_iter()
            .map(|restart| {
                let mut rng = stream_rng(seed, restart as u64);
                let run = dca_run(&problem, problem.random_r(&mut rng), opts);
                round_and_polish(&problem, &run, EmptyPolicy::Retain, opts.max_iters)
            })
            .collect();
        let diags = runs.iter().map(|(_, d)| d.clone()).collect();
        let best = best_lloyd(runs.into_iter().map(|(o, _)| o).collect());
        Ok((design_from_centers(best.centers, k0, k1)?, diags))
    })
}

/// Number of variables of the two-user DC program for a given split.
pub fn twouser_dc_dim(j: usize, n: usize, k0: usize, k1: usize, k2: usize) -> usize {
    (k0 + k1 + k2) * (n + 1) + j * (3 * k0 + k1 + k2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spv(v: &[f64]) -> Spv {
        Spv::new(v.to_vec()).unwrap()
    }

    #[test]
    fn alpha_matrix_examples() {
        let f = joint_pref_alpha(2, 0.5).unwrap();
        assert!((0..2).all(|i| (0..2).all(|j| (f.get(i, j) - 0.25).abs() < 1e-15)));
        let f = joint_pref_alpha(4, 1.0).unwrap();
        assert_eq!(f.get(1, 1), 0.25);
        assert_eq!(f.get(1, 2), 0.0);
        let f = joint_pref_alpha(5, 0.0).unwrap();
        assert_eq!(f.trace(), 0.0);
        assert!((f.get(0, 3) - 1.0 / 20.0).abs() < 1e-15);
        assert!(joint_pref_alpha(3, 1.5).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let f = JointPreference::from_csv("0.5,0.1\n0.1,0.3\n".as_bytes()).unwrap();
        assert_eq!(f.w1(), vec![0.1, 0.1]);
        assert!(JointPreference::from_csv("0.5,0.5\n".as_bytes()).is_err());
    }

    #[test]
    fn model_dimension_matches_formula() {
        let spvs = vec![spv(&[0.2, 0.8]), spv(&[0.6, 0.4]), spv(&[0.5, 0.5])];
        let f = joint_pref_alpha(3, 0.3).unwrap();
        let problem = DcProblem::new(two_user_model(&spvs, &f, 2, 1, 3));
        assert_eq!(problem.dim(), twouser_dc_dim(3, 2, 2, 1, 3));
    }
}
