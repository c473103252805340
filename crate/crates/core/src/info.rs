//! Entropy, divergence and coding-cost primitives (all results in bits).
//!
//! Conventions: `0 * log 0 = 0`; a symbol with `p_n > 0` and `q_n = 0` makes the
//! divergence `+inf`, which callers treat as "this codebook cannot encode the item".

use std::f64::consts::LOG2_E;

use crate::error::{Error, Result};
use crate::model::{Codebook, CodebookSet, DiscretePreference, PartitionAssignment, Spv};

/// `sum_n p_n ln p_n` over the support of `p`.
pub(crate) fn neg_entropy_nats(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum()
}

/// Natural log of every entry; zero entries map to `-inf`.
pub(crate) fn log_table(q: &[f64]) -> Vec<f64> {
    q.iter()
        .map(|&x| if x > 0.0 { x.ln() } else { f64::NEG_INFINITY })
        .collect()
}

/// KL divergence in nats from precomputed `neg_entropy_nats(p)` and `log_table(q)`.
///
/// Every divergence in the crate goes through this function so that values for the
/// same pair are bitwise identical regardless of the call site.
#[inline]
pub(crate) fn kl_nats_pre(p: &[f64], neg_entropy: f64, log_q: &[f64]) -> f64 {
    let mut cross = 0.0;
    for (&pn, &lq) in p.iter().zip(log_q) {
        if pn > 0.0 {
            if lq == f64::NEG_INFINITY {
                return f64::INFINITY;
            }
            cross += pn * lq;
        }
    }
    (neg_entropy - cross).max(0.0)
}

pub(crate) fn kl_nats(p: &[f64], q: &[f64]) -> f64 {
    kl_nats_pre(p, neg_entropy_nats(p), &log_table(q))
}

/// Shannon entropy in bits per symbol.
pub fn entropy(p: &Spv) -> f64 {
    let h = -neg_entropy_nats(p.probs()) * LOG2_E;
    h.max(0.0)
}

/// `D(p || q)` in bits; `+inf` when `q` misses part of the support of `p`.
pub fn kl_divergence(p: &Spv, q: &Codebook) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            actual: q.len(),
        });
    }
    Ok(kl_nats(p.probs(), q.q()) * LOG2_E)
}

/// Bits needed for `len` symbols drawn from `p` under codebook `q`:
/// `len * sum_n p_n (-log2 q_n)`.
pub fn code_cost(p: &Spv, q: &Codebook, len: usize) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            actual: q.len(),
        });
    }
    let mut per_symbol = 0.0;
    for (&pn, &qn) in p.probs().iter().zip(q.q()) {
        if pn > 0.0 {
            if qn == 0.0 {
                return Ok(f64::INFINITY);
            }
            per_symbol -= pn * qn.log2();
        }
    }
    Ok(len as f64 * per_symbol)
}

/// Lowest-index codebook minimizing `D(p || q_k)`, with that divergence.
pub fn best_codebook(p: &Spv, set: &CodebookSet) -> Result<(usize, f64)> {
    if p.len() != set.n() {
        return Err(Error::DimensionMismatch {
            expected: set.n(),
            actual: p.len(),
        });
    }
    let ne = neg_entropy_nats(p.probs());
    let mut best = (0, f64::INFINITY);
    for (k, q) in set.codebooks().iter().enumerate() {
        let d = kl_nats_pre(p.probs(), ne, &log_table(q.q()));
        if d < best.1 {
            best = (k, d);
        }
    }
    if best.1.is_infinite() {
        return Err(Error::AllInfinite { item: 0 });
    }
    Ok((best.0, best.1 * LOG2_E))
}

/// `sum_j f_j min_k D(p_j || q_k)` in bits per symbol, with the argmin partition.
pub fn divergence_objective(
    pref: &DiscretePreference,
    set: &CodebookSet,
) -> Result<(f64, PartitionAssignment)> {
    if pref.n() != set.n() {
        return Err(Error::DimensionMismatch {
            expected: set.n(),
            actual: pref.n(),
        });
    }
    let logs: Vec<Vec<f64>> = set.codebooks().iter().map(|q| log_table(q.q())).collect();
    let mut owner = Vec::with_capacity(pref.len());
    let mut total = 0.0;
    for (j, (p, &f)) in pref.spvs().iter().zip(pref.probs()).enumerate() {
        let ne = neg_entropy_nats(p.probs());
        let mut best = (0, f64::INFINITY);
        for (k, lq) in logs.iter().enumerate() {
            let d = kl_nats_pre(p.probs(), ne, lq);
            if d < best.1 {
                best = (k, d);
            }
        }
        if best.1.is_infinite() {
            return Err(Error::AllInfinite { item: j });
        }
        owner.push(best.0);
        total += f * best.1;
    }
    Ok((total * LOG2_E, PartitionAssignment::new(owner)))
}

/// Expected bits per requested item: `L * sum_j f_j (H(p_j) + min_k D(p_j || q_k))`.
pub fn expected_cost(
    pref: &DiscretePreference,
    set: &CodebookSet,
    len: usize,
) -> Result<(f64, PartitionAssignment)> {
    let (div, assignment) = divergence_objective(pref, set)?;
    Ok((len as f64 * (mean_entropy(pref) + div), assignment))
}

/// `sum_j f_j H(p_j)` in bits.
pub fn mean_entropy(pref: &DiscretePreference) -> f64 {
    pref.spvs()
        .iter()
        .zip(pref.probs())
        .map(|(p, f)| f * entropy(p))
        .sum()
}

/// Divergence objective of an explicit (not necessarily argmin) partition.
pub fn partition_objective(
    pref: &DiscretePreference,
    set: &CodebookSet,
    assignment: &PartitionAssignment,
) -> Result<f64> {
    if assignment.owner.len() != pref.len() {
        return Err(Error::DimensionMismatch {
            expected: pref.len(),
            actual: assignment.owner.len(),
        });
    }
    let mut total = 0.0;
    for ((p, &f), &k) in pref.spvs().iter().zip(pref.probs()).zip(&assignment.owner) {
        if k >= set.k() {
            return Err(Error::InvalidArgument(format!("owner {k} out of range")));
        }
        if f > 0.0 {
            total += f * kl_nats(p.probs(), set.get(k).q());
        }
    }
    Ok(total * LOG2_E)
}
