use rand::Rng;
use rayon::prelude::*;

use super::{
    pick_best, result_from_lloyd, single_model, validate_k, DesignOptions, DesignResult, WARM_START,
};
use crate::cluster::{d2_draw, lloyd, BlockModel, EmptyPolicy, Init, StopRule};
use crate::error::{Error, Result};
use crate::model::{Codebook, CodebookSet, DiscretePreference};
use crate::rng::stream_rng;

/// Request-weighted mean of the member SPVs.
pub fn center_update(pref: &DiscretePreference, members: &[usize]) -> Result<Codebook> {
    let n = pref.n();
    let mut sum = vec![0.0; n];
    let mut mass = 0.0;
    for &j in members {
        if j >= pref.len() {
            return Err(Error::InvalidArgument(format!("item {j} out of range")));
        }
        let f = pref.probs()[j];
        for (s, &p) in sum.iter_mut().zip(pref.spvs()[j].probs()) {
            *s += f * p;
        }
        mass += f;
    }
    if !(mass > 0.0) {
        return Err(Error::EmptyCluster);
    }
    Codebook::new(sum.into_iter().map(|s| s / mass).collect())
}

/// Draws `k` centers, returning whether the draw ran out of candidates (in which
/// case the tail duplicates earlier centers).
pub(crate) fn seed_centers<R: Rng + ?Sized>(
    model: &BlockModel,
    weights: &[f64],
    mut centers: Vec<Vec<f64>>,
    k: usize,
    rng: &mut R,
) -> (Vec<Vec<f64>>, bool) {
    let mut degenerate = false;
    while centers.len() < k {
        match d2_draw(model, weights, &centers, rng) {
            Some(j) => centers.push(model.point(j).to_vec()),
            None => {
                degenerate = true;
                let c = centers[centers.len() % centers.len().max(1)].clone();
                centers.push(c);
            }
        }
    }
    (centers, degenerate)
}

/// k-means++ seeding under KL divergence: the first center is drawn with
/// probability `f_j`, each further one with probability proportional to
/// `f_j * G_j^2` (`G_j` = divergence to the closest chosen center).
///
/// Fails with `DegenerateSupport` when fewer than `K` candidates ever carry
/// positive seeding weight; the designers instead fall back to duplicating
/// centers.
pub fn kmeanspp_seed<R: Rng + ?Sized>(
    pref: &DiscretePreference,
    k: usize,
    rng: &mut R,
) -> Result<CodebookSet> {
    validate_k(pref, k)?;
    let model = single_model(pref, k);
    let (centers, degenerate) = seed_centers(&model, pref.probs(), Vec::new(), k, rng);
    if degenerate {
        let distinct = distinct_count(&centers);
        return Err(Error::DegenerateSupport { distinct, k });
    }
    CodebookSet::new(
        centers
            .into_iter()
            .map(Codebook::new)
            .collect::<Result<Vec<_>>>()?,
    )
}

fn distinct_count(centers: &[Vec<f64>]) -> usize {
    let mut seen: Vec<&Vec<f64>> = Vec::new();
    for c in centers {
        if !seen.contains(&c) {
            seen.push(c);
        }
    }
    seen.len()
}

/// Adds k-means++ draws to `base` until it holds `k` codebooks.
pub fn kmeanspp_extend<R: Rng + ?Sized>(
    pref: &DiscretePreference,
    base: &CodebookSet,
    k: usize,
    rng: &mut R,
) -> Result<CodebookSet> {
    if base.n() != pref.n() {
        return Err(Error::DimensionMismatch {
            expected: pref.n(),
            actual: base.n(),
        });
    }
    let model = single_model(pref, k.max(base.k()));
    let start = base.codebooks().iter().map(|q| q.q().to_vec()).collect();
    let (centers, _) = seed_centers(&model, pref.probs(), start, k, rng);
    CodebookSet::new(
        centers
            .into_iter()
            .map(Codebook::new)
            .collect::<Result<Vec<_>>>()?,
    )
}

/// Seeded KL k-means, best of `opts.restarts` runs.
pub fn design_kmeanspp(
    pref: &DiscretePreference,
    k: usize,
    opts: &DesignOptions,
) -> Result<DesignResult> {
    validate_k(pref, k)?;
    opts.validate()?;
    let model = single_model(pref, k);
    let runs: Vec<Result<DesignResult>> = (0..opts.restarts)
        .into_par_iter()
        .map(|restart| {
            let mut rng = stream_rng(opts.seed, restart as u64);
            let (centers, _) = seed_centers(&model, pref.probs(), Vec::new(), k, &mut rng);
            let out = lloyd(
                &model,
                Init::Centers(centers),
                EmptyPolicy::ReseedFarthest,
                StopRule::FixedPoint,
                opts.max_iters,
            );
            let iters = out.iterations;
            result_from_lloyd(out, Vec::new(), iters, restart, None)
        })
        .collect();
    pick_best(runs)
}

/// KL k-means started from the given codebooks (no restarts).
pub fn design_kmeanspp_from(
    pref: &DiscretePreference,
    init: &CodebookSet,
    opts: &DesignOptions,
) -> Result<DesignResult> {
    opts.validate()?;
    if init.n() != pref.n() {
        return Err(Error::DimensionMismatch {
            expected: pref.n(),
            actual: init.n(),
        });
    }
    let model = single_model(pref, init.k());
    let centers = init.codebooks().iter().map(|q| q.q().to_vec()).collect();
    let out = lloyd(
        &model,
        Init::Centers(centers),
        EmptyPolicy::ReseedFarthest,
        StopRule::FixedPoint,
        opts.max_iters,
    );
    let iters = out.iterations;
    result_from_lloyd(out, Vec::new(), iters, WARM_START, None)
}
