#![allow(dead_code)]

use esc_core::discrete::{center_update, DesignResult};
use esc_core::rng::{stream_rng, uniform_simplex};
use esc_core::{best_codebook, kl_divergence, DiscretePreference, Spv};

pub fn spv(v: &[f64]) -> Spv {
    Spv::new(v.to_vec()).unwrap()
}

pub fn random_pref(n: usize, j: usize, seed: u64, random_weights: bool) -> DiscretePreference {
    let mut rng = stream_rng(seed, 0);
    let spvs = (0..j)
        .map(|_| Spv::new(uniform_simplex(n, &mut rng)).unwrap())
        .collect();
    if random_weights {
        let w = uniform_simplex(j, &mut rng);
        DiscretePreference::from_weights(spvs, w).unwrap()
    } else {
        DiscretePreference::uniform(spvs).unwrap()
    }
}

/// Exhaustive minimum over all labelings of the items into `k` groups, with
/// every group coded by its weighted centroid (bits per symbol).
pub fn brute_force_labeling(pref: &DiscretePreference, k: usize) -> f64 {
    let j = pref.len();
    let mut best = f64::INFINITY;
    let total = k.pow(j as u32);
    for code in 0..total {
        let mut c = code;
        let labels: Vec<usize> = (0..j)
            .map(|_| {
                let l = c % k;
                c /= k;
                l
            })
            .collect();
        let mut obj = 0.0;
        for g in 0..k {
            let members: Vec<usize> = (0..j).filter(|&i| labels[i] == g).collect();
            if members.is_empty() {
                continue;
            }
            let q = center_update(pref, &members).unwrap();
            for &i in &members {
                obj += pref.probs()[i] * kl_divergence(&pref.spvs()[i], &q).unwrap();
            }
        }
        best = best.min(obj);
    }
    best
}

/// Trace non-increasing (within `tol`), every nonempty codebook equal to the
/// centroid of its cluster, every item on a KL-closest codebook, and the
/// reported objective consistent with the returned design.
pub fn assert_design_invariants(pref: &DiscretePreference, r: &DesignResult, tol: f64) {
    for w in r.trace.windows(2) {
        assert!(w[1] <= w[0] + tol, "trace increased: {} -> {}", w[0], w[1]);
    }
    for k in 0..r.set.k() {
        let members = r.assignment.members(k);
        if members.iter().map(|&j| pref.probs()[j]).sum::<f64>() > 0.0 {
            let c = center_update(pref, &members).unwrap();
            for (a, b) in c.q().iter().zip(r.set.get(k).q()) {
                assert!(
                    (a - b).abs() < 1e-9,
                    "codebook {k} is not its cluster centroid"
                );
            }
        }
    }
    for (j, p) in pref.spvs().iter().enumerate() {
        let (_, dmin) = best_codebook(p, &r.set).unwrap();
        let own = kl_divergence(p, r.set.get(r.assignment.owner[j])).unwrap();
        assert!(own - dmin < 1e-9, "item {j} not on a closest codebook");
    }
    let (obj, _) = esc_core::divergence_objective(pref, &r.set).unwrap();
    assert!((obj - r.objective).abs() < 1e-9);
}
