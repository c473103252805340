use std::sync::Arc;

use esc_core::continuous::{
    design_continuous_saa, design_on_sample, design_sample, design_sampling, exact_iteration_n3,
    exact_partition_n3, saa_on_sample, sample_preference, PreferenceSpec, SampleSet,
};
use esc_core::discrete::{DesignMethod, DesignOptions};
use esc_core::rng::{stream_rng, uniform_simplex};
use esc_core::{kl_divergence, mean_entropy, Codebook, Error, Spv};
use proptest::prelude::*;

fn mean(points: &SampleSet) -> Vec<f64> {
    let n = points.points[0].len();
    let mut m = vec![0.0; n];
    for p in &points.points {
        for (a, b) in m.iter_mut().zip(p.probs()) {
            *a += b / points.len() as f64;
        }
    }
    m
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[test]
fn uniform_sample_means() {
    let s = sample_preference(
        &PreferenceSpec::Uniform { n: 3 },
        100_000,
        &mut stream_rng(1, 0),
    )
    .unwrap();
    assert_eq!(s.len(), 100_000);
    for m in mean(&s) {
        assert!((m - 1.0 / 3.0).abs() < 0.01, "{m}");
    }
}

#[test]
fn flat_dirichlet_on_the_segment_is_uniform() {
    let spec = PreferenceSpec::Dirichlet {
        alpha: vec![1.0, 1.0],
    };
    let s = sample_preference(&spec, 100_000, &mut stream_rng(2, 0)).unwrap();
    let mut xs: Vec<f64> = s.points.iter().map(|p| p.probs()[0]).collect();
    xs.sort_by(f64::total_cmp);
    let len = xs.len() as f64;
    let ks = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            (x - i as f64 / len)
                .abs()
                .max(((i + 1) as f64 / len - x).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks < 0.01, "KS statistic {ks}");
}

#[test]
fn radial_density_is_depressed_at_its_center() {
    let radial = PreferenceSpec::radial_barycenter(3).unwrap();
    let center = [1.0 / 3.0; 3];
    let near = |s: &SampleSet| {
        s.points
            .iter()
            .filter(|p| dist(p.probs(), &center) < 0.05)
            .count()
    };
    let r = sample_preference(&radial, 100_000, &mut stream_rng(3, 0)).unwrap();
    let u = sample_preference(
        &PreferenceSpec::Uniform { n: 3 },
        100_000,
        &mut stream_rng(3, 1),
    )
    .unwrap();
    let (nr, nu) = (near(&r), near(&u));
    assert!(nr < nu, "radial {nr} vs uniform {nu}");
}

#[test]
fn rejection_sampler_reports_a_stall() {
    let spec = PreferenceSpec::Custom {
        n: 3,
        density: Arc::new(|_: &[f64]| 1e-7),
        bound: 1.0,
    };
    match sample_preference(&spec, 10, &mut stream_rng(4, 0)) {
        Err(Error::RejectionStall { proposals, .. }) => assert!(proposals >= 1_000_000),
        other => panic!("expected a stall, got {other:?}"),
    }
}

#[test]
fn sampler_rejects_bad_specs() {
    let mut rng = stream_rng(0, 0);
    assert!(sample_preference(&PreferenceSpec::Uniform { n: 3 }, 0, &mut rng).is_err());
    assert!(sample_preference(
        &PreferenceSpec::Dirichlet {
            alpha: vec![1.0, 0.0]
        },
        5,
        &mut rng
    )
    .is_err());
    assert!(sample_preference(&PreferenceSpec::Uniform { n: 1 }, 5, &mut rng).is_err());
}

#[test]
fn concentrated_preference_recovers_its_mode() {
    let target = [0.2, 0.3, 0.5];
    let spec = PreferenceSpec::Dirichlet {
        alpha: target.iter().map(|t| t * 1e5).collect(),
    };
    let opts = DesignOptions::default().with_restarts(2);
    for method in [DesignMethod::Kmeanspp, DesignMethod::Dca] {
        let r = design_sampling(&spec, 1, 1000, method, &opts).unwrap();
        for (q, t) in r.set.get(0).q().iter().zip(target) {
            assert!((q - t).abs() < 0.01, "{method:?}: {q} vs {t}");
        }
    }
}

#[test]
fn saa_matches_sampling_design_on_the_same_sample() {
    let spec = PreferenceSpec::Uniform { n: 3 };
    for seed in 0..5 {
        let opts = DesignOptions::default().with_seed(seed).with_restarts(4);
        let sample = design_sample(&spec, 2000, seed).unwrap();
        let saa = design_continuous_saa(&spec, 3, 2000, &opts).unwrap();
        let km = design_on_sample(&sample, 3, DesignMethod::Kmeanspp, &opts).unwrap();
        assert!((saa.objective - km.objective).abs() < 1e-9, "seed {seed}");
        assert_eq!(saa.restart, km.restart);
        for (a, b) in saa.set.codebooks().iter().zip(km.set.codebooks()) {
            assert!(dist(a.q(), b.q()) < 1e-6);
        }
    }
}

#[test]
fn saa_single_codebook_is_the_barycenter() {
    let opts = DesignOptions::default().with_restarts(1);
    let r = design_continuous_saa(&PreferenceSpec::Uniform { n: 3 }, 1, 10_000, &opts).unwrap();
    for q in r.set.get(0).q() {
        assert!((q - 1.0 / 3.0).abs() < 0.02);
    }
}

#[test]
fn estimate_variance_shrinks_with_sample_size() {
    let spec = PreferenceSpec::Uniform { n: 3 };
    let bits = |s: usize| -> Vec<f64> {
        (0..20)
            .map(|seed| {
                let opts = DesignOptions::default().with_seed(seed).with_restarts(3);
                let sample = design_sample(&spec, s, seed).unwrap();
                let r = design_on_sample(&sample, 2, DesignMethod::Kmeanspp, &opts).unwrap();
                20.0 * (mean_entropy(&sample.to_preference().unwrap()) + r.objective)
            })
            .collect()
    };
    let var = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
    };
    let (small, large) = (var(&bits(500)), var(&bits(8000)));
    assert!(
        large < small,
        "S=8000 variance {large} vs S=500 variance {small}"
    );
}

#[test]
fn exact_centroids_match_monte_carlo() {
    let sample = sample_preference(
        &PreferenceSpec::Uniform { n: 3 },
        100_000,
        &mut stream_rng(5, 0),
    )
    .unwrap();
    let mut pairs = vec![(vec![0.5, 0.3, 0.2], vec![0.2, 0.3, 0.5])];
    let mut rng = stream_rng(6, 0);
    while pairs.len() < 20 {
        let a = uniform_simplex(3, &mut rng);
        let b = uniform_simplex(3, &mut rng);
        if a.iter().chain(&b).all(|&v| v > 1e-3) {
            pairs.push((a, b));
        }
    }
    for (a, b) in pairs {
        let (q1, q2) = (Codebook::new(a).unwrap(), Codebook::new(b).unwrap());
        let part = exact_partition_n3(&q1, &q2).unwrap();
        let mut sums = [[0.0; 3]; 2];
        let mut counts = [0usize; 2];
        for p in &sample.points {
            let side = usize::from(kl_divergence(p, &q1).unwrap() > kl_divergence(p, &q2).unwrap());
            counts[side] += 1;
            for n in 0..3 {
                sums[side][n] += p.probs()[n];
            }
        }
        for side in 0..2 {
            let frac = counts[side] as f64 / sample.len() as f64;
            assert!(
                (frac - part.areas[side]).abs() < 0.01,
                "area {frac} vs {}",
                part.areas[side]
            );
            if counts[side] < 2000 {
                continue;
            }
            let c = part.centroids[side].expect("non-empty region");
            for n in 0..3 {
                let mc = sums[side][n] / counts[side] as f64;
                assert!(
                    (mc - c[n]).abs() < 0.02,
                    "{q1:?} {q2:?} side {side}: {mc} vs {}",
                    c[n]
                );
            }
        }
    }
}

#[test]
fn exact_iteration_matches_saa_step_on_a_large_sample() {
    // One exact centroid step equals the empirical step up to sampling error.
    let (q1, q2) = (
        Codebook::new(vec![0.6, 0.2, 0.2]).unwrap(),
        Codebook::new(vec![0.2, 0.2, 0.6]).unwrap(),
    );
    let (n1, n2) = exact_iteration_n3(&q1, &q2).unwrap();
    let sample = sample_preference(
        &PreferenceSpec::Uniform { n: 3 },
        100_000,
        &mut stream_rng(8, 0),
    )
    .unwrap();
    let mut acc = [[0.0; 3]; 2];
    let mut cnt = [0.0; 2];
    for p in &sample.points {
        let side = usize::from(kl_divergence(p, &q1).unwrap() > kl_divergence(p, &q2).unwrap());
        cnt[side] += 1.0;
        for n in 0..3 {
            acc[side][n] += p.probs()[n];
        }
    }
    for (side, q) in [n1, n2].iter().enumerate() {
        for n in 0..3 {
            assert!((acc[side][n] / cnt[side] - q.q()[n]).abs() < 0.01);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn saa_trace_never_increases(seed in 0u64..1000, k in 1usize..5) {
        let spec = PreferenceSpec::Dirichlet { alpha: vec![0.7, 1.3, 2.0] };
        let opts = DesignOptions::default().with_seed(seed).with_restarts(1);
        let sample = design_sample(&spec, 300, seed).unwrap();
        let r = saa_on_sample(&sample, k, &opts).unwrap();
        prop_assert!(!r.trace.is_empty());
        for w in r.trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "{:?}", r.trace);
        }
        prop_assert!((r.trace.last().unwrap() - r.objective).abs() < 1e-9);
    }

    #[test]
    fn exact_partition_is_a_partition(
        a in prop::array::uniform3(0.01f64..1.0),
        b in prop::array::uniform3(0.01f64..1.0),
    ) {
        let q1 = Codebook::new(Spv::from_weights(a.to_vec()).unwrap().probs().to_vec()).unwrap();
        let q2 = Codebook::new(Spv::from_weights(b.to_vec()).unwrap().probs().to_vec()).unwrap();
        match exact_partition_n3(&q1, &q2) {
            Err(Error::NoBoundary) => prop_assert_eq!(q1.q(), q2.q()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
            Ok(part) => {
                prop_assert!((part.areas[0] + part.areas[1] - 1.0).abs() < 1e-9);
                for side in 0..2 {
                    if let Some(c) = part.centroids[side] {
                        prop_assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                        prop_assert!(c.iter().all(|&v| v >= -1e-12));
                        // The centroid of a convex region lies in it.
                        let side_of_c: f64 = c.iter().zip(&part.normal).map(|(p, w)| p * w).sum();
                        let inside = if side == 0 { side_of_c >= -1e-9 } else { side_of_c <= 1e-9 };
                        prop_assert!(inside);
                    }
                }
            }
        }
    }
}
