//! Codebook design under continuous preferences over the simplex.
//!
//! Integrals against the preference density are replaced by averages over a
//! fixed sample; [`exact_partition_n3`] computes the exact two-codebook
//! partition of the 3-letter simplex and serves as a geometric oracle.

mod geometry;

pub use geometry::{exact_iteration_n3, exact_partition_n3, PartitionN3};

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;

use crate::cluster::{lloyd, EmptyPolicy, Init, StopRule};
use crate::discrete::{
    design_dca, design_kmeanspp, pick_best, result_from_lloyd, seed_centers, single_model,
    validate_k, DesignMethod, DesignOptions, DesignResult,
};
use crate::error::{Error, Result};
use crate::model::{DiscretePreference, Spv};
use crate::rng::{derive_seed, stream_rng, uniform_simplex};

/// Proposals after which a rejection sampler with acceptance below
/// [`MIN_ACCEPTANCE`] gives up.
pub const STALL_PROPOSALS: u64 = 1_000_000;
pub const MIN_ACCEPTANCE: f64 = 1e-4;

/// Stream tag of the design sample drawn by [`design_sampling`] and
/// [`design_continuous_saa`].
const SAMPLE_TAG: u64 = 0x5A3;

pub type Density = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A preference density over the `N`-letter simplex (normalization implicit).
#[derive(Clone)]
pub enum PreferenceSpec {
    Uniform {
        n: usize,
    },
    Dirichlet {
        alpha: Vec<f64>,
    },
    /// Density proportional to `||p - center||_2`.
    Radial {
        center: Spv,
    },
    /// Arbitrary density bounded above by `bound` on the simplex.
    Custom {
        n: usize,
        density: Density,
        bound: f64,
    },
}

impl fmt::Debug for PreferenceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PreferenceSpec::Uniform { n } => write!(f, "Uniform {{ n: {n} }}"),
            PreferenceSpec::Dirichlet { alpha } => write!(f, "Dirichlet {{ alpha: {alpha:?} }}"),
            PreferenceSpec::Radial { center } => {
                write!(f, "Radial {{ center: {:?} }}", center.probs())
            }
            PreferenceSpec::Custom { n, bound, .. } => {
                write!(f, "Custom {{ n: {n}, bound: {bound} }}")
            }
        }
    }
}

impl PreferenceSpec {
    /// The radial preference centered on the barycenter.
    pub fn radial_barycenter(n: usize) -> Result<Self> {
        Ok(PreferenceSpec::Radial {
            center: Spv::new(vec![1.0 / n as f64; n])?,
        })
    }

    pub fn n(&self) -> usize {
        match self {
            PreferenceSpec::Uniform { n } | PreferenceSpec::Custom { n, .. } => *n,
            PreferenceSpec::Dirichlet { alpha } => alpha.len(),
            PreferenceSpec::Radial { center } => center.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n() < 2 {
            return Err(Error::InvalidArgument(
                "alphabet needs at least 2 symbols".into(),
            ));
        }
        match self {
            PreferenceSpec::Dirichlet { alpha }
                if alpha.iter().any(|a| !(a.is_finite() && *a > 0.0)) =>
            {
                Err(Error::InvalidArgument(
                    "Dirichlet parameters must be positive".into(),
                ))
            }
            PreferenceSpec::Custom { bound, .. } if !(bound.is_finite() && *bound > 0.0) => Err(
                Error::InvalidArgument("density bound must be positive".into()),
            ),
            _ => Ok(()),
        }
    }
}

/// `S` equally weighted SPVs.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub points: Vec<Spv>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The sample as a discrete preference with weights `1/S`.
    pub fn to_preference(&self) -> Result<DiscretePreference> {
        DiscretePreference::uniform(self.points.clone())
    }

    /// One SPV per line, comma separated.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for p in &self.points {
            let row: Vec<String> = p.probs().iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    loop {
        let mut g = Vec::with_capacity(alpha.len());
        for &a in alpha {
            let d = Gamma::new(a, 1.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            g.push(d.sample(rng));
        }
        let s: f64 = g.iter().sum();
        if s > 0.0 && s.is_finite() {
            return Ok(g.into_iter().map(|x| x / s).collect());
        }
    }
}

/// `S` i.i.d. draws from the normalized density of `spec`.
pub fn sample_preference<R: Rng + ?Sized>(
    spec: &PreferenceSpec,
    s: usize,
    rng: &mut R,
) -> Result<SampleSet> {
    spec.validate()?;
    if s == 0 {
        return Err(Error::InvalidArgument(
            "sample size must be positive".into(),
        ));
    }
    let n = spec.n();
    let raw: Vec<Vec<f64>> = match spec {
        PreferenceSpec::Uniform { .. } => (0..s).map(|_| uniform_simplex(n, rng)).collect(),
        PreferenceSpec::Dirichlet { alpha } => (0..s)
            .map(|_| dirichlet(alpha, rng))
            .collect::<Result<_>>()?,
        PreferenceSpec::Radial { center } => {
            let c = center.probs().to_vec();
            let dist = move |p: &[f64]| {
                p.iter()
                    .zip(&c)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            };
            let bound = (0..n)
                .map(|v| {
                    let mut e = vec![0.0; n];
                    e[v] = 1.0;
                    dist(&e)
                })
                .fold(0.0, f64::max);
            rejection(n, s, &dist, bound, rng)?
        }
        PreferenceSpec::Custom { density, bound, .. } => {
            rejection(n, s, density.as_ref(), *bound, rng)?
        }
    };
    Ok(SampleSet {
        points: raw.into_iter().map(Spv::new).collect::<Result<_>>()?,
    })
}

fn rejection<R: Rng + ?Sized>(
    n: usize,
    s: usize,
    density: &dyn Fn(&[f64]) -> f64,
    bound: f64,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(s);
    let mut proposals: u64 = 0;
    while out.len() < s {
        let p = uniform_simplex(n, rng);
        proposals += 1;
        if rng.random::<f64>() * bound < density(&p) {
            out.push(p);
        }
        if proposals >= STALL_PROPOSALS && (out.len() as f64) < MIN_ACCEPTANCE * proposals as f64 {
            return Err(Error::RejectionStall {
                rate: out.len() as f64 / proposals as f64,
                proposals,
            });
        }
    }
    Ok(out)
}

/// The design sample used by [`design_sampling`] / [`design_continuous_saa`]
/// for a given seed.
pub fn design_sample(spec: &PreferenceSpec, s: usize, seed: u64) -> Result<SampleSet> {
    sample_preference(spec, s, &mut stream_rng(derive_seed(seed, SAMPLE_TAG), 0))
}

/// Draws `S` points and designs `K` codebooks for the empirical preference.
pub fn design_sampling(
    spec: &PreferenceSpec,
    k: usize,
    s: usize,
    method: DesignMethod,
    opts: &DesignOptions,
) -> Result<DesignResult> {
    let sample = design_sample(spec, s, opts.seed)?;
    design_on_sample(&sample, k, method, opts)
}

pub fn design_on_sample(
    sample: &SampleSet,
    k: usize,
    method: DesignMethod,
    opts: &DesignOptions,
) -> Result<DesignResult> {
    let pref = sample.to_preference()?;
    match method {
        DesignMethod::Kmeanspp => design_kmeanspp(&pref, k, opts),
        DesignMethod::Dca => design_dca(&pref, k, opts),
    }
}

/// Iterative continuous design with integrals replaced by averages over one
/// fixed sample of size `s_int`: density-weighted seeding, then alternating
/// centroid and region updates until no center coordinate moves by more than
/// `opts.epsilon` (or the regions stop changing).
pub fn design_continuous_saa(
    spec: &PreferenceSpec,
    k: usize,
    s_int: usize,
    opts: &DesignOptions,
) -> Result<DesignResult> {
    let sample = design_sample(spec, s_int, opts.seed)?;
    saa_on_sample(&sample, k, opts)
}

pub fn saa_on_sample(sample: &SampleSet, k: usize, opts: &DesignOptions) -> Result<DesignResult> {
    opts.validate()?;
    let pref = sample.to_preference()?;
    validate_k(&pref, k)?;
    let model = single_model(&pref, k);
    let runs: Vec<Result<DesignResult>> = (0..opts.restarts)
        .into_par_iter()
        .map(|restart| {
            let mut rng = stream_rng(opts.seed, restart as u64);
            let (centers, _) = seed_centers(&model, pref.probs(), Vec::new(), k, &mut rng);
            let out = lloyd(
                &model,
                Init::Centers(centers),
                EmptyPolicy::ReseedFarthest,
                StopRule::CenterShift(opts.epsilon),
                opts.max_iters,
            );
            let iters = out.iterations;
            result_from_lloyd(out, Vec::new(), iters, restart, None)
        })
        .collect();
    pick_best(runs)
}
