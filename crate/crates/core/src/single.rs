//! Closed-form single-codebook optimum and an exhaustive grid baseline.

use std::cmp::Ordering;
use std::f64::consts::LOG2_E;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::info::{kl_nats_pre, log_table, neg_entropy_nats};
use crate::model::{Codebook, CodebookSet, DiscretePreference};

/// Maximum number of candidate codebook tuples (`grid_points^K`) an exhaustive
/// search may enumerate.
pub const SEARCH_BUDGET: f64 = 1e7;

/// The optimal single codebook: the request-weighted mean SPV
/// `q_n = sum_j f_j p_{j,n} / sum_i sum_j f_j p_{j,i}`.
pub fn optimal_single(pref: &DiscretePreference) -> Codebook {
    let n = pref.n();
    let mut q = vec![0.0; n];
    for (p, &f) in pref.spvs().iter().zip(pref.probs()) {
        for (qn, pn) in q.iter_mut().zip(p.probs()) {
            *qn += f * pn;
        }
    }
    let total: f64 = q.iter().sum();
    Codebook::new(q.into_iter().map(|x| x / total).collect())
        .expect("weighted mean of SPVs is a valid codebook")
}

/// Resolution and codebook count of an exhaustive simplex-grid search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSearchSpec {
    step: f64,
    k: usize,
    divisions: usize,
}

impl GridSearchSpec {
    /// `step` must lie in `(0, 0.5]` and divide one evenly.
    pub fn new(step: f64, k: usize) -> Result<Self> {
        if !(step > 0.0 && step <= 0.5) {
            return Err(Error::InvalidArgument(format!(
                "grid step {step} outside (0, 0.5]"
            )));
        }
        if k == 0 {
            return Err(Error::InvalidArgument("K must be positive".into()));
        }
        let divisions = (1.0 / step).round() as usize;
        if (divisions as f64 * step - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "grid step {step} does not divide 1"
            )));
        }
        Ok(GridSearchSpec { step, k, divisions })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn divisions(&self) -> usize {
        self.divisions
    }
}

/// All points of the simplex whose coordinates are multiples of `1/divisions`,
/// in lexicographic order of their integer compositions.
pub fn simplex_grid(n: usize, divisions: usize) -> Vec<Vec<f64>> {
    fn rec(n: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() + 1 == n {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for v in 0..=left {
            prefix.push(v);
            rec(n, left - v, prefix, out);
            prefix.pop();
        }
    }
    let mut comps = Vec::new();
    rec(n, divisions, &mut Vec::with_capacity(n), &mut comps);
    comps
        .into_iter()
        .map(|c| c.into_iter().map(|v| v as f64 / divisions as f64).collect())
        .collect()
}

/// Number of grid points, `C(divisions + n - 1, n - 1)`.
pub fn simplex_grid_len(n: usize, divisions: usize) -> f64 {
    let mut c = 1.0;
    for i in 1..n {
        c *= (divisions + i) as f64 / i as f64;
    }
    c.round()
}

#[derive(Clone)]
struct Best {
    objective: f64,
    combo: Vec<usize>,
}

impl Best {
    fn better_than(&self, other: &Best) -> bool {
        match self.objective.partial_cmp(&other.objective) {
            Some(Ordering::Less) => true,
            Some(Ordering::Equal) | None => self.combo < other.combo,
            Some(Ordering::Greater) => false,
        }
    }
}

/// Enumerates every unordered `K`-subset of the simplex grid and returns the
/// subset minimizing `sum_j f_j min_k D(p_j || q_k)` (bits per symbol).
///
/// Ties go to the lexicographically smallest subset of grid indices.
pub fn exhaustive_search(
    pref: &DiscretePreference,
    spec: &GridSearchSpec,
) -> Result<(CodebookSet, f64)> {
    let n = pref.n();
    let g = simplex_grid_len(n, spec.divisions);
    let candidates = g.powi(spec.k as i32);
    if candidates > SEARCH_BUDGET {
        return Err(Error::BudgetExceeded {
            candidates,
            limit: SEARCH_BUDGET,
        });
    }
    let grid = simplex_grid(n, spec.divisions);
    if spec.k > grid.len() {
        return Err(Error::InvalidArgument(format!(
            "K = {} exceeds {} grid points",
            spec.k,
            grid.len()
        )));
    }
    let j = pref.len();
    let negent: Vec<f64> = pref
        .spvs()
        .iter()
        .map(|p| neg_entropy_nats(p.probs()))
        .collect();
    // div[g * J + j] = D(p_j || grid_g) in nats
    let div: Vec<f64> = grid
        .par_iter()
        .flat_map_iter(|q| {
            let lq = log_table(q);
            pref.spvs()
                .iter()
                .zip(&negent)
                .map(move |(p, &ne)| kl_nats_pre(p.probs(), ne, &lq))
                .collect::<Vec<_>>()
        })
        .collect();
    let f = pref.probs();
    let k = spec.k;
    let gl = grid.len();

    let best = (0..=gl - k)
        .into_par_iter()
        .map(|first| {
            let mut combo = vec![first];
            let mut mins = vec![div[first * j..(first + 1) * j].to_vec()];
            let mut best: Option<Best> = None;
            search(&div, f, j, gl, k, &mut combo, &mut mins, &mut best);
            best.expect("at least one subset per first index")
        })
        .reduce_with(|a, b| if b.better_than(&a) { b } else { a })
        .expect("grid nonempty");

    let set = CodebookSet::new(
        best.combo
            .iter()
            .map(|&i| Codebook::new(grid[i].clone()))
            .collect::<Result<Vec<_>>>()?,
    )?;
    Ok((set, best.objective * LOG2_E))
}

#[allow(clippy::too_many_arguments)]
fn search(
    div: &[f64],
    f: &[f64],
    j: usize,
    gl: usize,
    k: usize,
    combo: &mut Vec<usize>,
    mins: &mut Vec<Vec<f64>>,
    best: &mut Option<Best>,
) {
    if combo.len() == k {
        let cur = mins.last().unwrap();
        let objective: f64 = cur
            .iter()
            .zip(f)
            .map(|(&d, &w)| if w > 0.0 { w * d } else { 0.0 })
            .sum();
        let cand = Best {
            objective,
            combo: combo.clone(),
        };
        if best.as_ref().is_none_or(|b| cand.better_than(b)) {
            *best = Some(cand);
        }
        return;
    }
    let last = *combo.last().unwrap();
    let remaining = k - combo.len();
    for next in last + 1..=gl - remaining {
        let prev = mins.last().unwrap();
        let row = &div[next * j..(next + 1) * j];
        let cur: Vec<f64> = prev.iter().zip(row).map(|(&a, &b)| a.min(b)).collect();
        combo.push(next);
        mins.push(cur);
        search(div, f, j, gl, k, combo, mins, best);
        mins.pop();
        combo.pop();
    }
}
