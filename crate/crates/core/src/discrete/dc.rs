//! Clustering as a DC (difference-of-convex) program.
//!
//! Variables are laid out as `x = [t | s | r]`: `t_k` is the mass of cluster
//! `k`, `s_{k,n}` its unnormalized symbol mass and `r` the soft assignment of
//! every block to its eligible clusters. The objective
//! `sum_k t_k ln t_k - sum_{k,n} s_{k,n} ln s_{k,n}` (plus a constant) equals the
//! clustering objective whenever `r` is 0-1, and is minimized by repeatedly
//! linearizing the concave part and solving the convex remainder over `r`.

use std::f64::consts::LOG2_E;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    pick_best, result_from_lloyd, single_model, validate_k, DesignOptions, DesignResult, WARM_START,
};
use crate::cluster::{lloyd, BlockModel, EmptyPolicy, Init, LloydOutcome, StopRule};
use crate::error::{Error, Result};
use crate::info::log_table;
use crate::model::{CodebookSet, DiscretePreference};
use crate::rng::{derive_seed, stream_rng, uniform_simplex};

const LOG_FLOOR: f64 = 1e-300;
const FEASIBILITY_TOL: f64 = 1e-7;
const DCA_STREAM: u64 = 0xDCA;

#[inline]
fn xlnx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

#[inline]
fn ln_floor(x: f64) -> f64 {
    x.max(LOG_FLOOR).ln()
}

/// Row-stochastic `J x K` soft clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftAssignment {
    pub r: Vec<Vec<f64>>,
}

/// Index map of the `[t | s | r]` layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DcLayout {
    pub k: usize,
    pub n: usize,
    /// Offset of the first `r` entry of every block.
    pub r_start: Vec<usize>,
}

impl DcLayout {
    pub fn t(&self, k: usize) -> usize {
        k
    }

    pub fn s(&self, k: usize, n: usize) -> usize {
        self.k + k * self.n + n
    }

    pub fn r_offset(&self) -> usize {
        self.k * (self.n + 1)
    }

    pub fn r(&self, block: usize, pos: usize) -> usize {
        self.r_offset() + self.r_start[block] + pos
    }
}

#[derive(Debug, Clone)]
pub struct DcProblem {
    pub(crate) model: BlockModel,
    layout: DcLayout,
    dim: usize,
    /// `sum_b w_b sum_n p ln p`; turns the DC value into the clustering objective.
    offset_nats: f64,
}

impl DcProblem {
    pub(crate) fn new(model: BlockModel) -> Self {
        let mut r_start = Vec::with_capacity(model.blocks.len());
        let mut acc = 0;
        for b in &model.blocks {
            r_start.push(acc);
            acc += b.eligible.len();
        }
        let layout = DcLayout {
            k: model.clusters,
            n: model.n,
            r_start,
        };
        let dim = layout.r_offset() + acc;
        let offset_nats = model
            .blocks
            .iter()
            .map(|b| b.weight * model.negent[b.item])
            .sum();
        DcProblem {
            model,
            layout,
            dim,
            offset_nats,
        }
    }

    /// Number of variables `M`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layout(&self) -> &DcLayout {
        &self.layout
    }

    fn r_len(&self) -> usize {
        self.dim - self.layout.r_offset()
    }

    /// 1 on the `t` entries.
    pub fn lambda1(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|m| if m < self.layout.k { 1.0 } else { 0.0 })
            .collect()
    }

    /// 1 on the `s` entries.
    pub fn lambda2(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|m| {
                if m >= self.layout.k && m < self.layout.r_offset() {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Sparse rows of `A` (`(column, coefficient)` pairs): the `t`-definition
    /// rows, the `s`-definition rows, then one row-sum row per block.
    pub fn constraint_rows(&self) -> Vec<Vec<(usize, f64)>> {
        let (k, n) = (self.layout.k, self.layout.n);
        let m = &self.model;
        let mut rows = Vec::with_capacity(k + k * n + m.blocks.len());
        for c in 0..k {
            let mut row = vec![(self.layout.t(c), 1.0)];
            for (b, blk) in m.blocks.iter().enumerate() {
                if let Some(pos) = blk.eligible.iter().position(|&e| e == c) {
                    row.push((self.layout.r(b, pos), -blk.weight * m.mass[blk.item]));
                }
            }
            rows.push(row);
        }
        for c in 0..k {
            for sym in 0..n {
                let mut row = vec![(self.layout.s(c, sym), 1.0)];
                for (b, blk) in m.blocks.iter().enumerate() {
                    if let Some(pos) = blk.eligible.iter().position(|&e| e == c) {
                        row.push((self.layout.r(b, pos), -blk.weight * m.point(blk.item)[sym]));
                    }
                }
                rows.push(row);
            }
        }
        for (b, blk) in m.blocks.iter().enumerate() {
            rows.push(
                (0..blk.eligible.len())
                    .map(|pos| (self.layout.r(b, pos), 1.0))
                    .collect(),
            );
        }
        rows
    }

    /// Right-hand side matching [`DcProblem::constraint_rows`].
    pub fn rhs(&self) -> Vec<f64> {
        let (k, n) = (self.layout.k, self.layout.n);
        let mut b = vec![0.0; k + k * n];
        b.extend(std::iter::repeat_n(1.0, self.model.blocks.len()));
        b
    }

    /// Largest absolute violation of `Ax = b` and `x >= 0`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let rhs = self.rhs();
        let eq = self
            .constraint_rows()
            .iter()
            .zip(&rhs)
            .map(|(row, b)| (row.iter().map(|&(c, a)| a * x[c]).sum::<f64>() - b).abs())
            .fold(0.0, f64::max);
        let neg = x.iter().map(|&v| (-v).max(0.0)).fold(0.0, f64::max);
        eq.max(neg)
    }

    /// The feasible point whose assignment block is `r` (given per block, over
    /// eligible clusters, concatenated).
    pub fn point_from_r(&self, r: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        self.fill_ts(r, &mut x);
        x[self.layout.r_offset()..].copy_from_slice(r);
        x
    }

    fn fill_ts(&self, r: &[f64], x: &mut [f64]) {
        let (k, n) = (self.layout.k, self.layout.n);
        let m = &self.model;
        x[..k * (n + 1)].iter_mut().for_each(|v| *v = 0.0);
        for (b, blk) in m.blocks.iter().enumerate() {
            let p = m.point(blk.item);
            let rb = &r[self.layout.r_start[b]..self.layout.r_start[b] + blk.eligible.len()];
            for (&c, &w) in blk.eligible.iter().zip(rb) {
                if w == 0.0 {
                    continue;
                }
                let a = blk.weight * w;
                x[c] += a * m.mass[blk.item];
                let s = &mut x[k + c * n..k + (c + 1) * n];
                for (sv, &pv) in s.iter_mut().zip(p) {
                    *sv += a * pv;
                }
            }
        }
    }

    /// Random feasible `r`: every block row drawn from the flat Dirichlet.
    pub fn random_r<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut r = Vec::with_capacity(self.r_len());
        for blk in &self.model.blocks {
            r.extend(uniform_simplex(blk.eligible.len(), rng));
        }
        r
    }

    /// 0-1 `r` putting every block on the given cluster.
    pub(crate) fn onehot_r(&self, owner: &[usize]) -> Vec<f64> {
        let mut r = vec![0.0; self.r_len()];
        for (b, blk) in self.model.blocks.iter().enumerate() {
            let pos = blk
                .eligible
                .iter()
                .position(|&e| e == owner[b])
                .expect("owner must be eligible");
            r[self.layout.r_start[b] + pos] = 1.0;
        }
        r
    }

    fn value_nats(&self, x: &[f64]) -> f64 {
        let k = self.layout.k;
        let t: f64 = x[..k].iter().map(|&v| xlnx(v)).sum();
        let s: f64 = x[k..self.layout.r_offset()].iter().map(|&v| xlnx(v)).sum();
        t - s
    }

    fn bits(&self, value_nats: f64) -> f64 {
        (value_nats + self.offset_nats) * LOG2_E
    }

    /// Cluster centers `s_k / t_k` implied by `x` (`None` for massless clusters).
    fn centers(&self, x: &[f64]) -> Vec<Option<Vec<f64>>> {
        let (k, n) = (self.layout.k, self.layout.n);
        (0..k)
            .map(|c| {
                let t = x[c];
                if t > 0.0 {
                    Some(
                        x[k + c * n..k + (c + 1) * n]
                            .iter()
                            .map(|s| s / t)
                            .collect(),
                    )
                } else {
                    None
                }
            })
            .collect()
    }
}

/// The DC program of a `K`-clustering of `pref`.
pub fn dc_transform(pref: &DiscretePreference, k: usize) -> Result<DcProblem> {
    validate_k(pref, k)?;
    Ok(DcProblem::new(single_model(pref, k)))
}

/// DC objective at `x` in bits per symbol; equals the clustering objective
/// `sum_j f_j D(p_j || q_k(j))` at every 0-1 point.
pub fn dc_objective(x: &[f64], problem: &DcProblem) -> Result<f64> {
    if x.len() != problem.dim {
        return Err(Error::DimensionMismatch {
            expected: problem.dim,
            actual: x.len(),
        });
    }
    let residual = problem.residual(x);
    if !(residual <= FEASIBILITY_TOL) {
        return Err(Error::Infeasible { residual });
    }
    Ok(problem.bits(problem.value_nats(x)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Frank-Wolfe gap at the returned point.
    pub gap: f64,
    /// False when the iteration cap was hit.
    pub converged: bool,
}

/// Minimizes `sum_t x ln x - y^T x` over the feasible set, starting from
/// `x_start` (which must be feasible).
///
/// Works on `r` alone: `t` and `s` are linear images of `r`, so the problem is
/// a smooth convex function over a product of simplices, solved by Frank-Wolfe
/// with exact line search.
pub fn convex_subproblem(
    problem: &DcProblem,
    y: &[f64],
    x_start: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<SubproblemOutcome> {
    if y.len() != problem.dim || x_start.len() != problem.dim {
        return Err(Error::DimensionMismatch {
            expected: problem.dim,
            actual: y.len().min(x_start.len()),
        });
    }
    let residual = problem.residual(x_start);
    if !(residual <= FEASIBILITY_TOL) {
        return Err(Error::Infeasible { residual });
    }
    let r0 = &x_start[problem.layout.r_offset()..];
    let sol = Reduced::new(problem, y).solve(r0, tol, max_iters);
    Ok(SubproblemOutcome {
        x: problem.point_from_r(&sol.r),
        iterations: sol.iterations,
        gap: sol.gap,
        converged: sol.converged,
    })
}

/// Frank-Wolfe tails off long before tight gaps; below this relative change
/// the exact block sweeps take over.
const FW_HANDOVER: f64 = 1e-6;

/// Subproblem restricted to `r`:
/// `phi(r) = sum_k t_k ln t_k - sum_{b,k} c_{b,k} r_{b,k}`, `t_k = sum_b w_b m_b r_{b,k}`.
struct Reduced<'a> {
    problem: &'a DcProblem,
    /// Linear coefficient of every `r` entry.
    c: Vec<f64>,
    /// `w_b m_b` per block.
    a: Vec<f64>,
}

struct ReducedSolution {
    r: Vec<f64>,
    iterations: usize,
    gap: f64,
    converged: bool,
}

impl<'a> Reduced<'a> {
    fn new(problem: &'a DcProblem, y: &[f64]) -> Self {
        let (k, n) = (problem.layout.k, problem.layout.n);
        let m = &problem.model;
        let mut c = vec![0.0; problem.r_len()];
        let mut a = Vec::with_capacity(m.blocks.len());
        for (b, blk) in m.blocks.iter().enumerate() {
            let p = m.point(blk.item);
            a.push(blk.weight * m.mass[blk.item]);
            for (pos, &cl) in blk.eligible.iter().enumerate() {
                let ys = &y[k + cl * n..k + (cl + 1) * n];
                let dot: f64 = p.iter().zip(ys).map(|(pv, yv)| pv * yv).sum();
                let idx = problem.layout.r_start[b] + pos;
                c[idx] = y[problem.layout.r_offset() + idx]
                    + blk.weight * (m.mass[blk.item] * y[cl] + dot);
            }
        }
        Reduced { problem, c, a }
    }

    fn masses(&self, r: &[f64]) -> Vec<f64> {
        let m = &self.problem.model;
        let mut t = vec![0.0; m.clusters];
        for (b, blk) in m.blocks.iter().enumerate() {
            let rb = &r[self.problem.layout.r_start[b]..];
            for (pos, &cl) in blk.eligible.iter().enumerate() {
                t[cl] += self.a[b] * rb[pos];
            }
        }
        t
    }

    fn phi(&self, r: &[f64], t: &[f64]) -> f64 {
        t.iter().map(|&v| xlnx(v)).sum::<f64>()
            - self.c.iter().zip(r).map(|(c, r)| c * r).sum::<f64>()
    }

    /// Frank-Wolfe duality gap at `r`.
    fn gap(&self, r: &[f64], t: &[f64]) -> f64 {
        let m = &self.problem.model;
        let lt: Vec<f64> = t.iter().map(|&v| 1.0 + ln_floor(v)).collect();
        let mut gap = 0.0;
        for (b, blk) in m.blocks.iter().enumerate() {
            let s0 = self.problem.layout.r_start[b];
            let mut cur = 0.0;
            let mut best = f64::INFINITY;
            for (pos, &cl) in blk.eligible.iter().enumerate() {
                let g = self.a[b] * lt[cl] - self.c[s0 + pos];
                cur += g * r[s0 + pos];
                best = best.min(g);
            }
            gap += cur - best;
        }
        gap
    }

    /// Frank-Wolfe with exact line search until the relative change drops
    /// below `max(tol, FW_HANDOVER)`, then exact block-coordinate sweeps until the duality gap
    /// certifies stationarity. Both phases count toward `max_iters`.
    fn solve(&self, r0: &[f64], tol: f64, max_iters: usize) -> ReducedSolution {
        let mut r = r0.to_vec();
        let mut t = self.masses(&r);
        let mut phi = self.phi(&r, &t);
        let mut iterations = 0;
        let target = |phi: f64| tol * phi.abs().max(1.0);
        while iterations < max_iters {
            let Some((gamma, gap)) = self.fw_step(&mut r, &t) else {
                break;
            };
            if gap <= target(phi) || gamma <= 0.0 {
                break;
            }
            iterations += 1;
            t = self.masses(&r);
            let next = self.phi(&r, &t);
            let change = (phi - next).abs() / phi.abs().max(1.0);
            phi = next;
            if change < tol.max(FW_HANDOVER) {
                break;
            }
        }
        let mut gap = self.gap(&r, &t);
        let mut scratch = BlockScratch::default();
        while gap > target(phi) && iterations < max_iters {
            iterations += 1;
            self.sweep(&mut r, &mut t, &mut scratch);
            t = self.masses(&r);
            let next = self.phi(&r, &t);
            gap = self.gap(&r, &t);
            let stalled = next >= phi;
            phi = next;
            if stalled {
                // No further descent is representable in floating point.
                break;
            }
        }
        ReducedSolution {
            r,
            iterations,
            gap,
            converged: gap <= target(phi),
        }
    }

    /// One Frank-Wolfe step applied to `r` in place. Returns the step size and
    /// the duality gap before the step, or `None` for an empty problem.
    fn fw_step(&self, r: &mut [f64], t: &[f64]) -> Option<(f64, f64)> {
        let m = &self.problem.model;
        let starts = &self.problem.layout.r_start;
        if m.blocks.is_empty() {
            return None;
        }
        let lt: Vec<f64> = t.iter().map(|&v| 1.0 + ln_floor(v)).collect();
        let mut vertex = vec![0usize; m.blocks.len()];
        let mut delta = vec![0.0; m.clusters];
        let mut gap = 0.0;
        let mut lin = 0.0;
        for (b, blk) in m.blocks.iter().enumerate() {
            let s0 = starts[b];
            let ab = self.a[b];
            let mut best = (0, f64::INFINITY);
            let mut cur = 0.0;
            let mut cr = 0.0;
            for (pos, &cl) in blk.eligible.iter().enumerate() {
                let g = ab * lt[cl] - self.c[s0 + pos];
                cur += g * r[s0 + pos];
                cr += self.c[s0 + pos] * r[s0 + pos];
                if g < best.1 {
                    best = (pos, g);
                }
            }
            vertex[b] = best.0;
            gap += cur - best.1;
            lin += self.c[s0 + best.0] - cr;
            if ab != 0.0 {
                for (pos, &cl) in blk.eligible.iter().enumerate() {
                    delta[cl] -= ab * r[s0 + pos];
                }
                delta[blk.eligible[best.0]] += ab;
            }
        }
        let gamma = line_search(t, &delta, lin);
        if gamma > 0.0 {
            for (b, blk) in m.blocks.iter().enumerate() {
                let s0 = starts[b];
                for pos in 0..blk.eligible.len() {
                    r[s0 + pos] *= 1.0 - gamma;
                }
                r[s0 + vertex[b]] += gamma;
            }
        }
        Some((gamma, gap))
    }

    /// Exact minimization of every block in turn, the others held fixed.
    fn sweep(&self, r: &mut [f64], t: &mut [f64], scratch: &mut BlockScratch) {
        let m = &self.problem.model;
        for (b, blk) in m.blocks.iter().enumerate() {
            let s0 = self.problem.layout.r_start[b];
            let e = blk.eligible.len();
            let ab = self.a[b];
            let rb = &mut r[s0..s0 + e];
            for (pos, &cl) in blk.eligible.iter().enumerate() {
                t[cl] = (t[cl] - ab * rb[pos]).max(0.0);
            }
            block_argmin(ab, &blk.eligible, t, &self.c[s0..s0 + e], rb, scratch);
            for (pos, &cl) in blk.eligible.iter().enumerate() {
                t[cl] += ab * rb[pos];
            }
        }
    }
}

/// Minimizer over `[0, 1]` of `h(g) = sum_k (t_k + g d_k) ln(t_k + g d_k) - g * lin`,
/// a convex function with `h'(0) = -gap < 0`.
fn line_search(t: &[f64], d: &[f64], lin: f64) -> f64 {
    let dh = |g: f64| -> f64 {
        t.iter()
            .zip(d)
            .filter(|(_, &dv)| dv != 0.0)
            .map(|(&tv, &dv)| dv * (1.0 + ln_floor(tv + g * dv)))
            .sum::<f64>()
            - lin
    };
    if dh(1.0) <= 0.0 {
        return 1.0;
    }
    if dh(0.0) >= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if dh(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Default)]
struct BlockScratch {
    z: Vec<f64>,
    base: Vec<f64>,
    order: Vec<usize>,
}

/// Exact minimizer over the simplex of
/// `sum_k (T_k + a r_k) ln(T_k + a r_k) - sum_k c_k r_k`, where `T` is the mass
/// the other blocks put on each eligible cluster.
///
/// Stationarity gives `r_k = max(0, exp(nu + z_k) - T_k) / a` with
/// `z_k = c_k / a - 1`; `nu` is found by scanning the breakpoints `ln T_k - z_k`.
fn block_argmin(
    a: f64,
    eligible: &[usize],
    t: &[f64],
    c: &[f64],
    out: &mut [f64],
    s: &mut BlockScratch,
) {
    let e = eligible.len();
    out.iter_mut().for_each(|v| *v = 0.0);
    if !(a > 0.0) {
        // Purely linear: the best vertex, lowest index on ties.
        let mut best = 0;
        for pos in 1..e {
            if c[pos] > c[best] {
                best = pos;
            }
        }
        out[best] = 1.0;
        return;
    }
    s.z.clear();
    s.z.extend(c.iter().map(|&cv| cv / a - 1.0));
    s.base.clear();
    s.base.extend(eligible.iter().map(|&cl| t[cl]));
    let brk = |pos: usize, z: &[f64], base: &[f64]| -> f64 {
        if base[pos] > 0.0 {
            base[pos].ln() - z[pos]
        } else {
            f64::NEG_INFINITY
        }
    };
    s.order.clear();
    s.order.extend(0..e);
    {
        let (z, base) = (&s.z, &s.base);
        s.order
            .sort_by(|&i, &j| brk(i, z, base).total_cmp(&brk(j, z, base)).then(i.cmp(&j)));
    }
    // Grow the active set along the breakpoints until the root lies before the next one.
    let mut nu = 0.0;
    let mut sum_t = 0.0;
    // Running log-sum-exp of the active `z`, kept as `zmax + ln(acc)`.
    let mut zmax = f64::NEG_INFINITY;
    let mut acc = 0.0;
    for m in 1..=e {
        let pos = s.order[m - 1];
        sum_t += s.base[pos];
        let zp = s.z[pos];
        if zp > zmax {
            acc = acc * (zmax - zp).exp() + 1.0;
            zmax = zp;
        } else {
            acc += (zp - zmax).exp();
        }
        let lse = zmax + acc.ln();
        nu = (a + sum_t).ln() - lse;
        if m == e || nu <= brk(s.order[m], &s.z, &s.base) {
            break;
        }
    }
    let mut total = 0.0;
    for pos in 0..e {
        let v = ((nu + s.z[pos]).exp() - s.base[pos]).max(0.0) / a;
        out[pos] = v;
        total += v;
    }
    if total > 0.0 {
        out.iter_mut().for_each(|v| *v /= total);
    } else {
        out[s.order[0]] = 1.0;
    }
}

/// Outcome of one DC run before rounding.
#[derive(Debug, Clone)]
pub(crate) struct DcaRun {
    pub x: Vec<f64>,
    pub trace_bits: Vec<f64>,
    pub iterations: usize,
    pub unconverged_subproblems: usize,
}

/// Iterates linearize-and-solve until the DC value moves by at most
/// `opts.epsilon` bits.
pub(crate) fn dca_run(problem: &DcProblem, r0: Vec<f64>, opts: &DesignOptions) -> DcaRun {
    let r_off = problem.layout.r_offset();
    let mut x = problem.point_from_r(&r0);
    let mut value = problem.bits(problem.value_nats(&x));
    let mut trace = vec![value];
    let mut iterations = 0;
    let mut unconverged = 0;
    let mut y = vec![0.0; problem.dim];
    while iterations < opts.max_iters {
        iterations += 1;
        let k = problem.layout.k;
        for (yv, &xv) in y[k..r_off].iter_mut().zip(&x[k..r_off]) {
            *yv = 1.0 + ln_floor(xv);
        }
        let sol = Reduced::new(problem, &y).solve(
            &x[r_off..],
            opts.subproblem_tol,
            opts.subproblem_max_iters,
        );
        if !sol.converged {
            unconverged += 1;
        }
        x = problem.point_from_r(&sol.r);
        let next = problem.bits(problem.value_nats(&x));
        trace.push(next);
        let moved = (value - next).abs();
        value = next;
        if moved <= opts.epsilon {
            break;
        }
    }
    DcaRun {
        x,
        trace_bits: trace,
        iterations,
        unconverged_subproblems: unconverged,
    }
}

/// Soft-solution quality and the two hard roundings considered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcaDiagnostics {
    /// DC objective at the converged soft point (bits per symbol).
    pub soft_objective: f64,
    /// Objective after rounding every row to its largest entry and re-centering.
    pub argmax_objective: f64,
    /// Objective after rounding every row to its KL-closest soft center and
    /// re-centering; never above `soft_objective`.
    pub argmin_objective: f64,
    pub outer_iterations: usize,
    pub unconverged_subproblems: usize,
}

fn rounded_objective(model: &BlockModel, owner: &[usize]) -> f64 {
    let centers = model.centroids(owner);
    model.objective(owner, &model.div_table(&centers)) * LOG2_E
}

/// Hard-rounds a DC run (keeping the better of argmax and argmin-KL rounding,
/// ties to argmax) and polishes it with Lloyd iterations.
pub(crate) fn round_and_polish(
    problem: &DcProblem,
    run: &DcaRun,
    policy: EmptyPolicy,
    max_iters: usize,
) -> (LloydOutcome, DcaDiagnostics) {
    let model = &problem.model;
    let r_off = problem.layout.r_offset();
    let r = &run.x[r_off..];
    let argmax: Vec<usize> = model
        .blocks
        .iter()
        .enumerate()
        .map(|(b, blk)| {
            let rb = &r[problem.layout.r_start[b]..problem.layout.r_start[b] + blk.eligible.len()];
            let mut best = 0;
            for (pos, &v) in rb.iter().enumerate() {
                if v > rb[best] {
                    best = pos;
                }
            }
            blk.eligible[best]
        })
        .collect();
    let soft_centers = problem.centers(&run.x);
    let (argmin, _) = model.assign(&model.div_table(&soft_centers));
    let argmax_objective = rounded_objective(model, &argmax);
    let argmin_objective = rounded_objective(model, &argmin);
    let diag = DcaDiagnostics {
        soft_objective: *run.trace_bits.last().expect("trace is nonempty"),
        argmax_objective,
        argmin_objective,
        outer_iterations: run.iterations,
        unconverged_subproblems: run.unconverged_subproblems,
    };
    let owner = if argmin_objective < argmax_objective {
        argmin
    } else {
        argmax
    };
    let out = lloyd(
        model,
        Init::Owner(owner),
        policy,
        StopRule::FixedPoint,
        max_iters,
    );
    (out, diag)
}

fn dca_result(
    problem: &DcProblem,
    r0: Vec<f64>,
    opts: &DesignOptions,
    restart: usize,
) -> Result<DesignResult> {
    let run = dca_run(problem, r0, opts);
    let (out, diag) = round_and_polish(problem, &run, EmptyPolicy::ReseedFarthest, opts.max_iters);
    let iterations = run.iterations;
    result_from_lloyd(out, run.trace_bits, iterations, restart, Some(diag))
}

/// DC-programming design: best of `opts.restarts` runs from random soft
/// assignments, each hard-rounded and polished.
pub fn design_dca(
    pref: &DiscretePreference,
    k: usize,
    opts: &DesignOptions,
) -> Result<DesignResult> {
    opts.validate()?;
    let problem = dc_transform(pref, k)?;
    let seed = derive_seed(opts.seed, DCA_STREAM);
    let runs: Vec<Result<DesignResult>> = (0..opts.restarts)
        .into_par_iter()
        .map(|restart| {
            let mut rng = stream_rng(seed, restart as u64);
            dca_result(&problem, problem.random_r(&mut rng), opts, restart)
        })
        .collect();
    let mut diags = Vec::with_capacity(runs.len());
    for run in runs.iter().flatten() {
        diags.extend(run.dca_runs.iter().cloned());
    }
    let mut best = pick_best(runs)?;
    best.dca_runs = diags;
    Ok(best)
}

/// DC-programming design started from the 0-1 assignment induced by `init`.
pub fn design_dca_from(
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
    let problem = dc_transform(pref, init.k())?;
    let model = &problem.model;
    let logs: Vec<Vec<f64>> = init.codebooks().iter().map(|q| log_table(q.q())).collect();
    let k = init.k();
    let mut table = vec![f64::INFINITY; model.items() * k];
    for j in 0..model.items() {
        for (c, lq) in logs.iter().enumerate() {
            table[j * k + c] = model.div(j, lq);
        }
    }
    let (owner, _) = model.assign(&table);
    dca_result(&problem, problem.onehot_r(&owner), opts, WARM_START)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    fn block_value(a: f64, base: &[f64], c: &[f64], r: &[f64]) -> f64 {
        base.iter()
            .zip(r)
            .map(|(&t, &rv)| xlnx(t + a * rv))
            .sum::<f64>()
            - c.iter().zip(r).map(|(c, r)| c * r).sum::<f64>()
    }

    #[test]
    fn block_argmin_beats_random_points() {
        let mut rng = stream_rng(7, 0);
        let mut scratch = BlockScratch::default();
        for case in 0..200 {
            let e = 1 + case % 6;
            let eligible: Vec<usize> = (0..e).collect();
            let a = if case % 10 == 0 {
                0.0
            } else {
                rng.random::<f64>()
            };
            let base: Vec<f64> = (0..e)
                .map(|i| {
                    if (case + i) % 3 == 0 {
                        0.0
                    } else {
                        rng.random::<f64>()
                    }
                })
                .collect();
            let c: Vec<f64> = (0..e).map(|_| 4.0 * rng.random::<f64>() - 2.0).collect();
            let mut r = vec![0.0; e];
            block_argmin(a, &eligible, &base, &c, &mut r, &mut scratch);
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12 && r.iter().all(|&v| v >= 0.0));
            let best = block_value(a, &base, &c, &r);
            for _ in 0..200 {
                let q = uniform_simplex(e, &mut rng);
                assert!(best <= block_value(a, &base, &c, &q) + 1e-12, "case {case}");
            }
        }
    }
}
