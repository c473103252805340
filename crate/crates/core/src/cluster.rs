//! Weighted KL clustering over "blocks".
//!
//! A block is one weighted copy of an SPV that must be coded by one of an
//! eligible subset of codebooks. The single-user problem has one block per
//! item (every codebook eligible); the two-user problem has three blocks per
//! item (multicast, user-1-only, user-2-only) with restricted eligibility.

use std::f64::consts::LOG2_E;

use rand::Rng;

use crate::info::{kl_nats_pre, log_table, neg_entropy_nats};
use crate::rng::sample_index;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Block {
    pub item: usize,
    pub weight: f64,
    /// Eligible cluster ids in preference order (ties go to the earliest entry).
    pub eligible: Vec<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct BlockModel {
    pub n: usize,
    pub clusters: usize,
    /// Row-major `J x N` SPV matrix.
    pub points: Vec<f64>,
    pub negent: Vec<f64>,
    pub mass: Vec<f64>,
    pub blocks: Vec<Block>,
}

impl BlockModel {
    pub fn new(n: usize, clusters: usize, spvs: &[&[f64]], blocks: Vec<Block>) -> Self {
        let mut points = Vec::with_capacity(spvs.len() * n);
        for p in spvs {
            debug_assert_eq!(p.len(), n);
            points.extend_from_slice(p);
        }
        let negent = spvs.iter().map(|p| neg_entropy_nats(p)).collect();
        let mass = spvs.iter().map(|p| p.iter().sum()).collect();
        BlockModel {
            n,
            clusters,
            points,
            negent,
            mass,
            blocks,
        }
    }

    /// One block per item, every cluster eligible.
    pub fn single(spvs: &[&[f64]], weights: &[f64], clusters: usize) -> Self {
        let n = spvs[0].len();
        let all: Vec<usize> = (0..clusters).collect();
        let blocks = weights
            .iter()
            .enumerate()
            .map(|(j, &w)| Block {
                item: j,
                weight: w,
                eligible: all.clone(),
            })
            .collect();
        BlockModel::new(n, clusters, spvs, blocks)
    }

    pub fn items(&self) -> usize {
        self.negent.len()
    }

    #[inline]
    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.n..(j + 1) * self.n]
    }

    #[inline]
    pub fn div(&self, j: usize, log_q: &[f64]) -> f64 {
        kl_nats_pre(self.point(j), self.negent[j], log_q)
    }

    /// Item-by-cluster divergence table (nats); `None` centers give `+inf`.
    pub fn div_table(&self, centers: &[Option<Vec<f64>>]) -> Vec<f64> {
        let logs: Vec<Option<Vec<f64>>> = centers
            .iter()
            .map(|c| c.as_ref().map(|q| log_table(q)))
            .collect();
        let k = self.clusters;
        let mut table = vec![f64::INFINITY; self.items() * k];
        for j in 0..self.items() {
            for (c, lq) in logs.iter().enumerate() {
                if let Some(lq) = lq {
                    table[j * k + c] = self.div(j, lq);
                }
            }
        }
        table
    }

    /// Argmin assignment of every block, with the chosen divergence.
    pub fn assign(&self, table: &[f64]) -> (Vec<usize>, Vec<f64>) {
        let k = self.clusters;
        let mut owner = Vec::with_capacity(self.blocks.len());
        let mut dist = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let row = &table[b.item * k..(b.item + 1) * k];
            let mut best = (b.eligible[0], row[b.eligible[0]]);
            for &c in &b.eligible[1..] {
                if row[c] < best.1 {
                    best = (c, row[c]);
                }
            }
            owner.push(best.0);
            dist.push(best.1);
        }
        (owner, dist)
    }

    /// `sum_b w_b D(p_b || q_owner(b))` in nats; zero-weight blocks contribute nothing.
    pub fn objective(&self, owner: &[usize], table: &[f64]) -> f64 {
        let k = self.clusters;
        self.blocks
            .iter()
            .zip(owner)
            .filter(|(b, _)| b.weight > 0.0)
            .map(|(b, &c)| b.weight * table[b.item * k + c])
            .sum()
    }

    /// Weighted centroid of the blocks owned by every cluster (`None` when the
    /// owned weight is zero).
    pub fn centroids(&self, owner: &[usize]) -> Vec<Option<Vec<f64>>> {
        let n = self.n;
        let mut sums = vec![0.0; self.clusters * n];
        let mut mass = vec![0.0; self.clusters];
        for (b, &c) in self.blocks.iter().zip(owner) {
            if b.weight > 0.0 {
                let p = self.point(b.item);
                for (s, &x) in sums[c * n..(c + 1) * n].iter_mut().zip(p) {
                    *s += b.weight * x;
                }
                mass[c] += b.weight * self.mass[b.item];
            }
        }
        (0..self.clusters)
            .map(|c| {
                if mass[c] > 0.0 {
                    Some(
                        sums[c * n..(c + 1) * n]
                            .iter()
                            .map(|s| s / mass[c])
                            .collect(),
                    )
                } else {
                    None
                }
            })
            .collect()
    }

    /// Weighted mean of every block eligible for `c`, falling back to the plain
    /// mean of all items; used for clusters that have never owned anything.
    pub fn fallback_center(&self, c: usize) -> Vec<f64> {
        let n = self.n;
        let mut sum = vec![0.0; n];
        let mut mass = 0.0;
        for b in self
            .blocks
            .iter()
            .filter(|b| b.weight > 0.0 && b.eligible.contains(&c))
        {
            for (s, &x) in sum.iter_mut().zip(self.point(b.item)) {
                *s += b.weight * x;
            }
            mass += b.weight * self.mass[b.item];
        }
        if mass <= 0.0 {
            for j in 0..self.items() {
                for (s, &x) in sum.iter_mut().zip(self.point(j)) {
                    *s += x;
                }
                mass += self.mass[j];
            }
        }
        sum.into_iter().map(|s| s / mass).collect()
    }
}

/// What to do with a cluster that owns no weight after an assignment step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum EmptyPolicy {
    /// Move the center onto the block with the largest `w_b * D_b`.
    ReseedFarthest,
    /// Keep the previous center.
    Retain,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum StopRule {
    /// Stop when an assignment step changes nothing.
    FixedPoint,
    /// Also stop when no center coordinate moved by more than the tolerance.
    CenterShift(f64),
}

pub(crate) enum Init {
    Centers(Vec<Vec<f64>>),
    Owner(Vec<usize>),
}

#[derive(Debug, Clone)]
pub(crate) struct LloydOutcome {
    pub centers: Vec<Vec<f64>>,
    pub owner: Vec<usize>,
    pub objective_nats: f64,
    pub iterations: usize,
    /// Objective (bits) after the initial assignment and after every center and
    /// assignment step.
    pub trace_bits: Vec<f64>,
}

/// Alternating center/assignment iterations (the KL analogue of Lloyd's method).
pub(crate) fn lloyd(
    model: &BlockModel,
    init: Init,
    policy: EmptyPolicy,
    stop: StopRule,
    max_iters: usize,
) -> LloydOutcome {
    let mut trace = Vec::new();
    let (mut centers, mut owner, mut table) = match init {
        Init::Centers(c) => {
            let opt: Vec<Option<Vec<f64>>> = c.iter().cloned().map(Some).collect();
            let table = model.div_table(&opt);
            let (owner, _) = model.assign(&table);
            trace.push(model.objective(&owner, &table) * LOG2_E);
            (c, owner, table)
        }
        Init::Owner(owner) => {
            let prev: Vec<Vec<f64>> = (0..model.clusters)
                .map(|c| model.fallback_center(c))
                .collect();
            let (centers, table, _) = center_step(model, &owner, &prev, policy);
            trace.push(model.objective(&owner, &table) * LOG2_E);
            let (new_owner, _) = model.assign(&table);
            trace.push(model.objective(&new_owner, &table) * LOG2_E);
            if new_owner == owner {
                let objective_nats = model.objective(&owner, &table);
                return LloydOutcome {
                    centers,
                    owner,
                    objective_nats,
                    iterations: 1,
                    trace_bits: trace,
                };
            }
            (centers, new_owner, table)
        }
    };

    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let (new_centers, new_table, shift) = center_step(model, &owner, &centers, policy);
        centers = new_centers;
        table = new_table;
        trace.push(model.objective(&owner, &table) * LOG2_E);
        let (new_owner, _) = model.assign(&table);
        trace.push(model.objective(&new_owner, &table) * LOG2_E);
        let unchanged = new_owner == owner;
        owner = new_owner;
        if unchanged {
            break;
        }
        if let StopRule::CenterShift(eps) = stop {
            if shift <= eps {
                break;
            }
        }
    }
    let objective_nats = model.objective(&owner, &table);
    LloydOutcome {
        centers,
        owner,
        objective_nats,
        iterations,
        trace_bits: trace,
    }
}

/// Recomputes centers from `owner`; returns the centers, the new divergence
/// table and the largest coordinate shift.
fn center_step(
    model: &BlockModel,
    owner: &[usize],
    prev: &[Vec<f64>],
    policy: EmptyPolicy,
) -> (Vec<Vec<f64>>, Vec<f64>, f64) {
    let fresh = model.centroids(owner);
    let empty: Vec<usize> = (0..model.clusters)
        .filter(|&c| fresh[c].is_none())
        .collect();
    let mut centers: Vec<Option<Vec<f64>>> = fresh;
    if !empty.is_empty() {
        match policy {
            EmptyPolicy::Retain => {
                for &c in &empty {
                    centers[c] = Some(prev[c].clone());
                }
            }
            EmptyPolicy::ReseedFarthest => {
                let table = model.div_table(&centers);
                let k = model.clusters;
                let mut cost: Vec<f64> = model
                    .blocks
                    .iter()
                    .zip(owner)
                    .map(|(b, &c)| {
                        if b.weight > 0.0 {
                            b.weight * table[b.item * k + c]
                        } else {
                            0.0
                        }
                    })
                    .collect();
                for &c in &empty {
                    let mut best: Option<(usize, f64)> = None;
                    for (i, b) in model.blocks.iter().enumerate() {
                        if b.eligible.contains(&c)
                            && cost[i] > 0.0
                            && best.is_none_or(|(_, v)| cost[i] > v)
                        {
                            best = Some((i, cost[i]));
                        }
                    }
                    match best {
                        Some((i, _)) => {
                            centers[c] = Some(model.point(model.blocks[i].item).to_vec());
                            cost[i] = 0.0;
                        }
                        None => centers[c] = Some(prev[c].clone()),
                    }
                }
            }
        }
    }
    let centers: Vec<Vec<f64>> = centers
        .into_iter()
        .map(|c| c.expect("filled above"))
        .collect();
    let shift = centers
        .iter()
        .zip(prev)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    let opt: Vec<Option<Vec<f64>>> = centers.iter().cloned().map(Some).collect();
    let table = model.div_table(&opt);
    (centers, table, shift)
}

/// D^2 seeding over items: draws an item with probability proportional to
/// `weight_j * G_j^2`, where `G_j` is the divergence to the closest center in
/// `existing`. Items at infinite divergence take precedence (drawn proportional
/// to their weight). The first draw, with no existing centers, is proportional
/// to the weight alone. Returns `None` when no item has positive seeding weight.
pub(crate) fn d2_draw<R: Rng + ?Sized>(
    model: &BlockModel,
    item_weights: &[f64],
    existing: &[Vec<f64>],
    rng: &mut R,
) -> Option<usize> {
    if existing.is_empty() {
        return sample_index(item_weights, rng);
    }
    let logs: Vec<Vec<f64>> = existing.iter().map(|q| log_table(q)).collect();
    let g: Vec<f64> = (0..model.items())
        .map(|j| {
            logs.iter()
                .map(|lq| model.div(j, lq))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let infinite: Vec<f64> = item_weights
        .iter()
        .zip(&g)
        .map(|(&w, &d)| if w > 0.0 && d.is_infinite() { w } else { 0.0 })
        .collect();
    if infinite.iter().any(|&w| w > 0.0) {
        return sample_index(&infinite, rng);
    }
    let weights: Vec<f64> = item_weights
        .iter()
        .zip(&g)
        .map(|(&w, &d)| w * d * d)
        .collect();
    sample_index(&weights, rng)
}
