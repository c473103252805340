//! Exact two-codebook partition of the 3-letter simplex.
//!
//! `p` prefers `q1` over `q2` iff `sum_n p_n ln(q1_n / q2_n) >= 0`, a half-plane
//! through the triangle with vertices `A = e1`, `B = e2`, `C = e3`. Both
//! regions are convex polygons; their area centroids are the uniform-density
//! centroid updates.

use crate::error::{Error, Result};
use crate::model::Codebook;

type P3 = [f64; 3];

const VERTICES: [P3; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionN3 {
    /// `w_n = ln(q1_n / q2_n)`; region 0 is `{p : w . p >= 0}`.
    pub normal: P3,
    /// Endpoints of the boundary segment inside the simplex, if it crosses it.
    pub boundary: Option<[P3; 2]>,
    /// Polygon vertices (counter-clockwise in the `(p1, p2)` chart) of the
    /// regions won by `q1` and `q2`; empty when a codebook wins nowhere.
    pub regions: [Vec<P3>; 2],
    /// Fraction of the simplex covered by each region.
    pub areas: [f64; 2],
    /// Area centroids (`None` for empty regions).
    pub centroids: [Option<P3>; 2],
}

fn dot(a: &P3, b: &P3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn lerp(a: &P3, b: &P3, t: f64) -> P3 {
    [
        a[0] + t * (b[0] - a[0]),
        a[1] + t * (b[1] - a[1]),
        a[2] + t * (b[2] - a[2]),
    ]
}

/// Keeps the part of `poly` with `sign * (w . p) >= 0` (one Sutherland-Hodgman pass).
fn clip(poly: &[P3], w: &P3, sign: f64) -> Vec<P3> {
    let mut out = Vec::new();
    for i in 0..poly.len() {
        let (a, b) = (&poly[i], &poly[(i + 1) % poly.len()]);
        let (ha, hb) = (sign * dot(w, a), sign * dot(w, b));
        if ha >= 0.0 {
            out.push(*a);
        }
        if (ha > 0.0 && hb < 0.0) || (ha < 0.0 && hb > 0.0) {
            out.push(lerp(a, b, ha / (ha - hb)));
        }
    }
    out
}

/// Signed shoelace area and centroid in the `(p1, p2)` chart, lifted back to
/// the simplex.
fn area_centroid(poly: &[P3]) -> (f64, Option<P3>) {
    if poly.len() < 3 {
        return (0.0, None);
    }
    let (mut a2, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for i in 0..poly.len() {
        let (p, q) = (&poly[i], &poly[(i + 1) % poly.len()]);
        let cross = p[0] * q[1] - q[0] * p[1];
        a2 += cross;
        cx += (p[0] + q[0]) * cross;
        cy += (p[1] + q[1]) * cross;
    }
    if a2.abs() < 1e-300 {
        return (0.0, None);
    }
    let (x, y) = (cx / (3.0 * a2), cy / (3.0 * a2));
    // The chart triangle has area 1/2.
    (a2.abs(), Some([x, y, 1.0 - x - y]))
}

fn check(q: &Codebook) -> Result<()> {
    if q.len() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            actual: q.len(),
        });
    }
    if q.q().iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidArgument(
            "codebooks must be strictly positive".into(),
        ));
    }
    Ok(())
}

pub fn exact_partition_n3(q1: &Codebook, q2: &Codebook) -> Result<PartitionN3> {
    check(q1)?;
    check(q2)?;
    let w: P3 = [0, 1, 2].map(|n| (q1.q()[n] / q2.q()[n]).ln());
    if w.iter().all(|&v| v == 0.0) {
        return Err(Error::NoBoundary);
    }
    let tri = VERTICES.to_vec();
    let regions = [clip(&tri, &w, 1.0), clip(&tri, &w, -1.0)];
    let (a0, c0) = area_centroid(&regions[0]);
    let (a1, c1) = area_centroid(&regions[1]);

    let mut ends: Vec<P3> = Vec::new();
    for i in 0..3 {
        let (a, b) = (&VERTICES[i], &VERTICES[(i + 1) % 3]);
        let (ha, hb) = (dot(&w, a), dot(&w, b));
        let cand = if ha == 0.0 {
            Some(*a)
        } else if (ha > 0.0 && hb < 0.0) || (ha < 0.0 && hb > 0.0) {
            Some(lerp(a, b, ha / (ha - hb)))
        } else {
            None
        };
        if let Some(p) = cand {
            if !ends
                .iter()
                .any(|e| (0..3).all(|k| (e[k] - p[k]).abs() < 1e-15))
            {
                ends.push(p);
            }
        }
    }
    let boundary = if ends.len() == 2 {
        Some([ends[0], ends[1]])
    } else {
        None
    };

    Ok(PartitionN3 {
        normal: w,
        boundary,
        regions: [regions[0].clone(), regions[1].clone()],
        areas: [a0, a1],
        centroids: [c0, c1],
    })
}

/// One exact centroid iteration for the uniform preference: each codebook
/// moves to the centroid of the region it wins (an empty region keeps its
/// codebook).
pub fn exact_iteration_n3(q1: &Codebook, q2: &Codebook) -> Result<(Codebook, Codebook)> {
    let part = exact_partition_n3(q1, q2)?;
    let next = |c: Option<P3>, old: &Codebook| -> Result<Codebook> {
        match c {
            Some(p) => Codebook::new(p.iter().map(|v| v.max(0.0)).collect()),
            None => Ok(old.clone()),
        }
    };
    Ok((next(part.centroids[0], q1)?, next(part.centroids[1], q2)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, uniform_simplex};

    fn cb(v: [f64; 3]) -> Codebook {
        Codebook::new(v.to_vec()).unwrap()
    }

    fn mc_centroids(q1: &Codebook, q2: &Codebook, s: usize, seed: u64) -> [Option<P3>; 2] {
        let mut rng = stream_rng(seed, 0);
        let mut sums = [[0.0; 3]; 2];
        let mut counts = [0usize; 2];
        for _ in 0..s {
            let p = uniform_simplex(3, &mut rng);
            let d1: f64 = (0..3).map(|n| p[n] * (p[n] / q1.q()[n]).ln()).sum();
            let d2: f64 = (0..3).map(|n| p[n] * (p[n] / q2.q()[n]).ln()).sum();
            let r = if d1 <= d2 { 0 } else { 1 };
            counts[r] += 1;
            for n in 0..3 {
                sums[r][n] += p[n];
            }
        }
        [0, 1].map(|r| (counts[r] > 0).then(|| sums[r].map(|v| v / counts[r] as f64)))
    }

    #[test]
    fn matches_monte_carlo() {
        let (q1, q2) = (cb([0.5, 0.3, 0.2]), cb([0.2, 0.3, 0.5]));
        let part = exact_partition_n3(&q1, &q2).unwrap();
        let mc = mc_centroids(&q1, &q2, 100_000, 9);
        for r in 0..2 {
            let (e, m) = (part.centroids[r].unwrap(), mc[r].unwrap());
            for n in 0..3 {
                assert!((e[n] - m[n]).abs() < 0.02, "region {r}: {e:?} vs {m:?}");
            }
        }
        assert!((part.areas[0] + part.areas[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mirror_pair_splits_along_median() {
        // Swapping symbols 1 and 2 maps q1 to q2, so the boundary is the median from C.
        let part = exact_partition_n3(&cb([0.6, 0.3, 0.1]), &cb([0.3, 0.6, 0.1])).unwrap();
        let [d1, d2] = part.boundary.unwrap();
        for d in [d1, d2] {
            assert!((d[0] - d[1]).abs() < 1e-12);
        }
        let (c0, c1) = (part.centroids[0].unwrap(), part.centroids[1].unwrap());
        assert!(
            (c0[0] - c1[1]).abs() < 1e-12
                && (c0[1] - c1[0]).abs() < 1e-12
                && (c0[2] - c1[2]).abs() < 1e-12
        );
        assert!((part.areas[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn identical_codebooks_have_no_boundary() {
        let q = cb([0.2, 0.3, 0.5]);
        assert!(matches!(exact_partition_n3(&q, &q), Err(Error::NoBoundary)));
        assert!(exact_partition_n3(&cb([0.0, 0.5, 0.5]), &q).is_err());
    }

    #[test]
    fn triangle_region_centroid() {
        let (q1, q2) = (cb([0.1, 0.1, 0.8]), cb([0.45, 0.45, 0.1]));
        let part = exact_partition_n3(&q1, &q2).unwrap();
        assert_eq!(part.regions[0].len(), 3);
        let [d1, d2] = part.boundary.unwrap();
        let c = [0.0, 0.0, 1.0];
        let expect: Vec<f64> = (0..3).map(|n| (c[n] + d1[n] + d2[n]) / 3.0).collect();
        let got = part.centroids[0].unwrap();
        for n in 0..3 {
            assert!((got[n] - expect[n]).abs() < 1e-12);
        }
        let (n1, _) = exact_iteration_n3(&q1, &q2).unwrap();
        for n in 0..3 {
            assert!((n1.q()[n] - expect[n]).abs() < 1e-12);
        }
    }
}
