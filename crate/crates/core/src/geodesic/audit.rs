//! Geometric audits of computed geodesics.

use serde::{Deserialize, Serialize};

use super::PathResult;
use crate::pointcloud::dist;

/// Segments closer than this count as touching.
pub const CROSSING_TOLERANCE: f64 = 1e-9;
/// Point-pair budget per path for the doubling-back audit.
pub const DOUBLING_PAIR_CAP: usize = 10_000;
const GRID: [f64; 4] = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingViolation {
    pub link_first: usize,
    pub link_second: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingViolation {
    pub link_first: usize,
    pub link_second: usize,
    pub s: f64,
    pub t: f64,
    /// 16 for the endpoint bounds, 33 for the vertex-to-vertex bound.
    pub constant: u32,
    pub lhs: f64,
    pub rhs: f64,
}

fn lerp(a: &[f64], b: &[f64], s: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Parameters `(s, t)` of the closest points of `[p0, p1]` and `[q0, q1]`.
fn closest_params(p0: &[f64], p1: &[f64], q0: &[f64], q1: &[f64]) -> (f64, f64) {
    let d1 = sub(p1, p0);
    let d2 = sub(q1, q0);
    let r = sub(p0, q0);
    let (a, e, f) = (dot(&d1, &d1), dot(&d2, &d2), dot(&d2, &r));
    if a == 0.0 && e == 0.0 {
        return (0.0, 0.0);
    }
    if a == 0.0 {
        return (0.0, (f / e).clamp(0.0, 1.0));
    }
    let c = dot(&d1, &r);
    if e == 0.0 {
        return ((-c / a).clamp(0.0, 1.0), 0.0);
    }
    let b = dot(&d1, &d2);
    let denom = a * e - b * b;
    let mut s = if denom > 0.0 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    (s, t)
}

fn orient(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Distance between closed segments `[p0, p1]` and `[q0, q1]` in any
/// dimension; planar proper crossings are detected by orientation signs.
pub fn segment_segment_distance(p0: &[f64], p1: &[f64], q0: &[f64], q1: &[f64]) -> f64 {
    if p0.len() == 2 {
        let (o1, o2) = (orient(p0, p1, q0), orient(p0, p1, q1));
        let (o3, o4) = (orient(q0, q1, p0), orient(q0, q1, p1));
        if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
            return 0.0;
        }
    }
    let (s, t) = closest_params(p0, p1, q0, q1);
    let closest = dist(&lerp(p0, p1, s), &lerp(q0, q1, t));
    // the clamped solution can miss on near-parallel pairs; endpoints bound it
    let ends = [
        (p0, q0, q1),
        (p1, q0, q1),
        (q0, p0, p1),
        (q1, p0, p1),
    ]
    .iter()
    .map(|(x, a, b)| crate::costmodel::segment_distance(x, a, b))
    .fold(f64::INFINITY, f64::min);
    closest.min(ends)
}

/// Pairs of links, one from each path, that meet (within
/// [`CROSSING_TOLERANCE`]) without sharing an endpoint. Vertices are
/// identified by their coordinates.
pub fn crossing_audit(p1: &PathResult, p2: &PathResult) -> Vec<CrossingViolation> {
    let mut out = Vec::new();
    for i in 0..p1.points.len().saturating_sub(1) {
        let (a0, a1) = (&p1.points[i], &p1.points[i + 1]);
        for j in 0..p2.points.len().saturating_sub(1) {
            let (b0, b1) = (&p2.points[j], &p2.points[j + 1]);
            if a0 == b0 || a0 == b1 || a1 == b0 || a1 == b1 {
                continue;
            }
            let distance = segment_segment_distance(a0, a1, b0, b1);
            if distance <= CROSSING_TOLERANCE {
                out.push(CrossingViolation { link_first: i, link_second: j, distance });
            }
        }
    }
    out
}

/// Checks, for points `a` on link `i` and `b` on a later link `i'`, that
/// `|q_{i+1} − a| ≤ 16|a − b|`, `|q_{i'} − b| ≤ 16|a − b|` and
/// `|q_{i+1} − q_{i'}| ≤ 33|a − b|`. Each link pair is probed on the 4×4 grid
/// of parameters `{0, 1/3, 2/3, 1}` plus its closest-approach pair; beyond
/// [`DOUBLING_PAIR_CAP`] link pairs a regular stride is used.
pub fn no_doubling_back_audit(p: &PathResult) -> Vec<DoublingViolation> {
    let pts = &p.points;
    let m = pts.len().saturating_sub(1);
    let total = m * m.saturating_sub(1) / 2;
    let stride = total.div_ceil(DOUBLING_PAIR_CAP).max(1);
    let mut out = Vec::new();
    let mut idx = 0usize;
    for i in 0..m {
        for j in i + 1..m {
            idx += 1;
            if (idx - 1) % stride != 0 {
                continue;
            }
            let (qi, qi1, qj, qj1) = (&pts[i], &pts[i + 1], &pts[j], &pts[j + 1]);
            let scale = 1.0 + dist(qi, qi1).max(dist(qj, qj1));
            let slack = 1e-9 * scale;
            let mut probe = |s: f64, t: f64| {
                let a = lerp(qi, qi1, s);
                let b = lerp(qj, qj1, t);
                let ab = dist(&a, &b);
                let checks = [
                    (16, dist(qi1, &a), 16.0 * ab),
                    (16, dist(qj, &b), 16.0 * ab),
                    (33, dist(qi1, qj), 33.0 * ab),
                ];
                for (constant, lhs, rhs) in checks {
                    if lhs > rhs + slack {
                        out.push(DoublingViolation { link_first: i, link_second: j, s, t, constant, lhs, rhs });
                    }
                }
            };
            for &s in &GRID {
                for &t in &GRID {
                    probe(s, t);
                }
            }
            let (s, t) = closest_params(qi, qi1, qj, qj1);
            probe(s, t);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::EndpointMode;

    fn path(points: Vec<Vec<f64>>) -> PathResult {
        let link_lengths = points.windows(2).map(|w| dist(&w[0], &w[1])).collect();
        PathResult { mode: EndpointMode::Exact, ids: vec![], points, link_lengths, cost: 0.0, trusted: true, margin: 1.0 }
    }

    #[test]
    fn segment_distances() {
        let d = segment_segment_distance(&[0.0, 0.0], &[2.0, 2.0], &[0.0, 2.0], &[2.0, 0.0]);
        assert_eq!(d, 0.0);
        let d = segment_segment_distance(&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]);
        assert!((d - 1.0).abs() < 1e-15);
        let d = segment_segment_distance(&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.5, -1.0, 1.0], &[0.5, 1.0, 1.0]);
        assert!((d - 1.0).abs() < 1e-15);
        let d = segment_segment_distance(&[0.0, 0.0], &[1.0, 0.0], &[3.0, 0.0], &[4.0, 0.0]);
        assert!((d - 2.0).abs() < 1e-15);
    }

    #[test]
    fn crossing_cases() {
        let a = path(vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 0.0]]);
        assert!(crossing_audit(&a, &a).is_empty());
        let far = path(vec![vec![10.0, 10.0], vec![11.0, 12.0]]);
        assert!(crossing_audit(&a, &far).is_empty());
        let x = path(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let v = crossing_audit(&a, &x);
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].link_first, v[0].link_second), (0, 0));
    }

    #[test]
    fn doubling_back_cases() {
        assert!(no_doubling_back_audit(&path(vec![vec![0.0, 0.0], vec![1.0, 0.0]])).is_empty());
        assert!(no_doubling_back_audit(&path(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.3]])).is_empty());
        // a hairpin: the third link returns right next to the first
        let hairpin = path(vec![vec![0.0, 0.0], vec![10.0, 0.0], vec![10.0, 0.1], vec![0.0, 0.1]]);
        let v = no_doubling_back_audit(&hairpin);
        assert!(v.iter().any(|x| x.link_first == 0 && x.link_second == 2 && x.constant == 16));
    }
}
