use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geodesic::PathResult;
use crate::pointcloud::{box_index, dist, PointSet};

/// Box path of a polygonal path, with boxes of side `eps` centred on
/// `eps·ν` as in [`PointSet::box_occupancy`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxPathStats {
    pub eps: f64,
    pub boxes: Vec<Vec<i64>>,
    /// `M̃`, the number of boxes.
    pub length: usize,
    pub occupied_fraction: f64,
    /// Links longer than this must have their midpoint covered.
    pub long_link_threshold: f64,
    pub long_links: usize,
    pub long_links_covered: usize,
    /// Consecutive boxes are distinct and touch (sup-norm index gap 1).
    pub connected: bool,
}

impl BoxPathStats {
    pub fn midpoints_covered(&self) -> bool {
        self.long_links == self.long_links_covered
    }
}

/// Default box side `0.5·λ^{−1/d}`.
pub fn default_box_size(density: f64, d: usize) -> f64 {
    0.5 * density.powf(-1.0 / d as f64)
}

fn closed_box_contains(nu: &[i64], eps: f64, x: &[f64]) -> bool {
    nu.iter().zip(x).all(|(&k, &v)| {
        let c = k as f64 * eps;
        v >= c - 0.5 * eps && v <= c + 0.5 * eps
    })
}

/// Parameter interval of `a + t(b − a)`, `t ∈ [0, 1]`, inside the closed box.
fn clip(nu: &[i64], eps: f64, a: &[f64], b: &[f64]) -> Option<(f64, f64)> {
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for j in 0..a.len() {
        let lo = (nu[j] as f64 - 0.5) * eps;
        let hi = (nu[j] as f64 + 0.5) * eps;
        let v = b[j] - a[j];
        if v == 0.0 {
            if a[j] < lo || a[j] > hi {
                return None;
            }
            continue;
        }
        let (s, e) = if v > 0.0 { ((lo - a[j]) / v, (hi - a[j]) / v) } else { ((hi - a[j]) / v, (lo - a[j]) / v) };
        t0 = t0.max(s);
        t1 = t1.min(e);
    }
    (t0 <= t1).then_some((t0, t1))
}

/// Box path `β`: start in the box holding the first vertex; the successor
/// of a box is the one the path enters when it leaves that box for the last
/// time. Reports its length, occupancy and whether every long link has its
/// midpoint in some box of `β`.
pub fn boxpath_stats(ps: &PointSet, p: &PathResult, eps: f64) -> Result<BoxPathStats> {
    if !(eps > 0.0 && eps.is_finite()) {
        return invalid(format!("box size must be positive, got {eps}"));
    }
    let pts = &p.points;
    if pts.is_empty() {
        return invalid("box path of an empty path");
    }
    let d = pts[0].len();
    let total: f64 = pts.windows(2).map(|w| dist(&w[0], &w[1])).sum();
    let guard = 4 * d * ((total / eps) as usize + 2) + 64;
    let mut cur: Vec<i64> = pts[0].iter().map(|&v| box_index(v, eps)).collect();
    let mut boxes = vec![cur.clone()];
    let last_seg = pts.len().saturating_sub(1);
    while boxes.len() <= guard && !closed_box_contains(&cur, eps, &pts[pts.len() - 1]) {
        // latest segment meeting the box, and where it leaves
        let Some((i, t1)) = (0..last_seg).rev().find_map(|i| clip(&cur, eps, &pts[i], &pts[i + 1]).map(|(_, t1)| (i, t1))) else {
            break;
        };
        let (a, b) = if t1 < 1.0 || i + 1 == last_seg { (&pts[i], &pts[i + 1]) } else { (&pts[i + 1], &pts[i + 2]) };
        let t_exit = if t1 < 1.0 || i + 1 == last_seg { t1 } else { 0.0 };
        let mut next = cur.clone();
        // the faces through which the segment exits are those whose slab
        // bound is reached first
        let exits: Vec<f64> = (0..d)
            .map(|j| {
                let v = b[j] - a[j];
                if v > 0.0 {
                    ((cur[j] as f64 + 0.5) * eps - a[j]) / v
                } else if v < 0.0 {
                    ((cur[j] as f64 - 0.5) * eps - a[j]) / v
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        let first = exits.iter().copied().fold(f64::INFINITY, f64::min).max(t_exit);
        for j in 0..d {
            if exits[j] <= first {
                next[j] += if b[j] > a[j] { 1 } else { -1 };
            }
        }
        if next == cur {
            break;
        }
        cur = next;
        boxes.push(cur.clone());
    }
    let occ = ps.box_occupancy(eps)?;
    let occupied = boxes.iter().filter(|nu| occ.occupied(nu)).count();
    let threshold = 33.0 * eps * ((d + 3) as f64).sqrt();
    let mut long_links = 0;
    let mut covered = 0;
    for w in pts.windows(2) {
        if dist(&w[0], &w[1]) > threshold {
            long_links += 1;
            let mid: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| 0.5 * (a + b)).collect();
            if boxes.iter().any(|nu| closed_box_contains(nu, eps, &mid)) {
                covered += 1;
            }
        }
    }
    let connected = boxes.windows(2).all(|w| w[0] != w[1] && w[0].iter().zip(&w[1]).all(|(a, b)| (a - b).abs() <= 1));
    Ok(BoxPathStats {
        eps,
        length: boxes.len(),
        occupied_fraction: occupied as f64 / boxes.len() as f64,
        boxes,
        long_link_threshold: threshold,
        long_links,
        long_links_covered: covered,
        connected,
    })
}
