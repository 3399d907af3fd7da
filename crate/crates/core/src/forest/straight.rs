use serde::{Deserialize, Serialize};

use super::GeodesicTree;
use crate::costmodel::angle;
use crate::error::{invalid, Result};
use crate::pointcloud::dist;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StraightnessEntry {
    pub id: usize,
    pub distance: f64,
    pub half_angle: f64,
    pub descendants: usize,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StraightnessReport {
    pub root: usize,
    pub epsilon: f64,
    /// One entry per covered non-root vertex, by increasing distance.
    pub entries: Vec<StraightnessEntry>,
}

impl StraightnessReport {
    /// Violating vertices farther than `r` from the root.
    pub fn violations_beyond(&self, r: f64) -> usize {
        self.entries.iter().filter(|e| e.distance > r && e.violated).count()
    }
}

/// For each covered `q'` in a rooted tree, whether every covered descendant
/// `v` satisfies `angle(v − q, q' − q) ≤ |q' − q|^{−1/4 + ε}`.
pub fn straightness_audit(t: &GeodesicTree, epsilon: f64) -> Result<StraightnessReport> {
    let q = t.root();
    let ps = t.point_set();
    if ps.is_empty() {
        return Ok(StraightnessReport { root: q, epsilon, entries: Vec::new() });
    }
    if !matches!(t.kind(), super::TreeKind::Rooted { .. }) {
        return invalid("straightness audit needs a particle-rooted tree");
    }
    let pq = ps.point(q).to_vec();
    let rel = |v: usize| -> Vec<f64> { ps.point(v).iter().zip(&pq).map(|(a, b)| a - b).collect() };
    let n = t.len();
    let half: Vec<f64> = (0..n).map(|v| dist(ps.point(v), &pq).powf(-0.25 + epsilon)).collect();
    let mut violated = vec![false; n];
    let mut count = vec![0usize; n];
    for v in t.covered_ids() {
        if v == q {
            continue;
        }
        let rv = rel(v);
        let mut cur = v;
        while cur != q {
            if t.is_covered(cur) {
                count[cur] += 1;
                // apex coincidence counts as inside
                let inside = rv.iter().all(|x| *x == 0.0) || angle(&rv, &rel(cur)).is_ok_and(|th| th <= half[cur]);
                violated[cur] |= !inside;
            }
            cur = t.parent(cur).expect("covered vertices reach the root");
        }
    }
    let mut entries: Vec<StraightnessEntry> = t
        .covered_ids()
        .into_iter()
        .filter(|&v| v != q)
        .map(|v| StraightnessEntry {
            id: v,
            distance: dist(ps.point(v), &pq),
            half_angle: half[v],
            descendants: count[v],
            violated: violated[v],
        })
        .collect();
    entries.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.id.cmp(&b.id)));
    Ok(StraightnessReport { root: q, epsilon, entries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeStats {
    pub vertices: usize,
    /// `degree_histogram[k]` counts reached vertices of tree degree `k`.
    pub degree_histogram: Vec<usize>,
    pub max_degree: usize,
    pub max_depth: usize,
    /// `1 − |mean unit direction|` of the vertices on the tree path from the
    /// particle nearest the origin to the particle farthest from it; near 0
    /// for a straight path, larger when the path turns.
    pub direction_dispersal: Option<f64>,
}

pub fn tree_stats(t: &GeodesicTree) -> TreeStats {
    let n = t.len();
    let mut degree = vec![0usize; n];
    for v in 0..n {
        if let Some(p) = t.parent(v) {
            degree[v] += 1;
            degree[p] += 1;
        }
    }
    let reached = t.reached_ids();
    let max_degree = reached.iter().map(|&v| degree[v]).max().unwrap_or(0);
    let mut degree_histogram = vec![0usize; max_degree + 1];
    for &v in &reached {
        degree_histogram[degree[v]] += 1;
    }
    let max_depth = reached.iter().filter_map(|&v| t.depth(v)).max().unwrap_or(0);
    let ps = t.point_set();
    let direction_dispersal = (|| {
        let origin = vec![0.0; ps.dim()];
        let q0 = ps.nearest(&origin).ok()?;
        let far = reached.iter().copied().max_by(|&a, &b| {
            dist(ps.point(a), ps.point(q0)).total_cmp(&dist(ps.point(b), ps.point(q0))).then(b.cmp(&a))
        })?;
        let path = t.tree_path(q0, far)?;
        let p0 = ps.point(q0);
        let mut mean = vec![0.0; ps.dim()];
        let mut k = 0usize;
        for &v in &path[1..] {
            let r = dist(ps.point(v), p0);
            if r > 0.0 {
                for (m, (a, b)) in mean.iter_mut().zip(ps.point(v).iter().zip(p0)) {
                    *m += (a - b) / r;
                }
                k += 1;
            }
        }
        (k > 0).then(|| 1.0 - mean.iter().map(|m| (m / k as f64).powi(2)).sum::<f64>().sqrt())
    })();
    TreeStats { vertices: reached.len(), degree_histogram, max_degree, max_depth, direction_dispersal }
}
