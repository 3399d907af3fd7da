//! Exhaustive oracles over the complete graph.

use std::cmp::Ordering;

use super::{assemble_path, EndpointMode, PathResult, WindowPolicy};
use crate::costmodel::CostModel;
use crate::error::{invalid, Error, Result};
use crate::forest::euclidean_mst;
use crate::pointcloud::{dist, PointSet};

/// Largest vertex count accepted by the enumeration oracles.
pub const BRUTE_FORCE_LIMIT: usize = 12;

struct Search<'a> {
    points: &'a [&'a [f64]],
    cm: &'a CostModel,
    target: usize,
    allowed: &'a [bool],
    visited: Vec<bool>,
    path: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
}

impl Search<'_> {
    fn improves(&self, cost: f64) -> bool {
        let Some((bc, bp)) = &self.best else { return true };
        match cost.partial_cmp(bc).unwrap_or(Ordering::Greater) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => match self.path.len().cmp(&bp.len()) {
                Ordering::Less => true,
                Ordering::Greater => false,
                Ordering::Equal => self.path < *bp,
            },
        }
    }

    fn extend(&mut self, u: usize, cost: f64) {
        for v in 0..self.points.len() {
            if self.visited[v] || !(v == self.target || self.allowed[v]) {
                continue;
            }
            let c = cost + self.cm.phi(dist(self.points[u], self.points[v]));
            if self.best.as_ref().is_some_and(|b| c > b.0) {
                continue;
            }
            self.path.push(v);
            if v == self.target {
                if self.improves(c) {
                    self.best = Some((c, self.path.clone()));
                }
            } else {
                self.visited[v] = true;
                self.extend(v, c);
                self.visited[v] = false;
            }
            self.path.pop();
        }
    }
}

/// Minimum over all self-avoiding vertex sequences from `source` to `target`
/// whose intermediate vertices are marked `allowed`, ordered by (cost, hop
/// count, lexicographic sequence). Costs accumulate from the source.
pub fn brute_force_sequence(
    points: &[&[f64]],
    cm: &CostModel,
    source: usize,
    target: usize,
    allowed: &[bool],
) -> Result<(Vec<usize>, f64)> {
    let n = points.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::GuardExceeded { n, limit: BRUTE_FORCE_LIMIT });
    }
    if source >= n || target >= n || allowed.len() != n {
        return invalid("vertex index out of range");
    }
    if source == target {
        return Ok((vec![source], 0.0));
    }
    let mut s = Search {
        points,
        cm,
        target,
        allowed,
        visited: vec![false; n],
        path: vec![source],
        best: None,
    };
    s.visited[source] = true;
    s.extend(source, 0.0);
    let (cost, seq) = s.best.expect("the direct link is always a candidate");
    Ok((seq, cost))
}

/// Exhaustive geodesic between particles `a` and `b` (at most
/// [`BRUTE_FORCE_LIMIT`] particles).
pub fn brute_force_geodesic(ps: &PointSet, cm: &CostModel, a: usize, b: usize) -> Result<PathResult> {
    let n = ps.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::GuardExceeded { n, limit: BRUTE_FORCE_LIMIT });
    }
    if a >= n || b >= n {
        return invalid(format!("particle id out of range (n = {n})"));
    }
    let pts: Vec<&[f64]> = ps.iter().collect();
    let (seq, cost) = brute_force_sequence(&pts, cm, a, b, &vec![true; n])?;
    let points = seq.iter().map(|&i| ps.point(i).to_vec()).collect();
    Ok(assemble_path(ps, &WindowPolicy::default(), EndpointMode::Particle, seq, points, cost))
}

/// Exhaustive passage time with the same endpoint conventions as
/// [`passage_time`](super::passage_time). Exact mode appends `x` and `y` as
/// vertices `n` and `n + 1`.
pub fn brute_force_passage_time(ps: &PointSet, cm: &CostModel, x: &[f64], y: &[f64], mode: EndpointMode) -> Result<(f64, PathResult)> {
    match mode {
        EndpointMode::Particle => {
            let p = brute_force_geodesic(ps, cm, ps.nearest(x)?, ps.nearest(y)?)?;
            Ok((p.cost, p))
        }
        EndpointMode::Exact => {
            let n = ps.len();
            let mut pts: Vec<&[f64]> = ps.iter().collect();
            pts.push(x);
            pts.push(y);
            let mut allowed = vec![true; n + 2];
            allowed[n] = false;
            allowed[n + 1] = false;
            let (seq, cost) = if x == y { (vec![n], 0.0) } else { brute_force_sequence(&pts, cm, n, n + 1, &allowed)? };
            let ids: Vec<usize> = seq.iter().copied().filter(|&i| i < n).collect();
            let points = seq.iter().map(|&i| pts[i].to_vec()).collect();
            let p = assemble_path(ps, &WindowPolicy::default(), EndpointMode::Exact, ids, points, cost);
            Ok((cost, p))
        }
    }
}

/// Minimax distance `D_∞(a, b)`: the largest link on the minimum spanning tree
/// path, which minimizes the maximal link over all paths.
pub fn minimax_distance(ps: &PointSet, a: usize, b: usize) -> Result<(f64, Vec<usize>)> {
    let n = ps.len();
    if a >= n || b >= n {
        return invalid(format!("particle id out of range (n = {n})"));
    }
    let mst = euclidean_mst(ps)?;
    let path = mst.tree_path(a, b).ok_or(Error::NoPath { from: a, to: b })?;
    let value = path.windows(2).map(|w| dist(ps.point(w[0]), ps.point(w[1]))).fold(0.0, f64::max);
    Ok((value, path))
}

/// `D_∞(a, b)` by enumerating every simple path of the complete graph.
pub fn exhaustive_minimax(ps: &PointSet, a: usize, b: usize) -> Result<f64> {
    let n = ps.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::GuardExceeded { n, limit: BRUTE_FORCE_LIMIT });
    }
    if a >= n || b >= n {
        return invalid(format!("particle id out of range (n = {n})"));
    }
    fn walk(ps: &PointSet, u: usize, b: usize, worst: f64, seen: &mut [bool], best: &mut f64) {
        if u == b {
            *best = best.min(worst);
            return;
        }
        for v in 0..ps.len() {
            if !seen[v] {
                let w = worst.max(dist(ps.point(u), ps.point(v)));
                if w < *best {
                    seen[v] = true;
                    walk(ps, v, b, w, seen, best);
                    seen[v] = false;
                }
            }
        }
    }
    let mut seen = vec![false; n];
    seen[a] = true;
    let mut best = f64::INFINITY;
    walk(ps, a, b, 0.0, &mut seen, &mut best);
    Ok(best)
}
