//! Greedy wedge-stepping upper bound and the empty-lens radius diagnostic.

use serde::{Deserialize, Serialize};

use super::{assemble_path, EndpointMode, PathResult, WindowPolicy};
use crate::costmodel::{lens_closed_costs, CostModel};
use crate::error::{invalid, Result};
use crate::pointcloud::{dist, substream_rng, PointSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Staircase {
    pub cost: f64,
    pub path: PathResult,
    /// False when a wedge ran out of particles inside the window; the path
    /// then closes with a direct link to `y`.
    pub complete: bool,
}

/// Householder reflection taking `ê₁` to the unit vector `u` (and back).
struct Frame {
    v: Vec<f64>,
    vv: f64,
}

impl Frame {
    fn new(u: &[f64]) -> Self {
        let mut v = u.to_vec();
        v[0] -= 1.0;
        v.iter_mut().for_each(|x| *x = -*x);
        let vv: f64 = v.iter().map(|x| x * x).sum();
        Frame { v, vv }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        if self.vv < 1e-30 {
            return x.to_vec();
        }
        let k = 2.0 * x.iter().zip(&self.v).map(|(a, b)| a * b).sum::<f64>() / self.vv;
        x.iter().zip(&self.v).map(|(a, b)| a - k * b).collect()
    }
}

/// Upper bound for the exact-endpoint passage time from `x` to `y`. In the
/// frame where `ê₁` points from `x` to `y`, each step moves from the current
/// point `a` to the particle of smallest `b₁ > 0` among offsets `b` with
/// `0 ≤ σ_i b_i ≤ b₁` (`σ_i = −1` if `a_i ≥ 0`, else `+1`), a wedge that opens
/// forward and leans back toward the axis. Stepping stops once the first
/// coordinate reaches `|x − y|`, and a final link joins `y`.
pub fn staircase_upper_bound(ps: &PointSet, cm: &CostModel, x: &[f64], y: &[f64]) -> Result<Staircase> {
    let d = ps.dim();
    if x.len() != d || y.len() != d {
        return invalid("query dimension does not match the point set");
    }
    let l = dist(x, y);
    let mut points = vec![x.to_vec()];
    let mut ids = Vec::new();
    let mut complete = true;
    if l > 0.0 {
        let u: Vec<f64> = x.iter().zip(y).map(|(a, b)| (b - a) / l).collect();
        let frame = Frame::new(&u);
        let local = |p: &[f64]| frame.apply(&p.iter().zip(x).map(|(a, b)| a - b).collect::<Vec<_>>());
        let mut cur = vec![0.0; d];
        let reach = ps.window().diameter();
        while cur[0] < l {
            let sigma: Vec<f64> = cur.iter().map(|&a| if a >= 0.0 { -1.0 } else { 1.0 }).collect();
            let mut t = ps.spacing();
            let mut found: Option<(f64, usize, Vec<f64>)> = None;
            loop {
                for id in ps.within(&frame.apply(&cur).iter().zip(x).map(|(a, b)| a + b).collect::<Vec<_>>(), t * (d as f64).sqrt()) {
                    let pl = local(ps.point(id));
                    let b: Vec<f64> = pl.iter().zip(&cur).map(|(p, a)| p - a).collect();
                    // rounding slack for particles on the wedge faces
                    let tol = 1e-12 * b[0].abs().max(1.0);
                    let inside = b[0] > tol
                        && b[0] <= t
                        && (1..d).all(|i| sigma[i] * b[i] >= -tol && sigma[i] * b[i] <= b[0] + tol);
                    if inside && found.as_ref().is_none_or(|f| (b[0], id) < (f.0, f.1)) {
                        found = Some((b[0], id, pl));
                    }
                }
                if found.is_some() || t * (d as f64).sqrt() > reach {
                    break;
                }
                t *= 2.0;
            }
            match found {
                Some((_, id, pl)) => {
                    ids.push(id);
                    points.push(ps.point(id).to_vec());
                    cur = pl;
                }
                None => {
                    complete = false;
                    break;
                }
            }
        }
        if points.last().map(|p| p.as_slice()) != Some(y) {
            points.push(y.to_vec());
        }
    }
    let cost = cm.path_cost(&points);
    let path = assemble_path(ps, &WindowPolicy::default(), EndpointMode::Exact, ids, points, cost);
    Ok(Staircase { cost, path, complete })
}

fn lens_has_particle(ps: &PointSet, cm: &CostModel, a: &[f64], c: &[f64]) -> bool {
    let r = dist(a, c);
    let phi_ac = cm.phi(r);
    ps.within(a, r).into_iter().any(|i| {
        let q = ps.point(i);
        lens_closed_costs(phi_ac, cm.phi(dist(a, q)), cm.phi(dist(q, c)))
    })
}

/// Lower estimate of `Γ(a) = sup{|c − a| : W(a, c) ∩ Q = ∅}` over the window:
/// for each probe direction the largest empty closed lens along the ray is
/// found by bisection (lenses along a ray are nested). Probes are the
/// directions to the `2d` nearest particles plus `directions` fixed ones.
pub fn gamma_radius(ps: &PointSet, cm: &CostModel, a: &[f64], directions: usize) -> Result<f64> {
    let d = ps.dim();
    if a.len() != d {
        return invalid("query dimension does not match the point set");
    }
    if ps.is_empty() {
        return Ok(ps.window().diameter());
    }
    let base = dist(a, ps.point(ps.nearest(a)?));
    let mut dirs: Vec<Vec<f64>> = ps
        .k_nearest(a, 2 * d, None)
        .iter()
        .filter(|nb| nb.dist > 0.0)
        .map(|nb| ps.point(nb.id as usize).iter().zip(a).map(|(p, q)| (p - q) / nb.dist).collect())
        .collect();
    if d == 2 {
        for k in 0..directions {
            let th = std::f64::consts::TAU * k as f64 / directions as f64;
            dirs.push(vec![th.cos(), th.sin()]);
        }
    } else {
        use rand::Rng;
        let mut rng = substream_rng(0x6a6d, 0);
        for _ in 0..directions {
            let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            dirs.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    let cap = ps.window().diameter();
    let mut best = base;
    for u in dirs {
        let at = |r: f64| -> Vec<f64> { a.iter().zip(&u).map(|(p, q)| p + r * q).collect() };
        let (mut lo, mut hi) = (best, (2.0 * best).max(ps.spacing()));
        if lens_has_particle(ps, cm, a, &at(lo)) {
            continue;
        }
        while !lens_has_particle(ps, cm, a, &at(hi)) {
            lo = hi;
            if hi >= cap {
                break;
            }
            hi = (2.0 * hi).min(cap);
        }
        if lo >= cap {
            best = best.max(cap);
            continue;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if lens_has_particle(ps, cm, a, &at(mid)) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        best = best.max(lo);
    }
    Ok(best)
}
