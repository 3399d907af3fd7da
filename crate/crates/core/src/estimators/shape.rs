use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{replicate_stream, tags, Regime};
use crate::error::{invalid, Error, Result};
use crate::forest::tree_from_graph;
use crate::geodesic::CandidateGraph;
use crate::pointcloud::{dist, PointSet, Window};
use crate::stats::Aggregate;

/// Ratio of the sampled core radius to the largest ball radius `s/μ̂`.
const CORE_FACTOR: f64 = 1.5;

/// Smallest `ε` with `Q ∩ (1−ε)sB₀ ⊆ {q : T(q(0), q) ≤ s} ⊆ (1+ε)sB₀`, where
/// `B₀` is the ball of radius `1/μ̂`, for each `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeReport {
    pub mu: f64,
    pub s: Vec<f64>,
    /// `s/μ̂`.
    pub radii: Vec<f64>,
    /// `eps[i][r]` for level `s[i]` and replicate `r`.
    pub eps: Vec<Vec<f64>>,
    pub aggregates: Vec<Aggregate>,
    /// Each `ε̂(s)` is at most the previous one plus two combined standard
    /// errors.
    pub non_increasing: bool,
    /// `q(0)` lies in every ball.
    pub contains_origin_particle: bool,
}

/// Fitted `ε` for each level from one realization, and whether `q(0)` lies
/// in every ball.
pub fn shape_replicate(reg: &Regime, mu: f64, s: &[f64], replicate: usize) -> Result<(Vec<f64>, bool)> {
    let r_max = s.iter().copied().fold(0.0, f64::max) / mu;
    let core = CORE_FACTOR * r_max;
    let half = core + reg.policy.margin(core, reg.spacing());
    let window = Window::cube(reg.dim, -half, half)?;
    let ps = PointSet::sample_substream(window, reg.density, reg.seed, replicate_stream(tags::SHAPE, 0, replicate))?;
    let origin = vec![0.0; reg.dim];
    let q0 = ps.nearest(&origin)?;
    let g = CandidateGraph::build(ps, reg.cost, reg.neighbors, reg.audit)?.with_policy(reg.policy);
    let t = tree_from_graph(&g, q0)?;
    let ps = g.point_set();
    let norms: Vec<f64> = (0..ps.len()).map(|v| dist(ps.point(v), &origin)).collect();
    if let Some(v) = (0..ps.len()).find(|&v| norms[v] <= core && !t.is_covered(v)) {
        return Err(Error::WindowPolicy(format!("particle {v} in the shape core is not covered")));
    }
    let mut out = Vec::with_capacity(s.len());
    for &level in s {
        let mut outer = f64::NEG_INFINITY;
        let mut inner_min = f64::INFINITY;
        for v in 0..ps.len() {
            let inside = t.reached(v) && t.cost_to_root(v) <= level;
            if inside && norms[v] > core {
                return Err(Error::WindowPolicy(format!("ball at level {level} leaves the shape core")));
            }
            if norms[v] > core {
                continue;
            }
            let rho = norms[v] * mu / level;
            if inside {
                outer = outer.max(rho - 1.0);
            } else {
                inner_min = inner_min.min(rho);
            }
        }
        out.push(outer.max(1.0 - inner_min).max(0.0));
    }
    let origin_inside = s.iter().all(|&level| t.cost_to_root(q0) <= level);
    Ok((out, origin_inside))
}

pub fn shape_check(reg: &Regime, mu: f64, s: &[f64]) -> Result<ShapeReport> {
    if !(mu > 0.0 && mu.is_finite()) {
        return invalid(format!("time constant must be positive, got {mu}"));
    }
    if s.is_empty() || s.iter().any(|v| !(*v > 0.0)) || s.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("levels must be positive and strictly increasing");
    }
    let per: Vec<(Vec<f64>, bool)> = (0..reg.replicates).into_par_iter().map(|r| shape_replicate(reg, mu, s, r)).collect::<Result<_>>()?;
    let eps: Vec<Vec<f64>> = (0..s.len()).map(|i| per.iter().map(|e| e.0[i]).collect()).collect();
    Ok(ShapeReport::new(mu, s, eps, per.iter().all(|e| e.1)))
}

impl ShapeReport {
    pub fn new(mu: f64, s: &[f64], eps: Vec<Vec<f64>>, contains_origin_particle: bool) -> Self {
        let aggregates: Vec<Aggregate> = eps.iter().map(|e| Aggregate::from_slice(e)).collect();
        let non_increasing = aggregates.windows(2).all(|a| {
            let se = a[0].std_err().hypot(a[1].std_err());
            a[1].mean <= a[0].mean + 2.0 * if se.is_finite() { se } else { 0.0 }
        });
        ShapeReport {
            mu,
            s: s.to_vec(),
            radii: s.iter().map(|v| v / mu).collect(),
            eps,
            aggregates,
            non_increasing,
            contains_origin_particle,
        }
    }
}
