use serde::{Deserialize, Serialize};

use super::{replicate_stream, tags, Regime};
use crate::error::{invalid, Result};
use crate::forest::{
    coalescence, directional_tree, directional_window, height_field, height_via_meeting, parent_stability, verify_height_recursion, RecursionReport,
    DIRECTIONAL_RATIO,
};
use crate::geodesic::CandidateGraph;
use crate::pointcloud::PointSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalSetup {
    pub direction: Vec<f64>,
    pub core_radius: f64,
    /// Target radius over core radius.
    pub ratio: f64,
    /// Core ids given the fresh-search exclusion check, and the size of the
    /// excluded neighbourhood.
    pub exclusions: usize,
    pub exclusion_size: usize,
}

impl DirectionalSetup {
    pub fn new(direction: Vec<f64>, core_radius: f64) -> Self {
        DirectionalSetup { direction, core_radius, ratio: DIRECTIONAL_RATIO, exclusions: 5, exclusion_size: 4 }
    }

    pub fn radius(&self) -> f64 {
        self.ratio * self.core_radius
    }
}

/// Structural and recursion checks on one directional tree, and how many
/// parents survive doubling the target radius on the same realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalOutcome {
    pub replicate: usize,
    pub stream: u64,
    pub particles: usize,
    pub root: usize,
    pub covered: usize,
    pub pairs: usize,
    pub coalesced: usize,
    /// Largest gap between the two height computations, relative to
    /// `max(1, cost)`.
    pub height_mismatch: f64,
    pub recursion: RecursionReport,
    /// Share of ids covered by both trees whose parents agree.
    pub stability: Option<f64>,
}

pub fn directional_replicate(reg: &Regime, setup: &DirectionalSetup, replicate: usize) -> Result<DirectionalOutcome> {
    if setup.direction.len() != reg.dim {
        return invalid("direction dimension does not match the regime");
    }
    let radius = setup.radius();
    let stream = replicate_stream(tags::DIRECTIONAL, 0, replicate);
    let window = directional_window(&setup.direction, 2.0 * radius, setup.core_radius, reg.spacing(), &reg.policy)?;
    let ps = PointSet::sample_substream(window, reg.density, reg.seed, stream)?;
    let particles = ps.len();
    let g = CandidateGraph::build(ps, reg.cost, reg.neighbors, reg.audit)?.with_policy(reg.policy);
    let t = directional_tree(&g, &setup.direction, radius, setup.core_radius)?;
    let far = directional_tree(&g, &setup.direction, 2.0 * radius, setup.core_radius)?;
    let covered = t.covered_ids();
    let mut pairs = 0;
    let mut coalesced = 0;
    for (i, &a) in covered.iter().enumerate() {
        for &b in &covered[i + 1..] {
            pairs += 1;
            if coalescence(&t, a, b).is_ok_and(|c| c.coalesced) {
                coalesced += 1;
            }
        }
    }
    let field = height_field(&t)?;
    let mut height_mismatch = 0.0f64;
    for &(v, h) in &field.values {
        let other = height_via_meeting(&t, v, field.base)?;
        height_mismatch = height_mismatch.max((h - other).abs() / t.cost_to_root(v).max(1.0));
    }
    let recursion = verify_height_recursion(&g, &t, &field, &covered, setup.exclusions, setup.exclusion_size)?;
    Ok(DirectionalOutcome {
        replicate,
        stream,
        particles,
        root: t.root(),
        covered: covered.len(),
        pairs,
        coalesced,
        height_mismatch,
        recursion,
        stability: parent_stability(&t, &far),
    })
}
