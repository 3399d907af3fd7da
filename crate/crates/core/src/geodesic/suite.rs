//! Seeded randomized checks of the geodesic engine against its oracles:
//! small instances compared with exhaustive enumeration, metric axioms on a
//! sampled window, and pairwise crossing of planar geodesics.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{brute_force_geodesic, crossing_audit, exhaustive_minimax, minimax_distance, no_doubling_back_audit, AuditLevel, CandidateGraph, DEFAULT_NEIGHBORS};
use crate::costmodel::CostModel;
use crate::error::{invalid, Result};
use crate::forest::{euclidean_mst, msf_edge_criterion};
use crate::pointcloud::{dist, substream_rng, PointSet, Window};

/// Relative cost tolerance against enumeration.
pub const ORACLE_TOLERANCE: f64 = 1e-12;
/// Relative slack of the symmetry and triangle checks.
pub const AXIOM_SLACK: f64 = 1e-10;

const ORACLE_STREAM: u64 = 0x5EED_0001 << 32;
const AXIOM_STREAM: u64 = 0x5EED_0002 << 32;
const CROSSING_STREAM: u64 = 0x5EED_0003 << 32;

const ORACLE_SIDE: f64 = 10.0;
const MIN_POINTS: usize = 3;

/// Outcome of one small instance: every pair of particles is compared with
/// enumeration, and the spanning-tree characterizations are checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleInstance {
    pub index: usize,
    pub n: usize,
    pub alpha: f64,
    pub pairs: usize,
    pub sequence_mismatches: usize,
    pub max_cost_rel_err: f64,
    pub doubling_violations: usize,
    /// All pairwise distances differ, so the spanning tree is unique.
    pub distinct_lengths: bool,
    pub criterion_mismatches: usize,
    pub minimax_mismatches: usize,
}

impl OracleInstance {
    pub fn exact(&self) -> bool {
        self.sequence_mismatches == 0 && self.max_cost_rel_err <= ORACLE_TOLERANCE
    }

    pub fn forest_agrees(&self) -> bool {
        self.criterion_mismatches == 0 && self.minimax_mismatches == 0
    }
}

/// Instance `index` of the suite with seed `seed`: between 3 and `max_points`
/// uniform points in a square of side 10, with `α` cycling through `alphas`.
pub fn oracle_instance(seed: u64, index: usize, max_points: usize, alphas: &[f64]) -> Result<OracleInstance> {
    if alphas.is_empty() {
        return invalid("oracle suite needs at least one exponent");
    }
    if !(MIN_POINTS..=super::BRUTE_FORCE_LIMIT).contains(&max_points) {
        return invalid(format!("instance size must lie in {MIN_POINTS}..={}", super::BRUTE_FORCE_LIMIT));
    }
    let alpha = alphas[index % alphas.len()];
    let cm = CostModel::power(alpha)?;
    let mut rng = substream_rng(seed, ORACLE_STREAM | index as u64);
    let n = rng.random_range(MIN_POINTS..=max_points);
    let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..2).map(|_| rng.random_range(0.0..ORACLE_SIDE)).collect()).collect();
    let ps = PointSet::from_points(Window::cube(2, 0.0, ORACLE_SIDE)?, 1.0, seed, &pts)?;
    let g = CandidateGraph::build(ps.clone(), cm, DEFAULT_NEIGHBORS, AuditLevel::None)?;
    let mst = euclidean_mst(&ps)?;

    let mut lengths: Vec<f64> = Vec::new();
    let mut out = OracleInstance {
        index,
        n,
        alpha,
        pairs: 0,
        sequence_mismatches: 0,
        max_cost_rel_err: 0.0,
        doubling_violations: 0,
        distinct_lengths: true,
        criterion_mismatches: 0,
        minimax_mismatches: 0,
    };
    for a in 0..n {
        for b in a + 1..n {
            out.pairs += 1;
            let fast = g.geodesic(a, b)?;
            let slow = brute_force_geodesic(&ps, &cm, a, b)?;
            if fast.ids != slow.ids {
                out.sequence_mismatches += 1;
            }
            out.max_cost_rel_err = out.max_cost_rel_err.max((fast.cost - slow.cost).abs() / slow.cost.abs().max(f64::MIN_POSITIVE));
            out.doubling_violations += no_doubling_back_audit(&fast).len();

            lengths.push(dist(ps.point(a), ps.point(b)));
            let in_tree = mst.parent(a) == Some(b) || mst.parent(b) == Some(a);
            if msf_edge_criterion(&ps, a, b)? != in_tree {
                out.criterion_mismatches += 1;
            }
            let (tree_value, _) = minimax_distance(&ps, a, b)?;
            let enumerated = exhaustive_minimax(&ps, a, b)?;
            if (tree_value - enumerated).abs() > ORACLE_TOLERANCE * enumerated {
                out.minimax_mismatches += 1;
            }
        }
    }
    lengths.sort_by(f64::total_cmp);
    out.distinct_lengths = lengths.windows(2).all(|w| w[0] < w[1]);
    Ok(out)
}

/// Symmetry, triangle inequality and subsegment re-query for
/// `D_α = T^{1/α}` on random particle triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub alpha: f64,
    pub particles: usize,
    pub triples: usize,
    pub symmetry_violations: usize,
    pub triangle_violations: usize,
    pub max_symmetry_gap: f64,
    pub subsegment_checks: usize,
    pub subsegment_mismatches: usize,
    pub doubling_violations: usize,
}

impl AxiomReport {
    pub fn violations(&self) -> usize {
        self.symmetry_violations + self.triangle_violations + self.subsegment_mismatches + self.doubling_violations
    }
}

/// Samples a planar window of side `side` at unit density and checks
/// `triples` random particle triples.
pub fn axiom_check(alpha: f64, seed: u64, side: f64, triples: usize) -> Result<AxiomReport> {
    let cm = CostModel::power(alpha)?;
    let ps = PointSet::sample_substream(Window::cube(2, 0.0, side)?, 1.0, seed, AXIOM_STREAM)?;
    let n = ps.len();
    if n < 3 {
        return invalid("axiom check needs at least three particles");
    }
    let g = CandidateGraph::build(ps, cm, DEFAULT_NEIGHBORS, AuditLevel::None)?;
    let mut rng = substream_rng(seed, AXIOM_STREAM | 1);
    let mut rep = AxiomReport {
        alpha,
        particles: n,
        triples,
        symmetry_violations: 0,
        triangle_violations: 0,
        max_symmetry_gap: 0.0,
        subsegment_checks: 0,
        subsegment_mismatches: 0,
        doubling_violations: 0,
    };
    for _ in 0..triples {
        let a = rng.random_range(0..n);
        let b = loop {
            let v = rng.random_range(0..n);
            if v != a {
                break v;
            }
        };
        let c = loop {
            let v = rng.random_range(0..n);
            if v != a && v != b {
                break v;
            }
        };
        let from_a = g.shortest_paths(a);
        let from_b = g.shortest_paths(b);
        let d = |t: f64| cm.root(t);
        let (ab, ba, bc, ac) = (d(from_a.cost(b)), d(from_b.cost(a)), d(from_b.cost(c)), d(from_a.cost(c)));
        let gap = (ab - ba).abs() / ab.max(1.0);
        rep.max_symmetry_gap = rep.max_symmetry_gap.max(gap);
        if gap > AXIOM_SLACK {
            rep.symmetry_violations += 1;
        }
        if ac > ab + bc + AXIOM_SLACK * ac.max(1.0) {
            rep.triangle_violations += 1;
        }

        let path = g.geodesic(a, b)?;
        rep.doubling_violations += no_doubling_back_audit(&path).len();
        if path.ids.len() >= 2 {
            let i = rng.random_range(0..path.ids.len() - 1);
            let j = rng.random_range(i + 1..path.ids.len());
            rep.subsegment_checks += 1;
            if g.geodesic(path.ids[i], path.ids[j])?.ids != path.ids[i..=j] {
                rep.subsegment_mismatches += 1;
            }
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingReport {
    pub alpha: f64,
    pub particles: usize,
    pub pairs: usize,
    pub crossings: usize,
    pub doubling_violations: usize,
}

/// Geodesics between random particle pairs in a planar window of side
/// `side`, checked two at a time for crossings.
pub fn crossing_check(alpha: f64, seed: u64, side: f64, pairs: usize) -> Result<CrossingReport> {
    let cm = CostModel::power(alpha)?;
    let ps = PointSet::sample_substream(Window::cube(2, 0.0, side)?, 1.0, seed, CROSSING_STREAM)?;
    let n = ps.len();
    if n < 4 {
        return invalid("crossing check needs at least four particles");
    }
    let g = CandidateGraph::build(ps, cm, DEFAULT_NEIGHBORS, AuditLevel::None)?;
    let mut rng = substream_rng(seed, CROSSING_STREAM | 1);
    let pick = |rng: &mut rand_chacha::ChaCha8Rng| -> Result<super::PathResult> {
        let a = rng.random_range(0..n);
        let b = loop {
            let v = rng.random_range(0..n);
            if v != a {
                break v;
            }
        };
        g.geodesic(a, b)
    };
    let mut rep = CrossingReport { alpha, particles: n, pairs, crossings: 0, doubling_violations: 0 };
    for _ in 0..pairs {
        let p = pick(&mut rng)?;
        let q = pick(&mut rng)?;
        rep.crossings += crossing_audit(&p, &q).len();
        rep.doubling_violations += no_doubling_back_audit(&p).len() + no_doubling_back_audit(&q).len();
    }
    Ok(rep)
}
