//! Geodesic trees, directional trees and their coalescence structure, height
//! functions, and the Euclidean minimum spanning tree.

mod mst;
mod straight;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::costmodel::CostModel;
use crate::error::{invalid, Error, Result};
use crate::geodesic::{AuditLevel, CandidateGraph, EndpointMode, PathResult, WindowPolicy, DEFAULT_NEIGHBORS};
use crate::pointcloud::{dist, PointSet, Window};

pub use mst::{euclidean_mst, msf_edge_criterion};
pub use straight::{straightness_audit, tree_stats, StraightnessEntry, StraightnessReport, TreeStats};

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum TreeKind {
    /// Shortest-path tree from a particle.
    Rooted { root: usize },
    /// Tree of geodesics to the particle nearest `radius·direction`.
    Directional { direction: Vec<f64>, radius: f64, root: usize, core_radius: f64 },
    /// Minimum spanning tree rooted at particle 0.
    Mst { root: usize },
}

/// A spanning tree over the reached particles of a window, stored as a
/// parent array. `cost[v]` is the additive cost along the tree path to the
/// root (Euclidean length for the spanning tree).
#[derive(Debug, Clone)]
pub struct GeodesicTree {
    kind: TreeKind,
    root: usize,
    parent: Vec<u32>,
    cost: Vec<f64>,
    depth: Vec<u32>,
    covered: Vec<bool>,
    ps: Arc<PointSet>,
    cm: Option<CostModel>,
}

/// Serializable form: parent array with coverage mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeRecord {
    pub kind: TreeKind,
    pub parent: Vec<Option<usize>>,
    pub cost: Vec<Option<f64>>,
    pub covered: Vec<bool>,
}

impl GeodesicTree {
    pub fn kind(&self) -> &TreeKind {
        &self.kind
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn point_set(&self) -> &PointSet {
        &self.ps
    }

    pub fn cost_model(&self) -> Option<&CostModel> {
        self.cm.as_ref()
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        (self.parent[v] != NONE).then_some(self.parent[v] as usize)
    }

    pub fn reached(&self, v: usize) -> bool {
        self.cost[v].is_finite()
    }

    pub fn cost_to_root(&self, v: usize) -> f64 {
        self.cost[v]
    }

    pub fn depth(&self, v: usize) -> Option<usize> {
        self.reached(v).then_some(self.depth[v] as usize)
    }

    pub fn is_covered(&self, v: usize) -> bool {
        self.covered[v]
    }

    pub fn covered_ids(&self) -> Vec<usize> {
        (0..self.len()).filter(|&v| self.covered[v]).collect()
    }

    pub fn reached_ids(&self) -> Vec<usize> {
        (0..self.len()).filter(|&v| self.reached(v)).collect()
    }

    /// Vertices from `v` up to the root, or `None` if unreached.
    pub fn chain(&self, v: usize) -> Option<Vec<usize>> {
        if !self.reached(v) {
            return None;
        }
        let mut out = vec![v];
        let mut cur = v;
        while let Some(p) = self.parent(cur) {
            out.push(p);
            cur = p;
        }
        Some(out)
    }

    /// Lowest common ancestor of two reached vertices.
    pub fn meeting_vertex(&self, a: usize, b: usize) -> Option<usize> {
        if !self.reached(a) || !self.reached(b) {
            return None;
        }
        let (mut x, mut y) = (a, b);
        while self.depth[x] > self.depth[y] {
            x = self.parent[x] as usize;
        }
        while self.depth[y] > self.depth[x] {
            y = self.parent[y] as usize;
        }
        while x != y {
            x = self.parent[x] as usize;
            y = self.parent[y] as usize;
        }
        Some(x)
    }

    /// The tree path from `a` to `b` through their meeting vertex.
    pub fn tree_path(&self, a: usize, b: usize) -> Option<Vec<usize>> {
        let m = self.meeting_vertex(a, b)?;
        let mut up: Vec<usize> = self.chain(a)?.into_iter().take_while(|&v| v != m).collect();
        up.push(m);
        let down: Vec<usize> = self.chain(b)?.into_iter().take_while(|&v| v != m).collect();
        up.extend(down.into_iter().rev());
        Some(up)
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut ch = vec![Vec::new(); self.len()];
        for v in 0..self.len() {
            if let Some(p) = self.parent(v) {
                ch[p].push(v);
            }
        }
        ch
    }

    pub fn record(&self) -> TreeRecord {
        TreeRecord {
            kind: self.kind.clone(),
            parent: (0..self.len()).map(|v| self.parent(v)).collect(),
            cost: self.cost.iter().map(|&c| c.is_finite().then_some(c)).collect(),
            covered: self.covered.clone(),
        }
    }

    fn check_covered(&self, v: usize) -> Result<()> {
        if v >= self.len() || !self.covered[v] {
            return Err(Error::Coverage(v));
        }
        Ok(())
    }

    /// Tree-path minimal boundary distance for every reached vertex.
    fn path_margins(&self) -> Vec<f64> {
        let w = self.ps.window();
        let mut order: Vec<usize> = self.reached_ids();
        order.sort_by_key(|&v| self.depth[v]);
        let mut margin = vec![f64::NAN; self.len()];
        for v in order {
            let own = w.boundary_distance(self.ps.point(v));
            margin[v] = match self.parent(v) {
                Some(p) => own.min(margin[p]),
                None => own,
            };
        }
        margin
    }

    fn from_labels(
        kind: TreeKind,
        root: usize,
        parent: Vec<u32>,
        cost: Vec<f64>,
        ps: Arc<PointSet>,
        cm: Option<CostModel>,
    ) -> Self {
        let n = parent.len();
        let mut depth = vec![u32::MAX; n];
        depth[root] = 0;
        // parents settle before children, so resolve depths by walking up
        let mut stack = Vec::new();
        for v in 0..n {
            if !cost[v].is_finite() {
                continue;
            }
            let mut cur = v;
            while depth[cur] == u32::MAX {
                stack.push(cur);
                cur = parent[cur] as usize;
            }
            while let Some(u) = stack.pop() {
                depth[u] = depth[parent[u] as usize] + 1;
            }
        }
        GeodesicTree { kind, root, parent, cost, depth, covered: vec![false; n], ps, cm }
    }
}

/// Shortest-path tree from particle `q` over `g`. A vertex is covered when its
/// tree path keeps the trust band for its distance from `q`.
pub fn tree_from_graph(g: &CandidateGraph, q: usize) -> Result<GeodesicTree> {
    if q >= g.len() {
        return invalid(format!("particle id {q} out of range"));
    }
    let sp = g.shortest_paths(q);
    let parent: Vec<u32> = (0..g.len()).map(|v| sp.parent(v).map_or(NONE, |p| p as u32)).collect();
    let cost: Vec<f64> = (0..g.len()).map(|v| sp.cost(v)).collect();
    let mut t = GeodesicTree::from_labels(TreeKind::Rooted { root: q }, q, parent, cost, g.shared_point_set(), Some(*g.cost_model()));
    let margins = t.path_margins();
    let root_pt = g.point_set().point(q).to_vec();
    for v in 0..t.len() {
        t.covered[v] = t.reached(v) && margins[v] >= g.trust_band(dist(&root_pt, g.point_set().point(v)));
    }
    Ok(t)
}

/// [`tree_from_graph`] on a graph built with the default budget and audit.
pub fn geodesic_tree_from(ps: &PointSet, cm: &CostModel, q: usize) -> Result<GeodesicTree> {
    let g = CandidateGraph::build(ps.clone(), *cm, DEFAULT_NEIGHBORS, AuditLevel::Doubling)?;
    tree_from_graph(&g, q)
}

/// Default ratio between target radius and core radius.
pub const DIRECTIONAL_RATIO: f64 = 3.0;

/// Window holding the core ball `B(0, core)` and the target `radius·x̂`, with
/// the policy margin for distance `radius`.
pub fn directional_window(direction: &[f64], radius: f64, core_radius: f64, spacing: f64, policy: &WindowPolicy) -> Result<Window> {
    let d = direction.len();
    let target: Vec<f64> = direction.iter().map(|u| radius * u).collect();
    let lo = vec![-core_radius; d];
    let hi = vec![core_radius; d];
    Window::around(&[&lo, &hi, &target], policy.margin(radius, spacing))
}

fn unit(direction: &[f64]) -> Result<Vec<f64>> {
    let n = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n > 0.0 && n.is_finite()) {
        return invalid("direction must be a nonzero vector");
    }
    Ok(direction.iter().map(|x| x / n).collect())
}

/// Tree of geodesics to the particle nearest `radius·x̂`. Coverage is limited
/// to particles in the core ball `B(0, core_radius)` whose tree paths keep the
/// trust band. Requires `radius ≥ 3·core_radius`.
pub fn directional_tree(g: &CandidateGraph, direction: &[f64], radius: f64, core_radius: f64) -> Result<GeodesicTree> {
    let ps = g.point_set();
    if direction.len() != ps.dim() {
        return invalid("direction dimension does not match the point set");
    }
    if !(core_radius > 0.0) || !(radius >= DIRECTIONAL_RATIO * core_radius) {
        return invalid(format!(
            "target radius {radius} must be at least {DIRECTIONAL_RATIO} times the core radius {core_radius}"
        ));
    }
    let u = unit(direction)?;
    let target: Vec<f64> = u.iter().map(|x| radius * x).collect();
    let root = ps.nearest(&target)?;
    let sp = g.shortest_paths(root);
    let parent: Vec<u32> = (0..g.len()).map(|v| sp.parent(v).map_or(NONE, |p| p as u32)).collect();
    let cost: Vec<f64> = (0..g.len()).map(|v| sp.cost(v)).collect();
    let kind = TreeKind::Directional { direction: u, radius, root, core_radius };
    let mut t = GeodesicTree::from_labels(kind, root, parent, cost, g.shared_point_set(), Some(*g.cost_model()));
    let margins = t.path_margins();
    let origin = vec![0.0; ps.dim()];
    let root_pt = ps.point(root).to_vec();
    for v in ps.within(&origin, core_radius) {
        t.covered[v] = t.reached(v) && margins[v] >= g.trust_band(dist(&root_pt, ps.point(v)));
    }
    Ok(t)
}

/// The chain from `q` to the target, as a path starting at `q`.
pub fn directional_geodesic(t: &GeodesicTree, q: usize) -> Result<PathResult> {
    t.check_covered(q)?;
    let chain = t.chain(q).ok_or(Error::Coverage(q))?;
    let ps = t.point_set();
    let points: Vec<Vec<f64>> = chain.iter().map(|&v| ps.point(v).to_vec()).collect();
    let link_lengths: Vec<f64> = points.windows(2).map(|w| dist(&w[0], &w[1])).collect();
    let w = ps.window();
    let margin = points.iter().map(|p| w.boundary_distance(p)).fold(f64::INFINITY, f64::min);
    Ok(PathResult {
        mode: EndpointMode::Particle,
        ids: chain,
        points,
        link_lengths,
        cost: t.cost[q],
        trusted: true,
        margin,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoalescenceRecord {
    pub pair: (usize, usize),
    pub meeting: usize,
    pub depth_first: usize,
    pub depth_second: usize,
    pub coalesced: bool,
}

/// Where the chains from `q` and `q'` merge; depths count links from each
/// endpoint to the meeting vertex.
pub fn coalescence(t: &GeodesicTree, q: usize, qp: usize) -> Result<CoalescenceRecord> {
    t.check_covered(q)?;
    t.check_covered(qp)?;
    let m = t.meeting_vertex(q, qp).ok_or(Error::Coverage(q))?;
    Ok(CoalescenceRecord {
        pair: (q, qp),
        meeting: m,
        depth_first: (t.depth[q] - t.depth[m]) as usize,
        depth_second: (t.depth[qp] - t.depth[m]) as usize,
        coalesced: true,
    })
}

/// `H(q, q₀) = cost(q) − cost(q₀)`.
pub fn height_function(t: &GeodesicTree, q: usize, q0: usize) -> Result<f64> {
    t.check_covered(q)?;
    t.check_covered(q0)?;
    Ok(t.cost[q] - t.cost[q0])
}

fn chain_cost_to(t: &GeodesicTree, cm: &CostModel, v: usize, stop: usize) -> f64 {
    let ps = t.point_set();
    let mut total = 0.0;
    let mut cur = v;
    while cur != stop {
        let p = t.parent[cur] as usize;
        total += cm.phi(dist(ps.point(cur), ps.point(p)));
        cur = p;
    }
    total
}

/// `T(q, W) − T(q₀, W)` with `W` the meeting vertex, summing link costs along
/// both chains (independent of the stored root costs).
pub fn height_via_meeting(t: &GeodesicTree, q: usize, q0: usize) -> Result<f64> {
    let rec = coalescence(t, q, q0)?;
    let cm = t.cm.ok_or_else(|| Error::InvalidArgument("tree carries no cost model".into()))?;
    Ok(chain_cost_to(t, &cm, q, rec.meeting) - chain_cost_to(t, &cm, q0, rec.meeting))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightField {
    pub direction: Vec<f64>,
    pub radius: f64,
    pub base: usize,
    /// `(id, H(id, base))` for covered ids, ascending.
    pub values: Vec<(usize, f64)>,
}

impl HeightField {
    pub fn get(&self, id: usize) -> Option<f64> {
        self.values.binary_search_by_key(&id, |e| e.0).ok().map(|i| self.values[i].1)
    }
}

/// Heights relative to `q(0)` over the covered core of a directional tree.
pub fn height_field(t: &GeodesicTree) -> Result<HeightField> {
    let TreeKind::Directional { direction, radius, .. } = t.kind() else {
        return invalid("height field needs a directional tree");
    };
    let origin = vec![0.0; t.point_set().dim()];
    let base = t.point_set().nearest(&origin)?;
    t.check_covered(base)?;
    let values = t.covered_ids().into_iter().map(|v| (v, t.cost[v] - t.cost[base])).collect();
    Ok(HeightField { direction: direction.clone(), radius: *radius, base, values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionViolation {
    pub check: String,
    pub q: usize,
    pub other: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecursionReport {
    pub core: usize,
    pub inequality_checks: usize,
    pub inequality_violations: usize,
    pub parent_checks: usize,
    pub parent_violations: usize,
    pub exclusion_checks: usize,
    pub exclusion_violations: usize,
    pub witnesses: Vec<RecursionViolation>,
}

impl RecursionReport {
    pub fn violations(&self) -> usize {
        self.inequality_violations + self.parent_violations + self.exclusion_violations
    }
}

/// Relative slack of the recursion checks.
pub const RECURSION_SLACK: f64 = 1e-10;
const MAX_WITNESSES: usize = 20;

/// Checks the Bellman recursion of a height field on `core` ids of a
/// directional tree built on `g`:
///
/// * `H(q) ≤ φ(|q − q'|) + H(q')` for every reached `q' ≠ q`;
/// * equality at the tree parent of `q`;
/// * for the first `exclusions` core ids, `H(q) = min over q' ∉ Q₀ of
///   T(q, q') + H(q')` where `Q₀` is `q` and its `exclusion_size − 1` nearest
///   particles and `T` comes from a fresh shortest-path search from `q`.
///
/// Heights of reached but uncovered vertices are read from the tree costs.
pub fn verify_height_recursion(
    g: &CandidateGraph,
    t: &GeodesicTree,
    field: &HeightField,
    core: &[usize],
    exclusions: usize,
    exclusion_size: usize,
) -> Result<RecursionReport> {
    let cm = *g.cost_model();
    let ps = g.point_set();
    let base_cost = t.cost[field.base];
    let h = |v: usize| t.cost[v] - base_cost;
    let slack = |x: f64| RECURSION_SLACK * x.abs().max(1.0);
    let reached = t.reached_ids();
    let mut rep = RecursionReport { core: core.len(), ..Default::default() };
    let push = |rep: &mut RecursionReport, w: RecursionViolation| {
        if rep.witnesses.len() < MAX_WITNESSES {
            rep.witnesses.push(w);
        }
    };
    for &q in core {
        t.check_covered(q)?;
        let hq = h(q);
        let pq = ps.point(q);
        for &qp in &reached {
            if qp == q {
                continue;
            }
            rep.inequality_checks += 1;
            let rhs = cm.phi(dist(pq, ps.point(qp))) + h(qp);
            if hq > rhs + slack(t.cost[q]) {
                rep.inequality_violations += 1;
                push(&mut rep, RecursionViolation { check: "inequality".into(), q, other: Some(qp), lhs: hq, rhs });
            }
        }
        if let Some(p) = t.parent(q) {
            rep.parent_checks += 1;
            let rhs = cm.phi(dist(pq, ps.point(p))) + h(p);
            if (hq - rhs).abs() > slack(t.cost[q]) {
                rep.parent_violations += 1;
                push(&mut rep, RecursionViolation { check: "parent".into(), q, other: Some(p), lhs: hq, rhs });
            }
        }
    }
    for &q in core.iter().take(exclusions) {
        let q0: Vec<usize> = ps.k_nearest(ps.point(q), exclusion_size.saturating_sub(1), Some(q)).iter().map(|nb| nb.id as usize).collect();
        if q0.contains(&t.root()) {
            continue;
        }
        let sp = g.shortest_paths(q);
        let best = reached
            .iter()
            .filter(|&&v| v != q && !q0.contains(&v) && sp.reached(v))
            .map(|&v| sp.cost(v) + h(v))
            .fold(f64::INFINITY, f64::min);
        rep.exclusion_checks += 1;
        let hq = h(q);
        if (hq - best).abs() > slack(t.cost[q]) {
            rep.exclusion_violations += 1;
            push(&mut rep, RecursionViolation { check: "exclusion".into(), q, other: None, lhs: hq, rhs: best });
        }
    }
    Ok(rep)
}

/// Fraction of ids covered by both trees whose parents agree; `None` when no
/// id is covered by both.
pub fn parent_stability(a: &GeodesicTree, b: &GeodesicTree) -> Option<f64> {
    let common: Vec<usize> = (0..a.len().min(b.len())).filter(|&v| a.is_covered(v) && b.is_covered(v)).collect();
    if common.is_empty() {
        return None;
    }
    let same = common.iter().filter(|&&v| a.parent(v) == b.parent(v)).count();
    Some(same as f64 / common.len() as f64)
}

#[cfg(test)]
mod tests;
