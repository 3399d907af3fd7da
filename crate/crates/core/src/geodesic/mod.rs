//! Exact finite-window geodesics.
//!
//! A link whose lens interior holds a particle can be strictly improved by
//! routing through that particle, so geodesics only use empty-lens links. The
//! [`CandidateGraph`] keeps exactly those links among each particle's `k`
//! nearest neighbours; Dijkstra on it then returns the minimizing path.
//! Locality (the `k` cap) is heuristic and is checked by rebuilding with a
//! doubled budget.

mod audit;
mod certify;
mod oracle;
mod search;
mod staircase;
mod suite;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costmodel::{lens_interior_costs, segment_distance, CostModel};
use crate::error::{invalid, Error, Result};
use crate::pointcloud::{box_index, dist, dist_sq, Neighbor, PointSet, Window};

pub use audit::{crossing_audit, no_doubling_back_audit, segment_segment_distance, CrossingViolation, DoublingViolation};
pub use oracle::{brute_force_geodesic, brute_force_passage_time, brute_force_sequence, exhaustive_minimax, minimax_distance, BRUTE_FORCE_LIMIT};
pub use search::ShortestPaths;
pub use staircase::{gamma_radius, staircase_upper_bound, Staircase};
pub use suite::{axiom_check, crossing_check, oracle_instance, AxiomReport, CrossingReport, OracleInstance, AXIOM_SLACK, ORACLE_TOLERANCE};

pub const DEFAULT_NEIGHBORS: usize = 32;
pub const MAX_DOUBLINGS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EndpointMode {
    /// Paths run between the particles nearest the query points.
    Particle,
    /// The query points are path vertices themselves.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditLevel {
    None,
    /// Rebuild with `2k` (up to [`MAX_DOUBLINGS`] times) until the edge set
    /// stops changing.
    Doubling,
}

/// Window sizing and trust rule for a query spanning distance `ℓ` in a process
/// with spacing `s = λ^{-1/d}`: margin `max(20s, ℓ^0.8)` around the endpoints'
/// bounding box, trust band `max(5s, ℓ^0.55)`, and up to three regrowths that
/// double the margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowPolicy {
    pub margin_spacings: f64,
    pub margin_exponent: f64,
    pub band_spacings: f64,
    pub band_exponent: f64,
    pub regrow_factor: f64,
    pub max_regrowths: u32,
}

impl Default for WindowPolicy {
    fn default() -> Self {
        WindowPolicy {
            margin_spacings: 20.0,
            margin_exponent: 0.8,
            band_spacings: 5.0,
            band_exponent: 0.55,
            regrow_factor: 2.0,
            max_regrowths: 3,
        }
    }
}

impl WindowPolicy {
    pub fn margin(&self, l: f64, spacing: f64) -> f64 {
        (self.margin_spacings * spacing).max(l.powf(self.margin_exponent))
    }

    pub fn trust_band(&self, l: f64, spacing: f64) -> f64 {
        (self.band_spacings * spacing).max(l.powf(self.band_exponent))
    }

    /// Bounding box of `x` and `y` inflated by the margin, times
    /// `regrow_factor^regrowths`.
    pub fn window_for(&self, x: &[f64], y: &[f64], spacing: f64, regrowths: u32) -> Result<Window> {
        let grow = self.regrow_factor.powi(regrowths as i32);
        Window::around(&[x, y], self.margin(dist(x, y), spacing) * grow)
    }
}

/// A path with its cost. `points` lists every vertex including exact-mode
/// terminals; `ids` lists only the particle vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathResult {
    pub mode: EndpointMode,
    pub ids: Vec<usize>,
    pub points: Vec<Vec<f64>>,
    pub link_lengths: Vec<f64>,
    pub cost: f64,
    pub trusted: bool,
    /// Smallest distance from a vertex to the window boundary.
    pub margin: f64,
}

impl PathResult {
    pub fn hops(&self) -> usize {
        self.link_lengths.len()
    }

    /// `D = cost^{1/α}`.
    pub fn metric_distance(&self, cm: &CostModel) -> f64 {
        cm.root(self.cost)
    }

    /// Largest distance from a vertex to the segment `[a, b]`.
    pub fn max_deviation(&self, a: &[f64], b: &[f64]) -> f64 {
        self.points.iter().map(|p| segment_distance(p, a, b)).fold(0.0, f64::max)
    }

    pub fn first(&self) -> &[f64] {
        &self.points[0]
    }

    pub fn last(&self) -> &[f64] {
        &self.points[self.points.len() - 1]
    }
}

/// One round of the build: edge count at budget `k` and whether it matched
/// the previous round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditStep {
    pub k: usize,
    pub edges: usize,
    pub matches_previous: Option<bool>,
}

/// Empty-lens links among `k`-nearest-neighbour pairs, in CSR form.
#[derive(Debug, Clone)]
pub struct CandidateGraph {
    ps: Arc<PointSet>,
    cm: CostModel,
    k: usize,
    audit: AuditLevel,
    policy: WindowPolicy,
    offsets: Vec<usize>,
    adj: Vec<u32>,
    lengths: Vec<f64>,
    costs: Vec<f64>,
    knn_radius: Vec<f64>,
    audit_log: Vec<AuditStep>,
}

struct EdgeSet {
    pairs: Vec<(u32, u32)>,
    knn_radius: Vec<f64>,
}

/// Neighbours of `x` out to a radius `r`: the `k` nearest, with `k` doubled
/// until the angular certificate (when available) shows that nothing beyond
/// `r` can be an empty-lens partner. `r` is infinite when the list holds every
/// particle.
fn neighbourhood(ps: &PointSet, cm: &CostModel, x: &[f64], exclude: Option<usize>, k: usize) -> (Vec<Neighbor>, f64) {
    let others = ps.len() - usize::from(exclude.is_some());
    let certify = certify::supported(ps, cm);
    let mut k = k;
    loop {
        let nb = ps.k_nearest(x, k, exclude);
        if nb.len() >= others {
            return (nb, f64::INFINITY);
        }
        let r = nb.last().map_or(0.0, |n| n.dist);
        if !certify || certify::certified(ps, cm, x, &nb, r) {
            return (nb, r);
        }
        k *= 2;
    }
}

/// Kept links from each particle's own neighbour list. Every particle strictly
/// closer to `a` than `b` is in that list, and only such particles can lie in
/// the lens interior, so the emptiness test is exact for listed pairs.
fn kept_edges(ps: &PointSet, cm: &CostModel, k: usize) -> EdgeSet {
    let d = ps.dim();
    let n = ps.len();
    let per: Vec<(Vec<u32>, f64)> = (0..n)
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |(buf, phis): &mut (Vec<f64>, Vec<f64>), a| {
                let (nb, rk) = neighbourhood(ps, cm, ps.point(a), Some(a), k);
                buf.clear();
                phis.clear();
                for x in &nb {
                    buf.extend_from_slice(ps.point(x.id as usize));
                    phis.push(cm.phi(x.dist));
                }
                let mut kept = Vec::new();
                for j in 0..nb.len() {
                    let dab = nb[j].dist;
                    if dab == 0.0 {
                        continue;
                    }
                    let phi_ab = cm.phi(dab);
                    let thr = phi_ab * (1.0 - crate::costmodel::LENS_SLACK);
                    let dab2 = dab * dab;
                    let b = &buf[j * d..(j + 1) * d];
                    let mut blocked = false;
                    for i in 0..j {
                        if nb[i].dist >= dab {
                            break;
                        }
                        if phis[i] >= thr {
                            continue;
                        }
                        let d2 = dist_sq(&buf[i * d..(i + 1) * d], b);
                        if d2 >= dab2 {
                            continue;
                        }
                        if lens_interior_costs(phi_ab, phis[i], cm.phi(d2.sqrt())) {
                            blocked = true;
                            break;
                        }
                    }
                    if !blocked {
                        kept.push(nb[j].id);
                    }
                }
                (kept, rk)
            },
        )
        .collect();
    let mut pairs = Vec::new();
    let mut knn_radius = Vec::with_capacity(n);
    for (a, (kept, rk)) in per.into_iter().enumerate() {
        knn_radius.push(rk);
        let a = a as u32;
        pairs.extend(kept.into_iter().map(|b| (a.min(b), a.max(b))));
    }
    pairs.sort_unstable();
    pairs.dedup();
    EdgeSet { pairs, knn_radius }
}

impl CandidateGraph {
    pub fn build(ps: impl Into<Arc<PointSet>>, cm: CostModel, k: usize, audit: AuditLevel) -> Result<Self> {
        let ps: Arc<PointSet> = ps.into();
        if ps.len() < 2 {
            return invalid(format!("candidate graph needs at least 2 particles, got {}", ps.len()));
        }
        if k == 0 {
            return invalid("neighbour budget must be positive");
        }
        let mut k = k;
        let mut set = kept_edges(&ps, &cm, k);
        let mut log = vec![AuditStep { k, edges: set.pairs.len(), matches_previous: None }];
        if audit == AuditLevel::Doubling {
            for round in 1..=MAX_DOUBLINGS {
                if k >= ps.len() - 1 {
                    // every pair was already examined
                    break;
                }
                let next = kept_edges(&ps, &cm, 2 * k);
                let same = next.pairs == set.pairs;
                log.push(AuditStep { k: 2 * k, edges: next.pairs.len(), matches_previous: Some(same) });
                if same {
                    break;
                }
                k *= 2;
                set = next;
                if round == MAX_DOUBLINGS {
                    return Err(Error::UnstablePrune { k, doublings: MAX_DOUBLINGS });
                }
            }
        }
        let n = ps.len();
        let mut offsets = vec![0usize; n + 1];
        for &(a, b) in &set.pairs {
            offsets[a as usize + 1] += 1;
            offsets[b as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut adj = vec![0u32; offsets[n]];
        for &(a, b) in &set.pairs {
            adj[fill[a as usize]] = b;
            fill[a as usize] += 1;
            adj[fill[b as usize]] = a;
            fill[b as usize] += 1;
        }
        let mut lengths = Vec::with_capacity(adj.len());
        let mut costs = Vec::with_capacity(adj.len());
        for u in 0..n {
            for &v in &adj[offsets[u]..offsets[u + 1]] {
                let len = dist(ps.point(u), ps.point(v as usize));
                lengths.push(len);
                costs.push(cm.phi(len));
            }
        }
        Ok(CandidateGraph {
            ps,
            cm,
            k,
            audit,
            policy: WindowPolicy::default(),
            offsets,
            adj,
            lengths,
            costs,
            knn_radius: set.knn_radius,
            audit_log: log,
        })
    }

    pub fn with_policy(mut self, policy: WindowPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn point_set(&self) -> &PointSet {
        &self.ps
    }

    pub fn shared_point_set(&self) -> Arc<PointSet> {
        Arc::clone(&self.ps)
    }

    pub fn cost_model(&self) -> &CostModel {
        &self.cm
    }

    pub fn neighbor_budget(&self) -> usize {
        self.k
    }

    pub fn audit_level(&self) -> AuditLevel {
        self.audit
    }

    pub fn policy(&self) -> &WindowPolicy {
        &self.policy
    }

    pub fn audit_log(&self) -> &[AuditStep] {
        &self.audit_log
    }

    pub fn len(&self) -> usize {
        self.ps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ps.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.len() / 2
    }

    pub fn neighbors(&self, u: usize) -> &[u32] {
        &self.adj[self.offsets[u]..self.offsets[u + 1]]
    }

    /// `(neighbour, length, cost)` for every kept link at `u`.
    pub fn arcs(&self, u: usize) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        (self.offsets[u]..self.offsets[u + 1]).map(|e| (self.adj[e] as usize, self.lengths[e], self.costs[e]))
    }

    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&(v as u32)).is_ok()
    }

    /// Kept edges as `(a, b)` with `a < b`, ascending.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.len()).flat_map(move |u| {
            self.neighbors(u).iter().filter(move |&&v| (v as usize) > u).map(move |&v| (u, v as usize))
        })
    }

    /// Radius of the neighbour list searched from `u` (infinite when it holds
    /// every other particle).
    pub fn knn_radius(&self, u: usize) -> f64 {
        self.knn_radius[u]
    }

    pub fn trust_band(&self, l: f64) -> f64 {
        self.policy.trust_band(l, self.ps.spacing())
    }

    fn for_each_arc(&self, u: usize, f: &mut dyn FnMut(usize, f64)) {
        for e in self.offsets[u]..self.offsets[u + 1] {
            f(self.adj[e] as usize, self.costs[e]);
        }
    }

    /// Shortest-path labels from `source` to every particle.
    pub fn shortest_paths(&self, source: usize) -> ShortestPaths {
        search::dijkstra(self.len(), source, None, |u, f| self.for_each_arc(u, f))
    }

    /// Wraps a particle sequence with its coordinates, links and trust flag.
    pub fn particle_path(&self, seq: &[usize], cost: f64) -> PathResult {
        let points: Vec<Vec<f64>> = seq.iter().map(|&i| self.ps.point(i).to_vec()).collect();
        self.assemble(EndpointMode::Particle, seq.to_vec(), points, cost)
    }

    fn assemble(&self, mode: EndpointMode, ids: Vec<usize>, points: Vec<Vec<f64>>, cost: f64) -> PathResult {
        assemble_path(&self.ps, &self.policy, mode, ids, points, cost)
    }

    /// The geodesic between particles `a` and `b`.
    pub fn geodesic(&self, a: usize, b: usize) -> Result<PathResult> {
        let n = self.len();
        if a >= n || b >= n {
            return invalid(format!("particle id out of range (n = {n})"));
        }
        if a == b {
            return Ok(self.particle_path(&[a], 0.0));
        }
        let sp = search::dijkstra(n, a, Some(b), |u, f| self.for_each_arc(u, f));
        let seq = sp.path_to(b).ok_or(Error::NoPath { from: a, to: b })?;
        Ok(self.particle_path(&seq, sp.cost(b)))
    }

    /// Passage cost between points `x` and `y`; see [`EndpointMode`].
    pub fn passage_time(&self, x: &[f64], y: &[f64], mode: EndpointMode) -> Result<(f64, PathResult)> {
        let d = self.ps.dim();
        if x.len() != d || y.len() != d {
            return invalid("query dimension does not match the point set");
        }
        let path = match mode {
            EndpointMode::Particle => self.geodesic(self.ps.nearest(x)?, self.ps.nearest(y)?)?,
            EndpointMode::Exact => self.exact_path(x, y)?,
        };
        Ok((path.cost, path))
    }

    /// Search radius of a query point, as used for particles.
    fn query_radius(&self, x: &[f64]) -> f64 {
        neighbourhood(&self.ps, &self.cm, x, None, self.k).1
    }

    /// Whether every particle's neighbour list is certified complete.
    pub fn is_certified(&self) -> bool {
        certify::supported(&self.ps, &self.cm)
    }

    /// Particles within `r` of `x`, all of them if `r` is infinite.
    fn ball(&self, x: &[f64], r: f64) -> Vec<usize> {
        if r.is_finite() {
            self.ps.within(x, r)
        } else {
            (0..self.len()).collect()
        }
    }

    /// Empty-lens links from a virtual terminal `x` to particles `p` with
    /// `|x−p| ≤ r(x)`, or also `|x−p| ≤ r(p)` when the lists are not
    /// certified. Only particles count as lens witnesses.
    fn terminal_links(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let rx = self.query_radius(x);
        let rmax = if self.is_certified() { rx } else { self.knn_radius.iter().copied().fold(rx, f64::max) };
        let mut cand: Vec<(f64, usize)> = self
            .ball(x, rmax)
            .into_iter()
            .map(|p| (self.ps.dist_to(p, x), p))
            .filter(|&(len, p)| len <= rx || (!self.is_certified() && len <= self.knn_radius[p]))
            .collect();
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let far = cand.last().map_or(0.0, |c| c.0);
        let mut near: Vec<(f64, usize)> = self.ball(x, far).into_iter().map(|c| (self.ps.dist_to(c, x), c)).collect();
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let phi_near: Vec<f64> = near.iter().map(|c| self.cm.phi(c.0)).collect();
        let mut out: Vec<(usize, f64)> = cand
            .into_iter()
            .filter(|&(len, p)| {
                if len == 0.0 {
                    return true;
                }
                let phi_xp = self.cm.phi(len);
                !near.iter().zip(&phi_near).take_while(|(c, _)| c.0 < len).any(|(c, &phi_xc)| {
                    c.1 != p && lens_interior_costs(phi_xp, phi_xc, self.cm.phi(dist(self.ps.point(c.1), self.ps.point(p))))
                })
            })
            .map(|(len, p)| (p, len))
            .collect();
        out.sort_unstable_by_key(|e| e.0);
        out
    }

    fn direct_link_allowed(&self, x: &[f64], y: &[f64]) -> bool {
        let len = dist(x, y);
        if len > self.query_radius(x).max(self.query_radius(y)) {
            return false;
        }
        let phi_xy = self.cm.phi(len);
        !self.ps.within(x, len).into_iter().any(|c| {
            let pc = self.ps.point(c);
            lens_interior_costs(phi_xy, self.cm.phi(dist(x, pc)), self.cm.phi(dist(pc, y)))
        })
    }

    fn exact_path(&self, x: &[f64], y: &[f64]) -> Result<PathResult> {
        if x == y {
            return Ok(self.assemble(EndpointMode::Exact, Vec::new(), vec![x.to_vec()], 0.0));
        }
        let n = self.len();
        let (sx, ty) = (n, n + 1);
        let from_x = self.terminal_links(x);
        let to_y = self.terminal_links(y);
        let direct = self.direct_link_allowed(x, y).then(|| self.cm.phi(dist(x, y)));
        let sp = search::dijkstra(n + 2, sx, Some(ty), |u, f| {
            if u == sx {
                for &(p, len) in &from_x {
                    f(p, self.cm.phi(len));
                }
                if let Some(c) = direct {
                    f(ty, c);
                }
            } else if u < n {
                self.for_each_arc(u, f);
                if let Ok(i) = to_y.binary_search_by_key(&u, |e| e.0) {
                    f(ty, self.cm.phi(to_y[i].1));
                }
            }
        });
        let seq = sp.path_to(ty).ok_or(Error::NoPath { from: sx, to: ty })?;
        let ids: Vec<usize> = seq[1..seq.len() - 1].to_vec();
        let mut points = vec![x.to_vec()];
        points.extend(ids.iter().map(|&i| self.ps.point(i).to_vec()));
        points.push(y.to_vec());
        Ok(self.assemble(EndpointMode::Exact, ids, points, sp.cost(ty)))
    }
}

pub fn build_candidate_graph(ps: impl Into<Arc<PointSet>>, cm: CostModel, k: usize, audit: AuditLevel) -> Result<CandidateGraph> {
    CandidateGraph::build(ps, cm, k, audit)
}

pub fn geodesic(g: &CandidateGraph, a: usize, b: usize) -> Result<PathResult> {
    g.geodesic(a, b)
}

/// One-shot passage time on a fixed point set with the default budget and the
/// doubling audit. Exact mode on an empty or single-particle set uses only the
/// direct link when no graph can be built.
pub fn passage_time(ps: &PointSet, cm: &CostModel, x: &[f64], y: &[f64], mode: EndpointMode) -> Result<(f64, PathResult)> {
    if ps.len() < 2 {
        return small_passage_time(ps, cm, x, y, mode);
    }
    let g = CandidateGraph::build(ps.clone(), *cm, DEFAULT_NEIGHBORS, AuditLevel::Doubling)?;
    g.passage_time(x, y, mode)
}

/// Fills in link lengths, margin and the trust flag, judged by the span between
/// the first and last vertex.
pub(crate) fn assemble_path(
    ps: &PointSet,
    policy: &WindowPolicy,
    mode: EndpointMode,
    ids: Vec<usize>,
    points: Vec<Vec<f64>>,
    cost: f64,
) -> PathResult {
    let link_lengths: Vec<f64> = points.windows(2).map(|w| dist(&w[0], &w[1])).collect();
    let window = ps.window();
    let margin = points.iter().map(|p| window.boundary_distance(p)).fold(f64::INFINITY, f64::min);
    let span = dist(&points[0], &points[points.len() - 1]);
    let trusted = margin >= policy.trust_band(span, ps.spacing());
    PathResult { mode, ids, points, link_lengths, cost, trusted, margin }
}

/// Sets with fewer than two particles: at most the direct link, or the path
/// through the lone particle when it is cheaper.
fn small_passage_time(ps: &PointSet, cm: &CostModel, x: &[f64], y: &[f64], mode: EndpointMode) -> Result<(f64, PathResult)> {
    let policy = WindowPolicy::default();
    let wrap = |ids, points, cost| assemble_path(ps, &policy, mode, ids, points, cost);
    match mode {
        EndpointMode::Particle => {
            let q = ps.nearest(x)?;
            Ok((0.0, wrap(vec![q], vec![ps.point(q).to_vec()], 0.0)))
        }
        EndpointMode::Exact => {
            if x == y {
                return Ok((0.0, wrap(Vec::new(), vec![x.to_vec()], 0.0)));
            }
            let direct = cm.phi(dist(x, y));
            if ps.len() == 1 {
                let p = ps.point(0);
                let via = cm.phi(dist(x, p)) + cm.phi(dist(p, y));
                if via < direct {
                    return Ok((via, wrap(vec![0], vec![x.to_vec(), p.to_vec(), y.to_vec()], via)));
                }
            }
            Ok((direct, wrap(Vec::new(), vec![x.to_vec(), y.to_vec()], direct)))
        }
    }
}

/// Leftmost particle per `eps`-box (ties by the remaining coordinates, then id),
/// ascending by id.
pub fn box_representatives(ps: &PointSet, eps: f64) -> Result<Vec<usize>> {
    if !(eps > 0.0 && eps.is_finite()) {
        return invalid(format!("box size must be positive, got {eps}"));
    }
    let mut best: std::collections::BTreeMap<Vec<i64>, usize> = std::collections::BTreeMap::new();
    for (i, p) in ps.iter().enumerate() {
        let key: Vec<i64> = p.iter().map(|&v| box_index(v, eps)).collect();
        best.entry(key)
            .and_modify(|cur| {
                let q = ps.point(*cur);
                let ord = p.iter().zip(q).map(|(a, b)| a.total_cmp(b)).find(|o| o.is_ne());
                if ord == Some(std::cmp::Ordering::Less) {
                    *cur = i;
                }
            })
            .or_insert(i);
    }
    let mut reps: Vec<usize> = best.into_values().collect();
    reps.sort_unstable();
    Ok(reps)
}

/// Exact-endpoint passage time with a finite truncation threshold, where
/// intermediate vertices are restricted to one representative per `eps`-box.
/// Returned ids refer to the original point set.
pub fn truncated_passage_time(ps: &PointSet, cm: &CostModel, eps: f64, x: &[f64], y: &[f64]) -> Result<(f64, PathResult)> {
    if cm.truncation().is_none() {
        return invalid("truncated passage time needs a finite truncation threshold");
    }
    let reps = box_representatives(ps, eps)?;
    let pts: Vec<Vec<f64>> = reps.iter().map(|&i| ps.point(i).to_vec()).collect();
    let sub = PointSet::from_points(ps.window().clone(), ps.density(), ps.seed(), &pts)?;
    let (cost, mut path) = passage_time(&sub, cm, x, y, EndpointMode::Exact)?;
    for id in &mut path.ids {
        *id = reps[*id];
    }
    Ok((cost, path))
}

/// A passage-time query on a freshly sampled window.
#[derive(Debug, Clone, Copy)]
pub struct WindowedQuery<'a> {
    pub cm: CostModel,
    pub density: f64,
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub seed: u64,
    pub stream: u64,
    pub mode: EndpointMode,
    pub policy: WindowPolicy,
    pub k: usize,
    pub audit: AuditLevel,
}

#[derive(Debug, Clone)]
pub struct WindowedPassage {
    pub path: PathResult,
    pub window: Window,
    pub regrowths: u32,
    pub particles: usize,
}

/// Samples the window prescribed by the policy and answers the query. While
/// the path is untrusted the margin grows and the window is sampled again from
/// the same substream; larger windows are new realizations, not extensions.
/// The last attempt is returned even if still untrusted.
pub fn windowed_passage_time(q: &WindowedQuery) -> Result<WindowedPassage> {
    let d = q.x.len();
    if q.y.len() != d {
        return invalid("query points differ in dimension");
    }
    let spacing = q.density.powf(-1.0 / d as f64);
    let mut regrowths = 0;
    loop {
        let window = q.policy.window_for(q.x, q.y, spacing, regrowths)?;
        let ps = PointSet::sample_substream(window.clone(), q.density, q.seed, q.stream)?;
        let particles = ps.len();
        let path = if particles < 2 {
            small_passage_time(&ps, &q.cm, q.x, q.y, q.mode)?.1
        } else {
            let g = CandidateGraph::build(ps, q.cm, q.k, q.audit)?.with_policy(q.policy);
            g.passage_time(q.x, q.y, q.mode)?.1
        };
        if path.trusted || regrowths >= q.policy.max_regrowths {
            return Ok(WindowedPassage { path, window, regrowths, particles });
        }
        regrowths += 1;
    }
}

#[cfg(test)]
mod tests;
