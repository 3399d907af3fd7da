use super::*;
use crate::costmodel::lens_contains;
use crate::pointcloud::substream_rng;
use rand::Rng;

fn set(points: &[Vec<f64>]) -> PointSet {
    let d = points[0].len();
    PointSet::from_points(Window::cube(d, -20.0, 20.0).unwrap(), 1.0, 0, points).unwrap()
}

fn random_set(seed: u64, n: usize, side: f64) -> PointSet {
    let mut rng = substream_rng(seed, 1);
    let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(0.0..side), rng.random_range(0.0..side)]).collect();
    PointSet::from_points(Window::cube(2, 0.0, side).unwrap(), 1.0, seed, &pts).unwrap()
}

fn graph(ps: &PointSet, alpha: f64) -> CandidateGraph {
    CandidateGraph::build(ps.clone(), CostModel::power(alpha).unwrap(), DEFAULT_NEIGHBORS, AuditLevel::Doubling).unwrap()
}

#[test]
fn three_points_give_the_gabriel_graph() {
    // (1, 0.4) lies in the diameter disk of the outer pair; (1, 1.2) does not
    let inside = set(&[vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, 0.4]]);
    let g = graph(&inside, 2.0);
    assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 2), (1, 2)]);
    let outside = set(&[vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, 1.2]]);
    assert_eq!(graph(&outside, 2.0).edge_count(), 3);
}

#[test]
fn collinear_middle_point_prunes_long_link() {
    let ps = set(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]]);
    let g = graph(&ps, 2.0);
    assert!(!g.has_edge(0, 2));
    let p = g.geodesic(0, 2).unwrap();
    assert_eq!(p.ids, vec![0, 1, 2]);
    assert_eq!(p.cost, 2.0);
    assert_eq!(p.link_lengths, vec![1.0, 1.0]);
}

#[test]
fn two_points_direct_link() {
    let ps = set(&[vec![0.0, 0.0], vec![3.0, 4.0]]);
    let g = graph(&ps, 1.5);
    let p = g.geodesic(1, 0).unwrap();
    assert_eq!(p.ids, vec![1, 0]);
    assert_eq!(p.cost, 5f64.powf(1.5));
    assert_eq!(g.geodesic(0, 0).unwrap().cost, 0.0);
    assert!(g.geodesic(0, 7).is_err());
}

#[test]
fn build_rejects_bad_input() {
    let one = set(&[vec![0.0, 0.0]]);
    let cm = CostModel::power(2.0).unwrap();
    assert!(CandidateGraph::build(one, cm, 32, AuditLevel::None).is_err());
    let two = set(&[vec![0.0, 0.0], vec![1.0, 0.0]]);
    assert!(CandidateGraph::build(two, cm, 0, AuditLevel::None).is_err());
}

#[test]
fn kept_edges_match_all_pairs_filter() {
    for seed in 0..60 {
        let n = 3 + (seed as usize % 10);
        let ps = random_set(seed, n, 4.0);
        for alpha in [1.5, 2.0, 3.0] {
            let cm = CostModel::power(alpha).unwrap();
            let g = CandidateGraph::build(ps.clone(), cm, 4, AuditLevel::Doubling).unwrap();
            let mut oracle = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    let blocked = (0..n).any(|c| c != a && c != b && lens_contains(&cm, ps.point(a), ps.point(b), ps.point(c), true).unwrap());
                    if !blocked {
                        oracle.push((a, b));
                    }
                }
            }
            assert_eq!(g.edges().collect::<Vec<_>>(), oracle, "seed {seed} alpha {alpha}");
        }
    }
}

#[test]
fn small_budget_is_caught_in_three_dimensions() {
    // no angular certificate in d = 3, so a tiny budget must trip the audit
    let ps = PointSet::sample(Window::cube(3, 0.0, 7.0).unwrap(), 1.0, 3).unwrap();
    let cm = CostModel::power(2.0).unwrap();
    assert!(matches!(
        CandidateGraph::build(ps.clone(), cm, 1, AuditLevel::Doubling),
        Err(Error::UnstablePrune { k: 8, doublings: 3 })
    ));
    let g = CandidateGraph::build(ps.clone(), cm, 16, AuditLevel::Doubling).unwrap();
    assert_eq!(g.audit_log().last().unwrap().matches_previous, Some(true));
    let reference = CandidateGraph::build(ps, cm, 256, AuditLevel::None).unwrap();
    assert_eq!(g.edges().collect::<Vec<_>>(), reference.edges().collect::<Vec<_>>());
}

#[test]
fn certified_small_budget_is_exact_in_the_plane() {
    for (seed, alpha) in [(3, 1.5), (4, 2.0), (5, 3.0), (6, 1.1)] {
        let ps = random_set(seed, 400, 20.0);
        let cm = CostModel::power(alpha).unwrap();
        let g = CandidateGraph::build(ps.clone(), cm, 1, AuditLevel::None).unwrap();
        assert!(g.is_certified());
        let reference = CandidateGraph::build(ps, cm, 399, AuditLevel::None).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), reference.edges().collect::<Vec<_>>(), "alpha {alpha}");
    }
}

#[test]
fn graph_is_symmetric_and_loop_free() {
    let ps = random_set(5, 300, 15.0);
    let g = graph(&ps, 2.0);
    for u in 0..g.len() {
        for &v in g.neighbors(u) {
            assert_ne!(u, v as usize);
            assert!(g.has_edge(v as usize, u));
        }
        assert!(g.neighbors(u).windows(2).all(|w| w[0] < w[1]));
    }
    for (v, len, c) in g.arcs(0) {
        assert_eq!(len, dist(ps.point(0), ps.point(v)));
        assert_eq!(c, g.cost_model().phi(len));
    }
}

#[test]
fn dijkstra_matches_brute_force() {
    let mut checked = 0;
    for seed in 0..120u64 {
        let n = 2 + (seed as usize % 8);
        let ps = random_set(100 + seed, n, 3.0);
        let alpha = [1.5, 2.0, 3.0][seed as usize % 3];
        let g = graph(&ps, alpha);
        let cm = *g.cost_model();
        let (a, b) = (0, n - 1);
        let fast = g.geodesic(a, b).unwrap();
        let slow = brute_force_geodesic(&ps, &cm, a, b).unwrap();
        assert_eq!(fast.ids, slow.ids, "seed {seed}");
        assert!((fast.cost - slow.cost).abs() <= 1e-12 * slow.cost);
        checked += 1;
    }
    assert_eq!(checked, 120);
}

#[test]
fn exact_mode_matches_brute_force() {
    for seed in 0..60u64 {
        let n = 2 + (seed as usize % 8);
        let ps = random_set(300 + seed, n, 3.0);
        let mut rng = substream_rng(seed, 9);
        let x = vec![rng.random_range(0.0..3.0), rng.random_range(0.0..3.0)];
        let y = vec![rng.random_range(0.0..3.0), rng.random_range(0.0..3.0)];
        let cm = CostModel::power([1.5, 2.0, 3.0][seed as usize % 3]).unwrap();
        for mode in [EndpointMode::Particle, EndpointMode::Exact] {
            let (c1, p1) = passage_time(&ps, &cm, &x, &y, mode).unwrap();
            let (c2, p2) = brute_force_passage_time(&ps, &cm, &x, &y, mode).unwrap();
            assert_eq!(p1.points, p2.points, "seed {seed} {mode:?}");
            assert!((c1 - c2).abs() <= 1e-12 * c2.max(1e-300));
        }
    }
}

#[test]
fn same_point_queries_cost_nothing() {
    let ps = random_set(7, 20, 5.0);
    let cm = CostModel::power(2.0).unwrap();
    let x = [2.0, 2.0];
    for mode in [EndpointMode::Particle, EndpointMode::Exact] {
        let (c, p) = passage_time(&ps, &cm, &x, &x, mode).unwrap();
        assert_eq!(c, 0.0);
        assert_eq!(p.points.len(), 1);
    }
}

#[test]
fn path_invariants_hold() {
    let ps = random_set(11, 500, 20.0);
    let g = graph(&ps, 2.0);
    let p = g.geodesic(0, 1).unwrap();
    let cm = g.cost_model();
    let sum: f64 = p.link_lengths.iter().map(|&l| cm.phi(l)).sum();
    assert!((sum - p.cost).abs() <= 1e-12 * p.cost);
    let mut ids = p.ids.clone();
    ids.sort_unstable();
    ids.dedup();
    assert_eq!(ids.len(), p.ids.len());
    for w in p.ids.windows(2) {
        assert!(g.has_edge(w[0], w[1]));
    }
}

#[test]
fn alpha_near_one_uses_direct_links() {
    let ps = random_set(13, 40, 5.0);
    let g = graph(&ps, 1.0 + 1e-9);
    for (a, b) in [(0, 1), (2, 30), (5, 39)] {
        assert_eq!(g.geodesic(a, b).unwrap().ids, vec![a, b]);
    }
}

#[test]
fn truncated_limit_recovers_exact_mode() {
    let ps = random_set(17, 60, 6.0);
    let x = [0.5, 0.5];
    let y = [5.5, 5.0];
    let trunc = CostModel::truncated(2.0, 100.0).unwrap();
    let (c1, p1) = truncated_passage_time(&ps, &trunc, 1e-6, &x, &y).unwrap();
    let (c2, p2) = passage_time(&ps, &CostModel::power(2.0).unwrap(), &x, &y, EndpointMode::Exact).unwrap();
    assert_eq!(p1.ids, p2.ids);
    assert!((c1 - c2).abs() <= 1e-12 * c2);
    assert!(truncated_passage_time(&ps, &CostModel::power(2.0).unwrap(), 0.1, &x, &y).is_err());
}

#[test]
fn box_representatives_are_leftmost() {
    let ps = set(&[vec![0.1, 0.0], vec![0.05, 0.3], vec![0.05, 0.2], vec![3.0, 3.0]]);
    assert_eq!(box_representatives(&ps, 1.0).unwrap(), vec![2, 3]);
}

#[test]
fn staircase_bounds_and_two_point_case() {
    let cm = CostModel::power(2.0).unwrap();
    for seed in 0..20 {
        let ps = random_set(40 + seed, 200, 14.0);
        let (x, y) = ([2.0, 7.0], [12.0, 6.0]);
        let st = staircase_upper_bound(&ps, &cm, &x, &y).unwrap();
        let (t, _) = passage_time(&ps, &cm, &x, &y, EndpointMode::Exact).unwrap();
        assert!(st.cost >= t * (1.0 - 1e-12));
        assert_eq!(st.path.first(), &x);
        assert_eq!(st.path.last(), &y);
    }
    let ps = set(&[vec![0.0, 0.0], vec![3.0, 1.0]]);
    let st = staircase_upper_bound(&ps, &cm, ps.point(0), ps.point(1)).unwrap();
    assert!(st.complete);
    assert_eq!(st.cost, graph(&ps, 2.0).geodesic(0, 1).unwrap().cost);
    assert_eq!(st.path.points.len(), 2);
}

#[test]
fn gamma_is_at_least_nearest_distance() {
    let cm = CostModel::power(2.0).unwrap();
    let ps = random_set(50, 100, 10.0);
    for a in [[5.0, 5.0], [2.0, 8.0]] {
        let g = gamma_radius(&ps, &cm, &a, 16).unwrap();
        let q = ps.nearest(&a).unwrap();
        assert!(g >= dist(ps.point(q), &a));
    }
}

#[test]
fn minimax_on_a_triangle() {
    // sides |01| = 1, |12| = 1.2, |02| = 1.5
    let c = (1.0f64 + 1.5 * 1.5 - 1.2 * 1.2) / 2.0;
    let ps = set(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![c, (1.5f64 * 1.5 - c * c).sqrt()]]);
    let (v, path) = minimax_distance(&ps, 0, 2).unwrap();
    assert!((v - 1.2).abs() < 1e-12);
    assert_eq!(path, vec![0, 1, 2]);
    assert_eq!(minimax_distance(&ps, 1, 1).unwrap().0, 0.0);
    assert!((exhaustive_minimax(&ps, 0, 2).unwrap() - 1.2).abs() < 1e-12);
}

#[test]
fn spanning_tree_minimax_matches_enumeration() {
    for seed in 0..30 {
        let ps = random_set(300 + seed, 3 + seed as usize % 7, 5.0);
        for a in 0..ps.len() {
            for b in 0..ps.len() {
                assert_eq!(minimax_distance(&ps, a, b).unwrap().0, exhaustive_minimax(&ps, a, b).unwrap(), "seed {seed}");
            }
        }
    }
}

#[test]
fn windowed_query_is_trusted_and_deterministic() {
    let q = WindowedQuery {
        cm: CostModel::power(2.0).unwrap(),
        density: 1.0,
        x: &[0.0, 0.0],
        y: &[30.0, 0.0],
        seed: 9,
        stream: 4,
        mode: EndpointMode::Particle,
        policy: WindowPolicy::default(),
        k: DEFAULT_NEIGHBORS,
        audit: AuditLevel::Doubling,
    };
    let a = windowed_passage_time(&q).unwrap();
    let b = windowed_passage_time(&q).unwrap();
    assert!(a.path.trusted);
    assert_eq!(a.path, b.path);
    let margin = WindowPolicy::default().margin(30.0, 1.0);
    assert_eq!(a.window.lower(), &[-margin, -margin]);
}

#[test]
fn policy_values() {
    let p = WindowPolicy::default();
    assert_eq!(p.margin(10.0, 1.0), 20.0);
    assert!((p.margin(1000.0, 1.0) - 1000f64.powf(0.8)).abs() < 1e-9);
    assert_eq!(p.trust_band(10.0, 1.0), 5.0);
    assert!((p.trust_band(1000.0, 1.0) - 1000f64.powf(0.55)).abs() < 1e-9);
}
