use super::*;
use crate::geodesic::brute_force_geodesic;
use crate::pointcloud::substream_rng;
use rand::Rng;

fn set(points: &[Vec<f64>], side: f64) -> PointSet {
    PointSet::from_points(Window::cube(2, -side, side).unwrap(), 1.0, 0, points).unwrap()
}

fn random_set(seed: u64, n: usize, side: f64) -> PointSet {
    let mut rng = substream_rng(seed, 3);
    let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-side..side), rng.random_range(-side..side)]).collect();
    set(&pts, side)
}

fn build(ps: &PointSet, alpha: f64) -> CandidateGraph {
    CandidateGraph::build(ps.clone(), CostModel::power(alpha).unwrap(), DEFAULT_NEIGHBORS, AuditLevel::None).unwrap()
}

fn directional_setup(seed: u64) -> (CandidateGraph, GeodesicTree) {
    let w = directional_window(&[1.0, 0.0], 24.0, 8.0, 1.0, &WindowPolicy::default()).unwrap();
    let ps = PointSet::sample(w, 1.0, seed).unwrap();
    let g = build(&ps, 2.0);
    let t = directional_tree(&g, &[1.0, 0.0], 24.0, 8.0).unwrap();
    (g, t)
}

#[test]
fn three_collinear_points_form_a_chain() {
    let ps = set(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]], 3.0);
    let t = tree_from_graph(&build(&ps, 2.0), 0).unwrap();
    assert_eq!(t.parent(0), None);
    assert_eq!(t.parent(1), Some(0));
    assert_eq!(t.parent(2), Some(1));
    assert_eq!(t.cost_to_root(2), 2.0);
    assert_eq!(t.depth(2), Some(2));
    assert_eq!(t.tree_path(2, 0), Some(vec![2, 1, 0]));
}

#[test]
fn tree_paths_match_brute_force() {
    for seed in 0..60 {
        let n = 3 + (seed as usize % 7);
        let alpha = [1.5, 2.0, 3.0][seed as usize % 3];
        let ps = random_set(seed, n, 5.0);
        let cm = CostModel::power(alpha).unwrap();
        let q = seed as usize % n;
        let t = tree_from_graph(&build(&ps, alpha), q).unwrap();
        for v in 0..n {
            let bf = brute_force_geodesic(&ps, &cm, q, v).unwrap();
            let mut chain = t.chain(v).unwrap();
            chain.reverse();
            assert_eq!(chain, bf.ids, "seed {seed} v {v}");
            assert_eq!(t.cost_to_root(v), bf.cost);
        }
    }
}

/// All labelled trees on `n` vertices, decoded from Prüfer sequences.
fn spanning_trees(n: usize) -> Vec<Vec<(usize, usize)>> {
    let total = n.pow(n as u32 - 2);
    (0..total)
        .map(|mut code| {
            let seq: Vec<usize> = (0..n - 2)
                .map(|_| {
                    let x = code % n;
                    code /= n;
                    x
                })
                .collect();
            let mut degree = vec![1usize; n];
            for &x in &seq {
                degree[x] += 1;
            }
            let mut edges = Vec::new();
            for &x in &seq {
                let leaf = (0..n).find(|&v| degree[v] == 1).unwrap();
                edges.push((leaf.min(x), leaf.max(x)));
                degree[leaf] -= 1;
                degree[x] -= 1;
            }
            let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
            edges.push((rest[0], rest[1]));
            edges.sort();
            edges
        })
        .collect()
}

fn tree_edges(t: &GeodesicTree) -> Vec<(usize, usize)> {
    let mut e: Vec<(usize, usize)> = (0..t.len()).filter_map(|v| t.parent(v).map(|p| (v.min(p), v.max(p)))).collect();
    e.sort();
    e
}

#[test]
fn spanning_tree_matches_exhaustive_search() {
    for seed in 0..20 {
        let n = 3 + seed as usize % 5;
        let ps = random_set(100 + seed, n, 4.0);
        let weight = |edges: &[(usize, usize)]| edges.iter().map(|&(a, b)| dist(ps.point(a), ps.point(b))).sum::<f64>();
        let best = spanning_trees(n).into_iter().min_by(|a, b| weight(a).total_cmp(&weight(b))).unwrap();
        let t = euclidean_mst(&ps).unwrap();
        assert_eq!(tree_edges(&t), best, "seed {seed}");
        assert!(t.covered_ids().len() == n);
    }
}

#[test]
fn forest_criterion_is_spanning_tree_membership() {
    for seed in 0..10 {
        let ps = random_set(200 + seed, 10, 4.0);
        let edges = tree_edges(&euclidean_mst(&ps).unwrap());
        for a in 0..10 {
            for b in a + 1..10 {
                assert_eq!(msf_edge_criterion(&ps, a, b).unwrap(), edges.contains(&(a, b)), "seed {seed} ({a},{b})");
            }
        }
    }
}

#[test]
fn forest_criterion_on_triangles() {
    // the longest side of a scalene triangle is never kept
    let ps = set(&[vec![0.0, 0.0], vec![3.0, 0.0], vec![0.0, 2.0]], 4.0);
    assert!(msf_edge_criterion(&ps, 0, 1).unwrap());
    assert!(msf_edge_criterion(&ps, 0, 2).unwrap());
    assert!(!msf_edge_criterion(&ps, 1, 2).unwrap());
    assert!(msf_edge_criterion(&ps, 0, 0).is_err());
}

#[test]
fn meeting_vertex_matches_chain_walk() {
    let ps = random_set(7, 300, 10.0);
    let t = tree_from_graph(&build(&ps, 2.0), 0).unwrap();
    let mut rng = substream_rng(7, 9);
    for _ in 0..500 {
        let (a, b) = (rng.random_range(0..300), rng.random_range(0..300));
        let ca = t.chain(a).unwrap();
        let cb = t.chain(b).unwrap();
        let oracle = *ca.iter().find(|v| cb.contains(v)).unwrap();
        assert_eq!(t.meeting_vertex(a, b), Some(oracle));
        let path = t.tree_path(a, b).unwrap();
        assert_eq!((path[0], *path.last().unwrap()), (a, b));
        assert!(path.windows(2).all(|w| t.parent(w[0]) == Some(w[1]) || t.parent(w[1]) == Some(w[0])));
    }
}

#[test]
fn heights_agree_both_ways() {
    let (_, t) = directional_setup(11);
    let field = height_field(&t).unwrap();
    assert!(field.values.len() > 50);
    assert_eq!(field.get(field.base), Some(0.0));
    for &(v, h) in &field.values {
        let other = height_via_meeting(&t, v, field.base).unwrap();
        assert!((h - other).abs() <= 1e-12 * t.cost_to_root(v).max(1.0), "id {v}: {h} vs {other}");
    }
}

#[test]
fn directional_tree_guards() {
    let ps = random_set(1, 50, 10.0);
    let g = build(&ps, 2.0);
    assert!(directional_tree(&g, &[1.0, 0.0], 20.0, 8.0).is_err());
    assert!(directional_tree(&g, &[0.0, 0.0], 30.0, 8.0).is_err());
    assert!(directional_tree(&g, &[1.0], 30.0, 8.0).is_err());
    let t = tree_from_graph(&g, 0).unwrap();
    assert!(height_field(&t).is_err());
}

#[test]
fn recursion_holds_on_three_points() {
    // target far right; the middle point relays the left one
    let ps = set(&[vec![-1.0, 0.0], vec![0.0, 0.0], vec![3.0, 0.0]], 4.0);
    let g = build(&ps, 2.0);
    let t = directional_tree(&g, &[1.0, 0.0], 3.0, 1.0).unwrap();
    assert_eq!(t.root(), 2);
    assert_eq!(t.parent(0), Some(1));
    let t = GeodesicTree { covered: vec![true, true, false], ..t };
    let field = height_field(&t).unwrap();
    assert_eq!(field.base, 1);
    assert_eq!(field.get(0), Some(1.0));
    let rep = verify_height_recursion(&g, &t, &field, &[0, 1], 2, 1).unwrap();
    assert_eq!(rep.violations(), 0);
    assert_eq!(rep.inequality_checks, 4);
    assert_eq!(rep.parent_checks, 2);
}

#[test]
fn recursion_holds_on_sampled_core() {
    let (g, t) = directional_setup(12);
    let field = height_field(&t).unwrap();
    let core: Vec<usize> = field.values.iter().map(|e| e.0).take(40).collect();
    let rep = verify_height_recursion(&g, &t, &field, &core, 10, 4).unwrap();
    assert_eq!(rep.violations(), 0, "{:?}", rep.witnesses);
    assert_eq!(rep.parent_checks, core.len());
    assert!(rep.exclusion_checks > 0);
}

#[test]
fn collinear_tree_is_straight() {
    let pts: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, 0.0]).collect();
    let ps = set(&pts, 8.0);
    let g = build(&ps, 2.0);
    let mut t = tree_from_graph(&g, 0).unwrap();
    t.covered = vec![true; 8];
    let rep = straightness_audit(&t, 0.01).unwrap();
    assert_eq!(rep.entries.len(), 7);
    assert_eq!(rep.violations_beyond(0.0), 0);
    assert_eq!(rep.entries[0].descendants, 7);
    let stats = tree_stats(&t);
    assert_eq!(stats.vertices, 8);
    assert_eq!(stats.degree_histogram, vec![0, 2, 6]);
    assert_eq!(stats.max_depth, 7);
    assert!(stats.direction_dispersal.unwrap().abs() < 1e-12);
}

#[test]
fn quarter_turn_preserves_trees() {
    // (x, y) ↦ (−y, x) is exact in floating point and maps the square to itself
    let ps = random_set(21, 400, 10.0);
    let rot = ps.map_points(ps.window().clone(), |p| vec![-p[1], p[0]]).unwrap();
    for alpha in [1.5, 2.0, 3.0] {
        let a = tree_from_graph(&build(&ps, alpha), 5).unwrap();
        let b = tree_from_graph(&build(&rot, alpha), 5).unwrap();
        assert_eq!(a.record(), GeodesicTree { kind: a.kind().clone(), ..b }.record());
    }
}

#[test]
fn records_roundtrip() {
    let ps = random_set(2, 20, 4.0);
    let t = euclidean_mst(&ps).unwrap();
    let rec = t.record();
    assert!(rec.parent[0].is_none());
    assert!(rec.parent[1..].iter().all(Option::is_some));
    let back: TreeRecord = serde_json::from_str(&serde_json::to_string(&rec).unwrap()).unwrap();
    assert_eq!(back, rec);
}
