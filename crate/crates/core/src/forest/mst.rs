use std::cmp::Ordering;
use std::sync::Arc;

use super::{GeodesicTree, TreeKind, NONE};
use crate::error::{invalid, Result};
use crate::pointcloud::{dist, PointSet};

/// Edge key `(length, smaller id, larger id)`, a strict total order.
type Key = (f64, usize, usize);

fn key_cmp(a: &Key, b: &Key) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
}

fn key(ps: &PointSet, u: usize, v: usize) -> Key {
    (dist(ps.point(u), ps.point(v)), u.min(v), u.max(v))
}

/// Euclidean minimum spanning tree by dense Prim from particle 0, under the
/// edge order (length, smaller id, larger id). Every vertex is covered; costs
/// are Euclidean path lengths to the root.
pub fn euclidean_mst(ps: &PointSet) -> Result<GeodesicTree> {
    let n = ps.len();
    if n == 0 {
        return invalid("spanning tree of an empty point set");
    }
    let mut in_tree = vec![false; n];
    let mut best: Vec<Option<Key>> = vec![None; n];
    let mut from = vec![NONE; n];
    let mut cost = vec![f64::INFINITY; n];
    let mut order = Vec::with_capacity(n);
    let mut cur = 0usize;
    in_tree[0] = true;
    cost[0] = 0.0;
    order.push(0);
    for _ in 1..n {
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let k = key(ps, cur, v);
            if best[v].as_ref().is_none_or(|b| key_cmp(&k, b) == Ordering::Less) {
                best[v] = Some(k);
                from[v] = cur as u32;
            }
        }
        let next = (0..n)
            .filter(|&v| !in_tree[v])
            .min_by(|&a, &b| key_cmp(best[a].as_ref().unwrap(), best[b].as_ref().unwrap()))
            .expect("vertices remain");
        in_tree[next] = true;
        cost[next] = cost[from[next] as usize] + best[next].unwrap().0;
        order.push(next);
        cur = next;
    }
    let mut t = GeodesicTree::from_labels(TreeKind::Mst { root: 0 }, 0, from, cost, Arc::new(ps.clone()), None);
    t.covered = vec![true; n];
    Ok(t)
}

/// True iff every path from `q` to `q̄` avoiding the link `{q, q̄}` has a link
/// longer than `|q − q̄|`: bottleneck shortest path on the complete graph
/// minus that link.
pub fn msf_edge_criterion(ps: &PointSet, q: usize, qb: usize) -> Result<bool> {
    let n = ps.len();
    if q >= n || qb >= n || q == qb {
        return invalid("criterion needs two distinct particle ids");
    }
    let mut bottleneck = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    bottleneck[q] = 0.0;
    for _ in 0..n {
        let Some(u) = (0..n).filter(|&v| !done[v] && bottleneck[v].is_finite()).min_by(|&a, &b| bottleneck[a].total_cmp(&bottleneck[b]))
        else {
            break;
        };
        done[u] = true;
        if u == qb {
            break;
        }
        for v in 0..n {
            if done[v] || (u == q && v == qb) || (u == qb && v == q) {
                continue;
            }
            let b = bottleneck[u].max(dist(ps.point(u), ps.point(v)));
            if b < bottleneck[v] {
                bottleneck[v] = b;
            }
        }
    }
    Ok(bottleneck[qb] > dist(ps.point(q), ps.point(qb)))
}
