//! Dijkstra under the total order (cost, hop count, lexicographic vertex sequence).

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

pub(crate) const NONE: u32 = u32::MAX;

/// Single-source labels. `pred[source] == NONE`; unreached vertices have
/// infinite cost.
#[derive(Debug, Clone)]
pub struct ShortestPaths {
    pub(crate) source: u32,
    pub(crate) cost: Vec<f64>,
    pub(crate) hops: Vec<u32>,
    pub(crate) pred: Vec<u32>,
}

impl ShortestPaths {
    pub fn source(&self) -> usize {
        self.source as usize
    }

    pub fn cost(&self, v: usize) -> f64 {
        self.cost[v]
    }

    pub fn hops(&self, v: usize) -> u32 {
        self.hops[v]
    }

    pub fn reached(&self, v: usize) -> bool {
        self.cost[v].is_finite()
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        (self.pred[v] != NONE).then_some(self.pred[v] as usize)
    }

    pub fn len(&self) -> usize {
        self.cost.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cost.is_empty()
    }

    /// Vertex sequence from the source to `v`, or `None` if unreached.
    pub fn path_to(&self, v: usize) -> Option<Vec<usize>> {
        if !self.reached(v) {
            return None;
        }
        let mut seq = vec![v];
        let mut cur = v as u32;
        while self.pred[cur as usize] != NONE {
            cur = self.pred[cur as usize];
            seq.push(cur as usize);
        }
        seq.reverse();
        Some(seq)
    }

    fn chain(&self, mut v: u32, out: &mut Vec<u32>) {
        out.clear();
        out.push(v);
        while self.pred[v as usize] != NONE {
            v = self.pred[v as usize];
            out.push(v);
        }
        out.reverse();
    }
}

/// Runs Dijkstra from `source` over `n` vertices. `edges(u, f)` must call
/// `f(v, w)` for each arc `u → v` of weight `w ≥ 0`. Stops once `target` is
/// settled when given.
///
/// Among paths of equal cost the fewer hops win, then the lexicographically
/// smaller vertex sequence. The order is preserved by appending an arc, so
/// settled labels are final.
pub(crate) fn dijkstra(
    n: usize,
    source: usize,
    target: Option<usize>,
    mut edges: impl FnMut(usize, &mut dyn FnMut(usize, f64)),
) -> ShortestPaths {
    let mut sp = ShortestPaths {
        source: source as u32,
        cost: vec![f64::INFINITY; n],
        hops: vec![u32::MAX; n],
        pred: vec![NONE; n],
    };
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    sp.cost[source] = 0.0;
    sp.hops[source] = 0;
    heap.push(Reverse((0u64, 0u32, source as u32)));
    while let Some(Reverse((bits, h, u))) = heap.pop() {
        let u = u as usize;
        if done[u] || bits != sp.cost[u].to_bits() || h != sp.hops[u] {
            continue;
        }
        done[u] = true;
        if Some(u) == target {
            break;
        }
        let (cu, hu) = (sp.cost[u], sp.hops[u] + 1);
        edges(u, &mut |v, w| {
            if done[v] {
                return;
            }
            let c = cu + w;
            let better = match c.partial_cmp(&sp.cost[v]).unwrap_or(Ordering::Greater) {
                Ordering::Less => true,
                Ordering::Greater => false,
                Ordering::Equal => match hu.cmp(&sp.hops[v]) {
                    Ordering::Less => true,
                    Ordering::Greater => false,
                    Ordering::Equal => {
                        // same cost and length: compare source..u against source..pred(v)
                        sp.chain(u as u32, &mut ca);
                        sp.chain(sp.pred[v], &mut cb);
                        ca < cb
                    }
                },
            };
            if better {
                sp.cost[v] = c;
                sp.hops[v] = hu;
                sp.pred[v] = u as u32;
                heap.push(Reverse((c.to_bits(), hu, v as u32)));
            }
        });
    }
    // labels of unsettled vertices are provisional when stopping early
    if target.is_some() {
        for v in 0..n {
            if !done[v] {
                sp.cost[v] = f64::INFINITY;
                sp.hops[v] = u32::MAX;
                sp.pred[v] = NONE;
            }
        }
    }
    sp
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(n: usize, arcs: &[(usize, usize, f64)], s: usize) -> ShortestPaths {
        dijkstra(n, s, None, |u, f| {
            for &(a, b, w) in arcs {
                if a == u {
                    f(b, w);
                }
                if b == u {
                    f(a, w);
                }
            }
        })
    }

    #[test]
    fn prefers_fewer_hops_then_smaller_ids() {
        // 0-1-3 and 0-2-3 tie on cost and hops; 0-3 direct ties on cost only
        let arcs = [(0, 2, 1.0), (2, 3, 1.0), (0, 1, 1.0), (1, 3, 1.0), (0, 4, 0.5), (4, 5, 0.5), (5, 3, 1.0)];
        let sp = run(6, &arcs, 0);
        assert_eq!(sp.path_to(3).unwrap(), vec![0, 1, 3]);
        let arcs = [(0, 4, 0.5), (4, 5, 0.5), (5, 3, 1.0), (0, 3, 2.0)];
        assert_eq!(run(6, &arcs, 0).path_to(3).unwrap(), vec![0, 3]);
    }

    #[test]
    fn lexicographic_tie_deep_in_chain() {
        // two equal-cost, equal-hop routes that first differ at the second vertex
        let arcs = [(0, 1, 1.0), (1, 5, 1.0), (5, 7, 1.0), (0, 2, 1.0), (2, 4, 1.0), (4, 7, 1.0)];
        assert_eq!(run(8, &arcs, 0).path_to(7).unwrap(), vec![0, 1, 5, 7]);
        let arcs = [(0, 1, 1.0), (1, 5, 1.0), (5, 7, 1.0), (0, 1, 1.0), (1, 4, 1.0), (4, 7, 1.0)];
        assert_eq!(run(8, &arcs, 0).path_to(7).unwrap(), vec![0, 1, 4, 7]);
    }

    #[test]
    fn early_stop_and_unreached() {
        let arcs = [(0, 1, 1.0), (1, 2, 1.0)];
        let sp = dijkstra(4, 0, Some(1), |u, f| {
            for &(a, b, w) in &arcs {
                if a == u {
                    f(b, w);
                }
            }
        });
        assert_eq!(sp.path_to(1).unwrap(), vec![0, 1]);
        assert!(!sp.reached(2));
        assert!(sp.path_to(3).is_none());
        assert_eq!(sp.parent(0), None);
    }
}
