//! Angular certificates that no particle beyond the searched radius can be an
//! empty-lens partner.
//!
//! For the pure power cost, lenses along a ray are nested:
//! `W(a, a + r u) ⊆ W(a, a + L u)` for `L ≥ r`. So if every direction `u` in
//! which the window extends past radius `r` has some known particle `c` inside
//! `W°(a, a + r u)`, no particle farther than `r` from `a` can be linked to it.
//! In the plane the directions blocked by `c` form an arc around `c − a`, and
//! the check is an exact arc-cover test.

use std::f64::consts::{PI, TAU};

use crate::costmodel::CostModel;
use crate::pointcloud::{Neighbor, PointSet, Window};

/// Whether a certificate can be computed for this dimension and cost.
pub(crate) fn supported(ps: &PointSet, cm: &CostModel) -> bool {
    ps.dim() == 2 && cm.truncation().is_none()
}

/// Half-width of the arc of directions `u` with `c ∈ W°(a, a + r u)` for a
/// particle at distance `s < r`, shrunk slightly against rounding.
fn half_width(cm: &CostModel, s: f64, r: f64) -> f64 {
    if s <= 0.0 || s >= r {
        return -1.0;
    }
    let alpha = cm.alpha();
    let spare = cm.phi(r) - cm.phi(s);
    if spare <= 0.0 {
        return -1.0;
    }
    let reach = spare.powf(1.0 / alpha);
    let kappa = (s * s + r * r - reach * reach) / (2.0 * s * r);
    if kappa <= -1.0 {
        return PI;
    }
    if kappa >= 1.0 {
        return -1.0;
    }
    kappa.acos() * (1.0 - 1e-9)
}

/// True when the circle point `center + r(cos θ, sin θ)` lies outside the open
/// window for every `θ` in `[t0, t1]`.
/// Only meaningful for a center inside the window, which is convex, so a ray
/// that has left it never returns.
fn arc_outside(center: &[f64], r: f64, t0: f64, t1: f64, w: &Window) -> bool {
    if !w.contains(center) {
        return false;
    }
    let mut cuts = vec![t0, t1];
    let mut add = |theta: f64| {
        for k in -2..=2 {
            let t = theta + k as f64 * TAU;
            if t > t0 && t < t1 {
                cuts.push(t);
            }
        }
    };
    for (bound, j) in [(w.lower()[0], 0), (w.upper()[0], 0), (w.lower()[1], 1), (w.upper()[1], 1)] {
        let v = (bound - center[j]) / r;
        if v.abs() <= 1.0 {
            if j == 0 {
                add(v.acos());
                add(-v.acos());
            } else {
                add(v.asin());
                add(PI - v.asin());
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.windows(2).all(|p| {
        let t = 0.5 * (p[0] + p[1]);
        let x = center[0] + r * t.cos();
        let y = center[1] + r * t.sin();
        let inside = x > w.lower()[0] && x < w.upper()[0] && y > w.lower()[1] && y < w.upper()[1];
        !inside
    })
}

/// Checks the certificate for `center` whose sorted neighbour list reaches
/// radius `r` (the last listed distance).
pub(crate) fn certified(ps: &PointSet, cm: &CostModel, center: &[f64], nb: &[Neighbor], r: f64) -> bool {
    let mut arcs: Vec<(f64, f64)> = Vec::with_capacity(3 * nb.len());
    for x in nb {
        let h = half_width(cm, x.dist, r);
        if h < 0.0 {
            continue;
        }
        if h >= PI {
            return true;
        }
        let p = ps.point(x.id as usize);
        let mid = (p[1] - center[1]).atan2(p[0] - center[0]);
        for shift in [-TAU, 0.0, TAU] {
            arcs.push((mid - h + shift, mid + h + shift));
        }
    }
    arcs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let w = ps.window();
    let mut covered = 0.0;
    for &(s, e) in &arcs {
        if e <= covered {
            continue;
        }
        if s > covered && !arc_outside(center, r, covered, s.min(TAU), w) {
            return false;
        }
        covered = covered.max(e);
        if covered >= TAU {
            return true;
        }
    }
    arc_outside(center, r, covered, TAU, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arc_of_thales_disk() {
        // α = 2: c ∈ W°(0, r u) iff the angle to c is below acos(s/r)
        let cm = CostModel::power(2.0).unwrap();
        let h = half_width(&cm, 1.0, 2.0);
        assert!((h - 0.5f64.acos()).abs() < 1e-8);
        assert!(half_width(&cm, 2.0, 2.0) < 0.0);
    }

    #[test]
    fn outside_test_on_unit_square() {
        let w = Window::cube(2, 0.0, 1.0).unwrap();
        // corner point: only the quarter arc pointing inward is inside
        let c = [0.0, 0.0];
        assert!(arc_outside(&c, 0.5, PI * 0.6, PI * 1.9, &w));
        assert!(!arc_outside(&c, 0.5, 0.1, 0.2, &w));
        assert!(arc_outside(&[0.5, 0.5], 2.0, 0.0, TAU, &w));
    }

    #[test]
    fn ring_of_neighbours_certifies() {
        let mut pts = vec![vec![5.0, 5.0]];
        for k in 0..12 {
            let t = TAU * k as f64 / 12.0;
            pts.push(vec![5.0 + t.cos(), 5.0 + t.sin()]);
        }
        pts.push(vec![8.0, 5.0]);
        let ps = PointSet::from_points(Window::cube(2, 0.0, 10.0).unwrap(), 1.0, 0, &pts).unwrap();
        let cm = CostModel::power(2.0).unwrap();
        let nb = ps.k_nearest(&[5.0, 5.0], 12, Some(0));
        assert!(certified(&ps, &cm, &[5.0, 5.0], &nb, 1.5));
        // a single neighbour leaves most directions open
        assert!(!certified(&ps, &cm, &[5.0, 5.0], &nb[..1], 1.5));
    }
}
