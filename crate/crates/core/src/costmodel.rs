//! Link cost functions and lens geometry.
//!
//! The cost of a link of length `t` is `φ(t) = t^α`, or with a finite truncation
//! threshold `h`
//!
//! ```text
//! φ(t) = t^α                          t ≤ h
//!        h^α + α h^{α−1} (t − h)      t > h
//! ```
//!
//! The lens `W_φ(a, b) = {c : φ(|a−c|) + φ(|c−b|) ≤ φ(|a−b|)}` is the region where
//! an intermediate stop is no more expensive than the direct link. A link whose
//! lens interior holds a particle is strictly improvable and never lies on a
//! geodesic.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::pointcloud::{dist, substream_rng};

/// Relative slack applied to the lens inequality.
pub const LENS_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    alpha: f64,
    /// `None` selects the pure power `t^α`.
    truncation: Option<f64>,
}

impl CostModel {
    pub fn new(alpha: f64, truncation: Option<f64>) -> Result<Self> {
        if !(alpha > 1.0 && alpha.is_finite()) {
            return invalid(format!("alpha must be finite and > 1, got {alpha}"));
        }
        if let Some(h) = truncation {
            if !(h > 0.0) {
                return invalid(format!("truncation threshold must be positive, got {h}"));
            }
        }
        // An infinite threshold is the pure power.
        let truncation = truncation.filter(|h| h.is_finite());
        Ok(CostModel { alpha, truncation })
    }

    pub fn power(alpha: f64) -> Result<Self> {
        Self::new(alpha, None)
    }

    pub fn truncated(alpha: f64, h: f64) -> Result<Self> {
        Self::new(alpha, Some(h))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn truncation(&self) -> Option<f64> {
        self.truncation
    }

    /// The same exponent without truncation.
    pub fn untruncated(&self) -> CostModel {
        CostModel { alpha: self.alpha, truncation: None }
    }

    /// `φ(s)`; `s` must be non-negative.
    #[inline]
    pub fn phi(&self, s: f64) -> f64 {
        match self.truncation {
            Some(h) if s > h => {
                let ha1 = self.pow(h) / h;
                self.pow(h) + self.alpha * ha1 * (s - h)
            }
            _ => self.pow(s),
        }
    }

    #[inline]
    fn pow(&self, s: f64) -> f64 {
        if self.alpha == 2.0 {
            s * s
        } else if self.alpha == 3.0 {
            s * s * s
        } else {
            s.powf(self.alpha)
        }
    }

    pub fn link_cost(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return invalid(format!("link length must be non-negative, got {s}"));
        }
        Ok(self.phi(s))
    }

    /// Sum of link costs along a point sequence; zero for a single point.
    pub fn path_cost<P: AsRef<[f64]>>(&self, pts: &[P]) -> f64 {
        pts.windows(2).map(|w| self.phi(dist(w[0].as_ref(), w[1].as_ref()))).sum()
    }

    /// The `1/α` root of an additive cost.
    pub fn root(&self, cost: f64) -> f64 {
        cost.powf(1.0 / self.alpha)
    }
}

/// Interior test from precomputed link costs: `φ_ac + φ_cb < φ_ab·(1 − slack)`.
#[inline]
pub fn lens_interior_costs(phi_ab: f64, phi_ac: f64, phi_cb: f64) -> bool {
    phi_ac + phi_cb < phi_ab * (1.0 - LENS_SLACK)
}

/// Closed-lens test from precomputed link costs: `φ_ac + φ_cb ≤ φ_ab·(1 + slack)`.
#[inline]
pub fn lens_closed_costs(phi_ab: f64, phi_ac: f64, phi_cb: f64) -> bool {
    phi_ac + phi_cb <= phi_ab * (1.0 + LENS_SLACK)
}

/// Membership of `c` in `W_φ(a, b)` (or its interior when `strict`).
pub fn lens_contains(cm: &CostModel, a: &[f64], b: &[f64], c: &[f64], strict: bool) -> Result<bool> {
    let ab = dist(a, b);
    if ab == 0.0 {
        return invalid("lens endpoints coincide");
    }
    let (phi_ab, phi_ac, phi_cb) = (cm.phi(ab), cm.phi(dist(a, c)), cm.phi(dist(c, b)));
    Ok(if strict { lens_interior_costs(phi_ab, phi_ac, phi_cb) } else { lens_closed_costs(phi_ab, phi_ac, phi_cb) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn contains(&self, x: &[f64]) -> bool {
        dist(&self.center, x) <= self.radius
    }
}

/// A ball containing `W_φ(a, b)`: the lens lies in `B(a,|a−b|) ∩ B(b,|a−b|)`,
/// which is inside the ball of radius `√3/2·|a−b|` about the midpoint.
pub fn lens_bounding_ball(_cm: &CostModel, a: &[f64], b: &[f64]) -> Result<Ball> {
    let ab = dist(a, b);
    if ab == 0.0 {
        return invalid("lens endpoints coincide");
    }
    let center = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
    Ok(Ball { center, radius: 0.5 * 3f64.sqrt() * ab * (1.0 + 1e-12) })
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Angle in `[0, π]` between nonzero vectors.
pub fn angle(x: &[f64], y: &[f64]) -> Result<f64> {
    let (nx, ny) = (norm(x), norm(y));
    if nx == 0.0 || ny == 0.0 {
        return invalid("angle with a zero vector");
    }
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    Ok((dot / (nx * ny)).clamp(-1.0, 1.0).acos())
}

/// `y ∈ C(x, eps)`, the cone of half-angle `eps` around `x`. The apex `y = 0`
/// counts as inside.
pub fn cone_contains(x: &[f64], eps: f64, y: &[f64]) -> bool {
    if norm(y) == 0.0 {
        return true;
    }
    match angle(x, y) {
        Ok(theta) => theta <= eps,
        Err(_) => false,
    }
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab2: f64 = a.iter().zip(b).map(|(x, y)| (y - x) * (y - x)).sum();
    if ab2 == 0.0 {
        return dist(p, a);
    }
    let t: f64 = p.iter().zip(a).zip(b).map(|((p, a), b)| (p - a) * (b - a)).sum::<f64>() / ab2;
    let t = t.clamp(0.0, 1.0);
    p.iter()
        .zip(a)
        .zip(b)
        .map(|((p, a), b)| {
            let q = a + t * (b - a);
            (p - q) * (p - q)
        })
        .sum::<f64>()
        .sqrt()
}

/// The constant `C = min((α−1)/2α, 2^{−1/α} − ½, 2^{−1/α}(1+α)^{1/α} − 1)` for
/// which a slab of radius `C·min(ℓ, h)` through the lens midpoint is inside the lens.
pub fn hull_constant(alpha: f64) -> f64 {
    let inv = 2f64.powf(-1.0 / alpha);
    ((alpha - 1.0) / (2.0 * alpha)).min(inv - 0.5).min(inv * (1.0 + alpha).powf(1.0 / alpha) - 1.0)
}

/// The threshold `h₀ = max(8E, 4E/C)` above which the `E`-neighbourhood of the
/// middle half of `[a, b]` lies inside the lens.
pub fn hull_threshold(alpha: f64, e: f64) -> f64 {
    (8.0 * e).max(4.0 * e / hull_constant(alpha))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckCount {
    pub name: String,
    pub trials: usize,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LensViolation {
    pub check: String,
    pub witness: Vec<Vec<f64>>,
}

/// Outcome of [`lens_property_report`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LensReport {
    pub cost_model: CostModel,
    pub dim: usize,
    pub hull_radius: f64,
    pub checks: Vec<CheckCount>,
    pub violations: Vec<LensViolation>,
}

impl LensReport {
    pub fn total_violations(&self) -> usize {
        self.checks.iter().map(|c| c.violations).sum()
    }

    pub fn total_trials(&self) -> usize {
        self.checks.iter().map(|c| c.trials).sum()
    }
}

const MAX_WITNESSES: usize = 20;

struct Tally<'a> {
    checks: Vec<CheckCount>,
    violations: &'a mut Vec<LensViolation>,
}

impl Tally<'_> {
    fn record(&mut self, idx: usize, ok: bool, witness: impl FnOnce() -> Vec<Vec<f64>>) {
        let c = &mut self.checks[idx];
        c.trials += 1;
        if !ok {
            c.violations += 1;
            if self.violations.len() < MAX_WITNESSES {
                self.violations.push(LensViolation { check: c.name.clone(), witness: witness() });
            }
        }
    }
}

fn random_unit<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn random_in_ball<R: Rng>(rng: &mut R, ball: &Ball) -> Vec<f64> {
    let d = ball.center.len();
    let u = random_unit(rng, d);
    let r = ball.radius * rng.random::<f64>().powf(1.0 / d as f64);
    ball.center.iter().zip(&u).map(|(c, u)| c + r * u).collect()
}

fn random_lens_member<R: Rng>(rng: &mut R, cm: &CostModel, a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let ball = lens_bounding_ball(cm, a, b).ok()?;
    (0..10_000).map(|_| random_in_ball(rng, &ball)).find(|c| lens_contains(cm, a, b, c, false).unwrap_or(false))
}

fn axis_point(d: usize, l: f64) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[0] = l;
    v
}

/// Randomised verification of the lens properties in dimension `d`:
///
/// * convexity: convex combinations of two lens members are members;
/// * nesting and scaling of the pure-power lens along `ê₁`;
/// * `φ²(|a−c|) ≤ 2^{2α}(φ²(|a−b|) + φ²(|b−c|))`;
/// * `φ(|a−c|) − φ(|a−b|) − φ(|b−c|) ≤ 2^α h^α` (finite `h` only);
/// * the `E`-neighbourhood of the middle half of `[a, b]` lies in the lens once
///   `|a−b|` and `h` exceed [`hull_threshold`] (skipped when `h` is below it).
///
/// Each of the `trials` rounds runs every applicable check once.
pub fn lens_property_report(cm: &CostModel, d: usize, trials: usize, seed: u64, hull_radius: f64) -> Result<LensReport> {
    if trials == 0 {
        return invalid("lens report needs at least one trial");
    }
    if d < 2 {
        return invalid("dimension must be at least 2");
    }
    if !(hull_radius > 0.0) {
        return invalid("hull radius must be positive");
    }
    let alpha = cm.alpha();
    let pure = cm.untruncated();
    let h0 = hull_threshold(alpha, hull_radius);
    let hull_applicable = cm.truncation().is_none_or(|h| h > h0);
    // Spread link lengths across the truncation scale when there is one.
    let scale = cm.truncation().map_or(10.0, |h| 3.0 * h);
    let names = ["convexity", "nesting", "scaling", "phi-square", "phi-excess", "hull"];
    let mut violations = Vec::new();
    let mut tally = Tally {
        checks: names.iter().map(|n| CheckCount { name: n.to_string(), ..Default::default() }).collect(),
        violations: &mut violations,
    };
    let mut rng = substream_rng(seed, 0);
    for _ in 0..trials {
        // convexity of W_φ(a, b)
        let a: Vec<f64> = (0..d).map(|_| rng.random_range(-scale..scale)).collect();
        let len = rng.random_range(0.05..1.0) * scale;
        let b: Vec<f64> = a.iter().zip(random_unit(&mut rng, d)).map(|(x, u)| x + len * u).collect();
        if let (Some(c1), Some(c2)) = (random_lens_member(&mut rng, cm, &a, &b), random_lens_member(&mut rng, cm, &a, &b)) {
            let t: f64 = rng.random();
            let mix: Vec<f64> = c1.iter().zip(&c2).map(|(x, y)| t * x + (1.0 - t) * y).collect();
            let ok = lens_contains(cm, &a, &b, &mix, false)?;
            tally.record(0, ok, || vec![a.clone(), b.clone(), c1.clone(), c2.clone(), vec![t]]);
        }

        // W(0, ℓ'ê₁) ⊆ W(0, ℓê₁) for ℓ' < ℓ under the pure power
        let l = rng.random_range(0.5..20.0);
        let lp = l * rng.random::<f64>().max(1e-3);
        let origin = vec![0.0; d];
        if let Some(c) = random_lens_member(&mut rng, &pure, &origin, &axis_point(d, lp)) {
            let ok = lens_contains(&pure, &origin, &axis_point(d, l), &c, false)?;
            tally.record(1, ok, || vec![vec![lp, l], c.clone()]);
        }

        // c ∈ W(0, ê₁) ⇔ ℓc ∈ W(0, ℓê₁)
        let unit_ball = lens_bounding_ball(&pure, &origin, &axis_point(d, 1.0))?;
        let c = random_in_ball(&mut rng, &unit_ball);
        let scaled: Vec<f64> = c.iter().map(|x| l * x).collect();
        let ok = lens_contains(&pure, &origin, &axis_point(d, 1.0), &c, false)?
            == lens_contains(&pure, &origin, &axis_point(d, l), &scaled, false)?;
        tally.record(2, ok, || vec![vec![l], c.clone()]);

        // φ-inequalities on an arbitrary triple
        let pts: Vec<Vec<f64>> = (0..3).map(|_| (0..d).map(|_| rng.random_range(-scale..scale)).collect()).collect();
        let (ab, bc, ac) = (dist(&pts[0], &pts[1]), dist(&pts[1], &pts[2]), dist(&pts[0], &pts[2]));
        let (fab, fbc, fac) = (cm.phi(ab), cm.phi(bc), cm.phi(ac));
        let rhs = 2f64.powf(2.0 * alpha) * (fab * fab + fbc * fbc);
        tally.record(3, fac * fac <= rhs * (1.0 + LENS_SLACK), || pts.clone());
        if let Some(h) = cm.truncation() {
            let bound = 2f64.powf(alpha) * h.powf(alpha);
            tally.record(4, fac - fab - fbc <= bound * (1.0 + LENS_SLACK), || pts.clone());
        }

        // E-neighbourhood of the middle half inside the lens
        if hull_applicable {
            let len = h0 * rng.random_range(1.0001..10.0);
            let a: Vec<f64> = (0..d).map(|_| rng.random_range(-scale..scale)).collect();
            let b: Vec<f64> = a.iter().zip(random_unit(&mut rng, d)).map(|(x, u)| x + len * u).collect();
            let t = rng.random_range(0.25..=0.75);
            let p: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + t * (y - x)).collect();
            let c = random_in_ball(&mut rng, &Ball { center: p, radius: hull_radius });
            let ok = lens_contains(cm, &a, &b, &c, false)?;
            tally.record(5, ok, || vec![a.clone(), b.clone(), c.clone()]);
        }
    }
    let checks = tally.checks;
    Ok(LensReport { cost_model: *cm, dim: d, hull_radius, checks, violations })
}
