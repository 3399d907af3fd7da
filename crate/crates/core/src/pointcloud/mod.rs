//! Homogeneous Poisson point sets in rectangular windows, with a uniform-grid
//! spatial index.

mod grid;
mod io;
pub mod sampling;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
pub use grid::Grid;
pub use sampling::{poisson_count, substream_rng};

/// Axis-aligned box `[lower, upper]` in `d ≥ 2` dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Window {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return invalid("window corners have different dimensions");
        }
        if lower.len() < 2 {
            return invalid(format!("window dimension must be at least 2, got {}", lower.len()));
        }
        for j in 0..lower.len() {
            if !(lower[j].is_finite() && upper[j].is_finite() && upper[j] > lower[j]) {
                return invalid(format!("degenerate window along axis {j}: [{}, {}]", lower[j], upper[j]));
            }
        }
        let w = Window { lower, upper };
        if !(w.volume() > 0.0 && w.volume().is_finite()) {
            return invalid("window volume must be finite and positive");
        }
        Ok(w)
    }

    /// The cube `[lo, hi]^d`.
    pub fn cube(d: usize, lo: f64, hi: f64) -> Result<Self> {
        Window::new(vec![lo; d], vec![hi; d])
    }

    /// Bounding box of `points` inflated by `margin` on every side.
    pub fn around(points: &[&[f64]], margin: f64) -> Result<Self> {
        let Some(first) = points.first() else {
            return invalid("no points to bound");
        };
        let d = first.len();
        let mut lower = vec![f64::INFINITY; d];
        let mut upper = vec![f64::NEG_INFINITY; d];
        for p in points {
            for j in 0..d {
                lower[j] = lower[j].min(p[j]);
                upper[j] = upper[j].max(p[j]);
            }
        }
        Window::new(
            lower.iter().map(|v| v - margin).collect(),
            upper.iter().map(|v| v + margin).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    pub fn diameter(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| (u - l).powi(2)).sum::<f64>().sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(j, &v)| v >= self.lower[j] && v <= self.upper[j])
    }

    /// Distance from `x` to the window boundary (negative outside).
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(j, &v)| (v - self.lower[j]).min(self.upper[j] - v))
            .fold(f64::INFINITY, f64::min)
    }
}

/// A point of the index together with its distance to a query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub dist: f64,
    pub id: u32,
}

/// An immutable Poisson sample in a window.
#[derive(Debug, Clone)]
pub struct PointSet {
    coords: Vec<f64>,
    dim: usize,
    window: Window,
    density: f64,
    seed: u64,
    stream: u64,
    grid: Grid,
}

impl PointSet {
    /// Samples a homogeneous Poisson process of intensity `density` in `window`
    /// from substream `(seed, 0)`.
    pub fn sample(window: Window, density: f64, seed: u64) -> Result<Self> {
        Self::sample_substream(window, density, seed, 0)
    }

    /// Samples from substream `(seed, stream)`; see [`sampling`] for the exact
    /// pipeline.
    pub fn sample_substream(window: Window, density: f64, seed: u64, stream: u64) -> Result<Self> {
        if !(density > 0.0 && density.is_finite()) {
            return invalid(format!("density must be positive, got {density}"));
        }
        let mean = density * window.volume();
        if !mean.is_finite() {
            return invalid("expected point count is not finite");
        }
        let mut rng = substream_rng(seed, stream);
        let n = poisson_count(&mut rng, mean) as usize;
        let d = window.dim();
        let mut coords = Vec::with_capacity(n * d);
        for _ in 0..n {
            for j in 0..d {
                let u: f64 = rng.random();
                let lo = window.lower[j];
                let hi = window.upper[j];
                coords.push((lo + u * (hi - lo)).min(hi));
            }
        }
        Ok(Self::assemble(coords, window, density, seed, stream))
    }

    /// Wraps explicit coordinates (row-major, `d` per point).
    pub fn from_coords(window: Window, density: f64, seed: u64, coords: Vec<f64>) -> Result<Self> {
        if !(density > 0.0 && density.is_finite()) {
            return invalid(format!("density must be positive, got {density}"));
        }
        let d = window.dim();
        if coords.len() % d != 0 {
            return invalid("coordinate count is not a multiple of the dimension");
        }
        for (i, p) in coords.chunks(d).enumerate() {
            if !window.contains(p) {
                return invalid(format!("point {i} lies outside the window"));
            }
        }
        Ok(Self::assemble(coords, window, density, seed, 0))
    }

    pub fn from_points(window: Window, density: f64, seed: u64, points: &[Vec<f64>]) -> Result<Self> {
        let d = window.dim();
        if points.iter().any(|p| p.len() != d) {
            return invalid("point dimension does not match the window");
        }
        Self::from_coords(window, density, seed, points.concat())
    }

    fn assemble(coords: Vec<f64>, window: Window, density: f64, seed: u64, stream: u64) -> Self {
        let dim = window.dim();
        let cell = density.powf(-1.0 / dim as f64);
        let grid = Grid::build(&window, cell, &coords);
        PointSet { coords, dim, window, density, seed, stream, grid }
    }

    /// Applies `f` to every point and wraps the result in `window`
    /// (used for isometry checks).
    pub fn map_points(&self, window: Window, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let coords: Vec<f64> = self.iter().flat_map(|p| f(p)).collect();
        let mut ps = Self::from_coords(window, self.density, self.seed, coords)?;
        ps.stream = self.stream;
        Ok(ps)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn density(&self) -> f64 {
        self.density
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Mean inter-particle spacing `λ^{-1/d}`.
    pub fn spacing(&self) -> f64 {
        self.density.powf(-1.0 / self.dim as f64)
    }

    #[inline]
    pub fn point(&self, id: usize) -> &[f64] {
        &self.coords[id * self.dim..(id + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks(self.dim)
    }

    #[inline]
    pub fn dist_to(&self, id: usize, x: &[f64]) -> f64 {
        dist(self.point(id), x)
    }

    /// The particle closest to `x`; ties go to the smallest id.
    pub fn nearest(&self, x: &[f64]) -> Result<usize> {
        if self.is_empty() {
            return Err(Error::EmptyDomain);
        }
        self.check_query_dim(x)?;
        let mut best = (f64::INFINITY, u32::MAX);
        self.grid.expanding_search(
            x,
            0,
            &mut best,
            |best, id| {
                let d = self.dist_to(id as usize, x);
                if d < best.0 || (d == best.0 && id < best.1) {
                    *best = (d, id);
                }
            },
            |best, bound| best.0 < bound,
        );
        Ok(best.1 as usize)
    }

    /// Ids with `|p − center| ≤ r`, ascending.
    pub fn within(&self, center: &[f64], r: f64) -> Vec<usize> {
        if r < 0.0 || self.is_empty() {
            return Vec::new();
        }
        let mut out = Vec::new();
        let rho = (r / self.grid.cell_size()).ceil() as usize + 1;
        self.grid.expanding_search(
            center,
            rho,
            &mut out,
            |out, id| {
                if self.dist_to(id as usize, center) <= r {
                    out.push(id as usize);
                }
            },
            |_, _| true,
        );
        out.sort_unstable();
        out
    }

    /// Range query with explicit error reporting on the radius.
    pub fn range_query(&self, center: &[f64], r: f64) -> Result<Vec<usize>> {
        if !(r >= 0.0) {
            return invalid(format!("query radius must be non-negative, got {r}"));
        }
        self.check_query_dim(center)?;
        Ok(self.within(center, r))
    }

    /// All particles at distance at most the `k`-th nearest distance from `x`
    /// (so ties at the cutoff are all included), sorted by `(dist, id)`.
    /// `exclude` removes one id (the query particle itself). Returns every
    /// other particle when fewer than `k` exist.
    pub fn k_nearest(&self, x: &[f64], k: usize, exclude: Option<usize>) -> Vec<Neighbor> {
        let mut found: Vec<Neighbor> = Vec::with_capacity(4 * k + 8);
        if k == 0 || self.is_empty() {
            return found;
        }
        let vol_unit_ball = unit_ball_volume(self.dim);
        let r_guess = (k as f64 / (vol_unit_ball * self.density)).powf(1.0 / self.dim as f64);
        let rho0 = (r_guess / self.grid.cell_size()).ceil() as usize;
        let excl = exclude.map(|e| e as u32);
        self.grid.expanding_search(
            x,
            rho0,
            &mut found,
            |found, id| {
                if Some(id) != excl {
                    found.push(Neighbor { dist: self.dist_to(id as usize, x), id });
                }
            },
            |found, bound| {
                if found.len() < k {
                    return false;
                }
                let (_, nth, _) = found.select_nth_unstable_by(k - 1, cmp_neighbor);
                nth.dist < bound
            },
        );
        found.sort_unstable_by(cmp_neighbor);
        if found.len() > k {
            let cutoff = found[k - 1].dist;
            let keep = found.partition_point(|nb| nb.dist <= cutoff);
            found.truncate(keep);
        }
        found
    }

    /// ε-box occupancy: boxes are the cubes of side `eps` centred on `eps·ν`,
    /// `ν ∈ ℤ^d`, i.e. with vertices on `eps·(ℤ^d + ½)`.
    pub fn box_occupancy(&self, eps: f64) -> Result<BoxOccupancy> {
        if !(eps > 0.0 && eps.is_finite()) {
            return invalid(format!("box size must be positive, got {eps}"));
        }
        let lo: Vec<i64> = self.window.lower.iter().map(|&v| box_index(v, eps)).collect();
        let hi: Vec<i64> = self.window.upper.iter().map(|&v| box_index(v, eps)).collect();
        let mut counts = BTreeMap::new();
        for p in self.iter() {
            *counts.entry(p.iter().map(|&v| box_index(v, eps)).collect::<Vec<i64>>()).or_insert(0usize) += 1;
        }
        Ok(BoxOccupancy { eps, lo, hi, counts })
    }

    fn check_query_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return invalid(format!("query has dimension {}, point set has {}", x.len(), self.dim));
        }
        Ok(())
    }
}

fn cmp_neighbor(a: &Neighbor, b: &Neighbor) -> std::cmp::Ordering {
    a.dist.total_cmp(&b.dist).then(a.id.cmp(&b.id))
}

/// Index `ν` of the `eps`-box containing coordinate `v`.
#[inline]
pub fn box_index(v: f64, eps: f64) -> i64 {
    (v / eps + 0.5).floor() as i64
}

/// Occupancy of the `eps`-boxes covering a window.
#[derive(Debug, Clone)]
pub struct BoxOccupancy {
    pub eps: f64,
    /// Smallest box index per axis of the cover.
    pub lo: Vec<i64>,
    /// Largest box index per axis of the cover.
    pub hi: Vec<i64>,
    /// Particle counts of occupied boxes.
    pub counts: BTreeMap<Vec<i64>, usize>,
}

impl BoxOccupancy {
    pub fn count(&self, nu: &[i64]) -> usize {
        self.counts.get(nu).copied().unwrap_or(0)
    }

    pub fn occupied(&self, nu: &[i64]) -> bool {
        self.count(nu) > 0
    }

    /// Number of boxes in the window cover.
    pub fn cover_size(&self) -> usize {
        self.lo.iter().zip(&self.hi).map(|(l, h)| (h - l + 1) as usize).product()
    }

    pub fn occupied_count(&self) -> usize {
        self.counts.len()
    }
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn unit_ball_volume(d: usize) -> f64 {
    // V_d = π^{d/2} / Γ(d/2 + 1), by the two-step recursion V_d = 2π/d · V_{d−2}
    let mut v = if d % 2 == 0 { 1.0 } else { 2.0 };
    let mut k = if d % 2 == 0 { 2 } else { 3 };
    while k <= d {
        v *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    v
}
