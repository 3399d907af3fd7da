use rand::Rng;

use crate::costmodel::CostModel;
use crate::error::{invalid, Result};
use crate::pointcloud::{poisson_count, substream_rng};

/// Spacings of slack on each side of `[0, ℓ]`.
const LINE_MARGIN: f64 = 20.0;

/// Sorted particles of a density-`λ` Poisson process on the line around
/// `[0, ℓ]`.
pub fn line_sample(density: f64, length: f64, seed: u64, stream: u64) -> Result<Vec<f64>> {
    if !(density > 0.0 && density.is_finite()) {
        return invalid(format!("density must be positive, got {density}"));
    }
    if !(length >= 0.0 && length.is_finite()) {
        return invalid(format!("length must be finite and non-negative, got {length}"));
    }
    let lo = -LINE_MARGIN / density;
    let hi = length + LINE_MARGIN / density;
    let mut rng = substream_rng(seed, stream);
    let n = poisson_count(&mut rng, density * (hi - lo)) as usize;
    let mut xs: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    xs.sort_by(f64::total_cmp);
    Ok(xs)
}

/// Passage time between the particles of `xs` (sorted) nearest `0` and `ℓ`,
/// with the number of links. For a pure power cost `φ` is superadditive, so
/// the geodesic visits every particle in between.
pub fn line_passage_cost(cm: &CostModel, xs: &[f64], length: f64) -> Result<(f64, usize)> {
    if cm.truncation().is_some() {
        return invalid("the line sampler needs an untruncated cost");
    }
    if xs.is_empty() {
        return Err(crate::error::Error::EmptyDomain);
    }
    // ties go to the smaller coordinate
    let nearest = |t: f64| {
        let i = xs.partition_point(|&x| x < t);
        match (i.checked_sub(1), xs.get(i)) {
            (Some(j), Some(&b)) if t - xs[j] <= b - t => j,
            (Some(j), None) => j,
            _ => i,
        }
    };
    let (a, b) = (nearest(0.0), nearest(length));
    let cost = xs[a.min(b)..=a.max(b)].windows(2).map(|w| cm.phi(w[1] - w[0])).sum();
    Ok((cost, a.abs_diff(b)))
}

pub fn line_passage_time(cm: &CostModel, density: f64, length: f64, seed: u64, stream: u64) -> Result<(f64, usize)> {
    line_passage_cost(cm, &line_sample(density, length, seed, stream)?, length)
}
