//! Seeded random streams and the Poisson count sampler.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream keyed by
//! `(seed, stream)`: the generator is seeded with `ChaCha8Rng::seed_from_u64(seed)`
//! and then switched to stream `stream` with `set_stream`. Replicate `r` of an
//! experiment with seed `s` uses key `(s, r)`, so results never depend on how
//! replicates are scheduled across workers.
//!
//! A Poisson window sample consumes the stream as follows:
//!
//! 1. the point count `N ~ Poisson(λ·vol)`: sequential inversion from zero when the
//!    mean is at most [`INVERSION_MAX_MEAN`], otherwise the PTRS transformed
//!    rejection sampler, with uniforms drawn as `f64` in `[0, 1)`;
//! 2. `N·d` further uniforms `u`, mapped to `lower[j] + u·(upper[j] − lower[j])`
//!    point by point, axis by axis.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Means up to this value are sampled by inversion.
pub const INVERSION_MAX_MEAN: f64 = 50.0;

/// The generator for substream key `(seed, stream)`.
pub fn substream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws a Poisson variate with the given mean.
pub fn poisson_count<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    assert!(mean >= 0.0 && mean.is_finite(), "poisson mean must be finite and non-negative");
    if mean == 0.0 {
        return 0;
    }
    if mean <= INVERSION_MAX_MEAN {
        poisson_inversion(rng, mean)
    } else {
        poisson_ptrs(rng, mean)
    }
}

fn poisson_inversion<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    let u: f64 = rng.random();
    let mut k = 0u64;
    let mut p = (-mean).exp();
    let mut cdf = p;
    // The cdf can saturate just below 1 in floating point; stop once the
    // probability mass underflows.
    while u > cdf && p > 0.0 {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
    }
    k
}

// Hörmann's PTRS (transformed rejection with squeeze), valid for mean >= 10.
fn poisson_ptrs<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    let slam = mean.sqrt();
    let loglam = mean.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -mean + k * loglam - ln_factorial(k as u64);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

/// `ln(k!)`, exact table below 10 and a Stirling series above.
pub(crate) fn ln_factorial(k: u64) -> f64 {
    const TABLE: [f64; 10] = [
        0.0,
        0.0,
        std::f64::consts::LN_2,
        1.791_759_469_228_055,
        3.178_053_830_347_146,
        4.787_491_742_782_046,
        6.579_251_212_010_101,
        8.525_161_361_065_415,
        10.604_602_902_745_25,
        12.801_827_480_081_469,
    ];
    if k < 10 {
        return TABLE[k as usize];
    }
    let x = k as f64 + 1.0;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // ln Γ(x) asymptotic series
    let series = inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)));
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + series
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_factorial_matches_direct_sum() {
        for k in 0..200u64 {
            let direct: f64 = (2..=k).map(|i| (i as f64).ln()).sum();
            assert!((ln_factorial(k) - direct).abs() < 1e-10 * direct.max(1.0), "k = {k}");
        }
    }

    #[test]
    fn streams_differ_and_repeat() {
        let a: Vec<u64> = (0..4).map(|_| substream_rng(7, 0).random()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let x: u64 = substream_rng(7, 0).random();
        let y: u64 = substream_rng(7, 1).random();
        assert_ne!(x, y);
    }

    #[test]
    fn poisson_moments_both_regimes() {
        for &mean in &[0.5, 3.0, 49.0, 51.0, 400.0] {
            let mut rng = substream_rng(11, 3);
            let reps = 20_000;
            let draws: Vec<f64> = (0..reps).map(|_| poisson_count(&mut rng, mean) as f64).collect();
            let m = draws.iter().sum::<f64>() / reps as f64;
            let v = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (reps - 1) as f64;
            let se_mean = (mean / reps as f64).sqrt();
            assert!((m - mean).abs() < 5.0 * se_mean, "mean {m} vs {mean}");
            // var of the sample variance for Poisson ≈ (μ + 2μ²)/n
            let se_var = ((mean + 2.0 * mean * mean) / reps as f64).sqrt();
            assert!((v - mean).abs() < 5.0 * se_var, "var {v} vs {mean}");
        }
    }
}
