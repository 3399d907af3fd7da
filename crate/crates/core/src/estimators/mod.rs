//! Seeded Monte Carlo estimators: the time constant, the fluctuation and
//! wandering exponents, shape and isotropy, concentration, superadditivity,
//! box paths and directional-tree diagnostics.
//!
//! Every replicate draws its own window from the substream
//! `(tag << 48) | (index << 32) | replicate` of the regime seed, so results do
//! not depend on how replicates are scheduled.

mod boxpath;
mod line;
mod shape;
mod trees;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costmodel::CostModel;
use crate::error::{invalid, Error, Result};
use crate::geodesic::{windowed_passage_time, AuditLevel, EndpointMode, WindowPolicy, WindowedPassage, WindowedQuery, DEFAULT_NEIGHBORS};
use crate::stats::{loglog_fit, mean, ols, quantile, variance, Aggregate, LogLogFit, BOOTSTRAP_RESAMPLES};

pub use boxpath::{boxpath_stats, default_box_size, BoxPathStats};
pub use line::{line_passage_cost, line_passage_time, line_sample};
pub use shape::{shape_check, shape_replicate, ShapeReport};
pub use trees::{directional_replicate, DirectionalOutcome, DirectionalSetup};

/// Largest tolerated fraction of untrusted paths at any length.
pub const MAX_UNTRUSTED_FRACTION: f64 = 0.05;

/// Stream tags, one per kind of experiment.
pub mod tags {
    pub const PASSAGE: u64 = 1;
    pub const ISOTROPY: u64 = 2;
    pub const SHAPE: u64 = 3;
    pub const DIRECTIONAL: u64 = 4;
    pub const CONCENTRATION: u64 = 5;
    pub const SAMPLE: u64 = 6;
    pub const TREE: u64 = 7;
    pub const MSF: u64 = 8;
    pub const GEODESIC: u64 = 9;
}

pub fn replicate_stream(tag: u64, index: usize, replicate: usize) -> u64 {
    (tag << 48) | ((index as u64) << 32) | replicate as u64
}

/// Parameters shared by all experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub dim: usize,
    pub cost: CostModel,
    pub density: f64,
    pub seed: u64,
    pub replicates: usize,
    pub mode: EndpointMode,
    pub policy: WindowPolicy,
    pub neighbors: usize,
    pub audit: AuditLevel,
}

impl Regime {
    /// Particle endpoints, default policy and budget. The doubling audit is
    /// switched off where neighbour lists are certified (the plane with a pure
    /// power cost) and on elsewhere.
    pub fn new(dim: usize, cost: CostModel, density: f64, seed: u64, replicates: usize) -> Result<Self> {
        if dim == 0 {
            return invalid("dimension must be at least 1");
        }
        if !(density > 0.0 && density.is_finite()) {
            return invalid(format!("density must be positive, got {density}"));
        }
        if replicates == 0 {
            return invalid("replicates must be positive");
        }
        let certified = dim == 2 && cost.truncation().is_none();
        Ok(Regime {
            dim,
            cost,
            density,
            seed,
            replicates,
            mode: EndpointMode::Particle,
            policy: WindowPolicy::default(),
            neighbors: DEFAULT_NEIGHBORS,
            audit: if certified { AuditLevel::None } else { AuditLevel::Doubling },
        })
    }

    pub fn spacing(&self) -> f64 {
        self.density.powf(-1.0 / self.dim as f64)
    }

    pub fn axis(&self, j: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.dim];
        e[j] = 1.0;
        e
    }

    /// Windowed passage from `x` to `y` on the given substream.
    pub fn passage(&self, x: &[f64], y: &[f64], stream: u64) -> Result<WindowedPassage> {
        windowed_passage_time(&WindowedQuery {
            cm: self.cost,
            density: self.density,
            x,
            y,
            seed: self.seed,
            stream,
            mode: self.mode,
            policy: self.policy,
            k: self.neighbors,
            audit: self.audit,
        })
    }
}

fn check_grid(lengths: &[f64]) -> Result<()> {
    if lengths.is_empty() {
        return invalid("length grid is empty");
    }
    if lengths.iter().any(|l| !(*l > 0.0 && l.is_finite())) || lengths.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("length grid must be positive and strictly increasing");
    }
    Ok(())
}

/// One passage replicate from the origin to `ℓ·e₁`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassageOutcome {
    pub length: f64,
    pub index: usize,
    pub replicate: usize,
    pub stream: u64,
    pub cost: f64,
    pub hops: usize,
    /// Largest distance of a path vertex from the segment `[0, ℓ·e₁]`.
    pub d_max: f64,
    pub trusted: bool,
    pub regrowths: u32,
    pub particles: usize,
}

/// One replicate, with its window and path. On the line there is no window;
/// see [`line_passage_replicate`].
pub fn passage_replicate(reg: &Regime, length: f64, index: usize, replicate: usize) -> Result<(PassageOutcome, WindowedPassage)> {
    if reg.dim == 1 {
        return invalid("windows need two or more dimensions; use the line sampler");
    }
    let x = vec![0.0; reg.dim];
    let y: Vec<f64> = reg.axis(0).iter().map(|e| e * length).collect();
    let stream = replicate_stream(tags::PASSAGE, index, replicate);
    let w = reg.passage(&x, &y, stream)?;
    let out = PassageOutcome {
        length,
        index,
        replicate,
        stream,
        cost: w.path.cost,
        hops: w.path.hops(),
        d_max: w.path.max_deviation(&x, &y),
        trusted: w.path.trusted,
        regrowths: w.regrowths,
        particles: w.particles,
    };
    Ok((out, w))
}

/// One replicate on the line: every path vertex lies on the segment and the
/// path is always trusted.
pub fn line_passage_replicate(reg: &Regime, length: f64, index: usize, replicate: usize) -> Result<PassageOutcome> {
    let stream = replicate_stream(tags::PASSAGE, index, replicate);
    let (cost, hops) = line_passage_time(&reg.cost, reg.density, length, reg.seed, stream)?;
    Ok(PassageOutcome { length, index, replicate, stream, cost, hops, d_max: 0.0, trusted: true, regrowths: 0, particles: hops + 1 })
}

/// Scalar outcome of one replicate in any dimension.
pub fn passage_outcome(reg: &Regime, length: f64, index: usize, replicate: usize) -> Result<PassageOutcome> {
    if reg.dim == 1 {
        line_passage_replicate(reg, length, index, replicate)
    } else {
        passage_replicate(reg, length, index, replicate).map(|o| o.0)
    }
}

/// All replicates over a grid, grouped by length, in replicate order.
pub fn passage_outcomes(reg: &Regime, lengths: &[f64]) -> Result<Vec<Vec<PassageOutcome>>> {
    check_grid(lengths)?;
    let jobs: Vec<(usize, usize)> = (0..lengths.len()).flat_map(|i| (0..reg.replicates).map(move |r| (i, r))).collect();
    let flat: Vec<PassageOutcome> =
        jobs.par_iter().map(|&(i, r)| passage_outcome(reg, lengths[i], i, r)).collect::<Result<_>>()?;
    let mut grouped = vec![Vec::with_capacity(reg.replicates); lengths.len()];
    for o in flat {
        grouped[o.index].push(o);
    }
    Ok(grouped)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    /// Mean of `T_ℓ/ℓ`.
    TimePerLength,
    /// Variance of `T_ℓ`.
    PassageVariance,
    /// Mean of `d_max`.
    MeanDeviation,
}

impl Statistic {
    fn sample(self, o: &PassageOutcome) -> f64 {
        match self {
            Statistic::TimePerLength => o.cost / o.length,
            Statistic::PassageVariance => o.cost,
            Statistic::MeanDeviation => o.d_max,
        }
    }

    fn of_aggregate(self, a: &Aggregate) -> f64 {
        match self {
            Statistic::PassageVariance => a.variance(),
            _ => a.mean,
        }
    }

    fn of_samples(self, xs: &[f64]) -> f64 {
        match self {
            Statistic::PassageVariance => variance(xs),
            _ => mean(xs),
        }
    }
}

/// Per-length samples of a statistic with a log-log fit against `ℓ`. Only
/// trusted paths contribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingEstimate {
    pub statistic: Statistic,
    pub lengths: Vec<f64>,
    pub samples: Vec<Vec<f64>>,
    pub aggregates: Vec<Aggregate>,
    pub untrusted: Vec<usize>,
    /// `None` for a single-length grid.
    pub fit: Option<LogLogFit>,
    pub replicates: usize,
    pub seed: u64,
}

impl ScalingEstimate {
    /// Fails with a window-policy error when more than 5% of paths at some
    /// length are untrusted.
    pub fn from_outcomes(statistic: Statistic, lengths: &[f64], outcomes: &[Vec<PassageOutcome>], replicates: usize, seed: u64) -> Result<Self> {
        check_grid(lengths)?;
        if outcomes.len() != lengths.len() {
            return invalid("one outcome group per length");
        }
        let mut samples = Vec::with_capacity(lengths.len());
        let mut untrusted = Vec::with_capacity(lengths.len());
        for (l, group) in lengths.iter().zip(outcomes) {
            let bad = group.iter().filter(|o| !o.trusted).count();
            if bad as f64 > MAX_UNTRUSTED_FRACTION * group.len() as f64 {
                return Err(Error::WindowPolicy(format!("{bad} of {} paths at length {l} are untrusted", group.len())));
            }
            untrusted.push(bad);
            samples.push(group.iter().filter(|o| o.trusted).map(|o| statistic.sample(o)).collect::<Vec<f64>>());
        }
        let aggregates = samples.iter().map(|s| Aggregate::from_slice(s)).collect();
        let fit = if lengths.len() >= 2 { Some(loglog_fit(lengths, &samples, |s| statistic.of_samples(s), seed)?) } else { None };
        Ok(ScalingEstimate { statistic, lengths: lengths.to_vec(), samples, aggregates, untrusted, fit, replicates, seed })
    }

    /// Per-length value of the statistic from the stored aggregates.
    pub fn values(&self) -> Vec<f64> {
        self.aggregates.iter().map(|a| self.statistic.of_aggregate(a)).collect()
    }

    /// Slope and intercept recomputed from the aggregates alone.
    pub fn refit(&self) -> Result<(f64, f64)> {
        let lx: Vec<f64> = self.lengths.iter().map(|l| l.ln()).collect();
        let ly: Vec<f64> = self.values().iter().map(|v| v.ln()).collect();
        ols(&lx, &ly)
    }

    fn fit(&self) -> Result<&LogLogFit> {
        self.fit.as_ref().ok_or_else(|| Error::Regression("a slope needs at least two lengths".into()))
    }
}

fn check_replicates(reg: &Regime, min: usize) -> Result<()> {
    if reg.replicates < min {
        return invalid(format!("need at least {min} replicates, got {}", reg.replicates));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuEstimate {
    pub scaling: ScalingEstimate,
    /// Mean of `T_ℓ/ℓ` at the largest length.
    pub mu: f64,
    pub std_err: f64,
    /// Pairs of consecutive lengths where the mean of `T_ℓ/ℓ` rises by more
    /// than two combined standard errors.
    pub monotonicity_breaks: Vec<(f64, f64)>,
}

impl MuEstimate {
    pub fn from_outcomes(reg: &Regime, lengths: &[f64], outcomes: &[Vec<PassageOutcome>]) -> Result<Self> {
        let scaling = ScalingEstimate::from_outcomes(Statistic::TimePerLength, lengths, outcomes, reg.replicates, reg.seed)?;
        let last = scaling.aggregates.last().expect("nonempty grid");
        let breaks = scaling
            .aggregates
            .windows(2)
            .zip(scaling.lengths.windows(2))
            .filter(|(a, _)| a[1].mean > a[0].mean + 2.0 * a[0].std_err().hypot(a[1].std_err()))
            .map(|(_, l)| (l[0], l[1]))
            .collect();
        Ok(MuEstimate { mu: last.mean, std_err: last.std_err(), scaling, monotonicity_breaks: breaks })
    }

    pub fn monotone(&self) -> bool {
        self.monotonicity_breaks.is_empty()
    }

    pub fn relative_std_err(&self) -> f64 {
        self.std_err / self.mu
    }
}

/// Time constant from `T_ℓ/ℓ` over a length grid; needs 30 replicates.
pub fn estimate_mu(reg: &Regime, lengths: &[f64]) -> Result<MuEstimate> {
    check_replicates(reg, 30)?;
    MuEstimate::from_outcomes(reg, lengths, &passage_outcomes(reg, lengths)?)
}

/// A log-log slope with the bound it is compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentEstimate {
    pub scaling: ScalingEstimate,
    pub slope: f64,
    pub ci: (f64, f64),
    pub bound: f64,
    /// The lower end of the interval does not exceed the bound.
    pub consistent_with_bound: bool,
}

impl ExponentEstimate {
    fn new(scaling: ScalingEstimate, bound: f64) -> Result<Self> {
        let fit = scaling.fit()?.clone();
        Ok(ExponentEstimate { slope: fit.slope, ci: fit.ci, bound, consistent_with_bound: fit.ci.0 <= bound, scaling })
    }

    /// Slope of `log Var T_ℓ`, compared with 1.
    pub fn variance_from_outcomes(reg: &Regime, lengths: &[f64], outcomes: &[Vec<PassageOutcome>]) -> Result<Self> {
        Self::new(ScalingEstimate::from_outcomes(Statistic::PassageVariance, lengths, outcomes, reg.replicates, reg.seed)?, 1.0)
    }

    /// Slope of `log E d_max`, compared with 3/4 plus 0.05.
    pub fn wandering_from_outcomes(reg: &Regime, lengths: &[f64], outcomes: &[Vec<PassageOutcome>]) -> Result<Self> {
        Self::new(ScalingEstimate::from_outcomes(Statistic::MeanDeviation, lengths, outcomes, reg.replicates, reg.seed)?, 0.8)
    }
}

fn check_slope_grid(lengths: &[f64]) -> Result<()> {
    check_grid(lengths)?;
    if lengths.len() < 2 {
        return Err(Error::Regression("a slope needs at least two lengths".into()));
    }
    Ok(())
}

/// Growth exponent of `Var T_ℓ` (twice the fluctuation exponent).
pub fn variance_scaling(reg: &Regime, lengths: &[f64]) -> Result<ExponentEstimate> {
    check_replicates(reg, 30)?;
    check_slope_grid(lengths)?;
    ExponentEstimate::variance_from_outcomes(reg, lengths, &passage_outcomes(reg, lengths)?)
}

/// Growth exponent of `E d_max` (the wandering exponent).
pub fn wandering_scaling(reg: &Regime, lengths: &[f64]) -> Result<ExponentEstimate> {
    check_replicates(reg, 30)?;
    check_slope_grid(lengths)?;
    ExponentEstimate::wandering_from_outcomes(reg, lengths, &passage_outcomes(reg, lengths)?)
}

/// Time-constant ratio between two densities against two predictions.
///
/// Mapping a density-`λ` configuration by `x ↦ λ^{1/d}x` gives a density-1
/// configuration and multiplies every cost by `λ^{α/d}` while stretching
/// distances by `λ^{1/d}`, so `μ(λ) = λ^{(1−α)/d}·μ(1)`. The ratio is also
/// compared with `λ^{−α/d}`, the rescaling of passage times alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityScaling {
    pub base: MuEstimate,
    pub scaled: MuEstimate,
    pub density: f64,
    pub ratio: f64,
    pub ratio_std_err: f64,
    pub time_rescaling: f64,
    pub length_and_time_rescaling: f64,
    pub z_time_rescaling: f64,
    pub z_length_and_time_rescaling: f64,
}

impl DensityScaling {
    pub fn from_estimates(base: MuEstimate, scaled: MuEstimate, density: f64, base_density: f64, alpha: f64, d: usize) -> Self {
        let rel = density / base_density;
        let ratio = scaled.mu / base.mu;
        let se = ratio * base.relative_std_err().hypot(scaled.relative_std_err());
        let time = rel.powf(-alpha / d as f64);
        let both = rel.powf((1.0 - alpha) / d as f64);
        DensityScaling {
            density,
            ratio,
            ratio_std_err: se,
            time_rescaling: time,
            length_and_time_rescaling: both,
            z_time_rescaling: (ratio - time) / se,
            z_length_and_time_rescaling: (ratio - both) / se,
            base,
            scaled,
        }
    }
}

pub fn density_scaling_check(reg: &Regime, lengths: &[f64], density: f64) -> Result<DensityScaling> {
    let base = estimate_mu(reg, lengths)?;
    let other = Regime { density, ..*reg };
    let scaled = estimate_mu(&other, lengths)?;
    Ok(DensityScaling::from_estimates(base, scaled, density, reg.density, reg.cost.alpha(), reg.dim))
}

/// Mean passage time from the origin to `ℓ·u` over equally spaced planar
/// directions `u` (first two axes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotropyReport {
    pub length: f64,
    pub angles: Vec<f64>,
    pub aggregates: Vec<Aggregate>,
    pub untrusted: usize,
    /// Largest pairwise gap in units of combined standard error.
    pub max_z: f64,
    pub within_three_std_errs: bool,
}

pub fn isotropy_replicate(reg: &Regime, length: f64, angle: f64, index: usize, replicate: usize) -> Result<WindowedPassage> {
    if reg.dim < 2 {
        return invalid("isotropy needs at least two dimensions");
    }
    let x = vec![0.0; reg.dim];
    let mut y = vec![0.0; reg.dim];
    y[0] = length * angle.cos();
    y[1] = length * angle.sin();
    reg.passage(&x, &y, replicate_stream(tags::ISOTROPY, index, replicate))
}

pub fn isotropy_check(reg: &Regime, length: f64, directions: usize) -> Result<IsotropyReport> {
    if directions < 2 || !(length > 0.0) {
        return invalid("isotropy needs two or more directions and a positive length");
    }
    let angles: Vec<f64> = (0..directions).map(|i| std::f64::consts::TAU * i as f64 / directions as f64).collect();
    let jobs: Vec<(usize, usize)> = (0..directions).flat_map(|i| (0..reg.replicates).map(move |r| (i, r))).collect();
    let runs: Vec<(usize, WindowedPassage)> =
        jobs.par_iter().map(|&(i, r)| isotropy_replicate(reg, length, angles[i], i, r).map(|w| (i, w))).collect::<Result<_>>()?;
    let mut aggregates = vec![Aggregate::default(); directions];
    let mut untrusted = 0;
    for (i, w) in &runs {
        if w.path.trusted {
            aggregates[*i].push(w.path.cost);
        } else {
            untrusted += 1;
        }
    }
    if untrusted as f64 > MAX_UNTRUSTED_FRACTION * runs.len() as f64 {
        return Err(Error::WindowPolicy(format!("{untrusted} of {} isotropy paths are untrusted", runs.len())));
    }
    Ok(IsotropyReport::new(length, angles, aggregates, untrusted))
}

impl IsotropyReport {
    pub fn new(length: f64, angles: Vec<f64>, aggregates: Vec<Aggregate>, untrusted: usize) -> Self {
        let mut max_z = 0.0f64;
        for i in 0..aggregates.len() {
            for j in i + 1..aggregates.len() {
                let (a, b) = (&aggregates[i], &aggregates[j]);
                max_z = max_z.max((a.mean - b.mean).abs() / a.std_err().hypot(b.std_err()));
            }
        }
        IsotropyReport { length, angles, aggregates, untrusted, max_z, within_three_std_errs: max_z <= 3.0 }
    }
}

/// Tail behaviour of `(T_ℓ − mean)/√ℓ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub length: f64,
    pub samples: usize,
    pub untrusted: usize,
    pub mean: f64,
    /// Mean of the standardized sample (zero up to rounding).
    pub standardized_mean: f64,
    /// `(x, fraction of |z| > x)`.
    pub survival: Vec<(f64, f64)>,
    /// `(p, p-quantile of |z|)`.
    pub quantiles: Vec<(f64, f64)>,
    /// Fitted `κ` in `P(|z| > x) ≈ exp(−c x^κ)`, with a bootstrap interval.
    pub fit_exponent: f64,
    pub fit_ci: (f64, f64),
    /// Proof exponents, recorded but not asserted: `min(1, d/α)` and
    /// `1/(4α + 3)`.
    pub kappa_one: f64,
    pub kappa_two: f64,
}

const SURVIVAL_POINTS: [f64; 6] = [0.5, 1.0, 1.5, 2.0, 3.0, 4.0];
const QUANTILE_LEVELS: [f64; 6] = [0.5, 0.75, 0.9, 0.95, 0.99, 0.999];
const FIT_LEVELS: [f64; 8] = [0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.98, 0.99];

/// Slope of `log(−log(1 − p))` against `log x_p` over fixed levels `p`.
fn tail_exponent(abs_sorted: &[f64]) -> Result<f64> {
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for p in FIT_LEVELS {
        let q = quantile(abs_sorted, p);
        if q > 0.0 {
            x.push(q.ln());
            y.push((-(1.0 - p).ln()).ln());
        }
    }
    ols(&x, &y).map(|(b, _)| b)
}

pub fn concentration_from_costs(length: f64, costs: &[f64], untrusted: usize, alpha: f64, d: usize, seed: u64) -> Result<ConcentrationReport> {
    use rand::Rng;
    if costs.len() < 2 {
        return invalid("concentration needs at least two samples");
    }
    let m = mean(costs);
    let z: Vec<f64> = costs.iter().map(|c| (c - m) / length.sqrt()).collect();
    let mut abs: Vec<f64> = z.iter().map(|v| v.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let n = abs.len() as f64;
    let survival = SURVIVAL_POINTS.iter().map(|&x| (x, abs.iter().filter(|&&a| a > x).count() as f64 / n)).collect();
    let quantiles = QUANTILE_LEVELS.iter().map(|&p| (p, quantile(&abs, p))).collect();
    let fit_exponent = tail_exponent(&abs)?;
    let mut rng = crate::pointcloud::substream_rng(seed, replicate_stream(tags::CONCENTRATION, 0, 0) | 0xFFFF);
    let mut boot = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut buf = vec![0.0; abs.len()];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for b in buf.iter_mut() {
            *b = abs[rng.random_range(0..abs.len())];
        }
        buf.sort_by(f64::total_cmp);
        if let Ok(k) = tail_exponent(&buf) {
            boot.push(k);
        }
    }
    boot.sort_by(f64::total_cmp);
    Ok(ConcentrationReport {
        length,
        samples: costs.len(),
        untrusted,
        mean: m,
        standardized_mean: mean(&z),
        survival,
        quantiles,
        fit_exponent,
        fit_ci: (quantile(&boot, 0.025), quantile(&boot, 0.975)),
        kappa_one: (d as f64 / alpha).min(1.0),
        kappa_two: 1.0 / (4.0 * alpha + 3.0),
    })
}

/// Needs 1000 replicates.
pub fn concentration_check(reg: &Regime, length: f64) -> Result<ConcentrationReport> {
    check_replicates(reg, 1000)?;
    let out = passage_outcomes(reg, &[length])?;
    let group = &out[0];
    let untrusted = group.iter().filter(|o| !o.trusted).count();
    if untrusted as f64 > MAX_UNTRUSTED_FRACTION * group.len() as f64 {
        return Err(Error::WindowPolicy(format!("{untrusted} of {} paths are untrusted", group.len())));
    }
    let costs: Vec<f64> = group.iter().filter(|o| o.trusted).map(|o| o.cost).collect();
    concentration_from_costs(length, &costs, untrusted, reg.cost.alpha(), reg.dim, reg.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperadditivityPair {
    pub length: f64,
    /// `ET_{2ℓ} − 2ET_ℓ` and its standard error.
    pub gap: f64,
    pub gap_std_err: f64,
    /// `gap ≤ 3` standard errors (the triangle inequality side).
    pub subadditive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperadditivityReport {
    pub mu: MuEstimate,
    pub pairs: Vec<SuperadditivityPair>,
    /// `(ℓ, ET_ℓ − μ̂ℓ, combined standard error)`.
    pub lower_bound_margins: Vec<(f64, f64, f64)>,
    /// `ET_ℓ ≥ μ̂ℓ − 2` combined standard errors at every length.
    pub lower_bound_holds: bool,
}

impl SuperadditivityReport {
    pub fn from_mu(mu: MuEstimate) -> Result<Self> {
        let s = &mu.scaling;
        let mean_t = |i: usize| s.aggregates[i].mean * s.lengths[i];
        let se_t = |i: usize| s.aggregates[i].std_err() * s.lengths[i];
        let mut pairs = Vec::new();
        for i in 0..s.lengths.len() {
            if let Some(j) = s.lengths.iter().position(|&l| l == 2.0 * s.lengths[i]) {
                let gap = mean_t(j) - 2.0 * mean_t(i);
                let se = se_t(j).hypot(2.0 * se_t(i));
                pairs.push(SuperadditivityPair { length: s.lengths[i], gap, gap_std_err: se, subadditive: gap <= 3.0 * se });
            }
        }
        if pairs.is_empty() {
            return invalid("grid holds no pair of lengths ℓ and 2ℓ");
        }
        let margins: Vec<(f64, f64, f64)> = (0..s.lengths.len())
            .map(|i| {
                let l = s.lengths[i];
                (l, mean_t(i) - mu.mu * l, se_t(i).hypot(mu.std_err * l))
            })
            .collect();
        let holds = margins.iter().all(|&(_, m, se)| m >= -2.0 * se);
        Ok(SuperadditivityReport { mu, pairs, lower_bound_margins: margins, lower_bound_holds: holds })
    }
}

pub fn superadditivity_check(reg: &Regime, lengths: &[f64]) -> Result<SuperadditivityReport> {
    SuperadditivityReport::from_mu(estimate_mu(reg, lengths)?)
}

#[cfg(test)]
mod tests;
