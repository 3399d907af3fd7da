//! Command-line and config-file settings, resolved into an [`ExperimentSpec`].

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, ValueEnum};
use efpp::geodesic::{WindowPolicy, DEFAULT_NEIGHBORS};
use efpp::{CostModel, EndpointMode};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Sample,
    Geodesic,
    #[serde(alias = "trees")]
    Tree,
    DirectionalTree,
    Msf,
    #[serde(alias = "mu")]
    #[value(alias = "mu")]
    EstimateMu,
    #[serde(alias = "chi")]
    #[value(alias = "chi")]
    EstimateChi,
    #[serde(alias = "xi")]
    #[value(alias = "xi")]
    EstimateXi,
    Shape,
    Concentration,
    #[serde(alias = "superadditivity")]
    #[value(alias = "superadditivity")]
    Superadd,
    Height,
    Straightness,
    Boxpath,
    #[serde(alias = "lens-properties")]
    #[value(alias = "lens-properties")]
    LensCheck,
    OracleSuite,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Sample => "sample",
            Kind::Geodesic => "geodesic",
            Kind::Tree => "tree",
            Kind::DirectionalTree => "directional-tree",
            Kind::Msf => "msf",
            Kind::EstimateMu => "estimate-mu",
            Kind::EstimateChi => "estimate-chi",
            Kind::EstimateXi => "estimate-xi",
            Kind::Shape => "shape",
            Kind::Concentration => "concentration",
            Kind::Superadd => "superadd",
            Kind::Height => "height",
            Kind::Straightness => "straightness",
            Kind::Boxpath => "boxpath",
            Kind::LensCheck => "lens-check",
            Kind::OracleSuite => "oracle-suite",
        }
    }

    /// Kinds driven by passage times from the origin along the first axis.
    pub fn is_passage(self) -> bool {
        matches!(self, Kind::EstimateMu | Kind::EstimateChi | Kind::EstimateXi | Kind::Concentration | Kind::Superadd)
    }

    fn default_replicates(self) -> usize {
        match self {
            Kind::EstimateMu | Kind::EstimateXi | Kind::Superadd => 200,
            Kind::EstimateChi => 400,
            Kind::Concentration => 1000,
            Kind::Shape | Kind::Height | Kind::DirectionalTree => 20,
            Kind::Straightness => 10,
            Kind::Boxpath => 50,
            Kind::Msf => 100,
            _ => 1,
        }
    }

    fn default_lengths(self) -> Vec<f64> {
        match self {
            Kind::EstimateMu | Kind::Superadd => vec![25.0, 50.0, 100.0, 200.0],
            Kind::EstimateChi | Kind::EstimateXi => vec![50.0, 100.0, 200.0, 400.0],
            Kind::Concentration => vec![100.0],
            Kind::Boxpath => vec![50.0, 100.0],
            _ => vec![50.0],
        }
    }

    fn default_side(self) -> f64 {
        match self {
            Kind::Msf => 3.0,
            Kind::Tree | Kind::Straightness => 60.0,
            _ => 20.0,
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Every tunable, all optional. Parsed from flags and from TOML config files
/// with the same kebab-case names.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    /// Experiment kind; only meaningful in config files.
    #[arg(skip)]
    pub kind: Option<Kind>,
    /// Dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Cost exponent.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Poisson density.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Finite truncation threshold of the cost.
    #[arg(long)]
    pub truncation: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Comma-separated length grid.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub lengths: Option<Vec<f64>>,
    /// Comma-separated passage-time levels for the shape fit.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub levels: Option<Vec<f64>>,
    /// Ball radii for the shape fit, used when no levels are given.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub radii: Option<Vec<f64>>,
    /// Time constant for the shape fit; estimated from the isotropy runs if absent.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Records file (JSON lines); summaries are written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Multiplier on replicate, instance and trial counts.
    #[arg(long)]
    pub budget: Option<f64>,
    /// TOML config file; flags override its values.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, env = "EFPP_WORKERS")]
    pub workers: Option<usize>,
    /// Endpoint convention: particle or exact.
    #[arg(long)]
    pub mode: Option<String>,
    /// Initial nearest-neighbour budget of the candidate graph.
    #[arg(long)]
    pub neighbors: Option<usize>,
    #[arg(long)]
    pub margin_spacings: Option<f64>,
    #[arg(long)]
    pub margin_exponent: Option<f64>,
    #[arg(long)]
    pub band_spacings: Option<f64>,
    #[arg(long)]
    pub band_exponent: Option<f64>,
    #[arg(long)]
    pub max_regrowths: Option<u32>,
    /// Oracle-suite instance count.
    #[arg(long)]
    pub instances: Option<usize>,
    /// Largest oracle-suite instance.
    #[arg(long)]
    pub max_points: Option<usize>,
    /// Comma-separated cost exponents for the oracle suite and lens check.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub alphas: Option<Vec<f64>>,
    /// Triples per exponent in the metric-axiom check.
    #[arg(long)]
    pub triples: Option<usize>,
    /// Geodesic pairs in the crossing check.
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Lens-check rounds per cost model.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub hull_radius: Option<f64>,
    /// Directional-tree core radius.
    #[arg(long)]
    pub core_radius: Option<f64>,
    /// Directional-tree target radius over core radius.
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Comma-separated direction of the directional tree.
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    pub direction: Option<Vec<f64>>,
    /// Number of isotropy directions.
    #[arg(long)]
    pub directions: Option<usize>,
    #[arg(long)]
    pub isotropy_length: Option<f64>,
    #[arg(long)]
    pub isotropy_replicates: Option<usize>,
    /// Straightness exponent slack.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Box size for box-path statistics.
    #[arg(long)]
    pub box_size: Option<f64>,
    /// Side of the sampled cube for sample, tree, msf and straightness.
    #[arg(long)]
    pub side: Option<f64>,
    /// Geodesic start point.
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    pub from: Option<Vec<f64>>,
    /// Geodesic end point.
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    pub to: Option<Vec<f64>>,
}

#[derive(Debug, Parser)]
#[command(name = "efpp", version, about = "Euclidean first-passage percolation experiments")]
pub struct Cli {
    #[arg(value_enum)]
    pub kind: Kind,
    #[command(flatten)]
    pub settings: Settings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UsageError {
    pub flag: String,
    pub message: String,
}

impl UsageError {
    fn new(flag: &str, message: impl Into<String>) -> Self {
        UsageError { flag: flag.to_string(), message: message.into() }
    }
}

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.flag, self.message)
    }
}

impl std::error::Error for UsageError {}

impl Settings {
    pub fn from_toml(text: &str) -> Result<Self, UsageError> {
        toml::from_str(text).map_err(|e| UsageError::new("--config", e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path).map_err(|e| UsageError::new("--config", format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Fields set in `self` win over those in `base`.
    pub fn over(&self, base: &Settings) -> Settings {
        let mut merged = serde_json::to_value(base).expect("settings serialize");
        let top = serde_json::to_value(self).expect("settings serialize");
        if let (Value::Object(m), Value::Object(t)) = (&mut merged, top) {
            for (k, v) in t {
                if !v.is_null() {
                    m.insert(k, v);
                }
            }
        }
        let mut out: Settings = serde_json::from_value(merged).expect("merged settings deserialize");
        out.config = self.config.clone().or_else(|| base.config.clone());
        out
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ExperimentSpec {
    pub kind: Kind,
    pub d: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub truncation: Option<f64>,
    pub seed: u64,
    pub replicates: usize,
    pub lengths: Vec<f64>,
    pub levels: Option<Vec<f64>>,
    pub radii: Vec<f64>,
    pub mu: Option<f64>,
    pub budget: f64,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub workers: Option<usize>,
    pub mode: EndpointMode,
    pub neighbors: usize,
    pub policy: WindowPolicy,
    pub instances: usize,
    pub max_points: usize,
    pub alphas: Vec<f64>,
    pub triples: usize,
    pub pairs: usize,
    pub trials: usize,
    pub hull_radius: f64,
    pub core_radius: f64,
    pub ratio: f64,
    pub direction: Vec<f64>,
    pub directions: usize,
    pub isotropy_length: f64,
    pub isotropy_replicates: usize,
    pub epsilon: f64,
    pub box_size: Option<f64>,
    pub side: f64,
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

fn scaled(n: usize, budget: f64) -> usize {
    ((n as f64 * budget).ceil() as usize).max(1)
}

fn positive(flag: &str, v: f64) -> Result<f64, UsageError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(UsageError::new(flag, format!("must be positive and finite, got {v}")))
    }
}

fn count(flag: &str, v: usize) -> Result<usize, UsageError> {
    if v == 0 {
        Err(UsageError::new(flag, "must be at least 1"))
    } else {
        Ok(v)
    }
}

fn grid(flag: &str, v: Vec<f64>) -> Result<Vec<f64>, UsageError> {
    if v.is_empty() {
        return Err(UsageError::new(flag, "grid is empty"));
    }
    if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) || v.windows(2).any(|w| w[0] >= w[1]) {
        return Err(UsageError::new(flag, format!("grid must be positive and strictly increasing, got {v:?}")));
    }
    Ok(v)
}

impl ExperimentSpec {
    /// Resolves settings for `kind`, checking that a config-file kind, if
    /// any, agrees.
    pub fn resolve(kind: Kind, s: &Settings) -> Result<Self, UsageError> {
        if let Some(k) = s.kind {
            if k != kind {
                return Err(UsageError::new("kind", format!("config file is for {k}, command is {kind}")));
            }
        }
        let mut warnings = Vec::new();
        let seed = s.seed.unwrap_or_else(|| {
            warnings.push("no --seed given; using 0".to_string());
            0
        });
        let budget = positive("--budget", s.budget.unwrap_or(1.0))?;
        let d = count("--d", s.d.unwrap_or(2))?;
        let needs_window = !kind.is_passage();
        if needs_window && d < 2 {
            return Err(UsageError::new("--d", format!("{kind} needs at least two dimensions")));
        }
        if kind == Kind::EstimateXi && d < 2 {
            return Err(UsageError::new("--d", "paths on the line do not wander"));
        }
        if matches!(kind, Kind::Shape | Kind::OracleSuite) && d != 2 {
            return Err(UsageError::new("--d", format!("{kind} runs in the plane only")));
        }
        let alpha = s.alpha.unwrap_or(2.0);
        let truncation = s.truncation;
        CostModel::new(alpha, truncation).map_err(|e| UsageError::new(if truncation.is_some() { "--truncation" } else { "--alpha" }, e.to_string()))?;
        let lambda = positive("--lambda", s.lambda.unwrap_or(1.0))?;
        let lengths = grid("--lengths", s.lengths.clone().unwrap_or_else(|| kind.default_lengths()))?;
        if matches!(kind, Kind::EstimateChi | Kind::EstimateXi) && lengths.len() < 2 {
            return Err(UsageError::new("--lengths", "a slope needs at least two lengths"));
        }
        if kind == Kind::Superadd && !lengths.iter().any(|l| lengths.contains(&(2.0 * l))) {
            return Err(UsageError::new("--lengths", "grid needs some pair ℓ and 2ℓ"));
        }
        let levels = s.levels.clone().map(|v| grid("--levels", v)).transpose()?;
        let radii = grid("--radii", s.radii.clone().unwrap_or_else(|| vec![20.0, 40.0, 80.0]))?;
        let mu = s.mu.map(|m| positive("--mu", m)).transpose()?;
        let mode = match s.mode.as_deref().unwrap_or("particle") {
            "particle" => EndpointMode::Particle,
            "exact" => EndpointMode::Exact,
            other => return Err(UsageError::new("--mode", format!("expected particle or exact, got {other}"))),
        };
        let mut policy = WindowPolicy::default();
        if let Some(v) = s.margin_spacings {
            policy.margin_spacings = positive("--margin-spacings", v)?;
        }
        if let Some(v) = s.margin_exponent {
            policy.margin_exponent = positive("--margin-exponent", v)?;
        }
        if let Some(v) = s.band_spacings {
            policy.band_spacings = positive("--band-spacings", v)?;
        }
        if let Some(v) = s.band_exponent {
            policy.band_exponent = positive("--band-exponent", v)?;
        }
        if let Some(v) = s.max_regrowths {
            policy.max_regrowths = v;
        }
        let max_points = s.max_points.unwrap_or(9);
        if !(3..=efpp::geodesic::BRUTE_FORCE_LIMIT).contains(&max_points) {
            return Err(UsageError::new("--max-points", format!("must lie in 3..={}", efpp::geodesic::BRUTE_FORCE_LIMIT)));
        }
        let alphas = s.alphas.clone().unwrap_or_else(|| vec![1.5, 2.0, 3.0]);
        if alphas.is_empty() || alphas.iter().any(|a| CostModel::power(*a).is_err()) {
            return Err(UsageError::new("--alphas", format!("every exponent must be finite and > 1, got {alphas:?}")));
        }
        let direction = s.direction.clone().unwrap_or_else(|| {
            let mut e = vec![0.0; d];
            e[0] = 1.0;
            e
        });
        if direction.len() != d || !(direction.iter().map(|x| x * x).sum::<f64>() > 0.0) {
            return Err(UsageError::new("--direction", format!("need a nonzero vector with {d} components")));
        }
        let side = positive("--side", s.side.unwrap_or(kind.default_side()))?;
        let from = s.from.clone().unwrap_or_else(|| vec![0.0; d]);
        let to = s.to.clone().unwrap_or_else(|| {
            let mut e = vec![0.0; d];
            e[0] = lengths[0];
            e
        });
        if from.len() != d {
            return Err(UsageError::new("--from", format!("need {d} components")));
        }
        if to.len() != d {
            return Err(UsageError::new("--to", format!("need {d} components")));
        }
        let directions = s.directions.unwrap_or(8);
        if directions < 2 {
            return Err(UsageError::new("--directions", "need at least two directions"));
        }
        let workers = s.workers.map(|w| count("--workers", w)).transpose()?;
        Ok(ExperimentSpec {
            kind,
            d,
            alpha,
            lambda,
            truncation,
            seed,
            replicates: scaled(count("--replicates", s.replicates.unwrap_or(kind.default_replicates()))?, budget),
            lengths,
            levels,
            radii,
            mu,
            budget,
            out: s.out.clone(),
            workers,
            mode,
            neighbors: count("--neighbors", s.neighbors.unwrap_or(DEFAULT_NEIGHBORS))?,
            policy,
            instances: scaled(count("--instances", s.instances.unwrap_or(500))?, budget),
            max_points,
            alphas,
            triples: scaled(count("--triples", s.triples.unwrap_or(1000))?, budget),
            pairs: scaled(count("--pairs", s.pairs.unwrap_or(1000))?, budget),
            trials: scaled(count("--trials", s.trials.unwrap_or(10_000))?, budget),
            hull_radius: positive("--hull-radius", s.hull_radius.unwrap_or(1.0))?,
            core_radius: positive("--core-radius", s.core_radius.unwrap_or(20.0))?,
            ratio: positive("--ratio", s.ratio.unwrap_or(efpp::forest::DIRECTIONAL_RATIO))?,
            direction,
            directions,
            isotropy_length: positive("--isotropy-length", s.isotropy_length.unwrap_or(50.0))?,
            isotropy_replicates: scaled(count("--isotropy-replicates", s.isotropy_replicates.unwrap_or(100))?, budget),
            epsilon: positive("--epsilon", s.epsilon.unwrap_or(0.01))?,
            box_size: s.box_size.map(|b| positive("--box-size", b)).transpose()?,
            side,
            from,
            to,
            warnings,
        })
    }

    /// Cost model of the experiment.
    pub fn cost(&self) -> CostModel {
        CostModel::new(self.alpha, self.truncation).expect("validated at resolution")
    }

    /// Experiment id carried by every record.
    pub fn id(&self) -> String {
        format!("{}/{}", self.kind, self.seed)
    }
}

/// Parses arguments (program name first) and the config file they name.
pub fn parse_cli<I, T>(argv: I) -> Result<ExperimentSpec, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(CliError::Clap)?;
    let settings = match &cli.settings.config {
        Some(path) => cli.settings.over(&Settings::load(path)?),
        None => cli.settings,
    };
    Ok(ExperimentSpec::resolve(cli.kind, &settings)?)
}

#[derive(Debug)]
pub enum CliError {
    /// Includes `--help` and `--version`, which are not failures.
    Clap(clap::Error),
    Usage(UsageError),
}

impl From<UsageError> for CliError {
    fn from(e: UsageError) -> Self {
        CliError::Usage(e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Clap(e) => write!(f, "{e}"),
            CliError::Usage(e) => write!(f, "usage error: {e}"),
        }
    }
}
