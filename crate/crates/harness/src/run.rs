//! Experiment orchestration: every replicate is an independent job run on a
//! worker pool, and aggregation reads the finished records in job order, so
//! results do not depend on the number of workers.

use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use efpp::costmodel::{hull_threshold, lens_property_report};
use efpp::estimators::{
    boxpath_stats, concentration_from_costs, default_box_size, directional_replicate, isotropy_replicate, line_passage_replicate,
    passage_replicate, replicate_stream, shape_replicate, tags, BoxPathStats, DirectionalOutcome, DirectionalSetup, ExponentEstimate,
    IsotropyReport, MuEstimate, PassageOutcome, Regime, ShapeReport, SuperadditivityReport, MAX_UNTRUSTED_FRACTION,
};
use efpp::forest::{euclidean_mst, msf_edge_criterion, straightness_audit, tree_from_graph, tree_stats, GeodesicTree};
use efpp::geodesic::{axiom_check, crossing_check, exhaustive_minimax, minimax_distance, no_doubling_back_audit, oracle_instance, BRUTE_FORCE_LIMIT};
use efpp::pointcloud::dist;
use efpp::stats::Aggregate;
use efpp::{CandidateGraph, CostModel, Error, PointSet, Window};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{ExperimentSpec, Kind};
use crate::record::{ReplicateRecord, Summary, Table};

/// Experiments abort when more than this share of jobs fail.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;
/// Mean parent stability required of directional trees.
pub const STABILITY_BAR: f64 = 0.95;
/// Relative standard error required of a time-constant estimate.
pub const MU_RELATIVE_ERROR: f64 = 0.02;
pub const CHI_SLOPE_BAR: f64 = 1.15;
pub const XI_SLOPE_BAR: f64 = 0.85;
pub const HEIGHT_MISMATCH: f64 = 1e-12;
/// Planar window sides for the axiom and crossing checks (about 400 and
/// 1000 particles).
const AXIOM_SIDE: f64 = 20.0;
const CROSSING_SIDE: f64 = 31.7;

type Task<'a> = Box<dyn Fn() -> efpp::Result<Value> + Send + Sync + 'a>;

struct Job<'a> {
    replicate: usize,
    index: usize,
    stream: Option<u64>,
    params: Value,
    task: Task<'a>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub spec: ExperimentSpec,
    pub records: Vec<ReplicateRecord>,
    pub summary: Summary,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("outputs serialize")
}

fn from_value<T: for<'de> Deserialize<'de>>(v: &Value) -> T {
    serde_json::from_value(v.clone()).expect("records hold what their jobs wrote")
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    match p.downcast::<String>() {
        Ok(s) => *s,
        Err(p) => p.downcast_ref::<&str>().map_or_else(|| "unknown panic".to_string(), |s| s.to_string()),
    }
}

fn run_jobs(spec: &ExperimentSpec, jobs: Vec<Job<'_>>) -> Vec<ReplicateRecord> {
    jobs.into_par_iter()
        .map(|job| {
            let result = catch_unwind(AssertUnwindSafe(|| (job.task)())).unwrap_or_else(|p| Err(Error::InvalidArgument(format!("panic: {}", panic_message(p)))));
            let (outputs, error) = match result {
                Ok(v) => (v, None),
                Err(e) => (Value::Null, Some(e.to_string())),
            };
            ReplicateRecord {
                experiment: spec.id(),
                kind: spec.kind,
                seed: spec.seed,
                replicate: job.replicate,
                index: job.index,
                stream: job.stream,
                params: job.params,
                trusted: outputs.get("trusted").and_then(Value::as_bool),
                outputs,
                error,
            }
        })
        .collect()
}

/// Shortest round-trip text, in exponent form for very small or large values.
pub fn fmt(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

/// Summary fields filled in by each kind.
struct Outcome {
    pass: Option<bool>,
    table: Table,
    metrics: Vec<(String, f64)>,
    details: Value,
}

impl Outcome {
    fn new(table: Table) -> Self {
        Outcome { pass: None, table, metrics: Vec::new(), details: Value::Null }
    }

    fn metric(&mut self, name: &str, v: f64) {
        self.metrics.push((name.to_string(), v));
    }
}

fn regime(spec: &ExperimentSpec) -> efpp::Result<Regime> {
    let mut reg = Regime::new(spec.d, spec.cost(), spec.lambda, spec.seed, spec.replicates)?;
    reg.mode = spec.mode;
    reg.policy = spec.policy;
    reg.neighbors = spec.neighbors;
    Ok(reg)
}

/// Runs every replicate of `spec` and aggregates the successful ones. Errors
/// only on an invalid regime or a worker pool that cannot start; replicate
/// failures are recorded.
pub fn run_experiment(spec: &ExperimentSpec) -> efpp::Result<RunOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let reg = regime(spec)?;
    pool.install(|| {
        let mut records = Vec::new();
        let mut warnings = spec.warnings.clone();
        let result = match spec.kind {
            k if k.is_passage() => passage_kind(spec, &reg, &mut records),
            Kind::Sample => sample_kind(spec, &mut records),
            Kind::Geodesic => geodesic_kind(spec, &reg, &mut records),
            Kind::Tree | Kind::Straightness => tree_kind(spec, &reg, &mut records),
            Kind::DirectionalTree | Kind::Height => directional_kind(spec, &reg, &mut records),
            Kind::Msf => msf_kind(spec, &mut records),
            Kind::Shape => shape_kind(spec, &reg, &mut records, &mut warnings),
            Kind::Boxpath => boxpath_kind(spec, &reg, &mut records),
            Kind::LensCheck => lens_kind(spec, &mut records),
            Kind::OracleSuite => oracle_kind(spec, &mut records),
            _ => unreachable!("passage kinds matched above"),
        };
        let failures = records.iter().filter(|r| !r.ok()).count();
        let mut summary = Summary {
            kind: spec.kind,
            experiment: spec.id(),
            seed: spec.seed,
            jobs: records.len(),
            failures,
            aborted: false,
            pass: None,
            error: None,
            table: Table::default(),
            metrics: Vec::new(),
            details: Value::Null,
            warnings,
        };
        match result {
            Ok(o) => {
                summary.pass = o.pass;
                summary.table = o.table;
                summary.metrics = o.metrics;
                summary.details = o.details;
            }
            Err(Stop::Aborted) => summary.aborted = true,
            Err(Stop::Failed(e)) => {
                summary.error = Some(e.to_string());
                if has_predicate(spec.kind) {
                    summary.pass = Some(false);
                }
            }
        }
        Ok(RunOutput { spec: spec.clone(), records, summary })
    })
}

pub fn has_predicate(kind: Kind) -> bool {
    matches!(
        kind,
        Kind::EstimateMu
            | Kind::EstimateChi
            | Kind::EstimateXi
            | Kind::Superadd
            | Kind::Shape
            | Kind::Boxpath
            | Kind::Height
            | Kind::DirectionalTree
            | Kind::LensCheck
            | Kind::Msf
            | Kind::OracleSuite
    )
}

enum Stop {
    Aborted,
    Failed(Error),
}

impl From<Error> for Stop {
    fn from(e: Error) -> Self {
        Stop::Failed(e)
    }
}

/// Runs a batch and appends its records; stops when too many failed.
fn batch<'a>(spec: &ExperimentSpec, jobs: Vec<Job<'a>>, records: &mut Vec<ReplicateRecord>) -> Result<std::ops::Range<usize>, Stop> {
    let start = records.len();
    let n = jobs.len();
    records.extend(run_jobs(spec, jobs));
    let failed = records[start..].iter().filter(|r| !r.ok()).count();
    if failed as f64 > MAX_FAILURE_FRACTION * n as f64 {
        return Err(Stop::Aborted);
    }
    Ok(start..records.len())
}

fn sidecar(spec: &ExperimentSpec, suffix: &str) -> Option<PathBuf> {
    spec.out.as_ref().map(|p| p.with_extension(suffix))
}

fn write_sidecar(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> efpp::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn passage_jobs<'a>(spec: &'a ExperimentSpec, reg: &'a Regime) -> Vec<Job<'a>> {
    let mut jobs = Vec::new();
    for (i, &length) in spec.lengths.iter().enumerate() {
        for r in 0..spec.replicates {
            jobs.push(Job {
                replicate: r,
                index: i,
                stream: Some(replicate_stream(tags::PASSAGE, i, r)),
                params: json!({ "length": length }),
                task: Box::new(move || {
                    if reg.dim == 1 {
                        let o = line_passage_replicate(reg, length, i, r)?;
                        let mut v = to_value(&o);
                        v["doubling_violations"] = json!(0);
                        return Ok(v);
                    }
                    let (o, w) = passage_replicate(reg, length, i, r)?;
                    let mut v = to_value(&o);
                    v["doubling_violations"] = json!(no_doubling_back_audit(&w.path).len());
                    Ok(v)
                }),
            });
        }
    }
    jobs
}

fn passage_kind(spec: &ExperimentSpec, reg: &Regime, records: &mut Vec<ReplicateRecord>) -> Result<Outcome, Stop> {
    let range = batch(spec, passage_jobs(spec, reg), records)?;
    let mut grouped: Vec<Vec<PassageOutcome>> = vec![Vec::new(); spec.lengths.len()];
    let mut doubling = 0u64;
    for rec in records[range].iter().filter(|r| r.ok()) {
        doubling += rec.outputs["doubling_violations"].as_u64().unwrap_or(0);
        grouped[rec.index].push(from_value(&rec.outputs));
    }
    let mut table = Table::new(&["length", "completed", "untrusted", "mean_time", "var_time", "mean_time_per_length", "se_time_per_length", "mean_d_max"]);
    for (l, g) in spec.lengths.iter().zip(&grouped) {
        let t: Vec<f64> = g.iter().filter(|o| o.trusted).map(|o| o.cost).collect();
        let dm: Vec<f64> = g.iter().filter(|o| o.trusted).map(|o| o.d_max).collect();
        let at = Aggregate::from_slice(&t);
        let per: Vec<f64> = t.iter().map(|c| c / l).collect();
        let ap = Aggregate::from_slice(&per);
        table.push(vec![
            fmt(*l),
            g.len().to_string(),
            g.iter().filter(|o| !o.trusted).count().to_string(),
            fmt(at.mean),
            fmt(at.variance()),
            fmt(ap.mean),
            fmt(ap.std_err()),
            fmt(Aggregate::from_slice(&dm).mean),
        ]);
    }
    let mut out = Outcome::new(table);
    out.metric("doubling_violations", doubling as f64);
    let lengths = &spec.lengths;
    match spec.kind {
        Kind::Concentration => {
            let mut reports = Vec::new();
            for (l, g) in lengths.iter().zip(&grouped) {
                let untrusted = g.iter().filter(|o| !o.trusted).count();
                if untrusted as f64 > MAX_UNTRUSTED_FRACTION * g.len() as f64 {
                    return Err(Error::WindowPolicy(format!("{untrusted} of {} paths at length {l} are untrusted", g.len())).into());
                }
                let costs: Vec<f64> = g.iter().filter(|o| o.trusted).map(|o| o.cost).collect();
                let rep = concentration_from_costs(*l, &costs, untrusted, spec.alpha, spec.d, spec.seed)?;
                out.metric(&format!("tail_exponent@{l}"), rep.fit_exponent);
                reports.push(rep);
            }
            out.details = json!({ "concentration": reports });
        }
        _ => {
            let mu = MuEstimate::from_outcomes(reg, lengths, &grouped)?;
            out.metric("mu", mu.mu);
            out.metric("mu_std_err", mu.std_err);
            out.metric("mu_monotone", mu.monotone() as u8 as f64);
            let mut details = json!({ "mu": mu });
            if lengths.len() >= 2 {
                let chi = ExponentEstimate::variance_from_outcomes(reg, lengths, &grouped)?;
                // paths on the line never leave the segment
                let xi = if spec.d >= 2 { Some(ExponentEstimate::wandering_from_outcomes(reg, lengths, &grouped)?) } else { None };
                for (name, e) in [("variance", Some(&chi)), ("wandering", xi.as_ref())] {
                    if let Some(e) = e {
                        out.metric(&format!("{name}_slope"), e.slope);
                        out.metric(&format!("{name}_ci_low"), e.ci.0);
                        out.metric(&format!("{name}_ci_high"), e.ci.1);
                    }
                }
                details["chi"] = to_value(&chi);
                details["xi"] = to_value(&xi);
                out.pass = match spec.kind {
                    Kind::EstimateChi => Some(chi.ci.1 <= CHI_SLOPE_BAR),
                    Kind::EstimateXi => Some(xi.as_ref().is_some_and(|x| x.ci.1 <= XI_SLOPE_BAR)),
                    _ => None,
                };
            }
            match spec.kind {
                Kind::EstimateMu => out.pass = Some(mu.monotone() && mu.relative_std_err() < MU_RELATIVE_ERROR),
                Kind::Superadd => {
                    let rep = SuperadditivityReport::from_mu(mu)?;
                    out.metric("lower_bound_holds", rep.lower_bound_holds as u8 as f64);
                    out.pass = Some(rep.lower_bound_holds && rep.pairs.iter().all(|p| p.subadditive));
                    details["superadditivity"] = to_value(&rep);
                }
                _ => {}
            }
            out.details = details;
        }
    }
    Ok(out)
}

fn cube_centered(d: usize, side: f64) -> efpp::Result<Window> {
    Window::cube(d, -side / 2.0, side / 2.0)
}

fn sample_kind(spec: &ExperimentSpec, records: &mut Vec<ReplicateRecord>) -> Result<Outcome, Stop> {
    let jobs = (0..spec.replicates)
        .map(|r| {
            let stream = replicate_stream(tags::SAMPLE, 0, r);
            Job {
                replicate: r,
                index: 0,
                stream: Some(stream),
                params: json!({ "side": spec.side }),
                task: Box::new(move || {
                    let w = Window::cube(spec.d, 0.0, spec.side)?;
                    let expected = spec.lambda * w.volume();
                    let ps = PointSet::sample_substream(w, spec.lambda, spec.seed, stream)?;
                    if let Some(path) = sidecar(spec, &format!("{r}.pointset")) {
                        write_sidecar(&path, |f| ps.write_text(f).map_err(std::io::Error::other))?;
                    }
                    Ok(json!({ "particles": ps.len(), "expected": expected }))
                }) as Task,
            }
        })
        .collect();
    let range = batch(spec, jobs, records)?;
    let counts: Vec<f64> = records[range].iter().filter(|r| r.ok()).map(|r| r.outputs["particles"].as_f64().unwrap_or(0.0)).collect();
    let a = Aggregate::from_slice(&counts);
    let expected = spec.lambda * spec.side.powi(spec.d as i32);
    let mut table = Table::new(&["replicates", "mean_particles", "expected", "variance"]);
    table.push(vec![counts.len().to_string(), fmt(a.mean), fmt(expected), fmt(a.variance())]);
    let mut out = Outcome::new(table);
    out.metric("mean_particles", a.mean);
    out.metric("expected", expected);
    Ok(out)
}

fn geodesic_kind(spec: &ExperimentSpec, reg: &Regime, records: &mut Vec<ReplicateRecord>) -> Result<Outcome, Stop> {
    let jobs = (0..spec.replicates)
        .map(|r| {
            let stream = replicate_stream(tags::GEODESIC, 0, r);
            Job {
                replicate: r,
                index: 0,
                stream: Some(stream),
                params: json!({ "from": spec.from, "to": spec.to }),
                task: Box::new(move || {
                    let w = reg.passage(&spec.from, &spec.to, stream)?;
                    Ok(json!({
                        "cost": w.path.cost,
                        "trusted": w.path.trusted,
                        "d_max": w.path.max_deviation(&spec.from, &spec.to),
                        "regrowths": w.regrowths,
                        "particles": w.particles,
                        "doubling_violations": no_doubling_back_audit(&w.path).len(),
                        "path": w.path,
                    }))
                }) as Task,
            }
        })
        .collect();
    let range = batch(spec, jobs, records)?;
    let ok: Vec<&ReplicateRecord> = records[range].iter().filter(|r| r.ok()).collect();
    let costs: Vec<f64> = ok.iter().map(|r| r.outputs["cost"].as_f64().unwrap_or(f64::NAN)).collect();
    let a = Aggregate::from_slice(&costs);
    let untrusted = ok.iter().filter(|r| r.trusted == Some(false)).count();
    let mut table = Table::new(&["replicates", "untrusted", "mean_cost", "se_cost"]);
    table.push(vec![ok.len().to_string(), untrusted.to_string(), fmt(a.mean), fmt(a.std_err())]);
    let mut out = Outcome::new(table);
    out.metric("mean_cost", a.mean);
    Ok(out)
}

/// Shortest-path tree from the particle nearest the centre of a sampled cube.
fn centred_tree(spec: &ExperimentSpec, reg: &Regime, stream: u64) -> efpp::Result<GeodesicTree> {
    let ps = PointSet::sample_substream(cube_centered(spec.d, spec.side)?, spec.lambda, spec.seed, stream)?;
    let root = ps.nearest(&vec![0.0; spec.d])?;
    let g = CandidateGraph::build(ps, reg.cost, reg.neighbors, reg.audit)?.with_policy(reg.policy);
    tree_from_graph(&g, root)
}

fn tree_kind(spec: &ExperimentSpec, reg: &Regime, records: &mut Vec<ReplicateRecord>) -> Result<Outcome, Stop> {
    let straight = spec.kind == Kind::Straightness;
    let jobs = (0..spec.replicates)
        .map(|r| {
            let stream = replicate_stream(tags::TREE, 0, r);
            Job {
                replicate: r,
                index: 0,
                stream: Some(stream),
                params: json!({ "side": spec.side, "epsilon": straight.then_some(spec.epsilon) }),
                task: Box::new(move || {
                    let t = centred_tree(spec, reg, stream)?;
                    if let Some(path) = sidecar(spec, &format!("{r}.tree.json")) {
                        write_sidecar(&path, |f| serde_json::to_writer(f, &t.record()).map_err(std::io::Error::other))?;
                    }
                    let mut v = json!({
                        "particles": t.len(),
                        "root": t.root(),
                        "reached": t.reached_ids().len(),
                        "covered": t.covered_ids().len(),
                        "stats": tree_stats(&t),
                    });
                    if straight {
                        let rep = straightness_audit(&t, spec.epsilon)?;
                        let far = rep.entries.iter().filter(|e| e.violated).map(|e| e.distance).fold(0.0, f64::max);
                        v["straightness"] = json!({
                            "entries": rep.entries.len(),
                            "violations": rep.violations_beyond(0.0),
                            "violations_beyond_eighth": rep.violations_beyond(spec.side / 8.0),
                            "violations_beyond_quarter": rep.violations_beyond(spec.side / 4.0),
                            "farthest_violation": far,
                        });
                    }
                    Ok(v)
                }) as Task,
            }
        })
        .collect();
    let range = batch(spec, jobs, records)?;
    let ok: Vec<&ReplicateRecord> = records[range].iter().filter(|r| r.ok()).collect();
    let mut table = Table::new(&["replicate", "particles", "covered", "max_degree", "max_depth", "straightness_violations"]);
    for r in &ok {
        let o = &r.outputs;
        table.push(vec![
            r.replicate.to_string(),
            o["particles"].to_string(),
            o["covered"].to_string(),
            o["stats"]["max_degree"].to_string(),
            o["stats"]["max_depth"].to_string(),
            o.get("straightness").map_or(String::new(), |s| s["violations"].to_string()),
        ]);
    }
    let mut out = Outcome::new(table);
    let max_degree = ok.iter().filter_map(|r| r.outputs["stats"]["max_degree"].as_f64()).fold(0.0, f64::max);
    out.metric("max_degree", max_degree);
    if straight {
        let v: f64 = ok.iter().filter_map(|r| r.outputs["straightness"]["violations_beyond_quarter"].as_f64()).sum();
        out.metric("violations_beyond_quarter", v);
    }
    Ok(out)
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn directional_kind(spec: &ExperimentSpec, reg: &Regime, records: &mut Vec<ReplicateRecord>) -> Result<Outcome, Stop> {
    let mut setup = DirectionalSetup::new(unit(&spec.direction), spec.core_radius);
    setup.ratio = spec.ratio;
    let setup = &setup;
    let jobs = (0..spec.replicates)
        .map(|r| Job {
            replicate: r,
            index: 0,
            stream: Some(replicate_stream(tags::DIRECTIONAL, 0, r)),
            params: json!({ "direction": setup.direction, "core_radius": setup.core_radius, "radius": setup.radius() }),
            task: Box::new(move || Ok(to_value(&directional_replicate(reg, setup, r)?))) as Task,
        })
        .collect();
    let range = batch(spec, jobs, records)?;
    let outs: Vec<DirectionalOutcome> = records[range].iter().filter(|r| r.ok()).map(|r| from_value(&r.outputs)).collect();
    let mut table = Table::new(&["replicate", "particles", "covered", "pairs", "coalesced", "height_mismatch", "recursion_checks", "recursion_violations", "stability"]);
    for o in &outs {
        table.push(vec![
            o.replicate.to_string(),
            o.particles.to_string(),
            o.covered.to_string(),
            o.pairs.to_string(),
            o.coalesced.to_string(),
            fmt(o.height_mismatch),
            (o.recursion.inequality_checks + o.recursion.parent_checks + o.recursion.exclusion_checks).to_string(),
            o.recursion.violations().to_string(),
            o.stability.map_or(String::new(), fmt),
        ]);
    }
    let stab: Vec<f64> = outs.iter().filter_map(|o| o.stability).collect();
    let mean_stability = Aggregate::from_slice(&stab).mean;
    let all_coalesce = outs.iter().all(|o| o.coalesced == o.pairs);
    let violations: usize = outs.iter().map(|o| o.recursion.violations()).sum();
    let mismatch = outs.iter().map(|o| o.height_mismatch).fold(0.0, f64::max);
    let mut out = Outcome::new(table);
    out.metric("mean_stability", mean_stability);
    out.metric("all_coalesce", all_coalesce as u8 as f64);
    out.metric("recursion_violations", violations as f64);
    out.metric("height_mismatch", mismatch);
    out.pass = Some(match spec.kind {
        Kind::Height => violations == 0 && mismatch <= HEIGHT_MISMATCH,
        _ => all_coalesce && !stab.is_empty() && mean_stability >= STABILITY_BAR,
    });
    Ok(out)
}

fn msf_kind(spec: &ExperimentSpec, records: &mut Vec<ReplicateRecord>) -> Result<Outcome, Stop> {
    let jobs = (0..spec.replicates)
        .map(|r| {
            let stream = replicate_stream(tags::MSF, 0, r);
            Job {
                replicate: r,
                index: 0,
                stream: Some(stream),
                params: json!({ "side": spec.side }),
                task: Box::new(move || {
                    let ps = PointSet::sample_substream(Window::cube(spec.d, 0.0, spec.side)?, spec.lambda, spec.seed, stream)?;
                    let n = ps.len();
                    let mst = euclidean_mst(&ps)?;
                    let mut lengths = Vec::new();
                    let (mut criterion, mut minimax, mut pairs) = (0usize, 0usize, 0usize);
                    let enumerate = n <= BRUTE_FORCE_LIMIT;
                    for a in 0..n {
                        for b in a + 1..n {
                            pairs += 1;
                            lengths.push(dist(ps.point(a), ps.point(b)));
                            let in_tree = mst.parent(a) == Some(b) || mst.parent(b) == Some(a);
                            if msf_edge_criterion(&ps, a, b)? != in_tree {
                                criterion += 1;
                            }
                            if enumerate {
                                let e = exhaustive_minimax(&ps, a, b)?;
                                if (minimax_distance(&ps, a, b)?.0 - e).abs() > 1e-12 * e {
                                    minimax += 1;
                                }
                            }
                        }
                    }
                    lengths.sort_by(f64::total_cmp);
                    Ok(json!({
                        "particles": n,
                        "pairs": pairs,
                        "distinct_lengths": lengths.windows(2).all(|w| w[0] < w[1]),
                        "criterion_mismatches": criterion,
                        "minimax_enumerated": enumerate,
                        "minimax_mismatches": minimax,
                    }))
                }) as Task,
            }
        })
        .collect();
    let range = batch(spec, jobs, records)?;
    let ok: Vec<&ReplicateRecord> = records[range].iter().filter(|r| r.ok()).collect();
    let sum = |k: &str| ok.iter().filter_map(|r| r.outputs[k].as_u64()).sum::<u64>();
    let enumerated = ok.iter().filter(|r| r.outputs["minimax_enumerated"] == json!(true)).count();
    let mut table = Table::new(&["replicates", "pairs", "criterion_mismatches", "enumerated_replicates", "minimax_mismatches"]);
    table.push(vec![ok.len().to_string(), sum("pairs").to_string(), sum("criterion_mismatches").to_string(), enumerated.to_string(), sum("minimax_mismatches").to_string()]);
    let mut out = Outcome::new(table);
    out.metric("criterion_mismatches", sum("criterion_mismatches") as f64);
    out.metric("minimax_mismatches", sum("minimax_mismatches") as f64);
    out.pass = Some(sum("criterion_mismatches") == 0 && sum("minimax_mismatches") == 0);
    Ok(out)
}

fn shape_kind(spec: &ExperimentSpec, reg: &Regime, records: &mut Vec<ReplicateRecord>, warnings: &mut Vec<String>) -> Result<Outcome, Stop> {
    let length = spec.isotropy_length;
    let angles: Vec<f64> = (0..spec.directions).map(|i| TAU * i as f64 / spec.directions as f64).collect();
    let mut jobs = Vec::new();
    for (i, &angle) in angles.iter().enumerate() {
        for r in 0..spec.isotropy_replicates {
            jobs.push(Job {
                replicate: r,
                index: i,
                stream: Some(replicate_stream(tags::ISOTROPY, i, r)),
                params: json!({ "phase": "isotropy", "length": length, "angle": angle }),
                task: Box::new(move || {
                    let w = isotropy_replicate(reg, length, angle, i, r)?;
                    Ok(json!({ "cost": w.path.cost, "trusted": w.path.trusted, "regrowths": w.regrowths, "particles": w.particles }))
                }) as Task,
            });
        }
    }
    let range = batch(spec, jobs, records)?;
    let mut aggregates = vec![Aggregate::default(); angles.len()];
    let mut untrusted = 0;
    let mut done = 0;
    for rec in records[range].iter().filter(|r| r.ok()) {
        done += 1;
        if rec.trusted == Some(true) {
            aggregates[rec.index].push(rec.outputs["cost"].as_f64().unwrap_or(f64::NAN));
        } else {
            untrusted += 1;
        }
    }
    if untrusted as f64 > MAX_UNTRUSTED_FRACTION * done as f64 {
        return Err(Error::WindowPolicy(format!("{untrusted} of {done} isotropy paths are untrusted")).into());
    }
    let iso = IsotropyReport::new(length, angles, aggregates, untrusted);
    let mu = match spec.mu {
        Some(m) => m,
        None => {
            let mut pooled = Aggregate::default();
            iso.aggregates.iter().for_each(|a| pooled.merge(a));
            warnings.push(format!("no --mu given; using the isotropy estimate {} at length {length}", pooled.mean / length));
            pooled.mean / length
        }
    };
    let levels: Vec<f64> = spec.levels.clone().unwrap_or_else(|| spec.radii.iter().map(|r| r * mu).collect());
    let levels = &levels;
    let jobs = (0..spec.replicates)
        .map(|r| Job {
            replicate: r,
            index: 0,
            stream: Some(replicate_stream(tags::SHAPE, 0, r)),
            params: json!({ "phase": "shape", "mu": mu, "levels": levels }),
            task: Box::new(move || {
                let (eps, inside) = shape_replicate(reg, mu, levels, r)?;
                Ok(json!({ "eps": eps, "origin_inside": inside }))
            }) as Task,
        })
        .collect();
    let range = batch(spec, jobs, records)?;
    let ok: Vec<&ReplicateRecord> = records[range].iter().filter(|r| r.ok()).collect();
    let eps: Vec<Vec<f64>> = (0..levels.len()).map(|i| ok.iter().map(|r| r.outputs["eps"][i].as_f64().unwrap_or(f64::NAN)).collect()).collect();
    let inside = ok.iter().all(|r| r.outputs["origin_inside"] == json!(true));
    let shape = ShapeReport::new(mu, levels, eps, inside);

    let mut table = Table::new(&["part", "key", "mean", "std_err", "count"]);
    for (a, angle) in iso.aggregates.iter().zip(&iso.angles) {
        table.push(vec!["isotropy".into(), fmt(*angle), fmt(a.mean), fmt(a.std_err()), a.count.to_string()]);
    }
    for (a, s) in shape.aggregates.iter().zip(&shape.s) {
        table.push(vec!["shape".into(), fmt(*s), fmt(a.mean), fmt(a.std_err()), a.count.to_string()]);
    }
    let mut out = Outcome::new(table);
    out.metric("mu", mu);
    out.metric("isotropy_max_z", iso.max_z);
    out.metric("shape_non_increasing", shape.non_increasing as u8 as f64);
    out.pass = Some(shape.non_increasing && iso.within_three_std_errs);
    out.details = json!({ "isotropy": iso, "shape": shape });
    Ok(out)
}

fn boxpath_kind(spec: &ExperimentSpec, reg: &Regime, records: &mut Vec<ReplicateRecord>) -> Result<Outcome, Stop> {
    let eps = spec.box_size.unwrap_or_else(|| default_box_size(spec.lambda, spec.d));
    let mut jobs = Vec::new();
    for (i, &length) in spec.lengths.iter().enumerate() {
        for r in 0..spec.replicates {
            jobs.push(Job {
                replicate: r,
                index: i,
                stream: Some(replicate_stream(tags::PASSAGE, i, r)),
                params: json!({ "length": length, "box_size": eps }),
                task: Box::new(move || {
                    let (o, w) = passage_replicate(reg, length, i, r)?;
                    // the same substream and window give the same particles
                    let ps = PointSet::sample_substream(w.window.clone(), spec.lambda, spec.seed, o.stream)?;
                    let stats = boxpath_stats(&ps, &w.path, eps)?;
                    let mut v = to_value(&stats);
                    v["trusted"] = json!(o.trusted);
                    v["midpoints_covered"] = json!(stats.midpoints_covered());
                    Ok(v)
                }) as Task,
            });
        }
    }
    let range = batch(spec, jobs, records)?;
    let mut table = Table::new(&["length", "completed", "mean_boxes", "mean_occupied_fraction", "long_links", "connected", "midpoints_covered"]);
    let mut pass = true;
    for (i, l) in spec.lengths.iter().enumerate() {
        let stats: Vec<BoxPathStats> = records[range.clone()].iter().filter(|r| r.ok() && r.index == i).map(|r| from_value(&r.outputs)).collect();
        let connected = stats.iter().all(|s| s.connected);
        let covered = stats.iter().all(|s| s.midpoints_covered());
        pass &= connected && covered;
        let boxes: Vec<f64> = stats.iter().map(|s| s.boxes.len() as f64).collect();
        let occ: Vec<f64> = stats.iter().map(|s| s.occupied_fraction).collect();
        table.push(vec![
            fmt(*l),
            stats.len().to_string(),
            fmt(Aggregate::from_slice(&boxes).mean),
            fmt(Aggregate::from_slice(&occ).mean),
            stats.iter().map(|s| s.long_links).sum::<usize>().to_string(),
            connected.to_string(),
            covered.to_string(),
        ]);
    }
    let mut out = Outcome::new(table);
    out.pass = Some(pass);
    Ok(out)
}

fn lens_kind(spec: &ExperimentSpec, records: &mut Vec<ReplicateRecord>) -> Result<Outcome, Stop> {
    let mut jobs = Vec::new();
    for (j, &alpha) in spec.alphas.iter().enumerate() {
        let h = spec.truncation.unwrap_or_else(|| 10.0 * hull_threshold(alpha, spec.hull_radius));
        for (k, trunc) in [None, Some(h)].into_iter().enumerate() {
            jobs.push(Job {
                replicate: 0,
                index: 2 * j + k,
                stream: None,
                params: json!({ "alpha": alpha, "truncation": trunc, "trials": spec.trials, "hull_radius": spec.hull_radius }),
                task: Box::new(move || {
                    let cm = CostModel::new(alpha, trunc)?;
                    Ok(to_value(&lens_property_report(&cm, spec.d, spec.trials, spec.seed, spec.hull_radius)?))
                }) as Task,
            });
        }
    }
    let range = batch(spec, jobs, records)?;
    let mut table = Table::new(&["alpha", "truncation", "check", "trials", "violations"]);
    let mut total = 0u64;
    for rec in records[range].iter().filter(|r| r.ok()) {
        for c in rec.outputs["checks"].as_array().into_iter().flatten() {
            total += c["violations"].as_u64().unwrap_or(0);
            table.push(vec![rec.params["alpha"].to_string(), rec.params["truncation"].to_string(), c["name"].as_str().unwrap_or("").to_string(), c["trials"].to_string(), c["violations"].to_string()]);
        }
    }
    let mut out = Outcome::new(table);
    out.metric("violations", total as f64);
    out.pass = Some(total == 0);
    Ok(out)
}

fn oracle_kind(spec: &ExperimentSpec, records: &mut Vec<ReplicateRecord>) -> Result<Outcome, Stop> {
    let mut jobs: Vec<Job> = (0..spec.instances)
        .map(|i| Job {
            replicate: i,
            index: 0,
            stream: None,
            params: json!({ "check": "instance", "max_points": spec.max_points }),
            task: Box::new(move || Ok(to_value(&oracle_instance(spec.seed, i, spec.max_points, &spec.alphas)?))) as Task,
        })
        .collect();
    for (j, &alpha) in spec.alphas.iter().enumerate() {
        jobs.push(Job {
            replicate: j,
            index: 1,
            stream: None,
            params: json!({ "check": "axioms", "alpha": alpha, "side": AXIOM_SIDE, "triples": spec.triples }),
            task: Box::new(move || Ok(to_value(&axiom_check(alpha, spec.seed, AXIOM_SIDE, spec.triples)?))),
        });
    }
    jobs.push(Job {
        replicate: 0,
        index: 2,
        stream: None,
        params: json!({ "check": "crossing", "alpha": spec.alpha, "side": CROSSING_SIDE, "pairs": spec.pairs }),
        task: Box::new(move || Ok(to_value(&crossing_check(spec.alpha, spec.seed, CROSSING_SIDE, spec.pairs)?))),
    });
    let range = batch(spec, jobs, records)?;
    let recs = &records[range];
    let inst: Vec<efpp::geodesic::OracleInstance> = recs.iter().filter(|r| r.ok() && r.index == 0).map(|r| from_value(&r.outputs)).collect();
    let axioms: Vec<efpp::geodesic::AxiomReport> = recs.iter().filter(|r| r.ok() && r.index == 1).map(|r| from_value(&r.outputs)).collect();
    let crossing: Vec<efpp::geodesic::CrossingReport> = recs.iter().filter(|r| r.ok() && r.index == 2).map(|r| from_value(&r.outputs)).collect();

    let exact = inst.iter().filter(|o| o.exact()).count();
    let distinct: Vec<_> = inst.iter().filter(|o| o.distinct_lengths).collect();
    let forest = distinct.iter().filter(|o| o.forest_agrees()).count();
    let doubling = inst.iter().map(|o| o.doubling_violations).sum::<usize>()
        + axioms.iter().map(|a| a.doubling_violations).sum::<usize>()
        + crossing.iter().map(|c| c.doubling_violations).sum::<usize>();
    let axiom_violations: usize = axioms.iter().map(|a| a.symmetry_violations + a.triangle_violations + a.subsegment_mismatches).sum();
    let crossings: usize = crossing.iter().map(|c| c.crossings).sum();
    let max_err = inst.iter().map(|o| o.max_cost_rel_err).fold(0.0, f64::max);

    let mut table = Table::new(&["check", "passed", "total", "violations"]);
    table.push(vec!["exact-geodesics".into(), exact.to_string(), spec.instances.to_string(), (inst.len() - exact).to_string()]);
    table.push(vec!["spanning-forest".into(), forest.to_string(), distinct.len().to_string(), (distinct.len() - forest).to_string()]);
    for a in &axioms {
        table.push(vec![format!("axioms-alpha-{}", a.alpha), (a.triples - (a.symmetry_violations + a.triangle_violations + a.subsegment_mismatches).min(a.triples)).to_string(), a.triples.to_string(), (a.symmetry_violations + a.triangle_violations + a.subsegment_mismatches).to_string()]);
    }
    for c in &crossing {
        table.push(vec!["crossing".into(), (c.pairs - c.crossings.min(c.pairs)).to_string(), c.pairs.to_string(), c.crossings.to_string()]);
    }
    table.push(vec!["doubling-back".into(), String::new(), String::new(), doubling.to_string()]);

    let mut out = Outcome::new(table);
    out.metric("exact", exact as f64);
    out.metric("instances", spec.instances as f64);
    out.metric("max_cost_rel_err", max_err);
    out.metric("forest_agree", forest as f64);
    out.metric("forest_instances", distinct.len() as f64);
    out.metric("axiom_violations", axiom_violations as f64);
    out.metric("crossings", crossings as f64);
    out.metric("doubling_violations", doubling as f64);
    let complete = inst.len() == spec.instances && axioms.len() == spec.alphas.len() && crossing.len() == 1;
    out.pass = Some(complete && exact == spec.instances && forest == distinct.len() && axiom_violations == 0 && crossings == 0 && doubling == 0);
    Ok(out)
}

/// Writes records (JSON lines) to `spec.out` or standard output, and the
/// summary as JSON plus two comma-separated tables next to the records file.
pub fn write_outputs(out: &RunOutput) -> std::io::Result<()> {
    match &out.spec.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            for r in &out.records {
                writeln!(w, "{}", r.to_line())?;
            }
            w.flush()?;
            let summary = json!({ "spec": out.spec, "summary": out.summary });
            std::fs::write(path.with_extension("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
            std::fs::write(path.with_extension("summary.csv"), out.summary.table.to_csv())?;
            std::fs::write(path.with_extension("metrics.csv"), out.summary.metrics_csv())?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            for r in &out.records {
                writeln!(w, "{}", r.to_line())?;
            }
            w.flush()?;
        }
    }
    Ok(())
}
