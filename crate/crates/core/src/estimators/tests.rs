use super::*;
use crate::geodesic::passage_time;
use crate::pointcloud::{substream_rng, PointSet, Window};
use rand_distr::{Distribution, Gamma};

fn regime(alpha: f64, replicates: usize) -> Regime {
    Regime::new(2, CostModel::power(alpha).unwrap(), 1.0, 9, replicates).unwrap()
}

#[test]
fn regime_rejects_bad_input() {
    let cm = CostModel::power(2.0).unwrap();
    assert!(Regime::new(2, cm, 1.0, 0, 0).is_err());
    assert!(Regime::new(0, cm, 1.0, 0, 5).is_err());
    assert!(Regime::new(2, cm, -1.0, 0, 5).is_err());
    assert_eq!(regime(2.0, 5).audit, AuditLevel::None);
    assert_eq!(Regime::new(3, cm, 1.0, 0, 5).unwrap().audit, AuditLevel::Doubling);
}

#[test]
fn grids_are_validated() {
    let reg = regime(2.0, 30);
    assert!(estimate_mu(&reg, &[]).is_err());
    assert!(estimate_mu(&reg, &[20.0, 10.0]).is_err());
    assert!(matches!(variance_scaling(&reg, &[10.0]), Err(Error::Regression(_))));
    assert!(estimate_mu(&regime(2.0, 29), &[10.0]).is_err());
    assert!(superadditivity_check(&reg, &[]).is_err());
}

#[test]
fn streams_are_distinct() {
    let a = replicate_stream(tags::PASSAGE, 1, 2);
    assert_ne!(a, replicate_stream(tags::PASSAGE, 2, 1));
    assert_ne!(a, replicate_stream(tags::ISOTROPY, 1, 2));
}

#[test]
fn rescaling_space_rescales_passage_times() {
    // density 2 mapped by √2 is density 1; every cost grows by 2^{α/2}
    for alpha in [1.5, 2.0, 3.0] {
        let cm = CostModel::power(alpha).unwrap();
        let ps = PointSet::sample(Window::cube(2, 0.0, 20.0).unwrap(), 2.0, 4).unwrap();
        let c = 2f64.sqrt();
        let big = ps.map_points(Window::cube(2, 0.0, 20.0 * c).unwrap(), |p| p.iter().map(|v| v * c).collect()).unwrap();
        let (t, _) = passage_time(&ps, &cm, &[3.0, 4.0], &[17.0, 15.0], EndpointMode::Particle).unwrap();
        let (tb, _) = passage_time(&big, &cm, &[3.0 * c, 4.0 * c], &[17.0 * c, 15.0 * c], EndpointMode::Particle).unwrap();
        let f = c.powf(alpha);
        assert!((tb - f * t).abs() <= 1e-12 * tb, "alpha {alpha}: {tb} vs {}", f * t);
    }
}

#[test]
fn density_report_carries_both_predictions() {
    let mk = |mu: f64, se: f64| MuEstimate {
        scaling: ScalingEstimate {
            statistic: Statistic::TimePerLength,
            lengths: vec![1.0],
            samples: vec![],
            aggregates: vec![],
            untrusted: vec![0],
            fit: None,
            replicates: 1,
            seed: 0,
        },
        mu,
        std_err: se,
        monotonicity_breaks: vec![],
    };
    let r = DensityScaling::from_estimates(mk(1.0, 0.01), mk(0.5f64.sqrt(), 0.01), 2.0, 1.0, 2.0, 2);
    assert!((r.time_rescaling - 0.5).abs() < 1e-15);
    assert!((r.length_and_time_rescaling - 0.5f64.sqrt()).abs() < 1e-15);
    assert!(r.z_length_and_time_rescaling.abs() < 1e-9);
    assert!(r.z_time_rescaling > 3.0);
}

fn fake_outcomes(lengths: &[f64], cost: impl Fn(usize, usize) -> f64, n: usize) -> Vec<Vec<PassageOutcome>> {
    lengths
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            (0..n)
                .map(|r| PassageOutcome {
                    length: l,
                    index: i,
                    replicate: r,
                    stream: 0,
                    cost: cost(i, r),
                    hops: 1,
                    d_max: 0.0,
                    trusted: true,
                    regrowths: 0,
                    particles: 0,
                })
                .collect()
        })
        .collect()
}

#[test]
fn variance_regression_recovers_iid_slope() {
    // T_ℓ a sum of ℓ unit exponentials: Var T_ℓ = ℓ
    let lengths = [50.0, 100.0, 200.0, 400.0];
    let mut rng = substream_rng(1, 1);
    let draws: Vec<Vec<f64>> = lengths.iter().map(|&l| {
        let g = Gamma::new(l, 1.0).unwrap();
        (0..20000).map(|_| g.sample(&mut rng)).collect()
    }).collect();
    let out = fake_outcomes(&lengths, |i, r| draws[i][r], 20000);
    let reg = regime(2.0, 20000);
    let est = ExponentEstimate::variance_from_outcomes(&reg, &lengths, &out).unwrap();
    assert!((est.slope - 1.0).abs() <= 0.02, "{}", est.slope);
    assert!(est.ci.0 < 1.0 && 1.0 < est.ci.1);
    let (b, _) = est.scaling.refit().unwrap();
    assert!((b - est.slope).abs() < 1e-12);
}

#[test]
fn untrusted_paths_beyond_five_percent_fail() {
    let mut out = fake_outcomes(&[10.0], |_, r| r as f64, 100);
    for o in out[0].iter_mut().take(6) {
        o.trusted = false;
    }
    assert!(matches!(ScalingEstimate::from_outcomes(Statistic::TimePerLength, &[10.0], &out, 100, 0), Err(Error::WindowPolicy(_))));
    out[0][5].trusted = true;
    let s = ScalingEstimate::from_outcomes(Statistic::TimePerLength, &[10.0], &out, 100, 0).unwrap();
    assert_eq!(s.samples[0].len(), 95);
}

#[test]
fn line_passage_matches_the_plane_geodesic() {
    // the same particles placed on the x-axis of a planar window
    for (seed, alpha) in [(3, 1.5), (4, 2.0), (5, 3.0)] {
        let cm = CostModel::power(alpha).unwrap();
        let xs = line_sample(1.0, 30.0, seed, 7).unwrap();
        let (t, hops) = line_passage_cost(&cm, &xs, 30.0).unwrap();
        let pts: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x, 0.0]).collect();
        let ps = PointSet::from_points(Window::new(vec![-25.0, -1.0], vec![55.0, 1.0]).unwrap(), 1.0, seed, &pts).unwrap();
        let (tp, p) = passage_time(&ps, &cm, &[0.0, 0.0], &[30.0, 0.0], EndpointMode::Particle).unwrap();
        assert_eq!(p.hops(), hops);
        assert!((t - tp).abs() <= 1e-12 * t, "{t} vs {tp}");
    }
    let reg = Regime::new(1, CostModel::power(2.0).unwrap(), 1.0, 3, 5).unwrap();
    assert!(passage_replicate(&reg, 6.0, 0, 0).is_err());
    assert_eq!(passage_outcome(&reg, 6.0, 0, 0).unwrap().d_max, 0.0);
}

#[test]
fn one_dimensional_variance_grows_linearly() {
    let reg = Regime::new(1, CostModel::power(2.0).unwrap(), 1.0, 5, 300).unwrap();
    let est = variance_scaling(&reg, &[50.0, 100.0, 200.0, 400.0]).unwrap();
    assert!(est.ci.0 < 1.0 && 1.0 < est.ci.1, "{:?}", (est.slope, est.ci));
}

#[test]
fn mu_estimate_is_deterministic_and_schedule_free() {
    let reg = regime(2.0, 30);
    let a = estimate_mu(&reg, &[8.0, 16.0]).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| estimate_mu(&reg, &[8.0, 16.0])).unwrap();
    assert_eq!(a, b);
    assert!(a.mu > 0.0 && a.relative_std_err() < 0.2);
    assert_eq!(a.scaling.samples.iter().map(Vec::len).sum::<usize>() + a.scaling.untrusted.iter().sum::<usize>(), 60);
}

#[test]
fn two_point_paths_do_not_wander() {
    let ps = PointSet::from_points(Window::cube(2, -5.0, 15.0).unwrap(), 1.0, 0, &[vec![0.0, 0.0], vec![10.0, 0.0]]).unwrap();
    let (_, p) = passage_time(&ps, &CostModel::power(2.0).unwrap(), &[0.0, 0.0], &[10.0, 0.0], EndpointMode::Particle).unwrap();
    assert_eq!(p.max_deviation(&[0.0, 0.0], &[10.0, 0.0]), 0.0);
}

#[test]
fn wandering_is_rotation_invariant() {
    let cm = CostModel::power(2.0).unwrap();
    let ps = PointSet::sample(Window::cube(2, -20.0, 20.0).unwrap(), 1.0, 8).unwrap();
    let rot = ps.map_points(ps.window().clone(), |p| vec![-p[1], p[0]]).unwrap();
    let (_, a) = passage_time(&ps, &cm, &[-10.0, 0.0], &[10.0, 0.0], EndpointMode::Particle).unwrap();
    let (_, b) = passage_time(&rot, &cm, &[0.0, -10.0], &[0.0, 10.0], EndpointMode::Particle).unwrap();
    assert_eq!(a.max_deviation(&[-10.0, 0.0], &[10.0, 0.0]), b.max_deviation(&[0.0, -10.0], &[0.0, 10.0]));
}

#[test]
fn concentration_summary_is_sane() {
    let mut rng = substream_rng(2, 2);
    let g = Gamma::new(100.0, 1.0).unwrap();
    let costs: Vec<f64> = (0..2000).map(|_| g.sample(&mut rng)).collect();
    let r = concentration_from_costs(100.0, &costs, 0, 2.0, 2, 1).unwrap();
    assert!(r.standardized_mean.abs() < 1e-12);
    assert!(r.survival.windows(2).all(|w| w[1].1 <= w[0].1));
    assert!(r.quantiles.windows(2).all(|w| w[1].1 >= w[0].1));
    assert!(r.fit_ci.0 <= r.fit_exponent && r.fit_exponent <= r.fit_ci.1);
    assert_eq!(r.kappa_one, 1.0);
    assert!(concentration_check(&regime(2.0, 999), 10.0).is_err());
}

#[test]
fn superadditivity_needs_doubled_lengths() {
    let out = fake_outcomes(&[10.0, 15.0], |_, r| 10.0 + r as f64, 40);
    let mu = MuEstimate::from_outcomes(&regime(2.0, 40), &[10.0, 15.0], &out).unwrap();
    assert!(SuperadditivityReport::from_mu(mu).is_err());
    let reg = regime(2.0, 30);
    let r = superadditivity_check(&reg, &[8.0, 16.0]).unwrap();
    assert_eq!(r.pairs.len(), 1);
    assert_eq!(r.lower_bound_margins.len(), 2);
}

#[test]
fn shape_balls_hold_the_origin_particle() {
    let reg = regime(2.0, 4);
    let r = shape_check(&reg, 0.6, &[3.0, 6.0]).unwrap();
    assert!(r.contains_origin_particle);
    assert_eq!(r.eps.len(), 2);
    assert!(r.eps.iter().flatten().all(|e| e.is_finite() && *e >= 0.0));
    assert!(shape_check(&reg, 0.0, &[3.0]).is_err());
    assert!(shape_check(&reg, 0.6, &[6.0, 3.0]).is_err());
}

#[test]
fn directional_replicate_passes_structural_checks() {
    let reg = regime(2.0, 1);
    let setup = DirectionalSetup::new(vec![1.0, 0.0], 4.0);
    let o = directional_replicate(&reg, &setup, 0).unwrap();
    assert!(o.covered > 10);
    assert_eq!(o.pairs, o.coalesced);
    assert!(o.height_mismatch <= 1e-12);
    assert_eq!(o.recursion.violations(), 0);
    assert!(o.stability.is_some());
}

#[test]
fn isotropy_runs_over_directions() {
    let r = isotropy_check(&regime(2.0, 6), 8.0, 4).unwrap();
    assert_eq!(r.aggregates.len(), 4);
    assert!(r.aggregates.iter().all(|a| a.count + 0 <= 6));
    assert!(isotropy_check(&regime(2.0, 6), 8.0, 1).is_err());
}
