use mixlimit_core::random_net::output_samples;
use mixlimit_core::stats;
use mixlimit_core::{ActivationKind, DistSpec, InputPolicy, NetworkConfig, SampleSet, SeedPath};
use proptest::prelude::*;

fn normals(n: usize, seed: u64) -> SampleSet {
    let mut s = SeedPath::new(seed).stream();
    SampleSet::new((0..n).map(|_| s.standard_normal()).collect(), "n01").unwrap()
}

fn point(v: f64) -> DistSpec {
    DistSpec::point_mass(v).unwrap()
}

#[test]
fn empirical_cf_of_normal_sample() {
    let s = normals(100_000, 1);
    let phi = stats::empirical_cf(&s, 1.0);
    assert!((phi.re - (-0.5f64).exp()).abs() < 0.01, "{phi}");
    assert!(phi.im.abs() < 0.01);
    let gap = stats::sup_cf_gap(&s, |t| (-t * t / 2.0).exp(), &stats::cf_grid());
    assert!(gap < 0.02, "{gap}");
}

#[test]
fn ks_between_normal_samples_is_small() {
    assert!(stats::ks_distance(&normals(10_000, 2), &normals(10_000, 3)) < 0.03);
}

/// Compare the Monte Carlo null quantile with Kolmogorov's asymptotic one:
/// P(√(nm/(n+m)) D > 1.6276) = 0.01.
#[test]
fn ks_null_quantile_matches_asymptotics() {
    let (n, m) = (2000usize, 1500usize);
    let q = stats::ks_null_quantile(n, m, 0.99, 1000, &SeedPath::new(4)).unwrap();
    let asymptotic = 1.6276 * ((n + m) as f64 / (n * m) as f64).sqrt();
    assert!((q / asymptotic - 1.0).abs() < 0.1, "{q} vs {asymptotic}");
    assert_eq!(
        q,
        stats::ks_null_quantile(n, m, 0.99, 1000, &SeedPath::new(4)).unwrap()
    );
}

#[test]
fn kurtosis_of_normal_sample() {
    let k = stats::excess_kurtosis(&normals(1_000_000, 5)).unwrap();
    assert!(k.abs() < 0.02, "{k}");
}

#[test]
fn single_hidden_layer_has_uncorrelated_squares() {
    let cfg = NetworkConfig::shared_uniform(vec![1, 2, 1], ActivationKind::Relu).unwrap();
    let est = stats::cov_squared_outputs_batched(
        &cfg,
        &InputPolicy::Fixed(vec![1.0]),
        10_000,
        20,
        &SeedPath::new(6),
    )
    .unwrap();
    assert!(est.z_score() < 4.0, "{est:?}");
}

#[test]
fn point_mass_network_covariance_is_zero() {
    let cfg = NetworkConfig::new(
        vec![1, 3, 2, 1],
        ActivationKind::Relu,
        vec![point(0.7), point(-0.2), point(0.0)],
        vec![point(0.1), point(0.3)],
    )
    .unwrap();
    let c = stats::cov_squared_outputs(&cfg, &[1.0], 500, &SeedPath::new(7)).unwrap();
    assert_eq!(c, 0.0);
}

/// A narrow bottleneck before the last hidden layer couples the summands.
#[test]
fn bottleneck_covariance_is_detectable() {
    let cfg = NetworkConfig::shared_uniform(vec![1, 1, 1, 2, 1], ActivationKind::Relu).unwrap();
    let est = stats::cov_squared_outputs_batched(
        &cfg,
        &InputPolicy::Fixed(vec![1.0]),
        100_000,
        20,
        &SeedPath::new(8),
    )
    .unwrap();
    assert!(est.value > 4.0 * est.stderr, "{est:?}");
}

#[test]
fn bottleneck_gives_heavy_tails_and_wide_layer_does_not() {
    let input = [1.0];
    let deep = NetworkConfig::shared_uniform(vec![1, 1, 1, 512, 1], ActivationKind::Relu).unwrap();
    let s = output_samples(&deep, &input, 0, 100_000, &SeedPath::new(9)).unwrap();
    let k = stats::excess_kurtosis_batched(&s, 20).unwrap();
    assert!(k.value > 4.0 * k.stderr, "{k:?}");

    let shallow = NetworkConfig::shared_uniform(vec![1, 512, 1], ActivationKind::Relu).unwrap();
    let s = output_samples(&shallow, &input, 0, 100_000, &SeedPath::new(10)).unwrap();
    let k = stats::excess_kurtosis_batched(&s, 20).unwrap();
    assert!(k.z_score() < 4.0, "{k:?}");
}

/// One hidden layer under fan-in scaling: the standardized output's CF
/// approaches the Gaussian one as the width grows.
#[test]
fn cf_gap_to_gaussian_shrinks_with_width() {
    let n = 20_000;
    let noise = 3.0 / (n as f64).sqrt();
    let gaps: Vec<f64> = [1usize, 4, 64]
        .iter()
        .map(|&d| {
            let cfg = NetworkConfig::fan_in(vec![1, d, 1], ActivationKind::Relu).unwrap();
            let s = output_samples(&cfg, &[1.0], 0, n, &SeedPath::new(11).child(d as u64)).unwrap();
            let sd = stats::sample_variance(&s).unwrap().sqrt();
            let z = SampleSet::new(s.values().iter().map(|v| v / sd).collect(), "z").unwrap();
            stats::sup_cf_gap(&z, |t| (-t * t / 2.0).exp(), &stats::cf_grid())
        })
        .collect();
    for w in gaps.windows(2) {
        assert!(w[1] <= w[0] + noise, "{gaps:?}");
    }
    assert!(gaps[2] < gaps[0] - noise, "{gaps:?}");
}

#[test]
fn histogram_integrates_to_in_range_mass() {
    let s = normals(50_000, 12);
    let h = stats::histogram(&s, 81).unwrap();
    let mass: f64 = h.densities.iter().map(|d| d * h.bin_width()).sum();
    let inside = h.counts.iter().sum::<usize>() as f64 / h.n as f64;
    assert!((mass - inside).abs() < 1e-12);
    assert!(inside > 0.9999);
    // Central bin against the standard normal density.
    let c = h.densities[40];
    let expected = (2.0 * std::f64::consts::PI).powf(-0.5);
    assert!(
        (c - expected).abs() < 4.0 * h.density_stderr(40),
        "{c} vs {expected}"
    );
}

#[test]
fn sample_csv_round_trip() {
    let s = normals(100, 13).with_seed(SeedPath::new(13).child(2));
    let back = SampleSet::from_csv(&s.to_csv()).unwrap();
    assert_eq!(back.values(), s.values());
    assert_eq!(back.seed(), s.seed());
    assert_eq!(back.label(), s.label());
    assert!(SampleSet::from_csv("value\n1.0\n").is_err());
}

fn small_sample() -> impl Strategy<Value = SampleSet> {
    prop::collection::vec(-5.0f64..5.0, 1..40).prop_map(|v| SampleSet::new(v, "p").unwrap())
}

proptest! {
    #[test]
    fn ks_is_a_metric_on_empirical_laws(a in small_sample(), b in small_sample(), c in small_sample()) {
        let ab = stats::ks_distance(&a, &b);
        prop_assert_eq!(ab, stats::ks_distance(&b, &a));
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(stats::ks_distance(&a, &a), 0.0);
        let via = stats::ks_distance(&a, &c) + stats::ks_distance(&c, &b);
        prop_assert!(ab <= via + 1e-12);
    }

    #[test]
    fn empirical_cf_is_bounded_and_hermitian(s in small_sample(), t in -5.0f64..5.0) {
        let p = stats::empirical_cf(&s, t);
        let q = stats::empirical_cf(&s, -t);
        prop_assert!(p.norm() <= 1.0 + 1e-12);
        prop_assert!((p.re - q.re).abs() < 1e-12 && (p.im + q.im).abs() < 1e-12);
    }
}
