use mixlimit_core::mmd::{self, MmdOptions};
use mixlimit_core::{MixingMeasure, SampleSet, SeedPath, VarianceDivisor};
use proptest::prelude::*;

fn normal_sample(variance: f64, n: usize, seed: u64) -> SampleSet {
    MixingMeasure::point_mass(variance)
        .unwrap()
        .sample(n, &SeedPath::new(seed))
        .unwrap()
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

const VARIANCES: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 10.0];
const POINTS: [f64; 5] = [0.0, 1.0, -1.0, 3.0, -3.0];

#[test]
fn embedding_matches_monte_carlo() {
    for (k, &v) in VARIANCES.iter().enumerate() {
        let mut s = SeedPath::new(100).child(k as u64).stream();
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| v.sqrt() * s.standard_normal())
            .collect();
        for &y in &POINTS {
            let kernel: Vec<f64> = xs.iter().map(|&x| mmd::gauss_kernel(x, y)).collect();
            let (mc, se) = mean_and_se(&kernel);
            let exact = mmd::embedding_vs_gaussian(v, y);
            // σ² = 0 leaves only summation rounding.
            let tol = if v == 0.0 { 1e-9 } else { 4.0 * se };
            assert!(
                (mc - exact).abs() <= tol,
                "σ²={v}, y={y}: {mc} vs {exact} (se {se})"
            );
            if v == 1.0 && y == 1.0 {
                assert!((mc - exact).abs() < 3.0 * se);
            }
        }
    }
}

#[test]
fn self_expectation_matches_monte_carlo() {
    for (k, &v) in VARIANCES.iter().enumerate() {
        let mut s = SeedPath::new(200).child(k as u64).stream();
        let kernel: Vec<f64> = (0..1_000_000)
            .map(|_| {
                let (a, b) = (s.standard_normal(), s.standard_normal());
                mmd::gauss_kernel(v.sqrt() * a, v.sqrt() * b)
            })
            .collect();
        let (mc, se) = mean_and_se(&kernel);
        let exact = mmd::self_expectation_gaussian(v);
        let tol = if v == 0.0 { 1e-9 } else { 4.0 * se };
        assert!(
            (mc - exact).abs() <= tol,
            "σ²={v}: {mc} vs {exact} (se {se})"
        );
        if v == 2.0 {
            assert!((mc - exact).abs() < 3.0 * se);
        }
    }
}

#[test]
fn gaussian_sample_has_small_mmd() {
    let r = mmd::mmd_sq_vs_fitted_gaussian(&normal_sample(1.0, 10_000, 1)).unwrap();
    assert!(r.mmd_sq < 0.01, "{r:?}");
}

#[test]
fn median_mmd_of_gaussian_samples_is_small() {
    let values: Vec<f64> = (0..50)
        .map(|rep| {
            mmd::mmd_sq_vs_fitted_gaussian(&normal_sample(2.0, 10_000, 1000 + rep))
                .unwrap()
                .mmd_sq
        })
        .collect();
    assert!(median(values) < 0.01);
}

#[test]
fn two_sample_null_and_alternative() {
    let a = normal_sample(1.0, 10_000, 2);
    let b = normal_sample(1.0, 10_000, 3);
    assert!(mmd::mmd_sq_two_sample(&a, &b) < 0.005);

    // Extending the self-expectation formula to two different variances:
    // E k(x, y) = (σ_p² + σ_q² + 1)^{-1/2}.
    let wide = normal_sample(4.0, 10_000, 4);
    let population = 1.0 / 3f64.sqrt() + 1.0 / 3.0 - 2.0 / 6f64.sqrt();
    let est = mmd::mmd_sq_two_sample(&a, &wide);
    assert!((est - population).abs() < 0.01, "{est} vs {population}");
}

#[test]
fn monte_carlo_agrees_with_closed_form() {
    let sample = MixingMeasure::new(&[(1.0, 0.5), (4.0, 0.5)])
        .unwrap()
        .sample(500, &SeedPath::new(6))
        .unwrap();
    let closed = mmd::mmd_sq_vs_fitted_gaussian(&sample).unwrap();
    let mc = mmd::mmd_sq_monte_carlo(&sample, closed.sigma_sq, 200_000, &SeedPath::new(7)).unwrap();
    assert!(
        (mc.estimate - closed.raw_mmd_sq).abs() < 3.0 * mc.stderr,
        "{mc:?} vs {closed:?}"
    );
}

#[test]
fn monte_carlo_variance_scales_inversely_with_draws() {
    let sample = normal_sample(1.5, 200, 8);
    let spread = |m: usize| {
        let est: Vec<f64> = (0..40)
            .map(|r| {
                mmd::mmd_sq_monte_carlo(&sample, 1.5, m, &SeedPath::new(9).child(r))
                    .unwrap()
                    .estimate
            })
            .collect();
        let (mean, _) = mean_and_se(&est);
        est.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / 39.0
    };
    let ratio = spread(500) / spread(5000);
    assert!(ratio > 4.0 && ratio < 25.0, "variance ratio {ratio}");
}

#[test]
fn options_change_the_reference() {
    let s = normal_sample(1.0, 2000, 10);
    let pop = mmd::mmd_sq_vs_fitted_gaussian(&s).unwrap();
    let unbiased = mmd::mmd_sq_vs_fitted_gaussian_with(
        &s,
        MmdOptions {
            divisor: VarianceDivisor::Unbiased,
            center_mean: false,
        },
    )
    .unwrap();
    assert!((unbiased.sigma_sq / pop.sigma_sq - 2000.0 / 1999.0).abs() < 1e-12);
    let shifted = SampleSet::new(s.values().iter().map(|v| v + 3.0).collect(), "shifted").unwrap();
    let centering = MmdOptions {
        center_mean: true,
        ..MmdOptions::default()
    };
    let centered = mmd::mmd_sq_vs_fitted_gaussian_with(&shifted, centering).unwrap();
    let centered_orig = mmd::mmd_sq_vs_fitted_gaussian_with(&s, centering).unwrap();
    let uncentered = mmd::mmd_sq_vs_fitted_gaussian(&shifted).unwrap();
    assert!((centered.mmd_sq - centered_orig.mmd_sq).abs() < 1e-9);
    assert!(pop.mmd_sq < 0.01);
    assert!(uncentered.mmd_sq > 0.1);
}

fn arbitrary_sample() -> impl Strategy<Value = SampleSet> {
    prop::collection::vec(-20.0f64..20.0, 2..60)
        .prop_filter("needs spread", |v| {
            v.iter().any(|x| (x - v[0]).abs() > 1e-6)
        })
        .prop_map(|v| SampleSet::new(v, "p").unwrap())
}

proptest! {
    #[test]
    fn report_terms_are_consistent(s in arbitrary_sample()) {
        let r = mmd::mmd_sq_vs_fitted_gaussian(&s).unwrap();
        prop_assert!((r.raw_mmd_sq - (r.term_self - 2.0 * r.term_cross + r.term_data)).abs() <= 1e-12);
        prop_assert_eq!(r.mmd_sq, r.raw_mmd_sq.max(0.0));
        prop_assert!(r.raw_mmd_sq > -1e-12);
        for t in [r.term_self, r.term_cross, r.term_data] {
            prop_assert!(t > 0.0 && t <= 1.0);
        }
        prop_assert!(r.term_cross <= 1.0 / (r.sigma_sq + 1.0).sqrt() + 1e-15);
    }

    #[test]
    fn two_sample_is_symmetric(a in arbitrary_sample(), b in arbitrary_sample()) {
        let ab = mmd::mmd_sq_two_sample(&a, &b);
        let ba = mmd::mmd_sq_two_sample(&b, &a);
        prop_assert!((ab - ba).abs() <= 1e-12);
        prop_assert!(ab > -1e-12);
        prop_assert_eq!(mmd::mmd_sq_two_sample(&a, &a), 0.0);
    }
}
