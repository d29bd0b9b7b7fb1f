use mixlimit_core::random_net::{self, Matrix};
use mixlimit_core::stats;
use mixlimit_core::{
    ActivationKind, DistSpec, InputPolicy, Network, NetworkConfig, SampleSet, SeedPath,
};
use proptest::prelude::*;
use rayon::prelude::*;

fn gaussian(v: f64) -> DistSpec {
    DistSpec::gaussian(0.0, v).unwrap()
}

fn point(v: f64) -> DistSpec {
    DistSpec::point_mass(v).unwrap()
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn gaussian_layer_entry_variance() {
    let cfg = NetworkConfig::homogeneous(
        vec![1000, 1000, 1],
        ActivationKind::Relu,
        gaussian(1.0),
        gaussian(1.0),
    )
    .unwrap();
    let net = Network::sample(&cfg, &SeedPath::new(7));
    let w = net.weights()[0].as_slice();
    let (m, _) = mean_and_se(w);
    let var = w.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / w.len() as f64;
    assert!(var > 0.9 && var < 1.1, "{var}");
}

#[test]
fn resampling_is_bit_identical() {
    let cfg = NetworkConfig::fan_in(vec![3, 8, 5, 2], ActivationKind::Tanh).unwrap();
    let seed = SeedPath::new(11).child(3);
    assert_eq!(Network::sample(&cfg, &seed), Network::sample(&cfg, &seed));
    assert_ne!(
        Network::sample(&cfg, &seed).weights(),
        Network::sample(&cfg, &seed.child(0)).weights()
    );
}

/// Straight-line forward pass for point-mass hidden weights `a` and biases
/// `c` with the binary step activation: when the previous layer is the
/// constant `x`, every pre-activation of the next layer is
/// `a·d·x/√d + c`. The (centered) last layer is read off the sampled net.
#[test]
fn step_network_matches_closed_form() {
    let (a, c, t) = (0.5, -0.25, 0.8);
    let widths = vec![3, 4, 9, 2, 1];
    let cfg = NetworkConfig::new(
        widths.clone(),
        ActivationKind::BinaryStep,
        vec![point(a), point(a), point(a), gaussian(1.0)],
        vec![point(c); 3],
    )
    .unwrap();
    let net = Network::sample(&cfg, &SeedPath::new(1));
    let trace = net.forward(&[t; 3]).unwrap();

    let step = |v: f64| if v >= 0.0 { 1.0 } else { 0.0 };
    let mut x = t;
    let mut prev = widths[0] as f64;
    for (l, &d) in widths[1..widths.len() - 1].iter().enumerate() {
        let pre = a * prev * x / prev.sqrt() + c;
        for v in &trace.pre_activations[l] {
            assert!((v - pre).abs() < 1e-15);
        }
        x = step(pre);
        prev = d as f64;
    }
    let expected = x * net.weights()[3].as_slice().iter().sum::<f64>() / prev.sqrt();
    assert!((trace.outputs[0] - expected).abs() < 1e-15);
    assert!(trace
        .pre_activations
        .iter()
        .zip(&trace.post_activations)
        .all(|(pre, post)| pre.iter().zip(post).all(|(p, q)| step(*p) == *q)));
}

fn arbitrary_config() -> impl Strategy<Value = (NetworkConfig, u64, Vec<f64>)> {
    let widths = prop::collection::vec(1usize..12, 3..6);
    let act = prop_oneof![
        Just(ActivationKind::Relu),
        Just(ActivationKind::Tanh),
        Just(ActivationKind::Identity),
        Just(ActivationKind::BinaryStep),
        Just(ActivationKind::Polynomial(vec![0.1, 1.0, -0.3])),
    ];
    (widths, act, any::<u64>(), 0.1f64..3.0).prop_flat_map(|(widths, act, seed, v)| {
        let d0 = widths[0];
        let cfg = NetworkConfig::homogeneous(
            widths,
            act,
            gaussian(v),
            DistSpec::uniform(-1.0, 1.0).unwrap(),
        )
        .unwrap();
        (
            Just(cfg),
            Just(seed),
            prop::collection::vec(-3.0f64..3.0, d0),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn outputs_are_normalized_sums_of_last_layer_terms((cfg, seed, input) in arbitrary_config()) {
        let net = Network::sample(&cfg, &SeedPath::new(seed));
        let out = net.forward(&input).unwrap().outputs;
        let d_l = cfg.last_hidden_width() as f64;
        for (j, &s) in out.iter().enumerate() {
            let y = net.last_layer_terms(&input, j).unwrap();
            let rebuilt = y.iter().sum::<f64>() / d_l.sqrt();
            prop_assert!((s - rebuilt).abs() <= 1e-12 * s.abs().max(1.0));
        }
    }

    #[test]
    fn forward_trace_shapes_follow_widths((cfg, seed, input) in arbitrary_config()) {
        let net = Network::sample(&cfg, &SeedPath::new(seed));
        let trace = net.forward(&input).unwrap();
        prop_assert_eq!(trace.pre_activations.len(), cfg.depth());
        for (l, pre) in trace.pre_activations.iter().enumerate() {
            prop_assert_eq!(pre.len(), cfg.widths()[l + 1]);
            for (p, q) in pre.iter().zip(&trace.post_activations[l]) {
                prop_assert_eq!(cfg.activation().apply(*p), *q);
            }
        }
        prop_assert_eq!(trace.outputs.len(), cfg.output_dim());
    }

    #[test]
    fn text_dump_round_trips((cfg, seed, input) in arbitrary_config()) {
        let net = Network::sample(&cfg, &SeedPath::new(seed));
        let back = Network::from_text(&net.to_text()).unwrap();
        prop_assert_eq!(back.forward(&input).unwrap(), net.forward(&input).unwrap());
    }
}

/// Relabels last-hidden units: rows of the last weight matrix move together
/// with the columns of the previous matrix and the entries of its bias.
#[test]
fn permuting_hidden_units_leaves_outputs_unchanged() {
    let cfg = NetworkConfig::homogeneous(
        vec![2, 5, 7, 3],
        ActivationKind::Tanh,
        gaussian(1.0),
        gaussian(0.5),
    )
    .unwrap();
    let input = [0.7, -1.3];
    for s in 0..20 {
        let net = Network::sample(&cfg, &SeedPath::new(s));
        let perm: Vec<usize> = (0..7).map(|i| (3 * i + s as usize) % 7).collect();
        let w = net.weights();
        let mut prev = w[1].clone();
        let mut last = w[2].clone();
        let mut bias = net.biases()[1].clone();
        for (new, &old) in perm.iter().enumerate() {
            for r in 0..5 {
                prev.set(r, new, w[1].get(r, old));
            }
            for c in 0..3 {
                last.set(new, c, w[2].get(old, c));
            }
            bias[new] = net.biases()[1][old];
        }
        let permuted = Network::from_parts(
            cfg.clone(),
            vec![w[0].clone(), prev, last],
            vec![net.biases()[0].clone(), bias],
            None,
        )
        .unwrap();
        let a = net.forward(&input).unwrap().outputs;
        let b = permuted.forward(&input).unwrap().outputs;
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{x} vs {y}");
        }
    }
}

#[test]
fn from_parts_rejects_wrong_shapes() {
    let cfg = NetworkConfig::homogeneous(
        vec![1, 2, 1],
        ActivationKind::Relu,
        gaussian(1.0),
        gaussian(1.0),
    )
    .unwrap();
    let w0 = Matrix::from_rows(1, 2, vec![1.0, 1.0]).unwrap();
    let w1 = Matrix::from_rows(2, 1, vec![1.0, 1.0]).unwrap();
    assert!(Network::from_parts(
        cfg.clone(),
        vec![w0.clone(), w1.clone()],
        vec![vec![0.0; 2]],
        None
    )
    .is_ok());
    assert!(Network::from_parts(
        cfg.clone(),
        vec![w1.clone(), w0.clone()],
        vec![vec![0.0; 2]],
        None
    )
    .is_err());
    assert!(Network::from_parts(
        cfg.clone(),
        vec![w0.clone(), w1.clone()],
        vec![vec![0.0; 3]],
        None
    )
    .is_err());
    assert!(Network::from_parts(cfg, vec![w0], vec![vec![0.0; 2]], None).is_err());
}

fn last_layer_sample(n: usize) -> Vec<(f64, f64)> {
    let cfg = NetworkConfig::homogeneous(
        vec![1, 3, 4, 1],
        ActivationKind::Relu,
        gaussian(1.0),
        gaussian(1.0),
    )
    .unwrap();
    stats::last_layer_pairs(
        &cfg,
        &InputPolicy::Fixed(vec![1.0]),
        n,
        &SeedPath::new(2024),
    )
    .unwrap()
}

#[test]
fn last_layer_terms_are_centered_and_uncorrelated() {
    let pairs = last_layer_sample(100_000);
    let y1: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let (m, se) = mean_and_se(&y1);
    assert!(m.abs() < 4.0 * se, "mean {m}, se {se}");

    let products: Vec<f64> = pairs.iter().map(|(a, b)| a * b).collect();
    let (c, se) = mean_and_se(&products);
    assert!(c.abs() < 4.0 * se, "cov {c}, se {se}");
}

#[test]
fn outputs_are_exchangeable_across_units() {
    let cfg = NetworkConfig::homogeneous(
        vec![1, 2, 3, 2],
        ActivationKind::Relu,
        gaussian(1.0),
        gaussian(1.0),
    )
    .unwrap();
    let seed = SeedPath::new(99);
    let outs: Vec<(f64, f64)> = (0..10_000u64)
        .into_par_iter()
        .map(|k| {
            let o = Network::sample(&cfg, &seed.child(k))
                .forward(&[1.0])
                .unwrap()
                .outputs;
            (o[0], o[1])
        })
        .collect();
    let set =
        |f: &dyn Fn(&(f64, f64)) -> f64| SampleSet::new(outs.iter().map(f).collect(), "s").unwrap();
    let s1 = set(&|p| p.0);
    let s2 = set(&|p| p.1);
    assert!(stats::ks_distance(&s1, &s2) < 0.03);
    let sum12 = set(&|p| p.0 + 2.0 * p.1);
    let sum21 = set(&|p| p.1 + 2.0 * p.0);
    assert!(stats::ks_distance(&sum12, &sum21) < 0.03);
}

#[test]
fn single_draw_matches_direct_forward() {
    let cfg = NetworkConfig::shared_uniform(vec![1, 4, 4, 1], ActivationKind::Relu).unwrap();
    let seed = SeedPath::new(5);
    let s = random_net::output_samples(&cfg, &[0.3], 0, 1, &seed).unwrap();
    let direct = Network::sample(&cfg, &seed.child(0))
        .forward(&[0.3])
        .unwrap()
        .outputs[0];
    assert_eq!(s.values(), &[direct]);
    assert_eq!(s.seed(), Some(&seed));
}

/// Identity activation, one hidden layer, every weight and bias N(0, 1),
/// input 1: `X_i = w0_i + b_i ~ N(0, 2)` and `E[S²] = E[Y_1²] = 2·1`.
#[test]
fn identity_network_second_moment() {
    let cfg = NetworkConfig::homogeneous(
        vec![1, 6, 1],
        ActivationKind::Identity,
        gaussian(1.0),
        gaussian(1.0),
    )
    .unwrap();
    let s = random_net::output_samples(&cfg, &[1.0], 0, 100_000, &SeedPath::new(31)).unwrap();
    let squares: Vec<f64> = s.values().iter().map(|v| v * v).collect();
    let (m2, se) = mean_and_se(&squares);
    assert!((m2 - 2.0).abs() < 3.0 * se, "E[S²] = {m2} ± {se}");
}

#[test]
fn disjoint_seed_paths_are_uncorrelated() {
    let cfg = NetworkConfig::fan_in(vec![1, 8, 8, 1], ActivationKind::Relu).unwrap();
    let policy = InputPolicy::Random(DistSpec::standard_normal());
    let root = SeedPath::new(8);
    let a = random_net::sample_outputs(&cfg, &policy, 0, 10_000, &root.child(0)).unwrap();
    let b = random_net::sample_outputs(&cfg, &policy, 0, 10_000, &root.child(1)).unwrap();
    let pairs: Vec<(f64, f64)> = a
        .values()
        .iter()
        .copied()
        .zip(b.values().iter().copied())
        .collect();
    let cov = stats::covariance(&pairs).unwrap();
    let rho =
        cov / (stats::sample_variance(&a).unwrap() * stats::sample_variance(&b).unwrap()).sqrt();
    assert!(rho.abs() < 0.02, "rho = {rho}");
}

#[test]
fn sampling_does_not_depend_on_thread_count() {
    let cfg = NetworkConfig::fan_in(vec![2, 16, 16, 1], ActivationKind::Relu).unwrap();
    let policy = InputPolicy::Random(DistSpec::standard_normal());
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                random_net::sample_outputs(&cfg, &policy, 0, 5000, &SeedPath::new(3)).unwrap()
            })
    };
    assert_eq!(run(1).values(), run(3).values());
}
