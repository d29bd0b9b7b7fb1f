//! Finite-width random feed-forward networks under the NTK parametrization.
//!
//! Widths are `d_0, d_1, ..., d_L, d_{L+1}` with `L >= 1` hidden layers.
//! Layer `l` has a `d_l x d_{l+1}` weight matrix; hidden layers `l < L` also
//! carry a bias of length `d_{l+1}`. The forward pass is
//!
//! ```text
//! pre_0[j]  = (1/√d_0) Σ_i t[i] w0[i][j] + b0[j]
//! post_l    = σ(pre_l)
//! pre_l[j]  = (1/√d_l) Σ_i post_{l-1}[i] wl[i][j] + bl[j]      (1 <= l < L)
//! out[j]    = (1/√d_L) Σ_i post_{L-1}[i] wL[i][j]
//! ```
//!
//! The output layer has no bias unless one is explicitly configured.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::distributions::{ActivationKind, DistSpec};
use crate::error::{Error, Result};
use crate::rng::SeedPath;
use crate::stats::SampleSet;

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkConfig {
    widths: Vec<usize>,
    activation: ActivationKind,
    weight_specs: Vec<DistSpec>,
    bias_specs: Vec<DistSpec>,
    output_bias: Option<DistSpec>,
}

impl NetworkConfig {
    /// `weight_specs` has one entry per layer `0..=L`, `bias_specs` one per
    /// hidden layer `0..L`. The last weight law must be centered.
    pub fn new(
        widths: Vec<usize>,
        activation: ActivationKind,
        weight_specs: Vec<DistSpec>,
        bias_specs: Vec<DistSpec>,
    ) -> Result<Self> {
        if widths.len() < 3 {
            return Err(Error::InvalidNetwork(format!(
                "need at least one hidden layer, got widths {widths:?}"
            )));
        }
        if let Some(pos) = widths.iter().position(|&d| d == 0) {
            return Err(Error::InvalidNetwork(format!("width d_{pos} is zero")));
        }
        let hidden = widths.len() - 2;
        if weight_specs.len() != hidden + 1 {
            return Err(Error::InvalidNetwork(format!(
                "expected {} weight laws, got {}",
                hidden + 1,
                weight_specs.len()
            )));
        }
        if bias_specs.len() != hidden {
            return Err(Error::InvalidNetwork(format!(
                "expected {hidden} bias laws, got {}",
                bias_specs.len()
            )));
        }
        let last = &weight_specs[hidden];
        if !last.is_centered() {
            return Err(Error::InvalidNetwork(format!(
                "last-layer weight law {last} is not centered"
            )));
        }
        Ok(Self {
            widths,
            activation,
            weight_specs,
            bias_specs,
            output_bias: None,
        })
    }

    /// Same weight law on every layer and same bias law on every hidden layer.
    pub fn homogeneous(
        widths: Vec<usize>,
        activation: ActivationKind,
        weights: DistSpec,
        biases: DistSpec,
    ) -> Result<Self> {
        let hidden = widths.len().saturating_sub(2);
        Self::new(
            widths,
            activation,
            vec![weights; hidden + 1],
            vec![biases; hidden],
        )
    }

    /// Every weight drawn from `U(-1/√d_L, 1/√d_L)` with `d_L` the last
    /// hidden width, taken literally, and all biases zero. The forward pass
    /// still applies the per-layer `1/√d_l` factor.
    pub fn shared_uniform(widths: Vec<usize>, activation: ActivationKind) -> Result<Self> {
        let d_last = *widths
            .get(widths.len().saturating_sub(2))
            .filter(|_| widths.len() >= 3)
            .ok_or_else(|| Error::InvalidNetwork(format!("bad widths {widths:?}")))?;
        let law = DistSpec::symmetric_uniform(1.0 / (d_last.max(1) as f64).sqrt())?;
        Self::homogeneous(widths, activation, law, DistSpec::point_mass(0.0)?)
    }

    /// Per-layer fan-in bounds: layer `l` weights and the bias it feeds are
    /// `U(-1/√d_l, 1/√d_l)`.
    pub fn fan_in(widths: Vec<usize>, activation: ActivationKind) -> Result<Self> {
        if widths.len() < 3 || widths.contains(&0) {
            return Err(Error::InvalidNetwork(format!("bad widths {widths:?}")));
        }
        let hidden = widths.len() - 2;
        let laws = (0..=hidden)
            .map(|l| DistSpec::symmetric_uniform(1.0 / (widths[l] as f64).sqrt()))
            .collect::<Result<Vec<_>>>()?;
        let biases = laws[..hidden].to_vec();
        Self::new(widths, activation, laws, biases)
    }

    /// Replaces every hidden bias law by `spec`.
    pub fn with_bias_law(mut self, spec: DistSpec) -> Self {
        for b in &mut self.bias_specs {
            *b = spec.clone();
        }
        self
    }

    pub fn with_output_bias(mut self, spec: DistSpec) -> Self {
        self.output_bias = Some(spec);
        self
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn hidden_widths(&self) -> &[usize] {
        &self.widths[1..self.widths.len() - 1]
    }

    /// Number of hidden layers `L`.
    pub fn depth(&self) -> usize {
        self.widths.len() - 2
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        self.widths[self.widths.len() - 1]
    }

    pub fn last_hidden_width(&self) -> usize {
        self.widths[self.widths.len() - 2]
    }

    pub fn activation(&self) -> &ActivationKind {
        &self.activation
    }

    pub fn weight_specs(&self) -> &[DistSpec] {
        &self.weight_specs
    }

    pub fn bias_specs(&self) -> &[DistSpec] {
        &self.bias_specs
    }

    pub fn last_weight_spec(&self) -> &DistSpec {
        &self.weight_specs[self.depth()]
    }

    pub fn output_bias(&self) -> Option<&DistSpec> {
        self.output_bias.as_ref()
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: input.len(),
            });
        }
        if let Some((index, &value)) = input.iter().enumerate().find(|(_, x)| !x.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(())
    }

    fn check_output(&self, j: usize) -> Result<()> {
        if j >= self.output_dim() {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.output_dim(),
            });
        }
        Ok(())
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// `(1/√d_in) xᵀW + b`, accumulating in ascending input index.
fn affine(x: &[f64], w: &Matrix, bias: Option<&[f64]>) -> Vec<f64> {
    let mut acc = vec![0.0; w.cols];
    for (i, &xi) in x.iter().enumerate() {
        for (a, &wij) in acc.iter_mut().zip(w.row(i)) {
            *a += xi * wij;
        }
    }
    let scale = (w.rows as f64).sqrt();
    match bias {
        Some(b) => acc.iter().zip(b).map(|(a, bj)| a / scale + bj).collect(),
        None => acc.iter().map(|a| a / scale).collect(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    config: NetworkConfig,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
    output_bias: Option<Vec<f64>>,
    seed: Option<SeedPath>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    pub input: Vec<f64>,
    /// One vector per hidden layer, `pre_activations[l]` has length `d_{l+1}`.
    pub pre_activations: Vec<Vec<f64>>,
    pub post_activations: Vec<Vec<f64>>,
    pub outputs: Vec<f64>,
}

impl ForwardTrace {
    pub fn last_hidden(&self) -> &[f64] {
        self.post_activations
            .last()
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

impl Network {
    /// Draws every entry independently from its layer law. Entries are drawn
    /// layer by layer (weights row-major, then that layer's bias) from the
    /// single stream of `seed`.
    pub fn sample(config: &NetworkConfig, seed: &SeedPath) -> Self {
        let mut stream = seed.stream();
        let hidden = config.depth();
        let mut weights = Vec::with_capacity(hidden + 1);
        let mut biases = Vec::with_capacity(hidden);
        for l in 0..=hidden {
            let (rows, cols) = (config.widths[l], config.widths[l + 1]);
            let mut data = vec![0.0; rows * cols];
            config.weight_specs[l].fill(&mut stream, &mut data);
            weights.push(Matrix { rows, cols, data });
            if l < hidden {
                let mut b = vec![0.0; cols];
                config.bias_specs[l].fill(&mut stream, &mut b);
                biases.push(b);
            }
        }
        let output_bias = config.output_bias.as_ref().map(|spec| {
            let mut b = vec![0.0; config.output_dim()];
            spec.fill(&mut stream, &mut b);
            b
        });
        Self {
            config: config.clone(),
            weights,
            biases,
            output_bias,
            seed: Some(seed.clone()),
        }
    }

    /// Builds a network from explicit parameters (fixtures, permutation
    /// tests). Shapes must match `config`.
    pub fn from_parts(
        config: NetworkConfig,
        weights: Vec<Matrix>,
        biases: Vec<Vec<f64>>,
        output_bias: Option<Vec<f64>>,
    ) -> Result<Self> {
        let hidden = config.depth();
        if weights.len() != hidden + 1 || biases.len() != hidden {
            return Err(Error::InvalidNetwork(format!(
                "expected {} weight matrices and {hidden} biases, got {} and {}",
                hidden + 1,
                weights.len(),
                biases.len()
            )));
        }
        for (l, w) in weights.iter().enumerate() {
            let (rows, cols) = (config.widths[l], config.widths[l + 1]);
            if w.rows != rows || w.cols != cols {
                return Err(Error::InvalidNetwork(format!(
                    "layer {l} weights are {}x{}, expected {rows}x{cols}",
                    w.rows, w.cols
                )));
            }
        }
        for (l, b) in biases.iter().enumerate() {
            if b.len() != config.widths[l + 1] {
                return Err(Error::InvalidNetwork(format!(
                    "layer {l} bias has length {}, expected {}",
                    b.len(),
                    config.widths[l + 1]
                )));
            }
        }
        if config.output_bias.is_some() != output_bias.is_some()
            || output_bias
                .as_ref()
                .is_some_and(|b| b.len() != config.output_dim())
        {
            return Err(Error::InvalidNetwork(
                "output bias does not match config".into(),
            ));
        }
        Ok(Self {
            config,
            weights,
            biases,
            output_bias,
            seed: None,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn output_bias(&self) -> Option<&[f64]> {
        self.output_bias.as_deref()
    }

    pub fn seed(&self) -> Option<&SeedPath> {
        self.seed.as_ref()
    }

    pub fn forward(&self, input: &[f64]) -> Result<ForwardTrace> {
        self.config.check_input(input)?;
        let hidden = self.config.depth();
        let mut pre_activations = Vec::with_capacity(hidden);
        let mut post_activations: Vec<Vec<f64>> = Vec::with_capacity(hidden);
        for l in 0..hidden {
            let x = if l == 0 {
                input
            } else {
                &post_activations[l - 1]
            };
            let pre = affine(x, &self.weights[l], Some(&self.biases[l]));
            let post = pre
                .iter()
                .map(|&v| self.config.activation.apply(v))
                .collect();
            pre_activations.push(pre);
            post_activations.push(post);
        }
        let outputs = affine(
            &post_activations[hidden - 1],
            &self.weights[hidden],
            self.output_bias.as_deref(),
        );
        Ok(ForwardTrace {
            input: input.to_vec(),
            pre_activations,
            post_activations,
            outputs,
        })
    }

    /// Summands `Y_i = X_i · w^(L)_{i,j}` of output `j` (0-based), so that
    /// `outputs[j] = (1/√d_L) Σ_i Y_i` (plus the output bias, if any).
    pub fn last_layer_terms(&self, input: &[f64], j: usize) -> Result<Vec<f64>> {
        self.config.check_output(j)?;
        let trace = self.forward(input)?;
        let w = &self.weights[self.config.depth()];
        Ok(trace
            .last_hidden()
            .iter()
            .enumerate()
            .map(|(i, x)| x * w.get(i, j))
            .collect())
    }

    /// `Var(w^(L)) · (1/d_L) Σ_i X_i²`: the exact variance of every output
    /// given the last hidden activations.
    pub fn conditional_variance(&self, input: &[f64]) -> Result<f64> {
        if self.output_bias.is_some() {
            return Err(Error::InvalidNetwork(
                "conditional variance is defined for bias-free outputs".into(),
            ));
        }
        let trace = self.forward(input)?;
        let x = trace.last_hidden();
        let mean_sq = crate::numeric::sum(x.iter().map(|v| v * v)) / x.len() as f64;
        Ok(self.config.last_weight_spec().variance() * mean_sq)
    }

    /// Text dump: a header describing shapes and laws followed by row-major
    /// entries. See [`Network::from_text`].
    pub fn to_text(&self) -> String {
        let cfg = &self.config;
        let mut out = String::new();
        let join = |v: &mut String, xs: &[f64]| {
            for (k, x) in xs.iter().enumerate() {
                if k > 0 {
                    v.push(' ');
                }
                let _ = write!(v, "{x:e}");
            }
            v.push('\n');
        };
        out.push_str("mixlimit-network 1\n");
        let widths: Vec<String> = cfg.widths.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "widths {}", widths.join(" "));
        let _ = writeln!(out, "activation {}", cfg.activation);
        match &self.seed {
            Some(s) => {
                let _ = writeln!(out, "seed {s}");
            }
            None => out.push_str("seed none\n"),
        }
        for (l, spec) in cfg.weight_specs.iter().enumerate() {
            let _ = writeln!(out, "weight_spec {l} {spec}");
        }
        for (l, spec) in cfg.bias_specs.iter().enumerate() {
            let _ = writeln!(out, "bias_spec {l} {spec}");
        }
        match &cfg.output_bias {
            Some(spec) => {
                let _ = writeln!(out, "output_bias_spec {spec}");
            }
            None => out.push_str("output_bias_spec none\n"),
        }
        for (l, w) in self.weights.iter().enumerate() {
            let _ = writeln!(out, "weights {l} {} {}", w.rows, w.cols);
            for i in 0..w.rows {
                join(&mut out, w.row(i));
            }
        }
        for (l, b) in self.biases.iter().enumerate() {
            let _ = writeln!(out, "biases {l} {}", b.len());
            join(&mut out, b);
        }
        if let Some(b) = &self.output_bias {
            let _ = writeln!(out, "output_bias {}", b.len());
            join(&mut out, b);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Parse(format!("network dump: {msg}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::Parse(format!("network dump: missing {what}")))
        };
        let header = next("header")?;
        if header.trim() != "mixlimit-network 1" {
            return Err(bad(format!("unknown header `{header}`")));
        }
        let field = |line: &str, key: &str| -> Result<String> {
            line.trim()
                .strip_prefix(key)
                .map(|rest| rest.trim().to_string())
                .ok_or_else(|| {
                    Error::Parse(format!("network dump: expected `{key}`, got `{line}`"))
                })
        };
        let parse_usize = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Parse(format!("network dump: bad integer `{s}`")))
        };
        let parse_row = |line: &str, len: usize| -> Result<Vec<f64>> {
            let row = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| Error::Parse(format!("network dump: bad number `{t}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            if row.len() != len {
                return Err(Error::Parse(format!(
                    "network dump: row has {} entries, expected {len}",
                    row.len()
                )));
            }
            Ok(row)
        };

        let widths = field(next("widths")?, "widths")?
            .split_whitespace()
            .map(parse_usize)
            .collect::<Result<Vec<_>>>()?;
        let activation: ActivationKind = field(next("activation")?, "activation")?.parse()?;
        let seed_text = field(next("seed")?, "seed")?;
        let seed = if seed_text == "none" {
            None
        } else {
            Some(seed_text.parse::<SeedPath>()?)
        };
        let hidden = widths.len().saturating_sub(2);
        let mut weight_specs = Vec::with_capacity(hidden + 1);
        for l in 0..=hidden {
            let rest = field(next("weight_spec")?, "weight_spec")?;
            let spec = rest
                .strip_prefix(&l.to_string())
                .ok_or_else(|| bad(format!("weight_spec {l} out of order")))?;
            weight_specs.push(spec.trim().parse::<DistSpec>()?);
        }
        let mut bias_specs = Vec::with_capacity(hidden);
        for l in 0..hidden {
            let rest = field(next("bias_spec")?, "bias_spec")?;
            let spec = rest
                .strip_prefix(&l.to_string())
                .ok_or_else(|| bad(format!("bias_spec {l} out of order")))?;
            bias_specs.push(spec.trim().parse::<DistSpec>()?);
        }
        let output_bias_spec = field(next("output_bias_spec")?, "output_bias_spec")?;
        let mut config = NetworkConfig::new(widths, activation, weight_specs, bias_specs)?;
        if output_bias_spec != "none" {
            config = config.with_output_bias(output_bias_spec.parse()?);
        }

        let mut weights = Vec::with_capacity(hidden + 1);
        for l in 0..=hidden {
            let dims: Vec<usize> = field(next("weights")?, "weights")?
                .split_whitespace()
                .map(parse_usize)
                .collect::<Result<_>>()?;
            if dims.len() != 3 || dims[0] != l {
                return Err(bad(format!("bad weights header for layer {l}")));
            }
            let (rows, cols) = (dims[1], dims[2]);
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                data.extend(parse_row(next("weight row")?, cols)?);
            }
            weights.push(Matrix::from_rows(rows, cols, data)?);
        }
        let mut biases = Vec::with_capacity(hidden);
        for l in 0..hidden {
            let dims: Vec<usize> = field(next("biases")?, "biases")?
                .split_whitespace()
                .map(parse_usize)
                .collect::<Result<_>>()?;
            if dims.len() != 2 || dims[0] != l {
                return Err(bad(format!("bad biases header for layer {l}")));
            }
            biases.push(parse_row(next("bias row")?, dims[1])?);
        }
        let output_bias = if config.output_bias.is_some() {
            let len = parse_usize(&field(next("output_bias")?, "output_bias")?)?;
            Some(parse_row(next("output bias row")?, len)?)
        } else {
            None
        };
        let mut net = Network::from_parts(config, weights, biases, output_bias)?;
        net.seed = seed;
        Ok(net)
    }
}

/// How the network input is chosen for each trial.
#[derive(Clone, Debug, PartialEq)]
pub enum InputPolicy {
    Fixed(Vec<f64>),
    /// Each of the `d_0` coordinates drawn from the law, per trial.
    Random(DistSpec),
}

impl InputPolicy {
    fn check(&self, config: &NetworkConfig) -> Result<()> {
        match self {
            InputPolicy::Fixed(t) => config.check_input(t),
            InputPolicy::Random(_) => Ok(()),
        }
    }

    /// Input for the trial whose network uses `trial`; random inputs come
    /// from `trial.child(0)`.
    pub fn input_for(&self, config: &NetworkConfig, trial: &SeedPath) -> Vec<f64> {
        match self {
            InputPolicy::Fixed(t) => t.clone(),
            InputPolicy::Random(law) => {
                let mut stream = trial.child(0).stream();
                let mut input = vec![0.0; config.input_dim()];
                law.fill(&mut stream, &mut input);
                input
            }
        }
    }
}

/// `n` realizations of output `j` (0-based), one freshly sampled network per
/// trial; trial `k` draws its network from `seed.child(k)`.
pub fn sample_outputs(
    config: &NetworkConfig,
    policy: &InputPolicy,
    j: usize,
    n: usize,
    seed: &SeedPath,
) -> Result<SampleSet> {
    policy.check(config)?;
    config.check_output(j)?;
    if n == 0 {
        return Err(Error::TooFewSamples {
            required: 1,
            actual: 0,
        });
    }
    let values = (0..n as u64)
        .into_par_iter()
        .map(|k| {
            let trial = seed.child(k);
            let net = Network::sample(config, &trial);
            net.forward(&policy.input_for(config, &trial))
                .map(|t| t.outputs[j])
        })
        .collect::<Result<Vec<_>>>()?;
    SampleSet::new(values, format!("output[{j}]")).map(|s| s.with_seed(seed.clone()))
}

/// [`sample_outputs`] at a fixed input.
pub fn output_samples(
    config: &NetworkConfig,
    input: &[f64],
    j: usize,
    n: usize,
    seed: &SeedPath,
) -> Result<SampleSet> {
    sample_outputs(config, &InputPolicy::Fixed(input.to_vec()), j, n, seed)
}
