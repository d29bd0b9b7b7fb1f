//! Sample sets and the estimators used by the experiments.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::{self, CompensatedSum};
use crate::random_net::{InputPolicy, Network, NetworkConfig};
use crate::rng::SeedPath;

/// Nonempty sequence of finite draws with provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    values: Vec<f64>,
    seed: Option<SeedPath>,
    label: String,
}

impl SampleSet {
    pub fn new(values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::TooFewSamples {
                required: 1,
                actual: 0,
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self {
            values,
            seed: None,
            label: label.into(),
        })
    }

    pub fn with_seed(mut self, seed: SeedPath) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn seed(&self) -> Option<&SeedPath> {
        self.seed.as_ref()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn mean(&self) -> f64 {
        numeric::mean(&self.values)
    }

    /// Single-column CSV preceded by one `#` metadata line.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 24 + 64);
        let seed = self
            .seed
            .as_ref()
            .map_or_else(|| "none".to_string(), SeedPath::to_string);
        let _ = writeln!(
            out,
            "# mixlimit-samples n={} seed={} label={}",
            self.values.len(),
            seed,
            self.label
        );
        out.push_str("value\n");
        for v in &self.values {
            let _ = writeln!(out, "{v:e}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let meta = lines
            .next()
            .and_then(|l| l.strip_prefix("# mixlimit-samples "))
            .ok_or_else(|| Error::Parse("sample csv: missing metadata line".into()))?;
        let (head, label) = meta
            .split_once(" label=")
            .ok_or_else(|| Error::Parse("sample csv: missing label".into()))?;
        let mut n = None;
        let mut seed = None;
        for kv in head.split_whitespace() {
            match kv.split_once('=') {
                Some(("n", v)) => {
                    n = Some(
                        v.parse::<usize>()
                            .map_err(|_| Error::Parse(format!("sample csv: bad count `{v}`")))?,
                    )
                }
                Some(("seed", "none")) => {}
                Some(("seed", v)) => seed = Some(v.parse::<SeedPath>()?),
                _ => return Err(Error::Parse(format!("sample csv: unknown field `{kv}`"))),
            }
        }
        if lines.next().map(str::trim) != Some("value") {
            return Err(Error::Parse("sample csv: missing `value` header".into()));
        }
        let values = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("sample csv: bad value `{l}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if n.is_some_and(|n| n != values.len()) {
            return Err(Error::Parse(format!(
                "sample csv: header says n={}, found {} values",
                n.unwrap_or(0),
                values.len()
            )));
        }
        let mut set = SampleSet::new(values, label)?;
        set.seed = seed;
        Ok(set)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum VarianceDivisor {
    /// Divide by `n`.
    #[default]
    Population,
    /// Divide by `n - 1`.
    Unbiased,
}

/// A point estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    /// `|value| / stderr`, infinite when the error is zero and the value not.
    pub fn z_score(&self) -> f64 {
        if self.stderr == 0.0 {
            if self.value == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.value.abs() / self.stderr
        }
    }
}

fn central_moment(values: &[f64], mean: f64, power: i32) -> f64 {
    numeric::sum(values.iter().map(|v| (v - mean).powi(power))) / values.len() as f64
}

pub fn variance(s: &SampleSet, divisor: VarianceDivisor) -> Result<f64> {
    let n = s.len();
    if n < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            actual: n,
        });
    }
    let m = s.mean();
    let ss = numeric::sum(s.values.iter().map(|v| (v - m) * (v - m)));
    Ok(match divisor {
        VarianceDivisor::Population => ss / n as f64,
        VarianceDivisor::Unbiased => ss / (n - 1) as f64,
    })
}

/// `(1/n) Σ (y_i - ȳ)²`.
pub fn sample_variance(s: &SampleSet) -> Result<f64> {
    variance(s, VarianceDivisor::Population)
}

fn kurtosis_of(values: &[f64]) -> Result<f64> {
    if values.len() < 4 {
        return Err(Error::TooFewSamples {
            required: 4,
            actual: values.len(),
        });
    }
    let m = numeric::mean(values);
    let m2 = central_moment(values, m, 2);
    if m2 <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let m4 = central_moment(values, m, 4);
    Ok(m4 / (m2 * m2) - 3.0)
}

/// `m4 / m2² - 3` from central sample moments.
pub fn excess_kurtosis(s: &SampleSet) -> Result<f64> {
    kurtosis_of(&s.values)
}

/// Splits `0..n` into `batches` contiguous ranges whose sizes differ by at
/// most one.
fn batch_ranges(n: usize, batches: usize) -> Vec<std::ops::Range<usize>> {
    (0..batches)
        .map(|b| (b * n / batches)..((b + 1) * n / batches))
        .collect()
}

/// Applies `stat` to the full data and to each of `batches` contiguous
/// batches; the error is the standard deviation of the batch values over
/// `√batches`.
pub fn batched_estimate<T, F>(
    data: &[T],
    batches: usize,
    min_batch: usize,
    stat: F,
) -> Result<Estimate>
where
    F: Fn(&[T]) -> Result<f64>,
{
    if batches < 2 {
        return Err(Error::Config(format!(
            "need at least 2 batches, got {batches}"
        )));
    }
    let required = batches * min_batch;
    if data.len() < required {
        return Err(Error::TooFewSamples {
            required,
            actual: data.len(),
        });
    }
    let value = stat(data)?;
    let per_batch = batch_ranges(data.len(), batches)
        .into_iter()
        .map(|r| stat(&data[r]))
        .collect::<Result<Vec<_>>>()?;
    let m = numeric::mean(&per_batch);
    let var = numeric::sum(per_batch.iter().map(|v| (v - m) * (v - m))) / (batches - 1) as f64;
    Ok(Estimate {
        value,
        stderr: (var / batches as f64).sqrt(),
    })
}

pub fn excess_kurtosis_batched(s: &SampleSet, batches: usize) -> Result<Estimate> {
    batched_estimate(&s.values, batches, 4, kurtosis_of)
}

/// Unbiased sample covariance of paired observations.
pub fn covariance(pairs: &[(f64, f64)]) -> Result<f64> {
    let n = pairs.len();
    if n < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            actual: n,
        });
    }
    let mx = numeric::sum(pairs.iter().map(|p| p.0)) / n as f64;
    let my = numeric::sum(pairs.iter().map(|p| p.1)) / n as f64;
    Ok(numeric::sum(pairs.iter().map(|(x, y)| (x - mx) * (y - my))) / (n - 1) as f64)
}

/// `(Y_1, Y_2)` (first two last-layer summands of output 0) for `n_nets`
/// independently sampled networks; network `k` uses `seed.child(k)`.
pub fn last_layer_pairs(
    config: &NetworkConfig,
    policy: &InputPolicy,
    n_nets: usize,
    seed: &SeedPath,
) -> Result<Vec<(f64, f64)>> {
    if config.last_hidden_width() < 2 {
        return Err(Error::InvalidNetwork(format!(
            "need last hidden width >= 2, got {}",
            config.last_hidden_width()
        )));
    }
    (0..n_nets as u64)
        .into_par_iter()
        .map(|k| {
            let trial = seed.child(k);
            let net = Network::sample(config, &trial);
            let y = net.last_layer_terms(&policy.input_for(config, &trial), 0)?;
            Ok((y[0], y[1]))
        })
        .collect()
}

fn squared_cov(pairs: &[(f64, f64)]) -> Result<f64> {
    let sq: Vec<(f64, f64)> = pairs.iter().map(|(a, b)| (a * a, b * b)).collect();
    covariance(&sq)
}

/// Sample covariance (divisor `n_nets - 1`) of `(Y_1², Y_2²)` over network
/// resamples at a fixed input.
pub fn cov_squared_outputs(
    config: &NetworkConfig,
    input: &[f64],
    n_nets: usize,
    seed: &SeedPath,
) -> Result<f64> {
    if n_nets < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            actual: n_nets,
        });
    }
    let pairs = last_layer_pairs(config, &InputPolicy::Fixed(input.to_vec()), n_nets, seed)?;
    squared_cov(&pairs)
}

/// [`cov_squared_outputs`] with a batch-means standard error.
pub fn cov_squared_outputs_batched(
    config: &NetworkConfig,
    policy: &InputPolicy,
    n_nets: usize,
    batches: usize,
    seed: &SeedPath,
) -> Result<Estimate> {
    if n_nets < 2 * batches.max(1) {
        return Err(Error::TooFewSamples {
            required: 2 * batches.max(1),
            actual: n_nets,
        });
    }
    let pairs = last_layer_pairs(config, policy, n_nets, seed)?;
    batched_estimate(&pairs, batches, 2, squared_cov)
}

/// `(1/n) Σ exp(i t y_k)`.
pub fn empirical_cf(s: &SampleSet, t: f64) -> Complex64 {
    let mut re = CompensatedSum::new();
    let mut im = CompensatedSum::new();
    for &y in &s.values {
        let (sin, cos) = (t * y).sin_cos();
        re.add(cos);
        im.add(sin);
    }
    let n = s.len() as f64;
    Complex64::new(re.value() / n, im.value() / n)
}

/// The 61 equispaced points on `[-3, 3]` used for CF comparisons.
pub fn cf_grid() -> Vec<f64> {
    (0..61).map(|k| -3.0 + 0.1 * k as f64).collect()
}

/// `sup_t |φ_s(t) - reference(t)|` over `grid` (complex modulus).
pub fn sup_cf_gap<F: Fn(f64) -> f64>(s: &SampleSet, reference: F, grid: &[f64]) -> f64 {
    grid.iter()
        .map(|&t| (empirical_cf(s, t) - Complex64::new(reference(t), 0.0)).norm())
        .fold(0.0, f64::max)
}

/// `sup_t |φ_a(t) - φ_b(t)|` over `grid`.
pub fn sup_cf_distance(a: &SampleSet, b: &SampleSet, grid: &[f64]) -> f64 {
    grid.iter()
        .map(|&t| (empirical_cf(a, t) - empirical_cf(b, t)).norm())
        .fold(0.0, f64::max)
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn ks_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Sup-norm distance between the two empirical CDFs (ties handled by
/// evaluating both CDFs at each distinct value).
pub fn ks_distance(xs: &SampleSet, ys: &SampleSet) -> f64 {
    ks_sorted(&sorted(&xs.values), &sorted(&ys.values))
}

/// Monte Carlo quantile of the two-sample KS statistic under the null of
/// equal continuous laws (the statistic is distribution-free there, so
/// uniform draws suffice). Replicate `r` uses `seed.child(r)`.
pub fn ks_null_quantile(
    n_a: usize,
    n_b: usize,
    q: f64,
    reps: usize,
    seed: &SeedPath,
) -> Result<f64> {
    if n_a == 0 || n_b == 0 || reps == 0 {
        return Err(Error::TooFewSamples {
            required: 1,
            actual: 0,
        });
    }
    let stats: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut s = seed.child(r).stream();
            let a: Vec<f64> = (0..n_a).map(|_| s.uniform01()).collect();
            let b: Vec<f64> = (0..n_b).map(|_| s.uniform01()).collect();
            ks_sorted(&sorted(&a), &sorted(&b))
        })
        .collect();
    Ok(numeric::quantile(&stats, q))
}

/// Equal-width histogram normalized to a density.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
    pub densities: Vec<f64>,
    /// Population standard deviation of the data.
    pub sigma_hat: f64,
    pub n: usize,
}

impl Histogram {
    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn center(&self, k: usize) -> f64 {
        self.lo + (k as f64 + 0.5) * self.bin_width()
    }

    /// Binomial standard error of bin `k`'s density.
    pub fn density_stderr(&self, k: usize) -> f64 {
        let p = self.counts[k] as f64 / self.n as f64;
        (p * (1.0 - p) / self.n as f64).sqrt() / self.bin_width()
    }
}

/// `bins` equal bins over `[-5σ̂, 5σ̂]`. A constant sample (σ̂ = 0) uses
/// `[-(1+|c|), 1+|c|]` instead so the constant still falls in a bin.
/// Values outside the range are counted in `n` but in no bin.
pub fn histogram(s: &SampleSet, bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    let sigma_hat = if s.len() < 2 {
        0.0
    } else {
        sample_variance(s)?.sqrt()
    };
    let half = if sigma_hat > 0.0 {
        5.0 * sigma_hat
    } else {
        1.0 + s.mean().abs()
    };
    let (lo, hi) = (-half, half);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in &s.values {
        if v < lo || v > hi {
            continue;
        }
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = s.len();
    let densities = counts
        .iter()
        .map(|&c| c as f64 / (n as f64 * width))
        .collect();
    Ok(Histogram {
        lo,
        hi,
        counts,
        densities,
        sigma_hat,
        n,
    })
}
