//! Centered Gaussian mixtures with a finite mixing measure over variances.
//!
//! `Z ~ Σ_k w_k N(0, v_k)`: density `Σ w_k φ_{v_k}(x)`, characteristic
//! function `Σ w_k exp(-v_k t²/2)`, `E[Z²] = Σ w_k v_k`,
//! `E[Z⁴] = 3 Σ w_k v_k²`. The mixture is Gaussian exactly when the mixing
//! measure is a point mass, i.e. when `Var(v) = 0`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::distributions::DistSpec;
use crate::error::{Error, Result};
use crate::numeric::{self, CompensatedSum};
use crate::rng::{RngStream, SeedPath};
use crate::stats::SampleSet;

const SAMPLE_CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Component {
    pub variance: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixingMeasure {
    components: Vec<Component>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixtureMoments {
    pub second: f64,
    pub fourth: f64,
}

impl MixingMeasure {
    /// `(variance, weight)` pairs. Weights must be positive and sum to one
    /// within `1e-9`. Sums off by more than `1e-12` are renormalized; closer
    /// ones are kept as given so that text encodings round-trip.
    pub fn new(components: &[(f64, f64)]) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidMixture("no components".into()));
        }
        for &(v, w) in components {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidMixture(format!(
                    "variance {v} must be finite and > 0"
                )));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidMixture(format!(
                    "weight {w} must be finite and > 0"
                )));
            }
        }
        let total = numeric::sum(components.iter().map(|c| c.1));
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidMixture(format!(
                "weights sum to {total}, not 1"
            )));
        }
        let scale = if (total - 1.0).abs() > 1e-12 {
            total
        } else {
            1.0
        };
        Ok(Self {
            components: components
                .iter()
                .map(|&(variance, w)| Component {
                    variance,
                    weight: w / scale,
                })
                .collect(),
        })
    }

    pub fn point_mass(variance: f64) -> Result<Self> {
        Self::new(&[(variance, 1.0)])
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn max_variance(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.variance)
            .fold(0.0, f64::max)
    }

    pub fn density(&self, x: f64) -> f64 {
        numeric::sum(self.components.iter().map(|c| {
            c.weight * (-x * x / (2.0 * c.variance)).exp() / (2.0 * PI * c.variance).sqrt()
        }))
    }

    /// Real-valued: the imaginary part vanishes for centered mixtures.
    pub fn cf(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 1.0;
        }
        numeric::sum(
            self.components
                .iter()
                .map(|c| c.weight * (-c.variance * t * t / 2.0).exp()),
        )
    }

    pub fn moments(&self) -> MixtureMoments {
        let second = numeric::sum(self.components.iter().map(|c| c.weight * c.variance));
        let mean_sq_var = numeric::sum(
            self.components
                .iter()
                .map(|c| c.weight * c.variance * c.variance),
        );
        MixtureMoments {
            second,
            fourth: 3.0 * mean_sq_var,
        }
    }

    /// Variance of the mixing variance, `Σ w v² - (Σ w v)²`. Zero iff the
    /// mixture is a single Gaussian.
    pub fn normality_gap(&self) -> f64 {
        let second = numeric::sum(self.components.iter().map(|c| c.weight * c.variance));
        let mean_sq_var = numeric::sum(
            self.components
                .iter()
                .map(|c| c.weight * c.variance * c.variance),
        );
        mean_sq_var - second * second
    }

    /// Population excess kurtosis `3 Var(v) / E[v]²`.
    pub fn excess_kurtosis(&self) -> f64 {
        let m = self.moments();
        3.0 * self.normality_gap() / (m.second * m.second)
    }

    /// Draws a component variance with probability equal to its weight.
    pub fn draw_variance(&self, stream: &mut RngStream) -> f64 {
        let u = stream.uniform01();
        let mut acc = 0.0;
        for c in &self.components {
            acc += c.weight;
            if u < acc {
                return c.variance;
            }
        }
        self.components[self.components.len() - 1].variance
    }

    /// `n` i.i.d. draws. Draws are produced in chunks of 4096; chunk `c`
    /// uses the stream of `seed.child(c)`.
    pub fn sample(&self, n: usize, seed: &SeedPath) -> Result<SampleSet> {
        if n == 0 {
            return Err(Error::TooFewSamples {
                required: 1,
                actual: 0,
            });
        }
        let chunks = n.div_ceil(SAMPLE_CHUNK);
        let values: Vec<f64> = (0..chunks)
            .into_par_iter()
            .flat_map_iter(|c| {
                let len = SAMPLE_CHUNK.min(n - c * SAMPLE_CHUNK);
                let mut s = seed.child(c as u64).stream();
                (0..len)
                    .map(|_| {
                        let v = self.draw_variance(&mut s);
                        v.sqrt() * s.standard_normal()
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        SampleSet::new(values, format!("mixture {self}")).map(|s| s.with_seed(seed.clone()))
    }

    /// Normalized sums `S = n^{-1/2} Σ_{i<n} X_i` of exchangeable sequences
    /// `X_i = σ_ω Z_i`: per sequence, `σ_ω²` is drawn once from the mixing
    /// measure and the `Z_i` are i.i.d. from `innovation` rescaled to unit
    /// variance. Sequence `r` uses `seed.child(r)`.
    pub fn exchangeable_sums(
        &self,
        seq_len: usize,
        n_seq: usize,
        innovation: &DistSpec,
        seed: &SeedPath,
    ) -> Result<SampleSet> {
        if seq_len == 0 || n_seq == 0 {
            return Err(Error::TooFewSamples {
                required: 1,
                actual: 0,
            });
        }
        if !innovation.is_centered() || innovation.variance() <= 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "innovation law {innovation} must be centered with positive variance"
            )));
        }
        let unit = innovation.variance().sqrt();
        let norm = (seq_len as f64).sqrt();
        let values: Vec<f64> = (0..n_seq as u64)
            .into_par_iter()
            .map(|r| {
                let mut s = seed.child(r).stream();
                let sigma = self.draw_variance(&mut s).sqrt();
                let mut acc = CompensatedSum::new();
                for _ in 0..seq_len {
                    acc.add(innovation.sample(&mut s));
                }
                sigma * acc.value() / (unit * norm)
            })
            .collect();
        SampleSet::new(values, format!("exchangeable sums n={seq_len}"))
            .map(|s| s.with_seed(seed.clone()))
    }
}

impl fmt::Display for MixingMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("mix{")?;
        for (k, c) in self.components.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}:{}", c.variance, c.weight)?;
        }
        f.write_str("}")
    }
}

impl FromStr for MixingMeasure {
    type Err = Error;

    /// `mix{variance:weight, ...}`.
    fn from_str(s: &str) -> Result<Self> {
        let body = s
            .trim()
            .strip_prefix("mix{")
            .and_then(|r| r.strip_suffix('}'))
            .ok_or_else(|| Error::Parse(format!("expected `mix{{v:w, ...}}`, got `{s}`")))?;
        let num = |x: &str| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number `{}` in `{s}`", x.trim())))
        };
        let pairs = body
            .split(',')
            .map(|item| {
                let (v, w) = item.split_once(':').ok_or_else(|| {
                    Error::Parse(format!("expected `variance:weight`, got `{item}`"))
                })?;
                Ok((num(v)?, num(w)?))
            })
            .collect::<Result<Vec<_>>>()?;
        MixingMeasure::new(&pairs)
    }
}
