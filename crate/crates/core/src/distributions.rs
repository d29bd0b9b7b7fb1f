//! Scalar laws for weights and biases, and activation functions.
//!
//! Both types have text encodings used in config files:
//! `gaussian(0,1)`, `uniform(-1,1)`, `point_mass(0)`; `relu`, `identity`,
//! `step`, `tanh`, `poly(c0,c1,...)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq)]
pub enum DistSpec {
    Gaussian {
        mean: f64,
        variance: f64,
    },
    /// Half-open `[lo, hi)`.
    Uniform {
        lo: f64,
        hi: f64,
    },
    PointMass {
        value: f64,
    },
}

impl DistSpec {
    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() || variance < 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "gaussian({mean},{variance}) needs finite mean and variance >= 0"
            )));
        }
        Ok(DistSpec::Gaussian { mean, variance })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::InvalidDistribution(format!(
                "uniform({lo},{hi}) needs finite lo < hi"
            )));
        }
        Ok(DistSpec::Uniform { lo, hi })
    }

    /// Uniform on `[-half_width, half_width)`.
    pub fn symmetric_uniform(half_width: f64) -> Result<Self> {
        Self::uniform(-half_width, half_width)
    }

    pub fn point_mass(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "point_mass({value}) needs a finite value"
            )));
        }
        Ok(DistSpec::PointMass { value })
    }

    pub fn standard_normal() -> Self {
        DistSpec::Gaussian {
            mean: 0.0,
            variance: 1.0,
        }
    }

    /// Decided from the parameters alone.
    pub fn is_centered(&self) -> bool {
        match *self {
            DistSpec::Gaussian { mean, .. } => mean == 0.0,
            DistSpec::Uniform { lo, hi } => lo == -hi,
            DistSpec::PointMass { value } => value == 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            DistSpec::Gaussian { mean, .. } => mean,
            DistSpec::Uniform { lo, hi } => 0.5 * (lo + hi),
            DistSpec::PointMass { value } => value,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            DistSpec::Gaussian { variance, .. } => variance,
            DistSpec::Uniform { lo, hi } => (hi - lo) * (hi - lo) / 12.0,
            DistSpec::PointMass { .. } => 0.0,
        }
    }

    /// One draw; advances `stream`.
    #[inline]
    pub fn sample(&self, stream: &mut RngStream) -> f64 {
        match *self {
            DistSpec::Gaussian { mean, variance } => {
                mean + variance.sqrt() * stream.standard_normal()
            }
            DistSpec::Uniform { lo, hi } => {
                let x = lo + (hi - lo) * stream.uniform01();
                // rounding can land exactly on `hi`
                if x < hi {
                    x
                } else {
                    hi.next_down()
                }
            }
            DistSpec::PointMass { value } => value,
        }
    }

    pub fn fill(&self, stream: &mut RngStream, out: &mut [f64]) {
        for x in out {
            *x = self.sample(stream);
        }
    }
}

impl fmt::Display for DistSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DistSpec::Gaussian { mean, variance } => write!(f, "gaussian({mean},{variance})"),
            DistSpec::Uniform { lo, hi } => write!(f, "uniform({lo},{hi})"),
            DistSpec::PointMass { value } => write!(f, "point_mass({value})"),
        }
    }
}

/// Splits `name(a,b,...)` into the name and parsed numeric arguments.
fn parse_call(s: &str) -> Result<(&str, Vec<f64>)> {
    let s = s.trim();
    let Some(open) = s.find('(') else {
        return Ok((s, Vec::new()));
    };
    if !s.ends_with(')') {
        return Err(Error::Parse(format!("missing `)` in `{s}`")));
    }
    let name = s[..open].trim();
    let inner = &s[open + 1..s.len() - 1];
    if inner.trim().is_empty() {
        return Ok((name, Vec::new()));
    }
    let args = inner
        .split(',')
        .map(|a| {
            a.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number `{}` in `{s}`", a.trim())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((name, args))
}

impl FromStr for DistSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = parse_call(s)?;
        match (name.to_ascii_lowercase().as_str(), args.as_slice()) {
            ("gaussian" | "normal", &[mean, variance]) => DistSpec::gaussian(mean, variance),
            ("uniform", &[lo, hi]) => DistSpec::uniform(lo, hi),
            ("point_mass" | "point", &[value]) => DistSpec::point_mass(value),
            _ => Err(Error::Parse(format!("unknown distribution `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ActivationKind {
    Relu,
    Identity,
    /// `1` for `x >= 0`, else `0` (right-continuous at the jump).
    BinaryStep,
    Tanh,
    /// `Σ coeffs[k] x^k`.
    Polynomial(Vec<f64>),
}

impl ActivationKind {
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::Identity => x,
            ActivationKind::BinaryStep => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck),
        }
    }

    /// `(degree, scale)` such that `|σ(x)| <= scale * (1 + |x|)^degree`
    /// everywhere.
    pub fn documented_envelope(&self) -> (u32, f64) {
        match self {
            ActivationKind::Relu | ActivationKind::Identity => (1, 1.0),
            ActivationKind::BinaryStep | ActivationKind::Tanh => (0, 1.0),
            ActivationKind::Polynomial(c) => {
                let degree = c.len().saturating_sub(1) as u32;
                // |Σ c_k x^k| <= Σ |c_k| |x|^k <= Σ |c_k| (1 + |x|)^degree
                let scale = c
                    .iter()
                    .map(|v| v.abs())
                    .sum::<f64>()
                    .max(f64::MIN_POSITIVE);
                (degree, scale)
            }
        }
    }

    /// True iff `|σ(x)| <= scale * (1 + |x|)^degree` at every grid point.
    pub fn envelope_check(&self, degree: u32, scale: f64, grid: &[f64]) -> bool {
        grid.iter()
            .all(|&x| self.apply(x).abs() <= scale * (1.0 + x.abs()).powi(degree as i32))
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActivationKind::Relu => f.write_str("relu"),
            ActivationKind::Identity => f.write_str("identity"),
            ActivationKind::BinaryStep => f.write_str("step"),
            ActivationKind::Tanh => f.write_str("tanh"),
            ActivationKind::Polynomial(c) => {
                f.write_str("poly(")?;
                for (k, v) in c.iter().enumerate() {
                    if k > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = parse_call(s)?;
        match name.to_ascii_lowercase().as_str() {
            "relu" if args.is_empty() => Ok(ActivationKind::Relu),
            "identity" | "linear" if args.is_empty() => Ok(ActivationKind::Identity),
            "step" | "binary_step" if args.is_empty() => Ok(ActivationKind::BinaryStep),
            "tanh" if args.is_empty() => Ok(ActivationKind::Tanh),
            "poly" | "polynomial" if !args.is_empty() => {
                if args.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Parse(format!("non-finite coefficient in `{s}`")));
                }
                Ok(ActivationKind::Polynomial(args))
            }
            _ => Err(Error::Parse(format!("unknown activation `{s}`"))),
        }
    }
}
