//! Deterministic experiment sweeps.
//!
//! A [`SweepConfig`] names an experiment, a grid of width tuples and sample
//! sizes. [`run`] evaluates every (grid cell, repeat) pair, possibly in
//! parallel, and returns [`SweepRow`]s ordered by cell, then repeat, then
//! statistic. Each pair draws all of its randomness from
//! `SeedPath(root_seed) / experiment tag / cell / repeat`, so the rows do not
//! depend on the thread count and a single pair can be replayed on its own.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::config::{self, Entries};
use crate::distributions::{ActivationKind, DistSpec};
use crate::error::{Error, Result};
use crate::gaussian_mixture::MixingMeasure;
use crate::mmd::{self, MmdOptions};
use crate::random_net::{self, InputPolicy, Network, NetworkConfig};
use crate::rng::SeedPath;
use crate::stats::{self, SampleSet, VarianceDivisor};

/// Largest sample size accepted by `mmd_sweep`; the kernel data term costs
/// `n²/2` exponentials per evaluation.
pub const MAX_MMD_SAMPLES: usize = 20_000;

/// Path index (under the experiment tag) of the shared KS null calibration.
const NULL_STREAM: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Experiment {
    MmdSweep,
    CovSweep,
    Histogram,
    OracleCheck,
    CltCheck,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::MmdSweep,
        Experiment::CovSweep,
        Experiment::Histogram,
        Experiment::OracleCheck,
        Experiment::CltCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::MmdSweep => "mmd_sweep",
            Experiment::CovSweep => "cov_sweep",
            Experiment::Histogram => "histogram",
            Experiment::OracleCheck => "oracle_check",
            Experiment::CltCheck => "clt_check",
        }
    }

    /// First seed-path index below the root seed.
    pub fn tag(self) -> u64 {
        match self {
            Experiment::MmdSweep => 1,
            Experiment::CovSweep => 2,
            Experiment::Histogram => 3,
            Experiment::OracleCheck => 4,
            Experiment::CltCheck => 5,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|e| e.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

/// How weight and bias laws are chosen for each grid cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitScheme {
    /// [`NetworkConfig::shared_uniform`].
    SharedUniform,
    /// [`NetworkConfig::fan_in`].
    FanIn,
    /// The `weights`, `biases` and `last_weights` keys (standard normal
    /// when unset).
    Explicit,
}

impl FromStr for InitScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "shared_uniform" => Ok(InitScheme::SharedUniform),
            "fan_in" => Ok(InitScheme::FanIn),
            "explicit" => Ok(InitScheme::Explicit),
            _ => Err(Error::Config(format!(
                "unknown init `{s}` (expected shared_uniform, fan_in or explicit)"
            ))),
        }
    }
}

impl fmt::Display for InitScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitScheme::SharedUniform => "shared_uniform",
            InitScheme::FanIn => "fan_in",
            InitScheme::Explicit => "explicit",
        })
    }
}

/// One grid point: hidden widths `(d_1, ..., d_L)`, or for `clt_check` the
/// single sequence length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridCell {
    pub series: String,
    pub widths: Vec<usize>,
}

impl GridCell {
    pub fn label(&self) -> String {
        widths_label(&self.widths)
    }
}

fn widths_label(widths: &[usize]) -> String {
    widths
        .iter()
        .map(|w| w.to_string())
        .collect::<Vec<_>>()
        .join("x")
}

/// Parses a whitespace-separated grid.
///
/// Each token is a product of factors joined by `x`; a factor is a number or
/// a braced list, so `1x1x{2,8}` is the two cells `1x1x2` and `1x1x8`.
/// A token may carry a series label, `name:1x{1,4}x2`; unlabeled tokens
/// belong to series `grid`. The shorthand `axes(v1,...)` expands to the
/// three series `d1:{v..}x1x2`, `d2:1x{v..}x2` and `d12` with `d_1 = d_2`;
/// `axes(...)xK` uses last width `K` instead of 2.
pub fn parse_grid(text: &str) -> Result<Vec<GridCell>> {
    let mut cells = Vec::new();
    for token in text.split_whitespace() {
        if let Some(rest) = token.strip_prefix("axes(") {
            let (list, last) = rest
                .split_once(')')
                .ok_or_else(|| Error::Config(format!("unclosed `axes(` in `{token}`")))?;
            let values = parse_width_list(list)?;
            let last = match last {
                "" => 2,
                s => parse_width(s.strip_prefix('x').ok_or_else(|| {
                    Error::Config(format!("expected `x<width>` after axes(...), got `{s}`"))
                })?)?,
            };
            for (series, f) in [
                ("d1", (|v| vec![v, 1]) as fn(usize) -> Vec<usize>),
                ("d2", |v| vec![1, v]),
                ("d12", |v| vec![v, v]),
            ] {
                for &v in &values {
                    let mut widths = f(v);
                    widths.push(last);
                    cells.push(GridCell {
                        series: series.into(),
                        widths,
                    });
                }
            }
            continue;
        }
        let (series, body) = match token.split_once(':') {
            Some((s, b)) => {
                if s.is_empty() || !s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(Error::Config(format!("bad series label `{s}`")));
                }
                (s, b)
            }
            None => ("grid", token),
        };
        let mut product: Vec<Vec<usize>> = vec![Vec::new()];
        for factor in split_factors(body)? {
            let choices = match factor.strip_prefix('{') {
                Some(inner) => parse_width_list(
                    inner
                        .strip_suffix('}')
                        .ok_or_else(|| Error::Config(format!("unclosed brace in `{token}`")))?,
                )?,
                None => vec![parse_width(factor)?],
            };
            product = product
                .into_iter()
                .flat_map(|prefix| {
                    choices.iter().map(move |&c| {
                        let mut p = prefix.clone();
                        p.push(c);
                        p
                    })
                })
                .collect();
        }
        cells.extend(product.into_iter().map(|widths| GridCell {
            series: series.into(),
            widths,
        }));
    }
    if cells.is_empty() {
        return Err(Error::Config("grid is empty".into()));
    }
    Ok(cells)
}

/// Splits on `x` outside braces.
fn split_factors(body: &str) -> Result<Vec<&str>> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    for (i, c) in body.char_indices() {
        match c {
            '{' => depth += 1,
            '}' => {
                depth = depth
                    .checked_sub(1)
                    .ok_or_else(|| Error::Config(format!("unbalanced braces in `{body}`")))?
            }
            'x' if depth == 0 => {
                out.push(&body[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&body[start..]);
    if out.iter().any(|f| f.is_empty()) {
        return Err(Error::Config(format!("empty factor in `{body}`")));
    }
    Ok(out)
}

fn parse_width(s: &str) -> Result<usize> {
    match s.trim().parse::<usize>() {
        Ok(w) if w >= 1 => Ok(w),
        _ => Err(Error::Config(format!(
            "bad width `{s}` (need an integer >= 1)"
        ))),
    }
}

fn parse_width_list(s: &str) -> Result<Vec<usize>> {
    s.split(',').map(parse_width).collect()
}

/// A complete experiment description. Build one with
/// [`SweepConfig::defaults`] or [`SweepConfig::from_text`].
#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub experiment: Experiment,
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: ActivationKind,
    pub init: InitScheme,
    /// Hidden-layer weight law under [`InitScheme::Explicit`].
    pub weights: Option<DistSpec>,
    /// Hidden bias law; replaces the preset's bias law under any scheme.
    pub biases: Option<DistSpec>,
    /// Last-layer weight law under [`InitScheme::Explicit`]; defaults to
    /// `weights`.
    pub last_weights: Option<DistSpec>,
    pub output_bias: Option<DistSpec>,
    pub grid: Vec<GridCell>,
    pub n_samples: usize,
    pub n_repeats: usize,
    pub root_seed: u64,
    pub output_path: Option<String>,
    /// Input used when `fixed_input` is set; defaults to all ones.
    pub input: Option<Vec<f64>>,
    /// When false, each trial draws its input i.i.d. `N(0, 1)`.
    pub fixed_input: bool,
    pub variance_divisor: VarianceDivisor,
    pub center_mean: bool,
    pub mixture: MixingMeasure,
    pub innovation: DistSpec,
    pub batches: usize,
    pub output_index: usize,
    pub null_reps: usize,
    pub bins: usize,
}

const KEYS: &[&str] = &[
    "experiment",
    "input_dim",
    "output_dim",
    "activation",
    "init",
    "weights",
    "biases",
    "last_weights",
    "output_bias",
    "grid",
    "n_samples",
    "n_repeats",
    "root_seed",
    "output_path",
    "input",
    "fixed_input",
    "variance_divisor",
    "center_mean",
    "mixture",
    "innovation",
    "batches",
    "output_index",
    "null_reps",
    "bins",
];

impl SweepConfig {
    /// Known configuration keys.
    pub fn keys() -> &'static [&'static str] {
        KEYS
    }

    pub fn defaults(experiment: Experiment) -> Self {
        let grid = match experiment {
            Experiment::MmdSweep => "d3:1x1x{2,8,32,128,512}",
            Experiment::CovSweep => "axes(1,4,16,64,256)",
            Experiment::Histogram => "{1,10,100}x{1,10,100}x{1,10,100}",
            Experiment::OracleCheck => "3x2x5x2 3x2x5x32",
            Experiment::CltCheck => "n:{8,64,512,2048}",
        };
        let (n_samples, n_repeats) = match experiment {
            Experiment::MmdSweep => (2000, 20),
            Experiment::CovSweep => (1000, 1),
            Experiment::Histogram => (10_000, 1),
            Experiment::OracleCheck => (10_000, 20),
            Experiment::CltCheck => (100_000, 1),
        };
        let explicit = experiment == Experiment::OracleCheck;
        Self {
            experiment,
            input_dim: 1,
            output_dim: 1,
            activation: ActivationKind::Relu,
            init: if explicit {
                InitScheme::Explicit
            } else {
                InitScheme::SharedUniform
            },
            weights: None,
            biases: None,
            last_weights: None,
            output_bias: None,
            grid: parse_grid(grid).expect("default grid parses"),
            n_samples,
            n_repeats,
            root_seed: 1,
            output_path: None,
            input: None,
            fixed_input: experiment != Experiment::MmdSweep,
            variance_divisor: VarianceDivisor::Population,
            center_mean: false,
            mixture: MixingMeasure::new(&[(1.0, 0.5), (4.0, 0.5)]).expect("default mixture"),
            innovation: DistSpec::standard_normal(),
            batches: 20,
            output_index: 0,
            null_reps: 1000,
            bins: 81,
        }
    }

    /// Defaults for `experiment`, then the entries of `text`, then each
    /// `key=value` override in order. The result is validated.
    pub fn from_text(experiment: Experiment, text: &str, overrides: &[String]) -> Result<Self> {
        let mut entries = Entries::parse(text)?;
        for o in overrides {
            entries.apply_override(o)?;
        }
        Self::from_entries(experiment, &entries)
    }

    pub fn from_entries(experiment: Experiment, entries: &Entries) -> Result<Self> {
        let mut cfg = Self::defaults(experiment);
        for (k, v) in entries.iter() {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let ctx = |e: Error| Error::Config(format!("{key}: {e}"));
        match key {
            "experiment" => {
                let e: Experiment = value.parse()?;
                if e != self.experiment {
                    return Err(Error::Config(format!(
                        "config is for `{e}` but `{}` was requested",
                        self.experiment
                    )));
                }
            }
            "input_dim" => self.input_dim = config::parse_num(key, value)?,
            "output_dim" => self.output_dim = config::parse_num(key, value)?,
            "activation" => self.activation = value.parse().map_err(ctx)?,
            "init" => self.init = value.parse()?,
            "weights" => self.weights = Some(value.parse().map_err(ctx)?),
            "biases" => self.biases = Some(value.parse().map_err(ctx)?),
            "last_weights" => self.last_weights = Some(value.parse().map_err(ctx)?),
            "output_bias" => {
                self.output_bias = match value {
                    "none" | "" => None,
                    v => Some(v.parse().map_err(ctx)?),
                }
            }
            "grid" => self.grid = parse_grid(value)?,
            "n_samples" => self.n_samples = config::parse_num(key, value)?,
            "n_repeats" => self.n_repeats = config::parse_num(key, value)?,
            "root_seed" => self.root_seed = config::parse_num(key, value)?,
            "output_path" => {
                self.output_path = match value {
                    "" | "-" => None,
                    v => Some(v.to_string()),
                }
            }
            "input" => self.input = Some(config::parse_vector(key, value)?),
            "fixed_input" => self.fixed_input = config::parse_bool(key, value)?,
            "variance_divisor" => {
                self.variance_divisor = match value {
                    "population" | "n" => VarianceDivisor::Population,
                    "unbiased" | "n-1" => VarianceDivisor::Unbiased,
                    _ => {
                        return Err(Error::Config(format!(
                            "{key}: expected population or unbiased, got `{value}`"
                        )))
                    }
                }
            }
            "center_mean" => self.center_mean = config::parse_bool(key, value)?,
            "mixture" => self.mixture = value.parse().map_err(ctx)?,
            "innovation" => self.innovation = value.parse().map_err(ctx)?,
            "batches" => self.batches = config::parse_num(key, value)?,
            "output_index" => self.output_index = config::parse_num(key, value)?,
            "null_reps" => self.null_reps = config::parse_num(key, value)?,
            "bins" => self.bins = config::parse_num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.grid.is_empty() {
            return err("grid is empty".into());
        }
        if self.n_samples < 2 {
            return err(format!("n_samples must be >= 2, got {}", self.n_samples));
        }
        if self.n_repeats == 0 {
            return err("n_repeats must be >= 1".into());
        }
        if self.input_dim == 0 || self.output_dim == 0 {
            return err("input_dim and output_dim must be >= 1".into());
        }
        if self.output_index >= self.output_dim {
            return err(format!(
                "output_index {} out of range for output_dim {}",
                self.output_index, self.output_dim
            ));
        }
        if let Some(t) = &self.input {
            if t.len() != self.input_dim {
                return err(format!(
                    "input has {} entries but input_dim is {}",
                    t.len(),
                    self.input_dim
                ));
            }
        }
        if self.init != InitScheme::Explicit
            && (self.weights.is_some() || self.last_weights.is_some())
        {
            return err(format!(
                "weights/last_weights need init = explicit (init is {})",
                self.init
            ));
        }
        match self.experiment {
            Experiment::CovSweep | Experiment::OracleCheck | Experiment::CltCheck
                if self.batches < 2 =>
            {
                return err(format!("batches must be >= 2, got {}", self.batches));
            }
            _ => {}
        }
        match self.experiment {
            Experiment::CovSweep => {
                if self.n_samples < 2 * self.batches {
                    return err(format!(
                        "n_samples = {} is too small for a {}-batch standard error (need >= {})",
                        self.n_samples,
                        self.batches,
                        2 * self.batches
                    ));
                }
                if let Some(c) = self.grid.iter().find(|c| c.widths.last() != Some(&2)) {
                    return err(format!(
                        "cov_sweep needs last hidden width 2, cell {} has {}",
                        c.label(),
                        c.widths.last().unwrap_or(&0)
                    ));
                }
            }
            Experiment::OracleCheck | Experiment::CltCheck => {
                if self.n_samples < 4 * self.batches {
                    return err(format!(
                        "n_samples = {} is too small for a {}-batch kurtosis error (need >= {})",
                        self.n_samples,
                        self.batches,
                        4 * self.batches
                    ));
                }
                if self.experiment == Experiment::OracleCheck && self.null_reps == 0 {
                    return err("null_reps must be >= 1".into());
                }
            }
            Experiment::MmdSweep if self.n_samples > MAX_MMD_SAMPLES => {
                return err(format!(
                    "n_samples = {} exceeds the MMD limit of {MAX_MMD_SAMPLES} (cost grows as n²)",
                    self.n_samples
                ));
            }
            Experiment::Histogram if self.bins == 0 => return err("bins must be >= 1".into()),
            _ => {}
        }
        if self.experiment == Experiment::CltCheck {
            if let Some(c) = self.grid.iter().find(|c| c.widths.len() != 1) {
                return err(format!(
                    "clt_check grid cells are single sequence lengths, got {}",
                    c.label()
                ));
            }
            if !self.innovation.is_centered() || self.innovation.variance() <= 0.0 {
                return err(format!(
                    "innovation {} must be centered with positive variance",
                    self.innovation
                ));
            }
        } else {
            for cell in &self.grid {
                self.network_config(&cell.widths)?;
            }
            if self.experiment == Experiment::OracleCheck {
                self.oracle_last_variance()?;
            }
        }
        Ok(())
    }

    /// Network for hidden widths `hidden` under this config.
    pub fn network_config(&self, hidden: &[usize]) -> Result<NetworkConfig> {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(self.input_dim);
        widths.extend_from_slice(hidden);
        widths.push(self.output_dim);
        let act = self.activation.clone();
        let cfg = match self.init {
            InitScheme::SharedUniform | InitScheme::FanIn => {
                let cfg = if self.init == InitScheme::SharedUniform {
                    NetworkConfig::shared_uniform(widths, act)?
                } else {
                    NetworkConfig::fan_in(widths, act)?
                };
                match &self.biases {
                    Some(b) => cfg.with_bias_law(b.clone()),
                    None => cfg,
                }
            }
            InitScheme::Explicit => {
                let w = self
                    .weights
                    .clone()
                    .unwrap_or_else(DistSpec::standard_normal);
                let b = self
                    .biases
                    .clone()
                    .unwrap_or_else(DistSpec::standard_normal);
                let last = self.last_weights.clone().unwrap_or_else(|| w.clone());
                let hidden_layers = hidden.len();
                let mut weight_specs = vec![w; hidden_layers];
                weight_specs.push(last);
                NetworkConfig::new(widths, act, weight_specs, vec![b; hidden_layers])?
            }
        };
        Ok(match &self.output_bias {
            Some(b) => cfg.with_output_bias(b.clone()),
            None => cfg,
        })
    }

    pub fn fixed_input_vector(&self) -> Vec<f64> {
        self.input
            .clone()
            .unwrap_or_else(|| vec![1.0; self.input_dim])
    }

    pub fn input_policy(&self) -> InputPolicy {
        if self.fixed_input {
            InputPolicy::Fixed(self.fixed_input_vector())
        } else {
            InputPolicy::Random(DistSpec::standard_normal())
        }
    }

    pub fn mmd_options(&self) -> MmdOptions {
        MmdOptions {
            divisor: self.variance_divisor,
            center_mean: self.center_mean,
        }
    }

    /// Seed of one (cell, repeat) pair.
    pub fn cell_seed(&self, cell: usize, repeat: usize) -> SeedPath {
        SeedPath::new(self.root_seed)
            .child(self.experiment.tag())
            .child(cell as u64)
            .child(repeat as u64)
    }

    /// All (cell, repeat) pairs in output order.
    pub fn jobs(&self) -> Vec<(usize, usize)> {
        (0..self.grid.len())
            .flat_map(|c| (0..self.n_repeats).map(move |r| (c, r)))
            .collect()
    }

    /// Variance of the Gaussian last-layer law required by the oracle.
    fn oracle_last_variance(&self) -> Result<f64> {
        if self.output_bias.is_some() {
            return Err(Error::Config(
                "oracle_check needs a network without output bias".into(),
            ));
        }
        let cfg = self.network_config(&self.grid[0].widths)?;
        match cfg.last_weight_spec() {
            DistSpec::Gaussian { mean, variance } if *mean == 0.0 => Ok(*variance),
            other => Err(Error::Config(format!(
                "oracle_check needs gaussian(0, v) last-layer weights, got {other}"
            ))),
        }
    }
}

/// One output line.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub experiment: Experiment,
    pub series: String,
    pub cell: usize,
    pub widths: Vec<usize>,
    pub repeat: usize,
    pub statistic: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub n: usize,
    pub seed: SeedPath,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str =
        "experiment,series,cell,widths,repeat,statistic,value,stderr,n,seed";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.experiment,
            self.series,
            self.cell,
            widths_label(&self.widths),
            self.repeat,
            self.statistic,
            format_decimal(self.value),
            self.stderr.map(format_decimal).unwrap_or_default(),
            self.n,
            self.seed
        )
    }

    pub fn from_csv(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim_end_matches(['\r', '\n']).split(',').collect();
        if f.len() != 10 {
            return Err(Error::Parse(format!(
                "expected 10 fields, got {} in `{line}`",
                f.len()
            )));
        }
        let int = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad integer `{s}`")))
        };
        let real = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number `{s}`")))
        };
        Ok(Self {
            experiment: f[0].parse()?,
            series: f[1].to_string(),
            cell: int(f[2])?,
            widths: f[3].split('x').map(int).collect::<Result<_>>()?,
            repeat: int(f[4])?,
            statistic: f[5].to_string(),
            value: real(f[6])?,
            stderr: if f[7].is_empty() {
                None
            } else {
                Some(real(f[7])?)
            },
            n: int(f[8])?,
            seed: f[9].parse()?,
        })
    }
}

/// Positional decimal with 17 significant digits, enough to round-trip any
/// `f64`. Zero is written as `0`.
pub fn format_decimal(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.16e}");
    let exp: i32 = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse().ok())
        .unwrap_or(0);
    let prec = (16 - exp).max(0) as usize;
    format!("{v:.prec$}")
}

pub fn write_csv<W: Write>(rows: &[SweepRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{}", SweepRow::CSV_HEADER)?;
    for row in rows {
        writeln!(out, "{}", row.to_csv())?;
    }
    Ok(())
}

pub fn to_csv_string(rows: &[SweepRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("csv is ascii")
}

pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == SweepRow::CSV_HEADER => {}
        other => {
            return Err(Error::Parse(format!(
                "expected header `{}`, got {other:?}",
                SweepRow::CSV_HEADER
            )))
        }
    }
    lines
        .filter(|l| !l.is_empty())
        .map(SweepRow::from_csv)
        .collect()
}

struct Stat {
    name: String,
    value: f64,
    stderr: Option<f64>,
}

impl Stat {
    fn plain(name: impl Into<String>, value: f64) -> Self {
        Self {
            name: name.into(),
            value,
            stderr: None,
        }
    }

    fn with_error(name: impl Into<String>, est: stats::Estimate) -> Self {
        Self {
            name: name.into(),
            value: est.value,
            stderr: Some(est.stderr),
        }
    }
}

/// Runs every (cell, repeat) pair, or only `replay` when given.
pub fn run(cfg: &SweepConfig, replay: Option<(usize, usize)>) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let jobs = match replay {
        Some((cell, rep)) => {
            if cell >= cfg.grid.len() {
                return Err(Error::Config(format!(
                    "replay cell {cell} out of range ({} cells)",
                    cfg.grid.len()
                )));
            }
            if rep >= cfg.n_repeats {
                return Err(Error::Config(format!(
                    "replay repeat {rep} out of range ({} repeats)",
                    cfg.n_repeats
                )));
            }
            vec![(cell, rep)]
        }
        None => cfg.jobs(),
    };
    let ks_null = match cfg.experiment {
        Experiment::OracleCheck => Some(stats::ks_null_quantile(
            cfg.n_samples,
            cfg.n_samples,
            0.99,
            cfg.null_reps,
            &SeedPath::new(cfg.root_seed)
                .child(cfg.experiment.tag())
                .child(NULL_STREAM),
        )?),
        _ => None,
    };
    let results: Vec<Result<Vec<SweepRow>>> = jobs
        .par_iter()
        .map(|&(cell, rep)| run_job(cfg, cell, rep, ks_null))
        .collect();
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(rows)
}

fn expect_experiment(cfg: &SweepConfig, e: Experiment) -> Result<()> {
    if cfg.experiment != e {
        return Err(Error::Config(format!(
            "expected a {e} config, got {}",
            cfg.experiment
        )));
    }
    Ok(())
}

/// Output MMD against the fitted Gaussian, per width tuple.
pub fn run_mmd_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    expect_experiment(cfg, Experiment::MmdSweep)?;
    run(cfg, None)
}

/// `Cov(Y_1², Y_2²)` with a batch-means standard error, per width tuple.
pub fn run_cov_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    expect_experiment(cfg, Experiment::CovSweep)?;
    run(cfg, None)
}

/// Output density on `bins` equal bins over `[-5σ̂, 5σ̂]`, per width tuple.
pub fn run_histogram(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    expect_experiment(cfg, Experiment::Histogram)?;
    run(cfg, None)
}

/// Realized outputs against draws from their exact conditional Gaussian law.
pub fn run_oracle_check(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    expect_experiment(cfg, Experiment::OracleCheck)?;
    run(cfg, None)
}

/// Normalized exchangeable sums against the limiting Gaussian mixture.
pub fn run_clt_check(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    expect_experiment(cfg, Experiment::CltCheck)?;
    run(cfg, None)
}

fn run_job(
    cfg: &SweepConfig,
    cell: usize,
    rep: usize,
    ks_null: Option<f64>,
) -> Result<Vec<SweepRow>> {
    let grid_cell = &cfg.grid[cell];
    let seed = cfg.cell_seed(cell, rep);
    let computed = match cfg.experiment {
        Experiment::MmdSweep => mmd_cell(cfg, &grid_cell.widths, &seed),
        Experiment::CovSweep => cov_cell(cfg, &grid_cell.widths, &seed),
        Experiment::Histogram => histogram_cell(cfg, &grid_cell.widths, &seed),
        Experiment::OracleCheck => {
            oracle_cell(cfg, &grid_cell.widths, &seed, ks_null.unwrap_or(f64::NAN))
        }
        Experiment::CltCheck => clt_cell(cfg, grid_cell.widths[0], &seed),
    };
    let stats = computed.map_err(|e| Error::Cell {
        cell,
        widths: grid_cell.label(),
        source: Box::new(e),
    })?;
    stats
        .into_iter()
        .map(|s| {
            if !s.value.is_finite() || s.stderr.is_some_and(|e| !e.is_finite()) {
                return Err(Error::NumericalFailure {
                    statistic: s.name,
                    cell,
                    repeat: rep,
                });
            }
            Ok(SweepRow {
                experiment: cfg.experiment,
                series: grid_cell.series.clone(),
                cell,
                widths: grid_cell.widths.clone(),
                repeat: rep,
                statistic: s.name,
                value: s.value,
                stderr: s.stderr,
                n: cfg.n_samples,
                seed: seed.clone(),
            })
        })
        .collect()
}

fn outputs(cfg: &SweepConfig, hidden: &[usize], seed: &SeedPath) -> Result<SampleSet> {
    let net = cfg.network_config(hidden)?;
    random_net::sample_outputs(
        &net,
        &cfg.input_policy(),
        cfg.output_index,
        cfg.n_samples,
        &seed.child(0),
    )
}

fn mmd_cell(cfg: &SweepConfig, hidden: &[usize], seed: &SeedPath) -> Result<Vec<Stat>> {
    let samples = outputs(cfg, hidden, seed)?;
    let r = mmd::mmd_sq_vs_fitted_gaussian_with(&samples, cfg.mmd_options())?;
    Ok(vec![
        Stat::plain("mmd_sq", r.mmd_sq),
        Stat::plain("sigma_sq", r.sigma_sq),
        Stat::plain("term_self", r.term_self),
        Stat::plain("term_cross", r.term_cross),
        Stat::plain("term_data", r.term_data),
    ])
}

fn cov_cell(cfg: &SweepConfig, hidden: &[usize], seed: &SeedPath) -> Result<Vec<Stat>> {
    let net = cfg.network_config(hidden)?;
    let est = stats::cov_squared_outputs_batched(
        &net,
        &cfg.input_policy(),
        cfg.n_samples,
        cfg.batches,
        &seed.child(0),
    )?;
    Ok(vec![Stat::with_error("cov_sq", est)])
}

fn histogram_cell(cfg: &SweepConfig, hidden: &[usize], seed: &SeedPath) -> Result<Vec<Stat>> {
    let samples = outputs(cfg, hidden, seed)?;
    let h = stats::histogram(&samples, cfg.bins)?;
    let digits = (cfg.bins - 1).to_string().len().max(2);
    let mut out = vec![
        Stat::plain("sigma_hat", h.sigma_hat),
        Stat::plain("range_lo", h.lo),
        Stat::plain("range_hi", h.hi),
    ];
    for k in 0..h.counts.len() {
        out.push(Stat::with_error(
            format!("bin_{k:0digits$}"),
            stats::Estimate {
                value: h.densities[k],
                stderr: h.density_stderr(k),
            },
        ));
    }
    Ok(out)
}

fn oracle_cell(
    cfg: &SweepConfig,
    hidden: &[usize],
    seed: &SeedPath,
    ks_p99: f64,
) -> Result<Vec<Stat>> {
    let net_cfg = cfg.network_config(hidden)?;
    let policy = cfg.input_policy();
    let j = cfg.output_index;
    let trials = seed.child(0);
    let pairs = (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|k| {
            let trial = trials.child(k);
            let net = Network::sample(&net_cfg, &trial);
            let input = policy.input_for(&net_cfg, &trial);
            let realized = net.forward(&input)?.outputs[j];
            let sd = net.conditional_variance(&input)?.sqrt();
            let oracle = sd * trial.child(1).stream().standard_normal();
            Ok((realized, oracle))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let a = SampleSet::new(a, "outputs")?;
    let b = SampleSet::new(b, "oracle")?;
    Ok(vec![
        Stat::plain("ks_distance", stats::ks_distance(&a, &b)),
        Stat::plain("ks_null_p99", ks_p99),
        Stat::with_error(
            "excess_kurtosis_outputs",
            stats::excess_kurtosis_batched(&a, cfg.batches)?,
        ),
        Stat::with_error(
            "excess_kurtosis_oracle",
            stats::excess_kurtosis_batched(&b, cfg.batches)?,
        ),
    ])
}

fn clt_cell(cfg: &SweepConfig, seq_len: usize, seed: &SeedPath) -> Result<Vec<Stat>> {
    let mix = &cfg.mixture;
    let sums = mix.exchangeable_sums(seq_len, cfg.n_samples, &cfg.innovation, &seed.child(0))?;
    let gap = stats::sup_cf_gap(&sums, |t| mix.cf(t), &stats::cf_grid());
    Ok(vec![
        Stat::plain("cf_gap", gap),
        Stat::with_error(
            "excess_kurtosis",
            stats::excess_kurtosis_batched(&sums, cfg.batches)?,
        ),
        Stat::plain("excess_kurtosis_analytic", mix.excess_kurtosis()),
    ])
}
