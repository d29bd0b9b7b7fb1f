//! Hierarchical seeding.
//!
//! A [`SeedPath`] is a 64-bit root seed plus a path of 64-bit indices, e.g.
//! `(root, experiment, cell, repeat, trial)`. Each path hashes to a 256-bit
//! ChaCha8 key, so every trial owns an independent counter-based stream and
//! results are identical however trials are spread over threads.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SeedPath {
    root: u64,
    path: Vec<u64>,
}

impl SeedPath {
    pub fn new(root: u64) -> Self {
        Self {
            root,
            path: Vec::new(),
        }
    }

    pub fn child(&self, index: u64) -> Self {
        let mut path = Vec::with_capacity(self.path.len() + 1);
        path.extend_from_slice(&self.path);
        path.push(index);
        Self {
            root: self.root,
            path,
        }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    pub fn indices(&self) -> &[u64] {
        &self.path
    }

    /// 64-bit digest of the whole path. Distinct paths give distinct keys
    /// with overwhelming probability; this is the "derived seed" written to
    /// experiment output.
    pub fn key(&self) -> u64 {
        let mut h = mix64(self.root ^ 0x6A09_E667_F3BC_C908);
        for (depth, &index) in self.path.iter().enumerate() {
            let salt = GOLDEN_GAMMA.wrapping_mul(depth as u64 + 1);
            h = mix64(h ^ mix64(index.wrapping_add(salt)));
        }
        h
    }

    pub fn stream(&self) -> RngStream {
        let mut state = self.key();
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            state = state.wrapping_add(GOLDEN_GAMMA);
            chunk.copy_from_slice(&mix64(state).to_le_bytes());
        }
        RngStream {
            rng: ChaCha8Rng::from_seed(seed),
        }
    }
}

impl fmt::Display for SeedPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.root)?;
        for i in &self.path {
            write!(f, "/{i}")?;
        }
        Ok(())
    }
}

impl FromStr for SeedPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split('/');
        let parse = |p: &str| {
            p.trim()
                .parse::<u64>()
                .map_err(|_| Error::Parse(format!("bad seed path component `{p}` in `{s}`")))
        };
        let root = parse(parts.next().unwrap_or(""))?;
        let path = parts.map(parse).collect::<Result<Vec<_>>>()?;
        Ok(Self { root, path })
    }
}

/// A single random stream. Not meant to be shared between threads; derive a
/// child [`SeedPath`] per unit of parallel work instead.
#[derive(Clone, Debug)]
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform01(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
