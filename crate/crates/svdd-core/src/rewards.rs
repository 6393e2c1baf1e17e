//! Scalar reward functions on terminal samples.
//!
//! Rewards are deterministic, total on the model's terminal space, and make
//! no differentiability assumptions; the decoders only ever query their
//! values. Each reward declares a range so reports can scale histograms;
//! unbounded ends are `+-inf` and reported raw.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::state::{Sample, TokenId};
use crate::table::Alphabet;

pub trait Reward: Send + Sync {
    fn name(&self) -> &str;

    /// Declared range `[r_min, r_max]`; ends may be infinite.
    fn range(&self) -> (f64, f64);

    fn eval(&self, x: &Sample) -> Result<f64>;

    /// Exact expected reward under a factorized per-position distribution
    /// over tokens, when the reward structure allows it. `None` means the
    /// caller must fall back to sampled decodes.
    fn factorized_mean(&self, _pos_dists: &[Vec<f64>]) -> Option<f64> {
        None
    }
}

/// Fraction of tokens belonging to a declared subset.
#[derive(Debug, Clone)]
pub struct GcContent {
    gc_set: Vec<bool>,
}

impl GcContent {
    pub fn new(k: usize, gc_set: &[TokenId]) -> Result<Self> {
        let mut set = vec![false; k];
        for &id in gc_set {
            if id as usize >= k {
                return Err(Error::invalid("gc_set token out of range"));
            }
            set[id as usize] = true;
        }
        Ok(GcContent { gc_set: set })
    }
}

impl Reward for GcContent {
    fn name(&self) -> &str {
        "gc_content"
    }

    fn range(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn eval(&self, x: &Sample) -> Result<f64> {
        let seq = x.as_seq()?;
        if seq.is_empty() {
            return Err(Error::invalid("empty sequence"));
        }
        let hits = seq.iter().filter(|&&id| self.gc_set[id as usize]).count();
        Ok(hits as f64 / seq.len() as f64)
    }

    fn factorized_mean(&self, pos_dists: &[Vec<f64>]) -> Option<f64> {
        // Position-additive: the mean is the mean of per-position hit
        // probabilities.
        let len = pos_dists.len() as f64;
        let mut total = 0.0;
        for row in pos_dists {
            total += row
                .iter()
                .enumerate()
                .filter(|(k, _)| self.gc_set[*k])
                .map(|(_, p)| p)
                .sum::<f64>();
        }
        Some(total / len)
    }
}

/// Number of (overlapping) occurrences of a motif as a contiguous
/// subsequence.
#[derive(Debug, Clone)]
pub struct MotifCount {
    motif: Vec<TokenId>,
    max_count: f64,
}

impl MotifCount {
    pub fn new(motif: Vec<TokenId>, seq_len: usize) -> Result<Self> {
        if motif.is_empty() {
            return Err(Error::invalid("empty motif"));
        }
        if motif.len() > seq_len {
            return Err(Error::invalid("motif longer than sequence"));
        }
        let max_count = (seq_len - motif.len() + 1) as f64;
        Ok(MotifCount { motif, max_count })
    }
}

impl Reward for MotifCount {
    fn name(&self) -> &str {
        "motif_count"
    }

    fn range(&self) -> (f64, f64) {
        (0.0, self.max_count)
    }

    fn eval(&self, x: &Sample) -> Result<f64> {
        let seq = x.as_seq()?;
        if self.motif.len() > seq.len() {
            return Err(Error::invalid("motif longer than sequence"));
        }
        let count = seq
            .windows(self.motif.len())
            .filter(|w| *w == self.motif.as_slice())
            .count();
        Ok(count as f64)
    }

    fn factorized_mean(&self, pos_dists: &[Vec<f64>]) -> Option<f64> {
        if self.motif.len() != 1 {
            return None;
        }
        // Single-token motifs are position-additive token counts.
        let tok = self.motif[0] as usize;
        Some(pos_dists.iter().map(|row| row[tok]).sum())
    }
}

/// Negative squared distance to a center: `-(x - c)^2`.
#[derive(Debug, Clone, Copy)]
pub struct Quadratic1d {
    center: f64,
}

impl Quadratic1d {
    pub fn new(center: f64) -> Result<Self> {
        if !center.is_finite() {
            return Err(Error::invalid("center must be finite"));
        }
        Ok(Quadratic1d { center })
    }

    pub fn center(&self) -> f64 {
        self.center
    }
}

impl Reward for Quadratic1d {
    fn name(&self) -> &str {
        "quadratic_1d"
    }

    fn range(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, 0.0)
    }

    fn eval(&self, x: &Sample) -> Result<f64> {
        let v = x.as_scalar()?;
        if !v.is_finite() {
            return Err(Error::invalid("non-finite sample"));
        }
        let d = v - self.center;
        Ok(-(d * d))
    }
}

/// Parameters for [`build`], keyed by the registry names used in config
/// files.
#[derive(Debug, Clone, Default)]
pub struct RewardParams {
    pub gc_set: Option<String>,
    pub motif: Option<String>,
    pub center: Option<f64>,
}

/// Build a reward from its registry name. `alphabet`/`seq_len` describe the
/// discrete terminal space and are ignored by continuous rewards.
pub fn build(
    name: &str,
    params: &RewardParams,
    alphabet: Option<&Alphabet>,
    seq_len: Option<usize>,
) -> Result<Arc<dyn Reward>> {
    match name {
        "gc_content" => {
            let alphabet =
                alphabet.ok_or_else(|| Error::invalid("gc_content needs an alphabet"))?;
            let spec = params
                .gc_set
                .as_deref()
                .ok_or_else(|| Error::invalid("gc_content needs reward.gc_set"))?;
            let set = alphabet.encode(spec)?;
            Ok(Arc::new(GcContent::new(alphabet.len(), &set)?))
        }
        "motif_count" => {
            let alphabet =
                alphabet.ok_or_else(|| Error::invalid("motif_count needs an alphabet"))?;
            let seq_len =
                seq_len.ok_or_else(|| Error::invalid("motif_count needs a sequence length"))?;
            let spec = params
                .motif
                .as_deref()
                .ok_or_else(|| Error::invalid("motif_count needs reward.motif"))?;
            Ok(Arc::new(MotifCount::new(alphabet.encode(spec)?, seq_len)?))
        }
        "quadratic_1d" => {
            let center = params
                .center
                .ok_or_else(|| Error::invalid("quadratic_1d needs reward.center"))?;
            Ok(Arc::new(Quadratic1d::new(center)?))
        }
        other => Err(Error::invalid(format!("unknown reward {other:?}"))),
    }
}
