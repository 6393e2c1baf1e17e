//! Inference-time samplers.
//!
//! All of them leave the pre-trained kernel untouched and only reweight or
//! select among its own proposals:
//!
//! - value-guided candidate selection: draw M candidates from the backward
//!   kernel at each step, score them with a value estimate, keep one by
//!   softmax weights (or argmax when alpha = 0);
//! - Best-of-N: generate a pool from the pre-trained chain and keep the top
//!   fraction by terminal reward;
//! - sequential Monte Carlo: propagate N particles under the pre-trained
//!   kernel with value-ratio incremental weights, resampling every step;
//! - exact policy sampling: enumerate each step's full support, tilt by
//!   `exp(v/alpha)`, normalize exactly, and sample; the terminal law is
//!   exactly the tilted target when the value table is exact.
//!
//! Weight arithmetic is in log space throughout. Every sampler draws from
//! streams derived per `(seed, sample, step, candidate)`, so outputs depend
//! only on the seed and configuration, never on worker count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::DiffusionModel;
use crate::numeric::{argmax, normalize_log_weights};
use crate::rewards::Reward;
use crate::rng::{domain, Stream};
use crate::state::{Sample, State};
use crate::values::{SoftValueFunction, ValueAlpha, ValueKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMode {
    Categorical,
    Argmax,
}

/// Configuration of the candidate-selection decoder.
#[derive(Debug, Clone, Copy)]
pub struct DecoderConfig {
    pub alpha: f64,
    /// Candidates per step (M).
    pub candidates: usize,
    pub mode: SelectionMode,
    pub seed: u64,
    pub num_samples: usize,
    /// Retain per-step candidate batches on every sample.
    pub audit: bool,
}

impl DecoderConfig {
    pub fn new(
        alpha: f64,
        candidates: usize,
        mode: SelectionMode,
        seed: u64,
        num_samples: usize,
    ) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::invalid("alpha must be finite and >= 0"));
        }
        if candidates < 1 {
            return Err(Error::invalid("need at least one candidate per step"));
        }
        if num_samples < 1 {
            return Err(Error::invalid("need at least one sample"));
        }
        // alpha = 0 forces argmax: softmax weights are undefined there.
        let mode = if alpha == 0.0 { SelectionMode::Argmax } else { mode };
        Ok(DecoderConfig { alpha, candidates, mode, seed, num_samples, audit: false })
    }

    pub fn with_audit(mut self, audit: bool) -> Self {
        self.audit = audit;
        self
    }
}

/// One selection step's audit record: the M candidates, their value
/// estimates, the normalized selection weights (one-hot under argmax), and
/// the chosen index.
#[derive(Debug, Clone)]
pub struct CandidateBatch {
    pub t_next: usize,
    pub candidates: Vec<State>,
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    pub chosen: usize,
}

/// A generated sample with its full backward trajectory and, when auditing,
/// the per-step candidate batches.
#[derive(Debug, Clone)]
pub struct GeneratedSample {
    pub sample_id: usize,
    pub terminal: Sample,
    pub trajectory: Vec<State>,
    pub batches: Option<Vec<CandidateBatch>>,
}

/// Pick an index from value estimates: softmax of `v/alpha` sampled by
/// inverse CDF, or the max value with lowest-index tie-breaking. Returns
/// the index and the normalized weights.
pub fn select_candidate(
    values: &[f64],
    alpha: f64,
    mode: SelectionMode,
    stream: &mut Stream,
) -> Result<(usize, Vec<f64>)> {
    if values.is_empty() {
        return Err(Error::invalid("no candidates"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Value("non-finite candidate value".into()));
    }
    match mode {
        SelectionMode::Argmax => {
            let chosen = argmax(values);
            let mut weights = vec![0.0; values.len()];
            weights[chosen] = 1.0;
            Ok((chosen, weights))
        }
        SelectionMode::Categorical => {
            if alpha <= 0.0 {
                return Err(Error::invalid("categorical selection needs alpha > 0"));
            }
            let log_w: Vec<f64> = values.iter().map(|v| v / alpha).collect();
            let weights = normalize_log_weights(&log_w)
                .ok_or_else(|| Error::Value("all selection weights vanished".into()))?;
            let chosen = stream.pick(&weights);
            Ok((chosen, weights))
        }
    }
}

/// One guided step: draw M candidates from the backward kernel at
/// `state.t`, score each at `t - 1`, select one.
pub fn svdd_step(
    model: &DiffusionModel,
    state: &State,
    value: &SoftValueFunction,
    config: &DecoderConfig,
    step_stream: &Stream,
) -> Result<(State, CandidateBatch)> {
    let t = state.time();
    if t == 0 {
        return Err(Error::invalid("no step from t = 0"));
    }
    // One kernel per step: candidates are i.i.d. draws from it.
    let kernel = model.backward_kernel(state)?;
    let mut candidates = Vec::with_capacity(config.candidates);
    let mut values = Vec::with_capacity(config.candidates);
    for m in 0..config.candidates {
        let mut cand_stream = step_stream.derive(domain::CANDIDATE, m as u64);
        let cand = match &kernel {
            crate::model::BackwardKernel::Seq(k) => State::Seq(k.sample(&mut cand_stream)),
            crate::model::BackwardKernel::Scalar(k) => State::Scalar(k.sample(&mut cand_stream)),
        };
        values.push(value.eval(&cand)?);
        candidates.push(cand);
    }
    let mut select_stream = step_stream.derive(domain::SELECT, 0);
    let (chosen, weights) = select_candidate(&values, config.alpha, config.mode, &mut select_stream)?;
    let next = candidates[chosen].clone();
    Ok((next, CandidateBatch { t_next: t - 1, candidates, values, weights, chosen }))
}

fn svdd_sample_one(
    model: &DiffusionModel,
    value: &SoftValueFunction,
    config: &DecoderConfig,
    sample_id: usize,
) -> Result<GeneratedSample> {
    let traj_stream = Stream::new(config.seed).derive(domain::SAMPLE, sample_id as u64);
    let mut init_stream = traj_stream.derive(domain::ROLLOUT, 0);
    let mut trajectory = vec![model.initial_state(&mut init_stream)];
    let mut batches = config.audit.then(Vec::new);
    for t in (1..=model.horizon()).rev() {
        let step_stream = traj_stream.derive(domain::STEP, t as u64);
        let (next, batch) =
            svdd_step(model, trajectory.last().unwrap(), value, config, &step_stream)?;
        trajectory.push(next);
        if let Some(b) = batches.as_mut() {
            b.push(batch);
        }
    }
    let terminal = trajectory.last().unwrap().terminal()?;
    Ok(GeneratedSample { sample_id, terminal, trajectory, batches })
}

/// Run the candidate-selection decoder for `num_samples` independent
/// samples. Samples are embarrassingly parallel; output is identical for
/// any worker count.
pub fn svdd_generate(
    model: &DiffusionModel,
    value: &SoftValueFunction,
    config: &DecoderConfig,
) -> Result<Vec<GeneratedSample>> {
    (0..config.num_samples)
        .into_par_iter()
        .map(|i| svdd_sample_one(model, value, config, i))
        .collect()
}

/// Plain pre-trained sampling (the no-guidance baseline).
pub fn pretrained_generate(
    model: &DiffusionModel,
    num_samples: usize,
    seed: u64,
) -> Result<Vec<GeneratedSample>> {
    if num_samples < 1 {
        return Err(Error::invalid("need at least one sample"));
    }
    let root = Stream::new(seed);
    (0..num_samples)
        .into_par_iter()
        .map(|i| {
            let trajectory = model.pretrained_rollout(&root.derive(domain::SAMPLE, i as u64))?;
            let terminal = trajectory.last().unwrap().terminal()?;
            Ok(GeneratedSample { sample_id: i, terminal, trajectory, batches: None })
        })
        .collect()
}

/// Generate a pre-trained pool and keep the `ceil(keep_fraction * pool)`
/// highest-reward samples, ties broken by earlier generation order.
pub fn best_of_n_generate(
    model: &DiffusionModel,
    reward: &dyn Reward,
    pool_size: usize,
    keep_fraction: f64,
    seed: u64,
) -> Result<Vec<GeneratedSample>> {
    if pool_size < 1 {
        return Err(Error::invalid("empty pool"));
    }
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::invalid("keep fraction must lie in (0, 1]"));
    }
    let pool = pretrained_generate(model, pool_size, seed)?;
    let mut scored: Vec<(usize, f64)> = pool
        .iter()
        .map(|s| Ok((s.sample_id, reward.eval(&s.terminal)?)))
        .collect::<Result<_>>()?;
    // stable sort: equal rewards keep generation order
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    let keep = (keep_fraction * pool_size as f64).ceil() as usize;
    let mut kept: Vec<GeneratedSample> =
        scored.iter().take(keep).map(|&(i, _)| pool[i].clone()).collect();
    for (new_id, s) in kept.iter_mut().enumerate() {
        s.sample_id = new_id;
    }
    Ok(kept)
}

/// N particles at a common time with their latest incremental log-weights
/// and the ancestor indices of the last resampling.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    pub particles: Vec<State>,
    pub log_weights: Vec<f64>,
    pub ancestors: Vec<usize>,
}

/// Output of one sequential Monte Carlo run.
#[derive(Debug, Clone)]
pub struct SmcOutput {
    pub samples: Vec<Sample>,
    /// Mean incremental weight per transition step, keyed by the step's
    /// target time `t - 1`. The initial tilt at t = T is excluded: its
    /// normalizer is a constant that cancels in resampling.
    pub step_mean_weights: Vec<(usize, f64)>,
    pub final_ensemble: ParticleEnsemble,
}

/// Particle filtering under the pre-trained proposal with value-ratio
/// incremental weights `exp((v(x_{t-1}) - v(x_t))/alpha)`, multinomially
/// resampling with replacement at every step.
pub fn smc_generate(
    model: &DiffusionModel,
    value: &SoftValueFunction,
    alpha: f64,
    num_particles: usize,
    seed: u64,
) -> Result<SmcOutput> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::invalid("particle weights need alpha > 0"));
    }
    if num_particles < 2 {
        return Err(Error::invalid("need at least two particles"));
    }
    let root = Stream::new(seed);
    let horizon = model.horizon();

    // entry step: draw x_T from the prior and tilt by exp(v_T / alpha)
    let mut particles: Vec<State> = (0..num_particles)
        .map(|i| {
            let mut s = root.derive(domain::STEP, (horizon + 1) as u64).derive(domain::PARTICLE, i as u64);
            model.initial_state(&mut s)
        })
        .collect();
    let mut log_weights: Vec<f64> = particles
        .iter()
        .map(|p| Ok(value.eval(p)? / alpha))
        .collect::<Result<_>>()?;
    let mut resample_stream = root.derive(domain::RESAMPLE, (horizon + 1) as u64);
    let mut ancestors = resample(&log_weights, num_particles, &mut resample_stream)?;
    particles = ancestors.iter().map(|&a| particles[a].clone()).collect();

    let mut step_mean_weights = Vec::with_capacity(horizon);
    for t in (1..=horizon).rev() {
        let step_root = root.derive(domain::STEP, t as u64);
        let moved: Vec<(State, f64)> = particles
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let mut s = step_root.derive(domain::PARTICLE, i as u64);
                let next = model.sample_backward(p, &mut s)?;
                let lw = (value.eval(&next)? - value.eval(p)?) / alpha;
                Ok((next, lw))
            })
            .collect::<Result<_>>()?;
        particles = moved.iter().map(|(p, _)| p.clone()).collect();
        log_weights = moved.into_iter().map(|(_, lw)| lw).collect();
        let mean_w = log_weights.iter().map(|lw| lw.exp()).sum::<f64>() / num_particles as f64;
        step_mean_weights.push((t - 1, mean_w));
        let mut resample_stream = root.derive(domain::RESAMPLE, t as u64);
        ancestors = resample(&log_weights, num_particles, &mut resample_stream)?;
        particles = ancestors.iter().map(|&a| particles[a].clone()).collect();
    }

    let samples = particles.iter().map(|p| p.terminal()).collect::<Result<_>>()?;
    Ok(SmcOutput {
        samples,
        step_mean_weights,
        final_ensemble: ParticleEnsemble { particles, log_weights, ancestors },
    })
}

/// Multinomial resampling with replacement from normalized weights.
fn resample(log_weights: &[f64], count: usize, stream: &mut Stream) -> Result<Vec<usize>> {
    let probs = normalize_log_weights(log_weights)
        .ok_or_else(|| Error::Value("all particle weights vanished".into()))?;
    Ok((0..count).map(|_| stream.pick(&probs)).collect())
}

/// Sample exactly from the value-tilted policy by enumerating the full
/// joint support of the backward kernel at every step.
///
/// The tilt couples positions, so the joint support is enumerated even
/// though the pre-trained kernel factorizes; tilting each position
/// independently would sample a different (wrong) law. With the exact
/// value table for the same `alpha`, the terminal distribution is exactly
/// the tilted target.
pub fn exact_policy_generate(
    model: &DiffusionModel,
    value: &SoftValueFunction,
    alpha: f64,
    num_samples: usize,
    seed: u64,
    budget: usize,
) -> Result<Vec<GeneratedSample>> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::invalid("alpha must be positive"));
    }
    if num_samples < 1 {
        return Err(Error::invalid("need at least one sample"));
    }
    if value.kind() != ValueKind::Exact || value.alpha() != ValueAlpha::Tilt(alpha) {
        return Err(Error::invalid(
            "exact policy sampling needs the exact value table built for the same alpha",
        ));
    }
    let m = model.as_discrete()?;
    let root = Stream::new(seed);
    (0..num_samples)
        .into_par_iter()
        .map(|i| {
            let traj_stream = root.derive(domain::SAMPLE, i as u64);
            let mut trajectory =
                vec![State::Seq(crate::state::SequenceState::all_masked(m.len, m.horizon()))];
            for t in (1..=m.horizon()).rev() {
                let state = trajectory.last().unwrap().as_seq()?;
                let kernel = m.backward_kernel(state)?;
                if kernel.support_size() > budget {
                    return Err(Error::Budget(format!(
                        "step support {} > budget {budget}",
                        kernel.support_size()
                    )));
                }
                let outcomes = kernel.enumerate();
                let log_tilted: Vec<f64> = outcomes
                    .iter()
                    .map(|(succ, p)| Ok(p.ln() + value.eval(&State::Seq(succ.clone()))? / alpha))
                    .collect::<Result<_>>()?;
                let probs = normalize_log_weights(&log_tilted)
                    .ok_or_else(|| Error::Value("tilted step distribution vanished".into()))?;
                let mut pick_stream = traj_stream.derive(domain::STEP, t as u64);
                let chosen = pick_stream.pick(&probs);
                trajectory.push(State::Seq(outcomes[chosen].0.clone()));
            }
            let terminal = trajectory.last().unwrap().terminal()?;
            Ok(GeneratedSample { sample_id: i, terminal, trajectory, batches: None })
        })
        .collect()
}
