//! The two toy diffusion model families.
//!
//! Both families are specified by a noise schedule and a posterior
//! predictor that estimates the clean sample from a noisy state. The
//! discrete family masks tokens with an absorbing mask symbol; its backward
//! kernel carries unmasked positions over unchanged and unmasks the rest
//! from a mix of the mask symbol and the predictor's per-position
//! distribution. The continuous family is the usual 1-D Gaussian chain with
//! the denoising posterior mean and variance.
//!
//! Predictors here are exact Bayes computations over an explicit data
//! distribution rather than learned networks, which is what makes every
//! downstream quantity checkable by brute force.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng::{domain, Stream};
use crate::schedule::{GaussianSchedule, MaskedSchedule};
use crate::state::{Sample, ScalarState, SequenceState, State, Token, TokenId};
use crate::table::{DistributionTable, GaussianMixture, PROB_SUM_TOL};

/// Default cap on `(K+1)^L * (T+1)` table cells for exact enumeration.
pub const DEFAULT_ENUM_BUDGET: usize = 10_000_000;

/// Posterior predictor of the discrete family: per-position distribution
/// over the K tokens given a partially masked state. Rows for unmasked
/// positions are ignored by the backward kernel.
pub trait SeqPredictor: Send + Sync {
    fn predict(&self, state: &SequenceState) -> Result<Vec<Vec<f64>>>;
}

/// Posterior predictor of the continuous family: point estimate of the
/// clean sample given the noisy state.
pub trait ScalarPredictor: Send + Sync {
    fn predict(&self, state: &ScalarState) -> Result<f64>;
}

/// Exact Bayes predictor over an explicit data table: for each masked
/// position, the marginal of the clean token conditioned on agreement with
/// every unmasked position. States whose unmasked pattern has no support in
/// the data fall back to a uniform distribution at masked positions so the
/// predictor stays total.
#[derive(Debug, Clone)]
pub struct ExactSeqPredictor {
    data: DistributionTable,
}

impl ExactSeqPredictor {
    pub fn new(data: DistributionTable) -> Self {
        ExactSeqPredictor { data }
    }

    pub fn data(&self) -> &DistributionTable {
        &self.data
    }
}

impl SeqPredictor for ExactSeqPredictor {
    fn predict(&self, state: &SequenceState) -> Result<Vec<Vec<f64>>> {
        let k = self.data.k();
        let len = self.data.seq_len();
        if state.tokens.len() != len {
            return Err(Error::invalid("state length does not match data table"));
        }
        let mut marginals = vec![vec![0.0; k]; len];
        let mut total = 0.0;
        for (seq, p) in self.data.entries() {
            let consistent = state
                .tokens
                .iter()
                .zip(seq.iter())
                .all(|(tok, &d)| match tok {
                    Token::Mask => true,
                    Token::Tok(id) => *id == d,
                });
            if !consistent {
                continue;
            }
            total += p;
            for (l, &d) in seq.iter().enumerate() {
                marginals[l][d as usize] += p;
            }
        }
        if total > 0.0 {
            for row in &mut marginals {
                for v in row.iter_mut() {
                    *v /= total;
                }
            }
        } else {
            // Unmasked pattern inconsistent with the data: keep unmasked
            // tokens, uniform over tokens at masked positions.
            for (row, tok) in marginals.iter_mut().zip(state.tokens.iter()) {
                match tok {
                    Token::Mask => row.fill(1.0 / k as f64),
                    Token::Tok(id) => row[*id as usize] = 1.0,
                }
            }
        }
        Ok(marginals)
    }
}

/// Exact posterior mean predictor for Gaussian-mixture data: conjugate
/// update of each component against the forward kernel, responsibilities
/// from the component evidence.
#[derive(Debug, Clone)]
pub struct MixturePredictor {
    mixture: GaussianMixture,
    schedule: GaussianSchedule,
}

impl MixturePredictor {
    pub fn new(mixture: GaussianMixture, schedule: GaussianSchedule) -> Self {
        MixturePredictor { mixture, schedule }
    }

    pub fn mixture(&self) -> &GaussianMixture {
        &self.mixture
    }
}

impl ScalarPredictor for MixturePredictor {
    fn predict(&self, state: &ScalarState) -> Result<f64> {
        self.schedule.check_time(state.t)?;
        let a = self.schedule.cum_alpha(state.t);
        let noise_var = 1.0 - a;
        let sqrt_a = a.sqrt();
        // log evidence and posterior mean per component
        let mut log_w = Vec::with_capacity(self.mixture.components().len());
        let mut post_mean = Vec::with_capacity(log_w.capacity());
        for c in self.mixture.components() {
            let var = a * c.std * c.std + noise_var;
            let diff = state.value - sqrt_a * c.mean;
            log_w.push(c.weight.ln() - 0.5 * (var.ln() + diff * diff / var));
            let gain = sqrt_a * c.std * c.std / var;
            post_mean.push(c.mean + gain * diff);
        }
        let resp = crate::numeric::normalize_log_weights(&log_w)
            .ok_or_else(|| Error::Value("mixture evidence underflowed".into()))?;
        Ok(resp.iter().zip(post_mean.iter()).map(|(r, m)| r * m).sum())
    }
}

/// Masked discrete sequence model.
#[derive(Clone)]
pub struct DiscreteModel {
    pub k: usize,
    pub len: usize,
    pub schedule: MaskedSchedule,
    pub predictor: Arc<dyn SeqPredictor>,
}

impl DiscreteModel {
    pub fn new(
        k: usize,
        len: usize,
        schedule: MaskedSchedule,
        predictor: Arc<dyn SeqPredictor>,
    ) -> Result<Self> {
        if k < 2 || len == 0 {
            return Err(Error::invalid("need K >= 2 and L >= 1"));
        }
        Ok(DiscreteModel { k, len, schedule, predictor })
    }

    /// Exact-Bayes model over an explicit data distribution.
    pub fn exact(data: DistributionTable, schedule: MaskedSchedule) -> Result<Self> {
        let k = data.k();
        let len = data.seq_len();
        Self::new(k, len, schedule, Arc::new(ExactSeqPredictor::new(data)))
    }

    pub fn horizon(&self) -> usize {
        self.schedule.horizon()
    }

    pub fn state_count(&self) -> usize {
        (self.k + 1).pow(self.len as u32)
    }

    fn checked_predict(&self, state: &SequenceState) -> Result<Vec<Vec<f64>>> {
        let dists = self.predictor.predict(state)?;
        if dists.len() != self.len {
            return Err(Error::Value("predictor returned wrong number of positions".into()));
        }
        for row in &dists {
            if row.len() != self.k {
                return Err(Error::Value("predictor row has wrong token count".into()));
            }
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !p.is_finite() || p < 0.0) || (sum - 1.0).abs() > PROB_SUM_TOL {
                return Err(Error::Value("predictor row is not a distribution".into()));
            }
        }
        Ok(dists)
    }

    /// Corrupt a clean sequence to time `t`: each position independently
    /// keeps its token with probability `keep_prob[t]`, else masks.
    pub fn forward_sample(&self, x0: &[TokenId], t: usize, stream: &mut Stream) -> Result<SequenceState> {
        self.schedule.check_time(t)?;
        if x0.len() != self.len {
            return Err(Error::invalid("terminal sample length mismatch"));
        }
        if x0.iter().any(|&id| id as usize >= self.k) {
            return Err(Error::invalid("token id out of range"));
        }
        let keep = self.schedule.keep_prob(t);
        let tokens = x0
            .iter()
            .map(|&id| if stream.next_f64() < keep { Token::Tok(id) } else { Token::Mask })
            .collect();
        Ok(SequenceState { tokens, t })
    }

    /// One-step backward kernel at `state.t`, as an explicit per-position
    /// product distribution over states at `t - 1`.
    pub fn backward_kernel(&self, state: &SequenceState) -> Result<SeqKernel> {
        let t = state.t;
        self.schedule.check_time(t)?;
        if t == 0 {
            return Err(Error::invalid("no backward transition from t = 0"));
        }
        if state.tokens.len() != self.len {
            return Err(Error::invalid("state length mismatch"));
        }
        let kp_prev = self.schedule.keep_prob(t - 1);
        let kp_cur = self.schedule.keep_prob(t);
        let needs_predictor = state.tokens.iter().any(|tok| tok.is_mask());
        if needs_predictor && kp_cur >= 1.0 {
            return Err(Error::invalid("masked position at a time with keep_prob 1"));
        }
        let dists = if needs_predictor {
            Some(self.checked_predict(state)?)
        } else {
            None
        };
        let positions = state
            .tokens
            .iter()
            .enumerate()
            .map(|(l, tok)| match tok {
                Token::Tok(id) => PositionKernel::Carry(*id),
                Token::Mask => {
                    let denom = 1.0 - kp_cur;
                    let mask_prob = (1.0 - kp_prev) / denom;
                    let unmask = (kp_prev - kp_cur) / denom;
                    let token_probs = dists.as_ref().unwrap()[l]
                        .iter()
                        .map(|&p| unmask * p)
                        .collect();
                    PositionKernel::Masked { mask_prob, token_probs }
                }
            })
            .collect();
        Ok(SeqKernel { t_next: t - 1, positions })
    }

    /// Exact terminal distribution of the backward chain, by dense dynamic
    /// programming over all `(K+1)^L` states.
    pub fn exact_marginal(&self, budget: usize) -> Result<DistributionTable> {
        let states = self.state_count();
        let cells = states.saturating_mul(self.horizon() + 1);
        if cells > budget {
            return Err(Error::Budget(format!(
                "{states} states x {} times = {cells} cells > budget {budget}",
                self.horizon() + 1
            )));
        }
        let mut mass = vec![0.0f64; states];
        mass[SequenceState::all_masked(self.len, self.horizon()).index(self.k)] = 1.0;
        for t in (1..=self.horizon()).rev() {
            let mut next = vec![0.0f64; states];
            for (idx, &m) in mass.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                let state = SequenceState::from_index(idx, self.k, self.len, t);
                let kernel = self.backward_kernel(&state)?;
                for (succ, p) in kernel.enumerate() {
                    next[succ.index(self.k)] += m * p;
                }
            }
            mass = next;
        }
        let mut entries = Vec::new();
        for (idx, &m) in mass.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let state = SequenceState::from_index(idx, self.k, self.len, 0);
            entries.push((state.terminal_tokens()?, m));
        }
        DistributionTable::new(self.k, self.len, entries)
    }
}

/// 1-D Gaussian model.
#[derive(Clone)]
pub struct ContinuousModel {
    pub schedule: GaussianSchedule,
    pub predictor: Arc<dyn ScalarPredictor>,
}

impl ContinuousModel {
    pub fn new(schedule: GaussianSchedule, predictor: Arc<dyn ScalarPredictor>) -> Self {
        ContinuousModel { schedule, predictor }
    }

    /// Exact-Bayes model over a Gaussian mixture data distribution.
    pub fn exact(mixture: GaussianMixture, schedule: GaussianSchedule) -> Self {
        let predictor = MixturePredictor::new(mixture, schedule.clone());
        Self::new(schedule, Arc::new(predictor))
    }

    pub fn horizon(&self) -> usize {
        self.schedule.horizon()
    }

    pub fn forward_sample(&self, x0: f64, t: usize, stream: &mut Stream) -> Result<ScalarState> {
        self.schedule.check_time(t)?;
        if !x0.is_finite() {
            return Err(Error::invalid("terminal sample must be finite"));
        }
        let a = self.schedule.cum_alpha(t);
        let value = a.sqrt() * x0 + (1.0 - a).sqrt() * stream.next_normal();
        ScalarState::new(value, t)
    }

    /// One-step denoising posterior at `state.t`: Gaussian with the
    /// standard posterior mean around the predicted clean sample. The
    /// variance vanishes at t = 1 (the final step is deterministic).
    pub fn backward_kernel(&self, state: &ScalarState) -> Result<ScalarKernel> {
        let t = state.t;
        self.schedule.check_time(t)?;
        if t == 0 {
            return Err(Error::invalid("no backward transition from t = 0"));
        }
        let x0_hat = self.predictor.predict(state)?;
        if !x0_hat.is_finite() {
            return Err(Error::Value("predictor returned a non-finite estimate".into()));
        }
        let a_step = self.schedule.step_alpha(t);
        let a_prev = self.schedule.cum_alpha(t - 1);
        let a_cur = self.schedule.cum_alpha(t);
        let denom = 1.0 - a_cur;
        let mean =
            (a_step.sqrt() * (1.0 - a_prev) * state.value + a_prev.sqrt() * (1.0 - a_step) * x0_hat)
                / denom;
        let var = (1.0 - a_step) * (1.0 - a_prev) / denom;
        Ok(ScalarKernel { t_next: t - 1, mean, std: var.max(0.0).sqrt() })
    }
}

/// A pre-trained diffusion model of either family.
#[derive(Clone)]
pub enum DiffusionModel {
    Discrete(DiscreteModel),
    Continuous(ContinuousModel),
}

impl DiffusionModel {
    pub fn horizon(&self) -> usize {
        match self {
            DiffusionModel::Discrete(m) => m.horizon(),
            DiffusionModel::Continuous(m) => m.horizon(),
        }
    }

    pub fn as_discrete(&self) -> Result<&DiscreteModel> {
        match self {
            DiffusionModel::Discrete(m) => Ok(m),
            DiffusionModel::Continuous(_) => {
                Err(Error::Unsupported("operation requires the discrete family".into()))
            }
        }
    }

    pub fn as_continuous(&self) -> Result<&ContinuousModel> {
        match self {
            DiffusionModel::Continuous(m) => Ok(m),
            DiffusionModel::Discrete(_) => {
                Err(Error::Unsupported("operation requires the continuous family".into()))
            }
        }
    }

    /// Start of the backward chain: the all-mask sequence, or a standard
    /// normal draw.
    pub fn initial_state(&self, stream: &mut Stream) -> State {
        match self {
            DiffusionModel::Discrete(m) => {
                State::Seq(SequenceState::all_masked(m.len, m.horizon()))
            }
            DiffusionModel::Continuous(m) => {
                State::Scalar(ScalarState { value: stream.next_normal(), t: m.horizon() })
            }
        }
    }

    /// Corrupt a terminal sample to time `t` under the forward process.
    pub fn forward_sample(&self, x0: &Sample, t: usize, stream: &mut Stream) -> Result<State> {
        match (self, x0) {
            (DiffusionModel::Discrete(m), Sample::Seq(seq)) => {
                Ok(State::Seq(m.forward_sample(seq, t, stream)?))
            }
            (DiffusionModel::Continuous(m), Sample::Scalar(v)) => {
                Ok(State::Scalar(m.forward_sample(*v, t, stream)?))
            }
            _ => Err(Error::invalid("sample kind does not match model family")),
        }
    }

    /// Explicit one-step backward distribution at `state.t`.
    pub fn backward_kernel(&self, state: &State) -> Result<BackwardKernel> {
        match (self, state) {
            (DiffusionModel::Discrete(m), State::Seq(s)) => {
                Ok(BackwardKernel::Seq(m.backward_kernel(s)?))
            }
            (DiffusionModel::Continuous(m), State::Scalar(s)) => {
                Ok(BackwardKernel::Scalar(m.backward_kernel(s)?))
            }
            _ => Err(Error::invalid("state kind does not match model family")),
        }
    }

    /// Draw one backward step.
    pub fn sample_backward(&self, state: &State, stream: &mut Stream) -> Result<State> {
        Ok(match self.backward_kernel(state)? {
            BackwardKernel::Seq(k) => State::Seq(k.sample(stream)),
            BackwardKernel::Scalar(k) => State::Scalar(k.sample(stream)),
        })
    }

    /// Full backward rollout `x_T, ..., x_0` under the pre-trained chain.
    pub fn pretrained_rollout(&self, stream: &Stream) -> Result<Vec<State>> {
        let horizon = self.horizon();
        let mut init_stream = stream.derive(domain::ROLLOUT, 0);
        let mut trajectory = Vec::with_capacity(horizon + 1);
        trajectory.push(self.initial_state(&mut init_stream));
        for t in (1..=horizon).rev() {
            let mut step = stream.derive(domain::STEP, t as u64);
            let next = self.sample_backward(trajectory.last().unwrap(), &mut step)?;
            trajectory.push(next);
        }
        debug_assert_eq!(trajectory.len(), horizon + 1);
        Ok(trajectory)
    }

    /// Exact terminal distribution of the backward chain (discrete only).
    pub fn exact_marginal(&self, budget: usize) -> Result<DistributionTable> {
        self.as_discrete()?.exact_marginal(budget)
    }
}

/// Explicit one-step backward distribution.
pub enum BackwardKernel {
    Seq(SeqKernel),
    Scalar(ScalarKernel),
}

/// Per-position product kernel of the discrete family at one step.
#[derive(Debug, Clone)]
pub struct SeqKernel {
    pub t_next: usize,
    pub positions: Vec<PositionKernel>,
}

#[derive(Debug, Clone)]
pub enum PositionKernel {
    /// Unmasked position: carried over unchanged.
    Carry(TokenId),
    /// Masked position: stay masked with `mask_prob`, else unmask to token
    /// `k` with `token_probs[k]`.
    Masked { mask_prob: f64, token_probs: Vec<f64> },
}

impl PositionKernel {
    fn outcomes(&self) -> Vec<(Token, f64)> {
        match self {
            PositionKernel::Carry(id) => vec![(Token::Tok(*id), 1.0)],
            PositionKernel::Masked { mask_prob, token_probs } => {
                let mut out = Vec::with_capacity(token_probs.len() + 1);
                if *mask_prob > 0.0 {
                    out.push((Token::Mask, *mask_prob));
                }
                for (k, &p) in token_probs.iter().enumerate() {
                    if p > 0.0 {
                        out.push((Token::Tok(k as TokenId), p));
                    }
                }
                out
            }
        }
    }

    pub fn prob_of(&self, tok: Token) -> f64 {
        match self {
            PositionKernel::Carry(id) => {
                if tok == Token::Tok(*id) {
                    1.0
                } else {
                    0.0
                }
            }
            PositionKernel::Masked { mask_prob, token_probs } => match tok {
                Token::Mask => *mask_prob,
                Token::Tok(k) => token_probs.get(k as usize).copied().unwrap_or(0.0),
            },
        }
    }
}

impl SeqKernel {
    pub fn sample(&self, stream: &mut Stream) -> SequenceState {
        let tokens = self
            .positions
            .iter()
            .map(|pk| match pk {
                PositionKernel::Carry(id) => Token::Tok(*id),
                PositionKernel::Masked { mask_prob, token_probs } => {
                    let u = stream.next_f64();
                    if u < *mask_prob {
                        Token::Mask
                    } else {
                        let mut acc = *mask_prob;
                        let mut chosen = token_probs.len() - 1;
                        for (k, &p) in token_probs.iter().enumerate() {
                            acc += p;
                            if u < acc {
                                chosen = k;
                                break;
                            }
                        }
                        Token::Tok(chosen as TokenId)
                    }
                }
            })
            .collect();
        SequenceState { tokens, t: self.t_next }
    }

    /// Number of joint outcomes with positive probability.
    pub fn support_size(&self) -> usize {
        self.positions.iter().map(|p| p.outcomes().len()).product()
    }

    /// All joint outcomes with their probabilities. The kernel factorizes
    /// over positions, so the joint probability is the product of the
    /// per-position ones.
    pub fn enumerate(&self) -> Vec<(SequenceState, f64)> {
        let per_pos: Vec<Vec<(Token, f64)>> = self.positions.iter().map(|p| p.outcomes()).collect();
        let mut out = Vec::with_capacity(self.support_size());
        let mut tokens = vec![Token::Mask; per_pos.len()];
        self.enumerate_rec(&per_pos, 0, 1.0, &mut tokens, &mut out);
        out
    }

    fn enumerate_rec(
        &self,
        per_pos: &[Vec<(Token, f64)>],
        l: usize,
        prob: f64,
        tokens: &mut Vec<Token>,
        out: &mut Vec<(SequenceState, f64)>,
    ) {
        if l == per_pos.len() {
            out.push((SequenceState { tokens: tokens.clone(), t: self.t_next }, prob));
            return;
        }
        for &(tok, p) in &per_pos[l] {
            tokens[l] = tok;
            self.enumerate_rec(per_pos, l + 1, prob * p, tokens, out);
        }
    }

    pub fn prob_of(&self, state: &SequenceState) -> f64 {
        debug_assert_eq!(state.tokens.len(), self.positions.len());
        self.positions
            .iter()
            .zip(state.tokens.iter())
            .map(|(pk, &tok)| pk.prob_of(tok))
            .product()
    }
}

/// Gaussian one-step backward distribution of the continuous family.
#[derive(Debug, Clone, Copy)]
pub struct ScalarKernel {
    pub t_next: usize,
    pub mean: f64,
    pub std: f64,
}

impl ScalarKernel {
    pub fn sample(&self, stream: &mut Stream) -> ScalarState {
        let value = if self.std > 0.0 {
            self.mean + self.std * stream.next_normal()
        } else {
            self.mean
        };
        ScalarState { value, t: self.t_next }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// K=2 tokens {A=0, C=1}, L=2, T=2, keep_prob = [1, 0.5, 0],
    /// data = {AA: 0.5, CC: 0.5}.
    pub(crate) fn tiny_model() -> DiscreteModel {
        let data =
            DistributionTable::new(2, 2, vec![(vec![0, 0], 0.5), (vec![1, 1], 0.5)]).unwrap();
        let schedule = MaskedSchedule::new(vec![1.0, 0.5, 0.0]).unwrap();
        DiscreteModel::exact(data, schedule).unwrap()
    }

    fn seq(tokens: &[Option<u8>], t: usize) -> SequenceState {
        SequenceState {
            tokens: tokens
                .iter()
                .map(|o| o.map(Token::Tok).unwrap_or(Token::Mask))
                .collect(),
            t,
        }
    }

    #[test]
    fn forward_identity_at_t0_and_all_mask_at_horizon() {
        let m = tiny_model();
        let mut s = Stream::new(1);
        let x0 = vec![0u8, 1];
        let at0 = m.forward_sample(&x0, 0, &mut s).unwrap();
        assert_eq!(at0, seq(&[Some(0), Some(1)], 0));
        let at_t = m.forward_sample(&x0, 2, &mut s).unwrap();
        assert_eq!(at_t, seq(&[None, None], 2));
        assert!(m.forward_sample(&x0, 3, &mut s).is_err());
        assert!(m.forward_sample(&[0, 1, 0], 1, &mut s).is_err());
        assert!(m.forward_sample(&[0, 7], 1, &mut s).is_err());
    }

    #[test]
    fn forward_mask_fraction_matches_keep_prob() {
        // Binomial(1000, 0.5): a masked fraction outside [0.45, 0.55] has
        // probability below 2e-3; the seed is fixed, so this is frozen.
        let data = DistributionTable::new(
            2,
            1000,
            vec![(vec![0; 1000], 0.5), (vec![1; 1000], 0.5)],
        )
        .unwrap();
        let schedule = MaskedSchedule::new(vec![1.0, 0.5, 0.0]).unwrap();
        let m = DiscreteModel::exact(data, schedule).unwrap();
        let mut s = Stream::new(42);
        let state = m.forward_sample(&vec![0u8; 1000], 1, &mut s).unwrap();
        let frac = state.mask_count() as f64 / 1000.0;
        assert!((0.45..=0.55).contains(&frac), "masked fraction {frac}");
    }

    #[test]
    fn exact_predictor_marginals_on_tiny_instance() {
        let m = tiny_model();
        let d = m.predictor.predict(&seq(&[None, None], 2)).unwrap();
        assert!((d[0][0] - 0.5).abs() < 1e-12 && (d[0][1] - 0.5).abs() < 1e-12);
        assert!((d[1][0] - 0.5).abs() < 1e-12);
        // (A, mask): only AA is consistent
        let d = m.predictor.predict(&seq(&[Some(0), None], 1)).unwrap();
        assert!((d[1][0] - 1.0).abs() < 1e-12);
        assert_eq!(d[1][1], 0.0);
    }

    #[test]
    fn exact_predictor_zero_support_fallback() {
        let data = DistributionTable::new(
            2,
            3,
            vec![(vec![0, 0, 0], 0.5), (vec![1, 1, 1], 0.5)],
        )
        .unwrap();
        let schedule = MaskedSchedule::linear(2).unwrap();
        let m = DiscreteModel::exact(data, schedule).unwrap();
        // (A, C, mask) is consistent with nothing: uniform at the mask.
        let d = m.predictor.predict(&seq(&[Some(0), Some(1), None], 1)).unwrap();
        assert!((d[2][0] - 0.5).abs() < 1e-12 && (d[2][1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn backward_kernel_tiny_instance_values() {
        let m = tiny_model();
        // x_1 = (A, mask) -> (A, A) surely
        let k = m.backward_kernel(&seq(&[Some(0), None], 1)).unwrap();
        let outcomes = k.enumerate();
        assert_eq!(outcomes.len(), 1);
        assert_eq!(outcomes[0].0, seq(&[Some(0), Some(0)], 0));
        assert!((outcomes[0].1 - 1.0).abs() < 1e-12);
        // x_2 = (mask, mask): each position mask 0.5 / A 0.25 / C 0.25
        let k = m.backward_kernel(&seq(&[None, None], 2)).unwrap();
        for pk in &k.positions {
            assert!((pk.prob_of(Token::Mask) - 0.5).abs() < 1e-12);
            assert!((pk.prob_of(Token::Tok(0)) - 0.25).abs() < 1e-12);
            assert!((pk.prob_of(Token::Tok(1)) - 0.25).abs() < 1e-12);
        }
        assert!(m.backward_kernel(&seq(&[Some(0), Some(0)], 0)).is_err());
    }

    #[test]
    fn continuous_final_step_collapses_to_prediction() {
        let mixture = GaussianMixture::parse("1.0 0.3 1.0").unwrap();
        let schedule = GaussianSchedule::linear_beta(4, 0.05, 0.3).unwrap();
        let m = ContinuousModel::exact(mixture, schedule);
        let state = ScalarState { value: 0.9, t: 1 };
        let x0_hat = m.predictor.predict(&state).unwrap();
        let k = m.backward_kernel(&state).unwrap();
        assert_eq!(k.std, 0.0);
        assert!((k.mean - x0_hat).abs() < 1e-12);
        let mut s = Stream::new(3);
        assert_eq!(k.sample(&mut s).value, k.mean);
    }

    #[test]
    fn continuous_backward_moments_match_closed_form() {
        let mixture = GaussianMixture::parse("1.0 0.0 1.0").unwrap();
        let schedule = GaussianSchedule::linear_beta(4, 0.05, 0.3).unwrap();
        let m = ContinuousModel::exact(mixture, schedule);
        let state = ScalarState { value: -0.4, t: 3 };
        let k = m.backward_kernel(&state).unwrap();
        let n = 100_000;
        let mut stream = Stream::new(9);
        let draws: Vec<f64> = (0..n).map(|_| k.sample(&mut stream).value).collect();
        let mean = crate::numeric::mean(&draws);
        let se = crate::numeric::std_error(&draws);
        assert!((mean - k.mean).abs() < 3.0 * se, "mean {mean} vs {}", k.mean);
        let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        // var of the sample variance of a normal is 2 sigma^4 / (n - 1)
        let var_se = (2.0 * k.std.powi(4) / (n as f64 - 1.0)).sqrt();
        assert!((var - k.std * k.std).abs() < 3.0 * var_se, "var {var} vs {}", k.std * k.std);
    }

    #[test]
    fn rollout_shape_and_determinism() {
        let m = DiffusionModel::Discrete(tiny_model());
        let stream = Stream::new(5);
        let traj = m.pretrained_rollout(&stream).unwrap();
        assert_eq!(traj.len(), 3);
        assert_eq!(traj[0], State::Seq(seq(&[None, None], 2)));
        assert_eq!(traj.last().unwrap().time(), 0);
        assert!(traj.last().unwrap().terminal().is_ok());
        let again = m.pretrained_rollout(&stream).unwrap();
        assert_eq!(traj, again);
    }

    #[test]
    fn exact_marginal_tiny_instance() {
        let m = tiny_model();
        let table = m.exact_marginal(DEFAULT_ENUM_BUDGET).unwrap();
        assert!((table.prob(&[0, 0]) - 0.375).abs() < 1e-12);
        assert!((table.prob(&[0, 1]) - 0.125).abs() < 1e-12);
        assert!((table.prob(&[1, 0]) - 0.125).abs() < 1e-12);
        assert!((table.prob(&[1, 1]) - 0.375).abs() < 1e-12);
        let total: f64 = table.entries().iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn exact_marginal_point_mass_data() {
        let data = DistributionTable::new(2, 2, vec![(vec![0, 1], 1.0)]).unwrap();
        let schedule = MaskedSchedule::new(vec![1.0, 0.5, 0.0]).unwrap();
        let m = DiscreteModel::exact(data, schedule).unwrap();
        let table = m.exact_marginal(DEFAULT_ENUM_BUDGET).unwrap();
        assert_eq!(table.entries().len(), 1);
        assert!((table.prob(&[0, 1]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_marginal_budget_is_enforced() {
        let m = tiny_model();
        assert!(matches!(m.exact_marginal(10), Err(Error::Budget(_))));
    }

    #[test]
    fn rollout_terminal_distribution_matches_marginal() {
        let m = tiny_model();
        let exact = m.exact_marginal(DEFAULT_ENUM_BUDGET).unwrap();
        let dm = DiffusionModel::Discrete(m.clone());
        let root = Stream::new(77);
        let n = 100_000;
        let samples: Vec<Vec<u8>> = (0..n)
            .map(|i| {
                let traj = dm.pretrained_rollout(&root.derive(domain::SAMPLE, i)).unwrap();
                traj.last().unwrap().terminal().unwrap().as_seq().unwrap().to_vec()
            })
            .collect();
        let empirical =
            DistributionTable::from_samples(2, 2, samples.iter().map(|s| s.as_slice())).unwrap();
        let tv = crate::oracle::tv_distance(&empirical, &exact).unwrap();
        assert!(tv <= 0.01, "tv {tv}");
    }
}
