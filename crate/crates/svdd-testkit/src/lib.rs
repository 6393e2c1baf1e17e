//! Brute-force oracles for the test suites.
//!
//! Everything here recomputes engine quantities the slow, definitional way:
//! terminal distributions by exhaustively enumerating every backward
//! trajectory and summing path probabilities, and values by averaging over
//! the enumerated continuations of a state. The only shared ground with the
//! engine is the one-step backward kernel itself, whose numbers are frozen
//! by hand in the engine's own unit tests; no oracle below calls the
//! dynamic-programming or Bellman-recursion code paths it is used to check.

use svdd_core::error::Result;
use svdd_core::model::DiscreteModel;
use svdd_core::rewards::Reward;
use svdd_core::rng::Stream;
use svdd_core::schedule::MaskedSchedule;
use svdd_core::state::{Sample, SequenceState, TokenId};
use svdd_core::table::DistributionTable;

/// One complete backward path `x_T, ..., x_0` and its probability.
pub struct Path {
    pub states: Vec<SequenceState>,
    pub prob: f64,
}

/// All backward trajectories that start at `state` and run down to t = 0.
pub fn enumerate_continuations(model: &DiscreteModel, state: &SequenceState) -> Result<Vec<Path>> {
    let mut out = Vec::new();
    let mut prefix = vec![state.clone()];
    walk(model, &mut prefix, 1.0, &mut out)?;
    Ok(out)
}

fn walk(
    model: &DiscreteModel,
    prefix: &mut Vec<SequenceState>,
    prob: f64,
    out: &mut Vec<Path>,
) -> Result<()> {
    let cur = prefix.last().unwrap().clone();
    if cur.t == 0 {
        out.push(Path { states: prefix.clone(), prob });
        return Ok(());
    }
    for (succ, p) in model.backward_kernel(&cur)?.enumerate() {
        prefix.push(succ);
        walk(model, prefix, prob * p, out)?;
        prefix.pop();
    }
    Ok(())
}

/// All backward trajectories of the chain, from the all-mask start.
pub fn enumerate_trajectories(model: &DiscreteModel) -> Result<Vec<Path>> {
    enumerate_continuations(model, &SequenceState::all_masked(model.len, model.horizon()))
}

/// Terminal distribution obtained by summing path probabilities; the
/// blunt-force counterpart of the dynamic-programming marginal.
pub fn terminal_by_enumeration(model: &DiscreteModel) -> Result<DistributionTable> {
    let mut acc: std::collections::BTreeMap<Vec<TokenId>, f64> = Default::default();
    for path in enumerate_trajectories(model)? {
        let terminal = path.states.last().unwrap().terminal_tokens()?;
        *acc.entry(terminal).or_insert(0.0) += path.prob;
    }
    DistributionTable::new(model.k, model.len, acc.into_iter().collect())
}

/// Definition-based soft value: `alpha * log E[exp(r(x0)/alpha)]` over the
/// enumerated continuations of `state`.
pub fn soft_value_by_enumeration(
    model: &DiscreteModel,
    reward: &dyn Reward,
    alpha: f64,
    state: &SequenceState,
) -> Result<f64> {
    let mut total = 0.0;
    for path in enumerate_continuations(model, state)? {
        let r = reward.eval(&Sample::Seq(path.states.last().unwrap().terminal_tokens()?))?;
        total += path.prob * (r / alpha).exp();
    }
    Ok(alpha * total.ln())
}

/// Definition-based mean-reward value: `E[r(x0)]` over the enumerated
/// continuations of `state`.
pub fn mean_value_by_enumeration(
    model: &DiscreteModel,
    reward: &dyn Reward,
    state: &SequenceState,
) -> Result<f64> {
    let mut total = 0.0;
    for path in enumerate_continuations(model, state)? {
        let r = reward.eval(&Sample::Seq(path.states.last().unwrap().terminal_tokens()?))?;
        total += path.prob * r;
    }
    Ok(total)
}

/// Additive per-token reward with arbitrary weights; the generic objective
/// for randomized instances.
pub struct TokenWeights {
    weights: Vec<f64>,
}

impl TokenWeights {
    pub fn new(weights: Vec<f64>) -> Self {
        TokenWeights { weights }
    }

    pub fn random(k: usize, stream: &mut Stream) -> Self {
        TokenWeights { weights: (0..k).map(|_| -1.0 + 3.0 * stream.next_f64()).collect() }
    }
}

impl Reward for TokenWeights {
    fn name(&self) -> &str {
        "token_weights"
    }

    fn range(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    fn eval(&self, x: &Sample) -> Result<f64> {
        Ok(x.as_seq()?.iter().map(|&id| self.weights[id as usize]).sum())
    }
}

/// A random small instance with at most `max_trajectories` backward paths:
/// random dimensions, data support, probabilities, and interior schedule.
pub fn random_instance(stream: &mut Stream, max_trajectories: usize) -> DiscreteModel {
    loop {
        let k = 2 + (stream.next_u64() % 2) as usize;
        let len = 1 + (stream.next_u64() % 2) as usize;
        let horizon = 2 + (stream.next_u64() % 2) as usize;
        let total = k.pow(len as u32);
        let mut weights = Vec::new();
        for idx in 0..total {
            if stream.next_f64() < 0.6 || (idx == total - 1 && weights.is_empty()) {
                let mut seq = Vec::with_capacity(len);
                let mut rest = idx;
                for _ in 0..len {
                    seq.push((rest % k) as TokenId);
                    rest /= k;
                }
                weights.push((seq, 0.1 + stream.next_f64()));
            }
        }
        let data = DistributionTable::from_weights(k, len, weights).unwrap();
        let mut interior: Vec<f64> =
            (0..horizon - 1).map(|_| 0.1 + 0.8 * stream.next_f64()).collect();
        interior.sort_by(|a, b| b.total_cmp(a));
        let mut keep = vec![1.0];
        keep.extend(interior);
        keep.push(0.0);
        let schedule = MaskedSchedule::new(keep).unwrap();
        let model = DiscreteModel::exact(data, schedule).unwrap();
        if let Ok(paths) = enumerate_trajectories(&model) {
            if paths.len() <= max_trajectories {
                return model;
            }
        }
    }
}
