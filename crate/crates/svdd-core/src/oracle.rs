//! Ground-truth computations the samplers are checked against: the tilted
//! target distribution, total-variation distance, quantile summaries, and
//! the continuous-case moments by conjugacy and by quadrature.

use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;
use crate::rewards::{Quadratic1d, Reward};
use crate::state::Sample;
use crate::table::{DistributionTable, GaussianMixture};

/// The tilted target: base distribution, reward, and tilt strength.
pub struct TargetSpec<'a> {
    pub base: &'a DistributionTable,
    pub reward: &'a dyn Reward,
    pub alpha: f64,
}

pub struct TargetDistribution {
    pub table: DistributionTable,
    /// log of the normalizing constant `sum_x base(x) exp(r(x)/alpha)`.
    pub log_normalizer: f64,
}

/// Tilt the base by `exp(r(x)/alpha)` and normalize exactly in log space.
pub fn target_distribution(spec: &TargetSpec<'_>) -> Result<TargetDistribution> {
    if !(spec.alpha.is_finite() && spec.alpha > 0.0) {
        return Err(Error::invalid("alpha must be positive"));
    }
    let entries = spec.base.entries();
    let mut log_w = Vec::with_capacity(entries.len());
    for (seq, p) in entries {
        let r = spec.reward.eval(&Sample::Seq(seq.clone()))?;
        log_w.push(p.ln() + r / spec.alpha);
    }
    let log_z = log_sum_exp(&log_w);
    if log_z == f64::NEG_INFINITY || !log_z.is_finite() {
        return Err(Error::Distribution("tilted distribution has no mass".into()));
    }
    let tilted = entries
        .iter()
        .zip(log_w.iter())
        .map(|((seq, _), lw)| (seq.clone(), (lw - log_z).exp()))
        .collect();
    Ok(TargetDistribution {
        table: DistributionTable::new(spec.base.k(), spec.base.seq_len(), tilted)?,
        log_normalizer: log_z,
    })
}

/// Half the L1 distance over the union support.
pub fn tv_distance(p: &DistributionTable, q: &DistributionTable) -> Result<f64> {
    if p.k() != q.k() || p.seq_len() != q.seq_len() {
        return Err(Error::invalid("tables live on different domains"));
    }
    // both entry lists are sorted; merge
    let (pe, qe) = (p.entries(), q.entries());
    let (mut i, mut j) = (0, 0);
    let mut l1 = 0.0;
    while i < pe.len() || j < qe.len() {
        match (pe.get(i), qe.get(j)) {
            (Some((sp, vp)), Some((sq, vq))) => match sp.cmp(sq) {
                std::cmp::Ordering::Equal => {
                    l1 += (vp - vq).abs();
                    i += 1;
                    j += 1;
                }
                std::cmp::Ordering::Less => {
                    l1 += vp;
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    l1 += vq;
                    j += 1;
                }
            },
            (Some((_, vp)), None) => {
                l1 += vp;
                i += 1;
            }
            (None, Some((_, vq))) => {
                l1 += vq;
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    Ok(0.5 * l1)
}

/// Mean and nearest-rank top-quantiles of a reward list. The top-`q` value
/// is the `ceil((1-q) n)`-th smallest reward, with no interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileSummary {
    pub mean: f64,
    /// `(level, reward at that top-level)` in the order requested.
    pub levels: Vec<(f64, f64)>,
}

pub fn quantile_summary(rewards: &[f64], levels: &[f64]) -> Result<QuantileSummary> {
    if rewards.is_empty() {
        return Err(Error::invalid("no rewards"));
    }
    if levels.iter().any(|q| !(0.0 < *q && *q < 1.0)) {
        return Err(Error::invalid("levels must lie in (0, 1)"));
    }
    let mut sorted = rewards.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let levels = levels
        .iter()
        .map(|&q| {
            let rank = ((1.0 - q) * n as f64).ceil() as usize;
            (q, sorted[rank.clamp(1, n) - 1])
        })
        .collect();
    Ok(QuantileSummary { mean: crate::numeric::mean(rewards), levels })
}

/// Mean and variance of the tilted density `mixture(x) exp(-(x-c)^2/alpha)`
/// by Gaussian conjugacy: each component is conjugate to the quadratic
/// tilt, and component responsibilities pick up the tilt evidence.
pub fn continuous_target_moments(
    mixture: &GaussianMixture,
    reward: &Quadratic1d,
    alpha: f64,
) -> Result<(f64, f64)> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::invalid("alpha must be positive"));
    }
    let c = reward.center();
    let mut log_w = Vec::new();
    let mut means = Vec::new();
    let mut vars = Vec::new();
    for comp in mixture.components() {
        let base_var = comp.std * comp.std;
        // exp(-(x-c)^2/alpha) is an unnormalized Gaussian with variance
        // alpha/2; evidence is the convolution density at the center
        let s2 = base_var + alpha / 2.0;
        let d = c - comp.mean;
        log_w.push(comp.weight.ln() - 0.5 * (s2.ln() + d * d / s2));
        let precision = 1.0 / base_var + 2.0 / alpha;
        means.push((comp.mean / base_var + 2.0 * c / alpha) / precision);
        vars.push(1.0 / precision);
    }
    let resp = crate::numeric::normalize_log_weights(&log_w)
        .ok_or_else(|| Error::Distribution("tilted mixture has no mass".into()))?;
    let mean: f64 = resp.iter().zip(means.iter()).map(|(r, m)| r * m).sum();
    let second: f64 = resp
        .iter()
        .zip(means.iter().zip(vars.iter()))
        .map(|(r, (m, v))| r * (v + m * m))
        .sum();
    Ok((mean, second - mean * mean))
}

/// The same moments by trapezoid quadrature on a grid spanning ten
/// standard deviations around every component, 2^16 + 1 points. The tilt
/// never exceeds one, so the base's tails bound the truncation error.
pub fn continuous_target_moments_quadrature(
    mixture: &GaussianMixture,
    reward: &Quadratic1d,
    alpha: f64,
) -> Result<(f64, f64)> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::invalid("alpha must be positive"));
    }
    let lo = mixture
        .components()
        .iter()
        .map(|c| c.mean - 10.0 * c.std)
        .fold(f64::INFINITY, f64::min);
    let hi = mixture
        .components()
        .iter()
        .map(|c| c.mean + 10.0 * c.std)
        .fold(f64::NEG_INFINITY, f64::max);
    let n = 1usize << 16;
    let h = (hi - lo) / n as f64;
    let density = |x: f64| -> f64 {
        let base: f64 = mixture
            .components()
            .iter()
            .map(|c| {
                let z = (x - c.mean) / c.std;
                c.weight * (-0.5 * z * z).exp() / (c.std * (2.0 * std::f64::consts::PI).sqrt())
            })
            .sum();
        let d = x - reward.center();
        base * (-(d * d) / alpha).exp()
    };
    let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for i in 0..=n {
        let x = lo + i as f64 * h;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        let f = w * density(x);
        z += f;
        m1 += f * x;
        m2 += f * x * x;
    }
    if z <= 0.0 {
        return Err(Error::Distribution("quadrature found no mass".into()));
    }
    let mean = m1 / z;
    Ok((mean, m2 / z - mean * mean))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewards::MotifCount;

    fn tiny_marginal() -> DistributionTable {
        DistributionTable::new(
            2,
            2,
            vec![
                (vec![0, 0], 0.375),
                (vec![0, 1], 0.125),
                (vec![1, 0], 0.125),
                (vec![1, 1], 0.375),
            ],
        )
        .unwrap()
    }

    fn count_a() -> MotifCount {
        MotifCount::new(vec![0], 2).unwrap()
    }

    struct ZeroReward;
    impl Reward for ZeroReward {
        fn name(&self) -> &str {
            "zero"
        }
        fn range(&self) -> (f64, f64) {
            (0.0, 0.0)
        }
        fn eval(&self, _: &Sample) -> Result<f64> {
            Ok(0.0)
        }
    }

    #[test]
    fn zero_reward_leaves_base_unchanged() {
        let base = tiny_marginal();
        let spec = TargetSpec { base: &base, reward: &ZeroReward, alpha: 1.0 };
        let out = target_distribution(&spec).unwrap();
        assert!(tv_distance(&out.table, &base).unwrap() < 1e-12);
        assert!(out.log_normalizer.abs() < 1e-12);
    }

    #[test]
    fn tilted_tiny_instance_matches_hand_computation() {
        // weights: .375 e^2, .125 e, .125 e, .375; computed directly here,
        // independently of the log-space implementation
        let base = tiny_marginal();
        let reward = count_a();
        let spec = TargetSpec { base: &base, reward: &reward, alpha: 1.0 };
        let out = target_distribution(&spec).unwrap();
        let z = 0.375 * 2.0f64.exp() + 0.25 * 1.0f64.exp() + 0.375;
        assert!((out.table.prob(&[0, 0]) - 0.375 * 2.0f64.exp() / z).abs() < 1e-12);
        assert!((out.table.prob(&[0, 1]) - 0.125 * 1.0f64.exp() / z).abs() < 1e-12);
        assert!((out.table.prob(&[1, 1]) - 0.375 / z).abs() < 1e-12);
        assert!((out.log_normalizer - z.ln()).abs() < 1e-12);
        // frozen decimals
        assert!((out.table.prob(&[0, 0]) - 0.7243).abs() < 1e-4);
        assert!((out.table.prob(&[0, 1]) - 0.0888).abs() < 1e-4);
        assert!((out.table.prob(&[1, 1]) - 0.0980).abs() < 1e-4);
    }

    #[test]
    fn sharp_tilt_concentrates_on_the_best_sequence() {
        let base = tiny_marginal();
        let reward = count_a();
        let spec = TargetSpec { base: &base, reward: &reward, alpha: 0.01 };
        let out = target_distribution(&spec).unwrap();
        assert!(out.table.prob(&[0, 0]) >= 1.0 - 1e-10);
    }

    #[test]
    fn target_output_sums_to_one_tightly() {
        let base = tiny_marginal();
        let reward = count_a();
        for alpha in [0.05, 0.5, 5.0] {
            let out =
                target_distribution(&TargetSpec { base: &base, reward: &reward, alpha }).unwrap();
            let total: f64 = out.table.entries().iter().map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_tilting_on_enumerated_support() {
        let base = tiny_marginal();
        let reward = count_a();
        let out =
            target_distribution(&TargetSpec { base: &base, reward: &reward, alpha: 0.7 }).unwrap();
        for (x, px) in base.entries() {
            for (y, py) in base.entries() {
                let rx = reward.eval(&Sample::Seq(x.clone())).unwrap();
                let ry = reward.eval(&Sample::Seq(y.clone())).unwrap();
                if rx > ry {
                    let tilted_ratio = out.table.prob(x) / out.table.prob(y);
                    assert!(tilted_ratio > px / py);
                }
            }
        }
    }

    #[test]
    fn tv_examples() {
        let p = tiny_marginal();
        assert_eq!(tv_distance(&p, &p).unwrap(), 0.0);
        let point_a = DistributionTable::new(2, 2, vec![(vec![0, 0], 1.0)]).unwrap();
        let point_b = DistributionTable::new(2, 2, vec![(vec![1, 1], 1.0)]).unwrap();
        assert_eq!(tv_distance(&point_a, &point_b).unwrap(), 1.0);
        let half = DistributionTable::new(2, 1, vec![(vec![0], 0.5), (vec![1], 0.5)]).unwrap();
        let skew = DistributionTable::new(2, 1, vec![(vec![0], 0.75), (vec![1], 0.25)]).unwrap();
        assert!((tv_distance(&half, &skew).unwrap() - 0.25).abs() < 1e-12);
        assert!(tv_distance(&p, &half).is_err());
    }

    #[test]
    fn quantile_examples() {
        let rewards: Vec<f64> = (1..=10).map(|x| x as f64).collect();
        let s = quantile_summary(&rewards, &[0.2, 0.1]).unwrap();
        assert_eq!(s.levels[0], (0.2, 8.0));
        assert_eq!(s.levels[1], (0.1, 9.0));
        assert!((s.mean - 5.5).abs() < 1e-12);
        let constant = vec![3.0; 7];
        let s = quantile_summary(&constant, &[0.2, 0.1]).unwrap();
        assert_eq!(s.levels[0].1, 3.0);
        assert_eq!(s.levels[1].1, 3.0);
        assert!(quantile_summary(&[], &[0.5]).is_err());
        assert!(quantile_summary(&rewards, &[1.0]).is_err());
    }

    #[test]
    fn standard_normal_tilted_moments() {
        // base N(0,1), r = -(x-1)^2: precision 1 + 2/alpha,
        // mean 2/(alpha+2), variance alpha/(alpha+2)
        let m = GaussianMixture::parse("1.0 0.0 1.0").unwrap();
        let r = Quadratic1d::new(1.0).unwrap();
        let (mean, var) = continuous_target_moments(&m, &r, 1.0).unwrap();
        assert!((mean - 2.0 / 3.0).abs() < 1e-12);
        assert!((var - 1.0 / 3.0).abs() < 1e-12);
        // vanishing tilt
        let (mean, var) = continuous_target_moments(&m, &r, 1e6).unwrap();
        assert!(mean.abs() < 1e-5);
        assert!((var - 1.0).abs() < 1e-5);
        // symmetric tilt centered on the base mean
        let m = GaussianMixture::parse("1.0 0.7 1.3").unwrap();
        let r = Quadratic1d::new(0.7).unwrap();
        let (mean, _) = continuous_target_moments(&m, &r, 0.8).unwrap();
        assert!((mean - 0.7).abs() < 1e-12);
    }

    #[test]
    fn conjugacy_agrees_with_quadrature_on_random_configs() {
        let mut stream = crate::rng::Stream::new(20);
        for _ in 0..20 {
            let comps = 1 + (stream.next_u64() % 3) as usize;
            let mut weights: Vec<f64> =
                (0..comps).map(|_| 0.2 + stream.next_f64()).collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            let text: String = weights
                .iter()
                .map(|w| {
                    let mean = -2.0 + 4.0 * stream.next_f64();
                    let std = 0.5 + 1.5 * stream.next_f64();
                    format!("{w} {mean} {std}\n")
                })
                .collect();
            let m = GaussianMixture::parse(&text).unwrap();
            let r = Quadratic1d::new(-3.0 + 6.0 * stream.next_f64()).unwrap();
            let alpha = 0.3 + 2.7 * stream.next_f64();
            let (cm, cv) = continuous_target_moments(&m, &r, alpha).unwrap();
            let (qm, qv) = continuous_target_moments_quadrature(&m, &r, alpha).unwrap();
            assert!((cm - qm).abs() < 1e-6, "mean {cm} vs {qm}");
            assert!((cv - qv).abs() < 1e-6, "var {cv} vs {qv}");
        }
    }
}
