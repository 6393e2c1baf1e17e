//! Noise schedules for the two families.

use crate::error::{Error, Result};

/// Keep-probability schedule of the masked discrete family.
///
/// `keep_prob[t]` is the cumulative probability that a position still shows
/// its original token at time `t`; masking is absorbing, so it must fall
/// monotonically from 1 at `t = 0` to 0 at `t = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedSchedule {
    keep_prob: Vec<f64>,
}

impl MaskedSchedule {
    pub fn new(keep_prob: Vec<f64>) -> Result<Self> {
        if keep_prob.len() < 2 {
            return Err(Error::invalid("schedule needs horizon >= 1"));
        }
        let t_max = keep_prob.len() - 1;
        if keep_prob[0] != 1.0 {
            return Err(Error::invalid("keep_prob[0] must be 1"));
        }
        if keep_prob[t_max] != 0.0 {
            return Err(Error::invalid("keep_prob[T] must be 0"));
        }
        for w in keep_prob.windows(2) {
            if !(w[1].is_finite() && (0.0..=1.0).contains(&w[1])) || w[1] > w[0] {
                return Err(Error::invalid("keep_prob must be non-increasing within [0,1]"));
            }
        }
        Ok(MaskedSchedule { keep_prob })
    }

    /// Default schedule: keep_prob[t] = 1 - t/T.
    pub fn linear(horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::invalid("horizon must be positive"));
        }
        let t_max = horizon as f64;
        Self::new((0..=horizon).map(|t| 1.0 - t as f64 / t_max).collect())
    }

    pub fn horizon(&self) -> usize {
        self.keep_prob.len() - 1
    }

    pub fn keep_prob(&self, t: usize) -> f64 {
        self.keep_prob[t]
    }

    pub fn check_time(&self, t: usize) -> Result<()> {
        if t > self.horizon() {
            return Err(Error::invalid(format!(
                "time {t} out of range [0, {}]",
                self.horizon()
            )));
        }
        Ok(())
    }
}

/// Per-step and cumulative signal levels of the 1-D Gaussian family.
///
/// `cum_alpha[t]` is the product of `step_alpha[1..=t]`; `cum_alpha[0] = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSchedule {
    step_alpha: Vec<f64>,
    cum_alpha: Vec<f64>,
}

impl GaussianSchedule {
    pub fn new(step_alpha: Vec<f64>) -> Result<Self> {
        if step_alpha.len() < 2 {
            return Err(Error::invalid("schedule needs horizon >= 1"));
        }
        if step_alpha[0] != 1.0 {
            return Err(Error::invalid("step_alpha[0] must be 1 (unused slot)"));
        }
        let mut cum_alpha = Vec::with_capacity(step_alpha.len());
        cum_alpha.push(1.0);
        for (t, &a) in step_alpha.iter().enumerate().skip(1) {
            if !(a.is_finite() && 0.0 < a && a < 1.0) {
                return Err(Error::invalid(format!("step_alpha[{t}] must lie in (0,1)")));
            }
            cum_alpha.push(cum_alpha[t - 1] * a);
        }
        Ok(GaussianSchedule { step_alpha, cum_alpha })
    }

    /// Linearly spaced variance increments beta_t in [beta_min, beta_max];
    /// step_alpha[t] = 1 - beta_t.
    pub fn linear_beta(horizon: usize, beta_min: f64, beta_max: f64) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::invalid("horizon must be positive"));
        }
        if !(0.0 < beta_min && beta_min <= beta_max && beta_max < 1.0) {
            return Err(Error::invalid("need 0 < beta_min <= beta_max < 1"));
        }
        let mut step_alpha = vec![1.0];
        for t in 1..=horizon {
            let frac = if horizon == 1 { 0.0 } else { (t - 1) as f64 / (horizon - 1) as f64 };
            step_alpha.push(1.0 - (beta_min + (beta_max - beta_min) * frac));
        }
        Self::new(step_alpha)
    }

    pub fn horizon(&self) -> usize {
        self.step_alpha.len() - 1
    }

    pub fn step_alpha(&self, t: usize) -> f64 {
        self.step_alpha[t]
    }

    pub fn cum_alpha(&self, t: usize) -> f64 {
        self.cum_alpha[t]
    }

    pub fn check_time(&self, t: usize) -> Result<()> {
        if t > self.horizon() {
            return Err(Error::invalid(format!(
                "time {t} out of range [0, {}]",
                self.horizon()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_masked_schedule_hits_endpoints() {
        let s = MaskedSchedule::linear(4).unwrap();
        assert_eq!(s.horizon(), 4);
        assert_eq!(s.keep_prob(0), 1.0);
        assert_eq!(s.keep_prob(4), 0.0);
        assert!((s.keep_prob(1) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn masked_schedule_rejects_bad_endpoints() {
        assert!(MaskedSchedule::new(vec![0.9, 0.5, 0.0]).is_err());
        assert!(MaskedSchedule::new(vec![1.0, 0.5, 0.1]).is_err());
        assert!(MaskedSchedule::new(vec![1.0, 0.2, 0.5, 0.0]).is_err());
    }

    #[test]
    fn gaussian_cum_alpha_is_running_product() {
        let s = GaussianSchedule::new(vec![1.0, 0.9, 0.8, 0.7]).unwrap();
        assert_eq!(s.cum_alpha(0), 1.0);
        assert!((s.cum_alpha(2) - 0.72).abs() < 1e-15);
        assert!((s.cum_alpha(3) - 0.504).abs() < 1e-15);
    }

    #[test]
    fn linear_beta_endpoints() {
        let s = GaussianSchedule::linear_beta(10, 1e-4, 0.2).unwrap();
        assert!((s.step_alpha(1) - (1.0 - 1e-4)).abs() < 1e-15);
        assert!((s.step_alpha(10) - 0.8).abs() < 1e-15);
        assert!(s.cum_alpha(10) < s.cum_alpha(9));
    }
}
