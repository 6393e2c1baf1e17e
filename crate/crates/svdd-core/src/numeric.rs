//! Log-space helpers for weight arithmetic.
//!
//! All importance weights in the engine are handled as log-weights with a
//! subtract-max stabilization; `exp(v/alpha)` overflows f64 for small alpha
//! long before the weights themselves are extreme.

/// log(sum(exp(xs))) with subtract-max stabilization.
/// Empty input and all -inf both yield -inf.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Normalize log-weights to probabilities. Returns `None` when every entry
/// is -inf (no mass to normalize).
pub fn normalize_log_weights(log_w: &[f64]) -> Option<Vec<f64>> {
    let z = log_sum_exp(log_w);
    if z == f64::NEG_INFINITY {
        return None;
    }
    Some(log_w.iter().map(|&lw| (lw - z).exp()).collect())
}

/// Index of the maximum, first occurrence winning ties.
pub fn argmax(xs: &[f64]) -> usize {
    debug_assert!(!xs.is_empty());
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean (sample standard deviation / sqrt(n)).
pub fn std_error(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let var = xs.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_matches_direct_sum_in_safe_range() {
        let xs = [0.0f64, 1.0, -2.0];
        let direct = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - direct).abs() < 1e-12);
    }

    #[test]
    fn lse_survives_extreme_inputs() {
        let xs = [1e4, 1e4 + 1.0];
        let got = log_sum_exp(&xs);
        let expect = 1e4 + 1.0 + (1.0 + (-1.0f64).exp()).ln();
        assert!((got - expect).abs() < 1e-9);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }

    #[test]
    fn normalized_weights_sum_to_one() {
        let w = normalize_log_weights(&[3000.0, 3001.0, 2999.0]).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|&p| p.is_finite() && p >= 0.0));
        assert!(normalize_log_weights(&[f64::NEG_INFINITY; 3]).is_none());
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.2, 1.7, 0.5]), 1);
        assert_eq!(argmax(&[1.0, 1.0, 0.0]), 0);
    }
}
