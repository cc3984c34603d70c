//! Small numerical helpers shared across modules.

/// `log(sum(exp(values)))`, stable against overflow. Returns `-inf` for an
/// empty slice or when every value is `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `log(mean(exp(values)))`.
pub fn log_mean_exp(values: &[f64]) -> f64 {
    log_sum_exp(values) - (values.len() as f64).ln()
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance with the `n - 1` denominator.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64
}

/// Moments of `exp(a_t)` computed on a common scale.
///
/// Returns `(shift, mean, sd)` such that the natural-scale values are
/// `exp(shift) * w_t` with `mean(w) = mean` and `sd(w) = sd`.
pub(crate) fn scaled_exp_moments(log_values: &[f64]) -> (f64, f64, f64) {
    let shift = log_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_values.iter().map(|&a| (a - shift).exp()).collect();
    (shift, mean(&w), sample_variance(&w).sqrt())
}

/// Log of the volume of the unit ball in `d` dimensions.
pub fn log_unit_ball_volume(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    half * std::f64::consts::PI.ln() - statrs::function::gamma::ln_gamma(half + 1.0)
}

/// Neumaier-compensated sum. Infinite terms give the plain IEEE result.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if !t.is_finite() {
            sum = t;
            continue;
        }
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    if sum.is_finite() {
        sum + comp
    } else {
        sum
    }
}
