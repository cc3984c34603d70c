use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ess {
    pub ess: f64,
    /// The series is constant, so autocorrelations are undefined; `ess = n`.
    pub degenerate: bool,
}

/// Sample autocorrelations at lags `0..n` via zero-padded FFT.
pub fn autocorrelation(series: &[f64]) -> Vec<f64> {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let m = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .map(|&x| Complex::new(x - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(m)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    let c0 = buf[0].re;
    buf[..n].iter().map(|c| c.re / c0).collect()
}

/// `n / (1 + 2 Σ ρ̂_i)`, summing lags until the first nonpositive
/// autocorrelation, clamped to `[1, n]`.
pub fn effective_sample_size(series: &[f64]) -> Result<Ess> {
    let n = series.len();
    if n < 10 {
        return Err(Error::InvalidInput(format!(
            "ESS needs at least 10 values, got {n}"
        )));
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(
            "ESS series contains non-finite values".into(),
        ));
    }
    let first = series[0];
    if series.iter().all(|&x| x == first) {
        return Ok(Ess {
            ess: n as f64,
            degenerate: true,
        });
    }
    let rho = autocorrelation(series);
    let tail: f64 = rho[1..].iter().take_while(|&&r| r > 0.0).sum();
    let ess = (n as f64 / (1.0 + 2.0 * tail)).clamp(1.0, n as f64);
    Ok(Ess {
        ess,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn ar1(phi: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut x = 0.0;
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                x = phi * x + z;
                x
            })
            .collect()
    }

    #[test]
    fn autocorrelation_matches_direct_sum() {
        let x = ar1(0.5, 200, 1);
        let rho = autocorrelation(&x);
        let m = x.iter().sum::<f64>() / 200.0;
        let c = |lag: usize| {
            (0..200 - lag)
                .map(|t| (x[t] - m) * (x[t + lag] - m))
                .sum::<f64>()
        };
        for lag in [0, 1, 5, 50] {
            assert!((rho[lag] - c(lag) / c(0)).abs() < 1e-12);
        }
    }

    #[test]
    fn white_noise() {
        let e = effective_sample_size(&ar1(0.0, 100_000, 2)).unwrap();
        assert!((e.ess / 1e5 - 1.0).abs() < 0.1, "{}", e.ess);
    }

    #[test]
    fn ar1_integrated_autocorrelation() {
        let n = 100_000;
        let e = effective_sample_size(&ar1(0.9, n, 3)).unwrap();
        let want = n as f64 * 0.1 / 1.9;
        assert!((e.ess / want - 1.0).abs() < 0.2, "{} vs {want}", e.ess);
    }

    #[test]
    fn duplicated_series_halves_ess() {
        let x = ar1(0.5, 50_000, 4);
        let doubled: Vec<f64> = x.iter().flat_map(|&v| [v, v]).collect();
        // per-value efficiency halves: the doubled series carries no new information
        let a = effective_sample_size(&x).unwrap().ess / x.len() as f64;
        let b = effective_sample_size(&doubled).unwrap().ess / doubled.len() as f64;
        assert!((b / (0.5 * a) - 1.0).abs() < 0.2, "{a} {b}");
    }

    #[test]
    fn degenerate_and_short() {
        let e = effective_sample_size(&[3.0; 20]).unwrap();
        assert!(e.degenerate && e.ess == 20.0);
        assert!(effective_sample_size(&[1.0; 5]).is_err());
    }
}
