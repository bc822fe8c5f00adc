use crate::error::{Error, Result};

pub const GEWEKE_FIRST: f64 = 0.1;
pub const GEWEKE_LAST: f64 = 0.5;

fn autocovariances(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    (0..=max_lag)
        .map(|lag| {
            x[..n - lag]
                .iter()
                .zip(&x[lag..])
                .map(|(a, b)| (a - mean) * (b - mean))
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

/// Spectral density at frequency zero from an autoregressive fit: Yule-Walker
/// coefficients by Levinson-Durbin recursion, order chosen by AIC up to
/// `min(n - 1, ⌊10·log10 n⌋)`, then `σ² / (1 − Σφ)²`.
pub fn spectral_density_zero(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let max_order = ((10.0 * (n as f64).log10()).floor() as usize).min(n - 1);
    let acov = autocovariances(x, max_order);
    if !(acov[0] > 0.0) {
        return 0.0;
    }
    let mut phi: Vec<f64> = Vec::new();
    let mut var = acov[0];
    let mut best = (n as f64 * var.ln(), 0usize, var, Vec::new());
    for k in 1..=max_order {
        let num = acov[k]
            - phi
                .iter()
                .enumerate()
                .map(|(i, p)| p * acov[k - 1 - i])
                .sum::<f64>();
        let refl = num / var;
        let prev = phi.clone();
        phi.push(refl);
        for i in 0..k - 1 {
            phi[i] = prev[i] - refl * prev[k - 2 - i];
        }
        var *= 1.0 - refl * refl;
        if !(var > 0.0) {
            break;
        }
        let aic = n as f64 * var.ln() + 2.0 * k as f64;
        if aic < best.0 {
            best = (aic, k, var, phi.clone());
        }
    }
    let (_, _, var, coeffs) = best;
    let denom = 1.0 - coeffs.iter().sum::<f64>();
    var / (denom * denom)
}

/// Spectral density at frequency zero from Bartlett-weighted
/// autocovariances with bandwidth `⌊√n⌋`.
pub fn spectral_density_zero_bartlett(x: &[f64]) -> f64 {
    let n = x.len();
    let bandwidth = ((n as f64).sqrt().floor() as usize).min(n - 1);
    let acov = autocovariances(x, bandwidth);
    let mut s = acov[0];
    for (lag, g) in acov.iter().enumerate().skip(1) {
        s += 2.0 * (1.0 - lag as f64 / (bandwidth as f64 + 1.0)) * g;
    }
    s.max(0.0)
}

/// Geweke's convergence statistic: difference of the means of the first
/// `first_frac` and last `last_frac` of the chain, standardized by their
/// spectral variances.
pub fn geweke_z(draws: &[f64], first_frac: f64, last_frac: f64) -> Result<f64> {
    if !(first_frac > 0.0 && last_frac > 0.0 && first_frac + last_frac <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "Geweke windows {first_frac} and {last_frac} must be positive and not overlap"
        )));
    }
    let n = draws.len();
    let na = (first_frac * n as f64).floor() as usize;
    let nb = (last_frac * n as f64).floor() as usize;
    if na < 2 || nb < 2 {
        return Err(Error::DiagnosticUnavailable(format!(
            "{n} draws are too few for Geweke windows"
        )));
    }
    let a = &draws[..na];
    let b = &draws[n - nb..];
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let var = spectral_density_zero(a) / na as f64 + spectral_density_zero(b) / nb as f64;
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::DiagnosticUnavailable(
            "chain has zero spectral variance".into(),
        ));
    }
    Ok((mean(a) - mean(b)) / var.sqrt())
}
