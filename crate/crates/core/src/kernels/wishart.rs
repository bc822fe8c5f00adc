use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};

use super::linalg::{factorize_spd, spd_inverse, symmetrize};
use crate::error::{Error, Result};

/// Inverse-Wishart draw, mean `scale / (df - p - 1)`.
///
/// Draws `W ~ Wishart(df, scale⁻¹)` with the Bartlett decomposition and
/// returns `W⁻¹`.
pub fn sample_inverse_wishart<R: Rng + ?Sized>(
    df: f64,
    scale: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let p = scale.nrows();
    if !(df.is_finite() && df > p as f64 - 1.0) {
        return Err(Error::InvalidArgument(format!(
            "inverse-Wishart needs df > p - 1 = {}, got {df}",
            p as f64 - 1.0
        )));
    }
    let l = factorize_spd(&spd_inverse(scale)?)?;
    let mut a = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        let chi =
            ChiSquared::new(df - i as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let m = l * a;
    let m_inv = m
        .solve_lower_triangular(&DMatrix::identity(p, p))
        .ok_or(Error::Singular)?;
    Ok(symmetrize(m_inv.transpose() * m_inv))
}

/// Inverse-gamma draw with density ∝ x^(-shape-1) exp(-scale/x).
pub fn sample_inverse_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "inverse-gamma needs positive shape and scale, got ({shape}, {scale})"
        )));
    }
    let g = Gamma::new(shape, 1.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    loop {
        let x = g.sample(rng);
        if x > 0.0 {
            return Ok(scale / x);
        }
    }
}
