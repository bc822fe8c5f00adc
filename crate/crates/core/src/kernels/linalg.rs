use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-8;

fn check_square_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "{}x{} matrix is not square",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite);
    }
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::InvalidArgument("matrix is not symmetric".into()));
            }
        }
    }
    Ok(())
}

fn cholesky(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    check_square_symmetric(m)?;
    Cholesky::new(m.clone()).ok_or(Error::NotPositiveDefinite)
}

/// Lower-triangular `L` with `L·Lᵀ = matrix`.
pub fn factorize_spd(matrix: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(cholesky(matrix)?.l())
}

/// Inverse of a symmetric positive-definite matrix, symmetrized.
pub fn spd_inverse(matrix: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(symmetrize(cholesky(matrix)?.inverse()))
}

pub fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

pub fn standard_normal_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(dim, (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

pub fn sample_mvn<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
        return Err(Error::Dimension(format!(
            "mean has length {}, covariance is {}x{}",
            mean.len(),
            cov.nrows(),
            cov.ncols()
        )));
    }
    let l = factorize_spd(cov)?;
    Ok(mean + l * standard_normal_vector(mean.len(), rng))
}

/// Gaussian posterior of a conjugate normal linear regression.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPosterior {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianPosterior {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DVector<f64>> {
        sample_mvn(&self.mean, &self.covariance, rng)
    }
}

/// Posterior of `b` in `y = X b + e`, `e ~ N(0, noise_var·I)`, with prior
/// `b ~ N(prior_mean, prior_precision⁻¹)`.
pub fn bayes_linear_update(
    prior_mean: &DVector<f64>,
    prior_precision: &DMatrix<f64>,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    noise_var: f64,
) -> Result<GaussianPosterior> {
    let k = prior_mean.len();
    if prior_precision.nrows() != k
        || prior_precision.ncols() != k
        || x.ncols() != k
        || x.nrows() != y.len()
    {
        return Err(Error::Dimension(format!(
            "prior length {k}, precision {}x{}, design {}x{}, response {}",
            prior_precision.nrows(),
            prior_precision.ncols(),
            x.nrows(),
            x.ncols(),
            y.len()
        )));
    }
    if !(noise_var > 0.0 && noise_var.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise variance {noise_var} must be positive"
        )));
    }
    let xt = x.transpose();
    let precision = symmetrize(prior_precision + &xt * x / noise_var);
    let chol = Cholesky::new(precision).ok_or(Error::Singular)?;
    let rhs = prior_precision * prior_mean + &xt * y / noise_var;
    Ok(GaussianPosterior {
        mean: chol.solve(&rhs),
        covariance: symmetrize(chol.inverse()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.amax()
    }

    #[test]
    fn identity_factor() {
        let i = DMatrix::<f64>::identity(4, 4);
        assert_eq!(factorize_spd(&i).unwrap(), i);
    }

    #[test]
    fn two_by_two_factor() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 3.0]);
        let l = factorize_spd(&a).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 2f64.sqrt()]);
        assert!(max_abs(&(&l - &expect)) < 1e-14);
        assert!(max_abs(&(&l * l.transpose() - &a)) / max_abs(&a) < 1e-10);
    }

    #[test]
    fn indefinite_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(factorize_spd(&a), Err(Error::NotPositiveDefinite)));
        assert!(factorize_spd(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn mvn_rejects_zero_cov_and_bad_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mu = DVector::from_vec(vec![1.0, -2.0]);
        assert!(sample_mvn(&mu, &DMatrix::zeros(2, 2), &mut rng).is_err());
        assert!(matches!(
            sample_mvn(&mu, &DMatrix::identity(3, 3), &mut rng),
            Err(Error::Dimension(_))
        ));
        let tiny = DMatrix::identity(2, 2) * 1e-12;
        let d = sample_mvn(&mu, &tiny, &mut rng).unwrap();
        assert!((d - mu).amax() < 1e-4);
    }

    #[test]
    fn mvn_sample_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mu = DVector::from_vec(vec![0.5, -1.0]);
        let c = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
        let n = 100_000;
        let draws: Vec<_> = (0..n)
            .map(|_| sample_mvn(&mu, &c, &mut rng).unwrap())
            .collect();
        let mean = draws.iter().fold(DVector::zeros(2), |acc, d| acc + d) / n as f64;
        let cov = draws.iter().fold(DMatrix::zeros(2, 2), |acc, d| {
            acc + (d - &mean) * (d - &mean).transpose()
        }) / (n - 1) as f64;
        assert!(max_abs(&(&cov - &c)) <= 0.05 * max_abs(&c), "{cov}");
    }

    #[test]
    fn mvn_is_deterministic_given_seed() {
        let mu = DVector::from_vec(vec![0.0, 0.0, 0.0]);
        let c = DMatrix::identity(3, 3);
        let a = sample_mvn(&mu, &c, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_mvn(&mu, &c, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn flat_prior_identity_design_returns_y() {
        let y = DVector::from_vec(vec![1.5, -0.25, 3.0]);
        let post = bayes_linear_update(
            &DVector::zeros(3),
            &DMatrix::zeros(3, 3),
            &DMatrix::identity(3, 3),
            &y,
            1.0,
        )
        .unwrap();
        assert!((post.mean - y).amax() < 1e-12);
        assert!((post.covariance - DMatrix::<f64>::identity(3, 3)).amax() < 1e-12);
    }

    #[test]
    fn dogmatic_prior_returns_prior_mean() {
        let m0 = DVector::from_vec(vec![0.3, -0.7]);
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let y = DVector::from_vec(vec![10.0, 20.0, 35.0]);
        let post = bayes_linear_update(&m0, &(DMatrix::identity(2, 2) * 1e8), &x, &y, 1.0).unwrap();
        assert!((post.mean - m0).amax() < 1e-4);
    }

    #[test]
    fn matches_hand_rolled_normal_equations() {
        // y = X b + e, flat prior: b = (XᵀX)⁻¹ Xᵀ y solved by Cramer's rule
        let rows = [[1.0, 0.5], [1.0, 1.5], [1.0, 3.0]];
        let y = [1.0, 2.5, 4.0];
        let (mut s00, mut s01, mut s11, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (r, yi) in rows.iter().zip(y) {
            s00 += r[0] * r[0];
            s01 += r[0] * r[1];
            s11 += r[1] * r[1];
            t0 += r[0] * yi;
            t1 += r[1] * yi;
        }
        let det = s00 * s11 - s01 * s01;
        let b0 = (t0 * s11 - t1 * s01) / det;
        let b1 = (s00 * t1 - s01 * t0) / det;

        let x = DMatrix::from_fn(3, 2, |i, j| rows[i][j]);
        let post = bayes_linear_update(
            &DVector::zeros(2),
            &DMatrix::zeros(2, 2),
            &x,
            &DVector::from_row_slice(&y),
            1.0,
        )
        .unwrap();
        assert!((post.mean[0] - b0).abs() < 1e-8);
        assert!((post.mean[1] - b1).abs() < 1e-8);
        // covariance = (XᵀX)⁻¹
        assert!((post.covariance[(0, 0)] - s11 / det).abs() < 1e-8);
        assert!((post.covariance[(0, 1)] + s01 / det).abs() < 1e-8);
    }

    #[test]
    fn singular_combined_precision() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let r = bayes_linear_update(
            &DVector::zeros(2),
            &DMatrix::zeros(2, 2),
            &x,
            &DVector::from_vec(vec![1.0, 2.0]),
            1.0,
        );
        assert!(matches!(r, Err(Error::Singular)));
    }
}
