//! Full-conditional updates. Household-level updates run in parallel; each
//! household draws from its own rng stream, so results do not depend on
//! scheduling.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::state::{SamplerState, Stage, SweepRng};
use crate::data::{
    BrandAttributeMatrix, HouseholdParams, PanelDataset, PopulationParams, PriorConfig, N_MARKETING,
};
use crate::error::{Error, Result};
use crate::kernels::{
    bayes_linear_update, factorize_spd, sample_inverse_gamma, sample_inverse_wishart,
    sample_truncated_normal, spd_inverse, TruncationBounds,
};

fn collect_units(results: Vec<Result<()>>) -> Result<()> {
    results.into_iter().collect()
}

/// Resamples every latent utility one brand at a time from its unit-variance
/// normal conditional, truncated so the chosen brand stays the argmax, then
/// translates each occasion's utilities by a common shift drawn from its
/// exact conditional `N(mean(μ − U), 1/J)`. The shift leaves the argmax
/// alone and removes the slow drift of the occasion level that one-at-a-time
/// updates suffer from.
pub fn draw_latent_utilities(
    state: &mut SamplerState,
    data: &PanelDataset,
    rng: &SweepRng,
) -> Result<()> {
    let j = data.n_brands();
    let results = state
        .latent
        .par_iter_mut()
        .zip(state.households.par_iter())
        .zip(data.households().par_iter())
        .enumerate()
        .map(|(h, ((u, hp), hh))| {
            let mut rng = rng.household(Stage::Latent, h);
            let mut means = vec![0.0; j];
            for (t, occ) in hh.occasions.iter().enumerate() {
                let row = &mut u[t * j..(t + 1) * j];
                let c = occ.chosen;
                for (k, m) in means.iter_mut().enumerate() {
                    *m = hp.utility(occ, k);
                }
                for k in 0..j {
                    let bounds = if k == c {
                        let lower = row
                            .iter()
                            .enumerate()
                            .filter(|&(i, _)| i != c)
                            .map(|(_, &v)| v)
                            .fold(f64::NEG_INFINITY, f64::max);
                        TruncationBounds::new(lower, f64::INFINITY)?
                    } else {
                        TruncationBounds::new(f64::NEG_INFINITY, row[c])?
                    };
                    row[k] = sample_truncated_normal(means[k], 1.0, bounds, &mut rng)?;
                }
                let gap = means
                    .iter()
                    .zip(row.iter())
                    .map(|(m, x)| m - x)
                    .sum::<f64>()
                    / j as f64;
                let z: f64 = rng.sample(StandardNormal);
                let shift = gap + z / (j as f64).sqrt();
                row.iter_mut().for_each(|x| *x += shift);
            }
            Ok(())
        })
        .collect();
    collect_units(results)
}

/// Per household: joint conjugate draw of the brand intercepts and marketing
/// coefficients, followed by fresh occasion levels of the utilities.
///
/// The choice only depends on utility differences within an occasion, so the
/// coefficients are drawn from the regression of the occasion-centered
/// utilities on occasion-centered brand indicators, display and price (unit
/// noise), with the occasion levels integrated out. The engineering
/// parameters are integrated out too: the intercept prior is
/// `α_h ~ N(D·delta_mean, D·delta_cov·Dᵀ + σ²_φ I)`, and `β_h ~ N(beta_mean,
/// beta_cov)`. The household's `δ_h` must be redrawn afterwards, which
/// [`draw_engineering_params`] does. With as many brands as attributes only
/// the sum `D·delta_cov·Dᵀ + σ²_φ I` is identified, and conditioning on `δ_h`
/// here would tie the intercepts to the slow drift of that split. Each
/// occasion's level is then drawn from `N(mean(μ_t), 1/J)` given the new
/// coefficients. Integrating the levels out breaks the feedback between the
/// price coefficient and the utility levels, and drawing intercepts and
/// coefficients together avoids their strong posterior correlation.
pub fn draw_household_coefficients(
    state: &mut SamplerState,
    data: &PanelDataset,
    attrs: &BrandAttributeMatrix,
    rng: &SweepRng,
) -> Result<()> {
    let j = data.n_brands();
    let p = j + N_MARKETING;
    let pop = &state.population;
    let d = attrs.to_matrix();
    let alpha_cov =
        &d * &pop.delta_cov * d.transpose() + DMatrix::identity(j, j) * pop.intangible_var;
    let mut prior_precision = DMatrix::zeros(p, p);
    prior_precision
        .view_mut((0, 0), (j, j))
        .copy_from(&spd_inverse(&alpha_cov)?);
    prior_precision
        .view_mut((j, j), (N_MARKETING, N_MARKETING))
        .copy_from(&spd_inverse(&pop.beta_cov)?);
    let alpha_mean = &d * &pop.delta_mean;
    let results = state
        .households
        .par_iter_mut()
        .zip(state.latent.par_iter_mut())
        .zip(data.households().par_iter())
        .enumerate()
        .map(|(h, ((hp, u), hh))| {
            let mut rng = rng.household(Stage::Household, h);
            let n = hh.occasions.len() * j;
            let mut x = DMatrix::zeros(n, p);
            let mut y = DVector::zeros(n);
            let inv_j = 1.0 / j as f64;
            for (t, occ) in hh.occasions.iter().enumerate() {
                let row = &u[t * j..(t + 1) * j];
                let u_bar = row.iter().sum::<f64>() * inv_j;
                let d_bar = occ.displays.iter().sum::<f64>() * inv_j;
                let p_bar = occ.prices.iter().sum::<f64>() * inv_j;
                for k in 0..j {
                    let i = t * j + k;
                    for c in 0..j {
                        x[(i, c)] = if c == k { 1.0 - inv_j } else { -inv_j };
                    }
                    x[(i, j)] = occ.displays[k] - d_bar;
                    x[(i, j + 1)] = occ.prices[k] - p_bar;
                    y[i] = row[k] - u_bar;
                }
            }
            let mut prior_mean = DVector::zeros(p);
            prior_mean.rows_mut(0, j).copy_from(&alpha_mean);
            prior_mean
                .rows_mut(j, N_MARKETING)
                .copy_from(&pop.beta_mean);
            let post = bayes_linear_update(&prior_mean, &prior_precision, &x, &y, 1.0)?;
            let draw = post.sample(&mut rng)?;
            hp.alpha.copy_from_slice(&draw.as_slice()[..j]);
            hp.beta.copy_from_slice(&draw.as_slice()[j..]);
            hp.refresh_intangible(attrs);

            for (t, occ) in hh.occasions.iter().enumerate() {
                let row = &mut u[t * j..(t + 1) * j];
                let gap = (0..j).map(|k| hp.utility(occ, k) - row[k]).sum::<f64>() * inv_j;
                let z: f64 = rng.sample(StandardNormal);
                let shift = gap + z * inv_j.sqrt();
                row.iter_mut().for_each(|v| *v += shift);
            }
            Ok(())
        })
        .collect();
    collect_units(results)
}

/// Per household and brand: exact conditional draw along the translation
/// `α_hj → α_hj + g`, `U_htj → U_htj + g` for every occasion. Utility
/// residuals are unchanged, so `α_hj + g` follows its prior
/// `N(D_j·δ_h, σ²_φ)`, truncated to the shifts that keep every choice the
/// argmax. Brands a household rarely buys are weakly pinned by their
/// utilities, and this move lets their intercepts travel far in one step.
pub fn draw_brand_shifts(
    state: &mut SamplerState,
    data: &PanelDataset,
    attrs: &BrandAttributeMatrix,
    rng: &SweepRng,
) -> Result<()> {
    let j = data.n_brands();
    let sd_phi = state.population.intangible_var.sqrt();
    let results = state
        .households
        .par_iter_mut()
        .zip(state.latent.par_iter_mut())
        .zip(data.households().par_iter())
        .enumerate()
        .map(|(h, ((hp, u), hh))| {
            let mut rng = rng.household(Stage::Shift, h);
            let tangible = attrs.tangible(&hp.delta);
            for k in 0..j {
                let mut lo = f64::NEG_INFINITY;
                let mut hi = f64::INFINITY;
                for (t, occ) in hh.occasions.iter().enumerate() {
                    let row = &u[t * j..(t + 1) * j];
                    let c = occ.chosen;
                    if c == k {
                        let rival = row
                            .iter()
                            .enumerate()
                            .filter(|&(i, _)| i != k)
                            .map(|(_, &v)| v)
                            .fold(f64::NEG_INFINITY, f64::max);
                        lo = lo.max(rival - row[k]);
                    } else {
                        hi = hi.min(row[c] - row[k]);
                    }
                }
                let a = hp.alpha[k];
                let Ok(bounds) = TruncationBounds::new(a + lo, a + hi) else {
                    continue;
                };
                let shift = sample_truncated_normal(tangible[k], sd_phi, bounds, &mut rng)? - a;
                hp.alpha[k] += shift;
                for t in 0..hh.occasions.len() {
                    u[t * j + k] += shift;
                }
            }
            hp.refresh_intangible(attrs);
            Ok(())
        })
        .collect();
    collect_units(results)
}

/// Blocked draw of the engineering layer. The population mean is drawn with
/// the household parameters integrated out, `α_h ~ N(D·delta_mean,
/// D·delta_cov·Dᵀ + σ²_φ I)`, then each household's `δ_h` from its regression
/// of `α_h` on the attribute matrix with noise `σ²_φ` and prior
/// `N(delta_mean, delta_cov)`. Intangibles are recomputed from the new draw.
pub fn draw_engineering_params(
    state: &mut SamplerState,
    attrs: &BrandAttributeMatrix,
    priors: &PriorConfig,
    rng: &SweepRng,
) -> Result<()> {
    let d = attrs.to_matrix();
    let j = attrs.n_brands();
    {
        let pop = &state.population;
        let marginal =
            &d * &pop.delta_cov * d.transpose() + DMatrix::identity(j, j) * pop.intangible_var;
        let l = factorize_spd(&marginal)?;
        let wd = l.solve_lower_triangular(&d).ok_or(Error::Singular)?;
        let r = d.ncols();
        let n = state.households.len();
        let mut x = DMatrix::zeros(n * j, r);
        let mut y = DVector::zeros(n * j);
        for (i, hp) in state.households.iter().enumerate() {
            let a = DVector::from_column_slice(&hp.alpha);
            x.view_mut((i * j, 0), (j, r)).copy_from(&wd);
            y.rows_mut(i * j, j)
                .copy_from(&l.solve_lower_triangular(&a).ok_or(Error::Singular)?);
        }
        let mean = bayes_linear_update(
            &priors.delta_mean,
            &priors.delta_mean_precision,
            &x,
            &y,
            1.0,
        )?
        .sample(&mut rng.global(Stage::Engineering))?;
        state.population.delta_mean = mean;
    }
    let pop = &state.population;
    let prior_precision = spd_inverse(&pop.delta_cov)?;
    let results = state
        .households
        .par_iter_mut()
        .enumerate()
        .map(|(h, hp)| {
            let y = DVector::from_column_slice(&hp.alpha);
            let post = bayes_linear_update(
                &pop.delta_mean,
                &prior_precision,
                &d,
                &y,
                pop.intangible_var,
            )?;
            let draw = post.sample(&mut rng.household(Stage::Engineering, h))?;
            hp.delta.copy_from_slice(draw.as_slice());
            hp.refresh_intangible(attrs);
            Ok(())
        })
        .collect();
    collect_units(results)
}

/// Conjugate normal draw of a population mean given household vectors with
/// known covariance, by whitening each household vector and stacking.
fn draw_population_mean<R: Rng>(
    vectors: &[DVector<f64>],
    cov: &DMatrix<f64>,
    prior_mean: &DVector<f64>,
    prior_precision: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let p = prior_mean.len();
    let l = factorize_spd(cov)?;
    let l_inv = l
        .solve_lower_triangular(&DMatrix::identity(p, p))
        .ok_or(Error::Singular)?;
    let n = vectors.len();
    let mut x = DMatrix::zeros(n * p, p);
    let mut y = DVector::zeros(n * p);
    for (i, v) in vectors.iter().enumerate() {
        x.view_mut((i * p, 0), (p, p)).copy_from(&l_inv);
        y.rows_mut(i * p, p).copy_from(&(&l_inv * v));
    }
    bayes_linear_update(prior_mean, prior_precision, &x, &y, 1.0)?.sample(rng)
}

fn scatter(vectors: &[DVector<f64>], center: &DVector<f64>) -> DMatrix<f64> {
    let p = center.len();
    vectors.iter().fold(DMatrix::zeros(p, p), |acc, v| {
        let d = v - center;
        acc + &d * d.transpose()
    })
}

/// Marketing mean and covariance, engineering covariance and intangible
/// variance given the household layer. The engineering mean is drawn in
/// [`draw_engineering_params`].
pub fn draw_population_hyperparams(
    state: &mut SamplerState,
    attrs: &BrandAttributeMatrix,
    priors: &PriorConfig,
    rng: &SweepRng,
) -> Result<()> {
    let mut rng = rng.global(Stage::Population);
    let h = state.households.len() as f64;
    let betas: Vec<DVector<f64>> = state
        .households
        .iter()
        .map(|hp| DVector::from_column_slice(&hp.beta))
        .collect();
    let deltas: Vec<DVector<f64>> = state
        .households
        .iter()
        .map(|hp| DVector::from_column_slice(&hp.delta))
        .collect();

    let pop = &state.population;
    let beta_mean = draw_population_mean(
        &betas,
        &pop.beta_cov,
        &priors.beta_mean,
        &priors.beta_mean_precision,
        &mut rng,
    )?;
    let beta_cov = sample_inverse_wishart(
        priors.beta_cov_df + h,
        &(&priors.beta_cov_scale + scatter(&betas, &beta_mean)),
        &mut rng,
    )?;
    let delta_mean = pop.delta_mean.clone();
    let delta_cov = sample_inverse_wishart(
        priors.delta_cov_df + h,
        &(&priors.delta_cov_scale + scatter(&deltas, &delta_mean)),
        &mut rng,
    )?;

    let mut ss = 0.0;
    let mut count = 0usize;
    for hp in &state.households {
        let t = attrs.tangible(&hp.delta);
        for (a, tj) in hp.alpha.iter().zip(t.iter()) {
            ss += (a - tj) * (a - tj);
            count += 1;
        }
    }
    let intangible_var = sample_inverse_gamma(
        priors.intangible_shape + 0.5 * count as f64,
        priors.intangible_scale + 0.5 * ss,
        &mut rng,
    )?;

    state.population = PopulationParams {
        beta_mean,
        beta_cov,
        delta_mean,
        delta_cov,
        intangible_var,
    };
    Ok(())
}

/// Exact conditional draw along the direction the choice likelihood cannot
/// see: a common shift of a household's utilities, intercepts and constant
/// engineering parameter, followed by a common shift of every household and
/// the population constant. Only the Gaussian priors on the constant change
/// under these translations, so each shift is drawn from them directly.
///
/// Requires the first attribute column to be the constant.
pub fn draw_level_shift(
    state: &mut SamplerState,
    attrs: &BrandAttributeMatrix,
    priors: &PriorConfig,
    rng: &SweepRng,
) -> Result<()> {
    let pop = &state.population;
    let omega = spd_inverse(&pop.delta_cov)?;
    let cond_var = 1.0 / omega[(0, 0)];
    let delta_mean = pop.delta_mean.clone();

    let shift_household = |hp: &mut HouseholdParams, u: &mut [f64], c: f64| {
        hp.delta[0] += c;
        hp.alpha.iter_mut().for_each(|a| *a += c);
        u.iter_mut().for_each(|x| *x += c);
        hp.refresh_intangible(attrs);
    };

    state
        .households
        .par_iter_mut()
        .zip(state.latent.par_iter_mut())
        .enumerate()
        .for_each(|(h, (hp, u))| {
            let mut rng = rng.household(Stage::Level, h);
            let pull: f64 = (1..hp.delta.len())
                .map(|k| omega[(0, k)] * (hp.delta[k] - delta_mean[k]))
                .sum();
            let mean = delta_mean[0] - cond_var * pull;
            let z: f64 = rng.sample(StandardNormal);
            let c = mean + cond_var.sqrt() * z - hp.delta[0];
            shift_household(hp, u, c);
        });

    let a = &priors.delta_mean_precision;
    let c = if a[(0, 0)] > 0.0 {
        let mut rng = rng.global(Stage::Level);
        let v = 1.0 / a[(0, 0)];
        let pull: f64 = (1..delta_mean.len())
            .map(|k| a[(0, k)] * (delta_mean[k] - priors.delta_mean[k]))
            .sum();
        let mean = priors.delta_mean[0] - v * pull;
        let z: f64 = rng.sample(StandardNormal);
        mean + v.sqrt() * z - delta_mean[0]
    } else {
        // improper flat prior on the level: leave it where it is
        0.0
    };
    state.population.delta_mean[0] += c;
    state
        .households
        .par_iter_mut()
        .zip(state.latent.par_iter_mut())
        .for_each(|(hp, u)| shift_household(hp, u, c));
    Ok(())
}
