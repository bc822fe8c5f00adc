//! Tangible/intangible split of brand intercepts and simulated choice
//! probabilities.
//!
//! A household's intercept for brand `j` splits into the part explained by
//! the brand's physical attributes, `δ_h · D_j`, and the residual
//! `φ*_hj = α_hj − δ_h · D_j`.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{BrandAttributeMatrix, ChoiceOccasion, HouseholdParams};
use crate::error::{Error, Result};
use crate::gibbs::ChainDraws;

pub fn tangible_value(delta: &[f64], attr_row: &[f64]) -> Result<f64> {
    if delta.len() != attr_row.len() {
        return Err(Error::Dimension(format!(
            "engineering vector has {} entries, attribute row {}",
            delta.len(),
            attr_row.len()
        )));
    }
    Ok(delta.iter().zip(attr_row).map(|(d, a)| d * a).sum())
}

pub fn intangible_value(alpha_j: f64, delta: &[f64], attr_row: &[f64]) -> Result<f64> {
    Ok(alpha_j - tangible_value(delta, attr_row)?)
}

/// Posterior mean and sd of one household-brand cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueCell {
    pub total_mean: f64,
    pub tangible_mean: f64,
    pub intangible_mean: f64,
    pub total_sd: f64,
    pub tangible_sd: f64,
    pub intangible_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrandValueDecomposition {
    pub n_households: usize,
    pub n_brands: usize,
    /// Household-major cells.
    pub cells: Vec<ValueCell>,
    /// Largest `|total − (tangible + intangible)| / max(|total|, |tangible|, |intangible|)`
    /// over every draw.
    pub max_identity_error: f64,
}

impl BrandValueDecomposition {
    pub fn cell(&self, h: usize, j: usize) -> &ValueCell {
        &self.cells[h * self.n_brands + j]
    }

    /// CSV export. `household_ids` labels rows; dense indices are used when
    /// it is `None`. Brands are written 1-based.
    pub fn write_csv<W: Write>(&self, writer: W, household_ids: Option<&[String]>) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "household",
            "brand",
            "total_mean",
            "tangible_mean",
            "intangible_mean",
            "total_sd",
            "tangible_sd",
            "intangible_sd",
        ])?;
        for h in 0..self.n_households {
            let id = household_ids.map_or_else(|| h.to_string(), |ids| ids[h].clone());
            for j in 0..self.n_brands {
                let c = self.cell(h, j);
                w.write_record([
                    id.clone(),
                    (j + 1).to_string(),
                    format!("{:.6}", c.total_mean),
                    format!("{:.6}", c.tangible_mean),
                    format!("{:.6}", c.intangible_mean),
                    format!("{:.6}", c.total_sd),
                    format!("{:.6}", c.tangible_sd),
                    format!("{:.6}", c.intangible_sd),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (m, 0.0);
    }
    (
        m,
        (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)).sqrt(),
    )
}

pub fn decompose_chain(
    draws: &ChainDraws,
    attrs: &BrandAttributeMatrix,
) -> Result<BrandValueDecomposition> {
    if draws.is_empty() {
        return Err(Error::EmptyChain);
    }
    if attrs.n_brands() != draws.n_brands() || attrs.n_attributes() != draws.n_attributes() {
        return Err(Error::Dimension(
            "attribute matrix does not match the chain".into(),
        ));
    }
    let (n, jn) = (draws.n_draws(), attrs.n_brands());
    let per_household = (0..draws.n_households())
        .into_par_iter()
        .map(|h| {
            let mut cells = Vec::with_capacity(jn);
            let mut worst: f64 = 0.0;
            for j in 0..jn {
                let mut total = Vec::with_capacity(n);
                let mut tangible = Vec::with_capacity(n);
                let mut intangible = Vec::with_capacity(n);
                for d in 0..n {
                    let a = draws.alpha(d, h)[j];
                    let delta = draws.delta(d, h);
                    let t = tangible_value(delta, attrs.row(j))?;
                    let phi = intangible_value(a, delta, attrs.row(j))?;
                    let scale = a.abs().max(t.abs()).max(phi.abs()).max(f64::MIN_POSITIVE);
                    worst = worst.max((a - (t + phi)).abs() / scale);
                    total.push(a);
                    tangible.push(t);
                    intangible.push(phi);
                }
                let (total_mean, total_sd) = mean_sd(&total);
                let (tangible_mean, tangible_sd) = mean_sd(&tangible);
                let (intangible_mean, intangible_sd) = mean_sd(&intangible);
                cells.push(ValueCell {
                    total_mean,
                    tangible_mean,
                    intangible_mean,
                    total_sd,
                    tangible_sd,
                    intangible_sd,
                });
            }
            Ok((cells, worst))
        })
        .collect::<Result<Vec<_>>>()?;
    let max_identity_error = per_household.iter().map(|(_, w)| *w).fold(0.0, f64::max);
    Ok(BrandValueDecomposition {
        n_households: draws.n_households(),
        n_brands: jn,
        cells: per_household.into_iter().flat_map(|(c, _)| c).collect(),
        max_identity_error,
    })
}

/// Simulated choice probabilities with their Monte Carlo standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceProbabilities {
    pub probabilities: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub n_sims: usize,
}

/// Frequency simulator: adds independent unit normal noise to `utilities`
/// `n_sims` times and counts argmax winners (ties to the lowest index).
pub fn simulate_choice_frequencies<R: Rng + ?Sized>(
    utilities: &[f64],
    n_sims: usize,
    rng: &mut R,
) -> Result<ChoiceProbabilities> {
    if n_sims == 0 {
        return Err(Error::InvalidArgument("n_sims must be at least 1".into()));
    }
    if utilities.is_empty() || utilities.iter().any(|u| !u.is_finite()) {
        return Err(Error::InvalidArgument(
            "utilities must be finite and nonempty".into(),
        ));
    }
    let mut counts = vec![0usize; utilities.len()];
    for _ in 0..n_sims {
        let mut best = 0;
        let mut best_u = f64::NEG_INFINITY;
        for (j, u) in utilities.iter().enumerate() {
            let e: f64 = rng.sample(StandardNormal);
            let v = u + e;
            if v > best_u {
                best = j;
                best_u = v;
            }
        }
        counts[best] += 1;
    }
    let n = n_sims as f64;
    let probabilities: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let std_errors = probabilities
        .iter()
        .map(|p| (p * (1.0 - p) / n).sqrt())
        .collect();
    Ok(ChoiceProbabilities {
        probabilities,
        std_errors,
        n_sims,
    })
}

pub fn choice_probabilities<R: Rng + ?Sized>(
    hp: &HouseholdParams,
    occasion: &ChoiceOccasion,
    n_sims: usize,
    rng: &mut R,
) -> Result<ChoiceProbabilities> {
    let j = hp.alpha.len();
    if occasion.prices.len() != j || occasion.displays.len() != j {
        return Err(Error::Dimension(format!(
            "occasion has {} brands, household parameters {j}",
            occasion.prices.len()
        )));
    }
    let utilities: Vec<f64> = (0..j).map(|k| hp.utility(occasion, k)).collect();
    simulate_choice_frequencies(&utilities, n_sims, rng)
}
