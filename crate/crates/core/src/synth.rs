//! Synthetic purchase panels with known ground truth.
//!
//! Households draw marketing coefficients, engineering parameters and
//! intangibles from a known population layer. Each occasion draws shelf
//! prices (brand level times uniform jitter) and display flags, adds unit
//! normal noise to the deterministic utilities, and records the argmax.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    read_attributes_csv, BrandAttributeMatrix, HouseholdParams, PanelDataset, PopulationParams,
    RawOccasion, N_MARKETING,
};
use crate::error::{Error, Result};
use crate::kernels::{sample_mvn, RngStreams};

/// Synthetic detergent attribute rows shipped with the crate. Not real data.
pub const SYNTHETIC_ATTRIBUTES_CSV: &str = include_str!("../data/synthetic_attributes.csv");

/// Population display and price means used by default.
pub const DEFAULT_MARKETING_MEANS: [f64; N_MARKETING] = [1.523, -4.331];

/// Population engineering means used by default, constant first.
pub const DEFAULT_ENGINEERING_MEANS: [f64; 6] = [-13.87, 0.311, 0.759, 0.632, -0.009, 1.195];

pub const DEFAULT_HETEROGENEITY_SD: f64 = 0.5;

pub fn synthetic_attributes() -> BrandAttributeMatrix {
    read_attributes_csv(SYNTHETIC_ATTRIBUTES_CSV.as_bytes()).expect("bundled attribute file parses")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n_households: usize,
    pub n_occasions: usize,
    pub population: PopulationParams,
    pub attrs: BrandAttributeMatrix,
    /// Mean shelf price per brand, currency units.
    pub price_levels: Vec<f64>,
    /// Prices are `level * (1 + jitter * u)`, `u ~ U(-1, 1)`.
    pub price_jitter: f64,
    pub display_prob: Vec<f64>,
    pub seed: u64,
}

impl GeneratorSpec {
    /// 98 households, 6 brands, 40 occasions; population means at the
    /// default marketing and engineering values with heterogeneity sd 0.5.
    pub fn defaults(seed: u64) -> Self {
        let attrs = synthetic_attributes();
        let population = default_population(&attrs, DEFAULT_HETEROGENEITY_SD);
        Self {
            n_households: 98,
            n_occasions: 40,
            population,
            attrs,
            price_levels: vec![300.0, 290.0, 270.0, 260.0, 270.0, 240.0],
            price_jitter: 0.25,
            display_prob: vec![0.2; 6],
            seed,
        }
    }

    pub fn n_brands(&self) -> usize {
        self.attrs.n_brands()
    }

    pub fn validate(&self) -> Result<()> {
        let j = self.n_brands();
        if self.n_households == 0 || self.n_occasions == 0 || j == 0 {
            return Err(Error::InvalidArgument(
                "H, J and T must all be at least 1".into(),
            ));
        }
        if self.price_levels.len() != j || self.display_prob.len() != j {
            return Err(Error::Dimension(format!(
                "{j} brands but {} price levels and {} display probabilities",
                self.price_levels.len(),
                self.display_prob.len()
            )));
        }
        if self.display_prob.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidArgument(
                "display probability outside [0, 1]".into(),
            ));
        }
        if self
            .price_levels
            .iter()
            .any(|p| !(p.is_finite() && *p > 0.0))
        {
            return Err(Error::InvalidArgument(
                "price levels must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.price_jitter) {
            return Err(Error::InvalidArgument(
                "price jitter must lie in [0, 1)".into(),
            ));
        }
        if self.population.beta_mean.len() != N_MARKETING
            || self.population.delta_mean.len() != self.attrs.n_attributes()
        {
            return Err(Error::Dimension(
                "population layer does not match the attributes".into(),
            ));
        }
        self.population.check()
    }
}

/// Population layer with the default means. Marketing coefficients and
/// intangibles get sd `sd`; each engineering parameter gets `sd` divided by
/// the spread of its attribute column across brands, so every attribute
/// contributes heterogeneity of about `sd` utility units.
pub fn default_population(attrs: &BrandAttributeMatrix, sd: f64) -> PopulationParams {
    let r = attrs.n_attributes();
    let j = attrs.n_brands() as f64;
    let mut delta_var = DVector::zeros(r);
    for c in 0..r {
        let col: Vec<f64> = attrs.rows().iter().map(|row| row[c]).collect();
        let mean = col.iter().sum::<f64>() / j;
        let spread = (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / j).sqrt();
        let s = if spread > 0.0 { sd / spread } else { sd };
        delta_var[c] = s * s;
    }
    let mut delta_mean = DVector::zeros(r);
    for (c, v) in DEFAULT_ENGINEERING_MEANS.iter().take(r).enumerate() {
        delta_mean[c] = *v;
    }
    PopulationParams {
        beta_mean: DVector::from_row_slice(&DEFAULT_MARKETING_MEANS),
        beta_cov: DMatrix::identity(N_MARKETING, N_MARKETING) * (sd * sd),
        delta_mean,
        delta_cov: DMatrix::from_diagonal(&delta_var),
        intangible_var: sd * sd,
    }
}

/// Ground truth behind a synthetic panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub households: Vec<HouseholdParams>,
    pub population: PopulationParams,
    pub attrs: BrandAttributeMatrix,
    /// Occasions whose maximum utility was tied (broken to the lowest index).
    pub ties: usize,
}

impl SyntheticTruth {
    pub fn write_to<W: std::io::Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn read_from<R: std::io::Read>(reader: R) -> Result<Self> {
        Ok(serde_json::from_reader(reader)?)
    }
}

const STAGE_PARAMS: u64 = 1;
const STAGE_MARKET: u64 = 2;
const STAGE_CHOICE: u64 = 3;

pub fn generate_panel(spec: &GeneratorSpec) -> Result<(PanelDataset, SyntheticTruth)> {
    spec.validate()?;
    let j = spec.n_brands();
    let streams = RngStreams::new(spec.seed);
    let attrs = &spec.attrs;
    let pop = &spec.population;

    let households = (0..spec.n_households)
        .into_par_iter()
        .map(|h| {
            let mut rng = streams.stream(0, STAGE_PARAMS, h as u64);
            let beta = sample_mvn(&pop.beta_mean, &pop.beta_cov, &mut rng)?;
            let delta = sample_mvn(&pop.delta_mean, &pop.delta_cov, &mut rng)?;
            let sd_phi = pop.intangible_var.sqrt();
            let intangible: Vec<f64> = (0..j)
                .map(|_| sd_phi * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let tangible = attrs.tangible(delta.as_slice());
            let alpha = (0..j).map(|k| tangible[k] + intangible[k]).collect();
            let mut hp = HouseholdParams {
                alpha,
                beta: beta.as_slice().to_vec(),
                delta: delta.as_slice().to_vec(),
                intangible,
            };
            hp.refresh_intangible(attrs);
            Ok(hp)
        })
        .collect::<Result<Vec<_>>>()?;

    let jitter = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
    let market: Vec<Vec<(Vec<f64>, Vec<f64>)>> = (0..spec.n_households)
        .into_par_iter()
        .map(|h| {
            let mut rng = streams.stream(0, STAGE_MARKET, h as u64);
            (0..spec.n_occasions)
                .map(|_| {
                    let prices = spec
                        .price_levels
                        .iter()
                        .map(|lvl| lvl * (1.0 + spec.price_jitter * jitter.sample(&mut rng)))
                        .collect();
                    let displays = spec
                        .display_prob
                        .iter()
                        .map(|&p| if rng.random::<f64>() < p { 1.0 } else { 0.0 })
                        .collect();
                    (prices, displays)
                })
                .collect()
        })
        .collect();

    let scale = market
        .iter()
        .flatten()
        .flat_map(|(p, _)| p.iter().copied())
        .fold(f64::NEG_INFINITY, f64::max);

    let choices: Vec<(Vec<usize>, usize)> = (0..spec.n_households)
        .into_par_iter()
        .map(|h| {
            let mut rng = streams.stream(0, STAGE_CHOICE, h as u64);
            let hp = &households[h];
            let mut ties = 0;
            let chosen =
                market[h]
                    .iter()
                    .map(|(prices, displays)| {
                        let utils: Vec<f64> = (0..j)
                            .map(|k| {
                                let eps: f64 = rng.sample(StandardNormal);
                                hp.alpha[k]
                                    + hp.beta[0] * displays[k]
                                    + hp.beta[1] * prices[k] / scale
                                    + eps
                            })
                            .collect();
                        let (best, top) = utils.iter().enumerate().fold(
                            (0, f64::NEG_INFINITY),
                            |acc, (k, &u)| if u > acc.1 { (k, u) } else { acc },
                        );
                        if utils.iter().filter(|&&u| u == top).count() > 1 {
                            ties += 1;
                        }
                        best
                    })
                    .collect();
            (chosen, ties)
        })
        .collect();

    let mut records = Vec::with_capacity(spec.n_households * spec.n_occasions);
    let mut ties = 0;
    for (h, (chosen, t)) in choices.into_iter().enumerate() {
        ties += t;
        for (occ, ((prices, displays), c)) in market[h].iter().zip(chosen).enumerate() {
            records.push(RawOccasion {
                household_id: format!("hh{:04}", h + 1),
                occasion: occ,
                chosen: c,
                prices: prices.clone(),
                displays: displays.clone(),
            });
        }
    }
    let panel = PanelDataset::from_records(records, j);
    Ok((
        panel,
        SyntheticTruth {
            households,
            population: pop.clone(),
            attrs: attrs.clone(),
            ties,
        },
    ))
}
