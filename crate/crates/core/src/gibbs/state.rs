use serde::{Deserialize, Serialize};

use crate::data::{
    BrandAttributeMatrix, HouseholdParams, PanelDataset, PopulationParams, PriorConfig,
};
use crate::error::Result;
use crate::kernels::{sample_truncated_normal, RngStreams, StreamRng, TruncationBounds};

/// Conditional updates of one sweep, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    Init,
    Latent,
    Household,
    Engineering,
    Shift,
    Population,
    Level,
}

impl Stage {
    pub const SWEEP: [Stage; 6] = [
        Stage::Latent,
        Stage::Household,
        Stage::Engineering,
        Stage::Shift,
        Stage::Population,
        Stage::Level,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Init => "initialization",
            Stage::Latent => "latent utilities",
            Stage::Household => "household intercepts and marketing coefficients",
            Stage::Shift => "brand translation moves",
            Stage::Engineering => "engineering parameters",
            Stage::Population => "population hyperparameters",
            Stage::Level => "utility level move",
        }
    }

    fn id(self) -> u64 {
        self as u64
    }
}

/// Rng source for one sweep: a stream per (stage, household), plus one
/// global stream per stage.
#[derive(Debug, Clone, Copy)]
pub struct SweepRng {
    streams: RngStreams,
    iteration: u64,
}

impl SweepRng {
    pub fn new(streams: RngStreams, iteration: usize) -> Self {
        Self {
            streams,
            iteration: iteration as u64,
        }
    }

    pub fn household(&self, stage: Stage, h: usize) -> StreamRng {
        self.streams
            .stream(self.iteration, stage.id(), h as u64 + 1)
    }

    pub fn global(&self, stage: Stage) -> StreamRng {
        self.streams.stream(self.iteration, stage.id(), 0)
    }
}

/// Full Gibbs state. `latent[h]` holds household `h`'s utilities, occasion
/// major: entry `t * J + j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerState {
    pub latent: Vec<Vec<f64>>,
    pub households: Vec<HouseholdParams>,
    pub population: PopulationParams,
}

impl SamplerState {
    /// Zero household parameters, population at prior means, and latent
    /// utilities drawn once from truncated normals at zero mean that agree
    /// with the observed choices.
    pub fn initialize(
        data: &PanelDataset,
        attrs: &BrandAttributeMatrix,
        priors: &PriorConfig,
        streams: RngStreams,
    ) -> Result<Self> {
        let j = data.n_brands();
        let r = attrs.n_attributes();
        let sweep = SweepRng::new(streams, 0);
        let mut latent = Vec::with_capacity(data.n_households());
        for (h, hh) in data.households().iter().enumerate() {
            let mut rng = sweep.household(Stage::Init, h);
            let mut u = vec![0.0; hh.occasions.len() * j];
            for (t, occ) in hh.occasions.iter().enumerate() {
                let row = &mut u[t * j..(t + 1) * j];
                let top = sample_truncated_normal(
                    0.0,
                    1.0,
                    TruncationBounds::new(0.0, f64::INFINITY)?,
                    &mut rng,
                )?;
                row[occ.chosen] = top;
                let below = TruncationBounds::new(f64::NEG_INFINITY, top)?;
                for (k, slot) in row.iter_mut().enumerate() {
                    if k != occ.chosen {
                        *slot = sample_truncated_normal(0.0, 1.0, below, &mut rng)?;
                    }
                }
            }
            latent.push(u);
        }
        let households = (0..data.n_households())
            .map(|_| HouseholdParams::zeros(j, r))
            .collect();
        Ok(Self {
            latent,
            households,
            population: priors.initial_population(),
        })
    }

    /// Count of occasions whose chosen brand is not the strict utility argmax.
    pub fn truncation_violations(&self, data: &PanelDataset) -> usize {
        let j = data.n_brands();
        data.households()
            .iter()
            .zip(&self.latent)
            .map(|(hh, u)| {
                hh.occasions
                    .iter()
                    .enumerate()
                    .filter(|(t, occ)| {
                        let row = &u[t * j..(t + 1) * j];
                        let top = row[occ.chosen];
                        row.iter()
                            .enumerate()
                            .any(|(k, &v)| k != occ.chosen && v >= top)
                    })
                    .count()
            })
            .sum()
    }

    /// Sum of squared utility residuals `U - α - β·x`, the progress fit proxy.
    pub fn residual_sum_of_squares(&self, data: &PanelDataset) -> f64 {
        let j = data.n_brands();
        data.households()
            .iter()
            .zip(&self.latent)
            .zip(&self.households)
            .map(|((hh, u), hp)| {
                hh.occasions
                    .iter()
                    .enumerate()
                    .map(|(t, occ)| {
                        (0..j)
                            .map(|k| {
                                let e = u[t * j + k] - hp.utility(occ, k);
                                e * e
                            })
                            .sum::<f64>()
                    })
                    .sum::<f64>()
            })
            .sum()
    }
}
