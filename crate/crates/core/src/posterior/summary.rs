use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::geweke::{geweke_z, GEWEKE_FIRST, GEWEKE_LAST};
use super::significance::{household_stats, significance_row, HouseholdStat, SummaryRow};
use crate::data::McmcConfig;
use crate::error::{Error, Result};
use crate::gibbs::{ChainDraws, HouseholdParam, PopulationParam};

/// Posterior summaries of one household parameter, one entry per household.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdSummary {
    pub param: HouseholdParam,
    pub label: String,
    pub stats: Vec<HouseholdStat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSummary {
    pub param: PopulationParam,
    pub label: String,
    pub stat: HouseholdStat,
    /// Geweke z per chain; `None` where the diagnostic is unavailable.
    pub geweke: Vec<Option<f64>>,
}

impl PopulationSummary {
    /// All available per-chain z scores are below `bound` in magnitude.
    pub fn converged(&self, bound: f64) -> bool {
        self.geweke.iter().flatten().all(|z| z.abs() < bound)
    }
}

/// Everything downstream tools need from a chain: table rows, household
/// posteriors, population posteriors with diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub n_households: usize,
    pub n_brands: usize,
    pub n_attributes: usize,
    pub n_draws: usize,
    pub n_chains: usize,
    pub config: McmcConfig,
    pub hpd_level: f64,
    pub market_response: Vec<SummaryRow>,
    pub hierarchical: Vec<SummaryRow>,
    pub intercept_diffs: Vec<SummaryRow>,
    pub households: Vec<HouseholdSummary>,
    pub population: Vec<PopulationSummary>,
    pub max_decomposition_error: f64,
    pub warnings: Vec<String>,
}

impl ChainSummary {
    pub fn from_chain(chain: &ChainDraws, level: f64) -> Result<Self> {
        if chain.is_empty() {
            return Err(Error::EmptyChain);
        }
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "level {level} outside (0, 1)"
            )));
        }
        let (j, r) = (chain.n_brands(), chain.n_attributes());
        let params: Vec<HouseholdParam> = HouseholdParam::market_response(j)
            .into_iter()
            .chain(HouseholdParam::intercept_diffs(j))
            .chain(HouseholdParam::hierarchical(r))
            .chain((0..j).map(HouseholdParam::Tangible))
            .chain((0..j).map(HouseholdParam::Intangible))
            .collect();
        let households = params
            .par_iter()
            .map(|&p| {
                Ok(HouseholdSummary {
                    param: p,
                    label: p.label(),
                    stats: household_stats(chain, p, level)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let row = |p: HouseholdParam| {
            let hs = households
                .iter()
                .find(|s| s.param == p)
                .expect("summarized above");
            significance_row(hs.label.clone(), &hs.stats)
        };
        let population = PopulationParam::tracked(j, r)
            .into_par_iter()
            .map(|p| {
                let series = chain.population_series(p);
                let geweke = (0..chain.n_chains)
                    .map(|c| {
                        geweke_z(&series[chain.chain_range(c)], GEWEKE_FIRST, GEWEKE_LAST).ok()
                    })
                    .collect();
                Ok(PopulationSummary {
                    param: p,
                    label: p.label(),
                    stat: HouseholdStat::from_draws(&series, level)?,
                    geweke,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n_households: chain.n_households(),
            n_brands: j,
            n_attributes: r,
            n_draws: chain.n_draws(),
            n_chains: chain.n_chains,
            config: chain.config.clone(),
            hpd_level: level,
            market_response: HouseholdParam::market_response(j)
                .into_iter()
                .map(row)
                .collect(),
            hierarchical: HouseholdParam::hierarchical(r)
                .into_iter()
                .map(row)
                .collect(),
            intercept_diffs: HouseholdParam::intercept_diffs(j)
                .into_iter()
                .map(row)
                .collect(),
            households,
            population,
            max_decomposition_error: chain.max_decomposition_error(),
            warnings: chain.warnings.clone(),
        })
    }

    pub fn household(&self, param: HouseholdParam) -> Option<&HouseholdSummary> {
        self.households.iter().find(|s| s.param == param)
    }

    pub fn population_param(&self, param: PopulationParam) -> Option<&PopulationSummary> {
        self.population.iter().find(|s| s.param == param)
    }

    /// Share of tracked population parameters whose Geweke |z| is below
    /// `bound` in every chain.
    pub fn geweke_pass_rate(&self, bound: f64) -> f64 {
        let ok = self
            .population
            .iter()
            .filter(|p| p.converged(bound))
            .count();
        ok as f64 / self.population.len() as f64
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }

    pub fn write_to<W: std::io::Write>(&self, mut writer: W) -> Result<()> {
        writer.write_all(self.to_json().as_bytes())?;
        Ok(())
    }

    pub fn read_from<R: std::io::Read>(reader: R) -> Result<Self> {
        Ok(serde_json::from_reader(reader)?)
    }
}
