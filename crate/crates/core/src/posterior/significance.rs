use serde::{Deserialize, Serialize};

use super::hpd::hpd_interval;
use crate::error::{Error, Result};
use crate::gibbs::{ChainDraws, HouseholdParam};

/// Posterior summary of one household's draws of one parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HouseholdStat {
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
}

impl HouseholdStat {
    pub fn from_draws(draws: &[f64], level: f64) -> Result<Self> {
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let sd = if draws.len() > 1 {
            (draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let (lower, upper) = if draws.len() >= 2 {
            hpd_interval(draws, level)?
        } else {
            (draws[0], draws[0])
        };
        Ok(Self {
            mean,
            sd,
            lower,
            upper,
        })
    }

    /// Interval excludes zero.
    pub fn is_significant(&self) -> bool {
        self.lower > 0.0 || self.upper < 0.0
    }

    pub fn covers(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// One line of a posterior table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub posterior_mean: f64,
    pub sd: f64,
    /// Households whose HPD interval excludes zero.
    pub hpd_count: usize,
    /// Of those, households with a positive posterior mean.
    pub pos_count: usize,
    pub neg_count: usize,
}

/// Aggregates household summaries: mean and sd across households of the
/// household posterior means, and the HPD significance split by sign.
pub fn significance_row(label: impl Into<String>, stats: &[HouseholdStat]) -> SummaryRow {
    let n = stats.len() as f64;
    let mean = stats.iter().map(|s| s.mean).sum::<f64>() / n;
    let sd = if stats.len() > 1 {
        (stats
            .iter()
            .map(|s| (s.mean - mean) * (s.mean - mean))
            .sum::<f64>()
            / (n - 1.0))
            .sqrt()
    } else {
        0.0
    };
    let significant: Vec<_> = stats.iter().filter(|s| s.is_significant()).collect();
    let pos_count = significant.iter().filter(|s| s.mean > 0.0).count();
    SummaryRow {
        label: label.into(),
        posterior_mean: mean,
        sd,
        hpd_count: significant.len(),
        pos_count,
        neg_count: significant.len() - pos_count,
    }
}

pub fn household_stats(
    chain: &ChainDraws,
    param: HouseholdParam,
    level: f64,
) -> Result<Vec<HouseholdStat>> {
    (0..chain.n_households())
        .map(|h| HouseholdStat::from_draws(&chain.household_series(h, param), level))
        .collect()
}

pub fn significance_table(
    chain: &ChainDraws,
    params: &[HouseholdParam],
    level: f64,
) -> Result<Vec<SummaryRow>> {
    if chain.is_empty() {
        return Err(Error::EmptyChain);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "level {level} outside (0, 1)"
        )));
    }
    params
        .iter()
        .map(|&p| {
            Ok(significance_row(
                p.label(),
                &household_stats(chain, p, level)?,
            ))
        })
        .collect()
}
