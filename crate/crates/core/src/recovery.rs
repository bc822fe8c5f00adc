//! Scores a posterior against the synthetic ground truth that generated the
//! panel.

use serde::{Deserialize, Serialize};

use crate::data::{BrandAttributeMatrix, HouseholdParams};
use crate::error::{Error, Result};
use crate::gibbs::{ChainDraws, HouseholdParam, PopulationParam};
use crate::posterior::ChainSummary;
use crate::synth::SyntheticTruth;

/// True value of a household parameter.
pub fn household_truth(
    hp: &HouseholdParams,
    attrs: &BrandAttributeMatrix,
    param: HouseholdParam,
) -> f64 {
    match param {
        HouseholdParam::Marketing(k) => hp.beta[k],
        HouseholdParam::Intercept(j) => hp.alpha[j],
        HouseholdParam::InterceptDiff(j) => hp.alpha[j] - hp.alpha[0],
        HouseholdParam::Engineering(r) => hp.delta[r],
        HouseholdParam::Tangible(j) => attrs.row(j).iter().zip(&hp.delta).map(|(a, d)| a * d).sum(),
        HouseholdParam::Intangible(j) => hp.intangible[j],
    }
}

/// Whether the likelihood pins a household parameter down. Utility levels are
/// not identified in a probit: absolute intercepts, the attribute constant
/// and the tangible values that include it move together with the level.
/// With no more brands than attributes, the split of the intercepts into
/// engineering and intangible parts is identified only through the
/// hierarchical prior.
pub fn is_identified(param: HouseholdParam, n_brands: usize, n_attributes: usize) -> bool {
    match param {
        HouseholdParam::Marketing(_) | HouseholdParam::InterceptDiff(_) => true,
        HouseholdParam::Intercept(_)
        | HouseholdParam::Tangible(_)
        | HouseholdParam::Engineering(0) => false,
        HouseholdParam::Engineering(_) | HouseholdParam::Intangible(_) => n_brands > n_attributes,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRecovery {
    pub param: HouseholdParam,
    pub label: String,
    pub identified: bool,
    /// Root mean squared error of household posterior means.
    pub rmse: f64,
    /// Share of households whose posterior mean has the sign of the truth.
    pub sign_agreement: f64,
    /// The true values share one sign clearly (|mean| > 2 sd across
    /// households), so sign agreement is meaningful.
    pub sign_determined: bool,
    /// Share of households whose HPD interval covers the truth.
    pub coverage: f64,
    /// Every interval has zero width, so coverage says nothing.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationRecovery {
    pub param: PopulationParam,
    pub label: String,
    pub truth: f64,
    pub posterior_mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub households: Vec<ParamRecovery>,
    pub population: Vec<PopulationRecovery>,
    /// Tracked population parameters whose interval covers the truth.
    pub population_covered: usize,
    /// Share of households with a negative posterior mean price coefficient.
    pub negative_price_share: f64,
}

impl RecoveryReport {
    pub fn household(&self, param: HouseholdParam) -> Option<&ParamRecovery> {
        self.households.iter().find(|p| p.param == param)
    }

    pub fn population_param(&self, param: PopulationParam) -> Option<&PopulationRecovery> {
        self.population.iter().find(|p| p.param == param)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecoveryThresholds {
    /// Upper bound on household RMSE for identified parameters.
    pub rmse_max: f64,
    /// Lower bound on sign agreement for identified, sign-determined parameters.
    pub sign_min: f64,
    /// Lower bound on household coverage for identified parameters.
    pub coverage_min: f64,
    /// Lower bound on the number of covered tracked population parameters.
    pub population_covered_min: usize,
    /// Upper bound on |posterior mean − truth| for the display and price means.
    pub marketing_mean_abs_max: f64,
    /// Lower bound on the share of households with a negative price mean.
    pub negative_price_min: f64,
}

impl Default for RecoveryThresholds {
    fn default() -> Self {
        Self {
            rmse_max: 1.5,
            sign_min: 0.9,
            coverage_min: 0.8,
            population_covered_min: 12,
            marketing_mean_abs_max: 0.5,
            negative_price_min: 0.9,
        }
    }
}

impl RecoveryThresholds {
    /// Human-readable descriptions of every violated threshold.
    pub fn check(&self, report: &RecoveryReport) -> Vec<String> {
        let mut failures = Vec::new();
        for p in report.households.iter().filter(|p| p.identified) {
            if p.rmse > self.rmse_max {
                failures.push(format!(
                    "{}: rmse {:.3} > {}",
                    p.label, p.rmse, self.rmse_max
                ));
            }
            if p.sign_determined && p.sign_agreement < self.sign_min {
                failures.push(format!(
                    "{}: sign agreement {:.3} < {}",
                    p.label, p.sign_agreement, self.sign_min
                ));
            }
            if p.coverage < self.coverage_min {
                failures.push(format!(
                    "{}: coverage {:.3} < {}",
                    p.label, p.coverage, self.coverage_min
                ));
            }
        }
        if report.population_covered < self.population_covered_min {
            failures.push(format!(
                "population coverage {}/{} < {}",
                report.population_covered,
                report.population.len(),
                self.population_covered_min
            ));
        }
        for p in &report.population {
            if matches!(p.param, PopulationParam::MarketingMean(_))
                && (p.posterior_mean - p.truth).abs() > self.marketing_mean_abs_max
            {
                failures.push(format!(
                    "{}: |{:.3} - {:.3}| > {}",
                    p.label, p.posterior_mean, p.truth, self.marketing_mean_abs_max
                ));
            }
        }
        if report.negative_price_share < self.negative_price_min {
            failures.push(format!(
                "negative price share {:.3} < {}",
                report.negative_price_share, self.negative_price_min
            ));
        }
        failures
    }
}

fn sign_matches(a: f64, b: f64) -> bool {
    (a > 0.0 && b > 0.0) || (a < 0.0 && b < 0.0) || (a == 0.0 && b == 0.0)
}

/// Scores a chain summary against the truth.
pub fn score_summary(truth: &SyntheticTruth, summary: &ChainSummary) -> Result<RecoveryReport> {
    if truth.households.len() != summary.n_households
        || truth.attrs.n_brands() != summary.n_brands
        || truth.attrs.n_attributes() != summary.n_attributes
    {
        return Err(Error::Dimension(format!(
            "truth has {} households x {} brands x {} attributes, summary {} x {} x {}",
            truth.households.len(),
            truth.attrs.n_brands(),
            truth.attrs.n_attributes(),
            summary.n_households,
            summary.n_brands,
            summary.n_attributes
        )));
    }
    let households = summary
        .households
        .iter()
        .map(|hs| {
            let truths: Vec<f64> = truth
                .households
                .iter()
                .map(|hp| household_truth(hp, &truth.attrs, hs.param))
                .collect();
            let n = truths.len() as f64;
            let rmse = (hs
                .stats
                .iter()
                .zip(&truths)
                .map(|(s, t)| (s.mean - t).powi(2))
                .sum::<f64>()
                / n)
                .sqrt();
            let signs = hs
                .stats
                .iter()
                .zip(&truths)
                .filter(|(s, t)| sign_matches(s.mean, **t))
                .count();
            let covered = hs
                .stats
                .iter()
                .zip(&truths)
                .filter(|(s, t)| s.covers(**t))
                .count();
            let t_mean = truths.iter().sum::<f64>() / n;
            let t_sd = (truths.iter().map(|t| (t - t_mean).powi(2)).sum::<f64>() / n).sqrt();
            ParamRecovery {
                param: hs.param,
                label: hs.label.clone(),
                identified: is_identified(hs.param, summary.n_brands, summary.n_attributes),
                rmse,
                sign_agreement: signs as f64 / n,
                sign_determined: t_mean.abs() > 2.0 * t_sd,
                coverage: covered as f64 / n,
                degenerate: hs.stats.iter().all(|s| s.upper == s.lower),
            }
        })
        .collect();
    let population: Vec<PopulationRecovery> = summary
        .population
        .iter()
        .map(|ps| {
            let t = ps.param.value(&truth.population, &truth.attrs);
            PopulationRecovery {
                param: ps.param,
                label: ps.label.clone(),
                truth: t,
                posterior_mean: ps.stat.mean,
                lower: ps.stat.lower,
                upper: ps.stat.upper,
                covered: ps.stat.covers(t),
            }
        })
        .collect();
    let negative_price_share = summary
        .household(HouseholdParam::Marketing(1))
        .map_or(0.0, |hs| {
            hs.stats.iter().filter(|s| s.mean < 0.0).count() as f64 / hs.stats.len() as f64
        });
    Ok(RecoveryReport {
        population_covered: population.iter().filter(|p| p.covered).count(),
        households,
        population,
        negative_price_share,
    })
}

/// Summarizes `chain` at `level` and scores it against the truth.
pub fn recovery_score(
    truth: &SyntheticTruth,
    chain: &ChainDraws,
    level: f64,
) -> Result<RecoveryReport> {
    if truth.households.len() != chain.n_households() || truth.attrs != *chain.attrs() {
        return Err(Error::Dimension(
            "truth and chain disagree in households or attributes".into(),
        ));
    }
    score_summary(truth, &ChainSummary::from_chain(chain, level)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::McmcConfig;
    use crate::synth::{generate_panel, GeneratorSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn truth() -> SyntheticTruth {
        let mut spec = GeneratorSpec::defaults(21);
        spec.n_households = 30;
        spec.n_occasions = 2;
        generate_panel(&spec).unwrap().1
    }

    fn chain_around(truth: &SyntheticTruth, noise: f64, n_draws: usize) -> ChainDraws {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let normal = Normal::new(0.0, noise.max(f64::MIN_POSITIVE)).unwrap();
        let mut chain =
            ChainDraws::new(truth.households.len(), &truth.attrs, McmcConfig::default());
        for _ in 0..n_draws {
            let hs: Vec<HouseholdParams> = truth
                .households
                .iter()
                .map(|hp| {
                    let mut p = hp.clone();
                    if noise > 0.0 {
                        p.alpha
                            .iter_mut()
                            .for_each(|x| *x += normal.sample(&mut rng));
                        p.beta
                            .iter_mut()
                            .for_each(|x| *x += normal.sample(&mut rng));
                        p.delta
                            .iter_mut()
                            .for_each(|x| *x += normal.sample(&mut rng));
                        p.refresh_intangible(&truth.attrs);
                    }
                    p
                })
                .collect();
            chain.push(&hs, &truth.population);
        }
        chain
    }

    #[test]
    fn perfect_chain() {
        let t = truth();
        let report = recovery_score(&t, &chain_around(&t, 0.0, 10), 0.95).unwrap();
        for p in &report.households {
            assert!(p.rmse < 1e-9, "{}", p.label);
            assert!(p.degenerate);
            assert_eq!(p.coverage, 1.0);
        }
        assert_eq!(report.population_covered, 14);
        assert!(RecoveryThresholds::default().check(&report).is_empty());
    }

    #[test]
    fn noisy_chain_keeps_clear_signs() {
        let t = truth();
        let report = recovery_score(&t, &chain_around(&t, 0.1, 400), 0.95).unwrap();
        let price = report.household(HouseholdParam::Marketing(1)).unwrap();
        assert!(price.sign_determined);
        assert_eq!(price.sign_agreement, 1.0);
        assert_eq!(report.negative_price_share, 1.0);
        assert!(!price.degenerate);
        assert!(price.coverage > 0.8);
    }

    #[test]
    fn perturbed_truth_fails() {
        let mut t = truth();
        let chain = chain_around(&t, 0.0, 10);
        t.population.beta_mean[1] += 10.0;
        for hp in &mut t.households {
            hp.beta[1] += 10.0;
        }
        let failures =
            RecoveryThresholds::default().check(&recovery_score(&t, &chain, 0.95).unwrap());
        assert!(failures.iter().any(|f| f.starts_with("Price")));
        assert!(failures.iter().any(|f| f.starts_with("mean Price")));
    }

    #[test]
    fn mismatched_dimensions() {
        let t = truth();
        let chain = ChainDraws::new(3, &t.attrs, McmcConfig::default());
        assert!(matches!(
            recovery_score(&t, &chain, 0.95),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn identification_flags() {
        assert!(is_identified(HouseholdParam::Marketing(1), 6, 6));
        assert!(is_identified(HouseholdParam::InterceptDiff(3), 6, 6));
        assert!(!is_identified(HouseholdParam::Engineering(2), 6, 6));
        assert!(is_identified(HouseholdParam::Engineering(2), 8, 6));
        assert!(!is_identified(HouseholdParam::Engineering(0), 8, 6));
        assert!(!is_identified(HouseholdParam::Intercept(0), 8, 6));
        assert!(!is_identified(HouseholdParam::Tangible(0), 8, 6));
    }
}
