use serde::{Deserialize, Serialize};

use super::state::SamplerState;
use crate::data::{
    BrandAttributeMatrix, HouseholdParams, McmcConfig, PopulationParams, ATTRIBUTE_LABELS,
    MARKETING_LABELS, N_MARKETING,
};
use crate::error::{Error, Result};

/// A scalar household-level quantity tracked across draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HouseholdParam {
    /// Marketing coefficient: 0 display, 1 price.
    Marketing(usize),
    Intercept(usize),
    /// `α_j - α_0`, invariant to the utility level.
    InterceptDiff(usize),
    Engineering(usize),
    Tangible(usize),
    Intangible(usize),
}

impl HouseholdParam {
    pub fn label(&self) -> String {
        match *self {
            Self::Marketing(k) => MARKETING_LABELS[k].to_string(),
            Self::Intercept(j) => format!("Product {}", j + 1),
            Self::InterceptDiff(j) => format!("Product {} - Product 1", j + 1),
            Self::Engineering(r) => ATTRIBUTE_LABELS
                .get(r)
                .map_or_else(|| format!("Attribute {r}"), |s| s.to_string()),
            Self::Tangible(j) => format!("Tangible {}", j + 1),
            Self::Intangible(j) => format!("Intangible {}", j + 1),
        }
    }

    /// Rows of the choice-stage table: display, price, then every intercept.
    pub fn market_response(n_brands: usize) -> Vec<Self> {
        (0..N_MARKETING)
            .map(Self::Marketing)
            .chain((0..n_brands).map(Self::Intercept))
            .collect()
    }

    /// Rows of the hierarchical-stage table: every engineering parameter.
    pub fn hierarchical(n_attributes: usize) -> Vec<Self> {
        (0..n_attributes).map(Self::Engineering).collect()
    }

    pub fn intercept_diffs(n_brands: usize) -> Vec<Self> {
        (1..n_brands).map(Self::InterceptDiff).collect()
    }
}

/// A scalar population-level quantity tracked across draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PopulationParam {
    MarketingMean(usize),
    /// Population mean intercept `D_j · delta_mean`.
    InterceptMean(usize),
    EngineeringMean(usize),
    MarketingSd(usize),
    EngineeringSd(usize),
    IntangibleSd,
}

impl PopulationParam {
    pub fn label(&self) -> String {
        match *self {
            Self::MarketingMean(k) => format!("mean {}", MARKETING_LABELS[k]),
            Self::InterceptMean(j) => format!("mean Product {}", j + 1),
            Self::EngineeringMean(r) => {
                format!("mean {}", ATTRIBUTE_LABELS.get(r).copied().unwrap_or("?"))
            }
            Self::MarketingSd(k) => format!("sd {}", MARKETING_LABELS[k]),
            Self::EngineeringSd(r) => {
                format!("sd {}", ATTRIBUTE_LABELS.get(r).copied().unwrap_or("?"))
            }
            Self::IntangibleSd => "sd intangible".to_string(),
        }
    }

    /// The population counterparts of every table row: display and price
    /// means, mean intercepts per brand, mean engineering parameters.
    pub fn tracked(n_brands: usize, n_attributes: usize) -> Vec<Self> {
        (0..N_MARKETING)
            .map(Self::MarketingMean)
            .chain((0..n_brands).map(Self::InterceptMean))
            .chain((0..n_attributes).map(Self::EngineeringMean))
            .collect()
    }

    pub fn value(&self, pop: &PopulationParams, attrs: &BrandAttributeMatrix) -> f64 {
        match *self {
            Self::MarketingMean(k) => pop.beta_mean[k],
            Self::InterceptMean(j) => attrs
                .row(j)
                .iter()
                .zip(pop.delta_mean.iter())
                .map(|(a, b)| a * b)
                .sum(),
            Self::EngineeringMean(r) => pop.delta_mean[r],
            Self::MarketingSd(k) => pop.beta_cov[(k, k)].sqrt(),
            Self::EngineeringSd(r) => pop.delta_cov[(r, r)].sqrt(),
            Self::IntangibleSd => pop.intangible_var.sqrt(),
        }
    }
}

/// Post-burn-in, thinned posterior draws, stored flat (draw-major, then
/// household).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDraws {
    n_households: usize,
    n_brands: usize,
    n_attributes: usize,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    delta: Vec<f64>,
    intangible: Vec<f64>,
    population: Vec<PopulationParams>,
    attrs: BrandAttributeMatrix,
    pub config: McmcConfig,
    pub n_chains: usize,
    pub warnings: Vec<String>,
}

impl ChainDraws {
    pub fn new(n_households: usize, attrs: &BrandAttributeMatrix, config: McmcConfig) -> Self {
        Self {
            n_households,
            n_brands: attrs.n_brands(),
            n_attributes: attrs.n_attributes(),
            alpha: Vec::new(),
            beta: Vec::new(),
            delta: Vec::new(),
            intangible: Vec::new(),
            population: Vec::new(),
            attrs: attrs.clone(),
            config,
            n_chains: 1,
            warnings: Vec::new(),
        }
    }

    pub fn push_state(&mut self, state: &SamplerState) {
        self.push(&state.households, &state.population);
    }

    pub fn push(&mut self, households: &[HouseholdParams], population: &PopulationParams) {
        debug_assert_eq!(households.len(), self.n_households);
        for hp in households {
            self.alpha.extend_from_slice(&hp.alpha);
            self.beta.extend_from_slice(&hp.beta);
            self.delta.extend_from_slice(&hp.delta);
            self.intangible.extend_from_slice(&hp.intangible);
        }
        self.population.push(population.clone());
    }

    /// Concatenates chains that share dimensions and attributes.
    pub fn concat(chains: Vec<ChainDraws>) -> Result<ChainDraws> {
        let mut iter = chains.into_iter();
        let mut out = iter.next().ok_or(Error::EmptyChain)?;
        for c in iter {
            if c.n_households != out.n_households || c.attrs != out.attrs {
                return Err(Error::Dimension("chains disagree in shape".into()));
            }
            out.alpha.extend(c.alpha);
            out.beta.extend(c.beta);
            out.delta.extend(c.delta);
            out.intangible.extend(c.intangible);
            out.population.extend(c.population);
            out.n_chains += c.n_chains;
            for w in c.warnings {
                if !out.warnings.contains(&w) {
                    out.warnings.push(w);
                }
            }
        }
        Ok(out)
    }

    pub fn n_draws(&self) -> usize {
        self.population.len()
    }

    /// Draw indices belonging to chain `c`; chains hold equal draw counts.
    pub fn chain_range(&self, c: usize) -> std::ops::Range<usize> {
        let per = self.n_draws() / self.n_chains.max(1);
        c * per..(c + 1) * per
    }

    pub fn is_empty(&self) -> bool {
        self.population.is_empty()
    }

    pub fn n_households(&self) -> usize {
        self.n_households
    }

    pub fn n_brands(&self) -> usize {
        self.n_brands
    }

    pub fn n_attributes(&self) -> usize {
        self.n_attributes
    }

    pub fn attrs(&self) -> &BrandAttributeMatrix {
        &self.attrs
    }

    fn slot(&self, draw: usize, h: usize, width: usize) -> std::ops::Range<usize> {
        let start = (draw * self.n_households + h) * width;
        start..start + width
    }

    pub fn alpha(&self, draw: usize, h: usize) -> &[f64] {
        &self.alpha[self.slot(draw, h, self.n_brands)]
    }

    pub fn beta(&self, draw: usize, h: usize) -> &[f64] {
        &self.beta[self.slot(draw, h, N_MARKETING)]
    }

    pub fn delta(&self, draw: usize, h: usize) -> &[f64] {
        &self.delta[self.slot(draw, h, self.n_attributes)]
    }

    pub fn intangible(&self, draw: usize, h: usize) -> &[f64] {
        &self.intangible[self.slot(draw, h, self.n_brands)]
    }

    pub fn population(&self, draw: usize) -> &PopulationParams {
        &self.population[draw]
    }

    pub fn household(&self, draw: usize, h: usize) -> HouseholdParams {
        HouseholdParams {
            alpha: self.alpha(draw, h).to_vec(),
            beta: self.beta(draw, h).to_vec(),
            delta: self.delta(draw, h).to_vec(),
            intangible: self.intangible(draw, h).to_vec(),
        }
    }

    pub fn household_value(&self, draw: usize, h: usize, param: HouseholdParam) -> f64 {
        match param {
            HouseholdParam::Marketing(k) => self.beta(draw, h)[k],
            HouseholdParam::Intercept(j) => self.alpha(draw, h)[j],
            HouseholdParam::InterceptDiff(j) => {
                let a = self.alpha(draw, h);
                a[j] - a[0]
            }
            HouseholdParam::Engineering(r) => self.delta(draw, h)[r],
            HouseholdParam::Tangible(j) => self.alpha(draw, h)[j] - self.intangible(draw, h)[j],
            HouseholdParam::Intangible(j) => self.intangible(draw, h)[j],
        }
    }

    /// Draw sequence of one household parameter.
    pub fn household_series(&self, h: usize, param: HouseholdParam) -> Vec<f64> {
        (0..self.n_draws())
            .map(|d| self.household_value(d, h, param))
            .collect()
    }

    pub fn population_series(&self, param: PopulationParam) -> Vec<f64> {
        self.population
            .iter()
            .map(|p| param.value(p, &self.attrs))
            .collect()
    }

    /// Largest relative violation of `α = D·δ + φ*` over all stored draws.
    pub fn max_decomposition_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for d in 0..self.n_draws() {
            for h in 0..self.n_households {
                let (a, delta, phi) = (self.alpha(d, h), self.delta(d, h), self.intangible(d, h));
                for j in 0..self.n_brands {
                    let t: f64 = self
                        .attrs
                        .row(j)
                        .iter()
                        .zip(delta)
                        .map(|(x, y)| x * y)
                        .sum();
                    let scale = a[j]
                        .abs()
                        .max(t.abs())
                        .max(phi[j].abs())
                        .max(f64::MIN_POSITIVE);
                    worst = worst.max((a[j] - (t + phi[j])).abs() / scale);
                }
            }
        }
        worst
    }
}
