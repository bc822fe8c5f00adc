//! Panel and attribute domain types shared by the sampler, the generator and
//! the reports.
//!
//! Prices enter utility after division by the panel-wide maximum list price,
//! so every rescaled price lies in `(0, 1]`. The raw list prices are kept
//! alongside so that a dataset written back to disk reproduces its input.

mod io;

use std::collections::HashMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{
    read_attributes_csv, read_panel_csv, write_attributes_csv, write_household_map, write_panel_csv,
};

/// Column labels of the attribute matrix, constant first.
pub const ATTRIBUTE_LABELS: [&str; 6] =
    ["Constant", "S.A.A.", "Bleach", "Package", "g/30l", "net-w"];

/// Number of physical features supplied by the user (the constant is added).
pub const N_FEATURES: usize = 5;

/// Number of marketing covariates: display, then price.
pub const N_MARKETING: usize = 2;

pub const MARKETING_LABELS: [&str; N_MARKETING] = ["Display", "Price"];

/// One purchase occasion of one household.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceOccasion {
    /// Dense household index.
    pub household: usize,
    pub occasion_index: usize,
    /// Shelf prices in currency units, as read.
    pub list_prices: Vec<f64>,
    /// Prices divided by the panel maximum.
    pub prices: Vec<f64>,
    pub displays: Vec<f64>,
    pub chosen: usize,
}

impl ChoiceOccasion {
    pub fn n_brands(&self) -> usize {
        self.prices.len()
    }
}

/// Returns the `(display, price)` covariates of `brand` at this occasion.
pub fn design_row(occasion: &ChoiceOccasion, brand: usize) -> Result<(f64, f64)> {
    match (occasion.displays.get(brand), occasion.prices.get(brand)) {
        (Some(&d), Some(&p)) => Ok((d, p)),
        _ => Err(Error::InvalidArgument(format!(
            "brand index {brand} out of range for {} brands",
            occasion.n_brands()
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Household {
    pub id: String,
    pub occasions: Vec<ChoiceOccasion>,
}

/// An occasion as it appears in a panel file, before canonicalization.
#[derive(Debug, Clone, PartialEq)]
pub struct RawOccasion {
    pub household_id: String,
    pub occasion: usize,
    /// Zero-based chosen brand.
    pub chosen: usize,
    pub prices: Vec<f64>,
    pub displays: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelDataset {
    households: Vec<Household>,
    n_brands: usize,
    price_scale: f64,
}

impl PanelDataset {
    /// Groups raw occasions by household (first-appearance order), orders
    /// each household's occasions by occasion index and rescales prices.
    pub fn from_records(records: Vec<RawOccasion>, n_brands: usize) -> Self {
        let price_scale = records
            .iter()
            .flat_map(|r| r.prices.iter().copied())
            .filter(|p| p.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        let price_scale = if price_scale.is_finite() && price_scale > 0.0 {
            price_scale
        } else {
            1.0
        };

        let mut index: HashMap<String, usize> = HashMap::new();
        let mut households: Vec<Household> = Vec::new();
        for r in records {
            let h = *index.entry(r.household_id.clone()).or_insert_with(|| {
                households.push(Household {
                    id: r.household_id.clone(),
                    occasions: Vec::new(),
                });
                households.len() - 1
            });
            let prices = r.prices.iter().map(|p| p / price_scale).collect();
            households[h].occasions.push(ChoiceOccasion {
                household: h,
                occasion_index: r.occasion,
                list_prices: r.prices,
                prices,
                displays: r.displays,
                chosen: r.chosen,
            });
        }
        for hh in &mut households {
            hh.occasions.sort_by_key(|o| o.occasion_index);
        }
        Self {
            households,
            n_brands,
            price_scale,
        }
    }

    /// Assembles a dataset from already-canonical parts. Occasion household
    /// indices are rewritten to match positions in `households`.
    pub fn from_households(
        mut households: Vec<Household>,
        n_brands: usize,
        price_scale: f64,
    ) -> Self {
        for (h, hh) in households.iter_mut().enumerate() {
            for o in &mut hh.occasions {
                o.household = h;
            }
        }
        Self {
            households,
            n_brands,
            price_scale,
        }
    }

    pub fn households(&self) -> &[Household] {
        &self.households
    }

    pub fn n_households(&self) -> usize {
        self.households.len()
    }

    pub fn n_brands(&self) -> usize {
        self.n_brands
    }

    pub fn price_scale(&self) -> f64 {
        self.price_scale
    }

    pub fn n_occasions(&self) -> usize {
        self.households.iter().map(|h| h.occasions.len()).sum()
    }

    pub fn occasions(&self) -> impl Iterator<Item = &ChoiceOccasion> {
        self.households.iter().flat_map(|h| h.occasions.iter())
    }

    pub fn household_ids(&self) -> Vec<&str> {
        self.households.iter().map(|h| h.id.as_str()).collect()
    }
}

/// J×R physical attribute matrix with a leading constant column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrandAttributeMatrix {
    brands: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl BrandAttributeMatrix {
    /// Builds the matrix from per-brand features
    /// `(saa, bleach, package, g_per_30l, net_weight)`.
    pub fn from_features(brands: Vec<String>, features: &[[f64; N_FEATURES]]) -> Self {
        let rows = features
            .iter()
            .map(|f| std::iter::once(1.0).chain(f.iter().copied()).collect())
            .collect();
        Self { brands, rows }
    }

    /// Rows must already include the constant column.
    pub fn from_rows(brands: Vec<String>, rows: Vec<Vec<f64>>) -> Self {
        Self { brands, rows }
    }

    pub fn brands(&self) -> &[String] {
        &self.brands
    }

    pub fn n_brands(&self) -> usize {
        self.rows.len()
    }

    pub fn n_attributes(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn row(&self, brand: usize) -> &[f64] {
        &self.rows[brand]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_brands(), self.n_attributes(), |j, r| self.rows[j][r])
    }

    /// Numerical column rank.
    pub fn rank(&self) -> usize {
        let m = self.to_matrix();
        if m.is_empty() {
            return 0;
        }
        m.rank(1e-9 * m.amax().max(1.0))
    }

    /// Tangible values `D·delta` for every brand.
    pub fn tangible(&self, delta: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.n_brands(),
            self.rows
                .iter()
                .map(|row| row.iter().zip(delta).map(|(a, b)| a * b).sum()),
        )
    }
}

/// Household-level parameters of one draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdParams {
    pub alpha: Vec<f64>,
    /// `[display, price]`.
    pub beta: Vec<f64>,
    pub delta: Vec<f64>,
    pub intangible: Vec<f64>,
}

impl HouseholdParams {
    pub fn zeros(n_brands: usize, n_attributes: usize) -> Self {
        Self {
            alpha: vec![0.0; n_brands],
            beta: vec![0.0; N_MARKETING],
            delta: vec![0.0; n_attributes],
            intangible: vec![0.0; n_brands],
        }
    }

    /// Recomputes intangibles as `alpha - D·delta`.
    pub fn refresh_intangible(&mut self, attrs: &BrandAttributeMatrix) {
        for (j, phi) in self.intangible.iter_mut().enumerate() {
            let t: f64 = attrs
                .row(j)
                .iter()
                .zip(&self.delta)
                .map(|(a, b)| a * b)
                .sum();
            *phi = self.alpha[j] - t;
        }
    }

    /// Deterministic utility of `brand` at `occasion`.
    pub fn utility(&self, occasion: &ChoiceOccasion, brand: usize) -> f64 {
        self.alpha[brand]
            + self.beta[0] * occasion.displays[brand]
            + self.beta[1] * occasion.prices[brand]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationParams {
    pub beta_mean: DVector<f64>,
    pub beta_cov: DMatrix<f64>,
    pub delta_mean: DVector<f64>,
    pub delta_cov: DMatrix<f64>,
    pub intangible_var: f64,
}

impl PopulationParams {
    pub fn check(&self) -> Result<()> {
        crate::kernels::factorize_spd(&self.beta_cov)?;
        crate::kernels::factorize_spd(&self.delta_cov)?;
        if !(self.intangible_var > 0.0 && self.intangible_var.is_finite()) {
            return Err(Error::InvalidArgument(
                "intangible variance must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub beta_mean: DVector<f64>,
    pub beta_mean_precision: DMatrix<f64>,
    pub delta_mean: DVector<f64>,
    pub delta_mean_precision: DMatrix<f64>,
    pub beta_cov_df: f64,
    pub beta_cov_scale: DMatrix<f64>,
    pub delta_cov_df: f64,
    pub delta_cov_scale: DMatrix<f64>,
    pub intangible_shape: f64,
    pub intangible_scale: f64,
}

impl PriorConfig {
    /// Diffuse default: zero means, precision `0.01·I`, inverse-Wishart with
    /// `dim + 3` degrees of freedom and identity scale, IG(2.5, 1) on the
    /// intangible variance.
    pub fn default_for(n_attributes: usize) -> Self {
        Self::with_precision(n_attributes, 0.01)
    }

    pub fn with_precision(n_attributes: usize, precision: f64) -> Self {
        Self {
            beta_mean: DVector::zeros(N_MARKETING),
            beta_mean_precision: DMatrix::identity(N_MARKETING, N_MARKETING) * precision,
            delta_mean: DVector::zeros(n_attributes),
            delta_mean_precision: DMatrix::identity(n_attributes, n_attributes) * precision,
            beta_cov_df: N_MARKETING as f64 + 3.0,
            beta_cov_scale: DMatrix::identity(N_MARKETING, N_MARKETING),
            delta_cov_df: n_attributes as f64 + 3.0,
            delta_cov_scale: DMatrix::identity(n_attributes, n_attributes),
            intangible_shape: 2.5,
            intangible_scale: 1.0,
        }
    }

    pub fn n_attributes(&self) -> usize {
        self.delta_mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        let check_df = |df: f64, dim: usize, what: &str| {
            if df > dim as f64 - 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "{what} degrees of freedom {df} must exceed dimension - 1 = {}",
                    dim as f64 - 1.0
                )))
            }
        };
        check_df(
            self.beta_cov_df,
            self.beta_cov_scale.nrows(),
            "beta covariance",
        )?;
        check_df(
            self.delta_cov_df,
            self.delta_cov_scale.nrows(),
            "delta covariance",
        )?;
        for (m, name) in [
            (&self.beta_mean_precision, "beta mean precision"),
            (&self.delta_mean_precision, "delta mean precision"),
        ] {
            if m.iter().any(|v| !v.is_finite()) || m.diagonal().iter().any(|&v| v < 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be non-negative"
                )));
            }
        }
        if self.beta_mean.len() != self.beta_mean_precision.nrows()
            || self.delta_mean.len() != self.delta_mean_precision.nrows()
            || self.delta_mean.len() != self.delta_cov_scale.nrows()
        {
            return Err(Error::Dimension("prior dimensions disagree".into()));
        }
        if !(self.intangible_shape > 0.0 && self.intangible_scale > 0.0) {
            return Err(Error::InvalidArgument(
                "inverse-gamma shape and scale must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Prior means of the population layer, used as the chain start.
    pub fn initial_population(&self) -> PopulationParams {
        let iw_mean = |df: f64, scale: &DMatrix<f64>| {
            let denom = df - scale.nrows() as f64 - 1.0;
            if denom > 0.0 {
                scale / denom
            } else {
                scale.clone()
            }
        };
        let ig_mean = if self.intangible_shape > 1.0 {
            self.intangible_scale / (self.intangible_shape - 1.0)
        } else {
            self.intangible_scale
        };
        PopulationParams {
            beta_mean: self.beta_mean.clone(),
            beta_cov: iw_mean(self.beta_cov_df, &self.beta_cov_scale),
            delta_mean: self.delta_mean.clone(),
            delta_cov: iw_mean(self.delta_cov_df, &self.delta_cov_scale),
            intangible_var: ig_mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub n_iterations: usize,
    pub n_burn_in: usize,
    pub thin: usize,
    pub rng_seed: u64,
    pub hpd_level: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            n_iterations: 4000,
            n_burn_in: 1000,
            thin: 1,
            rng_seed: 1,
            hpd_level: 0.95,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::InvalidArgument("thin must be at least 1".into()));
        }
        if self.n_burn_in >= self.n_iterations {
            return Err(Error::InvalidArgument(format!(
                "burn-in {} must be smaller than the iteration count {}",
                self.n_burn_in, self.n_iterations
            )));
        }
        if !(self.hpd_level > 0.0 && self.hpd_level < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "hpd level {} outside (0, 1)",
                self.hpd_level
            )));
        }
        Ok(())
    }

    pub fn n_draws(&self) -> usize {
        (self.n_iterations - self.n_burn_in) / self.thin
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    ChosenOutOfRange,
    BrandCountMismatch,
    NonPositivePrice,
    NonBinaryDisplay,
    EmptyHousehold,
    NoHouseholds,
    ConstantColumn,
    NonFiniteAttribute,
    NonBinaryAttribute,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ChosenOutOfRange => "chosen out of range",
            Self::BrandCountMismatch => "brand count mismatch",
            Self::NonPositivePrice => "non-positive price",
            Self::NonBinaryDisplay => "display not in {0,1}",
            Self::EmptyHousehold => "household without occasions",
            Self::NoHouseholds => "panel has no households",
            Self::ConstantColumn => "first attribute column not constant 1",
            Self::NonFiniteAttribute => "non-finite attribute",
            Self::NonBinaryAttribute => "binary attribute not in {0,1}",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.kind.as_str(), self.detail)
    }
}

/// Checks panel and attribute invariants. An empty report means valid.
pub fn validate_panel(dataset: &PanelDataset, attrs: &BrandAttributeMatrix) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |kind, detail: String| out.push(Violation { kind, detail });
    let j = dataset.n_brands();

    if dataset.n_households() == 0 {
        push(ViolationKind::NoHouseholds, "no occasions".into());
    }
    if attrs.n_brands() != j {
        push(
            ViolationKind::BrandCountMismatch,
            format!(
                "panel has {j} brands, attribute matrix has {}",
                attrs.n_brands()
            ),
        );
    }
    for hh in dataset.households() {
        if hh.occasions.is_empty() {
            push(
                ViolationKind::EmptyHousehold,
                format!("household {}", hh.id),
            );
        }
        for o in &hh.occasions {
            let at = || format!("household {}, occasion {}", hh.id, o.occasion_index);
            if o.prices.len() != j || o.displays.len() != j || o.list_prices.len() != j {
                push(
                    ViolationKind::BrandCountMismatch,
                    format!(
                        "{}: {} prices, {} displays, expected {j}",
                        at(),
                        o.list_prices.len(),
                        o.displays.len()
                    ),
                );
            }
            if o.chosen >= j {
                push(
                    ViolationKind::ChosenOutOfRange,
                    format!("{}: chosen {} with J = {j}", at(), o.chosen),
                );
            }
            if o.list_prices.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
                push(ViolationKind::NonPositivePrice, at());
            }
            if o.displays.iter().any(|d| *d != 0.0 && *d != 1.0) {
                push(ViolationKind::NonBinaryDisplay, at());
            }
        }
    }

    for (b, row) in attrs.rows().iter().enumerate() {
        if row.len() != ATTRIBUTE_LABELS.len() {
            push(
                ViolationKind::BrandCountMismatch,
                format!(
                    "attribute row {b} has {} columns, expected {}",
                    row.len(),
                    ATTRIBUTE_LABELS.len()
                ),
            );
            continue;
        }
        if row[0] != 1.0 {
            push(ViolationKind::ConstantColumn, format!("attribute row {b}"));
        }
        if row.iter().any(|v| !v.is_finite()) {
            push(
                ViolationKind::NonFiniteAttribute,
                format!("attribute row {b}"),
            );
        }
        // bleach and package are binary codes
        for c in [2, 3] {
            if row[c] != 0.0 && row[c] != 1.0 {
                push(
                    ViolationKind::NonBinaryAttribute,
                    format!("attribute row {b}, column {}", ATTRIBUTE_LABELS[c]),
                );
            }
        }
    }
    out
}
