//! Posterior analysis: HPD intervals, significance counts, Geweke
//! diagnostics, table rendering and the persisted chain summary.

mod geweke;
mod hpd;
mod report;
mod significance;
mod summary;

pub use geweke::{
    geweke_z, spectral_density_zero, spectral_density_zero_bartlett, GEWEKE_FIRST, GEWEKE_LAST,
};
pub use hpd::{hpd_interval, hpd_sorted, hpd_window_size};
pub use report::{
    render_report, ReportFormat, HIERARCHICAL_TITLE, MARKET_RESPONSE_TITLE, REPORT_COLUMNS,
};
pub use significance::{
    household_stats, significance_row, significance_table, HouseholdStat, SummaryRow,
};
pub use summary::{ChainSummary, HouseholdSummary, PopulationSummary};
