//! Gibbs sampler for the hierarchical multinomial probit.
//!
//! Each sweep runs, in order: latent utilities (data augmentation), household
//! brand intercepts jointly with marketing coefficients, engineering
//! parameters with their population mean, per-brand translation moves, the
//! remaining population hyperparameters, and the utility level move.
//! Errors are unit variance and independent across brands. All conditionals
//! are conjugate draws.

mod chain;
mod conditionals;
mod draws;
mod state;

pub use chain::{
    check_inputs, continue_chain, run_chain, run_chains, ChainObserver, Checkpoint, ProgressWriter,
    Sampler, SamplerOptions, CHECKPOINT_VERSION, PROGRESS_EVERY,
};
pub use conditionals::{
    draw_brand_shifts, draw_engineering_params, draw_household_coefficients, draw_latent_utilities,
    draw_level_shift, draw_population_hyperparams,
};
pub use draws::{ChainDraws, HouseholdParam, PopulationParam};
pub use state::{SamplerState, Stage, SweepRng};

#[cfg(test)]
mod tests;
