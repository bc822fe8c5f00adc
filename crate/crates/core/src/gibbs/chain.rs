use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::conditionals::{
    draw_brand_shifts, draw_engineering_params, draw_household_coefficients, draw_latent_utilities,
    draw_level_shift, draw_population_hyperparams,
};
use super::draws::ChainDraws;
use super::state::{SamplerState, Stage, SweepRng};
use crate::data::{validate_panel, BrandAttributeMatrix, McmcConfig, PanelDataset, PriorConfig};
use crate::error::{Error, Result};
use crate::kernels::{chain_seed, factorize_spd, RngStreams};

pub const PROGRESS_EVERY: usize = 100;
pub const CHECKPOINT_VERSION: u32 = 1;

/// Hooks into a running chain.
pub trait ChainObserver {
    /// Called after every conditional update of every sweep.
    fn after_stage(&mut self, _iteration: usize, _stage: Stage, _state: &SamplerState) {}

    /// Called every [`PROGRESS_EVERY`] iterations with the residual sum of squares.
    fn progress(&mut self, _iteration: usize, _fit: f64) {}
}

impl ChainObserver for () {}

/// Writes one `iter=<i> fit=<rss>` line per progress event.
pub struct ProgressWriter<W: Write>(pub W);

impl<W: Write> ChainObserver for ProgressWriter<W> {
    fn progress(&mut self, iteration: usize, fit: f64) {
        let _ = writeln!(self.0, "iter={iteration} fit={fit:.6}");
    }
}

/// Sampler options beyond the MCMC schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerOptions {
    /// Run the translation moves (per-brand shifts and the utility level)
    /// each sweep.
    pub translation_moves: bool,
    /// Write a checkpoint every this many iterations when set.
    pub checkpoint_every: Option<usize>,
    pub checkpoint_path: Option<PathBuf>,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            translation_moves: true,
            checkpoint_every: None,
            checkpoint_path: None,
        }
    }
}

/// Versioned sampler snapshot. Resuming from it continues the exact rng
/// sequence of the original run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    /// Number of completed sweeps.
    pub iteration: usize,
    pub seed: u64,
    pub state: SamplerState,
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer(writer, self)?;
        Ok(())
    }

    pub fn read_from<R: std::io::Read>(reader: R) -> Result<Self> {
        let cp: Checkpoint = serde_json::from_reader(reader)?;
        if cp.version != CHECKPOINT_VERSION {
            return Err(Error::Malformed(format!(
                "checkpoint version {} not supported (expected {CHECKPOINT_VERSION})",
                cp.version
            )));
        }
        Ok(cp)
    }
}

/// Preconditions shared by every entry point.
pub fn check_inputs(
    data: &PanelDataset,
    attrs: &BrandAttributeMatrix,
    priors: &PriorConfig,
    config: &McmcConfig,
) -> Result<Vec<String>> {
    let violations = validate_panel(data, attrs);
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    config.validate()?;
    priors.validate()?;
    if priors.n_attributes() != attrs.n_attributes() {
        return Err(Error::Dimension(format!(
            "priors cover {} attributes, matrix has {}",
            priors.n_attributes(),
            attrs.n_attributes()
        )));
    }
    let rank = attrs.rank();
    if rank < attrs.n_attributes() {
        return Err(Error::RankDeficient {
            rank,
            cols: attrs.n_attributes(),
        });
    }

    let mut warnings = Vec::new();
    for (k, name) in [(0usize, "display"), (1, "price")] {
        let mut values = data.occasions().flat_map(|o| {
            if k == 0 {
                o.displays.iter()
            } else {
                o.prices.iter()
            }
        });
        if let Some(first) = values.next() {
            if values.all(|v| v == first) {
                warnings.push(format!(
                    "{name} never varies in the panel; its coefficient is identified by the prior only"
                ));
            }
        }
    }
    Ok(warnings)
}

/// The Gibbs sampler for one chain.
pub struct Sampler<'a> {
    data: &'a PanelDataset,
    attrs: &'a BrandAttributeMatrix,
    priors: &'a PriorConfig,
    streams: RngStreams,
    options: SamplerOptions,
    state: SamplerState,
    iteration: usize,
}

impl<'a> Sampler<'a> {
    pub fn new(
        data: &'a PanelDataset,
        attrs: &'a BrandAttributeMatrix,
        priors: &'a PriorConfig,
        seed: u64,
        options: SamplerOptions,
    ) -> Result<Self> {
        let streams = RngStreams::new(seed);
        let state =
            SamplerState::initialize(data, attrs, priors, streams).map_err(|e| Error::Sampler {
                iteration: 0,
                conditional: Stage::Init.name(),
                source: Box::new(e),
            })?;
        Ok(Self {
            data,
            attrs,
            priors,
            streams,
            options,
            state,
            iteration: 0,
        })
    }

    pub fn resume(
        data: &'a PanelDataset,
        attrs: &'a BrandAttributeMatrix,
        priors: &'a PriorConfig,
        checkpoint: Checkpoint,
        options: SamplerOptions,
    ) -> Result<Self> {
        if checkpoint.state.households.len() != data.n_households() {
            return Err(Error::Dimension(
                "checkpoint does not match the panel".into(),
            ));
        }
        Ok(Self {
            data,
            attrs,
            priors,
            streams: RngStreams::new(checkpoint.seed),
            options,
            state: checkpoint.state,
            iteration: checkpoint.iteration,
        })
    }

    pub fn state(&self) -> &SamplerState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut SamplerState {
        &mut self.state
    }

    /// Completed sweeps.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            iteration: self.iteration,
            seed: self.streams.seed(),
            state: self.state.clone(),
        }
    }

    pub fn run_stage(&mut self, stage: Stage, rng: &SweepRng) -> Result<()> {
        let s = &mut self.state;
        match stage {
            Stage::Init => Ok(()),
            Stage::Latent => draw_latent_utilities(s, self.data, rng),
            Stage::Household => draw_household_coefficients(s, self.data, self.attrs, rng),
            Stage::Engineering => draw_engineering_params(s, self.attrs, self.priors, rng),
            Stage::Population => {
                draw_population_hyperparams(s, self.attrs, self.priors, rng)?;
                factorize_spd(&s.population.beta_cov)?;
                factorize_spd(&s.population.delta_cov)?;
                Ok(())
            }
            Stage::Shift if self.options.translation_moves => {
                draw_brand_shifts(s, self.data, self.attrs, rng)
            }
            Stage::Level if self.options.translation_moves => {
                draw_level_shift(s, self.attrs, self.priors, rng)
            }
            Stage::Shift | Stage::Level => Ok(()),
        }
    }

    /// One full sweep in the fixed stage order.
    pub fn step<O: ChainObserver + ?Sized>(&mut self, observer: &mut O) -> Result<()> {
        let it = self.iteration + 1;
        let rng = SweepRng::new(self.streams, it);
        for stage in Stage::SWEEP {
            self.run_stage(stage, &rng).map_err(|e| Error::Sampler {
                iteration: it,
                conditional: stage.name(),
                source: Box::new(e),
            })?;
            observer.after_stage(it, stage, &self.state);
        }
        self.iteration = it;
        if it.is_multiple_of(PROGRESS_EVERY) {
            observer.progress(it, self.state.residual_sum_of_squares(self.data));
        }
        if let (Some(every), Some(path)) =
            (self.options.checkpoint_every, &self.options.checkpoint_path)
        {
            if every > 0 && it.is_multiple_of(every) {
                let f = std::fs::File::create(path)?;
                self.checkpoint().write_to(std::io::BufWriter::new(f))?;
            }
        }
        Ok(())
    }
}

/// Runs one chain with the seed in `config` and collects thinned
/// post-burn-in draws.
pub fn run_chain<O: ChainObserver + ?Sized>(
    data: &PanelDataset,
    attrs: &BrandAttributeMatrix,
    priors: &PriorConfig,
    config: &McmcConfig,
    options: &SamplerOptions,
    observer: &mut O,
) -> Result<ChainDraws> {
    let warnings = check_inputs(data, attrs, priors, config)?;
    let mut sampler = Sampler::new(data, attrs, priors, config.rng_seed, options.clone())?;
    let mut draws = ChainDraws::new(data.n_households(), attrs, config.clone());
    draws.warnings = warnings;
    continue_chain(&mut sampler, config, &mut draws, observer)?;
    Ok(draws)
}

/// Runs `sampler` until `config.n_iterations`, appending retained draws.
pub fn continue_chain<O: ChainObserver + ?Sized>(
    sampler: &mut Sampler<'_>,
    config: &McmcConfig,
    draws: &mut ChainDraws,
    observer: &mut O,
) -> Result<()> {
    while sampler.iteration() < config.n_iterations {
        sampler.step(observer)?;
        let it = sampler.iteration();
        if it > config.n_burn_in && (it - config.n_burn_in).is_multiple_of(config.thin) {
            draws.push_state(sampler.state());
        }
    }
    Ok(())
}

/// Runs `n_chains` chains concurrently. Chain `c` uses
/// `chain_seed(config.rng_seed, c)`; draws are concatenated in chain order.
pub fn run_chains(
    data: &PanelDataset,
    attrs: &BrandAttributeMatrix,
    priors: &PriorConfig,
    config: &McmcConfig,
    options: &SamplerOptions,
    n_chains: usize,
) -> Result<ChainDraws> {
    if n_chains == 0 {
        return Err(Error::InvalidArgument(
            "at least one chain is required".into(),
        ));
    }
    let chains = (0..n_chains)
        .into_par_iter()
        .map(|c| {
            let cfg = McmcConfig {
                rng_seed: chain_seed(config.rng_seed, c),
                ..config.clone()
            };
            let mut opts = options.clone();
            if n_chains > 1 {
                opts.checkpoint_path = opts
                    .checkpoint_path
                    .map(|p| p.with_extension(format!("chain{c}.json")));
            }
            let mut draws = run_chain(data, attrs, priors, &cfg, &opts, &mut ())?;
            draws.config = config.clone();
            Ok(draws)
        })
        .collect::<Result<Vec<_>>>()?;
    ChainDraws::concat(chains)
}
