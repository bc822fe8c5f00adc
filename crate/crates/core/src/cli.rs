//! Command-line front end: estimate, simulate, recover, report.
//!
//! Settings come from an optional key-value (TOML) config file; flags given
//! on the command line override it. Every command computes its outputs in
//! memory and writes them only once everything has succeeded, so failed runs
//! leave no partial artifacts.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::brand_value::decompose_chain;
use crate::data::{
    read_attributes_csv, read_panel_csv, write_attributes_csv, write_household_map,
    write_panel_csv, BrandAttributeMatrix, McmcConfig, PanelDataset, PriorConfig,
};
use crate::error::Error;
use crate::gibbs::{
    run_chain, run_chains, ChainDraws, ProgressWriter, SamplerOptions, CHECKPOINT_VERSION,
};
use crate::kernels::chain_seed;
use crate::posterior::{
    render_report, ChainSummary, ReportFormat, GEWEKE_FIRST, GEWEKE_LAST, HIERARCHICAL_TITLE,
    MARKET_RESPONSE_TITLE,
};
use crate::recovery::{score_summary, RecoveryThresholds};
use crate::synth::{
    default_population, generate_panel, GeneratorSpec, SyntheticTruth, DEFAULT_HETEROGENEITY_SD,
};

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "HBPROBIT_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SAMPLER: i32 = 3;
pub const EXIT_THRESHOLD: i32 = 4;

pub const SUMMARY_FILE: &str = "chain_summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";
pub const DECOMPOSITION_FILE: &str = "decomposition.csv";
pub const HOUSEHOLD_MAP_FILE: &str = "household_map.csv";
pub const PANEL_FILE: &str = "panel.csv";
pub const ATTRIBUTES_FILE: &str = "attributes.csv";
pub const TRUTH_FILE: &str = "truth.json";
pub const RECOVERY_FILE: &str = "recovery.json";

#[derive(Debug, Parser)]
#[command(
    name = "hbprobit",
    version,
    about = "Hierarchical Bayes multinomial probit with brand value decomposition"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the model to a panel and write summaries, reports and diagnostics.
    Estimate(Flags),
    /// Generate a synthetic panel with known truth.
    Simulate(Flags),
    /// Score a chain summary against synthetic truth.
    Recover(Flags),
    /// Render the posterior tables of a chain summary.
    Report(Flags),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Estimate(_) => "estimate",
            Command::Simulate(_) => "simulate",
            Command::Recover(_) => "recover",
            Command::Report(_) => "report",
        }
    }

    fn flags(&self) -> &Flags {
        match self {
            Command::Estimate(f)
            | Command::Simulate(f)
            | Command::Recover(f)
            | Command::Report(f) => f,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Key-value config file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunConfig,
}

/// Every setting a command may read. Unset entries fall back to defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Panel CSV (household_id, occasion, chosen_brand, price_j, display_j).
    #[arg(long)]
    pub panel: Option<PathBuf>,
    /// Brand attribute CSV.
    #[arg(long)]
    pub attrs: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Chain summary written by estimate.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Truth file written by simulate.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub burn: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub hpd_level: Option<f64>,
    /// text or csv (json also accepted).
    #[arg(long)]
    pub format: Option<String>,
    /// Worker threads; overrides the environment variable, which overrides the file.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Precision of the normal priors on the population means.
    #[arg(long)]
    pub prior_precision: Option<f64>,
    /// Run the translation moves each sweep.
    #[arg(long)]
    pub translation_moves: Option<bool>,
    /// Write a checkpoint into the output directory every N iterations.
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Print a progress line every 100 iterations to stderr (single chain).
    #[arg(long)]
    pub progress: Option<bool>,
    #[arg(long)]
    pub households: Option<usize>,
    #[arg(long)]
    pub occasions: Option<usize>,
    #[arg(long)]
    pub heterogeneity_sd: Option<f64>,
    #[arg(long)]
    pub rmse_max: Option<f64>,
    #[arg(long)]
    pub sign_min: Option<f64>,
    #[arg(long)]
    pub coverage_min: Option<f64>,
    #[arg(long)]
    pub population_covered_min: Option<usize>,
    #[arg(long)]
    pub marketing_mean_abs_max: Option<f64>,
    #[arg(long)]
    pub negative_price_min: Option<f64>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($field:ident),*) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )*
    };
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::validation(format!("config: {}", e.message())))
    }

    /// Entries of `top` replace those of `self`.
    pub fn overlay(mut self, top: &RunConfig) -> Self {
        overlay!(
            self,
            top,
            panel,
            attrs,
            out,
            summary,
            truth,
            iters,
            burn,
            thin,
            seed,
            chains,
            hpd_level,
            format,
            workers,
            prior_precision,
            translation_moves,
            checkpoint_every,
            progress,
            households,
            occasions,
            heterogeneity_sd,
            rmse_max,
            sign_min,
            coverage_min,
            population_covered_min,
            marketing_mean_abs_max,
            negative_price_min
        );
        self
    }

    pub fn mcmc(&self) -> McmcConfig {
        let d = McmcConfig::default();
        McmcConfig {
            n_iterations: self.iters.unwrap_or(d.n_iterations),
            n_burn_in: self.burn.unwrap_or(d.n_burn_in),
            thin: self.thin.unwrap_or(d.thin),
            rng_seed: self.seed.unwrap_or(d.rng_seed),
            hpd_level: self.hpd_level.unwrap_or(d.hpd_level),
        }
    }

    pub fn report_format(&self) -> Result<ReportFormat, CliError> {
        self.format
            .as_deref()
            .unwrap_or("text")
            .parse()
            .map_err(|e: Error| CliError::validation(e.to_string()))
    }

    pub fn thresholds(&self) -> RecoveryThresholds {
        let d = RecoveryThresholds::default();
        RecoveryThresholds {
            rmse_max: self.rmse_max.unwrap_or(d.rmse_max),
            sign_min: self.sign_min.unwrap_or(d.sign_min),
            coverage_min: self.coverage_min.unwrap_or(d.coverage_min),
            population_covered_min: self
                .population_covered_min
                .unwrap_or(d.population_covered_min),
            marketing_mean_abs_max: self
                .marketing_mean_abs_max
                .unwrap_or(d.marketing_mean_abs_max),
            negative_price_min: self.negative_price_min.unwrap_or(d.negative_price_min),
        }
    }

    /// SHA-256 of the settings that determine the outputs. File locations,
    /// worker count and progress are left out; input contents are hashed
    /// separately in the manifest.
    pub fn hash(&self) -> String {
        let canonical = RunConfig {
            panel: None,
            attrs: None,
            summary: None,
            truth: None,
            out: None,
            workers: None,
            progress: None,
            ..self.clone()
        };
        sha256_hex(
            serde_json::to_string(&canonical)
                .expect("config serializes")
                .as_bytes(),
        )
    }
}

/// A failed command with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.code {
            EXIT_VALIDATION => "validation",
            EXIT_SAMPLER => "sampler",
            EXIT_THRESHOLD => "threshold",
            _ => "io",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let one_line = self.message.replace('\n', " ");
        write!(f, "error[{}]: {}", self.kind(), one_line)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Sampler { .. }
            | Error::NotPositiveDefinite
            | Error::Singular
            | Error::EmptyChain => EXIT_SAMPLER,
            Error::Io(_) => EXIT_IO,
            _ => EXIT_VALIDATION,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn read_input(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a PathBuf> {
    value
        .as_ref()
        .ok_or_else(|| CliError::validation(format!("--{flag} is required")))
}

/// Files produced by a command, written together at the end.
#[derive(Default)]
struct Outputs {
    files: BTreeMap<String, Vec<u8>>,
}

impl Outputs {
    fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.insert(name.into(), bytes.into());
    }

    fn write_all(&self, dir: &Path) -> CliResult<()> {
        let io = |e: std::io::Error| CliError {
            code: EXIT_IO,
            message: format!("writing {}: {e}", dir.display()),
        };
        fs::create_dir_all(dir).map_err(io)?;
        for (name, bytes) in &self.files {
            fs::write(dir.join(name), bytes).map_err(io)?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    seed: u64,
    chain_seeds: Vec<u64>,
    config_hash: String,
    config: &'a RunConfig,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
    versions: BTreeMap<&'static str, String>,
}

fn versions() -> BTreeMap<&'static str, String> {
    BTreeMap::from([
        ("hbprobit", env!("CARGO_PKG_VERSION").to_string()),
        ("checkpoint", CHECKPOINT_VERSION.to_string()),
    ])
}

fn add_manifest(
    outputs: &mut Outputs,
    command: &str,
    config: &RunConfig,
    seed: u64,
    chain_seeds: Vec<u64>,
    inputs: BTreeMap<String, String>,
) {
    let mut names: Vec<String> = outputs.files.keys().cloned().collect();
    names.push(MANIFEST_FILE.to_string());
    names.sort();
    let manifest = Manifest {
        command,
        seed,
        chain_seeds,
        config_hash: config.hash(),
        config,
        inputs,
        outputs: names,
        versions: versions(),
    };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    outputs.add(MANIFEST_FILE, json);
}

/// Merges the config file (if any), then the worker-count environment
/// variable, then the flags; later sources win.
pub fn resolve(flags: &Flags) -> CliResult<RunConfig> {
    let mut base = match &flags.config {
        Some(path) => {
            let bytes = read_input(path)?;
            let text = String::from_utf8(bytes)
                .map_err(|_| CliError::validation("config file is not UTF-8"))?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        base.workers = Some(v.trim().parse::<usize>().map_err(|_| {
            CliError::validation(format!("{WORKERS_ENV}='{v}' is not a positive integer"))
        })?);
    }
    let config = base.overlay(&flags.run);
    if config.workers == Some(0) {
        return Err(CliError::validation("workers must be at least 1"));
    }
    Ok(config)
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match dispatch(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            e.code
        }
    }
}

fn dispatch(command: &Command) -> CliResult<()> {
    let config = resolve(command.flags())?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = config.workers {
            b = b.num_threads(n);
        }
        b.build().map_err(|e| CliError {
            code: EXIT_IO,
            message: format!("thread pool: {e}"),
        })?
    };
    pool.install(|| match command {
        Command::Estimate(_) => cmd_estimate(&config),
        Command::Simulate(_) => cmd_simulate(&config),
        Command::Recover(_) => cmd_recover(&config),
        Command::Report(_) => cmd_report(&config),
    })
}

fn load_inputs(
    config: &RunConfig,
) -> CliResult<(PanelDataset, BrandAttributeMatrix, BTreeMap<String, String>)> {
    let panel_path = required(&config.panel, "panel")?;
    let attrs_path = required(&config.attrs, "attrs")?;
    let panel_bytes = read_input(panel_path)?;
    let attrs_bytes = read_input(attrs_path)?;
    let data = read_panel_csv(panel_bytes.as_slice())
        .map_err(|e| CliError::validation(format!("panel: {e}")))?;
    let attrs = read_attributes_csv(attrs_bytes.as_slice())
        .map_err(|e| CliError::validation(format!("attributes: {e}")))?;
    let inputs = BTreeMap::from([
        ("panel_sha256".to_string(), sha256_hex(&panel_bytes)),
        ("attrs_sha256".to_string(), sha256_hex(&attrs_bytes)),
    ]);
    Ok((data, attrs, inputs))
}

#[derive(Serialize)]
struct GewekeEntry<'a> {
    parameter: &'a str,
    z: &'a [Option<f64>],
    converged: bool,
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    n_draws: usize,
    n_chains: usize,
    chain_seeds: &'a [u64],
    geweke_first: f64,
    geweke_last: f64,
    geweke: Vec<GewekeEntry<'a>>,
    geweke_pass_rate: f64,
    max_decomposition_error: f64,
    warnings: &'a [String],
}

fn diagnostics_json(summary: &ChainSummary, chain_seeds: &[u64]) -> String {
    let doc = Diagnostics {
        n_draws: summary.n_draws,
        n_chains: summary.n_chains,
        chain_seeds,
        geweke_first: GEWEKE_FIRST,
        geweke_last: GEWEKE_LAST,
        geweke: summary
            .population
            .iter()
            .map(|p| GewekeEntry {
                parameter: &p.label,
                z: &p.geweke,
                converged: p.converged(3.0),
            })
            .collect(),
        geweke_pass_rate: summary.geweke_pass_rate(3.0),
        max_decomposition_error: summary.max_decomposition_error,
        warnings: &summary.warnings,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("diagnostics serialize");
    s.push('\n');
    s
}

fn report_files(outputs: &mut Outputs, summary: &ChainSummary, format: ReportFormat) {
    let ext = format.extension();
    outputs.add(
        format!("market_response.{ext}"),
        render_report(
            Some(MARKET_RESPONSE_TITLE),
            &summary.market_response,
            format,
        ),
    );
    outputs.add(
        format!("hierarchical.{ext}"),
        render_report(Some(HIERARCHICAL_TITLE), &summary.hierarchical, format),
    );
    outputs.add(
        format!("intercept_diffs.{ext}"),
        render_report(
            Some("Intercept Differences"),
            &summary.intercept_diffs,
            format,
        ),
    );
}

fn chain_seeds(seed: u64, n_chains: usize) -> Vec<u64> {
    if n_chains == 1 {
        vec![seed]
    } else {
        (0..n_chains).map(|c| chain_seed(seed, c)).collect()
    }
}

pub fn cmd_estimate(config: &RunConfig) -> CliResult<()> {
    let out = required(&config.out, "out")?.clone();
    let format = config.report_format()?;
    let mcmc = config.mcmc();
    let n_chains = config.chains.unwrap_or(1);
    if n_chains == 0 {
        return Err(CliError::validation("chains must be at least 1"));
    }
    let (data, attrs, inputs) = load_inputs(config)?;
    let priors = match config.prior_precision {
        Some(p) => PriorConfig::with_precision(attrs.n_attributes(), p),
        None => PriorConfig::default_for(attrs.n_attributes()),
    };
    crate::gibbs::check_inputs(&data, &attrs, &priors, &mcmc)?;

    let options = SamplerOptions {
        translation_moves: config.translation_moves.unwrap_or(true),
        checkpoint_every: config.checkpoint_every,
        checkpoint_path: config.checkpoint_every.map(|_| out.join("checkpoint.json")),
    };
    if options.checkpoint_every.is_some() {
        fs::create_dir_all(&out).map_err(|e| CliError {
            code: EXIT_IO,
            message: format!("creating {}: {e}", out.display()),
        })?;
    }
    let chain: ChainDraws = if n_chains == 1 {
        if config.progress.unwrap_or(false) {
            run_chain(
                &data,
                &attrs,
                &priors,
                &mcmc,
                &options,
                &mut ProgressWriter(std::io::stderr()),
            )?
        } else {
            run_chain(&data, &attrs, &priors, &mcmc, &options, &mut ())?
        }
    } else {
        run_chains(&data, &attrs, &priors, &mcmc, &options, n_chains)?
    };

    let summary = ChainSummary::from_chain(&chain, mcmc.hpd_level)?;
    let decomposition = decompose_chain(&chain, &attrs)?;
    let seeds = chain_seeds(mcmc.rng_seed, n_chains);

    let mut outputs = Outputs::default();
    outputs.add(SUMMARY_FILE, summary.to_json());
    report_files(&mut outputs, &summary, format);
    let ids: Vec<String> = data.household_ids().into_iter().map(String::from).collect();
    let mut buf = Vec::new();
    decomposition.write_csv(&mut buf, Some(&ids))?;
    outputs.add(DECOMPOSITION_FILE, buf);
    let mut buf = Vec::new();
    write_household_map(&data, &mut buf)?;
    outputs.add(HOUSEHOLD_MAP_FILE, buf);
    outputs.add(DIAGNOSTICS_FILE, diagnostics_json(&summary, &seeds));
    add_manifest(
        &mut outputs,
        "estimate",
        config,
        mcmc.rng_seed,
        seeds,
        inputs,
    );
    outputs.write_all(&out)
}

pub fn cmd_simulate(config: &RunConfig) -> CliResult<()> {
    let out = required(&config.out, "out")?.clone();
    let seed = config.seed.unwrap_or(McmcConfig::default().rng_seed);
    let mut spec = GeneratorSpec::defaults(seed);
    if let Some(h) = config.households {
        spec.n_households = h;
    }
    if let Some(t) = config.occasions {
        spec.n_occasions = t;
    }
    let sd = config.heterogeneity_sd.unwrap_or(DEFAULT_HETEROGENEITY_SD);
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(CliError::validation(format!(
            "heterogeneity sd {sd} must be positive"
        )));
    }
    spec.population = default_population(&spec.attrs, sd);
    let (data, truth) = generate_panel(&spec)?;

    let mut outputs = Outputs::default();
    let mut buf = Vec::new();
    write_panel_csv(&data, &mut buf)?;
    outputs.add(PANEL_FILE, buf);
    let mut buf = Vec::new();
    write_attributes_csv(&truth.attrs, &mut buf)?;
    outputs.add(ATTRIBUTES_FILE, buf);
    let mut buf = Vec::new();
    truth.write_to(&mut buf)?;
    buf.push(b'\n');
    outputs.add(TRUTH_FILE, buf);
    add_manifest(
        &mut outputs,
        "simulate",
        config,
        seed,
        vec![seed],
        BTreeMap::new(),
    );
    outputs.write_all(&out)
}

fn load_summary(config: &RunConfig) -> CliResult<(ChainSummary, String)> {
    let path = required(&config.summary, "summary")?;
    let bytes = read_input(path)?;
    let summary = ChainSummary::read_from(bytes.as_slice())
        .map_err(|e| CliError::validation(format!("summary {}: {e}", path.display())))?;
    Ok((summary, sha256_hex(&bytes)))
}

pub fn cmd_recover(config: &RunConfig) -> CliResult<()> {
    let out = required(&config.out, "out")?.clone();
    let truth_path = required(&config.truth, "truth")?;
    let bytes = read_input(truth_path)?;
    let truth = SyntheticTruth::read_from(bytes.as_slice())
        .map_err(|e| CliError::validation(format!("truth {}: {e}", truth_path.display())))?;
    let (summary, summary_hash) = load_summary(config)?;
    let report = score_summary(&truth, &summary)?;
    let failures = config.thresholds().check(&report);

    let mut outputs = Outputs::default();
    outputs.add(RECOVERY_FILE, report.to_json());
    let inputs = BTreeMap::from([
        ("truth_sha256".to_string(), sha256_hex(&bytes)),
        ("summary_sha256".to_string(), summary_hash),
    ]);
    add_manifest(
        &mut outputs,
        "recover",
        config,
        summary.config.rng_seed,
        vec![],
        inputs,
    );
    outputs.write_all(&out)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError {
            code: EXIT_THRESHOLD,
            message: failures.join("; "),
        })
    }
}

/// Prints the tables to stdout, and also writes them when `--out` is given.
pub fn cmd_report(config: &RunConfig) -> CliResult<()> {
    let format = config.report_format()?;
    let (summary, summary_hash) = load_summary(config)?;
    let mut outputs = Outputs::default();
    report_files(&mut outputs, &summary, format);
    for name in ["market_response", "hierarchical", "intercept_diffs"] {
        print!(
            "{}",
            String::from_utf8_lossy(&outputs.files[&format!("{name}.{}", format.extension())])
        );
        if format == ReportFormat::Text {
            println!();
        }
    }
    if let Some(out) = &config.out {
        let inputs = BTreeMap::from([("summary_sha256".to_string(), summary_hash)]);
        add_manifest(
            &mut outputs,
            "report",
            config,
            summary.config.rng_seed,
            vec![],
            inputs,
        );
        outputs.write_all(out)?;
    }
    Ok(())
}
