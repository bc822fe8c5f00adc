use nalgebra::DMatrix;

use super::*;
use crate::data::{BrandAttributeMatrix, McmcConfig, PanelDataset, PriorConfig};
use crate::error::Error;
use crate::synth::{generate_panel, GeneratorSpec, SyntheticTruth};

fn small_panel(h: usize, t: usize, seed: u64) -> (PanelDataset, SyntheticTruth) {
    let spec = GeneratorSpec {
        n_households: h,
        n_occasions: t,
        ..GeneratorSpec::defaults(seed)
    };
    generate_panel(&spec).unwrap()
}

fn config(iters: usize, burn: usize, seed: u64) -> McmcConfig {
    McmcConfig {
        n_iterations: iters,
        n_burn_in: burn,
        thin: 1,
        rng_seed: seed,
        hpd_level: 0.95,
    }
}

#[derive(Default)]
struct Audit {
    checks: usize,
    violations: usize,
    stages: Vec<Stage>,
}

struct AuditObserver<'a> {
    data: &'a PanelDataset,
    audit: Audit,
}

impl ChainObserver for AuditObserver<'_> {
    fn after_stage(&mut self, iteration: usize, stage: Stage, state: &SamplerState) {
        self.audit.checks += 1;
        self.audit.violations += state.truncation_violations(self.data);
        if iteration == 1 {
            self.audit.stages.push(stage);
        }
    }
}

#[test]
fn utilities_respect_choices_after_every_stage() {
    let (data, truth) = small_panel(8, 15, 3);
    let priors = PriorConfig::default_for(truth.attrs.n_attributes());
    let mut obs = AuditObserver {
        data: &data,
        audit: Audit::default(),
    };
    run_chain(
        &data,
        &truth.attrs,
        &priors,
        &config(40, 10, 5),
        &SamplerOptions::default(),
        &mut obs,
    )
    .unwrap();
    assert_eq!(obs.audit.checks, 40 * Stage::SWEEP.len());
    assert_eq!(obs.audit.violations, 0);
    assert_eq!(obs.audit.stages, Stage::SWEEP.to_vec());
}

#[test]
fn initial_state_respects_choices() {
    let (data, truth) = small_panel(5, 10, 4);
    let priors = PriorConfig::default_for(truth.attrs.n_attributes());
    let s = Sampler::new(&data, &truth.attrs, &priors, 1, SamplerOptions::default()).unwrap();
    assert_eq!(s.state().truncation_violations(&data), 0);
    assert_eq!(s.iteration(), 0);
}

#[test]
fn same_seed_same_draws() {
    let (data, truth) = small_panel(6, 10, 7);
    let priors = PriorConfig::default_for(truth.attrs.n_attributes());
    let cfg = config(30, 10, 11);
    let opts = SamplerOptions::default();
    let a = run_chain(&data, &truth.attrs, &priors, &cfg, &opts, &mut ()).unwrap();
    let b = run_chain(&data, &truth.attrs, &priors, &cfg, &opts, &mut ()).unwrap();
    assert_eq!(a, b);
    let c = run_chain(
        &data,
        &truth.attrs,
        &priors,
        &config(30, 10, 12),
        &opts,
        &mut (),
    )
    .unwrap();
    assert_ne!(a, c);
}

#[test]
fn retained_draw_count_follows_schedule() {
    let (data, truth) = small_panel(3, 5, 1);
    let priors = PriorConfig::default_for(truth.attrs.n_attributes());
    let cfg = McmcConfig {
        thin: 5,
        ..config(10, 5, 1)
    };
    let draws = run_chain(
        &data,
        &truth.attrs,
        &priors,
        &cfg,
        &SamplerOptions::default(),
        &mut (),
    )
    .unwrap();
    assert_eq!(draws.n_draws(), 1);
    let cfg = McmcConfig {
        thin: 3,
        ..config(20, 5, 1)
    };
    let draws = run_chain(
        &data,
        &truth.attrs,
        &priors,
        &cfg,
        &SamplerOptions::default(),
        &mut (),
    )
    .unwrap();
    assert_eq!(draws.n_draws(), cfg.n_draws());
    assert_eq!(draws.n_draws(), 5);
}

#[test]
fn checkpoint_resume_continues_the_same_chain() {
    let (data, truth) = small_panel(5, 8, 9);
    let priors = PriorConfig::default_for(truth.attrs.n_attributes());
    let opts = SamplerOptions::default();
    let mut full = Sampler::new(&data, &truth.attrs, &priors, 21, opts.clone()).unwrap();
    for _ in 0..20 {
        full.step(&mut ()).unwrap();
    }

    let mut first = Sampler::new(&data, &truth.attrs, &priors, 21, opts.clone()).unwrap();
    for _ in 0..10 {
        first.step(&mut ()).unwrap();
    }
    let mut buf = Vec::new();
    first.checkpoint().write_to(&mut buf).unwrap();
    let cp = Checkpoint::read_from(buf.as_slice()).unwrap();
    let mut resumed = Sampler::resume(&data, &truth.attrs, &priors, cp, opts).unwrap();
    assert_eq!(resumed.iteration(), 10);
    for _ in 0..10 {
        resumed.step(&mut ()).unwrap();
    }
    assert_eq!(resumed.state(), full.state());
}

#[test]
fn checkpoint_version_is_checked() {
    let (data, truth) = small_panel(2, 3, 1);
    let priors = PriorConfig::default_for(truth.attrs.n_attributes());
    let s = Sampler::new(&data, &truth.attrs, &priors, 1, SamplerOptions::default()).unwrap();
    let mut cp = s.checkpoint();
    cp.version = CHECKPOINT_VERSION + 1;
    let mut buf = Vec::new();
    cp.write_to(&mut buf).unwrap();
    assert!(matches!(
        Checkpoint::read_from(buf.as_slice()),
        Err(Error::Malformed(_))
    ));
}

#[test]
fn chains_run_in_parallel_give_fixed_order() {
    let (data, truth) = small_panel(4, 6, 2);
    let priors = PriorConfig::default_for(truth.attrs.n_attributes());
    let cfg = config(20, 10, 3);
    let opts = SamplerOptions::default();
    let all = run_chains(&data, &truth.attrs, &priors, &cfg, &opts, 3).unwrap();
    assert_eq!(all.n_chains, 3);
    assert_eq!(all.n_draws(), 30);
    let second = run_chain(
        &data,
        &truth.attrs,
        &priors,
        &McmcConfig {
            rng_seed: crate::kernels::chain_seed(3, 1),
            ..cfg.clone()
        },
        &opts,
        &mut (),
    )
    .unwrap();
    let series = all.population_series(PopulationParam::MarketingMean(1));
    assert_eq!(
        &series[all.chain_range(1)],
        second
            .population_series(PopulationParam::MarketingMean(1))
            .as_slice()
    );
    assert!(matches!(
        run_chains(&data, &truth.attrs, &priors, &cfg, &opts, 0),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn sampler_failures_name_iteration_and_conditional() {
    let (data, truth) = small_panel(3, 5, 1);
    let priors = PriorConfig::default_for(truth.attrs.n_attributes());
    let mut s = Sampler::new(&data, &truth.attrs, &priors, 1, SamplerOptions::default()).unwrap();
    s.step(&mut ()).unwrap();
    s.state_mut().population.beta_cov = -DMatrix::identity(2, 2);
    match s.step(&mut ()) {
        Err(Error::Sampler {
            iteration,
            conditional,
            source,
        }) => {
            assert_eq!(iteration, 2);
            assert_eq!(conditional, Stage::Household.name());
            assert!(matches!(*source, Error::NotPositiveDefinite));
        }
        other => panic!("expected a sampler error, got {other:?}"),
    }
}

#[test]
fn empty_household_fails_validation() {
    let (data, truth) = small_panel(3, 4, 1);
    let mut households = data.households().to_vec();
    households[1].occasions.clear();
    let bad = PanelDataset::from_households(households, data.n_brands(), data.price_scale());
    let priors = PriorConfig::default_for(truth.attrs.n_attributes());
    let err = run_chain(
        &bad,
        &truth.attrs,
        &priors,
        &config(10, 5, 1),
        &SamplerOptions::default(),
        &mut (),
    );
    assert!(matches!(err, Err(Error::Validation(_))));
}

#[test]
fn rank_deficient_attributes_are_rejected() {
    let (data, truth) = small_panel(3, 4, 1);
    let mut rows = truth.attrs.rows().to_vec();
    for row in &mut rows {
        row[5] = 2.0 * row[4];
    }
    let attrs = BrandAttributeMatrix::from_rows(truth.attrs.brands().to_vec(), rows);
    let priors = PriorConfig::default_for(attrs.n_attributes());
    let err = run_chain(
        &data,
        &attrs,
        &priors,
        &config(10, 5, 1),
        &SamplerOptions::default(),
        &mut (),
    );
    assert!(
        matches!(err, Err(Error::RankDeficient { rank: 5, cols: 6 })),
        "{err:?}"
    );
}

#[test]
fn bad_schedule_is_rejected() {
    let (data, truth) = small_panel(2, 3, 1);
    let priors = PriorConfig::default_for(truth.attrs.n_attributes());
    let err = run_chain(
        &data,
        &truth.attrs,
        &priors,
        &config(10, 10, 1),
        &SamplerOptions::default(),
        &mut (),
    );
    assert!(matches!(err, Err(Error::InvalidArgument(_))));
}

#[test]
fn single_household_runs() {
    let (data, truth) = small_panel(1, 20, 5);
    let priors = PriorConfig::default_for(truth.attrs.n_attributes());
    let draws = run_chain(
        &data,
        &truth.attrs,
        &priors,
        &config(50, 10, 1),
        &SamplerOptions::default(),
        &mut (),
    )
    .unwrap();
    assert_eq!(draws.n_households(), 1);
    assert!(draws.max_decomposition_error() < 1e-12);
}

#[test]
fn translation_moves_can_be_disabled() {
    let (data, truth) = small_panel(4, 8, 6);
    let priors = PriorConfig::default_for(truth.attrs.n_attributes());
    let opts = SamplerOptions {
        translation_moves: false,
        ..SamplerOptions::default()
    };
    let mut obs = AuditObserver {
        data: &data,
        audit: Audit::default(),
    };
    let with = run_chain(
        &data,
        &truth.attrs,
        &priors,
        &config(20, 10, 1),
        &SamplerOptions::default(),
        &mut (),
    )
    .unwrap();
    let without = run_chain(
        &data,
        &truth.attrs,
        &priors,
        &config(20, 10, 1),
        &opts,
        &mut obs,
    )
    .unwrap();
    assert_eq!(obs.audit.violations, 0);
    assert_ne!(with, without);
}

#[test]
fn long_panel_recovers_marketing_coefficients() {
    // many occasions per household: the posterior concentrates near the truth
    let (data, truth) = small_panel(6, 400, 13);
    let priors = PriorConfig::default_for(truth.attrs.n_attributes());
    let draws = run_chain(
        &data,
        &truth.attrs,
        &priors,
        &config(600, 200, 2),
        &SamplerOptions::default(),
        &mut (),
    )
    .unwrap();
    for h in 0..6 {
        for (k, tol) in [(0, 0.35), (1, 1.2)] {
            let param = HouseholdParam::Marketing(k);
            let s = draws.household_series(h, param);
            let mean = s.iter().sum::<f64>() / s.len() as f64;
            let t = truth.households[h].beta[k];
            assert!(
                (mean - t).abs() < tol,
                "household {h} coefficient {k}: {mean} vs {t}"
            );
        }
        let diff = HouseholdParam::InterceptDiff(3);
        let s = draws.household_series(h, diff);
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        let t = truth.households[h].alpha[3] - truth.households[h].alpha[0];
        assert!(
            (mean - t).abs() < 0.6,
            "household {h} intercept gap: {mean} vs {t}"
        );
    }
}

#[test]
fn stage_streams_are_independent() {
    let streams = crate::kernels::RngStreams::new(4);
    let a = SweepRng::new(streams, 1);
    let b = SweepRng::new(streams, 2);
    use rand::Rng;
    let x: u64 = a.household(Stage::Latent, 0).random();
    assert_eq!(x, a.household(Stage::Latent, 0).random::<u64>());
    assert_ne!(x, a.household(Stage::Latent, 1).random::<u64>());
    assert_ne!(x, a.household(Stage::Household, 0).random::<u64>());
    assert_ne!(x, a.global(Stage::Latent).random::<u64>());
    assert_ne!(x, b.household(Stage::Latent, 0).random::<u64>());
}
