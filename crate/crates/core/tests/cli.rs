use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hbprobit::data::McmcConfig;
use hbprobit::gibbs::ChainDraws;
use hbprobit::posterior::ChainSummary;
use hbprobit::synth::SyntheticTruth;

fn hbprobit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hbprobit"))
        .args(args)
        .env_remove("HBPROBIT_WORKERS")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn simulate(dir: &Path, households: usize, occasions: usize) -> PathBuf {
    let out = dir.join("sim");
    let o = hbprobit(&[
        "simulate",
        "--out",
        &s(&out),
        "--seed",
        "4",
        "--households",
        &households.to_string(),
        "--occasions",
        &occasions.to_string(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

fn estimate_args<'a>(sim: &'a str, out: &'a str) -> Vec<String> {
    [
        "estimate",
        "--panel",
        &format!("{sim}/panel.csv"),
        "--attrs",
        &format!("{sim}/attributes.csv"),
        "--out",
        out,
        "--iters",
        "120",
        "--burn",
        "40",
        "--seed",
        "8",
    ]
    .map(String::from)
    .to_vec()
}

fn run(args: &[String]) -> Output {
    hbprobit(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn simulate_writes_panel_truth_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), 7, 5);
    let panel = fs::read_to_string(sim.join("panel.csv")).unwrap();
    assert_eq!(panel.lines().count(), 1 + 7 * 5);
    assert!(panel.starts_with("household_id,occasion,chosen_brand,price_1"));
    let truth = SyntheticTruth::read_from(fs::File::open(sim.join("truth.json")).unwrap()).unwrap();
    assert_eq!(truth.households.len(), 7);
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(sim.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 4);
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);

    let again = tempfile::tempdir().unwrap();
    let sim2 = simulate(again.path(), 7, 5);
    for f in ["panel.csv", "attributes.csv", "truth.json"] {
        assert_eq!(
            fs::read(sim.join(f)).unwrap(),
            fs::read(sim2.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn estimate_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), 10, 8);
    let out = dir.path().join("est");
    let panel_before = fs::read(sim.join("panel.csv")).unwrap();
    let o = run(&estimate_args(&s(&sim), &s(&out)));
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(sim.join("panel.csv")).unwrap(), panel_before);

    let summary =
        ChainSummary::read_from(fs::File::open(out.join("chain_summary.json")).unwrap()).unwrap();
    assert_eq!(summary.n_households, 10);
    assert_eq!(summary.n_draws, 80);
    for f in [
        "market_response.txt",
        "hierarchical.txt",
        "intercept_diffs.txt",
    ] {
        let text = fs::read_to_string(out.join(f)).unwrap();
        assert!(
            text.lines().nth(1).unwrap().contains("Posterior Mean"),
            "{f}"
        );
    }
    let mut rdr = csv::Reader::from_path(out.join("decomposition.csv")).unwrap();
    assert_eq!(rdr.records().count(), 10 * 6);
    let diag: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["geweke"].as_array().unwrap().len(), 14);
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 8);
    assert_eq!(
        manifest["inputs"]["panel_sha256"].as_str().unwrap().len(),
        64
    );
    assert_eq!(
        fs::read_to_string(out.join("household_map.csv"))
            .unwrap()
            .lines()
            .count(),
        11
    );
}

#[test]
fn csv_format_and_report_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), 5, 6);
    let out = dir.path().join("est");
    let mut args = estimate_args(&s(&sim), &s(&out));
    args.extend(["--format".into(), "csv".into()]);
    assert!(run(&args).status.success());
    let csv = fs::read_to_string(out.join("market_response.csv")).unwrap();
    assert!(csv.starts_with("Parameter,Posterior Mean,S.D.,HPD,(+),(-)\n"));

    let o = hbprobit(&[
        "report",
        "--summary",
        &s(&out.join("chain_summary.json")),
        "--format",
        "csv",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let printed = String::from_utf8(o.stdout).unwrap();
    assert!(printed.starts_with(&csv));
    assert_eq!(printed.matches("Parameter,Posterior Mean").count(), 3);
}

#[test]
fn missing_price_column_is_a_validation_failure_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), 3, 4);
    let panel = fs::read_to_string(sim.join("panel.csv")).unwrap();
    let broken: String = panel
        .lines()
        .map(|l| {
            l.split(',')
                .enumerate()
                .filter(|(i, _)| *i != 5)
                .map(|(_, f)| f)
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(sim.join("panel.csv"), broken).unwrap();
    let out = dir.path().join("est");
    let o = run(&estimate_args(&s(&sim), &s(&out)));
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error[validation]: "), "{err}");
    assert!(err.contains("price_3"), "{err}");
    assert!(!out.exists());
}

#[test]
fn invalid_settings_exit_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), 3, 4);
    let out = dir.path().join("est");
    let mut args = estimate_args(&s(&sim), &s(&out));
    args.extend(["--format".into(), "xml".into()]);
    assert_eq!(run(&args).status.code(), Some(2));

    let mut args = estimate_args(&s(&sim), &s(&out));
    args.extend(["--burn".into(), "500".into()]);
    assert_eq!(run(&args).status.code(), Some(2));

    let o = Command::new(env!("CARGO_BIN_EXE_hbprobit"))
        .args(estimate_args(&s(&sim), &s(&out)))
        .env("HBPROBIT_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), 4, 5);
    let out = dir.path().join("est");
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        format!(
            "panel = \"{}\"\nattrs = \"{}\"\niters = 60\nburn = 20\nthin = 2\nseed = 3\n",
            s(&sim.join("panel.csv")),
            s(&sim.join("attributes.csv"))
        ),
    )
    .unwrap();
    let o = hbprobit(&[
        "estimate",
        "--config",
        &s(&config),
        "--out",
        &s(&out),
        "--seed",
        "11",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary =
        ChainSummary::read_from(fs::File::open(out.join("chain_summary.json")).unwrap()).unwrap();
    assert_eq!(summary.config.rng_seed, 11);
    assert_eq!(summary.n_draws, 20);

    fs::write(&config, "iterations = 60\n").unwrap();
    let o = hbprobit(&[
        "estimate",
        "--config",
        &s(&config),
        "--out",
        &s(&dir.path().join("x")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

fn perfect_summary(truth: &SyntheticTruth) -> ChainSummary {
    let mut chain = ChainDraws::new(truth.households.len(), &truth.attrs, McmcConfig::default());
    for _ in 0..20 {
        chain.push(&truth.households, &truth.population);
    }
    ChainSummary::from_chain(&chain, 0.95).unwrap()
}

#[test]
fn recover_passes_on_a_perfect_chain_and_fails_on_perturbed_truth() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), 12, 3);
    let truth = SyntheticTruth::read_from(fs::File::open(sim.join("truth.json")).unwrap()).unwrap();
    let summary_path = dir.path().join("summary.json");
    perfect_summary(&truth)
        .write_to(fs::File::create(&summary_path).unwrap())
        .unwrap();

    let out = dir.path().join("rec");
    let o = hbprobit(&[
        "recover",
        "--truth",
        &s(&sim.join("truth.json")),
        "--summary",
        &s(&summary_path),
        "--out",
        &s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.join("recovery.json").exists());

    let mut bad = truth.clone();
    bad.population.beta_mean[1] += 10.0;
    let bad_path = dir.path().join("bad_truth.json");
    bad.write_to(fs::File::create(&bad_path).unwrap()).unwrap();
    let o = hbprobit(&[
        "recover",
        "--truth",
        &s(&bad_path),
        "--summary",
        &s(&summary_path),
        "--out",
        &s(&dir.path().join("rec2")),
    ]);
    assert_eq!(o.status.code(), Some(4));
    let err = stderr(&o);
    assert!(err.starts_with("error[threshold]: "), "{err}");
    assert!(err.contains("mean Price"), "{err}");

    let o = hbprobit(&["recover", "--summary", &s(&summary_path), "--out", &s(&out)]);
    assert_eq!(o.status.code(), Some(2));
}
