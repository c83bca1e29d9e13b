use std::path::Path;
use std::process::Command;

use liebrob_cli::experiments::Report;
use liebrob_cli::{run, ExperimentConfig, HarnessError, RunOptions};

const CHAIN: &str = r#"
kind = "verify"
seed = 11
samples = 40
deltas = [1.0, 0.5]

[ensemble]
coupling = 1.0
geometry = { kind = "chain", n = 4 }
time_model = { kind = "brownian", xi = 0.1 }

[evolution]
mode = "brickwall"
xi = 0.1
rounds = 10

[probe]
source = 0

[sweep]
r = [1, 2, 3]

[verify]
system = "NN1dBrownianOTOC"
"#;

fn parse(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(text).unwrap()
}

fn invalid_messages(cfg: &ExperimentConfig) -> Vec<String> {
    match cfg.validate() {
        Err(HarnessError::Invalid(v)) => v,
        other => panic!("expected validation errors, got {other:?}"),
    }
}

fn run_in(cfg: &ExperimentConfig, dir: &Path) -> liebrob_cli::RunOutcome {
    run(
        cfg,
        &RunOptions {
            output_dir: Some(dir.to_path_buf()),
            ..Default::default()
        },
    )
    .unwrap()
}

fn csv_body(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn empty_axis_is_named() {
    let cfg = parse(&CHAIN.replace("r = [1, 2, 3]", "r = []"));
    let errs = invalid_messages(&cfg);
    assert!(errs.iter().any(|e| e.contains("sweep axis `r` is empty")), "{errs:?}");
}

#[test]
fn unknown_key_is_rejected() {
    let err = ExperimentConfig::from_toml(&CHAIN.replace("source = 0", "source = 0\nsorce = 1")).unwrap_err();
    assert!(err.to_string().contains("sorce"), "{err}");
    let err = ExperimentConfig::from_toml(&format!("{CHAIN}\ncolour = 3\n")).unwrap_err();
    assert!(err.to_string().contains("colour"), "{err}");
}

#[test]
fn every_problem_is_listed() {
    let text = CHAIN
        .replace("seed = 11\n", "")
        .replace("deltas = [1.0, 0.5]", "deltas = [1.5]")
        .replace("r = [1, 2, 3]", "r = [1, 9]");
    let errs = invalid_messages(&parse(&text));
    assert!(errs.iter().any(|e| e.contains("seed")), "{errs:?}");
    assert!(errs.iter().any(|e| e.contains("1.5")), "{errs:?}");
    assert!(
        errs.iter()
            .any(|e| e.contains("sweep point 1") && e.contains("distance 9")),
        "{errs:?}"
    );
}

#[test]
fn resource_cap_names_the_sweep_point() {
    let text = CHAIN.replace("r = [1, 2, 3]", "r = [1]\nn = [4, 20]");
    let errs = invalid_messages(&parse(&text));
    assert!(
        errs.iter()
            .any(|e| e.starts_with("sweep point 1 (n=20") && e.contains("resource")),
        "{errs:?}"
    );
    assert!(!errs.iter().any(|e| e.starts_with("sweep point 0")), "{errs:?}");
}

#[test]
fn mismatched_observable_names_both() {
    let text = CHAIN.replace("source = 0", "source = 0\nobservable = \"half_spectral\"");
    let errs = invalid_messages(&parse(&text));
    assert!(
        errs.iter().any(|e| e.contains("NN1dBrownianOTOC")
            && e.contains("half_spectral")
            && e.contains("projected_half_norm")),
        "{errs:?}"
    );
    let text = CHAIN.replace("\"NN1dBrownianOTOC\"", "\"KLocalStaticOTOC\"");
    let errs = invalid_messages(&parse(&text));
    assert!(
        errs.iter()
            .any(|e| e.contains("KLocalStaticOTOC") && e.contains("Chain")),
        "{errs:?}"
    );
}

#[test]
fn delta_one_passes_trivially() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        &parse(&CHAIN.replace("deltas = [1.0, 0.5]", "deltas = [1.0]")),
        dir.path(),
    );
    let Report::Verify(rep) = out.report else { panic!() };
    assert!(rep
        .rows
        .iter()
        .all(|r| r.pass && r.epsilon.is_finite() && r.frequency <= 1.0));
    assert!(out.pass);
}

#[test]
fn zero_coupling_passes() {
    let text = CHAIN
        .replace("coupling = 1.0", "coupling = 0.0")
        .replace("samples = 40", "samples = 60")
        .replace(
            "system = \"NN1dBrownianOTOC\"",
            "system = \"NN1dBrownianOTOC\"\nbound_coupling = 0.05",
        );
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(&parse(&text), dir.path());
    let Report::Verify(rep) = out.report else { panic!() };
    for r in &rep.rows {
        assert_eq!(r.exceedances, 0);
        assert!(r.epsilon > 0.0);
        assert!(r.pass, "{r:?}");
    }
    // Without a bound coupling the zero-coupling bound is undefined.
    let errs = invalid_messages(&parse(&text.replace("bound_coupling = 0.05", "")));
    assert!(errs.iter().any(|e| e.contains("bound_coupling")), "{errs:?}");
}

#[test]
fn reruns_are_byte_identical_and_worker_invariant() {
    let cfg = parse(CHAIN);
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    run_in(&cfg, dirs[0].path());
    run_in(&cfg, dirs[1].path());
    rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap()
        .install(|| run_in(&cfg, dirs[2].path()));
    for name in ["samples.csv", "verification.csv"] {
        let a = csv_body(dirs[0].path(), name);
        assert!(a.starts_with(b"# liebrob-schema v1\n"));
        assert_eq!(a, csv_body(dirs[1].path(), name), "{name}");
        assert_eq!(a, csv_body(dirs[2].path(), name), "{name}");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&csv_body(dirs[0].path(), "manifest.json")).unwrap();
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert!(manifest["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(manifest["config"]["kind"], "verify");
}

#[test]
fn seed_override_changes_samples() {
    let cfg = parse(CHAIN);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_in(&cfg, a.path());
    run(
        &cfg,
        &RunOptions {
            seed: Some(12),
            output_dir: Some(b.path().to_path_buf()),
        },
    )
    .unwrap();
    assert_ne!(csv_body(a.path(), "samples.csv"), csv_body(b.path(), "samples.csv"));
}

#[test]
fn simulate_writes_quantiles_and_curves() {
    let text = CHAIN
        .replace("kind = \"verify\"", "kind = \"simulate\"")
        .replace("deltas = [1.0, 0.5]", "quantile_levels = [0.5, 0.9]")
        .replace("[verify]\nsystem = \"NN1dBrownianOTOC\"\n", "");
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(&parse(&text), dir.path());
    assert!(out.files.iter().any(|f| f == "quantiles.csv"));
    let dat = std::fs::read_to_string(dir.path().join("quantile_g0_projected_half_norm_q0p9.dat")).unwrap();
    assert_eq!(dat.lines().filter(|l| !l.starts_with('#')).count(), 3);
    let Report::Simulate(rep) = out.report else { panic!() };
    // Commutators with distant probes shrink on average.
    let m: Vec<f64> = rep.points.iter().map(|p| p.means["frobenius_otoc"]).collect();
    assert!(m[0] > m[2], "{m:?}");
}

#[test]
fn bound_and_paths_runs() {
    let bound = r#"
kind = "bound"
seed = 1
deltas = [0.1, 0.001]
[bound]
system = "PowerLawBrownianOTOC"
alpha = 2.5
time = 0.5
[sweep]
r = [2, 4, 8, 16]
"#;
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(&parse(bound), dir.path());
    let csv = std::fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 8);
    assert!(csv.lines().nth(1).unwrap().contains("vacuous"));
    assert!(out.files.iter().any(|f| f == "powerlaw_constants.json"));
    assert!(dir.path().join("epsilon_delta0p1.dat").exists());

    let paths = r#"
kind = "paths"
seed = 1
[ensemble]
coupling = 1.0
geometry = { kind = "grid", dims = [3, 3] }
[paths]
source = [0]
target = [8]
l_max = 6
materialize = true
"#;
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(&parse(paths), dir.path());
    let Report::Paths(rep) = out.report else { panic!() };
    assert_eq!(rep.points[0].counts_by_length.get(&4), Some(&6));
    assert_eq!(rep.points[0].delta_divergences, Some(0));
    assert!(dir.path().join("paths_p0.txt").exists());
}

#[test]
fn inapplicable_axis_is_rejected() {
    let text = r#"
kind = "martingale"
seed = 1
[martingale]
dim = 4
n_terms = 10
demo_samples = 200
[sweep]
r = [1]
"#;
    let errs = invalid_messages(&parse(text));
    assert!(
        errs.iter().any(|e| e.contains("`r` does not apply to martingale")),
        "{errs:?}"
    );
}

#[test]
fn martingale_run_passes() {
    let text = r#"
kind = "martingale"
seed = 3
[martingale]
dim = 4
n_terms = 20
term_bound = 0.5
demo_samples = 500
smoothness_instances = 20
"#;
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(&parse(text), dir.path());
    assert!(out.pass);
    assert!(dir.path().join("smoothness.csv").exists());
    assert!(dir.path().join("tail_spectral_bound.dat").exists());
}

fn bin(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_liebrob")).args(args).output().unwrap()
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, CHAIN).unwrap();
    let out = dir.path().join("out");
    let ok = bin(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--workers",
        "2",
    ]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("PASS"));

    let wrong_kind = bin(&[
        "bound",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(wrong_kind.status.code(), Some(1));

    std::fs::write(&cfg, CHAIN.replace("r = [1, 2, 3]", "r = []")).unwrap();
    let bad = bin(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("sweep axis `r` is empty"));

    assert_eq!(bin(&["--help"]).status.code(), Some(0));
    assert_eq!(bin(&["frobnicate"]).status.code(), Some(1));
}
