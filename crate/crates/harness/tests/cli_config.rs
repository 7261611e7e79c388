use std::fs;
use std::path::Path;
use std::process::Command;

use spikewin::config::ActivationSpec;
use spikewin::{load_config, run_suite, save_config, ConfigError, ExperimentConfig, Suite};

fn configs_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"))
}

const SMALL: &str = r#"
schema_version = 1
name = "small"
[network]
sources = [{ rate = 1.5 }]
[run]
seed = 9
horizon = 300.0
replications = 50
[couple]
levels = [2]
blocks = 1000
[chain]
q = [4]
"#;

#[test]
fn shipped_configs_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = load_config(&path).unwrap();
        let copy = dir.path().join("copy.toml");
        save_config(&cfg, &copy).unwrap();
        let back = load_config(&copy).unwrap();
        assert_eq!(back, cfg, "{}", path.display());
        assert_eq!(back.hash(), cfg.hash());
    }
}

#[test]
fn shot_noise_section_parses() {
    let cfg = load_config(&configs_dir().join("shotnoise.toml")).unwrap();
    let s = cfg.analytic.shot_noise.expect("shot noise section");
    assert_eq!(s.gamma, ActivationSpec::Constant { value: 1.2 });
}

#[test]
fn hash_tracks_the_effective_config() {
    let a = ExperimentConfig::from_toml(SMALL).unwrap();
    // Writing a default out explicitly leaves the hash alone.
    let b = ExperimentConfig::from_toml(&SMALL.replace("horizon = 300.0", "horizon = 300.0\nbins = 20")).unwrap();
    assert_eq!(a.hash(), b.hash());
    let c = ExperimentConfig::from_toml(&SMALL.replace("seed = 9", "seed = 10")).unwrap();
    assert_ne!(a.hash(), c.hash());
    assert_eq!(a.hash().len(), 64);
}

#[test]
fn invalid_configs_name_the_field() {
    let cases = [
        (SMALL.replace("rate = 1.5", "rate = -1.0"), "network"),
        (SMALL.replace("horizon = 300.0", "horizon = 300.0\nburn_in = 400.0"), "run.burn_in"),
        (SMALL.replace("levels = [2]", "levels = [0]"), "couple"),
        (SMALL.replace("q = [4]", "q = [0]"), "chain.q"),
        (SMALL.replace("[chain]", "[analytic]\nstep = 0.5\n[chain]"), "analytic"),
    ];
    for (text, field) in cases {
        match ExperimentConfig::from_toml(&text) {
            Err(ConfigError::Invalid { field: f, .. }) => assert_eq!(f, field),
            other => panic!("{field}: {other:?}"),
        }
    }
    assert!(matches!(ExperimentConfig::from_toml(&SMALL.replace("[run]", "[run]\nsede = 1")), Err(ConfigError::Parse(_))));
}

#[test]
fn coarse_grid_is_rejected_with_a_remedy() {
    let err = ExperimentConfig::from_toml(&SMALL.replace("q = [4]", "q = [4, 1]")).unwrap_err();
    match &err {
        ConfigError::StepPrecondition { field, q, min_q, .. } => {
            assert_eq!(field, "chain.q[1]");
            assert_eq!((*q, *min_q), (1, 2));
        }
        other => panic!("{other:?}"),
    }
    assert!(err.to_string().contains("h*rate <= 1"));
}

#[test]
fn oversized_chain_reports_the_cap() {
    let cfg = ExperimentConfig::from_toml(&SMALL.replace("q = [4]", "q = [12]\nstate_cap = 1000")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let err = run_suite(&cfg, Suite::Chain, dir.path()).unwrap_err();
    assert!(format!("{err:#}").contains("1000"), "{err:#}");
}

#[test]
fn every_artifact_carries_provenance() {
    let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let summary = run_suite(&cfg, Suite::Verify, dir.path()).unwrap();
    assert!(summary.passed, "{}", summary.table());
    assert_eq!(summary.config_hash, cfg.hash());
    for name in &summary.artifacts {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        if name == "summary.json" {
            let v: serde_json::Value = serde_json::from_str(&text).unwrap();
            assert_eq!(v["config_hash"], cfg.hash());
            assert_eq!(v["seed"], 9);
        } else {
            assert!(text.starts_with("# spikewin verify\n"), "{name}");
            assert!(text.contains(&format!("# config_hash: {}\n# seed: 9\n", cfg.hash())), "{name}");
        }
    }
    for expected in ["events.tsv", "components.tsv", "density_1.tsv", "merge.tsv", "chain_q4_stationary.tsv"] {
        assert!(summary.artifacts.iter().any(|a| a == expected), "missing {expected}");
    }
}

fn spikewin(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_spikewin")).args(args).output().unwrap()
}

#[test]
fn cli_exit_codes_and_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("small.toml");
    fs::write(&cfg_path, SMALL).unwrap();
    let out_dir = dir.path().join("out");
    let (cfg, out) = (cfg_path.to_str().unwrap(), out_dir.to_str().unwrap());

    let ok = spikewin(&["chain", "--config", cfg, "--out", out, "--seed", "4"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let stdout = String::from_utf8_lossy(&ok.stdout);
    assert!(stdout.contains("effective configuration") && stdout.contains("seed = 4"));
    assert!(stdout.contains("PASS"));
    let header = fs::read_to_string(out_dir.join("chain/chain_q4_states.tsv")).unwrap();
    assert!(header.contains("# seed: 4\n"));

    let quiet = spikewin(&["couple", "--config", cfg, "--out", out, "--quiet"]);
    assert_eq!(quiet.status.code(), Some(0));
    assert!(quiet.stdout.is_empty());

    fs::write(&cfg_path, SMALL.replace("q = [4]", "q = [1]")).unwrap();
    let bad = spikewin(&["chain", "--config", cfg, "--out", out]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("q >= 2"));

    let missing = spikewin(&["verify", "--config", "/nonexistent.toml"]);
    assert_eq!(missing.status.code(), Some(2));
}
