use std::fs;
use std::process::Command;

use mdma_core::harness::{write_run_outputs, ExperimentConfig, Scheme, OUT_DIR_ENV};
use mdma_core::{run_drop, sweep, AccessMode};

fn small_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::from_toml_str(
        r#"
        seeds = [3, 4]
        ue_counts = [15]
        [params]
        num_ues = 15
        "#,
    )
    .unwrap();
    c.ue_counts = vec![c.params.num_ues];
    c
}

#[test]
fn config_fills_defaults_and_rejects_unknown_fields() {
    let c = small_config();
    assert_eq!(c.params.num_subchannels, 12);
    assert_eq!(c.schemes, Scheme::ALL.to_vec());
    assert!(ExperimentConfig::from_toml_str("[params]\nnum_uses = 3").is_err());
    assert!(ExperimentConfig::from_toml_str("bogus = 1").is_err());
}

#[test]
fn drops_are_deterministic() {
    let c = small_config();
    for scheme in Scheme::ALL {
        let a = run_drop(&c, 3, scheme).unwrap();
        let b = run_drop(&c, 3, scheme).unwrap();
        assert_eq!(a, b, "{scheme}");
    }
}

#[test]
fn sweep_matches_single_drops() {
    let c = small_config();
    let out = sweep(&c).unwrap();
    assert_eq!(out.rows.len(), 3);
    for d in &out.drops {
        let again = run_drop(&c, d.summary.seed, d.summary.scheme).unwrap();
        assert_eq!(&again, d);
    }
}

#[test]
fn oma_only_pays_no_cost() {
    let c = small_config();
    let d = run_drop(&c, 4, Scheme::OmaOnly).unwrap();
    assert_eq!(d.records.len(), 15);
    for r in &d.records {
        assert_eq!(r.mode, AccessMode::Oma);
        assert_eq!(r.cost, 0.0);
    }
}

#[test]
fn aggregates_agree_with_records() {
    let c = small_config();
    for scheme in Scheme::ALL {
        let d = run_drop(&c, 3, scheme).unwrap();
        let n = d.records.len() as f64;
        let mean_u = d.records.iter().map(|r| r.utility).sum::<f64>() / n;
        let mean_c = d.records.iter().map(|r| r.cost).sum::<f64>() / n;
        let power: f64 = d.records.iter().map(|r| r.power).sum();
        assert!((d.summary.mean_utility - mean_u).abs() < 1e-12);
        assert!((d.summary.mean_cost - mean_c).abs() < 1e-12);
        assert!((d.summary.total_power - power).abs() < 1e-12);
        assert!(d.summary.total_power <= c.params.max_bs_power * (1.0 + 1e-9));
        for r in &d.records {
            assert!((r.cost - r.cost_pd - r.cost_sd).abs() < 1e-12);
        }
    }
}

#[test]
fn run_outputs_have_expected_shape() {
    let c = small_config();
    let drops: Vec<_> = Scheme::ALL.iter().map(|&s| run_drop(&c, 3, s).unwrap()).collect();
    let dir = tempfile::tempdir().unwrap();
    write_run_outputs(dir.path(), &c, &drops).unwrap();
    let cdf = fs::read_to_string(dir.path().join("cdf_utility_mdma.csv")).unwrap();
    assert_eq!(cdf.lines().next(), Some("value,cdf"));
    let records = fs::read_to_string(dir.path().join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 1 + 3 * 15);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert!(summary.is_object());
}

#[test]
fn cli_run_and_sweep_honour_output_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, "seeds = [1]\n[params]\nnum_ues = 15\n").unwrap();
    let bin = env!("CARGO_BIN_EXE_mdma");

    let out = dir.path().join("env_out");
    let status = Command::new(bin)
        .args(["run", "--config", cfg.to_str().unwrap(), "--seed", "2", "--scheme", "mdma"])
        .env(OUT_DIR_ENV, &out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("cdf_cost_mdma.csv").exists());
    assert!(!out.join("cdf_cost_oma_only.csv").exists());

    let explicit = dir.path().join("explicit");
    let status = Command::new(bin)
        .args(["sweep", "--config", cfg.to_str().unwrap(), "--ue-counts", "15,16", "--seeds", "2", "--out", explicit.to_str().unwrap()])
        .env(OUT_DIR_ENV, &out)
        .status()
        .unwrap();
    assert!(status.success());
    let table = fs::read_to_string(explicit.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 2 * 3);
    assert!(explicit.join("cdf_utility_forced_hybrid_k16.csv").exists());
}

#[test]
fn cli_fails_on_infeasible_setup() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    // fewer UEs than subchannels cannot be grouped
    fs::write(&cfg, "[params]\nnum_ues = 8\n").unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_mdma"))
        .args(["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()])
        .status()
        .unwrap();
    assert!(!status.success());
}
