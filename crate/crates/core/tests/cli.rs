use std::path::Path;
use std::process::{Command, Output};

use cellfree_core::harness::ExperimentConfig;

fn cellfree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cellfree")).args(args).output().unwrap()
}

fn tiny_config(dir: &Path) -> String {
    let cfg = ExperimentConfig {
        num_drops: 2,
        ensemble_size: 50,
        alpha_grid: vec![0.0, 1.0, 2.0],
        ue_counts: vec![3, 5],
        ..ExperimentConfig::desk_scale(4)
    };
    let path = dir.join("tiny.toml");
    std::fs::write(&path, toml::to_string(&cfg).unwrap()).unwrap();
    path.to_str().unwrap().to_owned()
}

fn run_into(sub: &str, config: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--config", config, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    cellfree(&args)
}

#[test]
fn default_config_parses_back() {
    let out = cellfree(&["default-config"]);
    assert!(out.status.success());
    let cfg = ExperimentConfig::from_toml_str(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(cfg, ExperimentConfig::desk_scale(10));
}

#[test]
fn convergence_outputs_are_reproducible_and_seeded() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tiny_config(tmp.path());
    let read = |name: &str, run: &str| std::fs::read(tmp.path().join(run).join(name)).unwrap();
    for (run, seed) in [("a", "3"), ("b", "3"), ("c", "4")] {
        let out = run_into("convergence", &config, &tmp.path().join(run), &["--seed", seed]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["convergence.csv", "game_trace.csv", "certificates.json", "layout.json", "assignment.json"] {
        assert_eq!(read(name, "a"), read(name, "b"), "{name}");
    }
    assert_ne!(read("layout.json", "a"), read("layout.json", "c"));
    let header = String::from_utf8(read("convergence.csv", "a")).unwrap();
    assert!(header.starts_with("alpha,iteration,total_power_mW,u,accepted_updates,messages\n"));
}

#[test]
fn metrics_vs_k_writes_json_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tiny_config(tmp.path());
    let out_dir = tmp.path().join("m");
    let out = run_into("metrics-vs-k", &config, &out_dir, &["--format", "json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(out_dir.join("metrics_vs_k.json")).unwrap();
    let rows: serde_json::Value = serde_json::from_str(&text).unwrap();
    // 3 alphas plus the baseline, for each of 2 UE counts
    assert_eq!(rows.as_array().unwrap().len(), 8);
}

#[test]
fn bad_inputs_exit_with_status_one() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("none.toml");
    let out = cellfree(&["tradeoff", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "alpha_grid = [3.0]\n[layout]\nnum_aps = 4\nantennas_per_ap = 1\nnum_ues = 3\n").unwrap();
    let out = cellfree(&["tradeoff", "--config", bad.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));
}
