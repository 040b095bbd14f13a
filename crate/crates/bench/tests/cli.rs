use std::path::{Path, PathBuf};
use std::process::Command;

const MODEL: &str = "window_frames = 3\nn_feature_layers = 1\nchannels = [2, 3, 3, 2]\ntime_kernel = 2\n";

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn spider(step: &str, config: &Path, seed: u64, out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_spider"))
        .args([step, "--config", config.to_str().unwrap(), "--seed", &seed.to_string(), "--out-dir", out.to_str().unwrap()])
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn run(step: &str, config: &Path, seed: u64, out: &Path) {
    let o = spider(step, config, seed, out);
    assert!(o.status.success(), "{step} failed: {}", String::from_utf8_lossy(&o.stderr));
}

/// Runs every subcommand into `dir` and returns the output directory.
fn pipeline(dir: &Path, seed: u64) -> PathBuf {
    let out = dir.join("out");
    let data = "[data]\nseries = \"out/series.toml\"\ntrain_days = 2\ntest_days = 1\n";
    write(&dir.join("synth.toml"), "days = 3\ndelta_minutes = 120\nseed = 0\nbase_level = 4.0\npeak_amplitude = 120.0\nn_hotspots = 2\nnoise_std = 1.0\nweekend_scale = 0.6\n[geometry]\nrows = 6\ncols = 6\n");
    write(&dir.join("mtrnet.toml"), &format!("{data}[model]\n{MODEL}[hyper]\nepochs = 2\nbatch_size = 4\nlearning_rate = 1e-3\nsamples_per_epoch = 8\n"));
    write(&dir.join("gain.toml"), &format!("reconstructor = \"knn\"\nrates = [0.2, 0.35, 0.5]\nmasks = 4\n{data}"));
    write(&dir.join("agent.toml"), &format!("mtrnet = \"out/mtrnet\"\nthreshold = \"out/threshold.toml\"\n{data}[agent]\nk = 4\nprev_actions_len = 4\n"));
    write(&dir.join("policy.toml"), &format!("dataset = \"out/selections.jsonl\"\n[policy.net]\n{MODEL}[hyper]\nepochs = 2\nbatch_size = 4\n"));
    write(&dir.join("evaluate.toml"), &format!("mtrnet = \"out/mtrnet\"\npolicy = \"out/policy\"\nthreshold = \"out/threshold.toml\"\nepisodes = \"out/episodes.jsonl\"\n{data}"));
    write(&dir.join("report.toml"), "reports = [\"out/report.csv\"]\n");
    for (step, cfg) in [
        ("synth", "synth.toml"),
        ("train-mtrnet", "mtrnet.toml"),
        ("gain-curve", "gain.toml"),
        ("train-agent", "agent.toml"),
        ("train-policy", "policy.toml"),
        ("evaluate", "evaluate.toml"),
        ("report", "report.toml"),
    ] {
        run(step, &dir.join(cfg), seed, &out);
    }
    out
}

fn files_with(dir: &Path, ext: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|e| e == ext)).collect();
    v.sort();
    v
}

#[test]
fn same_seed_gives_identical_artifacts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (oa, ob) = (pipeline(a.path(), 11), pipeline(b.path(), 11));
    let csvs = files_with(&oa, "csv");
    let names: Vec<_> = csvs.iter().map(|p| p.file_name().unwrap().to_owned()).collect();
    for expected in ["report.csv", "gain_curve.csv", "mtrnet_history.csv", "agent_history.csv", "policy_history.csv", "cells_over_time.csv", "frequency_peak.csv"] {
        assert!(names.iter().any(|n| n == expected), "missing {expected}");
    }
    for p in &csvs {
        let other = ob.join(p.file_name().unwrap());
        assert_eq!(std::fs::read(p).unwrap(), std::fs::read(&other).unwrap(), "{} differs", p.display());
    }
    for name in ["threshold.toml", "budget_random.toml", "budget_historical.toml", "report.md", "episodes.jsonl", "selections.jsonl"] {
        assert_eq!(std::fs::read(oa.join(name)).unwrap(), std::fs::read(ob.join(name)).unwrap(), "{name} differs");
    }
    let report = std::fs::read_to_string(oa.join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 6 * 3);
    assert!(std::fs::read_to_string(oa.join("cells_over_time.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn missing_artifacts_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("evaluate.toml");
    write(&cfg, "mtrnet = \"nowhere/mtrnet\"\npolicy = \"nowhere/policy\"\nepsilon = 0.1\n[data]\nseries = \"nowhere/series.toml\"\ntrain_days = 1\ntest_days = 1\n");
    let o = spider("evaluate", &cfg, 0, &dir.path().join("out"));
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    for p in ["nowhere/series.toml", "nowhere/mtrnet", "nowhere/policy"] {
        assert!(err.contains(p), "{p} not reported in: {err}");
    }
}
