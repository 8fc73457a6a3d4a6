use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: [&str; 6] =
    ["--override", "reservoir.grid_side=5", "--override", "task.test_len=150", "--override", "learner.epochs_per_node=2"];

fn boolrc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boolrc")).args(args).output().expect("binary runs")
}

fn run_small(kind: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", kind, "--out", out.to_str().unwrap()];
    args.extend(SMALL);
    args.extend(extra);
    boolrc(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(files(&p));
        } else {
            out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
        }
    }
    out.sort();
    out
}

#[test]
fn generate_writes_dataset_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let o = boolrc(&["generate", "--out", d.to_str().unwrap(), "--override", "task.test_len=100"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert!(a.join("dataset.csv").is_file());
    assert_eq!(json(&a.join("dataset.json"))["csv_sha256"], json(&b.join("dataset.json"))["csv_sha256"]);
    assert_eq!(json(&a.join("dataset.json"))["length"], 300);
}

#[test]
fn missing_config_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = boolrc(&["generate", "--config", "/no/such/run.toml", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("config not found"));

    let o = boolrc(&["run", "sideways", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let o = run_small("ensemble", tmp.path(), &["--override", "learner.speed=3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(boolrc(&["--help"]).status.success());
}

#[test]
fn config_file_and_seed_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "seed = 5\n[reservoir]\ngrid_side = 4\n[task]\ntest_len = 100\n[experiment]\nminimizers = 2\n").unwrap();
    let out = tmp.path().join("r");
    let o = boolrc(&["run", "ensemble", "--config", cfg.to_str().unwrap(), "--seed", "9", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["master_seed"], 9);
    assert_eq!(m["nodes"], 16);
    assert_eq!(m["traces"].as_array().unwrap().len(), 2);
}

#[test]
fn fig2_preset_writes_twenty_traces() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_small("ensemble", tmp.path(), &["--config", "preset:fig2-greedy"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_dir(tmp.path().join("traces")).unwrap().count(), 20);
    let s = json(&tmp.path().join("summary.json"));
    assert_eq!(s["learning"]["minima"]["distances"].as_array().unwrap().len(), 190);
}

#[test]
fn noise_free_master_slave_never_diverges() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_small("master-slave", tmp.path(), &["--override", "noise.sigma_out=0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(tmp.path().join("hamming.csv")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.ends_with(",0")));
}

#[test]
fn stale_states_cache_is_refused_with_hash_diff() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = tmp.path().join("states.bin");
    let c = cache.to_str().unwrap();
    let first = run_small("ensemble", &tmp.path().join("a"), &["--states-cache", c]);
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(cache.is_file());
    let reuse = run_small("ensemble", &tmp.path().join("b"), &["--states-cache", c]);
    assert!(reuse.status.success(), "{}", stderr(&reuse));
    assert_eq!(files(&tmp.path().join("a")), files(&tmp.path().join("b")));

    let stale = run_small("ensemble", &tmp.path().join("c"), &["--states-cache", c, "--override", "reservoir.gamma=0.7"]);
    assert_eq!(stale.status.code(), Some(2));
    let err = stderr(&stale);
    assert!(err.contains("cache params hash") && err.contains("run params hash"), "{err}");
}

#[test]
fn runs_are_byte_reproducible_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run_small("master-slave", &a, &[]).status.success());
    let mut args = vec!["--threads", "1", "run", "master-slave", "--out", b.to_str().unwrap()];
    args.extend(SMALL);
    assert!(boolrc(&args).status.success());
    assert_eq!(files(&a), files(&b));
}

#[test]
fn analyze_recomputes_summary_and_plots() {
    let tmp = tempfile::tempdir().unwrap();
    let ms = tmp.path().join("ms");
    assert!(run_small("master-slave", &ms, &[]).status.success());
    let before = fs::read(ms.join("summary.json")).unwrap();
    fs::remove_dir_all(ms.join("plots")).unwrap();
    let o = boolrc(&["analyze", ms.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(ms.join("summary.json")).unwrap(), before);
    let s = json(&ms.join("summary.json"));
    assert!(s["divergence"]["fit"]["params"]["c_tilde"].is_number());
    let plot = fs::read_to_string(ms.join("plots/hamming_vs_epoch.csv")).unwrap();
    assert!(plot.starts_with("k,h_mean,h_predicted"));

    let ens = tmp.path().join("ens");
    assert!(run_small("ensemble", &ens, &["--override", "experiment.minimizers=4"]).status.success());
    let out = tmp.path().join("ens-analysis");
    assert!(boolrc(&["analyze", ens.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());
    let s = json(&out.join("summary.json"));
    assert!(s["learning"]["exponential"]["rate"].is_number());
    assert!(out.join("plots/minima_distances.csv").is_file());
}

#[test]
fn analyze_rejects_incomplete_or_tampered_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = boolrc(&["analyze", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let run = tmp.path().join("r");
    assert!(run_small("separated-pair", &run, &[]).status.success());
    fs::remove_file(run.join("hamming.csv")).unwrap();
    let o = boolrc(&["analyze", run.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("hamming.csv"));
}

#[test]
fn report_renders_markdown_and_svg() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("ip");
    let o = run_small("inverted-paths", &run, &["--override", "noise.sigma_out=0.02"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = boolrc(&["report", run.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let md = fs::read_to_string(run.join("report.md")).unwrap();
    assert!(md.contains("## Inverted paths"));
    let svg = fs::read_to_string(run.join("plots/gradient_pairs.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}
