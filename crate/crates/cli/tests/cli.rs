//! End-to-end runs of the `tenmtl` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tenmtl::baselines::{fit_local, DEFAULT_RIDGE};
use tenmtl::metrics::rmse;
use tenmtl::simgen::ScenarioConfig;
use tenmtl::tenmtl::predict_task;
use tenmtl::Family;
use tenmtl_cli::io::read_dataset;
use tempfile::TempDir;

fn tenmtl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tenmtl")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = tenmtl(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_config(dir: &Path, name: &str, cfg: &impl serde::Serialize) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn simulate(dir: &Path, cfg: &ScenarioConfig, name: &str) -> PathBuf {
    let c = write_config(dir, &format!("{name}.json"), cfg);
    let out = dir.join(name);
    ok(&["simulate", "--config", p(&c), "--out", p(&out)]);
    out
}

fn read_tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push((path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

fn metrics(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap()
}

fn task_values(m: &serde_json::Value, split: &str) -> Vec<f64> {
    m["tasks"].as_array().unwrap().iter().map(|t| t[split].as_f64().unwrap()).collect()
}

#[test]
fn simulate_writes_one_directory_per_task() {
    let tmp = TempDir::new().unwrap();
    let data = simulate(tmp.path(), &ScenarioConfig::scenario1(0.0, 0.5, 0.4, 3), "s1");
    let tasks: Vec<_> = fs::read_dir(&data)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_dir())
        .collect();
    assert_eq!(tasks.len(), 15);
    for t in &tasks {
        let y = fs::read_to_string(t.join("y.csv")).unwrap();
        // header plus 30 train and 30 test rows
        assert_eq!(y.lines().count(), 61, "{}", t.display());
    }
}

#[test]
fn simulate_is_byte_deterministic() {
    let tmp = TempDir::new().unwrap();
    let cfg = ScenarioConfig::scenario3(0.5, 0.4, 8);
    let a = simulate(tmp.path(), &cfg, "a");
    let b = simulate(tmp.path(), &cfg, "b");
    assert_eq!(read_tree(&a), read_tree(&b));
}

#[test]
fn malformed_config_exits_2_without_output() {
    let tmp = TempDir::new().unwrap();
    let c = tmp.path().join("bad.json");
    fs::write(&c, r#"{"scenario": "I", "n_tasks": "many"}"#).unwrap();
    let out_dir = tmp.path().join("out");
    let out = tenmtl(&["simulate", "--config", p(&c), "--out", p(&out_dir)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists());
}

#[test]
fn missing_dataset_exits_3() {
    let tmp = TempDir::new().unwrap();
    let out = tenmtl(&[
        "fit", "--data", p(&tmp.path().join("nope")), "--method", "local", "--out", p(&tmp.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn tune_rejects_more_folds_than_samples() {
    let tmp = TempDir::new().unwrap();
    let data = simulate(tmp.path(), &ScenarioConfig::scenario3(0.5, 0.4, 1), "d");
    let report = tmp.path().join("cv.json");
    let out = tenmtl(&["tune", "--data", p(&data), "--out", p(&report), "--folds", "31"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("31 folds requested"));
    assert!(!report.exists());
}

#[test]
fn tune_with_single_tuple_selects_it_and_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let data = simulate(tmp.path(), &ScenarioConfig::scenario3(0.5, 0.4, 2), "d");
    let run = |name: &str| {
        let report = tmp.path().join(name);
        ok(&[
            "tune", "--data", p(&data), "--out", p(&report), "--task-ranks", "3", "--feature-ranks", "2",
            "--lambdas", "0.01",
        ]);
        fs::read(report).unwrap()
    };
    let a = run("a.json");
    assert_eq!(a, run("b.json"));
    let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["selected"], 0);
    let t = &v["tuples"][0];
    assert_eq!(t["tensor_ranks"], serde_json::json!([3, 2, 2]));
    assert_eq!(t["lambda"], 0.01);
}

#[test]
fn full_rank_lr_tucker_matches_local() {
    let tmp = TempDir::new().unwrap();
    let data = simulate(tmp.path(), &ScenarioConfig::scenario3(0.5, 0.4, 4), "d");
    let local = tmp.path().join("local");
    let lrt = tmp.path().join("lrt");
    ok(&["fit", "--data", p(&data), "--method", "local", "--out", p(&local)]);
    ok(&["fit", "--data", p(&data), "--method", "lr-tucker", "--ranks", "10,4,5", "--out", p(&lrt)]);
    let (a, b) = (metrics(&local), metrics(&lrt));
    for split in ["train", "test"] {
        for (x, y) in task_values(&a, split).iter().zip(task_values(&b, split)) {
            assert!((x - y).abs() <= 1e-8, "{split}: {x} vs {y}");
        }
    }
}

#[test]
fn local_fit_matches_library() {
    let tmp = TempDir::new().unwrap();
    let data = simulate(tmp.path(), &ScenarioConfig::scenario1(0.2, 0.5, 0.4, 6), "d");
    let out = tmp.path().join("local");
    ok(&["fit", "--data", p(&data), "--method", "local", "--out", p(&out)]);
    let ds = read_dataset(&data).unwrap();
    let models = fit_local(&ds.train, Family::Gaussian, DEFAULT_RIDGE).unwrap();
    let m = metrics(&out);
    for ((model, test), cli) in models.iter().zip(&ds.test).zip(task_values(&m, "test")) {
        let r = rmse(&predict_task(model, test, Family::Gaussian).unwrap(), &test.y).unwrap();
        assert!((r - cli).abs() <= 1e-12, "{r} vs {cli}");
    }
}

#[test]
fn noiseless_fit_at_true_ranks_is_exact() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = ScenarioConfig::scenario3(0.5, 0.4, 5);
    cfg.sigma_e = 0.0;
    let data = simulate(tmp.path(), &cfg, "d");
    let run = |name: &str| {
        let out = tmp.path().join(name);
        ok(&["fit", "--data", p(&data), "--ranks", "2,2,2", "--lambda", "0", "--out", p(&out)]);
        out
    };
    let a = run("a");
    let m = metrics(&a);
    assert!(m["mean_train"].as_f64().unwrap() <= 1e-3, "{}", m["mean_train"]);
    assert!(a.join("trace.json").exists() && a.join("model.json").exists());
    assert_eq!(read_tree(&a), read_tree(&run("b")));
}

fn bench_config(dir: &Path) -> PathBuf {
    let cfg = serde_json::json!({
        "scenario": ScenarioConfig::scenario3(0.5, 0.4, 0),
        "settings": [{"beta_u": 0.5, "sigma_e": 0.1, "sparsity": 0.4}],
        "methods": ["local", "global"],
        "replications": 2,
        "master_seed": 9
    });
    write_config(dir, "bench.json", &cfg)
}

#[test]
fn bench_rows_are_reproducible_and_report_round_trips() {
    let tmp = TempDir::new().unwrap();
    let cfg = bench_config(tmp.path());
    let csv_a = tmp.path().join("a.csv");
    let csv_b = tmp.path().join("b.csv");
    ok(&["bench", "--config", p(&cfg), "--out", p(&csv_a)]);
    ok(&["bench", "--config", p(&cfg), "--out", p(&csv_b)]);
    let a = fs::read_to_string(&csv_a).unwrap();
    assert_eq!(a.as_bytes(), fs::read(&csv_b).unwrap().as_slice());
    assert_eq!(a.lines().count(), 3, "{a}");
    assert!(a.lines().nth(1).unwrap().contains("local"));

    let json = tmp.path().join("r.json");
    ok(&["bench", "--config", p(&cfg), "--out", p(&json), "--format", "json"]);
    let again = ok(&["report", "--results", p(&json)]);
    assert_eq!(again, a);
    let table = tmp.path().join("t.csv");
    ok(&["report", "--results", p(&json), "--table", "--out", p(&table)]);
    let t = fs::read_to_string(table).unwrap();
    assert!(t.starts_with("beta_u,sigma_e,s,local,global"), "{t}");
    assert_eq!(t.lines().count(), 2);
}
