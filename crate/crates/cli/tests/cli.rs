use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kwsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kwsel"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn synth_corpus(dir: &Path) {
    let out = kwsel(&["synth", "--out", dir.to_str().unwrap(), "--seed", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

/// Parses the `error kind=... code=... message="..."` line.
fn error_line(out: &Output) -> (String, i32, String) {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr
        .lines()
        .find(|l| l.starts_with("error kind="))
        .unwrap_or_else(|| panic!("no error line in {stderr:?}"));
    let rest = line.strip_prefix("error kind=").unwrap();
    let (kind, rest) = rest.split_once(" code=").unwrap();
    let (code, message) = rest.split_once(" message=").unwrap();
    let message: String = serde_json::from_str(message).unwrap();
    (kind.to_string(), code.parse().unwrap(), message)
}

#[test]
fn synth_then_run_writes_all_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    let out_dir = tmp.path().join("out");
    synth_corpus(&corpus);
    let out = kwsel(&[
        "run",
        "--corpus",
        corpus.to_str().unwrap(),
        "--train-count",
        "40",
        "--chromosome-size",
        "6",
        "--max-generations",
        "20",
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["best"]["words"].as_array().unwrap().len(), 6);
    for f in ["trace.csv", "report.json", "per_category.csv", "pool.csv"] {
        assert!(out_dir.join(f).is_file(), "{f} missing");
    }
}

#[test]
fn config_file_and_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    synth_corpus(&corpus);
    let conf = tmp.path().join("run.conf");
    fs::write(
        &conf,
        format!(
            "corpus_root = {}\ntrain_count = 40\nchromosome_size = 4\nmax_generations = 3\nseed = 9\n",
            corpus.display()
        ),
    )
    .unwrap();
    let out = kwsel(&[
        "run",
        "--config",
        conf.to_str().unwrap(),
        "--chromosome-size",
        "5",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["config"]["seed"], 9);
    assert_eq!(report["best"]["indices"].as_array().unwrap().len(), 5);
}

#[test]
fn dict_eval_and_oracle_subcommands() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    let dict_dir = tmp.path().join("dict");
    synth_corpus(&corpus);
    let c = corpus.to_str().unwrap();

    let out = kwsel(&[
        "dict",
        "--corpus",
        c,
        "--train-count",
        "40",
        "--output-dir",
        dict_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let pool = fs::read_to_string(dict_dir.join("pool.csv")).unwrap();
    assert!(pool.starts_with("rank,word,frequency"));
    assert!(dict_dir.join("dictionary.csv").is_file());

    let words: Vec<&str> = pool
        .lines()
        .skip(1)
        .take(3)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    let out = kwsel(&[
        "eval",
        "--corpus",
        c,
        "--train-count",
        "40",
        "--words",
        &words.join(","),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let pr = report["pr_avg"].as_f64().unwrap();
    assert!((report["fitness"].as_f64().unwrap() - (1.0 - pr)).abs() < 1e-12);

    let out = kwsel(&[
        "oracle",
        "--corpus",
        c,
        "--train-count",
        "40",
        "--max-words",
        "8",
        "--chromosome-size",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let best: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(best["words"].as_array().unwrap().len(), 2);
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    synth_corpus(&corpus);
    let out = kwsel(&[
        "run",
        "--corpus",
        corpus.to_str().unwrap(),
        "--train-count",
        "40",
        "--p-min",
        "0.5",
        "--p-max",
        "0.1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let (kind, code, message) = error_line(&out);
    assert_eq!((kind.as_str(), code), ("config", 2));
    assert!(!message.is_empty());

    let out = kwsel(&["run", "--train-count", "40"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn input_errors_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nowhere");
    let out = kwsel(&["run", "--corpus", missing.to_str().unwrap(), "--train-count", "4"]);
    assert_eq!(out.status.code(), Some(3));
    let (kind, _, message) = error_line(&out);
    assert_eq!(kind, "input");
    assert!(message.contains("nowhere"), "{message}");

    let empty = tmp.path().join("corpus");
    fs::create_dir_all(empty.join("austen")).unwrap();
    fs::create_dir_all(empty.join("dickens")).unwrap();
    fs::write(empty.join("dickens/a.txt"), "some words here").unwrap();
    let out = kwsel(&["run", "--corpus", empty.to_str().unwrap(), "--train-count", "1"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn failed_run_removes_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    let out_dir = tmp.path().join("out");
    synth_corpus(&corpus);
    // A directory where pool.csv should go makes the last write fail.
    fs::create_dir_all(out_dir.join("pool.csv")).unwrap();
    let out = kwsel(&[
        "run",
        "--corpus",
        corpus.to_str().unwrap(),
        "--train-count",
        "40",
        "--chromosome-size",
        "4",
        "--max-generations",
        "3",
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    for f in ["trace.csv", "report.json", "per_category.csv"] {
        assert!(!out_dir.join(f).exists(), "{f} left behind");
    }
}
