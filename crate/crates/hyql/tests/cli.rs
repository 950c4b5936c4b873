use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hyql::config::{load_config, ConfigFile};
use hyql::report::{CurveRow, TrialRow, CURVES, MANIFEST, TRIALS};
use hyql::store::table::read_table;
use hyql::store::Checkpoint;
use hyql_core::sim::SimConfig;

fn hyql(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyql"))
        .args(args)
        .env_remove("HYQL_CONFIG")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = hyql(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn simulate(dir: &Path, extra: &[&str]) {
    let mut args = vec!["simulate", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    ok(&args);
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

#[test]
fn shipped_default_config_is_the_builtin_default() {
    let file = load_config(&repo_root().join("configs/default.toml")).unwrap();
    assert_eq!(file, ConfigFile::default());
    assert_eq!(file.to_sim().unwrap(), SimConfig::default());
}

#[test]
fn default_simulation_writes_ten_windows_per_run() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    simulate(&dir, &["--seeds", "0..3"]);
    let curves: Vec<CurveRow> = read_table(&dir.join(CURVES)).unwrap();
    // 2 variants x 3 seeds x 2 targets.
    assert_eq!(curves.len(), 12 * 10);
    assert!(curves.iter().all(|c| (1..=10).contains(&c.window)));
    let trials: Vec<TrialRow> = read_table(&dir.join(TRIALS)).unwrap();
    assert_eq!(trials.len(), 12 * 100);
    assert!(dir.join(MANIFEST).exists());
    for table in ["users", "devices", "preferences", "action_history", "event_history"] {
        assert!(dir.join("db").join(format!("{table}.tsv")).exists(), "{table}");
    }
}

#[test]
fn ten_trials_give_one_window() {
    let tmp = tempfile::tempdir().unwrap();
    simulate(tmp.path(), &["--seeds", "0", "--trials", "10"]);
    let curves: Vec<CurveRow> = read_table(&tmp.path().join(CURVES)).unwrap();
    assert_eq!(curves.len(), 4);
    assert!(curves.iter().all(|c| c.window == 1));
}

#[test]
fn missing_config_fails_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("never");
    let out = hyql(&[
        "simulate",
        "--config",
        tmp.path().join("absent.toml").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out_dir.exists());
}

#[test]
fn bad_values_name_the_failing_key() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("never");
    let out = hyql(&[
        "simulate",
        "--out",
        out_dir.to_str().unwrap(),
        "--set",
        "learning.gamma=1.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning"));
    let out = hyql(&[
        "simulate",
        "--out",
        out_dir.to_str().unwrap(),
        "--set",
        "experiment.window=7",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("experiment.window"));
    let out = hyql(&["simulate", "--out", out_dir.to_str().unwrap(), "--variants", "sarsa"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("experiment.variants"));
    let out = hyql(&["simulate", "--out", out_dir.to_str().unwrap(), "--seeds", "1,1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("repeat"));
    assert!(!out_dir.exists());
}

#[test]
fn config_comes_from_the_environment_variable() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("c.toml");
    fs::write(&config, "[experiment]\nn_trials = 20\nseeds = [5]\n").unwrap();
    let dir = tmp.path().join("run");
    let out = Command::new(env!("CARGO_BIN_EXE_hyql"))
        .args(["simulate", "--out", dir.to_str().unwrap()])
        .env("HYQL_CONFIG", &config)
        .output()
        .unwrap();
    assert!(out.status.success());
    let curves: Vec<CurveRow> = read_table(&dir.join(CURVES)).unwrap();
    assert!(curves.iter().all(|c| c.seed == 5 && c.window <= 2));
}

#[test]
fn non_empty_output_directory_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("keep.txt"), "x").unwrap();
    let out = hyql(&["simulate", "--out", tmp.path().to_str().unwrap(), "--seeds", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 1);
}

#[test]
fn manifest_alone_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    simulate(
        &a,
        &[
            "--seeds",
            "3,8",
            "--trials",
            "30",
            "--set",
            "learning.p=0.7",
            "--parallelism",
            "3",
        ],
    );
    simulate(
        &b,
        &["--config", a.join(MANIFEST).to_str().unwrap(), "--parallelism", "1"],
    );
    for f in [
        TRIALS,
        CURVES,
        "qtables.tsv",
        "db/preferences.tsv",
        "db/event_history.tsv",
    ] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn export_has_one_row_per_window_per_variant() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    simulate(&run, &["--seeds", "0..2"]);
    let tsv = ok(&["export", run.to_str().unwrap()]);
    let lines: Vec<&str> = tsv.lines().collect();
    assert_eq!(lines[0], "variant\twindow\tfirst_trial\tlast_trial\truns\tmean\tsd");
    assert_eq!(lines.len(), 1 + 2 * 10);
    assert!(lines[1].starts_with("qlearning\t1\t0\t9\t4\t"));
    assert_eq!(ok(&["export", run.to_str().unwrap()]), tsv);

    let file = tmp.path().join("p.csv");
    ok(&[
        "export",
        run.to_str().unwrap(),
        "--format",
        "csv",
        "--out",
        file.to_str().unwrap(),
    ]);
    let first = fs::read(&file).unwrap();
    ok(&[
        "export",
        run.to_str().unwrap(),
        "--format",
        "csv",
        "--out",
        file.to_str().unwrap(),
    ]);
    assert_eq!(fs::read(&file).unwrap(), first);
    assert!(String::from_utf8(first).unwrap().starts_with("variant,window,"));

    let bad = hyql(&["export", run.to_str().unwrap(), "--format", "xlsx"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn export_of_an_empty_directory_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hyql(&["export", tmp.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(out.stdout.is_empty());
}

#[test]
fn comparing_identical_runs_shows_zero_differences() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    simulate(&a, &["--seeds", "0..3", "--trials", "20"]);
    simulate(&b, &["--seeds", "0..3", "--trials", "20"]);
    let table = ok(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    let rows: Vec<&str> = table.lines().filter(|l| l.starts_with("1\t")).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.ends_with("\t+0.0000")), "{table}");
    assert!(table.contains("verdict:"));

    let single = ok(&["compare", a.to_str().unwrap()]);
    assert!(!single.contains("verdict"));
}

#[test]
fn split_variants_are_compared_with_a_verdict() {
    let tmp = tempfile::tempdir().unwrap();
    let h = tmp.path().join("h");
    let q = tmp.path().join("q");
    simulate(&h, &["--seeds", "0..30", "--variants", "hyql"]);
    simulate(&q, &["--seeds", "0..30", "--variants", "qlearning"]);
    let table = ok(&["compare", h.to_str().unwrap(), q.to_str().unwrap()]);
    let verdict = table.lines().find(|l| l.starts_with("verdict:")).unwrap();
    assert!(verdict.contains("paired n=60"), "{verdict}");
    assert!(verdict.ends_with("hybrid ahead"), "{verdict}");
}

#[test]
fn incompatible_runs_are_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    simulate(&a, &["--seeds", "0", "--trials", "20"]);
    simulate(&b, &["--seeds", "0", "--trials", "20", "--set", "learning.alpha=0.3"]);
    let out = hyql(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn checkpoints_resume_to_the_logged_run() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    simulate(&dir, &["--seeds", "1", "--trials", "40", "--checkpoint-at", "17"]);
    let trials: Vec<TrialRow> = read_table(&dir.join(TRIALS)).unwrap();
    let config = load_config(&dir.join(MANIFEST)).unwrap().to_sim().unwrap();
    let mut checked = 0;
    for entry in fs::read_dir(dir.join("checkpoints")).unwrap() {
        let cp = Checkpoint::read(&entry.unwrap().path()).unwrap();
        assert_eq!(cp.records.len(), 17);
        let key = cp.key;
        let mut run = cp.into_run().unwrap();
        run.run_to_end().unwrap();
        let logged: Vec<_> = trials
            .iter()
            .filter(|r| (r.seed, r.variant, r.user) == (key.seed, key.variant, key.target))
            .map(|r| r.to_record(&config.context).unwrap())
            .collect();
        assert_eq!(run.records(), logged.as_slice());
        checked += 1;
    }
    assert_eq!(checked, 4);
}
