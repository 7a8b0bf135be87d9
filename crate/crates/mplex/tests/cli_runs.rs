//! End-to-end runs of the installed binary: artifact layout, exit codes,
//! and the promises the subcommands make about their outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mplex::rundir;

fn mplex_cmd() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mplex"));
    // Keep the surrounding environment from steering run directories.
    cmd.env_remove("MPLEX_RUNS");
    cmd
}

/// Run and insist on success, returning captured stdout.
fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "command failed with {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Run and insist on failure with the given exit code, returning stderr.
fn run_err(cmd: &mut Command, code: i32) -> String {
    let out: Output = cmd.output().unwrap();
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stderr).unwrap()
}

/// A 60-node dataset small enough that every training run takes well under
/// a second.
fn synth_tiny(dir: &Path) {
    run_ok(
        mplex_cmd()
            .arg("synth")
            .arg(dir)
            .args(["--num-nodes", "60", "--seed", "1"]),
    );
}

/// Every regular file under `dir`, keyed by name, with its full contents.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|entry| {
            let entry = entry.unwrap();
            let name = entry.file_name().into_string().unwrap();
            (name, std::fs::read(entry.path()).unwrap())
        })
        .collect()
}

fn train_into(data: &Path, runs: &Path, extra: &[&str]) -> (PathBuf, String) {
    let stdout = run_ok(
        mplex_cmd()
            .arg("train")
            .arg(data)
            .arg("--runs")
            .arg(runs)
            .args(extra),
    );
    let first_line = stdout.lines().next().unwrap().to_string();
    (PathBuf::from(&first_line), stdout)
}

#[test]
fn train_leaves_a_complete_verified_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth_tiny(&data);
    let before = snapshot(&data);

    let (dir, stdout) = train_into(&data, &tmp.path().join("runs"), &[]);
    assert_eq!(dir, tmp.path().join("runs").join("train"));
    for name in [
        "config.json",
        "log.csv",
        "best.ckpt",
        "last.ckpt",
        "embeddings.tsv",
        "report.json",
        "report.txt",
        "manifest.json",
    ] {
        assert!(dir.join(name).is_file(), "missing artifact {name}");
    }
    // The manifest's checksums must cover exactly the other artifacts.
    let manifest = rundir::verify_manifest(&dir).unwrap();
    assert_eq!(manifest.command, "train");
    assert_eq!(manifest.checksums.len(), 7);

    // The report text printed at the end of training is the stored one.
    let report_txt = std::fs::read_to_string(dir.join("report.txt")).unwrap();
    assert!(stdout.ends_with(&report_txt));

    // Training reads the dataset but never rewrites it.
    assert_eq!(snapshot(&data), before);
}

#[test]
fn a_fully_disabled_objective_still_yields_a_report() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth_tiny(&data);

    // With every term switched off the consensus never leaves its zero
    // start, so retrieval is meaningless; the run must still finish and say
    // what it skipped.
    let (dir, _) = train_into(
        &data,
        &tmp.path().join("runs"),
        &[
            "--alpha", "0", "--beta", "0", "--gamma", "0", "--zeta", "0", "--theta", "0",
        ],
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    let notes = report["notes"].as_array().unwrap();
    assert!(
        notes
            .iter()
            .any(|n| n.as_str().unwrap().contains("similarity search skipped")),
        "notes were {notes:?}"
    );
    assert!(report["sim_search"].as_object().unwrap().is_empty());
}

#[test]
fn eval_reprints_the_training_report_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth_tiny(&data);
    let (dir, _) = train_into(&data, &tmp.path().join("runs"), &[]);

    let stored = std::fs::read_to_string(dir.join("report.json")).unwrap();
    let from_dir = run_ok(mplex_cmd().arg("eval").arg(&dir).arg(&data));
    assert_eq!(from_dir, stored, "eval of the run directory drifted");

    let from_ckpt = run_ok(mplex_cmd().arg("eval").arg(dir.join("best.ckpt")).arg(&data));
    assert_eq!(from_ckpt, stored, "eval of the checkpoint file drifted");
}

#[test]
fn eval_rejects_a_dataset_with_different_dimensions() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth_tiny(&data);
    let (dir, _) = train_into(&data, &tmp.path().join("runs"), &[]);

    let narrow = tmp.path().join("narrow");
    run_ok(
        mplex_cmd()
            .arg("synth")
            .arg(&narrow)
            .args(["--num-nodes", "60", "--num-features", "8", "--seed", "1"]),
    );
    let stderr = run_err(mplex_cmd().arg("eval").arg(&dir).arg(&narrow), 1);
    assert!(
        stderr.contains("does not fit") && stderr.contains("num_features"),
        "stderr was: {stderr}"
    );
}

#[test]
fn ablate_prints_deltas_against_the_first_variant() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth_tiny(&data);

    let stdout = run_ok(mplex_cmd().args(["ablate", "cross"]).arg(&data));
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "variant,micro_f1,nmi_n,delta_micro_f1,delta_nmi_n");
    assert_eq!(lines.len(), 3, "expected the full and no-cross rows");

    let row: Vec<Vec<f64>> = lines[1..]
        .iter()
        .map(|l| {
            l.split(',')
                .skip(1)
                .map(|v| v.parse().unwrap())
                .collect::<Vec<f64>>()
        })
        .collect();
    assert!(lines[1].starts_with("full,"));
    assert!(lines[2].starts_with("no-cross,"));
    // Printed floats parse back exactly, so the deltas must reproduce.
    assert_eq!(row[0][2], 0.0);
    assert_eq!(row[0][3], 0.0);
    assert_eq!(row[1][2], row[1][0] - row[0][0]);
    assert_eq!(row[1][3], row[1][1] - row[0][1]);
}

#[test]
fn sweep_k_walks_the_requested_range_and_validates_it() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth_tiny(&data);

    let stdout = run_ok(
        mplex_cmd()
            .arg("sweep-k")
            .arg(&data)
            .args(["--min-k", "2", "--max-k", "3"]),
    );
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "k,micro_f1,macro_f1,nmi_n,nmi_c");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("2,"));
    assert!(lines[2].starts_with("3,"));

    let stderr = run_err(
        mplex_cmd()
            .arg("sweep-k")
            .arg(&data)
            .args(["--min-k", "1", "--max-k", "3"]),
        1,
    );
    assert!(stderr.contains("--min-k"), "stderr was: {stderr}");
}

#[test]
fn grid_reports_every_cell_and_names_the_winner() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth_tiny(&data);

    let stdout = run_ok(mplex_cmd().arg("grid").arg(&data).args([
        "--gammas", "0.1", "--zetas", "0.1", "--thetas", "0.01",
    ]));
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(
        lines[0],
        "gamma,zeta,theta,learning_rate,val_micro_f1,best_epoch"
    );
    assert_eq!(lines.len(), 3, "one cell plus the winner line");
    assert!(lines[1].starts_with("0.1,0.1,0.01,0.001,"));
    // A single cell is its own winner, scores included.
    let cell: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(
        lines[2],
        format!(
            "best: gamma=0.1 zeta=0.1 theta=0.01 learning_rate=0.001 val_micro_f1={}",
            cell[4]
        )
    );
}

#[test]
fn synth_refuses_to_overwrite_an_occupied_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("data");
    std::fs::create_dir(&out).unwrap();
    std::fs::write(out.join("keep.txt"), "precious").unwrap();

    let stderr = run_err(mplex_cmd().arg("synth").arg(&out), 1);
    assert!(stderr.contains("not empty"), "stderr was: {stderr}");
    assert_eq!(std::fs::read(out.join("keep.txt")).unwrap(), b"precious");
}

#[test]
fn runs_root_honours_the_environment_override() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth_tiny(&data);

    let env_root = tmp.path().join("from-env");
    let stdout = run_ok(
        Command::new(env!("CARGO_BIN_EXE_mplex"))
            .arg("train")
            .arg(&data)
            .env("MPLEX_RUNS", &env_root),
    );
    let dir = PathBuf::from(stdout.lines().next().unwrap());
    assert_eq!(dir, env_root.join("train"));
    assert!(dir.join("manifest.json").is_file());
}

#[test]
fn repeated_runs_get_numbered_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth_tiny(&data);

    let runs = tmp.path().join("runs");
    let (first, _) = train_into(&data, &runs, &[]);
    let (second, _) = train_into(&data, &runs, &[]);
    assert_eq!(first, runs.join("train"));
    assert_eq!(second, runs.join("train-2"));
}
