//! End-to-end tests driving the compiled binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_disteval"))
}

fn run_ok(args: &[&str], dir: &Path) -> Output {
    let output = bin().args(args).current_dir(dir).output().expect("spawn");
    assert!(
        output.status.success(),
        "command {:?} failed:\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn synth_fixture(dir: &Path, seed: u64) -> PathBuf {
    let out = dir.join(format!("fixture{seed}"));
    run_ok(
        &[
            "synth",
            "--seed",
            &seed.to_string(),
            "--requests",
            "20",
            "--catalog",
            "60",
            "--relevant",
            "3",
            "--list-length",
            "15",
            "--systems",
            "2",
            "--out",
            out.to_str().unwrap(),
        ],
        dir,
    );
    out
}

fn report_json(dir: &Path) -> Value {
    let text = std::fs::read_to_string(dir.join("report.json")).expect("report.json");
    serde_json::from_str(&text).expect("valid JSON")
}

#[test]
fn eval_happy_path_writes_report_and_table() {
    let tmp = tempfile::tempdir().unwrap();
    let fixture = synth_fixture(tmp.path(), 1);
    let out = tmp.path().join("report");
    let output = run_ok(
        &[
            "eval",
            "--runs",
            fixture.join("sys01.run").to_str().unwrap(),
            fixture.join("sys02.run").to_str().unwrap(),
            "--truth",
            fixture.join("truth.qrels").to_str().unwrap(),
            "--gamma",
            "0.8",
            "--seed",
            "42",
            "--out",
            out.to_str().unwrap(),
        ],
        tmp.path(),
    );
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("metric: rbp(0.8)"));
    assert!(stdout.contains("sys01"));

    let report = report_json(&out);
    assert_eq!(report["schema_version"], 1);
    assert!(report["analysis"]["pointwise"].is_object());
    assert!(report["analysis"]["distributions"].is_object());
    assert!(report["analysis"].get("exposure").is_none());
    assert!(out.join("pointwise/metric_frame.csv").is_file());
    let digests = report["provenance"]["inputs"].as_object().unwrap();
    assert_eq!(digests.len(), 3);
}

#[test]
fn eval_is_byte_stable_and_thread_independent() {
    let tmp = tempfile::tempdir().unwrap();
    let fixture = synth_fixture(tmp.path(), 2);
    let mut bytes = Vec::new();
    for (dir, threads) in [("r1", None), ("r2", None), ("r3", Some("1"))] {
        let out = tmp.path().join(dir);
        let mut args = vec![
            "eval".to_string(),
            "--runs".to_string(),
            fixture.join("sys01.run").to_str().unwrap().to_string(),
            fixture.join("sys02.run").to_str().unwrap().to_string(),
            "--truth".to_string(),
            fixture.join("truth.qrels").to_str().unwrap().to_string(),
            "--seed".to_string(),
            "7".to_string(),
            "--out".to_string(),
            out.to_str().unwrap().to_string(),
        ];
        if let Some(t) = threads {
            args.push("--threads".to_string());
            args.push(t.to_string());
        }
        let arg_refs: Vec<&str> = args.iter().map(String::as_str).collect();
        run_ok(&arg_refs, tmp.path());
        bytes.push(std::fs::read(out.join("report.json")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
    assert_eq!(bytes[0], bytes[2]);

    // The env-var fallback caps threads the same way --threads does.
    let out = tmp.path().join("r4");
    let output = bin()
        .args([
            "eval",
            "--runs",
            fixture.join("sys01.run").to_str().unwrap(),
            fixture.join("sys02.run").to_str().unwrap(),
            "--truth",
            fixture.join("truth.qrels").to_str().unwrap(),
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ])
        .env("DISTEVAL_THREADS", "2")
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(output.status.success());
    assert_eq!(bytes[0], std::fs::read(out.join("report.json")).unwrap());
}

#[test]
fn compare_identical_runs_reports_no_movement() {
    let tmp = tempfile::tempdir().unwrap();
    let fixture = synth_fixture(tmp.path(), 3);
    let out = tmp.path().join("cmp");
    let run = fixture.join("sys01.run");
    run_ok(
        &[
            "compare",
            "--runs",
            run.to_str().unwrap(),
            run.to_str().unwrap(),
            "--truth",
            fixture.join("truth.qrels").to_str().unwrap(),
            "--metrics",
            "rbp,ndcg",
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
        ],
        tmp.path(),
    );
    let report = report_json(&out);
    let pairs = report["analysis"]["differences"]["pairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 2);
    for pair in pairs {
        assert_eq!(pair["fraction_hurt"], 0.0);
        assert_eq!(pair["fraction_helped"], 0.0);
        assert_eq!(pair["fraction_tied"], 1.0);
        assert_eq!(pair["median_diff"], 0.0);
        assert_eq!(pair["test"]["kind"], "degenerate");
        assert_eq!(pair["system_a"], "sys01");
        assert_eq!(pair["system_b"], "sys01.2");
    }
    // Every per-request difference in the sidecar is exactly zero.
    let diffs_csv = out.join(pairs[0]["diffs_csv"].as_str().unwrap());
    let text = std::fs::read_to_string(diffs_csv).unwrap();
    for line in text.lines().skip(1) {
        assert!(line.ends_with(",0"), "unexpected diff row {line}");
    }
}

#[test]
fn sweep_matches_per_gamma_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let fixture = synth_fixture(tmp.path(), 4);
    let sweep_out = tmp.path().join("sweep");
    run_ok(
        &[
            "sweep",
            "--runs",
            fixture.join("sys01.run").to_str().unwrap(),
            fixture.join("sys02.run").to_str().unwrap(),
            "--truth",
            fixture.join("truth.qrels").to_str().unwrap(),
            "--grid-step",
            "0.25",
            "--out",
            sweep_out.to_str().unwrap(),
        ],
        tmp.path(),
    );
    let curves = std::fs::read_to_string(sweep_out.join("uncertainty/sweep.csv")).unwrap();

    let eval_out = tmp.path().join("eval04");
    run_ok(
        &[
            "eval",
            "--runs",
            fixture.join("sys01.run").to_str().unwrap(),
            fixture.join("sys02.run").to_str().unwrap(),
            "--truth",
            fixture.join("truth.qrels").to_str().unwrap(),
            "--gamma",
            "0.5",
            "--metrics",
            "rbp",
            "--seed",
            "1",
            "--out",
            eval_out.to_str().unwrap(),
        ],
        tmp.path(),
    );
    let report = report_json(&eval_out);
    for system in ["sys01", "sys02"] {
        let eval_mean = report["analysis"]["pointwise"]["means"][system]["rbp(0.5)"]
            .as_f64()
            .unwrap();
        let row = curves
            .lines()
            .find(|line| line.starts_with("0.5,") && line.contains(system))
            .unwrap_or_else(|| panic!("no sweep row for {system}"));
        let sweep_mean: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(sweep_mean, eval_mean, "system {system}");
    }
}

#[test]
fn subgroup_and_posterior_and_exposure_write_sections() {
    let tmp = tempfile::tempdir().unwrap();
    let fixture = synth_fixture(tmp.path(), 5);
    let runs = [
        fixture.join("sys01.run"),
        fixture.join("sys02.run"),
    ];
    let truth = fixture.join("truth.qrels");

    let sub_out = tmp.path().join("sub");
    run_ok(
        &[
            "subgroup",
            "--runs",
            runs[0].to_str().unwrap(),
            runs[1].to_str().unwrap(),
            "--truth",
            truth.to_str().unwrap(),
            "--user-attrs",
            fixture.join("users.csv").to_str().unwrap(),
            "--attribute",
            "group",
            "--seed",
            "3",
            "--out",
            sub_out.to_str().unwrap(),
        ],
        tmp.path(),
    );
    let report = report_json(&sub_out);
    let subgroup = &report["analysis"]["subgroups"]["group"];
    assert_eq!(subgroup["metric"], "rbp(0.8)");
    assert!(subgroup["summaries"]["sys01"].is_object());
    assert!(subgroup["change"]["groups"].is_object());

    let exp_out = tmp.path().join("exp");
    run_ok(
        &[
            "exposure",
            "--runs",
            runs[0].to_str().unwrap(),
            runs[1].to_str().unwrap(),
            "--truth",
            truth.to_str().unwrap(),
            "--item-attrs",
            fixture.join("items.csv").to_str().unwrap(),
            "--attribute",
            "genre",
            "--out",
            exp_out.to_str().unwrap(),
        ],
        tmp.path(),
    );
    let report = report_json(&exp_out);
    let exposure = &report["analysis"]["exposure"];
    assert!(exposure["systems"]["sys01"]["gini"].as_f64().unwrap() >= 0.0);
    assert_eq!(exposure["groups"]["attribute"], "genre");
    assert!(exp_out.join("exposure/lorenz_sys01.csv").is_file());
    assert!(exp_out.join("exposure/prevalence.csv").is_file());

    let post_out = tmp.path().join("post");
    run_ok(
        &[
            "posterior",
            "--runs",
            runs[0].to_str().unwrap(),
            "--truth",
            truth.to_str().unwrap(),
            "--draws",
            "150",
            "--seed",
            "9",
            "--out",
            post_out.to_str().unwrap(),
        ],
        tmp.path(),
    );
    let report = report_json(&post_out);
    let posterior = &report["analysis"]["uncertainty"]["posterior"];
    assert_eq!(posterior["prior_a"], 5.0);
    assert_eq!(posterior["draws"], 150);
    assert!(post_out
        .join("uncertainty/posterior_samples_sys01.csv")
        .is_file());
}

#[test]
fn reps_pipeline_reports_stability() {
    let tmp = tempfile::tempdir().unwrap();
    let reps_dir = tmp.path().join("reps");
    for (rep, seed) in [("rep1", 21u64), ("rep2", 22), ("rep3", 23)] {
        let fixture = synth_fixture(tmp.path(), seed);
        let rep_dir = reps_dir.join(rep);
        std::fs::create_dir_all(rep_dir.join("runs")).unwrap();
        std::fs::copy(fixture.join("sys01.run"), rep_dir.join("runs/sys01.run")).unwrap();
        std::fs::copy(fixture.join("sys02.run"), rep_dir.join("runs/sys02.run")).unwrap();
        std::fs::copy(fixture.join("truth.qrels"), rep_dir.join("truth.qrels")).unwrap();
    }
    let out = tmp.path().join("repsout");
    let output = run_ok(
        &[
            "reps",
            "--reps-dir",
            reps_dir.to_str().unwrap(),
            "--metrics",
            "rbp",
            "--seed",
            "13",
            "--out",
            out.to_str().unwrap(),
        ],
        tmp.path(),
    );
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("repetitions: 3"));
    assert!(stdout.contains("sign-consistency"));
    let report = report_json(&out);
    assert_eq!(report["analysis"]["repetitions"]["n_repetitions"], 3);
    let frame = std::fs::read_to_string(out.join("repetitions/frame.csv")).unwrap();
    assert!(frame.starts_with("repetition_id,system_id,metric_id,group,value"));
    assert!(frame.contains("rep1,sys01,rbp(0.8),,"));

    // The per-repetition statistic is selectable.
    let median_out = tmp.path().join("repsmedian");
    run_ok(
        &[
            "reps",
            "--reps-dir",
            reps_dir.to_str().unwrap(),
            "--metrics",
            "rbp",
            "--statistic",
            "median",
            "--seed",
            "13",
            "--out",
            median_out.to_str().unwrap(),
        ],
        tmp.path(),
    );
    let median_frame =
        std::fs::read_to_string(median_out.join("repetitions/frame.csv")).unwrap();
    assert_ne!(frame, median_frame);
}

#[test]
fn synth_is_deterministic_across_invocations() {
    let tmp = tempfile::tempdir().unwrap();
    let a = synth_fixture(tmp.path(), 77);
    let b_dir = tmp.path().join("again");
    std::fs::create_dir_all(&b_dir).unwrap();
    // Same seed, different output dir.
    run_ok(
        &[
            "synth",
            "--seed",
            "77",
            "--requests",
            "20",
            "--catalog",
            "60",
            "--relevant",
            "3",
            "--list-length",
            "15",
            "--systems",
            "2",
            "--out",
            b_dir.join("fixture77").to_str().unwrap(),
        ],
        tmp.path(),
    );
    for name in ["sys01.run", "sys02.run", "truth.qrels", "users.csv", "items.csv"] {
        let left = std::fs::read(a.join(name)).unwrap();
        let right = std::fs::read(b_dir.join("fixture77").join(name)).unwrap();
        assert_eq!(left, right, "file {name} differs between runs");
    }
}

#[test]
fn errors_are_single_line_and_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let output = bin()
        .args([
            "eval",
            "--runs",
            "missing.run",
            "--truth",
            "missing.qrels",
            "--seed",
            "1",
            "--out",
            "out",
        ])
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "stderr: {stderr}");
    assert!(stderr.starts_with("error: "));
    assert!(!tmp.path().join("out/report.json").exists());
}

#[test]
fn randomized_subcommands_require_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let fixture = synth_fixture(tmp.path(), 6);
    let output = bin()
        .args([
            "eval",
            "--runs",
            fixture.join("sys01.run").to_str().unwrap(),
            "--truth",
            fixture.join("truth.qrels").to_str().unwrap(),
            "--out",
            "out",
        ])
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("--seed"), "stderr: {stderr}");
}

#[test]
fn report_subcommand_rerenders_table() {
    let tmp = tempfile::tempdir().unwrap();
    let fixture = synth_fixture(tmp.path(), 8);
    let out = tmp.path().join("rep");
    let eval_output = run_ok(
        &[
            "eval",
            "--runs",
            fixture.join("sys01.run").to_str().unwrap(),
            "--truth",
            fixture.join("truth.qrels").to_str().unwrap(),
            "--metrics",
            "rbp,mrr",
            "--seed",
            "4",
            "--out",
            out.to_str().unwrap(),
        ],
        tmp.path(),
    );
    let rerender = run_ok(&["report", "--report", out.to_str().unwrap()], tmp.path());
    assert_eq!(eval_output.stdout, rerender.stdout);

    // A report without distributions (exposure only) cannot be rendered.
    let exp_out = tmp.path().join("exp-only");
    run_ok(
        &[
            "exposure",
            "--runs",
            fixture.join("sys01.run").to_str().unwrap(),
            "--truth",
            fixture.join("truth.qrels").to_str().unwrap(),
            "--out",
            exp_out.to_str().unwrap(),
        ],
        tmp.path(),
    );
    let output = bin()
        .args(["report", "--report", exp_out.to_str().unwrap()])
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(!output.status.success());
}
