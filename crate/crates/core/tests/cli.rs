use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn linecp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_linecp"))
        .args(args)
        .current_dir(dir)
        .env_remove("LINECP_TAXONOMY")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn calibrated(dir: &Path) {
    let out = linecp(
        dir,
        &[
            "synth",
            "--seed",
            "1",
            "--size",
            "800",
            "--out",
            "cohort.csv",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let out = linecp(
        dir,
        &["calibrate", "--scores", "cohort.csv", "--out", "model.json"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn help_lists_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let help = stdout(&linecp(dir.path(), &["calibrate", "--help"]));
    for needle in ["risk-sensitive", "0.1", "0.01", "group", "LINECP_TAXONOMY"] {
        assert!(help.contains(needle), "{needle} missing from:\n{help}");
    }
    let help = stdout(&linecp(dir.path(), &["split", "--help"]));
    assert!(help.contains("0.7,0.1,0.1,0.1"));
}

#[test]
fn calibrate_writes_model_with_fingerprint() {
    let dir = tempfile::tempdir().unwrap();
    calibrated(dir.path());
    let model: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("model.json")).unwrap()).unwrap();
    assert_eq!(model["mode"], "risk_sensitive");
    assert_eq!(model["pooling"], "group");
    assert_eq!(model["class_ids"].as_array().unwrap().len(), 11);
    assert_eq!(model["taxonomy_fingerprint"].as_str().unwrap().len(), 64);
}

#[test]
fn malformed_scores_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.csv"), "id,whatever\n1,2\n").unwrap();
    let out = linecp(
        dir.path(),
        &["calibrate", "--scores", "bad.csv", "--out", "m.json"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("case_id"));
    assert!(!dir.path().join("m.json").exists());
}

#[test]
fn missing_file_and_bad_flag_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = linecp(
        dir.path(),
        &["calibrate", "--scores", "nope.csv", "--out", "m.json"],
    );
    assert_eq!(out.status.code(), Some(2));
    let out = linecp(dir.path(), &["calibrate", "--mode", "bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn taxonomy_mismatch_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    calibrated(dir.path());
    fs::write(
        dir.path().join("tax.json"),
        r#"{"version": "mini", "classes": [
            {"id": "ett_abnormal", "name": "ETT - Abnormal", "risk_group": "critical", "tube_category": "ett"},
            {"id": "ett_normal", "name": "ETT - Normal", "risk_group": "normal", "tube_category": "ett"}
        ]}"#,
    )
    .unwrap();
    fs::write(
        dir.path().join("mini.csv"),
        "case_id,patient_id,p:ett_abnormal,p:ett_normal\na,,0.2,0.9\n",
    )
    .unwrap();
    let out = linecp(
        dir.path(),
        &[
            "predict",
            "--model",
            "model.json",
            "--scores",
            "mini.csv",
            "--taxonomy",
            "tax.json",
            "--out",
            "s.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("calibrated for taxonomy"));
}

#[test]
fn empty_critical_stratum_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("tax.json"),
        r#"{"version": "mini", "classes": [
            {"id": "ett_abnormal", "name": "ETT - Abnormal", "risk_group": "critical", "tube_category": "ett"},
            {"id": "ett_normal", "name": "ETT - Normal", "risk_group": "normal", "tube_category": "ett"}
        ]}"#,
    )
    .unwrap();
    fs::write(
        dir.path().join("cal.csv"),
        "case_id,patient_id,p:ett_abnormal,p:ett_normal,y:ett_abnormal,y:ett_normal\n\
         a,,0.1,0.9,0,1\nb,,0.2,0.8,0,1\n",
    )
    .unwrap();
    let out = linecp(
        dir.path(),
        &[
            "calibrate",
            "--scores",
            "cal.csv",
            "--taxonomy",
            "tax.json",
            "--out",
            "m.json",
        ],
    );
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("present"));
}

#[test]
fn taxonomy_env_var_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("tax.json"),
        r#"{"version": "mini", "classes": [
            {"id": "ett_abnormal", "name": "ETT - Abnormal", "risk_group": "critical", "tube_category": "ett"},
            {"id": "ett_normal", "name": "ETT - Normal", "risk_group": "normal", "tube_category": "ett"}
        ]}"#,
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_linecp"))
        .args(["synth", "--size", "5", "--out", "c.csv"])
        .current_dir(dir.path())
        .env("LINECP_TAXONOMY", "tax.json")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let header = fs::read_to_string(dir.path().join("c.csv")).unwrap();
    assert!(header.starts_with(
        "case_id,patient_id,p:ett_abnormal,p:ett_normal,y:ett_abnormal,y:ett_normal\n"
    ));
}

#[test]
fn evaluate_writes_json_and_text() {
    let dir = tempfile::tempdir().unwrap();
    calibrated(dir.path());
    let out = linecp(
        dir.path(),
        &[
            "evaluate",
            "--model",
            "model.json",
            "--scores",
            "cohort.csv",
            "--report",
            "r.json",
            "--daily-volume",
            "500",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("Coverage (800 cases, 8800 pairs)"), "{text}");
    assert!(text.contains("daily volume 500"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["coverage"]["cases"], 800);
    assert_eq!(report["triage"]["categories"].as_array().unwrap().len(), 4);
    assert!(dir.path().join("r.txt").exists());
}

#[test]
fn triage_from_sets_matches_triage_from_scores() {
    let dir = tempfile::tempdir().unwrap();
    calibrated(dir.path());
    let out = linecp(
        dir.path(),
        &[
            "predict",
            "--model",
            "model.json",
            "--scores",
            "cohort.csv",
            "--out",
            "sets.csv",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let from_sets = linecp(
        dir.path(),
        &["triage", "--sets", "sets.csv", "--out", "a.csv"],
    );
    let from_scores = linecp(
        dir.path(),
        &[
            "triage",
            "--model",
            "model.json",
            "--scores",
            "cohort.csv",
            "--out",
            "b.csv",
        ],
    );
    assert!(from_sets.status.success() && from_scores.status.success());
    assert_eq!(
        fs::read(dir.path().join("a.csv")).unwrap(),
        fs::read(dir.path().join("b.csv")).unwrap()
    );
    assert_eq!(
        fs::read(dir.path().join("a.csv")).unwrap(),
        fs::read(dir.path().join("sets.csv")).unwrap()
    );
}

#[test]
fn split_writes_four_disjoint_files() {
    let dir = tempfile::tempdir().unwrap();
    calibrated(dir.path());
    let out = linecp(
        dir.path(),
        &[
            "split",
            "--scores",
            "cohort.csv",
            "--seed",
            "3",
            "--out",
            "parts",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let rows: usize = ["train", "validation", "test", "calibration"]
        .iter()
        .map(|b| {
            fs::read_to_string(dir.path().join(format!("parts/{b}.csv")))
                .unwrap()
                .lines()
                .count()
                - 1
        })
        .sum();
    assert_eq!(rows, 800);
    let out = linecp(
        dir.path(),
        &[
            "split",
            "--scores",
            "cohort.csv",
            "--ratios",
            "0.5,0.5,0.5,0",
            "--out",
            "x",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dwa_equal_losses_give_unit_weights() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("epoch,cls,seg,aux\n");
    for t in 0..14 {
        csv.push_str(&format!("{t},0.5,0.5,0.5\n"));
    }
    fs::write(dir.path().join("losses.csv"), csv).unwrap();
    let out = linecp(
        dir.path(),
        &["dwa", "--losses", "losses.csv", "--out", "w.csv"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let weights = fs::read_to_string(dir.path().join("w.csv")).unwrap();
    let lines: Vec<&str> = weights.lines().collect();
    assert_eq!(lines[0], "epoch,cls,seg,aux");
    assert_eq!(lines.len(), 15);
    for line in &lines[1..] {
        assert!(line.ends_with(",1,1,1"), "{line}");
    }
}

#[test]
fn dwa_rejects_non_positive_loss() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("losses.csv"), "epoch,a,b\n0,1,0\n").unwrap();
    let out = linecp(
        dir.path(),
        &["dwa", "--losses", "losses.csv", "--out", "w.csv"],
    );
    assert_eq!(out.status.code(), Some(2));
}
