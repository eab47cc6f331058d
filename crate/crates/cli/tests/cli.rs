use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qcd::simulate::{gen_trial_experiment, TrialExperiment};
use qcd_cli::commands::detect_set;
use qcd_cli::config::{DetectorKind, ExperimentConfig};
use qcd_cli::data::{load_spikes, read_spikes};

fn qcd(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcd"))
        .args(args)
        .current_dir(dir)
        .env("QCD_LOG", "error")
        .output()
        .expect("qcd binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn simulate_matches_library_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = qcd(&["simulate", "--seed", "21", "--out", "s.csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let parsed = load_spikes(&dir.path().join("s.csv")).unwrap();
    let direct = gen_trial_experiment(&TrialExperiment::default(), 21).unwrap();
    assert_eq!(parsed, direct);
    assert_eq!(parsed.trials(), 45);
}

#[test]
fn tiny_simulation_format() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate", "--trials", "2", "--bins", "3", "--change-trial", "2", "--seed", "1", "--out", "t.csv",
    ];
    assert_eq!(code(&qcd(&args, dir.path())), 0);
    let text = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], "trial,bin_0,bin_1,bin_2");
    assert!(lines[1].starts_with("1,") && lines[2].starts_with("2,"));
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 4));
}

#[test]
fn detect_matches_library_and_reports_status() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&qcd(&["simulate", "--seed", "4", "--out", "s.csv"], dir.path())), 0);
    let o = qcd(
        &["detect", "s.csv", "--detector", "deviation", "--lambda", "0.05", "--threshold", "10", "--out", "d.csv"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);

    let set = load_spikes(&dir.path().join("s.csv")).unwrap();
    let cfg = ExperimentConfig {
        detector: Some(DetectorKind::Deviation),
        lambda: Some(0.05),
        threshold: Some(10.0),
        ..Default::default()
    };
    let d = detect_set(&set, &cfg).unwrap();
    let alarm = d.alarm.expect("library detects too");
    assert!(alarm.trial >= set.meta.change_trial);

    let mut rdr = csv::Reader::from_path(dir.path().join("d.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["index", "statistic", "threshold", "stopped"]);
    let rows: Vec<(usize, f64, f64, bool)> = rdr.deserialize().map(Result::unwrap).collect();
    assert_eq!(rows.len(), d.report.statistic_path.len());
    for (row, lib) in rows.iter().zip(d.rows()) {
        assert_eq!((row.0, row.1, row.2, row.3), (lib.index, lib.statistic, lib.threshold, lib.stopped));
    }
    assert_eq!(rows.last().unwrap().0, alarm.sample);
    assert!(rows.last().unwrap().3);

    // a threshold out of reach: exit 1, full path written
    let o = qcd(
        &["detect", "s.csv", "--detector", "deviation", "--lambda", "0.05", "--threshold", "1e9", "--out", "n.csv"],
        dir.path(),
    );
    assert_eq!(code(&o), 1);
    let n = fs::read_to_string(dir.path().join("n.csv")).unwrap();
    assert_eq!(n.lines().count(), 1 + 45 * 100);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"trials": 3, "bins": 8, "change_trial": 2, "seed": 5, "out": "a.csv"}"#,
    )
    .unwrap();
    assert_eq!(code(&qcd(&["simulate", "--config", "c.json"], dir.path())), 0);
    assert_eq!(code(&qcd(&["simulate", "--config", "c.json", "--bins", "6", "--out", "b.csv"], dir.path())), 0);
    let a = load_spikes(&dir.path().join("a.csv")).unwrap();
    let b = load_spikes(&dir.path().join("b.csv")).unwrap();
    assert_eq!((a.trials(), a.bins()), (3, 8));
    assert_eq!((b.trials(), b.bins()), (3, 6));
}

#[test]
fn usage_and_config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&qcd(&["simulate", "--seed", "1", "--out", "s.csv"], dir.path())), 0);
    // no detector
    assert_eq!(code(&qcd(&["detect", "s.csv", "--threshold", "3"], dir.path())), 2);
    // neither threshold nor target
    assert_eq!(code(&qcd(&["detect", "s.csv", "--detector", "cusum"], dir.path())), 2);
    // both
    assert_eq!(
        code(&qcd(&["detect", "s.csv", "--detector", "cusum", "--threshold", "3", "--target-arl", "9"], dir.path())),
        2
    );
    // too many baseline trials
    assert_eq!(
        code(&qcd(&["detect", "s.csv", "--detector", "cusum", "--threshold", "3", "--baseline-trials", "45"], dir.path())),
        2
    );
    // unknown config key
    fs::write(dir.path().join("bad.json"), r#"{"detecter": "cusum"}"#).unwrap();
    assert_eq!(code(&qcd(&["calibrate", "--config", "bad.json"], dir.path())), 2);
    // empty threshold list
    assert_eq!(code(&qcd(&["evaluate", "--detector", "cusum"], dir.path())), 2);
    assert_eq!(code(&qcd(&["simulate", "--stat", "median"], dir.path())), 2);
}

#[test]
fn data_errors_exit_3_and_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.csv"), "trial,bin_0,bin_1\n1,0,1\n2,0,7\n").unwrap();
    let o = qcd(
        &["detect", "bad.csv", "--detector", "cusum", "--threshold", "3", "--baseline-trials", "1"],
        dir.path(),
    );
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    let o = qcd(&["detect", "missing.csv", "--detector", "cusum", "--threshold", "3"], dir.path());
    assert_eq!(code(&o), 3);
}

#[test]
fn calibrate_and_evaluate_match_library() {
    let dir = tempfile::tempdir().unwrap();
    let o = qcd(
        &["calibrate", "--detector", "cusum", "--target-arl", "200", "--runs", "200", "--seed", "9", "--out", "c.csv"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let cfg = ExperimentConfig {
        detector: Some(DetectorKind::Cusum),
        target_arl: Some(200.0),
        runs: Some(200),
        seed: Some(9),
        ..Default::default()
    };
    let lib = qcd::eval::calibrate_threshold(
        &qcd::detectors::DetectorConfig::Cusum {
            f0: cfg.model(0.05).unwrap(),
            f1: cfg.model(0.25).unwrap(),
        },
        &cfg.model(0.05).unwrap(),
        200.0,
        200,
        9,
        &Default::default(),
    )
    .unwrap();
    let mut rdr = csv::Reader::from_path(dir.path().join("c.csv")).unwrap();
    let row: (f64, f64, f64) = rdr
        .records()
        .next()
        .unwrap()
        .map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap()))
        .unwrap();
    assert_eq!(row, (200.0, lib.threshold, lib.estimated_arl));

    let o = qcd(
        &["evaluate", "--detector", "cusum", "--thresholds", "1,3,5", "--runs", "300", "--change-point", "1", "--out", "e.csv"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let mut rdr = csv::Reader::from_path(dir.path().join("e.csv")).unwrap();
    let arl: Vec<f64> = rdr.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    assert_eq!(arl.len(), 3);
    assert!(arl[0] < arl[1] && arl[1] < arl[2], "{arl:?}");
}

#[test]
fn parses_back_what_it_writes_without_sidecar() {
    let set = gen_trial_experiment(
        &TrialExperiment {
            trials: 4,
            bins: 10,
            change_trial: 3,
            cue_bin: 5,
            ..TrialExperiment::default()
        },
        2,
    )
    .unwrap();
    let mut buf = Vec::new();
    qcd_cli::data::write_spikes(&set, &mut buf).unwrap();
    let back = read_spikes(&buf[..], Some(set.meta)).unwrap();
    assert_eq!(back, set);
}
