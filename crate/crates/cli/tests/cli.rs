//! End-to-end tests of the binary: workflow chaining, determinism, exit
//! codes, and the error paths that guard user data.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use apnea_core::dataset::io::write_channel;
use apnea_core::signal::{ChannelKind, SignalChannel};
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    run_with_env(args, &[])
}

fn run_with_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_apnea-pipeline"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
        .lines()
        .map(str::to_string)
        .collect()
}

#[test]
fn synthetic_workflow_end_to_end() {
    let tmp = TempDir::new().unwrap();
    let ds = tmp.path().join("ds");
    let win = tmp.path().join("win");
    let run_a = tmp.path().join("run_a");
    let run_b = tmp.path().join("run_b");

    let out = run(&[
        "synth", "--output", path_str(&ds), "--patients", "3", "--duration-s", "240", "--seed",
        "5",
    ]);
    assert_code(&out, 0);
    assert!(ds.join("synth00.ecg.csv").exists());
    assert!(ds.join("synth02.events.csv").exists());
    assert!(ds.join("config.toml").exists());

    let out = run(&["preprocess", "--input", path_str(&ds), "--output", path_str(&win)]);
    assert_code(&out, 0);
    let summary = lines(&win.join("windows.csv"));
    assert_eq!(summary.len(), 4, "header plus one row per patient");
    assert!(summary[1].starts_with("synth00,4,"));

    // Same seed twice: byte-identical history and checkpoint.
    for dir in [&run_a, &run_b] {
        let out = run(&[
            "train", "--data", path_str(&win), "--output", path_str(dir), "--epochs", "2",
            "--seed", "5",
        ]);
        assert_code(&out, 0);
    }
    assert_eq!(
        fs::read(run_a.join("history.csv")).unwrap(),
        fs::read(run_b.join("history.csv")).unwrap()
    );
    assert_eq!(
        fs::read(run_a.join("model.ckpt")).unwrap(),
        fs::read(run_b.join("model.ckpt")).unwrap()
    );
    assert_eq!(lines(&run_a.join("history.csv")).len(), 3);
    let resolved = fs::read_to_string(run_a.join("config.toml")).unwrap();
    assert!(resolved.contains("seed = 5"));
    assert!(resolved.contains("epochs = 2"));

    let model = run_a.join("model.ckpt");
    let inf = tmp.path().join("inf");
    let out = run(&[
        "infer", "--model", path_str(&model), "--input", path_str(&ds), "--patient", "synth00",
        "--output", path_str(&inf), "--timeline-svg",
    ]);
    assert_code(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("ahi="), "{stdout}");
    assert!(stdout.contains("class="), "{stdout}");
    let scores = lines(&inf.join("scores.csv"));
    assert_eq!(scores[0], "second,score,prob,label_pred");
    assert_eq!(scores.len(), 1 + 4 * 60, "one row per second of 4 windows");
    assert_eq!(lines(&inf.join("events.csv"))[0], "start_s,end_s");
    assert!(fs::read_to_string(inf.join("timeline.svg")).unwrap().contains("<svg"));

    // A recording shorter than one window scores nothing but succeeds.
    let short = SignalChannel {
        patient_id: "short0".into(),
        kind: ChannelKind::Ecg,
        rate_hz: 80.0,
        start_epoch_s: 0.0,
        values: (0..80 * 30).map(|i| (i as f64 * 0.1).sin()).collect(),
    };
    write_channel(&short, &ds.join("short0.ecg.csv")).unwrap();
    let short_out = tmp.path().join("inf_short");
    let out = run(&[
        "infer", "--model", path_str(&model), "--input", path_str(&ds), "--patient", "short0",
        "--output", path_str(&short_out),
    ]);
    assert_code(&out, 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no scorable"));
    assert_eq!(lines(&short_out.join("scores.csv")).len(), 1);
    assert_eq!(lines(&short_out.join("events.csv")).len(), 1);
    fs::remove_file(ds.join("short0.ecg.csv")).unwrap();

    // Oracle scoring must reproduce the annotations exactly.
    let eval = tmp.path().join("eval");
    let out = run(&[
        "evaluate", "--data", path_str(&win), "--annotations", path_str(&ds), "--oracle",
        "--output", path_str(&eval),
    ]);
    assert_code(&out, 0);
    let summary = fs::read_to_string(eval.join("summary.txt")).unwrap();
    assert!(summary.contains("pooled_f1=1\n"), "{summary}");
    assert!(summary.contains("mean_abs_ahi_error=0\n"), "{summary}");
    assert_eq!(lines(&eval.join("patients.csv")).len(), 4);

    let eval_model = tmp.path().join("eval_model");
    let out = run(&[
        "evaluate", "--data", path_str(&win), "--annotations", path_str(&ds), "--model",
        path_str(&model), "--output", path_str(&eval_model), "--timeline-svg",
    ]);
    assert_code(&out, 0);
    assert_eq!(lines(&eval_model.join("patients.csv")).len(), 4);
    assert!(eval_model.join("synth01.svg").exists());
}

#[test]
fn cv_and_sweep_report_per_point_rows() {
    let tmp = TempDir::new().unwrap();
    let ds = tmp.path().join("ds");
    assert_code(
        &run(&[
            "synth", "--output", path_str(&ds), "--patients", "3", "--duration-s", "240",
            "--seed", "11",
        ]),
        0,
    );

    let cv = tmp.path().join("cv");
    let out = run(&[
        "cv", "--input", path_str(&ds), "--output", path_str(&cv), "--epochs", "1", "--seed",
        "11",
    ]);
    assert_code(&out, 0);
    let folds = lines(&cv.join("folds.csv"));
    assert_eq!(folds.len(), 5, "header, one row per patient, pooled");
    assert!(folds[1].starts_with("synth00,"));
    assert!(folds[4].starts_with("pooled,"));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("pooled over 3 folds"), "{stdout}");

    let sw = tmp.path().join("sw");
    let out = run(&[
        "sweep", "--input", path_str(&ds), "--output", path_str(&sw), "--fractions", "0.5,1.0",
        "--repeats", "2", "--epochs", "1", "--seed", "11",
    ]);
    assert_code(&out, 0);
    assert_eq!(lines(&sw.join("sweep.csv")).len(), 5, "two fractions x two repeats");
    assert_eq!(lines(&sw.join("sweep_summary.csv")).len(), 3);
}

#[test]
fn config_file_layering_and_rejection() {
    let tmp = TempDir::new().unwrap();
    let ds = tmp.path().join("ds");

    // Unknown keys exit with the usage code before any work happens.
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "[synth]\npatient_count = 3\n").unwrap();
    let out = run(&[
        "synth", "--config", path_str(&bad), "--output", path_str(&ds),
    ]);
    assert_code(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("patient_count"));
    assert!(!ds.exists());

    // File values apply; flags beat the file.
    let good = tmp.path().join("good.toml");
    fs::write(&good, "seed = 9\n[synth]\npatients = 2\nduration_s = 240\n").unwrap();
    let out = run(&[
        "synth", "--config", path_str(&good), "--output", path_str(&ds), "--patients", "3",
    ]);
    assert_code(&out, 0);
    assert_eq!(fs::read_dir(&ds).unwrap().filter_map(Result::ok).count(), 10, "3 patients x 3 files + config.toml");
    let resolved = fs::read_to_string(ds.join("config.toml")).unwrap();
    assert!(resolved.contains("patients = 3"));
    assert!(resolved.contains("duration_s = 240"));
    assert!(resolved.contains("seed = 9"));
}

#[test]
fn thread_env_and_flag_validation() {
    let tmp = TempDir::new().unwrap();
    let ds = tmp.path().join("ds");
    let out = run_with_env(
        &["synth", "--output", path_str(&ds), "--patients", "2", "--duration-s", "240"],
        &[("APNEA_PIPELINE_THREADS", "many")],
    );
    assert_code(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("APNEA_PIPELINE_THREADS"));

    let out = run_with_env(
        &["synth", "--output", path_str(&ds), "--patients", "2", "--duration-s", "240"],
        &[("APNEA_PIPELINE_THREADS", "1")],
    );
    assert_code(&out, 0);
}

#[test]
fn usage_errors_exit_2() {
    // Unknown subcommand and missing required flags come from the parser.
    assert_code(&run(&["frobnicate"]), 2);
    assert_code(&run(&["train"]), 2);
    // A missing dataset directory is a usage error, not a crash.
    let tmp = TempDir::new().unwrap();
    let out = run(&[
        "preprocess", "--input", path_str(&tmp.path().join("nope")), "--output",
        path_str(&tmp.path().join("out")),
    ]);
    assert_code(&out, 2);
    // Bad model variants are rejected before touching data.
    let out = run(&[
        "train", "--data", path_str(&tmp.path().join("nope")), "--output",
        path_str(&tmp.path().join("out")), "--variant", "transformer",
    ]);
    assert_code(&out, 2);
}

fn write_minute_export(dir: &Path, subject: &str, labels: &str) {
    let minutes = labels.len();
    let samples: String = (0..minutes * 60 * 100)
        .map(|i| format!("{:.4}\n", (i as f64 * 0.07).sin()))
        .collect();
    fs::write(dir.join(format!("{subject}.ecg.txt")), samples).unwrap();
    let apn: String = labels.chars().map(|c| format!("{c}\n")).collect();
    fs::write(dir.join(format!("{subject}.apn.txt")), apn).unwrap();
}

#[test]
fn import_refuses_overwrites_without_force() {
    let tmp = TempDir::new().unwrap();
    let export = tmp.path().join("export");
    fs::create_dir(&export).unwrap();
    write_minute_export(&export, "a01", "ANA");
    write_minute_export(&export, "x01", "NNA");

    let native = tmp.path().join("native");
    let out = run(&["import", "--input", path_str(&export), "--output", path_str(&native)]);
    assert_code(&out, 0);
    assert!(native.join("a01.ecg.csv").exists());
    let manifest = fs::read_to_string(native.join("manifest.csv")).unwrap();
    assert!(manifest.contains("a01,train,3,2"), "{manifest}");
    assert!(manifest.contains("x01,test,3,1"), "{manifest}");

    let out = run(&["import", "--input", path_str(&export), "--output", path_str(&native)]);
    assert_code(&out, 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--force"));

    let out = run(&[
        "import", "--input", path_str(&export), "--output", path_str(&native), "--force",
    ]);
    assert_code(&out, 0);
}
