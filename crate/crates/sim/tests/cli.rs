//! Runs the `crossbar` binary end to end in a scratch directory.

use std::path::Path;
use std::process::{Command, Output};

fn crossbar(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crossbar"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn xor_train_infer_and_heatmap() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let train = crossbar(out, &["train", "xor", "--check"]);
    assert!(train.status.success(), "{}", String::from_utf8_lossy(&train.stderr));
    assert!(stdout(&train).contains("training accuracy 1"));
    let model = out.join("xor.model.json");
    let model = model.to_str().unwrap();

    let infer = crossbar(out, &["infer", "--model", model, "--input", "1,0", "--trace"]);
    assert!(infer.status.success());
    let text = stdout(&infer);
    let value: f64 = text.lines().find_map(|l| l.strip_prefix("output: ")).unwrap().parse().unwrap();
    assert!(value >= 0.98, "{text}");
    assert!(text.contains("sub-operations per layer: [1, 1]"));
    let trace = std::fs::read_to_string(out.join("trace.txt")).unwrap();
    assert_eq!(trace.lines().count(), 2);

    let heat = crossbar(out, &["xor-heatmap", "--model", model, "--resolution", "1", "--check"]);
    assert!(heat.status.success(), "{}", stdout(&heat));
    let csv = std::fs::read_to_string(out.join("xor_heatmap.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
}

#[test]
fn sweeps_are_byte_reproducible_under_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let args = ["sweep", "noise", "--trials", "20", "--sigmas", "0,100", "--seed", "9"];
    assert!(crossbar(&a, &args).status.success());
    assert!(crossbar(&b, &[&args[..], &["--threads", "1"]].concat()).status.success());
    let read = |d: &Path| std::fs::read(d.join("noise.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    let text = String::from_utf8(read(&a)).unwrap();
    assert!(text.starts_with("sigma_kind,sigma_ohm,rmse_mean,rmse_stddev,trials\n"));
    assert_eq!(text.lines().count(), 1 + 4);
}

#[test]
fn bad_invocations_fail_before_work() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let unknown = crossbar(out, &["sweep", "quantization", "--bogus"]);
    assert!(!unknown.status.success());
    let missing = crossbar(out, &["infer", "--model", "nope.json", "--input", "1,0"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("does not exist"));
    let no_data = crossbar(out, &["train", "mnist", "--mnist-dir", out.to_str().unwrap()]);
    assert_eq!(no_data.status.code(), Some(2));
    assert!(!out.join("mnist.model.json").exists());
}

#[test]
fn check_flag_sets_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let ok = crossbar(dir.path(), &["sweep", "quantization", "--trials", "200", "--check"]);
    assert!(ok.status.success(), "{}", stdout(&ok));
    assert!(stdout(&ok).contains("[PASS] criterion 5"));
    // a repeated state count cannot give a strictly decreasing curve
    let bad = crossbar(dir.path(), &["sweep", "quantization", "--trials", "50", "--n-values", "4,4", "--check"]);
    assert_eq!(bad.status.code(), Some(1));
}
