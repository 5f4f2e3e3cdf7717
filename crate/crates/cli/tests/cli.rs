use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn polyseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyseg")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn resample_square_and_zero_loss() {
    let dir = tempfile::tempdir().unwrap();
    let labels = dir.path().join("sq.txt");
    fs::write(&labels, "0 0\n4 0\n4 4\n0 4\n").unwrap();
    let chain = dir.path().join("c.json");
    let out = polyseg(&["resample", "--labels", p(&labels), "--center", "2,2", "--nv", "4", "--out", p(&chain)]);
    assert!(out.status.success());
    let c: serde_json::Value = serde_json::from_str(&fs::read_to_string(&chain).unwrap()).unwrap();
    assert_eq!(c["radii"], serde_json::json!([2.0, 2.0, 2.0, 2.0]));
    assert_eq!(c["center"], serde_json::json!([2.0, 2.0]));

    let out = polyseg(&["loss", "--pred", p(&chain), "--gt", p(&chain), "--backend", "exact", "--grad"]);
    assert!(out.status.success());
    let r = stdout_json(&out);
    assert_eq!(r["value"], 0.0);
    assert_eq!(r["backend"], "exact");
    assert_eq!(r["grad"].as_array().unwrap().len(), 4);
}

#[test]
fn auto_center_uses_image_size() {
    let dir = tempfile::tempdir().unwrap();
    let labels = dir.path().join("sq.txt");
    fs::write(&labels, "0.5 0.5\n4.5 0.5\n4.5 4.5\n0.5 4.5\n").unwrap();
    let out = polyseg(&["resample", "--labels", p(&labels), "--size", "6", "--nv", "4"]);
    assert!(out.status.success());
    assert_eq!(stdout_json(&out)["radii"], serde_json::json!([2.0, 2.0, 2.0, 2.0]));
}

#[test]
fn gradcheck_reports_summary() {
    let out = polyseg(&["gradcheck", "--backend", "exact", "--trials", "1000", "--tol", "1e-4"]);
    assert!(out.status.success());
    let s = stdout_json(&out);
    assert_eq!(s["trials"], 1000);
    assert!(s["pass_rate"].as_f64().unwrap() >= 0.99);
    assert_eq!(s["ok"], true);
}

#[test]
fn exit_codes() {
    let out = polyseg(&["resample", "--nv", "4"]);
    assert_eq!(out.status.code(), Some(2));
    let out = polyseg(&["resample", "--labels", "x.txt", "--center", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    let out = polyseg(&["loss", "--pred", "/nonexistent/a.json", "--gt", "/nonexistent/b.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"].as_str().unwrap().contains("/nonexistent/a.json"));
}

#[test]
fn errata_report_writes_all_cases() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("errata.json");
    let out = polyseg(&["errata-report", "--trials", "50", "--out", p(&out_path)]);
    assert!(out.status.success());
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(r["cases"].as_array().unwrap().len(), 6);
    assert!(String::from_utf8_lossy(&out.stdout).contains("case II denominator"));
}

#[test]
fn pipeline_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ok = |args: &[&str]| {
        let out = polyseg(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        out
    };
    let syn = d.join("syn");
    ok(&["synth", "--count", "24", "--out", p(&syn), "--log-level", "quiet"]);
    ok(&["augment", "--manifest", p(&syn.join("manifest.json")), "--out", p(&d.join("aug")), "--log-level", "quiet"]);
    assert_eq!(fs::read_dir(d.join("aug/images")).unwrap().count(), 120);
    let run = d.join("run");
    ok(&[
        "train", "--synth-dir", p(&syn), "--epochs", "2", "--channels", "4,8", "--hidden", "16", "--out", p(&run),
        "--log-level", "quiet",
    ]);
    for f in ["model.pcsg", "train_log.jsonl", "train_manifest.json", "val_manifest.json", "config.json"] {
        assert!(run.join(f).exists(), "{f}");
    }
    assert_eq!(fs::read_to_string(run.join("train_log.jsonl")).unwrap().lines().count(), 2);
    let pred = d.join("pred");
    let out = ok(&[
        "eval", "--model", p(&run.join("model.pcsg")), "--manifest", p(&run.join("val_manifest.json")),
        "--resolution", "256", "--csv", p(&d.join("m.csv")), "--hist", p(&d.join("h.csv")), "--pred-dir", p(&pred),
    ]);
    let s = stdout_json(&out);
    assert!(s["radial_error_std"].is_f64());
    assert!(fs::read_to_string(d.join("h.csv")).unwrap().starts_with("bin_left,bin_right,count\n"));
    let first = fs::read_dir(&pred).unwrap().next().unwrap().unwrap().path();
    let id = first.file_stem().unwrap().to_str().unwrap();
    ok(&[
        "render", "--image", p(&syn.join(format!("images/{id}.png"))), "--pred", p(&first),
        "--gt-lumen", p(&syn.join(format!("labels/{id}.lum.txt"))),
        "--gt-media", p(&syn.join(format!("labels/{id}.med.txt"))), "--out", p(&d.join("o.png")),
    ]);
    assert!(d.join("o.png").exists());
}
