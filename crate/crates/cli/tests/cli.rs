use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn kit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bergman-kit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn a_of_n_spherical_rows_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let o = kit(&["a-of-n", "--kappa", "1", "--dim", "1", "--radius", "1", "--n", "10:100:10", "--format", "json", "--out", &out_arg(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json(&dir.path().join("a_of_n.json"));
    let rows = doc["experiments"][0]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 10);
    assert_eq!(rows[0]["oracle"], "P_κ(N)");
    let slope = doc["experiments"][0]["fit"]["slope"].as_f64().unwrap();
    assert!((slope / std::f64::consts::LN_2 - 1.0).abs() < 0.2, "{slope}");
    assert!(dir.path().join("a_of_n.gp").exists());
}

#[test]
fn a_of_n_flat_slope_near_four() {
    let dir = tempfile::tempdir().unwrap();
    let o = kit(&["a-of-n", "--kappa", "0", "--radius", "2", "--n", "5:40:5", "--format", "json", "--out", &out_arg(dir.path())]);
    assert!(o.status.success());
    let slope = json(&dir.path().join("a_of_n.json"))["summary"]["fit"]["slope"].as_f64().unwrap();
    assert!((slope - 4.0).abs() < 0.2, "{slope}");
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    let empty = kit(&["a-of-n", "--n", "20:10:5", "--out", &out]);
    assert_eq!(empty.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&empty.stderr).contains("empty N range"));
    let domain = kit(&["a-of-n", "--kappa", "-1", "--radius", "1.5", "--out", &out]);
    assert_eq!(domain.status.code(), Some(1));
    assert_eq!(kit(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(kit(&["a-of-n", "--format", "xml"]).status.code(), Some(1));
    assert_eq!(kit(&["overlap", "--dim", "2", "--out", &out]).status.code(), Some(1));
    assert_eq!(kit(&["trace", "--quad-order", "2", "--out", &out]).status.code(), Some(1));
    assert_eq!(kit(&["--help"]).status.code(), Some(0));
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn reports_are_deterministic_and_hashed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |d: &Path| {
        vec!["kernel-error".to_string(), "--kappa".into(), "1".into(), "--radius".into(), "1".into(), "--n".into(), "5:20:5".into(), "--seed".into(), "9".into(), "--out".into(), out_arg(d)]
    };
    for d in [a.path(), b.path()] {
        let args = args(d);
        let o = kit(&args.iter().map(String::as_str).collect::<Vec<_>>());
        assert!(o.status.success());
    }
    let csv_a = std::fs::read(a.path().join("kernel_error.csv")).unwrap();
    let csv_b = std::fs::read(b.path().join("kernel_error.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    let names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 2, "{names:?}");

    let j = tempfile::tempdir().unwrap();
    let mut json_args = args(j.path());
    json_args.extend(["--format".into(), "json".into()]);
    assert!(kit(&json_args.iter().map(String::as_str).collect::<Vec<_>>()).status.success());
    let mut doc = json(&j.path().join("kernel_error.json"));
    let recorded = doc.as_object_mut().unwrap().remove("sha256").unwrap();
    let digest = format!("{:x}", Sha256::digest(serde_json::to_vec(&doc).unwrap()));
    assert_eq!(recorded, Value::String(digest));
    assert_eq!(doc["config"]["seed"], 9);
    assert_eq!(doc["config"]["command"], "kernel-error");
    let csv = String::from_utf8(csv_a).unwrap();
    let csv_hash = csv.lines().find_map(|l| l.strip_prefix("# sha256 ")).unwrap();
    assert_eq!(csv_hash.len(), 64);
    assert_ne!(csv_hash, recorded.as_str().unwrap(), "format is part of the config");
    let exact = doc["summary"]["max_ln_closed_form_discrepancy"].as_f64().unwrap();
    assert!(exact < (1e-30f64).ln(), "{exact}");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# flat model\nkappa = 0\nradius = 2\nn = 5:30:5\nformat = json\n").unwrap();
    let o = kit(&["a-of-n", "--config", cfg.to_str().unwrap(), "--n", "5:15:5", "--out", &out_arg(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json(&dir.path().join("a_of_n.json"));
    assert_eq!(doc["config"]["kappa"], 0.0);
    assert_eq!(doc["config"]["n"]["stop"], 15);
    assert_eq!(doc["experiments"][0]["rows"].as_array().unwrap().len(), 3);

    std::fs::write(&cfg, "colour = red\n").unwrap();
    assert_eq!(kit(&["a-of-n", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn trace_on_cp2_matches_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let o = kit(&["trace", "--kappa", "1", "--dim", "2", "--n", "3", "--format", "json", "--out", &out_arg(dir.path())]);
    assert!(o.status.success());
    let row = &json(&dir.path().join("trace.json"))["experiments"][0]["rows"][0];
    assert!((row["computed_log"].as_f64().unwrap() - 10f64.ln()).abs() < 1e-12);
    assert!((row["reference_log"].as_f64().unwrap() - 10f64.ln()).abs() < 1e-15);
}

#[test]
fn torus_trace_is_level() {
    let dir = tempfile::tempdir().unwrap();
    let o = kit(&["trace", "--tau", "0.2,1.1", "--n", "3:9:3", "--format", "json", "--out", &out_arg(dir.path())]);
    assert!(o.status.success());
    for (row, n) in json(&dir.path().join("trace.json"))["experiments"][0]["rows"].as_array().unwrap().iter().zip([3.0f64, 6.0, 9.0]) {
        assert!((row["computed_log"].as_f64().unwrap() - n.ln()).abs() < 1e-10);
    }
}

#[test]
fn flat_overlap_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = kit(&["overlap", "--kappa", "0", "--radius", "2", "--y", "0.3,0", "--n", "10:30:10", "--format", "json", "--out", &out_arg(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json(&dir.path().join("overlap.json"));
    for row in doc["experiments"][0]["rows"].as_array().unwrap() {
        let rel = row["log_error"].as_f64().unwrap() - row["reference_log"].as_f64().unwrap();
        assert!(rel < -35.0, "{row}");
    }
    let c = doc["summary"]["gaussian_bound"]["c"].as_f64().unwrap();
    assert!((c - 0.5).abs() < 1e-6, "{c}");
}
