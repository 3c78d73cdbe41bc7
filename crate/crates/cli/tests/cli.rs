use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kd"))
        .args(args)
        .env_remove("KD_OUT_DIR")
        .output()
        .expect("kd runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(name);
    let s: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&s).unwrap()
}

fn csv_rows(text: &str) -> Vec<csv::StringRecord> {
    csv::Reader::from_reader(text.as_bytes())
        .records()
        .map(|r| r.unwrap())
        .collect()
}

#[test]
fn analyze_reports_validate_against_schema() {
    let v = schema("report.schema.json");
    for (name, case) in [
        ("tanh", "case1"),
        ("elu", "case4"),
        ("hermite:2", "case1"),
        ("relu", "case3"),
        ("sigmoid", "case2"),
    ] {
        let json: Value = serde_json::from_str(&stdout(&kd(&["analyze", name]))).unwrap();
        if let Err(e) = v.validate(&json) {
            panic!("{name}: {e}");
        }
        assert_eq!(json["case"], case);
    }
    let tanh: Value = serde_json::from_str(&stdout(&kd(&["analyze", "tanh"]))).unwrap();
    assert!((tanh["C"].as_f64().unwrap() - 0.63).abs() < 0.01);
    assert!((tanh["alpha"].as_f64().unwrap() - 0.93).abs() < 0.01);
    let elu: Value = serde_json::from_str(&stdout(&kd(&["analyze", "elu"]))).unwrap();
    assert!((elu["rho_star"].as_f64().unwrap() - 0.60).abs() < 0.01);
    let h2: Value = serde_json::from_str(&stdout(&kd(&["analyze", "hermite:2"]))).unwrap();
    assert!((h2["alpha"].as_f64().unwrap() - 0.5).abs() < 1e-9);
}

#[test]
fn table_rows() {
    let out = stdout(&kd(&["table"]));
    let mut rdr = csv::Reader::from_reader(out.as_bytes());
    let header = rdr.headers().unwrap().clone();
    let col = |n: &str| header.iter().position(|h| h == n).unwrap();
    let rows = csv_rows(&out);
    let find = |n: &str| rows.iter().find(|r| &r[0] == n).cloned();
    assert!(find("identity").is_none());
    let sig = find("sigmoid").unwrap();
    assert!((sig[col("C")].parse::<f64>().unwrap() - 0.54).abs() < 0.01);
    assert!((sig[col("kappa0")].parse::<f64>().unwrap() - 0.85).abs() < 0.01);
    let (elu, celu) = (find("elu").unwrap(), find("celu").unwrap());
    for c in ["C", "alpha", "rho_star", "kappa0", "dkappa0"] {
        let (a, b): (f64, f64) = (elu[col(c)].parse().unwrap(), celu[col(c)].parse().unwrap());
        assert!((a - b).abs() < 0.005, "{c}");
    }
    assert!(!find("relu").unwrap()[col("notes")].is_empty());
    assert!(!find("exp").unwrap()[col("notes")].is_empty());
}

#[test]
fn iterate_cubic_map() {
    let out = stdout(&kd(&["iterate", "hermite:3", "--rho0", "-0.5", "--depth", "4"]));
    let rho: Vec<f64> = csv_rows(&out).iter().map(|r| r[1].parse().unwrap()).collect();
    let want = [-0.5, -0.125, -0.001953125];
    for (a, b) in rho.iter().zip(want) {
        assert!((a - b).abs() < 1e-12);
    }
    assert_eq!(rho.len(), 5);
}

#[test]
fn simulate_identity_keeps_kernel() {
    let args = [
        "simulate", "identity", "--width", "1024", "--depth", "5", "--rho0", "0.3", "--trials", "16",
    ];
    let out = stdout(&kd(&args));
    for r in csv_rows(&out) {
        let mean: f64 = r[1].parse().unwrap();
        assert!((mean - 0.3).abs() < 0.02);
    }
    assert_eq!(out, stdout(&kd(&args)));
}

#[test]
fn figure_distance_stays_under_bound() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    stdout(&kd(&[
        "figure",
        "relu",
        "--rho0",
        "0.5",
        "--depth",
        "50",
        "--out-dir",
        d,
        "--svg",
    ]));
    for suffix in ["activation", "kernel", "sequence", "distance"] {
        assert!(dir.path().join(format!("figure_relu_{suffix}.csv")).exists());
        assert!(dir.path().join(format!("figure_relu_{suffix}.svg")).exists());
    }
    let text = fs::read_to_string(dir.path().join("figure_relu_distance.csv")).unwrap();
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 51);
    for r in rows {
        let (dist, bound): (f64, f64) = (r[1].parse().unwrap(), r[3].parse().unwrap());
        assert!(dist <= bound * (1.0 + 1e-9) + 1e-15);
    }
    let kernel = fs::read_to_string(dir.path().join("figure_relu_kernel.csv")).unwrap();
    for series in ["kernel", "identity", "cobweb"] {
        assert!(csv_rows(&kernel).iter().any(|r| &r[0] == series));
    }
}

#[test]
fn manifests_accompany_outputs_and_reproduce() {
    let v = schema("manifest.schema.json");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let run = |dir: &Path| {
        let d = dir.to_str().unwrap();
        stdout(&kd(&[
            "simulate",
            "tanh",
            "--width",
            "64",
            "--depth",
            "3",
            "--trials",
            "4",
            "--seed",
            "9",
            "--out-dir",
            d,
        ]));
        stdout(&kd(&["depth-threshold", "sigmoid", "--out-dir", d]));
        stdout(&kd(&["ode", "gelu", "--t-max", "5", "--out-dir", d]));
    };
    run(a.path());
    run(b.path());
    let mut manifests = 0;
    for entry in fs::read_dir(a.path()).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_str().unwrap().to_string();
        if name.ends_with(".manifest.json") {
            manifests += 1;
            let m: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
            if let Err(e) = v.validate(&m) {
                panic!("{name}: {e}");
            }
            for out in m["outputs"].as_array().unwrap() {
                assert!(a.path().join(out.as_str().unwrap()).exists());
            }
        } else {
            assert_eq!(
                fs::read(&path).unwrap(),
                fs::read(b.path().join(&name)).unwrap(),
                "{name}"
            );
        }
    }
    assert_eq!(manifests, 3);
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_kd"))
        .args(["analyze", "gelu"])
        .env("KD_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("analyze_gelu.json").exists());
    assert!(dir.path().join("analyze_gelu.manifest.json").exists());
}

#[test]
fn depth_threshold_json() {
    let j: Value = serde_json::from_str(&stdout(&kd(&["depth-threshold", "sigmoid"]))).unwrap();
    assert_eq!(j["case"], "case2");
    assert!(j["layers"].as_u64().unwrap() >= 47);
    let t: Value = serde_json::from_str(&stdout(&kd(&["depth-threshold", "tanh"]))).unwrap();
    assert!(t["layers"].is_null());
}

#[test]
fn output_formats() {
    let csv = stdout(&kd(&["analyze", "tanh", "--csv"]));
    assert!(csv.starts_with("name,"));
    let json: Value = serde_json::from_str(&stdout(&kd(&["table", "--json"]))).unwrap();
    assert!(json.as_array().unwrap().len() >= 8);
    let cob = stdout(&kd(&["cobweb", "sigmoid", "--steps", "3"]));
    assert_eq!(cob.lines().next(), Some("step,rho,kappa"));
    let ln = stdout(&kd(&[
        "iterate", "relu", "--norm", "ln_after", "--rho0", "0.5", "--depth", "1",
    ]));
    let second: f64 = csv_rows(&ln)[1][1].parse().unwrap();
    assert!((second - 0.4264).abs() < 5e-4);
}

#[test]
fn exit_codes() {
    assert_eq!(kd(&["analyze", "swish"]).status.code(), Some(2));
    assert_eq!(kd(&["analyze", "identity"]).status.code(), Some(2));
    assert_eq!(kd(&["iterate", "tanh", "--rho0", "1.5"]).status.code(), Some(2));
    assert_eq!(kd(&["simulate", "relu", "--weights", "cauchy"]).status.code(), Some(2));
    assert_eq!(kd(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(kd(&["table", "--svg"]).status.code(), Some(2));
    assert_eq!(kd(&["analyze", "leaky_relu:1"]).status.code(), Some(2));
    assert_eq!(
        kd(&["ode", "tanh", "--dt", "1e300", "--t-max", "1e301"]).status.code(),
        Some(3)
    );
}
