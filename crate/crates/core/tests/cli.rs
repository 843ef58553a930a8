use std::fs;
use std::path::Path;
use std::process::Command;

fn pcompact(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_pcompact"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn scenario(dir: &Path, text: &str) -> String {
    let p = dir.join("scenario.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn hyperbolic_compactness_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(
        dir.path(),
        "[metric]\nbuiltin = \"hyperbolic\"\nn = 1\n[task]\nalpha = 2.0\nbase_points = [[0.2], [-0.4]]\n",
    );
    let (code, out, _) = pcompact(&["compactness", "--config", &cfg]);
    assert_eq!(code, 0);
    let r = json(&out);
    assert_eq!(r["results"]["report"]["verdict"], "compact");
    let keys: Vec<&String> = r.as_object().unwrap().keys().collect();
    assert_eq!(keys.len(), 4);
    assert!(out.find("\"scenario\"").unwrap() < out.find("\"results\"").unwrap());
    assert!(out.find("\"diagnostics\"").unwrap() < out.find("\"versions\"").unwrap());
}

#[test]
fn minkowski_orbit_classes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(
        dir.path(),
        "[metric]\nbuiltin = \"flat_hemisphere\"\nn = 2\nsignature = [2, 1]\n[task]\nbase_points = [[0.3, 0.2], [0.6, 0.8]]\n",
    );
    let out_dir = dir.path().join("out");
    let (code, _, _) = pcompact(&[
        "orbits",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--format",
        "both",
    ]);
    assert_eq!(code, 0);
    let r = json(&fs::read_to_string(out_dir.join("report.json")).unwrap());
    assert_eq!(r["results"]["points"][0]["class"], "plus_minus");
    assert_eq!(r["results"]["points"][1]["class"], "zero");
    let csv = fs::read_to_string(out_dir.join("orbits.csv")).unwrap();
    assert!(
        csv.starts_with("u1,u2,u0,rank,class") || csv.starts_with("u0,u1,u2,rank,class"),
        "{csv}"
    );
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn malformed_expression_exits_one_with_offset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(
        dir.path(),
        "[metric]\ncoords = [\"x\", \"r\"]\ndomain = [[-1.0, 1.0], [0.0, 1.0]]\nboundary = \"r\"\nsignature = [2, 0]\ncomponents = [\"1/r\", \"0\", \"0\", \"1/(4*r^^2)\"]\n[task]\nalpha = 2.0\n",
    );
    let (code, _, err) = pcompact(&["compactness", "--config", &cfg]);
    assert_eq!(code, 1);
    assert!(
        err.contains("metric.components[3]") && err.contains("byte"),
        "{err}"
    );
}

#[test]
fn missing_config_is_invalid_input() {
    let (code, _, _) = pcompact(&["order", "--config", "/nonexistent/scenario.toml"]);
    assert_eq!(code, 1);
    let (code, _, _) = pcompact(&["bogus-task", "--config", "x.toml"]);
    assert_eq!(code, 1);
}

#[test]
fn task_failure_is_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(
        dir.path(),
        "[metric]\nbuiltin = \"hyperbolic\"\nn = 1\n[task]\nsamples = 2\n",
    );
    let (code, out, _) = pcompact(&["orbits", "--config", &cfg]);
    assert_eq!(code, 0);
    let r = json(&out);
    assert!(r["results"].is_null());
    assert_eq!(r["diagnostics"][0]["level"], "error");
    assert!(r["diagnostics"][0]["message"]
        .as_str()
        .unwrap()
        .contains("Ricci flat"));
}

#[test]
fn empty_geodesic_batch_gives_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(
        dir.path(),
        "[metric]\nbuiltin = \"hyperbolic\"\nn = 1\n[task]\ninitial = []\n",
    );
    let out_dir = dir.path().join("out");
    let (code, _, _) = pcompact(&[
        "geodesics",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(code, 0);
    let csv = fs::read_to_string(out_dir.join("geodesics.csv")).unwrap();
    assert_eq!(csv, "run,t,x1,rho,v_x1,v_rho,rho_value\r\n");
    assert!(!out_dir.join("report.json").exists());
}

#[test]
fn geodesic_csv_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(
        dir.path(),
        "[metric]\nbuiltin = \"hyperbolic\"\nn = 1\n[task]\nalpha = 2.0\nt_max = 3.0\ninitial = [[[0.0, 1.0], [0.0, -2.0]]]\n",
    );
    let out_dir = dir.path().join("out");
    let (code, _, _) = pcompact(&[
        "geodesics",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--format",
        "both",
    ]);
    assert_eq!(code, 0);
    let mut rdr = csv::Reader::from_path(out_dir.join("geodesics.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert!(rows.len() > 10);
    for r in &rows {
        let t: f64 = r[1].parse().unwrap();
        let rho: f64 = r[6].parse().unwrap();
        assert!((rho - (-2.0 * t).exp()).abs() < 1e-7);
    }
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(
        dir.path(),
        "[metric]\nbuiltin = \"hyperbolic\"\nn = 2\n[task]\nalpha = 2.0\nsamples = 3\n",
    );
    let (_, a, _) = pcompact(&[
        "compactness",
        "--config",
        &cfg,
        "--seed",
        "11",
        "--threads",
        "1",
    ]);
    let (_, b, _) = pcompact(&[
        "compactness",
        "--config",
        &cfg,
        "--seed",
        "11",
        "--threads",
        "4",
    ]);
    let (_, c, _) = pcompact(&["compactness", "--config", &cfg, "--seed", "12"]);
    assert_eq!(a, b);
    assert_ne!(a, c);
}
