use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn aphom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aphom")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const FIELD: &str = r#"{"dim":2,"m":1,"mu":0.45,"const":[[2.0,0.3],[0.3,1.0]],"modes":[]}"#;

fn effective_config(threshold: f64) -> String {
    format!(
        r#"{{"name":"t","kind":"effective","field":"field.json","params":{{"t":4.0,"oracle":[[2.0,0.3],[0.3,1.0]]}},
            "assertions":[{{"id":"gap","metric":"value.oracleGap","op":"<=","value":{threshold}}}]}}"#
    )
}

#[test]
fn passing_run_exits_zero_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "field.json", FIELD);
    let cfg = write(dir.path(), "c.json", &effective_config(1e-9));
    let out = dir.path().join("out");
    let o = aphom(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS gap"));
    assert!(out.join("report.json").exists());
}

#[test]
fn failed_assertion_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "field.json", FIELD);
    let cfg = write(dir.path(), "c.json", &effective_config(-1.0));
    let out = dir.path().join("out");
    let o = aphom(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL gap"));
}

#[test]
fn malformed_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"name":"x","kind":"no-such-kind"}"#);
    assert_eq!(aphom(&["run", &cfg]).status.code(), Some(2));
    let cfg = write(dir.path(), "d.json", r#"{"name":"x","kind":"effective","params":{"t":4.0,"bogus":1}}"#);
    assert_eq!(aphom(&["run", &cfg]).status.code(), Some(2));
}

#[test]
fn non_elliptic_field_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "field.json", r#"{"dim":1,"m":1,"mu":0.5,"const":[[0.1]],"modes":[]}"#);
    let cfg = write(dir.path(), "c.json", r#"{"name":"x","kind":"effective","field":"field.json","params":{"t":4.0}}"#);
    let out = dir.path().join("out");
    assert_eq!(aphom(&["run", &cfg, "--out", out.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn fit_recovers_power_law() {
    let dir = tempfile::tempdir().unwrap();
    let rows: String = (1..=5)
        .map(|k| {
            let x = 2f64.powi(-k);
            format!("{x},{}\n", 3.0 * x.powf(1.5))
        })
        .collect();
    let csv = write(dir.path(), "s.csv", &format!("x,y\n{rows}"));
    let o = aphom(&["fit", &csv]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["slope"].as_f64().unwrap() - 1.5).abs() < 1e-10);
}

#[test]
fn field_check_accepts_shipped_field() {
    let dir = tempfile::tempdir().unwrap();
    let field = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fields/harmonic1d.json");
    let out = dir.path().join("out");
    let o = aphom(&["field-check", field.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}
