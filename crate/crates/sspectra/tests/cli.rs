//! End-to-end CLI coverage: subcommands, exit codes, artifact formats, and
//! determinism / stage-isolation contracts.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sspectra"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL_CIRCLE: &str = r#"{
  "measure": {"kind": "circle", "resolutions": [256, 384], "radius": 1.0},
  "kernel": {"type": "riesz", "theta": 0.5, "amplitude": 1.0},
  "weights": {"kind": "constant", "value": 1.0},
  "diagonal_rule": "ball_average",
  "tolerances": {"exponent_rel": 0.10, "coefficient_rel": 0.30}
}"#;

fn strip_timings(report_path: &Path) -> String {
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(report_path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("timings");
    serde_json::to_string(&v).unwrap()
}

#[test]
fn run_and_verify_pass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL_CIRCLE);
    let out = dir.path().join("out");
    let status = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for name in [
        "measure_256.json",
        "measure_384.json",
        "matrix_256.sspm",
        "matrix_256.sspm.provenance.json",
        "matrix_384.sspm",
        "spectrum_256.csv",
        "spectrum_384.csv",
        "report.json",
    ] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let output = bin()
        .args(["verify", "--report"])
        .arg(out.join("report.json"))
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("PASS exponent"));
    assert!(text.contains("PASS coefficient"));
}

#[test]
fn run_twice_is_deterministic_modulo_timings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL_CIRCLE);
    let out1 = dir.path().join("out1");
    let out2 = dir.path().join("out2");
    for out in [&out1, &out2] {
        let status = bin()
            .args(["run", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_eq!(
        strip_timings(&out1.join("report.json")),
        strip_timings(&out2.join("report.json"))
    );
    for name in ["measure_384.json", "matrix_384.sspm", "spectrum_384.csv"] {
        assert_eq!(
            std::fs::read(out1.join(name)).unwrap(),
            std::fs::read(out2.join(name)).unwrap(),
            "{name} differs"
        );
    }
}

#[test]
fn stage_isolation_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL_CIRCLE);
    let run_out = dir.path().join("run");
    assert!(bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&run_out)
        .status()
        .unwrap()
        .success());

    // assemble separately, then decompose the persisted matrix
    let stage_out = dir.path().join("stage");
    assert!(bin()
        .args(["assemble", "--config"])
        .arg(&cfg)
        .args(["--resolution", "384", "--out"])
        .arg(&stage_out)
        .status()
        .unwrap()
        .success());
    assert_eq!(
        std::fs::read(run_out.join("matrix_384.sspm")).unwrap(),
        std::fs::read(stage_out.join("matrix_384.sspm")).unwrap(),
        "assemble stage must reproduce the run's matrix bytes"
    );
    assert!(bin()
        .args(["spectrum", "--matrix"])
        .arg(stage_out.join("matrix_384.sspm"))
        .args(["--resolution", "384", "--out"])
        .arg(&stage_out)
        .status()
        .unwrap()
        .success());
    assert_eq!(
        std::fs::read(run_out.join("spectrum_384.csv")).unwrap(),
        std::fs::read(stage_out.join("spectrum_384.csv")).unwrap(),
        "spectrum stage must reproduce the run's CSV bytes"
    );

    // fit the persisted spectrum and compare against the report
    let output = bin()
        .args(["fit", "--spectrum"])
        .arg(stage_out.join("spectrum_384.csv"))
        .output()
        .unwrap();
    assert!(output.status.success());
    let fit: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_out.join("report.json")).unwrap())
            .unwrap();
    let p_run = report["levels"][1]["fit"]["p_hat"].as_f64().unwrap();
    let p_fit = fit["p_hat"].as_f64().unwrap();
    assert_eq!(
        p_run.to_bits(),
        p_fit.to_bits(),
        "fit stage must be bit-exact"
    );
}

#[test]
fn measure_subcommand_writes_schema_document() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL_CIRCLE);
    let out = dir.path().join("m");
    assert!(bin()
        .args(["measure", "--config"])
        .arg(&cfg)
        .args(["--resolution", "256", "--out"])
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("measure_256.json")).unwrap())
            .unwrap();
    assert_eq!(doc["ambient_dim"], 2);
    assert_eq!(doc["kind"], "circle");
    assert_eq!(doc["d"], 1);
    assert_eq!(doc["dF"], 1);
    assert_eq!(doc["atoms"].as_array().unwrap().len(), 256);
    assert!(doc["atoms"][0]["x"].is_array());
    assert!(doc["atoms"][0]["w"].is_number());
    assert_eq!(doc["tangent_frames"].as_array().unwrap().len(), 256);
}

#[test]
fn sspm_header_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL_CIRCLE);
    let out = dir.path().join("a");
    assert!(bin()
        .args(["assemble", "--config"])
        .arg(&cfg)
        .args(["--resolution", "256", "--out"])
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let bytes = std::fs::read(out.join("matrix_256.sspm")).unwrap();
    assert_eq!(&bytes[0..4], b"SSPM");
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1); // version
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 256); // dim
    assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()) & 1, 1); // hermitian
    assert_eq!(bytes.len(), 16 + 256 * 256 * 16);
    // provenance sidecar carries the content hashes
    let prov: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out.join("matrix_256.sspm.provenance.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(prov["diagonal_rule"], "ball_average");
    assert_eq!(prov["measure_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn spectrum_csv_format() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL_CIRCLE);
    let out = dir.path().join("s");
    assert!(bin()
        .args(["spectrum", "--config"])
        .arg(&cfg)
        .args(["--resolution", "256", "--out"])
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let text = std::fs::read_to_string(out.join("spectrum_256.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "index,value,sign");
    let first = lines.next().unwrap();
    assert!(first.starts_with("1,"));
    assert!(first.ends_with(",+") || first.ends_with(",-"));
    assert_eq!(text.lines().count(), 257);
}

#[test]
fn validation_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    // l = N - theta = 0.5 does not exceed dF = 1
    let bad = write_config(
        dir.path(),
        "bad.json",
        r#"{
          "measure": {"kind": "circle", "resolutions": [128]},
          "kernel": {"type": "riesz", "theta": 1.5}
        }"#,
    );
    let output = bin()
        .args(["run", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.path().join("x"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("codimension"));

    // non-increasing resolutions
    let bad = write_config(
        dir.path(),
        "bad2.json",
        r#"{
          "measure": {"kind": "circle", "resolutions": [256, 128]},
          "kernel": {"type": "riesz", "theta": 0.5}
        }"#,
    );
    let output = bin()
        .args(["run", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.path().join("y"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn verdict_failure_exits_one_and_verify_agrees() {
    let dir = tempfile::tempdir().unwrap();
    // absurdly tight exponent tolerance forces a verdict failure
    let cfg = write_config(
        dir.path(),
        "tight.json",
        r#"{
          "measure": {"kind": "circle", "resolutions": [256]},
          "kernel": {"type": "riesz", "theta": 0.5},
          "tolerances": {"exponent_rel": 0.0001, "coefficient_rel": 0.3}
        }"#,
    );
    let out = dir.path().join("out");
    let output = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stdout).contains("FAIL exponent"));
    let status = bin()
        .args(["verify", "--report"])
        .arg(out.join("report.json"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    // overriding the tolerance flips the verdict without re-running
    let status = bin()
        .args(["verify", "--report"])
        .arg(out.join("report.json"))
        .args(["--exponent-rel", "0.5"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
}

#[test]
fn verify_rejects_malformed_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{\"config\": {}}").unwrap();
    let output = bin()
        .args(["verify", "--report"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("malformed report"));
}

#[test]
fn oracle_subcommand() {
    let output = bin()
        .args(["oracle", "--theta", "0.5", "--n-max", "16"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let v: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    let c_inf = v["c_inf"].as_f64().unwrap();
    let want = (2.0 * std::f64::consts::PI).sqrt();
    assert!((c_inf - want).abs() < 0.01 * want);
    assert_eq!(v["coeffs"].as_array().unwrap().len(), 17);

    let output = bin()
        .args(["oracle", "--theta", "0.0", "--n-max", "8", "--log"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let v: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(v["coeffs"][0], 0.0);
    let g1 = v["coeffs"][1].as_f64().unwrap();
    assert!((g1 - std::f64::consts::PI).abs() < 1e-12);
}

#[test]
fn predict_subcommand_normalizations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL_CIRCLE);
    let canonical = bin()
        .args(["predict", "--config"])
        .arg(&cfg)
        .args(["--resolution", "256", "--normalization", "canonical"])
        .output()
        .unwrap();
    assert!(canonical.status.success());
    let v: serde_json::Value = serde_json::from_slice(&canonical.stdout).unwrap();
    let a_can = v["A_plus"].as_f64().unwrap();
    assert!((a_can - 4.0 * std::f64::consts::PI).abs() < 1e-9);
    // prediction document carries the convention table and the oracle pin
    assert!((v["sigma_w"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!(v["exponent_table"]["canonical"]["combined"].is_number());
    assert!(v["exponent_table"]["paper_s2"].is_object());
    assert!(v["exponent_table"]["paper_thm32"].is_object());
    let c_inf = v["oracle"]["c_inf"].as_f64().unwrap();
    assert!((c_inf - (2.0 * std::f64::consts::PI).sqrt()).abs() < 0.01);

    let paper = bin()
        .args(["predict", "--config"])
        .arg(&cfg)
        .args(["--resolution", "256", "--normalization", "paper"])
        .output()
        .unwrap();
    let v: serde_json::Value = serde_json::from_slice(&paper.stdout).unwrap();
    let a_pap = v["A_plus"].as_f64().unwrap();
    assert!((a_pap / a_can - 2.0 * std::f64::consts::PI).abs() < 1e-12);
}

#[test]
fn per_atom_weight_file() {
    let dir = tempfile::tempdir().unwrap();
    let weights: Vec<String> = (0..256)
        .map(|i| format!("{}", 1.0 + 0.001 * i as f64))
        .collect();
    let wpath = dir.path().join("w.txt");
    std::fs::write(&wpath, weights.join("\n")).unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &format!(
            r#"{{
              "measure": {{"kind": "circle", "resolutions": [256]}},
              "kernel": {{"type": "riesz", "theta": 0.5}},
              "weights": {{"kind": "per_atom_file", "path": {:?}}},
              "tolerances": {{"exponent_rel": 0.5, "coefficient_rel": 0.5}}
            }}"#,
            wpath.to_str().unwrap()
        ),
    );
    let out = dir.path().join("out");
    let status = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
}
