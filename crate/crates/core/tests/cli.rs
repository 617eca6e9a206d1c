#![allow(clippy::excessive_precision)]

use std::process::Command;

use bufrelay::cli::{ExperimentSpec, Manifest};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bufrelay"))
}

fn read_csv(path: &std::path::Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

#[test]
fn analyze_single_relay_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.csv");
    let status = bin()
        .args(["analyze", "--relays", "1", "--snr-db", "10", "--out"])
        .arg(&out)
        .output()
        .map(|o| o.status)
        .unwrap();
    assert!(status.success());
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let rows: Vec<_> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 1);
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let ba: f64 = rows[0][col("rate_analytical")].parse().unwrap();
    let conv: f64 = rows[0][col("rate_conventional_analytical")].parse().unwrap();
    assert!((ba - 1.8292913926563601).abs() < 1e-12);
    assert!((conv - 1.0772234157584448).abs() < 1e-12);
}

#[test]
fn rate_vs_m_is_monotone_with_shrinking_increments() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.csv");
    let relays: Vec<String> = (1..=30).map(|m| m.to_string()).collect();
    let status = bin()
        .args(["analyze", "--experiment", "rate-vs-m", "--snr-db", "10", "--relays", &relays.join(",")])
        .arg("--out")
        .arg(&out)
        .output()
        .map(|o| o.status)
        .unwrap();
    assert!(status.success());
    let rows = read_csv(&out);
    assert_eq!(rows.len(), 30);
    let rates: Vec<f64> = rows.iter().map(|r| r[7].parse().unwrap()).collect();
    let steps: Vec<f64> = rates.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(steps.iter().all(|s| *s > 0.0));
    assert!(steps.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn simulate_writes_rows_in_sweep_order_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .env("BUFRELAY_OUT_DIR", dir.path())
        .args([
            "simulate",
            "--snr-db=-5,10",
            "--relays",
            "2",
            "--protocol",
            "conventional,max-link,delay-limited",
            "--delay-target",
            "5,10",
            "--slots",
            "5000",
            "--seed",
            "7",
        ])
        .output()
        .map(|o| o.status)
        .unwrap();
    assert!(status.success());
    let data = dir.path().join("rate-vs-snr.csv");
    let rows = read_csv(&data);
    let keys: Vec<(String, String, String)> = rows
        .iter()
        .map(|r| (r[1].to_string(), r[3].to_string(), r[4].to_string()))
        .collect();
    let want = |s: &str| {
        vec![
            (s.to_string(), "conventional".to_string(), String::new()),
            (s.to_string(), "max-link".to_string(), String::new()),
            (s.to_string(), "delay-limited".to_string(), "5.0".to_string()),
            (s.to_string(), "delay-limited".to_string(), "10.0".to_string()),
        ]
    };
    assert_eq!(keys, [want("-5.0"), want("10.0")].concat());
    assert!(rows.iter().all(|r| r[15].is_empty()));

    let manifest: Manifest =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("rate-vs-snr.csv.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest.seed, 7);
    assert_eq!(manifest.version, env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest.config_hash, manifest.spec.config_hash());
    assert_eq!(manifest.rows, 8);
}

#[test]
fn records_format_is_line_delimited_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.jsonl");
    let status = bin()
        .args(["analyze", "--relays", "1,2", "--format", "records", "--out"])
        .arg(&out)
        .output()
        .map(|o| o.status)
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1]["m"], 2);
}

#[test]
fn bad_omega_length_exits_nonzero_naming_field() {
    let out = bin()
        .args(["simulate", "--relays", "5", "--omega-sr", "0.5,1,1.5,2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("omega_sr"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    let spec = ExperimentSpec {
        relays: vec![3],
        snr_db: vec![0.0],
        ..ExperimentSpec::default()
    };
    std::fs::write(&cfg, spec.to_toml().unwrap()).unwrap();
    let out = dir.path().join("o.csv");
    let status = bin()
        .args(["analyze", "--config"])
        .arg(&cfg)
        .args(["--snr-db", "20", "--out"])
        .arg(&out)
        .output()
        .map(|o| o.status)
        .unwrap();
    assert!(status.success());
    let rows = read_csv(&out);
    assert_eq!((&rows[0][1], &rows[0][2]), ("20.0", "3"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "relays = [1]\nslots = 10\n").unwrap();
    let out = bin().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("slots"));
}

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let flags = bufrelay::cli::SweepArgs::default();
        bufrelay::cli::parse_config(Some(&path), &flags).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 4);
}
