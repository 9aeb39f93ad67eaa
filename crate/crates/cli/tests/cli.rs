use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bcmac_cli::persist::{load_record, sidecar_path};
use bcmac_cli::{Cell, Table};
use bcmac_core::prob::LogBase;

const SYSTEM: &str = "P=10,N1=1,N2=2,N3=5,alpha1=0.9,alpha2=0.9";

fn bcmac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bcmac"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
        .display()
        .to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// The erasure cascade with the erasure removed from the MAC.
fn xor_cascade(dir: &Path) -> PathBuf {
    let text = fs::read_to_string(data("erasure_cascade.json")).unwrap();
    let text = text
        .replace("[0.1, 0.0, 0.9]", "[1.0, 0.0, 0.0]")
        .replace("[0.0, 0.1, 0.9]", "[0.0, 1.0, 0.0]");
    let path = dir.join("xor.json");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn gaussian_frontier_has_101_rows_of_6_columns() {
    let o = bcmac(&["region-gaussian", "--system", SYSTEM, "--grid", "101"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = Table::from_csv(&stdout(&o), "gaussian-frontier", LogBase::Nats).unwrap();
    assert_eq!(t.rows.len(), 101);
    assert_eq!(t.columns, ["alpha", "id1", "id2", "data1", "data2", "data_sum"]);
    assert_eq!(t.rows[100][1].as_f64().unwrap(), 1.1989476364);
}

#[test]
fn zero_trials_is_a_validation_error_naming_the_field() {
    let o = bcmac(&[
        "simulate-discrete",
        "--channel-file",
        &data("erasure_cascade.json"),
        "--rates",
        "scale:0.7",
        "--n",
        "64",
        "--trials",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--trials"), "{}", stderr(&o));
}

#[test]
fn oversized_codes_are_infeasible() {
    let o = bcmac(&[
        "simulate-gaussian",
        "--system",
        SYSTEM,
        "--rates",
        "scale:0.5",
        "--alpha",
        "0.5",
        "--n",
        "128",
        "--trials",
        "100",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("infeasible"));
}

#[test]
fn missing_and_malformed_channel_files() {
    let o = bcmac(&["region-discrete", "--channel-file", "/no/such/file.json"]);
    assert_eq!(o.status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(data("erasure_cascade.json"))
        .unwrap()
        .replace("[0.0025, 0.0475, 0.0475, 0.9025]", "[0.0025, 0.0475, 0.0475, 0.8025]");
    let bad = dir.path().join("bad.json");
    fs::write(&bad, text).unwrap();
    let o = bcmac(&["region-discrete", "--channel-file", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 8"), "{}", stderr(&o));
}

#[test]
fn unknown_flags_exit_one_and_help_exits_zero() {
    assert_eq!(bcmac(&["region-gaussian", "--bogus"]).status.code(), Some(1));
    assert_eq!(bcmac(&["--help"]).status.code(), Some(0));
}

#[test]
fn persisted_runs_are_byte_identical_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &Path| {
        vec![
            "simulate-discrete".to_string(),
            "--channel-file".into(),
            data("erasure_cascade.json"),
            "--rates".into(),
            "scale:0.7".into(),
            "--epsilon".into(),
            "0.0178".into(),
            "--epsilon-mac".into(),
            "0.15".into(),
            "--n".into(),
            "32,64".into(),
            "--trials".into(),
            "200".into(),
            "--seed".into(),
            "42".into(),
            "--out".into(),
            out.display().to_string(),
        ]
    };
    let a = dir.path().join("a/run.csv");
    let b = dir.path().join("b/run.csv");
    for out in [&a, &b] {
        let o = Command::new(env!("CARGO_BIN_EXE_bcmac")).args(args(out)).output().unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let record = load_record(&sidecar_path(&a)).unwrap();
    assert_eq!(record.config.seed, 42);
    assert_eq!(record.rows, 2);
    assert!(record.version.starts_with('v'));
    assert!(record.config.channel_spec.is_some());

    let meta = sidecar_path(&a).display().to_string();
    let o = bcmac(&["replay", &meta]);
    assert!(o.status.success(), "{}", stderr(&o));

    let mut tampered = fs::read_to_string(&a).unwrap();
    tampered = tampered.replacen("200", "201", 1);
    fs::write(&a, tampered).unwrap();
    assert_eq!(bcmac(&["replay", &meta]).status.code(), Some(1));
}

#[test]
fn json_payloads_carry_a_schema_version() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rfid.json");
    let o = bcmac(&["rfid-report", "--system", SYSTEM, "--n", "16", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["unit"], "nats");
    let t = Table::from_json(&text).unwrap();
    assert_eq!(t.rows.len(), 2);
    assert_eq!(t.rows[0][0], Cell::Text("tdma".into()));
}

#[test]
fn sweeping_n_gives_one_row_per_value() {
    let o = bcmac(&[
        "sweep",
        "--target",
        "simulate-discrete",
        "--axis",
        "n",
        "--values",
        "64,128,256",
        "--channel-file",
        &data("erasure_cascade.json"),
        "--rates",
        "scale:0.7",
        "--epsilon",
        "0.0178",
        "--epsilon-mac",
        "0.15",
        "--trials",
        "100",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = Table::from_csv(&stdout(&o), "simulation-sweep", LogBase::Nats).unwrap();
    assert_eq!(t.rows.len(), 3);
    let ns: Vec<_> = t.column_cells("n").unwrap().into_iter().cloned().collect();
    assert_eq!(ns, [Cell::Int(64), Cell::Int(128), Cell::Int(256)]);
    assert!(t.column_cells("status").unwrap().iter().all(|c| c.as_str() == Some("ok")));
}

#[test]
fn empty_sweep_axis_is_a_usage_error() {
    let o = bcmac(&[
        "sweep",
        "--target",
        "region-gaussian",
        "--axis",
        "alpha",
        "--values",
        "0:1:0",
        "--system",
        SYSTEM,
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--values"), "{}", stderr(&o));
}

#[test]
fn alpha_sweep_equals_the_frontier() {
    let sweep = bcmac(&[
        "sweep", "--target", "region-gaussian", "--axis", "alpha", "--values", "0:1:21", "--system", SYSTEM,
    ]);
    let frontier = bcmac(&["region-gaussian", "--system", SYSTEM, "--grid", "21"]);
    assert!(sweep.status.success() && frontier.status.success());
    assert_eq!(stdout(&sweep), stdout(&frontier));
}

#[test]
fn error_rate_grows_with_crossover() {
    let dir = tempfile::tempdir().unwrap();
    let file = xor_cascade(dir.path());
    let o = bcmac(&[
        "sweep",
        "--target",
        "simulate-discrete",
        "--axis",
        "crossover",
        "--values",
        "0:0.5:6",
        "--channel-file",
        file.to_str().unwrap(),
        "--rates",
        "0.01,0.01,0.02,0.02",
        "--epsilon",
        "0.008",
        "--epsilon-mac",
        "0.15",
        "--n",
        "128",
        "--trials",
        "300",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = Table::from_csv(&stdout(&o), "simulation-sweep", LogBase::Nats).unwrap();
    assert_eq!(t.rows.len(), 6);
    let status: Vec<&str> = t.column_cells("status").unwrap().iter().map(|c| c.as_str().unwrap()).collect();
    // Once the rate no longer fits the code cannot be built at all.
    let ok = status.iter().take_while(|s| **s == "ok").count();
    assert!(ok >= 2, "{status:?}");
    assert!(status[ok..].iter().all(|s| *s == "infeasible"));
    let value = t.column_cells("lambda_overall").unwrap();
    let lo = t.column_cells("overall_lo").unwrap();
    let hi = t.column_cells("overall_hi").unwrap();
    for i in 1..ok {
        let (prev, next) = (value[i - 1].as_f64().unwrap(), value[i].as_f64().unwrap());
        // Non-decreasing up to overlapping intervals.
        assert!(
            next >= prev || hi[i].as_f64().unwrap() >= lo[i - 1].as_f64().unwrap(),
            "row {i}: {prev} -> {next}"
        );
    }
}

#[test]
fn rates_in_bits_match_rates_in_nats() {
    let ln2 = std::f64::consts::LN_2;
    let nats = [0.04, 0.04, 0.03, 0.03];
    let bits: Vec<String> = nats.iter().map(|r| (r / ln2).to_string()).collect();
    let run = |rates: String, unit: &str| {
        let o = bcmac(&[
            "simulate-discrete",
            "--channel-file",
            &data("erasure_cascade.json"),
            "--rates",
            &rates,
            "--unit",
            unit,
            "--epsilon",
            "0.0178",
            "--n",
            "32",
            "--trials",
            "100",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        stdout(&o)
    };
    let a = run(nats.map(|r| r.to_string()).join(","), "nats");
    let b = run(bits.join(","), "bits");
    assert_eq!(a, b);
}
