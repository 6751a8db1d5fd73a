use std::path::PathBuf;
use std::process::{Command, Output};

fn ellfit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ellfit")).args(args).output().expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    ellfit(args).status.code().unwrap()
}

fn stdout(args: &[&str]) -> String {
    let out = ellfit(args);
    String::from_utf8(out.stdout).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ellfit-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

const GOLDEN_ARGS: [&str; 9] = ["phase", "--d-values", "4,6", "--ratios", "0.1,0.3,1.0", "--trials", "20", "--seed", "5"];

#[test]
fn exit_code_contract() {
    assert_eq!(code(&["fit", "--d", "10", "--n", "1", "--seed", "7"]), 0);
    assert_eq!(code(&["fit", "--d", "10", "--n", "0"]), 1);
    assert_eq!(code(&["lemma", "--name", "bogus"]), 1);
    assert_eq!(code(&["phase", "--trials", "1", "--d-values", "3", "--n-values", "1", "--out", "/nonexistent-dir/x.csv"]), 2);
    assert_eq!(code(&["fit", "--d", "10", "--n", "40", "--seed", "1"]), 3);
    assert_eq!(code(&["fit", "--d", "2", "--n", "4", "--seed", "1"]), 4);
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
    assert_eq!(code(&["fit", "--d", "3", "--n", "2", "--format", "csv"]), 1);
}

#[test]
fn unknown_lemma_lists_valid_names() {
    let err = String::from_utf8(ellfit(&["lemma", "--name", "bogus"]).stderr).unwrap();
    for name in ["gram-deviation", "chi2", "direction-diagnostics", "net-profile"] {
        assert!(err.contains(name));
    }
}

#[test]
fn fit_single_point_succeeds() {
    let v: serde_json::Value = serde_json::from_str(&stdout(&["fit", "--d", "10", "--n", "1", "--seed", "7"])).unwrap();
    assert_eq!(v["record"]["success"], true);
    assert_eq!(v["record"]["failure_reason"], "none");
}

#[test]
fn numeric_failure_is_structured() {
    let v: serde_json::Value = serde_json::from_str(&stdout(&["fit", "--d", "2", "--n", "4", "--seed", "1"])).unwrap();
    assert_eq!(v["record"]["failure_reason"], "theta_not_pd");
    assert!(v["error"].as_str().unwrap().contains("positive definite"));
}

#[test]
fn repeated_runs_are_identical() {
    for args in [
        &["fit", "--d", "12", "--n", "20", "--seed", "3"][..],
        &["dual", "--d", "2", "--n", "4", "--seed", "3", "--iters", "200"][..],
        &["lemma", "--name", "chi2", "--trials", "2000", "--seed", "2"][..],
    ] {
        assert_eq!(stdout(args), stdout(args));
    }
}

#[test]
fn payload_is_thread_count_invariant() {
    let cases: [&[&str]; 4] = [
        &GOLDEN_ARGS,
        &["lemma", "--name", "hanson-wright", "--trials", "3000", "--seed", "4"],
        &["dual", "--d", "3", "--n", "6", "--seed", "4", "--iters", "150"],
        &["lemma", "--name", "moments", "--d", "5", "--trials", "1000", "--format", "json"],
    ];
    for args in cases {
        let runs: Vec<String> = ["1", "2", "8"]
            .iter()
            .map(|t| {
                let mut a = args.to_vec();
                a.extend(["--threads", t]);
                stdout(&a)
            })
            .collect();
        assert!(!runs[0].is_empty());
        assert_eq!(runs[0], runs[1]);
        assert_eq!(runs[0], runs[2]);
    }
}

#[test]
fn phase_matches_golden_file() {
    let golden = include_str!("golden/phase_small.csv");
    assert_eq!(stdout(&GOLDEN_ARGS), golden);
}

#[test]
fn phase_csv_schema() {
    let csv = stdout(&["phase", "--d-values", "5,3", "--n-values", "4,1", "--trials", "1", "--seed", "2"]);
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "d,n,ratio,trials,successes,frequency,wilson_lo,wilson_hi,failure_theta_not_pd,failure_psd");
    let keys: Vec<(usize, usize)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f.len(), 10);
            let freq: f64 = f[5].parse().unwrap();
            let (lo, hi): (f64, f64) = (f[6].parse().unwrap(), f[7].parse().unwrap());
            assert!(freq == 0.0 || freq == 1.0);
            assert!(lo <= freq && freq <= hi);
            (f[0].parse().unwrap(), f[1].parse().unwrap())
        })
        .collect();
    assert_eq!(keys, vec![(3, 1), (3, 4), (5, 1), (5, 4)]);
}

#[test]
fn lemma_csv_schema_and_examples() {
    let csv = stdout(&["lemma", "--name", "chi2", "--d", "10", "--trials", "100000", "--seed", "1"]);
    assert!(csv.starts_with("threshold,empirical,bound,trials\n"));
    assert_eq!(code(&["lemma", "--name", "chi2", "--d", "10", "--trials", "100000", "--seed", "1"]), 0);
    assert_eq!(code(&["lemma", "--name", "inverse-perturbation", "--trials", "500", "--seed", "1"]), 0);
}

#[test]
fn dual_examples() {
    let v: serde_json::Value = serde_json::from_str(&stdout(&["dual", "--d", "2", "--n", "2", "--seed", "3"])).unwrap();
    assert_eq!(v["valid"], false);
    assert!(v["best"]["lambda_max"].as_f64().unwrap() >= -1e-10);
    let v: serde_json::Value = serde_json::from_str(&stdout(&["dual", "--d", "2", "--n", "4", "--seed", "3"])).unwrap();
    assert_eq!(v["valid"], v["grid_oracle"]["valid"]);
    let trace = v["trace"].as_array().unwrap();
    assert_eq!(trace.len(), 2000);
}

#[test]
fn sidecar_holds_the_timestamp() {
    let out = scratch("phase.csv");
    let path = out.to_str().unwrap();
    let mut args = GOLDEN_ARGS.to_vec();
    args.extend(["--out", path]);
    assert_eq!(code(&args), 0);
    let payload = std::fs::read_to_string(&out).unwrap();
    assert_eq!(payload, include_str!("golden/phase_small.csv"));
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(format!("{path}.meta.json")).unwrap()).unwrap();
    assert!(meta["timestamp_unix"].as_u64().unwrap() > 0);
    assert_eq!(meta["command"], "phase");
    assert_eq!(meta["master_seed"], 5);
}

#[test]
fn config_precedence() {
    let cfg = scratch("config.json");
    std::fs::write(&cfg, r#"{"d_values": [4], "n_spec": {"values": [2, 3]}, "trials": 4, "master_seed": 9}"#).unwrap();
    let c = cfg.to_str().unwrap();
    let from_file = stdout(&["phase", "--config", c]);
    let from_flags = stdout(&["phase", "--d-values", "4", "--n-values", "2,3", "--trials", "4", "--seed", "9"]);
    assert_eq!(from_file, from_flags);
    let overridden = stdout(&["phase", "--config", c, "--trials", "2", "--seed", "1"]);
    let expected = stdout(&["phase", "--d-values", "4", "--n-values", "2,3", "--trials", "2", "--seed", "1"]);
    assert_eq!(overridden, expected);
    std::fs::write(&cfg, r#"{"trails": 4}"#).unwrap();
    assert_eq!(code(&["phase", "--config", c]), 1);
}

#[test]
fn json_phase_report() {
    let v: serde_json::Value =
        serde_json::from_str(&stdout(&["phase", "--d-values", "4", "--n-values", "2", "--trials", "3", "--format", "json"])).unwrap();
    let cell = &v["cells"][0];
    assert_eq!(cell["d"], 4);
    assert_eq!(cell["trials"], 3);
    assert!(v.get("timestamp_unix").is_none());
}

#[test]
fn bound_failure_exit_code_for_lemma() {
    assert_eq!(code(&["lemma", "--name", "theta-inverse", "--trials", "10", "--seed", "1"]), 3);
}
