use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn wdro(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wdro"))
        .args(args)
        .current_dir(dir)
        .env_remove("WDRO_OUT_DIR")
        .output()
        .unwrap()
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = wdro(args, dir);
    assert!(
        out.status.success(),
        "wdro {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

fn setup(dir: &Path) {
    ok(&["gen-model", "--seed", "10", "--out", "m.txt"], dir);
    ok(&["gen-data", "--seed", "11", "--out", "d.csv"], dir);
}

#[test]
fn certify_attack_eval_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    setup(dir);
    let cert = json(&ok(
        &["certify", "--model", "m.txt", "--data", "d.csv", "--r", "inf", "--probes", "1000", "--eps", "0.05", "--per-mask-csv", "masks.csv"],
        dir,
    ));
    assert_eq!(cert["format"], "wdro-certificate 1");
    assert_eq!(cert["s"], "1");
    assert_eq!(cert["exhaustive"], true);
    let upper = cert["L_upper"].as_f64().unwrap();
    assert!(cert["l_lower"].as_f64().unwrap() <= upper + 1e-9);
    let masks = std::fs::read_to_string(dir.join("masks.csv")).unwrap();
    assert_eq!(masks.lines().count(), cert["inventory_size"].as_u64().unwrap() as usize + 1);

    let adv = ok(
        &["attack", "--model", "m.txt", "--data", "d.csv", "--kappa", "2", "--eps", "0.03", "--r", "inf", "--alpha", "0.01", "--trace", "t.csv"],
        dir,
    );
    let report = json(&adv);
    assert_eq!(report["pairs"].as_array().unwrap().len(), 16);
    assert!(report["canonical_cost"].as_f64().unwrap() <= 0.03 + 1e-9);
    std::fs::write(dir.join("adv.json"), adv).unwrap();
    let trace = std::fs::read_to_string(dir.join("t.csv")).unwrap();
    assert!(trace.starts_with("sample,iter,rival,x0,x1\n"));

    let eval = json(&ok(&["eval", "--model", "m.txt", "--data", "d.csv", "--adv", "adv.json"], dir));
    assert_eq!(eval["budget_feasible"], true);
    assert!(eval["exact_w1"].as_f64().unwrap() <= 0.03 + 1e-9);
}

#[test]
fn pgd_and_convergence() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    setup(dir);
    let adv = json(&ok(
        &["attack", "--model", "m.txt", "--data", "d.csv", "--method", "pgd", "--kappa", "1", "--eps", "0.05", "--r", "2", "--alpha", "0.01", "--loss", "dlr"],
        dir,
    ));
    assert_eq!(adv["method"], "pgd");
    assert!(adv["max_displacement"].as_f64().unwrap() <= 0.05 + 1e-12);

    let csv = ok(
        &["convergence", "--model", "m.txt", "--data", "d.csv", "--r", "inf", "--eps", "0.05", "--alpha", "0.05", "--maxiter", "10"],
        dir,
    );
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "masks,mask,provenance,mask_value,cumulative_l,L_upper,pgd_gain_per_eps");
    let mut prev = f64::NEG_INFINITY;
    for line in lines {
        let cum = line.split(',').nth(4).unwrap();
        if !cum.is_empty() {
            let v: f64 = cum.parse().unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }
}

#[test]
fn one_dim_oracle_output() {
    let tmp = tempfile::tempdir().unwrap();
    let v = json(&ok(&["remark1", "--eps", "0,1"], tmp.path()));
    let rows = v["rows"].as_array().unwrap();
    assert!((rows[0]["oracle"].as_f64().unwrap() - 1.5).abs() < 1e-3);
    assert!((rows[1]["oracle"].as_f64().unwrap() - 2.0).abs() < 1e-3);
}

#[test]
fn out_dir_env_and_stdout() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_wdro"))
        .args(["gen-data", "--count", "4"])
        .env("WDRO_OUT_DIR", tmp.path().join("outs"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let file = std::fs::read_to_string(tmp.path().join("outs/data.csv")).unwrap();
    assert_eq!(file.lines().count(), 5);

    let out = Command::new(env!("CARGO_BIN_EXE_wdro"))
        .args(["gen-data", "--count", "4", "--out", "-"])
        .env("WDRO_OUT_DIR", tmp.path().join("outs"))
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), file);
}

#[test]
fn seeded_generators_are_byte_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let a = ok(&["gen-model", "--seed", "3", "--widths", "4,3"], tmp.path());
    let b = ok(&["gen-model", "--seed", "3", "--widths", "4,3"], tmp.path());
    assert_eq!(a, b);
    let monotone = ok(&["gen-model", "--seed", "3", "--monotone"], tmp.path());
    assert!(!monotone.lines().skip(4).any(|l| l.contains('-')));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    setup(dir);
    // Usage errors.
    assert_eq!(wdro(&["attack", "--model", "m.txt"], dir).status.code(), Some(1));
    assert_eq!(wdro(&["certify", "--bogus"], dir).status.code(), Some(1));
    let dual = wdro(&["certify", "--model", "m.txt", "--data", "d.csv", "--r", "inf", "--s", "inf"], dir);
    assert_eq!(dual.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&dual.stderr).contains("dual"));
    let missing = wdro(&["certify", "--model", "nope.txt", "--data", "d.csv", "--r", "2"], dir);
    assert_eq!(missing.status.code(), Some(1));
    std::fs::write(dir.join("bad.csv"), "x0,x1,label\n0.1,zz,0\n").unwrap();
    let bad = wdro(&["certify", "--model", "m.txt", "--data", "bad.csv", "--r", "2"], dir);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("bad.csv:2"));
    let neg = wdro(&["attack", "--model", "m.txt", "--data", "d.csv", "--eps", "-1", "--r", "2", "--alpha", "0.1"], dir);
    assert_eq!(neg.status.code(), Some(1));

    // Numeric failure: sign-vertex enumeration beyond its cap.
    ok(&["gen-model", "--input-dim", "30", "--widths", "3", "--out", "wide.txt"], dir);
    ok(&["gen-data", "--input-dim", "30", "--count", "2", "--out", "wide.csv"], dir);
    let wide = wdro(&["certify", "--model", "wide.txt", "--data", "wide.csv", "--r", "inf", "--probes", "10"], dir);
    assert_eq!(wide.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&wide.stderr).contains("exceeds cap"));
}

#[test]
fn help_mentions_every_subcommand() {
    let tmp = tempfile::tempdir().unwrap();
    let help = ok(&["--help"], tmp.path());
    for sub in ["gen-model", "gen-data", "certify", "attack", "eval", "convergence", "remark1", "selftest", "pipeline"] {
        assert!(help.contains(sub), "{sub}");
        let sub_help = ok(&[sub, "--help"], tmp.path());
        assert!(sub_help.contains("--threads"));
    }
}
