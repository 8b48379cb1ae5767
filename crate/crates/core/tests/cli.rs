//! End-to-end runs of the `propagg` binary.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand::Rng;
use serde_json::Value;

use propagg::data::load_profile_csv;
use propagg::model::{angular_distance, ScoringVector};
use propagg::sampling::{rng_for, standard_normal};

fn propagg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_propagg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn results(dir: &Path) -> Vec<Value> {
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.join("results.json")).unwrap()).unwrap();
    v["results"].as_array().unwrap().clone()
}

/// Logistic comparisons for one voter with utility `beta · x`.
fn comparisons(out: &mut String, voter: &str, beta: &[f64], count: usize, seed: u64) {
    let mut rng = rng_for(seed, &[]);
    for _ in 0..count {
        let a: Vec<f64> = beta.iter().map(|_| standard_normal(&mut rng)).collect();
        let b: Vec<f64> = beta.iter().map(|_| standard_normal(&mut rng)).collect();
        let z: f64 = beta.iter().zip(a.iter().zip(&b)).map(|(w, (x, y))| w * (x - y)).sum();
        let chose_a = rng.random::<f64>() < 1.0 / (1.0 + (-z).exp());
        let cells: Vec<String> = a.iter().chain(&b).map(|v| v.to_string()).collect();
        writeln!(out, "{voter},{},{}", cells.join(","), u8::from(chose_a)).unwrap();
    }
}

#[test]
fn fit_recovers_known_voters_and_skips_degenerate_ones() {
    let tmp = tempfile::tempdir().unwrap();
    let truths = [
        ScoringVector::normalize(vec![1.0, 0.0, 0.0]).unwrap(),
        ScoringVector::normalize(vec![0.2, 1.0, -0.3]).unwrap(),
        ScoringVector::normalize(vec![-0.5, 0.4, 1.0]).unwrap(),
    ];
    let mut csv = String::from("voter_id,a_0,a_1,a_2,b_0,b_1,b_2,chose_a\n");
    for (i, t) in truths.iter().enumerate() {
        let beta: Vec<f64> = t.coords().iter().map(|c| 3.0 * c).collect();
        comparisons(&mut csv, &format!("v{i}"), &beta, 400, 10 + i as u64);
    }
    // Identical items on both sides carry no signal.
    for k in 0..20 {
        writeln!(csv, "flat,1,2,3,1,2,3,{}", k % 2).unwrap();
    }
    let input = tmp.path().join("cmp.csv");
    let output = tmp.path().join("profile.csv");
    fs::write(&input, csv).unwrap();
    let o = propagg(&["fit", "--comparisons", input.to_str().unwrap(), "--out", output.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("skipping voter flat"), "{}", stderr(&o));
    let p = load_profile_csv(&output).unwrap();
    assert_eq!(p.len(), 3);
    for (fit, truth) in p.thetas().iter().zip(&truths) {
        let deg = angular_distance(fit, truth).unwrap().to_degrees();
        assert!(deg < 15.0, "fitted voter {deg:.2} degrees from truth");
    }
}

#[test]
fn fit_rejects_empty_comparisons() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("empty.csv");
    fs::write(&input, "voter_id,a_0,b_0,chose_a\n").unwrap();
    let out = tmp.path().join("p.csv");
    let o = propagg(&["fit", "--comparisons", input.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(!out.exists());
}

#[test]
fn single_voter_profile_is_fully_represented() {
    let tmp = tempfile::tempdir().unwrap();
    let profile = tmp.path().join("one.csv");
    fs::write(&profile, "theta_0,theta_1,theta_2\n0.6,0.0,0.8\n").unwrap();
    let out = tmp.path().join("eval");
    let o = propagg(&[
        "evaluate", "--profile", profile.to_str().unwrap(), "--m", "2,7", "--R", "50",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = results(&out);
    assert_eq!(rows.len(), 10);
    for r in rows {
        assert_eq!(r["long_ip"], 1.0, "{r}");
        assert_eq!(r["batch_ip"], 1.0, "{r}");
    }
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("eval");
    let cfg = tmp.path().join("run.ini");
    fs::write(
        &cfg,
        format!(
            "# evaluation defaults\n[run]\nsynthetic = antipodal:alpha1=0.3\nrules = arith,angular\nm = 4\nR = 40\nseed = 3\nout = {}\n",
            out.display()
        ),
    )
    .unwrap();
    let o = propagg(&["--config", cfg.to_str().unwrap(), "evaluate", "--R", "60", "--rules", "borda"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = results(&out);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["rule"], "borda");
    assert_eq!(rows[0]["R"], 60);
    assert_eq!(rows[0]["m"], 4);
    assert_eq!(rows[0]["seed"], 3);
}

#[test]
fn bad_config_line_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.ini");
    fs::write(&cfg, "seed = 1\nthis line has no equals sign\n").unwrap();
    let o = propagg(&["--config", cfg.to_str().unwrap(), "evaluate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains('2'), "error should name the line: {}", stderr(&o));

    fs::write(&cfg, "seeed = 1\n").unwrap();
    let o = propagg(&["--config", cfg.to_str().unwrap(), "evaluate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_flag_values_exit_with_usage_code() {
    assert_eq!(propagg(&["evaluate", "--rules", "plurality"]).status.code(), Some(2));
    assert_eq!(propagg(&["evaluate", "--m", "ten"]).status.code(), Some(2));
    assert_eq!(propagg(&["sweep", "--var", "phi"]).status.code(), Some(2));
}

#[test]
fn verify_runs_a_single_check() {
    let tmp = tempfile::tempdir().unwrap();
    let o = propagg(&["verify", "--only", "angular-bound", "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1, "{text}");
    assert!(lines[0].starts_with("PASS") && lines[0].contains("angular-bound"), "{text}");
    let xml = fs::read_to_string(tmp.path().join("verify.xml")).unwrap();
    assert!(xml.contains("angular-bound"));
    assert!(tmp.path().join("checks.csv").exists());

    assert_eq!(propagg(&["verify", "--only", "no-such-check"]).status.code(), Some(2));
}

fn sweep_rows(dir: &Path) -> Vec<csv::StringRecord> {
    let text = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    let body: String = text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
    csv::Reader::from_reader(body.as_bytes()).records().map(Result::unwrap).collect()
}

#[test]
fn lambda_sweep_writes_rows_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("lam");
    let o = propagg(&[
        "sweep", "--var", "lambda", "--values", "1,0.1", "--rules", "angular,arith", "--R", "60",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = sweep_rows(&out);
    assert!(!rows.is_empty());
    for value in ["1", "0.1"] {
        for rule in ["angular", "arith"] {
            assert!(rows.iter().any(|r| r[0] == *"lambda" && &r[1] == value && &r[2] == rule));
        }
    }
}

#[test]
fn subsample_sweep_writes_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let profile = tmp.path().join("six.csv");
    let mut rng = rng_for(5, &[]);
    let mut text = String::from("theta_0,theta_1\n");
    for _ in 0..6 {
        let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        writeln!(text, "{},{}", a.cos(), a.sin()).unwrap();
    }
    fs::write(&profile, text).unwrap();
    let out = tmp.path().join("nsub");
    let o = propagg(&[
        "sweep", "--var", "n_sub", "--values", "3,6", "--profile", profile.to_str().unwrap(),
        "--rules", "angular", "--R", "30", "--resamples", "5", "--threshold", "0",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = sweep_rows(&out);
    assert!(rows.iter().any(|r| &r[1] == "3"));
    assert!(rows.iter().any(|r| &r[1] == "6"));
}
