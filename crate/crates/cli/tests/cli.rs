use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Run {
    fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).unwrap_or_else(|e| panic!("{e}: {}", self.stdout))
    }

    fn result(&self) -> Value {
        self.json()["result"].clone()
    }
}

fn run(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_khintchine"))
        .args(args)
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

#[test]
fn phi_examples() {
    let r = run(&["phi", "legendre", "--family", "subgaussian", "--u", "3"]);
    assert_eq!(r.code, 0);
    assert!((r.result()["value"].as_f64().unwrap() - 4.5).abs() < 1e-9);

    let r = run(&["phi", "convclass", "--family", "subgaussian", "--r", "2"]);
    assert_eq!(r.result()["member"], Value::Bool(true));

    let r = run(&["phi", "overline", "--family", "subgaussian", "--lambda", "1.7"]);
    assert!((r.result()["value"].as_f64().unwrap() - 1.445).abs() < 1e-9);
}

#[test]
fn envelope_records_seed_and_config() {
    let r = run(&[
        "--seed",
        "7",
        "verify",
        "thm31",
        "--law",
        "rademacher",
        "--phi",
        "subgaussian",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let j = r.json();
    assert_eq!(j["seed"], 7);
    assert_eq!(j["exit_code"], 0);
    assert_eq!(j["command"], "verify thm31");
    assert_eq!(j["config"]["global"]["seed"], 7);
    assert_eq!(j["config"]["args"]["verify"]["thm31"]["law"], "rademacher");
    assert_eq!(j["result"]["verdict"], "pass");
}

#[test]
fn rosenthal_example() {
    let r = run(&[
        "verify",
        "rosenthal",
        "--law",
        "centered-poisson:1",
        "--p",
        "4",
        "--weights",
        "equal:16",
    ]);
    assert_eq!(r.code, 0);
    // E S^4 = (n + 3 n^2) / n^2 for n unit-variance Poisson terms at weight 1/sqrt n
    let lhs = r.result()["details"]["lhs"].as_f64().unwrap();
    assert!((lhs - (3.0f64 + 1.0 / 16.0).powf(0.25)).abs() < 1e-9);
}

#[test]
fn refusals_exit_two() {
    let r = run(&[
        "verify",
        "thm41",
        "--laws",
        "rademacher,rademacher",
        "--phis",
        "bad-spec",
    ]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("phi"), "{}", r.stderr);

    // Poisson has no subgaussian norm
    let r = run(&[
        "verify",
        "thm31",
        "--law",
        "centered-poisson:1",
        "--phi",
        "subgaussian",
        "--trials",
        "5",
    ]);
    assert_eq!(r.code, 2);
    assert_eq!(r.result()["verdict"], "refused");

    let r = run(&["phi", "eval", "--family", "power:x", "--lambda", "0.5"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("phi"));

    let r = run(&[
        "--engine",
        "exact_enum",
        "--budget",
        "100",
        "norm",
        "lp",
        "--law",
        "rademacher",
        "--p",
        "3",
        "--weights",
        "equal:30",
    ]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("budget"), "{}", r.stderr);
}

#[test]
fn unknown_flags_are_rejected() {
    assert_eq!(run(&["--bogus", "phi", "eval"]).code, 2);
    assert_eq!(
        run(&[
            "norm",
            "bphi",
            "--law",
            "rademacher",
            "--phi",
            "subgaussian",
            "--nope",
            "1"
        ])
        .code,
        2
    );
}

#[test]
fn khinchine_sup_example() {
    let r = run(&[
        "--seed",
        "1",
        "--nmax",
        "16",
        "khinchine",
        "sup",
        "--law",
        "rademacher",
        "--norm",
        "lp:4",
    ]);
    assert_eq!(r.code, 0);
    let res = r.result();
    assert!(res["value"].as_f64().unwrap() >= 1.2574);
    assert!(res["witness"].as_array().is_some_and(|w| !w.is_empty()));
}

#[test]
fn norm_examples() {
    let r = run(&["norm", "bphi", "--law", "gaussian:1", "--phi", "subgaussian"]);
    assert!((r.result()["value"].as_f64().unwrap() - 1.0).abs() < 1e-9);

    let r = run(&["norm", "lp", "--law", "rademacher", "--p", "4", "--weights", "equal:2"]);
    // S is -sqrt2, 0, sqrt2 with probabilities 1/4, 1/2, 1/4, so E S^4 = 2
    let exact = 2.0f64.powf(0.25);
    assert!((r.result()["value"].as_f64().unwrap() - exact).abs() < 1e-12);
}

#[test]
fn dudley_matches_step_function_oracle() {
    let r = run(&["entropy", "dudley", "--space", &data("grid11.csv")]);
    assert_eq!(r.code, 0);
    // spacing 0.1: a closed eps-ball with 0.1k <= eps < 0.1(k+1) holds 2k+1 points
    let oracle: f64 = (0..10)
        .map(|k| 0.1 * ((11.0 / (2 * k + 1) as f64).ceil().ln()).sqrt())
        .sum();
    let v = r.result()["value"].as_f64().unwrap();
    assert!((v - oracle).abs() < 1e-12, "{v} vs {oracle}");

    let r = run(&["entropy", "cover", "--space", &data("grid11.csv"), "--eps", "0.25"]);
    assert_eq!(r.result()["count"], 3);
}

#[test]
fn csv_output() {
    let r = run(&[
        "--format",
        "csv",
        "phi",
        "legendre",
        "--family",
        "subgaussian",
        "--u",
        "3",
    ]);
    assert_eq!(r.code, 0);
    let mut rd = csv::Reader::from_reader(r.stdout.as_bytes());
    assert_eq!(rd.headers().unwrap(), vec!["key", "value"]);
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    let value = rows.iter().find(|r| &r[0] == "value").unwrap();
    assert!((value[1].parse::<f64>().unwrap() - 4.5).abs() < 1e-9);

    let r = run(&[
        "--format",
        "csv",
        "verify",
        "rosenthal",
        "--law",
        "rademacher",
        "--p",
        "4",
        "--weights",
        "equal:4",
    ]);
    assert!(r.stdout.lines().any(|l| l.starts_with("details.lhs,")));

    let r = run(&[
        "--format",
        "csv",
        "entropy",
        "profile",
        "--space",
        &data("grid11.csv"),
        "--eps",
        "0.1,0.2,0.3",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.lines().count() >= 2);
}

#[test]
fn out_file_matches_stdout() {
    let dir = std::env::temp_dir().join(format!("khintchine-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("report.json");
    let args = ["phi", "kappa", "--phis", "subgaussian", "--lambda", "1"];
    let direct = run(&args);
    let mut with_out = vec!["--out", path.to_str().unwrap()];
    with_out.extend(args);
    let r = run(&with_out);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), direct.stdout);
    std::fs::remove_dir_all(dir).ok();
}
