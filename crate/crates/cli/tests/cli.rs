use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lp-rmdp"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lp-rmdp-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

const TOY: &str = r#"{"num_states": 1, "num_actions": 1, "discount": 0.5,
  "kernel": [[[1.0]]], "reward": [[1.0]], "initial_dist": [1.0]}"#;

#[test]
fn solve_toy_model() {
    let path = scratch("toy.json");
    fs::write(&path, TOY).unwrap();
    let out_path = scratch("toy_solution.json");
    let out = run(bin().arg("solve").arg(&path).args(["--tol", "1e-10", "--out"]).arg(&out_path));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sol: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    let v = sol["values"][0].as_f64().unwrap();
    assert!((v - 2.0).abs() < 1e-9, "{v}");
    assert!(sol["eps_opt_bound"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn modes_agree_on_single_action_model() {
    let path = scratch("one_action.json");
    let out = run(bin().args(["random-model", "--states", "4", "--actions", "1", "--seed", "3", "--out"]).arg(&path));
    assert!(out.status.success());
    let values = |mode: &str| {
        let out = run(bin().arg("solve").arg(&path).args(["--mode", mode, "--p", "2", "--beta", "0.2", "--tol", "1e-10"]));
        assert!(out.status.success());
        String::from_utf8(out.stdout)
            .unwrap()
            .lines()
            .filter(|l| l.starts_with("V["))
            .map(|l| l.split('=').nth(1).unwrap().trim().parse::<f64>().unwrap())
            .collect::<Vec<_>>()
    };
    let (a, b) = (values("sa"), values("s"));
    assert_eq!(a.len(), 4);
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-8));
}

#[test]
fn malformed_model_exits_with_2() {
    let path = scratch("bad.json");
    fs::write(&path, r#"{"num_states": 2, "num_actions": 1, "discount": 0.5,
  "kernel": [[[0.5, 0.6]], [[0.5, 0.5]]], "reward": [[0.0], [1.0]]}"#)
        .unwrap();
    let out = run(bin().arg("solve").arg(&path));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not stochastic"));

    fs::write(&path, "{\n  \"num_states\": 2,\n  oops\n}").unwrap();
    let out = run(bin().arg("solve").arg(&path));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn non_convergence_exits_with_3() {
    let path = scratch("slow.json");
    fs::write(&path, TOY).unwrap();
    let out = run(bin().arg("solve").arg(&path).args(["--tol", "1e-12", "--max-iter", "3"]));
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn verify_runs_and_rejects_negative_radius() {
    let out = run(bin().args(["verify", "--instances", "20", "--pairs", "10", "--models", "2", "--p", "1.5,inf"]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("dual vs oracle (sa)") && !text.contains("FAIL"));

    let out = run(bin().args(["verify", "--beta", "-0.1"]));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sample_complexity_csv_is_deterministic() {
    let args = ["sample-complexity", "--seeds", "3", "--n-grid", "10,100", "--tol", "1e-6"];
    let first = run(bin().args(args).env("RMDP_THREADS", "2"));
    let second = run(bin().args(args).env("RMDP_THREADS", "1"));
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    // every column but the wall time
    let strip = |out: &[u8]| -> Vec<String> {
        String::from_utf8_lossy(out)
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    assert_eq!(strip(&first.stdout), strip(&second.stdout));
    let text = String::from_utf8(first.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("mode,p,beta,gamma,N,seed,eps_hat,iterations,wall_ms"));
    assert_eq!(lines.count(), 6);
    assert!(String::from_utf8_lossy(&first.stderr).contains("slope"));
}

#[test]
fn deterministic_kernel_has_no_estimation_error() {
    let path = scratch("deterministic.json");
    fs::write(
        &path,
        r#"{"num_states": 2, "num_actions": 2, "discount": 0.9,
  "kernel": [[[1, 0], [0, 1]], [[0, 1], [1, 0]]],
  "reward": [[0.2, 0.5], [1.0, 0.1]],
  "uncertainty": {"mode": "sa", "p": 2, "beta": 0.1}}"#,
    )
    .unwrap();
    let out = run(bin().arg("sample-complexity").arg("--model").arg(&path).args(["--seeds", "2", "--n-grid", "1,5"]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    for line in text.lines().skip(1) {
        let eps: f64 = line.split(',').nth(6).unwrap().parse().unwrap();
        // tolerance 1e-6 at gamma 0.9 bounds eps_opt by 1e-6
        assert!(eps <= 2e-6, "{line}");
    }
}
