use std::path::PathBuf;
use std::process::{Command, Output};

fn simflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simflow")).args(args).env("SIMFLOW_THREADS", "2").output().unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("simflow-cli-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d.join(name)
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

#[test]
fn solve_lambda_prints_json() {
    let o = simflow(&["solve-lambda", "--gamma", "3", "--n", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert!((v["lambda_std"].as_f64().unwrap() - 1.5713126233).abs() < 1e-7);
    assert_eq!(v["kind"], "shock");
}

#[test]
fn exit_codes() {
    assert_eq!(simflow(&["solve-lambda", "--gamma", "3", "--n", "1"]).status.code(), Some(6));
    let o = simflow(&["solve-lambda", "--gamma", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma"));
    assert_eq!(simflow(&["solve-lambda", "--gamma", "abc"]).status.code(), Some(2));
    assert_eq!(simflow(&["solve-lambda", "--gamma", "2", "--kind", "cavity"]).status.code(), Some(3));
    assert_eq!(simflow(&["verify"]).status.code(), Some(2));
    assert_eq!(simflow(&["bogus"]).status.code(), Some(2));
}

#[test]
fn build_then_verify_and_sample() {
    let case = scratch("g3.json");
    let c = case.to_str().unwrap();
    let o = simflow(&["build", "--gamma", "3", "--n", "3", "--out", c]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!((json(&o)["B"].as_f64().unwrap() - 0.69397).abs() < 1e-3);

    let o = simflow(&["verify", "--case", c, "--deltas", "0.1,0.01,0.001"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["lambda_ok"], true);
    assert_eq!(v["continuity"].as_array().unwrap().len(), 4);

    let o = simflow(&["fields", "--case", c, "--t-grid", "-1", "--r-grid", "0.5,1.5"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# t,r,rho,u,c,p,region"));
    assert!(lines.next().unwrap().ends_with("quiescent"));
    assert!(lines.next().unwrap().ends_with("pre-collapse-fluid"));

    let snap = scratch("snap.csv");
    let o = simflow(&["crossval", "--case", c, "--n-cells", "64,128", "--t-end", "-0.9", "--snapshot", snap.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("n_cells,t_start,t_end,l1_rho"));
    let snap = std::fs::read_to_string(snap).unwrap();
    assert!(snap.starts_with("r,rho,u,p,rho_exact,u_exact,p_exact"));
    assert_eq!(snap.lines().count(), 129);
}

#[test]
fn config_file_with_flag_override() {
    let path = scratch("run.cfg");
    std::fs::write(&path, "# sphere\ngamma = 5\nn = 3\n").unwrap();
    let p = path.to_str().unwrap();
    let a = json(&simflow(&["--config", p, "solve-lambda"]));
    assert_eq!(a["gamma"].as_f64(), Some(5.0));
    let b = json(&simflow(&["--config", p, "solve-lambda", "--gamma", "3"]));
    assert_eq!(b["gamma"].as_f64(), Some(3.0));
    assert!((b["lambda_std"].as_f64().unwrap() - 1.5713126233).abs() < 1e-7);

    std::fs::write(&path, "gamma = 3\nwhatever = 1\n").unwrap();
    let o = simflow(&["--config", p, "solve-lambda"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("whatever"));
}
