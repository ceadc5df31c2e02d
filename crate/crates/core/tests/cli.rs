use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_passive-gd");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn certify_examples() {
    for (alpha, verdict, code) in [("0.01", "STRONG", 0), ("0.02", "WEAK", 0), ("0.05", "NONE", 2)] {
        let o = run(&["certify", "--m", "1", "--L", "100", "--alpha", alpha]);
        assert_eq!(o.status.code(), Some(code), "{alpha}");
        assert!(stdout(&o).starts_with(&format!("verdict: {verdict}\n")));
    }
    let o = run(&["certify", "--m", "5", "--L", "5", "--alpha", "0.4", "--json"]);
    assert_eq!(o.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["verdict"], "NONE");
    assert_eq!(v["p"], 2.5);
}

#[test]
fn invalid_input_exits_one() {
    let o = run(&["certify", "--m", "0", "--L", "100", "--alpha", "0.01"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    assert_eq!(run(&["certify", "--m", "1", "--L", "100"]).status.code(), Some(1));
    assert_eq!(run(&["verify", "--suite", "bogus"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["run", "--function", "rosenbrock", "--x0", "1", "--alpha", "0.01"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn verify_examples() {
    let o = run(&["verify", "--suite", "loop", "--seed", "7", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for c in v["checks"].as_array().unwrap() {
        assert!(c["value"].as_f64().unwrap() <= 1e-9);
    }

    let o = run(&["verify", "--suite", "counterexample"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("PASS [counterexample] max ||x2[k]| - 1|"));
    assert!(text.contains("paired-gradient rule fires"));

    let o = run(&["verify", "--suite", "sector", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(run(&["verify", "--suite", "passivity"]).status.code(), Some(0));
}

#[test]
fn run_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let o = run(&["run", "--x0", "-250", "--alpha", "0.0198", "--trace", trace.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,x_0,g_0,step"));
    assert_eq!(lines.next().unwrap().split(',').nth(1), Some("-2.5000000000000000e2"));
    assert!(stdout(&o).contains("GRAD_NORM_MET"));

    let o = run(&["run", "--function", "diag-quadratic", "--x0", "1,1", "--alpha", "0.02", "--paired-tol", "1e-10", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["termination"], "PAIRED_GRAD_MET");

    let lt = dir.path().join("loop.csv");
    let o = run(&["run", "--x0", "3", "--alpha", "0.01", "--mode", "loop", "--steps", "5", "--trace", lt.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&lt).unwrap();
    assert_eq!(text.lines().next(), Some("k,u1,y1,u2,y2,state"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn bench_with_config_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/table1.json");
    let out = dir.path().join("out");
    let o = run(&["bench", "--config", cfg, "--out-dir", out.to_str().unwrap(), "--n-samples", "200", "--threads", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let rows: Vec<_> = summary.lines().collect();
    assert_eq!(rows[0], "label,mean,median,mode,n,flagged");
    assert_eq!(rows.len(), 7);
    assert!(rows[1].starts_with("alpha=2/(m+L),"));
    assert!(rows[1].ends_with(",200,0"));
    let hist = std::fs::read_to_string(out.join("hist_s_btk.csv")).unwrap();
    assert!(hist.starts_with("iterations,count\n"));
    let total: usize = hist.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, 200);
    let resolved: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(resolved["n_samples"], 200);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"function\": {\"name\": \"quadratic\"}}").unwrap();
    assert_eq!(run(&["bench", "--config", bad.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]).status.code(), Some(1));
}
