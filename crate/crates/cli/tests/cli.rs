use std::process::{Command, Output};

fn sphericoh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sphericoh"))
        .args(args)
        .env_remove("SPHERICOH_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn bound_prints_unnormalized_value() {
    let o = sphericoh(&["bound", "--bandwidth", "3", "--samples", "4"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "B,m,N,kind,normalized,bound,welch");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let bound: f64 = row[5].parse().unwrap();
    assert!((bound - 4.0 / 3.0).abs() < 1e-15);
    assert!(row[5].starts_with("1.33333"));
}

#[test]
fn bound_json_matches_csv() {
    let csv = stdout(&sphericoh(&["bound", "--bandwidth", "6", "--samples", "8", "--normalized"]));
    let json = stdout(&sphericoh(&[
        "--format", "json", "bound", "--bandwidth", "6", "--samples", "8", "--normalized",
    ]));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(v["bound"].as_f64().unwrap(), row[5].parse::<f64>().unwrap());
    assert_eq!(v["welch"].as_f64().unwrap(), row[6].parse::<f64>().unwrap());
    assert_eq!(v["N"].as_u64().unwrap(), row[2].parse::<u64>().unwrap());
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["bound", "--bandwidth", "2", "--samples", "4"][..],
        &["bound", "--bandwidth", "5", "--samples", "1"][..],
        &["grid", "--samples", "1"][..],
        &["grid", "--samples", "4", "--bogus"][..],
        &["coherence", "--bandwidth", "3", "--samples", "4", "--kind", "nope"][..],
        &["frobnicate"][..],
    ] {
        let o = sphericoh(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn coherence_is_deterministic() {
    let args = ["coherence", "--bandwidth", "4", "--samples", "16", "--kind", "wigner", "--seed", "1"];
    let a = sphericoh(&args);
    let b = sphericoh(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = sphericoh(&["--threads", "1", "coherence", "--bandwidth", "4", "--samples", "16", "--seed", "1"]);
    assert_eq!(a.stdout, c.stdout);
    let d = sphericoh(&["coherence", "--bandwidth", "4", "--samples", "16", "--seed", "2"]);
    assert_ne!(a.stdout, d.stdout);
}

#[test]
fn coherence_formats_agree() {
    let base = ["coherence", "--bandwidth", "3", "--samples", "9", "--kind", "sh", "--seed", "5"];
    let csv = stdout(&sphericoh(&base));
    let mut args = vec!["--format", "json"];
    args.extend(base);
    let v: serde_json::Value = serde_json::from_str(&stdout(&sphericoh(&args))).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    for (h, cell) in header.iter().zip(&row) {
        let j = &v[*h];
        match j {
            serde_json::Value::Number(n) => assert_eq!(n.as_f64().unwrap(), cell.parse::<f64>().unwrap(), "{h}"),
            serde_json::Value::String(s) => assert_eq!(s, cell, "{h}"),
            serde_json::Value::Null => assert_eq!(*cell, "", "{h}"),
            other => panic!("unexpected {h}: {other}"),
        }
    }
}

#[test]
fn coherence_reads_angle_files() {
    let dir = tempfile::tempdir().unwrap();
    let phi = dir.path().join("phi.txt");
    let chi = dir.path().join("chi.txt");
    std::fs::write(&phi, "# azimuth\n0.1\n0.2\n0.3\n0.4\n0.5\n").unwrap();
    std::fs::write(&chi, "0 0 0 0 0\n").unwrap();
    let o = sphericoh(&[
        "coherence", "--bandwidth", "3", "--samples", "5",
        "--phi-file", phi.to_str().unwrap(), "--chi-file", chi.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::write(&chi, "0 0 0\n").unwrap();
    let o = sphericoh(&[
        "coherence", "--bandwidth", "3", "--samples", "5", "--chi-file", chi.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn degenerate_matrix_is_numerical_failure() {
    // Two pole samples: columns with k ≠ ±n vanish.
    let o = sphericoh(&["coherence", "--bandwidth", "2", "--samples", "2"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn grid_output_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.csv");
    let o = sphericoh(&["grid", "--samples", "5", "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "p,theta,phi,chi");
    let thetas: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(thetas.len(), 5);
    assert_eq!(thetas[0], std::f64::consts::PI);
    assert_eq!(thetas[2], std::f64::consts::FRAC_PI_2);
    assert_eq!(thetas[4], 0.0);
    let json = stdout(&sphericoh(&["--format", "json", "grid", "--samples", "5"]));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 5);
    assert_eq!(v[2]["theta"].as_f64().unwrap(), thetas[2]);
}

#[test]
fn verify_all_passes() {
    let o = sphericoh(&["verify", "--suite", "all", "--max-degree", "20"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("check,param1,param2,expected,actual,pass\n"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn optimize_writes_trace_and_grid() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("run");
    let args = [
        "optimize", "--bandwidth", "3", "--samples", "9", "--kind", "sh", "--method", "adam",
        "--max-iter", "30", "--seed", "3", "--out", prefix.to_str().unwrap(),
    ];
    let o = sphericoh(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = std::fs::read_to_string(dir.path().join("run_trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert!(lines.next().unwrap().starts_with("# method=adam p=8 eta=0.5"));
    assert_eq!(lines.next().unwrap(), "iter,objective,mu");
    assert!(lines.count() >= 1);
    let grid = std::fs::read_to_string(dir.path().join("run_grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 10);

    let first = trace.clone();
    assert!(sphericoh(&args).status.success());
    assert_eq!(std::fs::read_to_string(dir.path().join("run_trace.csv")).unwrap(), first);
}

#[test]
fn optimize_rejects_bad_config() {
    let o = sphericoh(&["optimize", "--bandwidth", "3", "--samples", "9", "--p", "7", "--out", "/tmp/x"]);
    assert_eq!(o.status.code(), Some(2));
    let o = sphericoh(&["optimize", "--bandwidth", "3", "--samples", "9", "--method", "lbfgs", "--out", "/tmp/x"]);
    assert_eq!(o.status.code(), Some(2));
}
