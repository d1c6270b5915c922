use std::process::{Command, Output};

fn sharpmax(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sharpmax"))
        .args(args)
        .env_remove("SHARPMAX_WORKERS")
        .output()
        .expect("run sharpmax")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn summary(text: &str) -> serde_json::Value {
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, workers: &str| {
        let path = dir.path().join(name);
        let o = sharpmax(&[
            "simulate",
            "--p",
            "2",
            "--alpha",
            "1",
            "--paths",
            "100000",
            "--seed",
            "7",
            "--workers",
            workers,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        std::fs::read(path).unwrap()
    };
    let a = run("a.csv", "1");
    let b = run("b.csv", "1");
    let c = run("c.csv", "3");
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert!(String::from_utf8(a)
        .unwrap()
        .starts_with("quantity,n_paths,estimate,stderr\n"));
}

#[test]
fn simulate_martingale_mode_and_tree_input() {
    let o = sharpmax(&["simulate", "--p", "3", "--alpha", "0", "--paths", "20000"]);
    assert_eq!(o.status.code(), Some(0));
    let s = summary(&stderr(&o));
    assert_eq!(s["mode"]["kind"], "martingale");
    assert_eq!(s["bound"], 3.0);

    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("tree.json");
    std::fs::write(
        &tree,
        r#"{"mode":{"kind":"martingale"},"f0":1.0,"g0":1.0,
            "branches":[{"prob":0.5,"df":1.0,"dg":-1.0},{"prob":0.5,"df":-1.0,"dg":1.0}]}"#,
    )
    .unwrap();
    let o = sharpmax(&[
        "simulate",
        "--tree",
        tree.to_str().unwrap(),
        "--paths",
        "20000",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = summary(&stderr(&o));
    // g* = 2 or 1, |f_1| = 2 or 0
    let exact = ((1.0 + 4.0) / 2.0 / 2.0f64).sqrt();
    assert!((s["exact"]["ratio"].as_f64().unwrap() - exact).abs() < 1e-12);
}

#[test]
fn corrupted_gamma_exits_one() {
    let o = sharpmax(&[
        "verify",
        "--p",
        "2",
        "--alpha",
        "1",
        "--grid",
        "5000",
        "--samples",
        "500",
        "--corrupt-gamma",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("\"verdict\":\"fail\""));
    assert!(err.contains("ode_residual"));
}

#[test]
fn verify_passes_and_honours_tolerance_flag() {
    let o = sharpmax(&[
        "verify",
        "--p",
        "2,3",
        "--alpha",
        "0.5,1",
        "--grid",
        "5000",
        "--samples",
        "500",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 40);

    let o = sharpmax(&[
        "verify",
        "--p",
        "3",
        "--alpha",
        "1",
        "--grid",
        "5000",
        "--samples",
        "500",
        "--tol-check",
        "0.125",
    ]);
    for line in stdout(&o).lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["tolerance"], 0.125);
    }
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# quick run\np = 3\nalpha = 1\nstep = 0.5\nto = 2\n").unwrap();
    let o = sharpmax(&["--config", cfg.to_str().unwrap(), "gamma"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 6);
    let o = sharpmax(&["--config", cfg.to_str().unwrap(), "gamma", "--step", "1"]);
    assert_eq!(stdout(&o).lines().count(), 4);
}

#[test]
fn figure1_rows() {
    let o = sharpmax(&["figure1"]);
    assert_eq!(o.status.code(), Some(0));
    let rows: Vec<Vec<f64>> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 1001);
    assert!((rows[0][1] - 1.0 / 3.0).abs() < 1e-15);
    for r in rows.iter().filter(|r| r[0] <= 1.0 / 6.0) {
        assert!((r[1] - (1.0 / 3.0 + 3.0 * r[0])).abs() <= 1e-10);
    }
    // past x0 = 1/6 the curve sits between 5/6 and its tangent line
    let next = rows.iter().find(|r| r[0] > 1.0 / 6.0).unwrap();
    assert!(next[1] > 5.0 / 6.0 && next[1] <= 1.0 / 3.0 + 3.0 * next[0] + 1e-10);
    assert!(rows.windows(2).all(|w| w[1][1] >= w[0][1]));
    assert_eq!(summary(&stderr(&o))["pass"], true);
}

#[test]
fn sharpness_stays_below_the_bound() {
    let o = sharpmax(&[
        "sharpness",
        "--p",
        "2",
        "--mode",
        "martingale",
        "--delta",
        "0.01",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let s = summary(&stderr(&o));
    let r = s["best_ratio"].as_f64().unwrap();
    assert!(r > 1.9 && r < 2.0);
    let o = sharpmax(&[
        "sharpness",
        "--p",
        "2",
        "--alpha",
        "1",
        "--delta",
        "0.05,0.025",
        "--rounds",
        "400",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(summary(&stderr(&o))["mode"]["kind"], "submartingale");
}

#[test]
fn ito_within_bound() {
    let o = sharpmax(&["ito", "--p", "2", "--steps", "1000", "--paths", "50000"]);
    assert_eq!(o.status.code(), Some(0));
    let s = summary(&stderr(&o));
    let r = s["ratio"].as_f64().unwrap() + 3.0 * s["se_ratio"].as_f64().unwrap();
    assert!(r <= 4.0);
}

#[test]
fn usage_and_resource_errors_exit_two() {
    assert_eq!(sharpmax(&["bogus"]).status.code(), Some(2));
    assert_eq!(sharpmax(&["gamma", "--p", "1.5"]).status.code(), Some(2));
    assert_eq!(
        sharpmax(&["simulate", "--paths", "10"]).status.code(),
        Some(2)
    );
    let o = sharpmax(&[
        "sharpness",
        "--p",
        "2",
        "--delta",
        "0.01",
        "--rounds",
        "20000000",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("path limit"));
    assert_eq!(
        sharpmax(&["--config", "/nonexistent", "gamma"])
            .status
            .code(),
        Some(2)
    );
}
