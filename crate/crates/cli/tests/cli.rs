use std::process::{Command, Output};

fn unilateral(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unilateral"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn sweep_writes_csv_and_json_mirror() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("grid.csv");
    let o = unilateral(&[
        "sweep",
        "--pi2a",
        "1:4:2",
        "--bc2",
        "9",
        "--n-cells",
        "200",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("a,b,c,pi2a,bc2,"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("grid.json")).unwrap())
            .unwrap();
    let rows = json.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["branch_ref"], "localized");
    assert_eq!(rows[0]["pi2a"], 1.0);
}

#[test]
fn bifurcation_reports_sorted_eigenvalues() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.json");
    let o = unilateral(&[
        "bifurcation",
        "--a",
        "1",
        "--b",
        "1",
        "--c",
        "4",
        "--n-cells",
        "200",
        "--k",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let ev: Vec<f64> = v["eigenvalues"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert_eq!(ev.len(), 3);
    assert!(ev.windows(2).all(|w| w[0] <= w[1]));
    // space minimum min(π²a, bc²) = π²
    assert!((ev[0] - std::f64::consts::PI.powi(2)).abs() < 1e-3);
    assert_eq!(v["modes"].as_array().unwrap().len(), 3);
}

#[test]
fn solve_both_models() {
    let dir = tempfile::tempdir().unwrap();
    for model in ["obstacle", "coupled"] {
        let out = dir.path().join(format!("{model}.json"));
        let o = unilateral(&[
            "solve",
            "--model",
            model,
            "--n-cells",
            "50",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(
            o.status.success(),
            "{model}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(v["converged"], true, "{model}");
    }
}

#[test]
fn config_file_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[stability]\nmax_iter = 1\n").unwrap();
    let out = dir.path().join("s.json");
    let o = unilateral(&[
        "stability",
        "--a",
        "1",
        "--b",
        "1",
        "--c",
        "4",
        "--n-cells",
        "100",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["iterations"], 1);
    assert_eq!(v["converged"], false);
}

#[test]
fn bad_input_fails_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.json");
    let out = out.to_str().unwrap();

    let o = unilateral(&[
        "bifurcation",
        "--a",
        "-1",
        "--b",
        "1",
        "--c",
        "1",
        "--out",
        out,
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("error:"));

    let o = unilateral(&["sweep", "--pi2a", "4:1:3", "--bc2", "1", "--out", out]);
    assert!(!o.status.success());

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[stability]\nno_such_key = 1\n").unwrap();
    let o = unilateral(&[
        "solve",
        "--model",
        "obstacle",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out,
    ]);
    assert!(!o.status.success());
    assert!(!std::path::Path::new(out).exists());
}
