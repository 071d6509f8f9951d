use std::fs;
use std::path::Path;
use std::process::Command;

use tempfile::tempdir;

use zgs::cli::main_with;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = main_with(
        std::iter::once("zgs").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn dir_arg(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

#[test]
fn run_writes_all_outputs() {
    let tmp = tempdir().unwrap();
    let dir = dir_arg(tmp.path());
    let (code, out, err) = run(&["run", "-o", &dir]);
    assert_eq!(code, 0, "{err}");
    for f in [
        "trajectory.csv",
        "summary.txt",
        "summary.json",
        "validation.txt",
        "config.toml",
    ] {
        assert!(tmp.path().join(f).is_file(), "missing {f}");
    }
    assert!(out.contains("settle_time"));

    let csv = fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("t,"));
    // 2501 samples plus the header
    assert_eq!(csv.lines().count(), 2502);

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("summary.json")).unwrap())
            .unwrap();
    assert!(summary["settle_time"].as_f64().unwrap() <= 2.0);

    // the saved config reproduces the run
    let again = tempdir().unwrap();
    let cfg = dir_arg(&tmp.path().join("config.toml"));
    let (code, _, err) = run(&["run", "-c", &cfg, "-o", &dir_arg(again.path())]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(
        fs::read(tmp.path().join("trajectory.csv")).unwrap(),
        fs::read(again.path().join("trajectory.csv")).unwrap()
    );
}

#[test]
fn out_of_range_exponent_is_a_parameter_error() {
    let tmp = tempdir().unwrap();
    let (code, _, err) = run(&["run", "-o", &dir_arg(tmp.path()), "p=0.6"]);
    assert_eq!(code, 3);
    assert!(err.contains("p = 0.6"), "{err}");
}

#[test]
fn boundary_layer_run_succeeds() {
    let tmp = tempdir().unwrap();
    let (code, out, err) = run(&[
        "run",
        "-o",
        &dir_arg(tmp.path()),
        "scenario=encirclement",
        "boundary_layer=true",
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("time_varying"));
    let cfg = fs::read_to_string(tmp.path().join("config.toml")).unwrap();
    assert!(cfg.contains("boundary_layer = true"), "{cfg}");
}

#[test]
fn empty_sweep_is_rejected() {
    let tmp = tempdir().unwrap();
    let (code, _, err) = run(&["sweep", "-o", &dir_arg(tmp.path()), "--param", "T_m"]);
    assert_eq!(code, 2, "{err}");
    let (code, _, _) = run(&[
        "sweep",
        "-o",
        &dir_arg(tmp.path()),
        "--param",
        "zeta",
        "--values",
        "1",
    ]);
    assert_eq!(code, 2);
}

#[test]
fn sweep_writes_merged_tables() {
    let tmp = tempdir().unwrap();
    let (code, out, err) = run(&[
        "sweep",
        "-o",
        &dir_arg(tmp.path()),
        "--param",
        "T_m",
        "--values",
        "1,2",
        "--jobs",
        "2",
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("within_Tm"));
    let summary = fs::read_to_string(tmp.path().join("sweep_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(
        summary.lines().skip(1).all(|l| l.contains(",true,")),
        "{summary}"
    );
    assert!(tmp.path().join("t_m_1").join("trajectory.csv").is_file());
    assert!(tmp.path().join("sweep.csv").is_file());
}

#[test]
fn validate_reports_spectrum_and_bounds() {
    let (code, out, err) = run(&["validate"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("lambda2 = 1.000000"), "{out}");
    assert!(out.contains("bound c:"));
    assert!(out.contains("[PASS]"));

    let (code, out, _) = run(&["validate", "scenario=encirclement"]);
    assert_eq!(code, 0);
    assert!(out.contains("minimal mu = 40.000000"), "{out}");
}

#[test]
fn strict_validation_rejects_small_gains() {
    let (code, out, _) = run(&["validate", "c=0.1"]);
    assert_eq!(code, 0);
    assert!(out.contains("[FAIL]"));
    let (code, _, _) = run(&["validate", "--strict", "c=0.1"]);
    assert_eq!(code, 3);
}

#[test]
fn disconnected_graph_is_a_config_error() {
    let tmp = tempdir().unwrap();
    let cfg = tmp.path().join("split.toml");
    fs::write(
        &cfg,
        "scenario = \"numerical_A\"\n[graph]\nkind = \"edges\"\nn = 6\nedges = [[0,1,1.0],[1,2,1.0],[2,0,1.0],[3,4,1.0],[4,5,1.0],[5,3,1.0]]\n",
    )
    .unwrap();
    let (code, _, err) = run(&["run", "-c", &dir_arg(&cfg), "-o", &dir_arg(tmp.path())]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn malformed_config_names_the_line() {
    let tmp = tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "scenario = \n").unwrap();
    let (code, _, err) = run(&["validate", "-c", &dir_arg(&cfg)]);
    assert_eq!(code, 2);
    assert!(err.contains("line 1"), "{err}");
}

#[test]
fn oracle_prints_the_optimum() {
    let (code, out, _) = run(&["oracle"]);
    assert_eq!(code, 0);
    assert!(out.contains("x_star = [0.785"), "{out}");
}

#[test]
fn list_names_every_scenario() {
    let (code, out, _) = run(&["list"]);
    assert_eq!(code, 0);
    for name in [
        "numerical_A",
        "switching",
        "freewill",
        "disturbance",
        "scale_60",
        "encirclement",
    ] {
        assert!(out.contains(name));
    }
}

#[test]
fn binary_honours_output_dir_variable() {
    let tmp = tempdir().unwrap();
    let target = tmp.path().join("from_env");
    let status = Command::new(env!("CARGO_BIN_EXE_zgs"))
        .args(["run", "t_end=2.0"])
        .current_dir(tmp.path())
        .env("ZGS_OUTPUT_DIR", &target)
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    assert!(target.join("summary.txt").is_file());
    assert!(!tmp.path().join("zgs-out").exists());
}

#[test]
fn binary_exit_codes() {
    let tmp = tempdir().unwrap();
    let code = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_zgs"))
            .args(args)
            .current_dir(tmp.path())
            .output()
            .unwrap()
            .status
            .code()
            .unwrap()
    };
    assert_eq!(code(&["list"]), 0);
    assert_eq!(code(&["run", "p=0.6"]), 3);
    assert_eq!(code(&["run", "bogus_key=1"]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
}
