use std::process::Command;

use slhjb::config::{ProblemConfig, RunConfig, StepRule};
use slhjb::grid::{Grid, ScalarField, VectorField};
use slhjb::io;
use slhjb::minimize::Method;
use slhjb::run;
use slhjb::synthesis::{simulate, LoopMode, NoiseSpec};
use slhjb::Error;

fn coarse(problem: &str, k: f64) -> RunConfig {
    let mut cfg = RunConfig::for_problem(problem);
    cfg.k = Some(k);
    cfg
}

#[test]
fn csv_round_trip_is_bitwise() {
    let grid = Grid::new(&[-1.0, 0.0, 0.5], &[1.0, 0.6, 1.1], 0.2).unwrap();
    let v = ScalarField::from_fn(&grid, |x| (x[0] * 3.1).sin() / 7.0 + x[1] * x[2]);
    let u = VectorField::from_fn(&grid, 2, |x| [x[0] / 3.0, (x[1] + x[2]).exp(), 0.0]);
    let mut buf = Vec::new();
    io::write_scalar_csv(&v, &mut buf).unwrap();
    let back = io::read_scalar_csv(&grid, buf.as_slice()).unwrap();
    assert!(v
        .values()
        .iter()
        .zip(back.values())
        .all(|(a, b)| a.to_bits() == b.to_bits()));
    let mut buf = Vec::new();
    io::write_vector_csv(&u, &mut buf).unwrap();
    let back = io::read_vector_csv(&grid, 2, buf.as_slice()).unwrap();
    for (a, b) in u.values().iter().zip(back.values()) {
        assert_eq!(a[0].to_bits(), b[0].to_bits());
        assert_eq!(a[1].to_bits(), b[1].to_bits());
    }
}

#[test]
fn vtk_header_matches_grid() {
    let grid = Grid::new(&[0.0, 0.0, 0.0], &[1.0, 0.5, 0.25], 0.25).unwrap();
    let u = VectorField::from_fn(&grid, 2, |x| [x[0], x[1], 0.0]);
    let mut buf = Vec::new();
    io::write_vector_vtk(&u, "control", &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.contains("DIMENSIONS 5 3 2"));
    assert!(text.contains("POINT_DATA 30"));
    let data = text.lines().skip_while(|l| !l.starts_with("VECTORS")).skip(1);
    assert_eq!(data.filter(|l| l.split(' ').count() == 3).count(), 30);
}

#[test]
fn oversized_time_step_is_rejected() {
    let mut p = ProblemConfig::registry("test1").unwrap();
    p.h = StepRule::Fixed { value: 1.0 };
    let cfg = RunConfig::for_problem("test1");
    assert!(matches!(cfg.spec_for(&p), Err(Error::InfeasibleTimestep { .. })));
}

#[test]
fn unknown_config_fields_are_rejected() {
    assert!(RunConfig::from_json(r#"{"problem": "test1", "gird": 3}"#).is_err());
    let cfg = RunConfig::from_json(r#"{"problem": "nope"}"#).unwrap();
    assert!(matches!(cfg.spec(), Err(Error::Config(_))));
}

#[test]
fn value_field_is_symmetric() {
    let solved = run::solve(&coarse("test1", 0.1)).unwrap();
    let v = &solved.report.value;
    let grid = v.grid();
    let n = grid.counts()[0];
    let at = |i: usize, j: usize| v[grid.linear(&[i, j, 0])];
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((at(i, j) - at(n - 1 - i, j)).abs());
            worst = worst.max((at(i, j) - at(j, i)).abs());
        }
    }
    assert!(worst < 1e-6, "asymmetry {worst}");
}

#[test]
fn ssn_and_cp_give_the_same_value_field() {
    let mut a = coarse("test1", 0.1);
    a.minimizer.method = Method::SsnSmooth;
    let mut b = a.clone();
    b.minimizer.method = Method::ChambollePock;
    let (a, b) = (run::solve(&a).unwrap(), run::solve(&b).unwrap());
    let diff = slhjb::solver::residual(&a.report.value, &b.report.value);
    assert!(diff < 5e-4, "{diff}");
}

#[test]
fn noisy_simulation_is_reproducible() {
    let solved = run::solve(&coarse("test3", 0.2)).unwrap();
    let x0 = [0.3, -0.2, 0.0];
    let noise = Some(NoiseSpec::default_for(0.2, 5));
    let a = simulate(&solved.report.value, &solved.spec, &x0, 40, LoopMode::ClosedLoop, noise).unwrap();
    let b = simulate(&solved.report.value, &solved.spec, &x0, 40, LoopMode::ClosedLoop, noise).unwrap();
    assert_eq!(a.states, b.states);
    assert_eq!(a.controls, b.controls);
    let c = simulate(
        &solved.report.value,
        &solved.spec,
        &x0,
        40,
        LoopMode::ClosedLoop,
        Some(NoiseSpec::default_for(0.2, 6)),
    )
    .unwrap();
    assert_ne!(a.states, c.states);
}

#[test]
fn minimum_time_value_vanishes_on_target() {
    let mut p = ProblemConfig::registry("test1").unwrap();
    p.k = 0.1;
    p.cost = slhjb::local::RunningCost::minimum_time();
    p.mode = slhjb::config::ball_target(&[0.0, 0.0], 0.15);
    let cfg = RunConfig::for_problem("test1");
    let spec = cfg.spec_for(&p).unwrap();
    let r = slhjb::solver::value_iteration(&spec, None).unwrap();
    assert!(r.converged);
    for node in spec.grid.nodes() {
        let v = r.value[node];
        if spec.is_target_node(node) {
            assert_eq!(v, 0.0);
        } else {
            assert!(v > 0.0 && v < 1.0);
        }
    }
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_slhjb"))
}

#[test]
fn cli_solve_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(
        &config,
        r#"{"problem": "test1", "k": 0.2, "minimizer": {"method": "ssn_smooth"}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = cli().arg("--out").arg(&out).arg("solve").arg(&config).output().unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    for name in ["value.csv", "control.csv", "report.json"] {
        assert!(out.join(name).exists(), "{name}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["converged"], true);

    let status = cli()
        .arg("--out")
        .arg(&out)
        .args(["--format", "vtk", "solve"])
        .arg(&config)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("value.vtk").exists());
}

#[test]
fn cli_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"problem": "test1", "bogus": 1}"#).unwrap();
    let out = cli().arg("solve").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let missing = cli()
        .arg("solve")
        .arg(dir.path().join("missing.json"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
    let oversized = dir.path().join("h.json");
    let mut p = ProblemConfig::registry("test1").unwrap();
    p.h = StepRule::Fixed { value: 1.0 };
    let inline = serde_json::json!({ "inline": p });
    std::fs::write(&oversized, inline.to_string()).unwrap();
    let out = cli().arg("solve").arg(&oversized).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("time step"));
}

#[test]
fn cli_registry_round_trips() {
    let out = cli().args(["registry", "test4"]).output().unwrap();
    assert!(out.status.success());
    let p: ProblemConfig = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(p, ProblemConfig::registry("test4").unwrap());
    let list = cli().arg("registry").output().unwrap();
    assert_eq!(String::from_utf8_lossy(&list.stdout).lines().count(), 6);
}

#[test]
fn cli_reports_nonconvergence() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(&config, r#"{"problem": "test1", "k": 0.2, "max_sweeps": 3}"#).unwrap();
    let status = cli()
        .arg("--out")
        .arg(dir.path())
        .arg("solve")
        .arg(&config)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}
