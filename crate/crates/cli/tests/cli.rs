use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bbgky_core::dynamics::PhasePoint;
use bbgky_core::functionals::library::{gaussian_profile, OneBody, TestFunction};
use bbgky_core::solver::read_rows;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bbgky"));
    c.env_remove("BBGKY_THREADS");
    c
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn verify_algebra_passes_and_catches_corruption() {
    let ok = run(&["verify-algebra"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    let small = run(&["verify-algebra", "--nmax", "2"]);
    assert_eq!(small.status.code(), Some(0));
    let bad = run(&["verify-algebra", "--nmax", "3", "--corrupt-coefficient", "2:1"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("residual"));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["nonsense"]).status.code(), Some(2));
    assert_eq!(run(&["verify-algebra", "--corrupt-coefficient", "x"]).status.code(), Some(2));
    assert_eq!(run(&["evolve-dual", "--nmax", "0"]).status.code(), Some(2));
    let cfg = write_config(dir.path(), "{\"N_max\": 3, \"colour\": 1}");
    assert_eq!(run(&["evolve-dual", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    let missing = dir.path().join("absent.json");
    assert_eq!(run(&["duality", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
    let threads = bin().env("BBGKY_THREADS", "0").arg("verify-algebra").output().unwrap();
    assert_eq!(threads.status.code(), Some(2));
}

#[test]
fn reduced_number_is_conserved() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&[
        "evolve-dual",
        "--nmax",
        "3",
        "--times",
        "0,1,5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = read_rows(std::fs::File::open(out.join("results.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 2 * 3 * 8);
    for r in &rows {
        let expected = if r.s == 1 { 1.0 } else { 0.0 };
        assert!((r.value - expected).abs() < 1e-10, "{r:?}");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "evolve-dual");
    assert_eq!(manifest["config"]["N_max"], 3);
    assert_eq!(manifest["passed"], true);
}

#[test]
fn head_on_pair_matches_regression_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let base: serde_json::Value = serde_json::from_slice(&std::fs::read(fixture("head_on.json")).unwrap()).unwrap();
    let expected = read_rows(std::fs::File::open(fixture("head_on_expected.csv")).unwrap()).unwrap();
    // the pair is free until t = 0.5, then leaves with exchanged momenta
    let f = TestFunction::new(OneBody::LinearBump {
        center: [0.5, 0.0, 0.0],
        radius: 3.0,
        slope: [1.0, 0.5, 0.0],
    });
    let at = |a: f64| {
        f.eval(&[
            PhasePoint::new([-a, 0.0, 0.0], [1.0, 0.0, 0.0]),
            PhasePoint::new([a, 0.0, 0.0], [-1.0, 0.0, 0.0]),
        ])
    };
    let after = f.eval(&[
        PhasePoint::new([-2.0, 0.0, 0.0], [-1.0, 0.0, 0.0]),
        PhasePoint::new([2.0, 0.0, 0.0], [1.0, 0.0, 0.0]),
    ]);
    let by_hand = [at(0.6), after];
    for method in ["partition", "reduced", "direct", "kary"] {
        let mut cfg = base.clone();
        cfg["dual_method"] = serde_json::json!(method);
        cfg["points_file"] = serde_json::json!(fixture("head_on_points.json"));
        let path = write_config(dir.path(), &cfg.to_string());
        let o = run(&["evolve-dual", "--config", path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let rows = read_rows(o.stdout.as_slice()).unwrap();
        assert_eq!(rows.len(), expected.len());
        for ((r, e), h) in rows.iter().zip(&expected).zip(by_hand) {
            assert_eq!((r.s, r.t, r.point_id), (e.s, e.t, e.point_id));
            assert!((r.value - e.value).abs() < 1e-10, "{method}: {r:?} vs {e:?}");
            assert!((r.value - h).abs() < 1e-10, "{method}: {r:?} vs {h}");
        }
    }
}

#[test]
fn one_particle_state_is_transported_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"N_max": 2, "components": [1], "n_points": 4,
            "state": {"kind": "gaussian_product", "center": [0,0,0], "width": 1.0, "beta": 1.0, "weights": [0, 1]}}"#,
    );
    let out = dir.path().join("out");
    let o = run(&[
        "evolve-state",
        "--config",
        cfg.to_str().unwrap(),
        "--times",
        "0,0.7",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = read_rows(std::fs::File::open(out.join("results.csv")).unwrap()).unwrap();
    let points = bbgky_core::functionals::sample_configurations(
        &bbgky_core::functionals::SamplingSpec::gaussian([0.0; 3], 1.0),
        1,
        4,
        1,
    );
    let h = gaussian_profile([0.0; 3], 1.0, 1.0);
    for r in rows.iter().filter(|r| r.method == "cumulant") {
        let x = points[r.point_id][0];
        let back = PhasePoint::new(
            [x.q[0] - r.t * x.p[0], x.q[1] - r.t * x.p[1], x.q[2] - r.t * x.p[2]],
            x.p,
        );
        assert!((r.value - h(&back)).abs() <= 1e-14 * h(&back).max(1e-300), "{r:?}");
        assert_eq!(r.stderr, 0.0);
    }
}

#[test]
fn identical_seeds_give_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &Path| -> Vec<String> {
        ["evolve-state", "--samples", "3000", "--times", "0.5", "--seed", "11", "--out"]
            .iter()
            .map(|s| s.to_string())
            .chain([out.to_str().unwrap().to_string()])
            .collect()
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    assert!(bin().args(args(&a)).status().unwrap().success());
    assert!(bin().args(args(&b)).env("BBGKY_THREADS", "1").status().unwrap().success());
    assert!(bin().args(args(&c)).env("BBGKY_THREADS", "3").status().unwrap().success());
    let read = |d: &Path| std::fs::read(d.join("results.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_eq!(read(&a), read(&c));
    let other = dir.path().join("d");
    let mut v = args(&other);
    v[6] = "12".into();
    assert!(bin().args(v).status().unwrap().success());
    assert_ne!(read(&a), read(&other));
}

#[test]
fn duality_reports_machine_readable_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["duality", "--nmax", "3", "--samples", "2000", "--times", "0", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["passed"], true);
    assert_eq!(manifest["report"]["times"][0]["difference"]["value"], 0.0);
}

#[test]
fn out_of_range_parameters_warn() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"gamma": 0.5, "alpha": 2.0}"#);
    let o = run(&["verify-algebra", "--nmax", "2", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let err = stderr(&o);
    assert!(err.contains("gamma = 0.5"));
    assert!(err.contains("alpha = 2"));
}
