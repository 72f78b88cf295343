use std::process::{Command, Output};

use confsub::cli::read_csv;

fn confsub(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_confsub")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn catalog_lists_every_surface() {
    let o = confsub(&["catalog", "list"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    for n in confsub::catalog::NAMES {
        assert!(text.contains(n), "{n}");
    }
}

#[test]
fn exit_codes() {
    let ok = confsub(&["analyze", "--set", "surface=clifford_torus", "--set", "grid.count=24"]);
    assert_eq!(code(&ok), 0);
    assert!(String::from_utf8_lossy(&ok.stdout).ends_with("status = ok\n"));

    let failed = confsub(&["analyze", "--set", "surface=clifford_torus", "--set", "grid.count=24", "--set", "tolerance.gauss=-1"]);
    assert_eq!(code(&failed), 1);
    assert!(String::from_utf8_lossy(&failed.stdout).contains("failure = analyze.gauss"));

    assert_eq!(code(&confsub(&["analyze", "--set", "surface=klein_bottle"])), 2);
    assert_eq!(code(&confsub(&["analyze", "--set", "bogus=1"])), 2);
    assert_eq!(code(&confsub(&["analyze", "--set", "surface=catenoid", "--set", "grid.count=5"])), 3);
}

#[test]
fn non_regular_surface_warns() {
    let o = confsub(&["isotropy", "--set", "surface=round_sphere", "--set", "grid.count=24"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("not conformally regular"));
    assert!(!String::from_utf8_lossy(&o.stdout).contains("isotropy.verdict"));
}

#[test]
fn outputs_written_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let args = [
        "run",
        "--set",
        "surface=catenoid",
        "--set",
        "grid.count=48",
        "--set",
        "tasks=analyze,isotropy",
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
    ];
    let a = confsub(&args);
    assert_eq!(code(&a), 0);
    let report = std::fs::read(out.join("report.txt")).unwrap();
    assert_eq!(report, a.stdout);
    let (header, rows) = read_csv(&std::fs::read_to_string(out.join("fields/tau.csv")).unwrap()).unwrap();
    assert_eq!(header, ["x0", "x1", "tau", "masked"]);
    assert_eq!(rows.len(), 48 * 48);
    assert!(out.join("fields/lambda.csv").exists());

    std::env::set_var("CONFSUB_THREADS", "3");
    let b = confsub(&args);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn export_matches_run_fields() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("run");
    let common = ["--set", "surface=enneper", "--set", "grid.count=64"];
    let mut args = vec!["analyze", "--out", run_dir.to_str().unwrap()];
    args.extend(common);
    assert_eq!(code(&confsub(&args)), 0);
    let mut args = vec!["export", "--field", "kappa_conf"];
    args.extend(common);
    let e = confsub(&args);
    assert_eq!(code(&e), 0);
    let from_run = std::fs::read_to_string(run_dir.join("fields/kappa_conf.csv")).unwrap();
    assert_eq!(String::from_utf8(e.stdout).unwrap(), from_run);

    let mut args = vec!["export", "--field", "nope"];
    args.extend(common);
    assert_eq!(code(&confsub(&args)), 2);
}
