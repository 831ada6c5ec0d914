// Named to sort before `acceptance`, whose red criteria stop `cargo test`.

use std::path::Path;
use std::process::{Command, Output};

const RABI: &str = "\
electronic.eps1 = 0
electronic.eps2 = 0
electronic.j = 0.5
bath.kind = shared
bath.modes.0.omega = 1
bath.modes.0.g = 0.1
thermal.beta = 1
evolution.t_max = 10
evolution.n_steps = 50
task.kind = trajectory
output.basename = run
";

fn dimerbath(dir: &Path, config: &str, extra: &[&str]) -> Output {
    let path = dir.join("in.conf");
    std::fs::write(&path, format!("{config}output.directory = {}\n", dir.display())).unwrap();
    Command::new(env!("CARGO_BIN_EXE_dimerbath"))
        .args(extra)
        .arg(&path)
        .output()
        .unwrap()
}

#[test]
fn trajectory_writes_csv_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dimerbath(dir.path(), RABI, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("time,pop_site1,pop_site2,coh_re,coh_im,coh_abs"));
    assert_eq!(csv.lines().count(), 52);
    let report = std::fs::read_to_string(dir.path().join("run.report")).unwrap();
    assert!(report.contains("status = ok"));
    assert!(report.contains("check.model.unitarity = pass"), "{report}");
}

#[test]
fn single_thread_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = dimerbath(dir.path(), RABI, &["--threads", "1"]);
        assert_eq!(out.status.code(), Some(0));
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("run.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for bad in [
        RABI.replace("thermal.beta = 1", "thermal.beta = -1"),
        RABI.replace("bath.kind = shared", "bath.kind = shred"),
        format!("{RABI}unknown.key = 3\n"),
        RABI.replace("evolution.t_max = 10\n", ""),
    ] {
        let out = dimerbath(dir.path(), &bad, &[]);
        assert_eq!(out.status.code(), Some(2), "{bad}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("config-error"));
    }
    let missing = Command::new(env!("CARGO_BIN_EXE_dimerbath"))
        .arg(dir.path().join("absent.conf"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn dimension_cap_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let wide = RABI.replace("bath.kind = shared", "bath.kind = independent")
        + "bath.modes.1.omega = 1.5\nbath.modes.1.g = 0.1\nthermal.n_max_override = 10\n";
    let out = dimerbath(dir.path(), &wide, &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn failed_verification_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let compare = RABI.replace("task.kind = trajectory", "task.kind = compare\ntask.kind_b = independent")
        + "thermal.n_max_override = 3\n";
    let out = dimerbath(dir.path(), &compare, &[]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(dir.path().join("run.report")).unwrap();
    assert!(report.contains("status = verification-failed"));
}

#[test]
fn bundled_configs_parse_and_round_trip() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "conf") {
            let config = dimerbath_cli::parse_config(&std::fs::read_to_string(&path).unwrap())
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert_eq!(dimerbath_cli::parse_config(&config.to_text()).unwrap(), config);
            seen += 1;
        }
    }
    assert_eq!(seen, 9);
}
