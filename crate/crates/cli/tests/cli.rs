use std::process::Command;

fn dfig() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dfig"))
}

#[test]
fn simulate_then_replot() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("short.txt");
    std::fs::write(&scenario, "wind_speed = 10\nduration = 10\npd_schedule = 0:0.3\n").unwrap();
    let out = dir.path().join("run");
    let status = dfig()
        .args(["simulate", "--scenario"])
        .arg(&scenario)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for f in ["scenario.txt", "results.csv", "plots/active_power.svg", "plots/pitch.svg"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 101);

    let replot = dir.path().join("replot");
    let status = dfig()
        .args(["plot", "--log"])
        .arg(out.join("results.csv"))
        .arg("--out")
        .arg(&replot)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(replot.join("rotor_speed.svg").is_file());
}

#[test]
fn invalid_scenario_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("bad.txt");
    std::fs::write(&scenario, "w_p = -1\n").unwrap();
    let out = dfig()
        .args(["simulate", "--scenario"])
        .arg(&scenario)
        .arg("--out")
        .arg(dir.path().join("run"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn missing_file_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dfig()
        .args(["simulate", "--scenario"])
        .arg(dir.path().join("nope.txt"))
        .arg("--out")
        .arg(dir.path().join("run"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn quadratic_suite_passes() {
    let out = dfig().args(["verify", "--suite", "quadratic"]).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert_eq!(stdout.matches("PASS").count(), 3);
}
