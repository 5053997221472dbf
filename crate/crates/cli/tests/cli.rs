use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
[domain]
width = 0.02
height = 0.02
crack = 0.01 0 0.01 0.004

[material]
horizon = 0.004

[discretization]
h = 0.002
dt = 5e-8
t_end = 5e-7

[output]
cadence = 2
vtk = true
";

fn perifem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perifem"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("sim.ini");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_creates_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("a/b");
    let o = perifem(&["run", "--config", &cfg, "--output", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("energy.csv")).unwrap();
    assert!(csv.starts_with("step,t,kinetic,potential,total,crack_length,pe_crack,ge\n"));
    assert_eq!(csv.lines().count(), 1 + 1 + 10 / 2);
    assert!(out.join("fields_00000000.vtk").exists());
    assert!(out.join("fields_00000010.vtk").exists());
    assert!(out.join("run.log").exists());
}

#[test]
fn unwritable_output_exits_with_io_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let blocker = dir.path().join("blocker");
    std::fs::write(&blocker, "not a directory").unwrap();
    let out = blocker.join("out");
    let o = perifem(&["run", "--config", &cfg, "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(!o.stderr.is_empty());
}

#[test]
fn missing_config_file_is_io_error() {
    let o = perifem(&["calibrate", "--config", "/nonexistent/sim.ini"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &SMALL.replace("[material]\n", "[material]\ndensty = 1200\n"),
    );
    let o = perifem(&["calibrate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("density"));

    let cfg = write_config(
        dir.path(),
        &SMALL
            .replace("dt = 5e-8", "dt = 5e-6\n")
            .replace("t_end = 5e-7", "t_end = 5e-6"),
    );
    let o = perifem(&[
        "run",
        "--config",
        &cfg,
        "--output",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("discretization.dt"));

    assert_eq!(perifem(&["run"]).status.code(), Some(2));
    assert_eq!(perifem(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn calibrate_prints_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = perifem(&["calibrate", "--config", &cfg]);
    assert!(o.status.success());
    let s = String::from_utf8(o.stdout).unwrap();
    let line = s.trim();
    assert!(line.starts_with('{') && line.ends_with('}'), "{line}");
    for key in [
        "\"c\":",
        "\"beta\":",
        "\"c_bar\":",
        "\"m_j\":",
        "\"s_c_plus_at_horizon\":",
    ] {
        assert!(line.contains(key), "{key} in {line}");
    }
}

#[test]
fn cfl_prints_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = perifem(&["cfl", "--config", &cfg, "--seed", "3"]);
    assert!(o.status.success());
    let s = String::from_utf8(o.stdout).unwrap();
    assert!(s.trim().starts_with("{\"lambda_max\":"), "{s}");
    assert!(s.contains("\"branch\":"));
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("vtk = true", "vtk = false"));
    let mut csvs = Vec::new();
    for w in ["1", "4"] {
        let out = dir.path().join(format!("w{w}"));
        let o = perifem(&[
            "run",
            "--config",
            &cfg,
            "--workers",
            w,
            "--output",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        csvs.push(std::fs::read(out.join("energy.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn converge_writes_rate_table() {
    let dir = tempfile::tempdir().unwrap();
    let text = "\
[domain]
width = 0.016
height = 0.016

[material]
horizon = 0.004

[discretization]
h = 0.002
dt = 2e-8
t_end = 1e-7

[bc]
enabled = false

[initial]
displacement = sine
amplitude = 1e-5

[output]
csv = false
vtk = false

[study]
mesh_sizes = 0.004 0.002 0.001
times = 4e-8 1e-7
";
    let cfg = write_config(dir.path(), text);
    let out = dir.path().join("study");
    let o = perifem(&[
        "converge",
        "--config",
        &cfg,
        "--linearized",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("rates.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "time,alpha");
    assert_eq!(lines.len(), 3);
    for l in &lines[1..] {
        let alpha: f64 = l.split(',').nth(1).unwrap().parse().unwrap();
        assert!(alpha.is_finite());
    }
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let o = perifem(&["calibrate", "--config", path.to_str().unwrap()]);
        assert!(
            o.status.success(),
            "{}: {}",
            path.display(),
            String::from_utf8_lossy(&o.stderr)
        );
        count += 1;
    }
    assert!(count >= 3);
}
