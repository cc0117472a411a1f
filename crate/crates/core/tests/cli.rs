use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL_ROOM: &str = "\
name = small_room

[geometry]
width = 4.0
height = 3.0
exits = right:1.5:1.0
circles = 2.8:1.5:0.25
exterior_depth = 1.0
target_h = 0.2

[initial]
profile = block
region = 0.5, 0.5, 2.0, 2.5
rho0 = 1.5

[params]
p0 = 0.05

[run]
t_max = 3.0
snapshot_times = 0.0, 1.0
";

fn crowdflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crowdflow"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn crowdflow")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("cfg.txt");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_writes_artifacts_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_ROOM);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let out = crowdflow(&["run", "-c", &cfg, "-o", a.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = crowdflow(&["--sequential", "run", "-c", &cfg, "-o", b.to_str().unwrap()]);
    assert!(out.status.success());

    let series = fs::read_to_string(a.join("series.csv")).unwrap();
    assert_eq!(series, fs::read_to_string(b.join("series.csv")).unwrap());
    let mut lines = series.lines();
    assert_eq!(lines.next(), Some("t,M"));
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first[0], 0.0);
    assert!((first[1] - 1.5 * 1.5 * 2.0).abs() < 1e-9);

    for name in ["snapshot_t0000.000.vtk", "snapshot_t0001.000.vtk"] {
        let text = fs::read_to_string(a.join(name)).unwrap();
        assert!(text.starts_with("# vtk DataFile Version"));
        assert_eq!(text, fs::read_to_string(b.join(name)).unwrap());
    }
    let report = fs::read_to_string(a.join("report.txt")).unwrap();
    assert!(report.contains("t_evac_ped_s = "));
}

#[test]
fn unknown_key_is_reported_with_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL_ROOM.replace("p0 = 0.05", "p0 = 0.05\nspeed = 3"));
    let out = crowdflow(&["run", "-c", &cfg, "-o", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 18") && err.contains("speed"), "{err}");
}

#[test]
fn convergence_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = crowdflow(&[
        "convergence",
        "--case",
        "test1",
        "--levels",
        "400,1600,6400",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("convergence_test1_phi.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "N,h,E");
    assert_eq!(lines.len(), 5);
    for row in &lines[1..4] {
        let v: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(v.len(), 3);
        assert!(v[1] > 0.0 && v[2] > 0.0);
    }
    let footer = lines[4].strip_prefix("# p,C = ").unwrap();
    let pc: Vec<f64> = footer.split(',').map(|x| x.parse().unwrap()).collect();
    assert!(pc[0] > 0.5 && pc[1] > 0.0);
}

#[test]
fn sweep_reports_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL_ROOM.replace("snapshot_times = 0.0, 1.0", ""));
    let out_dir = dir.path().join("sweep");
    let out = crowdflow(&[
        "sweep",
        "--param",
        "v_max",
        "--values",
        "1.0,2.0",
        "-c",
        &cfg,
        "-o",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("sweep_v_max.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "v_max,T_evac,stop_time_s,stop_reason");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1.0,") && lines[2].starts_with("2.0,"));
    assert!(out_dir.join("v_max_1.0_series.csv").exists());
}

#[test]
fn bad_arguments_fail() {
    assert_eq!(crowdflow(&["convergence", "--case", "test4", "--levels", "1,2,3"]).status.code(), Some(1));
    assert_eq!(crowdflow(&["sweep", "--param", "tau", "--values", "1", "--scenario", "room_empty"]).status.code(), Some(1));
    assert_eq!(crowdflow(&["launch"]).status.code(), Some(2));
}
