use std::fs;
use std::path::Path;

use fracquench::cli::config::{emit_config, parse_config, ConfigError, ConfigLayers};
use fracquench::cli::main_with_args;

fn cli(out: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["fracquench".to_string(), "--out".into(), out.display().to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    main_with_args(argv)
}

#[test]
fn config_file_with_comments_and_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pi.cfg");
    fs::write(
        &path,
        "# pi interval\nsigma=2\ntheta=1\n\na=3.14159265   # close enough\nb=0.5\nsnapshot_policy=last:5\n",
    )
    .unwrap();
    let c = parse_config(&path, &["b=-0.5", "L=80"]).unwrap();
    assert_eq!(c.spec.b, -0.5);
    assert_eq!(c.intervals, 80);
    assert_eq!(c.spec.a, 3.14159265);

    let missing = dir.path().join("nope.cfg");
    let no: [&str; 0] = [];
    assert!(matches!(parse_config(&missing, &no), Err(ConfigError::Io { .. })));
}

#[test]
fn emitted_config_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let original = ConfigLayers::new()
        .preset("fractional")
        .unwrap()
        .overrides(&["courant_cap=0.25", "stability_mode=enforce", "solver=lu"])
        .unwrap()
        .build()
        .unwrap();
    let path = dir.path().join("round.cfg");
    fs::write(&path, emit_config(&original).unwrap()).unwrap();
    let no: [&str; 0] = [];
    assert_eq!(parse_config(&path, &no).unwrap(), original);
}

#[test]
fn quench_sweep_csv_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "quench-sweep",
        "--preset",
        "pi-interval",
        "--set",
        "L=40",
        "--param",
        "b",
        "--values",
        "-2,-0.9,-0.4,0.4,0.9,0.95",
    ];
    assert_eq!(cli(a.path(), &args), 0);
    assert_eq!(cli(b.path(), &args), 0);
    let first = fs::read(a.path().join("quench-sweep.csv")).unwrap();
    let second = fs::read(b.path().join("quench-sweep.csv")).unwrap();
    assert_eq!(first, second);

    let text = String::from_utf8(first).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "b,T_a,x_star,v_peak,vt_peak");
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("-2,0.5"));

    let gp = fs::read_to_string(a.path().join("quench-sweep.gp")).unwrap();
    assert!(gp.contains("'quench-sweep.dat'"));
    assert!(a.path().join("quench-sweep.dat").exists());
}

#[test]
fn timing_column_is_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["run", "--preset", "two-interval", "--set", "L=20"];
    assert_eq!(cli(dir.path(), &args), 0);
    let plain = fs::read_to_string(dir.path().join("run.csv")).unwrap();
    assert!(!plain.contains("wall_s"));
    let mut timed = args.to_vec();
    timed.push("--timing");
    assert_eq!(cli(dir.path(), &timed), 0);
    let timed = fs::read_to_string(dir.path().join("run.csv")).unwrap();
    assert!(timed.lines().next().unwrap().ends_with(",wall_s"));
}

#[test]
fn non_quenching_rows_leave_cells_empty() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "quench-sweep",
        "--preset",
        "critical-length",
        "--set",
        "L=20",
        "--set",
        "t_max=2",
        "--param",
        "a",
        "--values",
        "1,3",
    ];
    assert_eq!(cli(dir.path(), &args), 0);
    let text = fs::read_to_string(dir.path().join("quench-sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "a,T_a,x_star,v_peak,vt_peak");
    assert_eq!(lines[1], "1,,,,");
    assert!(lines[2].starts_with("3,") && !lines[2].contains(",,"));
}

#[test]
fn location_writes_plots() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(dir.path(), &["location", "--set", "L=40"]), 0);
    for stem in ["location_cross_section", "location_peak_trajectory", "location_surface"] {
        let gp = fs::read_to_string(dir.path().join(format!("{stem}.gp"))).unwrap();
        assert!(gp.contains(&format!("'{stem}.dat'")), "{stem}");
        let dat = fs::read_to_string(dir.path().join(format!("{stem}.dat"))).unwrap();
        assert!(dat.lines().any(|l| !l.starts_with('#') && !l.is_empty()));
    }
    let surface = fs::read_to_string(dir.path().join("location_surface.dat")).unwrap();
    let triples = surface
        .lines()
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .count();
    // 40 retained snapshots x 41 nodes.
    assert_eq!(triples, 40 * 41);
    let csv = fs::read_to_string(dir.path().join("location.csv")).unwrap();
    assert!(csv.starts_with("b,x_star,T_a,h\n0.5,"));
}

#[test]
fn critical_length_sweep_curve() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "critical-length",
        "--set",
        "L=20",
        "--a-lo",
        "0.8",
        "--a-hi",
        "3",
        "--tol",
        "0.05",
        "--param",
        "b",
        "--values",
        "-0.5,0.5",
    ];
    assert_eq!(cli(dir.path(), &args), 0);
    let csv = fs::read_to_string(dir.path().join("critical-length.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    // Convection towards the origin shortens the critical length.
    assert!(rows[0][1] > rows[1][1]);
    assert!(dir.path().join("critical-length.gp").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(dir.path(), &["run", "--set", "sigma=2.5"]), 1);
    assert_eq!(cli(dir.path(), &["run", "--set", "bogus=1"]), 1);
    assert_eq!(cli(dir.path(), &["run", "--preset", "missing"]), 1);
    assert_eq!(
        cli(dir.path(), &["critical-length", "--set", "L=20", "--a-lo", "0.5", "--a-hi", "1"]),
        1
    );
    assert_eq!(cli(dir.path(), &["verify", "--suite", "weights"]), 0);
    // Default a = pi quenches long before this horizon would matter.
    assert_eq!(cli(dir.path(), &["order", "--set", "L=20", "--t-eval", "5"]), 1);
    assert_eq!(cli(dir.path(), &["presets"]), 0);
    assert_eq!(cli(dir.path(), &["config", "--preset", "order"]), 0);
}
