//! End-to-end tests of the `vms` binary: record counts and determinism of
//! `simulate`, the verdict and exit status of `validate`, and the `inspect`
//! report, all through the compiled executable.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicU32, Ordering};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vms"))
}

fn model(name: &str) -> String {
    format!("{}/../../models/{name}", env!("CARGO_MANIFEST_DIR"))
}

/// A fresh path in the system temp directory; unique per test and process so
/// parallel tests never collide.
fn temp_path(label: &str, extension: &str) -> PathBuf {
    static COUNTER: AtomicU32 = AtomicU32::new(0);
    let unique = COUNTER.fetch_add(1, Ordering::Relaxed);
    std::env::temp_dir().join(format!(
        "vms_cli_test_{}_{label}_{unique}.{extension}",
        std::process::id()
    ))
}

fn stdout_of(output: &Output) -> String {
    assert!(
        output.status.success(),
        "command failed with {:?}\nstdout: {}\nstderr: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout.clone()).unwrap()
}

/// Split a CSV file into its header and data rows.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|line| {
            line.split(',')
                .map(|v| v.parse::<f64>().expect("numeric CSV field"))
                .collect()
        })
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header
        .iter()
        .position(|c| c == name)
        .unwrap_or_else(|| panic!("column {name} in {header:?}"))
}

#[test]
fn simulate_writes_one_record_per_step_plus_initial() {
    let out = temp_path("count", "csv");
    stdout_of(
        &bin()
            .args(["simulate", "--model", &model("floating_vms.json")])
            .args(["--dt", "1e-3", "--duration", "1.0", "--seed", "9"])
            .args(["--out", out.to_str().unwrap()])
            .output()
            .unwrap(),
    );
    let (header, rows) = read_csv(&out);
    assert_eq!(rows.len(), 1001);
    let expected_prefix = ["t", "r11", "r12", "r13", "r21", "r22", "r23", "r31", "r32", "r33"];
    assert_eq!(&header[..10], &expected_prefix);
    assert_eq!(header.len(), 13 + 2 + 6 + 2 + 3 + 6, "floating 2-link layout");
    assert_eq!(rows[0][column(&header, "t")], 0.0);
    std::fs::remove_file(&out).unwrap();
}

#[test]
fn simulate_with_duration_equal_to_dt_writes_two_records() {
    let out = temp_path("short", "csv");
    stdout_of(
        &bin()
            .args(["simulate", "--model", &model("pendulum.json")])
            .args(["--dt", "0.5", "--duration", "0.5"])
            .args(["--out", out.to_str().unwrap()])
            .output()
            .unwrap(),
    );
    let (_, rows) = read_csv(&out);
    assert_eq!(rows.len(), 2);
    std::fs::remove_file(&out).unwrap();
}

#[test]
fn simulate_reruns_are_byte_identical() {
    let first = temp_path("rerun_a", "csv");
    let second = temp_path("rerun_b", "csv");
    for out in [&first, &second] {
        stdout_of(
            &bin()
                .args(["simulate", "--model", &model("planar_vms.json")])
                .args(["--dt", "1e-3", "--duration", "0.4", "--seed", "12"])
                .args(["--out", out.to_str().unwrap()])
                .output()
                .unwrap(),
        );
    }
    let a = std::fs::read(&first).unwrap();
    let b = std::fs::read(&second).unwrap();
    assert!(!a.is_empty() && a == b, "identical inputs must reproduce the file");
    std::fs::remove_file(&first).unwrap();
    std::fs::remove_file(&second).unwrap();
}

#[test]
fn formulations_land_on_the_same_terminal_shape() {
    let mut terminal = Vec::new();
    for formulation in ["ph", "ph-decoupled", "lagrangian"] {
        let out = temp_path(&format!("form_{formulation}"), "csv");
        stdout_of(
            &bin()
                .args(["simulate", "--model", &model("floating_vms.json")])
                .args(["--formulation", formulation])
                .args(["--dt", "1e-3", "--duration", "0.5", "--seed", "21"])
                .args(["--out", out.to_str().unwrap()])
                .output()
                .unwrap(),
        );
        let (header, rows) = read_csv(&out);
        let last = rows.last().unwrap();
        terminal.push((last[column(&header, "q1")], last[column(&header, "q2")]));
        std::fs::remove_file(&out).unwrap();
    }
    for (q1, q2) in &terminal[1..] {
        assert!((q1 - terminal[0].0).abs() < 1e-5, "q1: {q1} vs {}", terminal[0].0);
        assert!((q2 - terminal[0].1).abs() < 1e-5, "q2: {q2} vs {}", terminal[0].1);
    }
}

#[test]
fn no_gravity_switch_zeroes_the_potential_column() {
    let out = temp_path("nograv", "csv");
    stdout_of(
        &bin()
            .args(["simulate", "--model", &model("floating_vms.json")])
            .args(["--dt", "1e-3", "--duration", "0.1", "--seed", "2", "--no-gravity"])
            .args(["--out", out.to_str().unwrap()])
            .output()
            .unwrap(),
    );
    let (header, rows) = read_csv(&out);
    let h_pot = column(&header, "H_pot");
    let h_kin = column(&header, "H_kin");
    assert!(rows.iter().all(|row| row[h_pot] == 0.0));
    // Without gravity or inputs the kinetic energy is the invariant total.
    let drift = (rows.last().unwrap()[h_kin] - rows[0][h_kin]).abs();
    assert!(drift <= 1e-6 * (1.0 + rows[0][h_kin]), "drift {drift:.3e}");
    std::fs::remove_file(&out).unwrap();
}

#[test]
fn initial_and_schedule_files_shape_the_run() {
    let initial = temp_path("initial", "json");
    std::fs::write(
        &initial,
        r#"{
            "base": { "rotation": [[1,0,0],[0,1,0],[0,0,1]], "translation": [0.5, 0.0, 1.0] },
            "q": [0.3, -0.5],
            "pi": [0.1, 0.0]
        }"#,
    )
    .unwrap();
    let schedule = temp_path("schedule", "json");
    std::fs::write(
        &schedule,
        r#"{
            "gravity_enabled": false,
            "entries": [
                { "start": 0.0, "tau_act": [0.4, -0.2] },
                { "start": 0.1, "tau_act": [0.0, 0.0], "ee_wrench": [0, 0, 0, 0.1, 0, 0] }
            ]
        }"#,
    )
    .unwrap();
    let out = temp_path("shaped", "csv");
    stdout_of(
        &bin()
            .args(["simulate", "--model", &model("floating_vms.json")])
            .args(["--dt", "1e-3", "--duration", "0.2"])
            .args(["--initial", initial.to_str().unwrap()])
            .args(["--schedule", schedule.to_str().unwrap()])
            .args(["--out", out.to_str().unwrap()])
            .output()
            .unwrap(),
    );
    let (header, rows) = read_csv(&out);
    let first = &rows[0];
    assert_eq!(first[column(&header, "q1")], 0.3);
    assert_eq!(first[column(&header, "q2")], -0.5);
    assert_eq!(first[column(&header, "x")], 0.5);
    assert_eq!(first[column(&header, "z")], 1.0);
    assert_eq!(first[column(&header, "pi1")], 0.1);
    // The joint torque does work from the first step onward.
    assert!(first[column(&header, "power_in")] != 0.0);
    assert!(rows.iter().all(|row| row[column(&header, "H_pot")] == 0.0));
    for path in [&initial, &schedule, &out] {
        std::fs::remove_file(path).unwrap();
    }
}

#[test]
fn validate_passes_and_reports_every_check() {
    let output = bin()
        .args(["validate", "--model", &model("floating_vms.json")])
        .args(["--samples", "40", "--seed", "5"])
        .output()
        .unwrap();
    let text = stdout_of(&output);
    assert!(text.contains("seed 5"), "seed line: {text}");
    let check_lines: Vec<&str> = text.lines().filter(|l| l.starts_with("CHECK ")).collect();
    assert_eq!(check_lines.len(), 21, "one line per check: {text}");
    assert!(check_lines.iter().all(|l| l.ends_with("PASS")));
    assert!(text.contains("all 21 checks passed"));
}

#[test]
fn validate_output_is_deterministic_for_a_seed() {
    let run = || {
        stdout_of(
            &bin()
                .args(["validate", "--model", &model("planar_vms.json")])
                .args(["--samples", "30", "--seed", "8"])
                .output()
                .unwrap(),
        )
    };
    assert_eq!(run(), run());
}

#[test]
fn validate_rejects_a_malformed_model() {
    let path = temp_path("bad_model", "json");
    // Asymmetric rotational inertia: fails load-time validation.
    std::fs::write(
        &path,
        r#"{
            "base": { "kind": "fixed" },
            "links": [
                {
                    "name": "bent",
                    "joint": { "kind": "revolute", "axis": [0, 0, 1] },
                    "zero_pose": { "rotation": [[1,0,0],[0,1,0],[0,0,1]], "translation": [0,0,0] },
                    "inertia": [
                        [1.0, 0.001, 0, 0, 0, 0],
                        [0, 1.0, 0, 0, 0, 0],
                        [0, 0, 1.0, 0, 0, 0],
                        [0, 0, 0, 1.0, 0, 0],
                        [0, 0, 0, 0, 1.0, 0],
                        [0, 0, 0, 0, 0, 1.0]
                    ]
                }
            ],
            "end_effector": { "zero_pose": { "rotation": [[1,0,0],[0,1,0],[0,0,1]], "translation": [0,0,0] } },
            "gravity": [0, 0, -9.81]
        }"#,
    )
    .unwrap();
    let output = bin()
        .args(["validate", "--model", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("symmetric"), "stderr: {stderr}");
    assert!(stderr.contains("bent"), "stderr names the link: {stderr}");
    std::fs::remove_file(&path).unwrap();
}

#[test]
fn inspect_reports_the_mass_blocks() {
    // Point-mass pendulum: M_m = m·r² = 1.2 · 0.25 = 0.3 at every shape.
    let text = stdout_of(
        &bin()
            .args(["inspect", "--model", &model("pendulum.json"), "--q", "0.7"])
            .output()
            .unwrap(),
    );
    assert!(text.contains("fixed base (0 DoF), 1 chain joint(s)"), "{text}");
    assert!(text.contains("0.300000"), "manipulator inertia: {text}");

    let free = stdout_of(
        &bin()
            .args(["inspect", "--model", &model("free_body.json")])
            .output()
            .unwrap(),
    );
    assert!(free.contains("floating base (6 DoF), 0 chain joint(s)"), "{free}");
}

#[test]
fn inspect_rejects_a_shape_of_the_wrong_size() {
    let output = bin()
        .args(["inspect", "--model", &model("pendulum.json"), "--q", "0.1,0.2"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("must have 1"), "stderr: {stderr}");
}
