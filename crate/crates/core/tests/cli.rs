use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const EXAMPLE1: &str = include_str!("../presets/example1.toml");
const EXAMPLE2: &str = include_str!("../presets/example2.toml");

fn ykreg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ykreg"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn design_example2_writes_gains() {
    let dir = TempDir::new().unwrap();
    let out = ykreg(dir.path(), &["design", "example2", "--out", "d.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("a_1   = -21.3792"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("d.json")).unwrap()).unwrap();
    let gains: Vec<f64> = json["gains"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let expected = [0.0, -21.3792, 13.2131, -13.2131, 21.3792];
    for (g, e) in gains.iter().zip(expected) {
        assert!((g - e).abs() < 5e-4, "{gains:?}");
    }
    assert_eq!(json["rank"].as_u64(), Some(5));
}

#[test]
fn design_defaults_to_named_result_file() {
    let dir = TempDir::new().unwrap();
    let out = ykreg(dir.path(), &["design", "example1"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("example1.design.json").exists());
}

#[test]
fn aliased_spacing_is_reported_as_quality_failure() {
    let dir = TempDir::new().unwrap();
    let text = EXAMPLE2.replace("spacing = 0.05", "spacing = 0.125");
    let path = write(&dir, "aliased.toml", &text);
    let out = ykreg(dir.path(), &["design", &path, "--out", "a.json"]);
    assert_eq!(out.status.code(), Some(2));
    let all = stdout(&out) + &stderr(&out);
    assert!(all.contains("l=1"), "{all}");
}

#[test]
fn spectrum_lists_harmonic_zeros() {
    let dir = TempDir::new().unwrap();
    let out = ykreg(dir.path(), &["spectrum", "example2", "--kind", "zeros"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("re,im,residual,kind,coincident\n"));
    let rows = csv_rows(&text);
    for l in [1.0, 2.0] {
        let target = 8.0 * std::f64::consts::PI * l;
        assert!(rows.iter().any(|r| {
            let (re, im): (f64, f64) = (r[0].parse().unwrap(), r[1].parse().unwrap());
            re.hypot(im - target) < 1e-6 && r[3] == "zero"
        }));
    }
}

#[test]
fn spectrum_of_root_free_region_is_header_only() {
    let dir = TempDir::new().unwrap();
    let text = EXAMPLE2
        .replace("re_min = -6.0", "re_min = 20.0")
        .replace("re_max = 3.0", "re_max = 25.0");
    let path = write(&dir, "empty.toml", &text);
    let out = ykreg(dir.path(), &["spectrum", &path, "--kind", "both"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout(&out), "re,im,residual,kind,coincident\n");
}

#[test]
fn verify_passes_for_presets() {
    let dir = TempDir::new().unwrap();
    for name in ["example1", "example2", "example3"] {
        let out = ykreg(dir.path(), &["verify", name]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", stdout(&out));
        assert!(stdout(&out).lines().last() == Some("PASS"));
    }
}

#[test]
fn verify_flags_unstable_loop_without_controller() {
    let dir = TempDir::new().unwrap();
    let text = EXAMPLE1
        .replace("kp = 1.27", "kp = 0.0")
        .replace("ki = 0.0536", "ki = 0.0");
    let path = write(&dir, "open.toml", &text);
    let out = ykreg(dir.path(), &["verify", &path]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("[FAIL] closed-loop roots"), "{}", stdout(&out));
}

#[test]
fn verify_separates_stability_from_regulation() {
    let dir = TempDir::new().unwrap();
    let text = EXAMPLE2
        .replace(
            "    { delay = 0.0, coeffs = [-2.0, 1.0] },\n    { delay = 1.0, coeffs = [-1.0] },",
            "    { delay = 0.0, coeffs = [1.0, 1.0] },",
        )
        .replace("kp = 10.0", "kp = 0.0")
        .replace("ki = 10.0", "ki = 0.0")
        .replace("count = 4", "count = 4\ngains = [0.0, 0.0, 0.0, 0.0, 0.0]");
    let path = write(&dir, "stable.toml", &text);
    let out = ykreg(dir.path(), &["verify", &path]);
    let text = stdout(&out);
    assert_eq!(out.status.code(), Some(2), "{text}");
    assert!(text.contains("[PASS] factor stability"), "{text}");
    assert!(text.contains("[PASS] closed-loop roots"), "{text}");
    assert!(text.contains("[FAIL] regulation"), "{text}");
}

#[test]
fn freqresp_has_requested_grid_and_notches() {
    let dir = TempDir::new().unwrap();
    let out = ykreg(
        dir.path(),
        &["freqresp", "example2", "--wmin", "0", "--wmax", "50.26548245743669", "--points", "3"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("omega,abs_S,arg_S\n"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 3);
    for r in &rows {
        let mag: f64 = r[1].parse().unwrap();
        assert!(mag < 1e-8, "{r:?}");
    }
}

#[test]
fn simulate_reports_suppression() {
    let dir = TempDir::new().unwrap();
    let out = ykreg(dir.path(), &["simulate", "example2", "--out", "y.csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("residual before activation"));
    let csv = std::fs::read_to_string(dir.path().join("y.csv")).unwrap();
    assert!(csv.starts_with("t,y,u,d,e\n"));
    assert_eq!(csv.lines().count(), 12_002);
}

#[test]
fn zero_disturbance_gives_zero_residuals() {
    let dir = TempDir::new().unwrap();
    let text = EXAMPLE2
        .replace("amplitudes = [1.0, 1.0]", "amplitudes = [0.0, 0.0]")
        .replace("initial_output = 1.0", "initial_output = 0.0");
    let path = write(&dir, "quiet.toml", &text);
    let out = ykreg(dir.path(), &["simulate", &path, "--out", "q.csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("before activation 0 | after 0"), "{}", stdout(&out));
}

#[test]
fn output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = ykreg(dir.path(), &["simulate", "example1"]);
    let b = ykreg(dir.path(), &["simulate", "example1"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let a = ykreg(dir.path(), &["spectrum", "example1"]);
    let b = ykreg(dir.path(), &["spectrum", "example1"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn unknown_key_is_an_input_error_with_line() {
    let dir = TempDir::new().unwrap();
    let text = EXAMPLE2.replace("count = 4", "count = 4\ncolour = 3");
    let path = write(&dir, "typo.toml", &text);
    let out = ykreg(dir.path(), &["design", &path]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("colour"), "{}", stderr(&out));
    assert!(stderr(&out).contains("line"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    assert_eq!(ykreg(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(ykreg(dir.path(), &["design"]).status.code(), Some(1));
    assert_eq!(ykreg(dir.path(), &["design", "nope"]).status.code(), Some(1));
    assert_eq!(ykreg(dir.path(), &["--help"]).status.code(), Some(0));
}
