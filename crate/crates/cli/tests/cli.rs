use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn presets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("presets")
}

fn dualgate(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dualgate"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("DUALGATE_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = dualgate(out, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn config_file(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const QUIET: &str = "noise.laser = off\nnoise.motional = off\nnoise.heating = off\nnoise.offres = off\nnoise.spam = off\n";

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cases: [(&[&str], &str); 4] = [
        (&["levels", "--b-min", "10", "--b-max", "14", "--points", "9"], "levels.csv"),
        (&["offres"], "offres.csv"),
        (&["parity", "--shots", "200", "--seed", "5", "--nmax", "3", "--pair", "dd"], "parity.csv"),
        (&["budget", "--nmax", "3"], "budget.csv"),
    ];
    for (args, file) in cases {
        ok(a.path(), args);
        ok(b.path(), args);
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert_eq!(x, y, "{file} differs between runs");
    }
}

#[test]
fn seed_is_recorded_and_changes_sampled_output() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(a.path(), &["parity", "--shots", "100", "--seed", "1", "--nmax", "2"]);
    ok(b.path(), &["parity", "--shots", "100", "--seed", "2", "--nmax", "2"]);
    let x = std::fs::read_to_string(a.path().join("parity.csv")).unwrap();
    let y = std::fs::read_to_string(b.path().join("parity.csv")).unwrap();
    assert!(x.contains("# seed: 1\n") && y.contains("# seed: 2\n"));
    let body = |s: &str| s.lines().filter(|l| !l.starts_with('#')).map(String::from).collect::<Vec<_>>();
    assert_eq!(body(&x)[0], "phase_rad,parity,stderr");
    assert_ne!(body(&x), body(&y));
}

#[test]
fn csv_carries_provenance_header() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["modes"]);
    let text = std::fs::read_to_string(d.path().join("modes.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# dualgate "));
    assert_eq!(lines[1], "# command: modes");
    assert!(lines[2].starts_with("# config_sha256: ") && lines[2].len() == "# config_sha256: ".len() + 64);
    assert_eq!(lines[4].split(',').next(), Some("mode"));
    assert_eq!(lines.len(), 7);
}

#[test]
fn shipped_presets_parse_cleanly() {
    let d = tempfile::tempdir().unwrap();
    for preset in ["operating-point.cfg", "alt-motional-coherence.cfg"] {
        let path = presets().join(preset);
        let o = dualgate(d.path(), &["--config", path.to_str().unwrap(), "calibrate"]);
        assert!(o.status.success());
        assert!(o.stderr.is_empty(), "{preset}: {}", String::from_utf8_lossy(&o.stderr));
    }
    // the operating-point preset spells out the defaults
    let with = tempfile::tempdir().unwrap();
    let without = tempfile::tempdir().unwrap();
    ok(with.path(), &["--config", presets().join("operating-point.cfg").to_str().unwrap(), "modes"]);
    ok(without.path(), &["modes"]);
    assert_eq!(
        std::fs::read(with.path().join("modes.csv")).unwrap(),
        std::fs::read(without.path().join("modes.csv")).unwrap()
    );
}

#[test]
fn config_errors_exit_with_code_three() {
    let d = tempfile::tempdir().unwrap();
    let bad_type = config_file(d.path(), "a.cfg", "# comment\n\nnoise.tau_s_ms=abc\n");
    let o = dualgate(d.path(), &["--config", bad_type.to_str().unwrap(), "gate"]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3") && err.contains("noise.tau_s_ms"), "{err}");

    let unknown = config_file(d.path(), "b.cfg", "noize.tau = 1\n");
    let o = dualgate(d.path(), &["--config", unknown.to_str().unwrap(), "gate"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key `noize.tau`"));

    let o = dualgate(d.path(), &["--config", d.path().join("missing.cfg").to_str().unwrap(), "gate"]);
    assert_eq!(o.status.code(), Some(3));

    let missing_constants = config_file(d.path(), "c.cfg", "\natomic.constants_file = nowhere.txt\n");
    let o = dualgate(d.path(), &["--config", missing_constants.to_str().unwrap(), "levels"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn usage_and_numerical_errors_have_their_own_codes() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(dualgate(d.path(), &["gate", "--pair", "xx"]).status.code(), Some(2));
    assert_eq!(dualgate(d.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(dualgate(d.path(), &["levels", "--b-min", "5", "--b-max", "1"]).status.code(), Some(2));
    // a step far beyond the stability limit of the integrator
    let coarse = config_file(d.path(), "coarse.cfg", "numerics.dt_ns = 10000\nnumerics.n_max = 2\n");
    let o = dualgate(d.path(), &["--config", coarse.to_str().unwrap(), "gate"]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn output_directory_comes_from_the_environment() {
    let d = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_dualgate"))
        .arg("calibrate")
        .env("DUALGATE_OUT_DIR", d.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(d.path().join("calibrate.csv").is_file());
}

#[test]
fn single_point_field_range_gives_one_row() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["levels", "--b-min", "12.2", "--b-max", "12.2", "--points", "1"]);
    let text = std::fs::read_to_string(d.path().join("levels.csv")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 1);
    // shifts are referenced to the working field
    let cols: Vec<f64> = rows[0].split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(cols[1], 0.0);
    assert_eq!(cols[2], 0.0);
}

#[test]
fn levels_show_the_d_qubit_turning_point() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["levels", "--b-min", "0", "--b-max", "20", "--points", "201"]);
    let text = std::fs::read_to_string(d.path().join("levels.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    let min = rows.iter().min_by(|a, b| a[2].total_cmp(&b[2])).unwrap();
    assert!((min[0] - 12.3).abs() <= 0.2, "minimum of f_D at {} G", min[0]);
}

#[test]
fn every_pair_runs_from_one_config() {
    let d = tempfile::tempdir().unwrap();
    let quiet = config_file(d.path(), "quiet.cfg", QUIET);
    for pair in ["ss", "dd", "sd"] {
        let report = ok(d.path(), &["--config", quiet.to_str().unwrap(), "--pair", pair, "gate"]);
        let line = report.lines().find(|l| l.contains("state fidelity")).unwrap();
        let f: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
        assert!(f >= 0.999, "{pair}: {f}");
    }
}

#[test]
fn budget_has_five_rows_and_zeros_when_quiet() {
    let d = tempfile::tempdir().unwrap();
    let quiet = config_file(d.path(), "quiet.cfg", QUIET);
    ok(d.path(), &["--config", quiet.to_str().unwrap(), "--nmax", "2", "budget"]);
    let text = std::fs::read_to_string(d.path().join("budget.csv")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 5);
    for r in rows {
        let v: f64 = r.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(v, 0.0, "{r}");
    }
}
