use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn qbyte(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbyte"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("failed to start qbyte")
}

fn ok(args: &[&str], config: &Path, out: &Path) {
    let o = qbyte(args, config, out);
    assert!(
        o.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Reads a CSV into its header and rows of strings.
fn table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let h = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (h, rows)
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let (h, rows) = table(path);
    let k = h
        .iter()
        .position(|c| c == name)
        .unwrap_or_else(|| panic!("no column {name} in {h:?}"));
    rows.iter().map(|r| r[k].parse().unwrap()).collect()
}

const SMALL_BYTE: &str = r#"
[trap]
ion_count = 8
secular_frequency_hz = 124e3

[field]
gradient_t_per_m = 18.8
first_ion_offset_hz = 5.486e6

[pulses]
rabi_hz = 20e3
duration_s = 25e-6

[benchmark]
n_values = [0, 40, 80]
trials = 200
seed = 11
addressed_ions = [4]
duration_sweep_s = [24e-6, 25e-6]
sweep_pulses = 40
"#;

#[test]
fn benchmark_outputs_are_byte_identical_across_runs_and_threads() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "b.toml", SMALL_BYTE);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["benchmark"], &cfg, &a);
    ok(&["benchmark", "--threads", "1"], &cfg, &b);
    for f in [
        "counts.csv",
        "fidelity.csv",
        "benchmark.json",
        "duration_sweep.csv",
        "benchmark_manifest.json",
    ] {
        let x = std::fs::read(a.join(f)).unwrap();
        let y = std::fs::read(b.join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
    let c = dir.path().join("c");
    ok(&["benchmark", "--seed", "12"], &cfg, &c);
    assert_ne!(
        std::fs::read(a.join("counts.csv")).unwrap(),
        std::fs::read(c.join("counts.csv")).unwrap()
    );
}

#[test]
fn manifest_records_config_hash_and_outputs() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "b.toml", SMALL_BYTE);
    let out = dir.path().join("o");
    ok(&["positions", "--seed", "5"], &cfg, &out);
    let m: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("positions_manifest.json")).unwrap())
            .unwrap();
    assert_eq!(m["seed"], 5);
    assert_eq!(m["command"], "positions");
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    let files = m["outputs"].as_array().unwrap();
    assert!(files
        .iter()
        .any(|f| f.to_string().contains("positions.csv")));
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o");
    let unknown = write_config(
        &dir,
        "u.toml",
        &format!("{SMALL_BYTE}\n[model]\nbogus = 1\n"),
    );
    let invalid = write_config(
        &dir,
        "i.toml",
        &SMALL_BYTE.replace("ion_count = 8", "ion_count = 0"),
    );
    let syntax = write_config(&dir, "s.toml", "[trap\nion_count = 3");
    for cfg in [unknown, invalid, syntax, dir.path().join("missing.toml")] {
        let o = qbyte(&["positions"], &cfg, &out);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn zero_pulses_recover_readout_fidelity() {
    let dir = TempDir::new().unwrap();
    let text = SMALL_BYTE
        .replace("n_values = [0, 40, 80]", "n_values = [0]")
        .replace("trials = 200", "trials = 4000")
        .replace("duration_sweep_s = [24e-6, 25e-6]", "");
    let cfg = write_config(
        &dir,
        "z.toml",
        &format!("{text}\n[model]\nreadout_p = 0.975\n"),
    );
    let out = dir.path().join("o");
    ok(&["benchmark"], &cfg, &out);
    let f = column(&out.join("fidelity.csv"), "fidelity");
    assert_eq!(f.len(), 7);
    let sigma = (0.975f64 * 0.025 / 4000.0).sqrt();
    for v in f {
        assert!((v - 0.975).abs() < 4.0 * sigma, "{v}");
    }
}

#[test]
fn single_ion_spectrum_has_one_peak_at_the_pi_line() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o");
    let cfg = configs().join("single_ion.toml");
    ok(&["spectrum"], &cfg, &out);
    let (h, _) = table(&out.join("spectrum.csv"));
    assert_eq!(h, ["frequency_hz", "bright_probability_ion1"]);
    let f = column(&out.join("spectrum.csv"), "frequency_hz");
    let p = column(&out.join("spectrum.csv"), "bright_probability_ion1");
    let peaks: Vec<usize> = (1..p.len() - 1)
        .filter(|&k| p[k] > 0.5 && p[k] > p[k - 1] && p[k] >= p[k + 1])
        .collect();
    assert_eq!(peaks.len(), 1, "{peaks:?}");
    assert!((f[peaks[0]] - 12.642_812_118e9).abs() < 10e3);
}

#[test]
fn rabi_scan_of_first_ion() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o");
    ok(&["rabi"], &configs().join("byte.toml"), &out);
    let path = out.join("rabi.csv");
    let t = column(&path, "duration_s");
    let p1 = column(&path, "bright_probability_ion1");
    let p2 = column(&path, "bright_probability_ion2");
    let k = (0..p1.len())
        .filter(|&k| t[k] < 15e-6)
        .max_by(|&a, &b| p1[a].total_cmp(&p1[b]))
        .unwrap();
    let pi_time = 1.0 / (2.0 * 54.1e3);
    assert!((t[k] - pi_time).abs() < 0.2e-6, "{}", t[k]);
    assert!(p1[k] > 0.99);
    assert!(p2.iter().all(|&x| x < 1e-3));
}

#[test]
fn scaling_reports_light_shift_budget() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o");
    ok(&["scaling"], &configs().join("byte.toml"), &out);
    let (_, rows) = table(&out.join("scaling.csv"));
    let light = rows.iter().find(|r| r[0] == "light_shift").unwrap();
    let v: f64 = light[1].parse().unwrap();
    assert!((5.9e-5..=6.2e-5).contains(&v), "{v}");
}

#[test]
fn optimize_reproduces_three_ion_solution() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o");
    ok(&["optimize"], &configs().join("three_ion.toml"), &out);
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("optimize.json")).unwrap()).unwrap();
    let tau = v["tau"].as_f64().unwrap();
    let omega = v["omega"].as_f64().unwrap();
    assert!((tau - 8.634e-6).abs() < 2e-9, "{tau}");
    assert!((omega - 57.91e3).abs() < 10.0, "{omega}");
    assert!((v["objective_argmin"].as_f64().unwrap() - tau).abs() < 0.02e-6);
}

#[test]
fn oracle_estimates_agree() {
    let dir = TempDir::new().unwrap();
    let text = format!(
        "{SMALL_BYTE}\n[oracle]\ncrosstalk = [1e-4]\nn_values = [250, 1250]\nwalkers = 4000\nsequences = 600\n"
    );
    let cfg = write_config(&dir, "o.toml", &text);
    let out = dir.path().join("o");
    ok(&["oracle"], &cfg, &out);
    let pulls = column(&out.join("oracle.csv"), "max_pull_sigma");
    assert_eq!(pulls.len(), 2);
    assert!(pulls.iter().all(|&p| p < 3.0), "{pulls:?}");
}

#[test]
fn every_example_config_runs_positions() {
    let dir = TempDir::new().unwrap();
    for name in ["byte.toml", "single_ion.toml", "three_ion.toml"] {
        let out = dir.path().join(name);
        ok(&["positions"], &configs().join(name), &out);
        let (h, rows) = table(&out.join("positions.csv"));
        assert!(h.iter().any(|c| c.ends_with("_hz")));
        assert!(!rows.is_empty());
    }
}
