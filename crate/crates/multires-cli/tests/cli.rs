//! Golden tests for the command-line surface: exit codes, error
//! messages, override semantics, output locations, and byte-level
//! determinism of the emitted files.

use std::path::{Path, PathBuf};
use std::process::Command;

use multires::linear::{self, LinearModelSpec};
use multires::{emit, BiasProfile, ProfileKind};

struct Drive {
    dir: tempfile::TempDir,
}

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Drive {
    fn new() -> Self {
        Drive { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self) -> &Path {
        self.dir.path()
    }

    fn write(&self, name: &str, contents: &str) -> PathBuf {
        let p = self.path().join(name);
        std::fs::write(&p, contents).unwrap();
        p
    }

    fn run_env(&self, args: &[&str], env: &[(&str, &str)]) -> Outcome {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_multires"));
        cmd.args(args).current_dir(self.path()).env_remove("MULTIRES_OUT");
        for (k, v) in env {
            cmd.env(k, v);
        }
        let out = cmd.output().expect("binary runs");
        Outcome {
            code: out.status.code().unwrap_or(-1),
            stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
            stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
        }
    }

    fn run(&self, args: &[&str]) -> Outcome {
        self.run_env(args, &[])
    }
}

const CURVE_JSON: &str = r#"{
    "profile": { "kind": "Polynomial", "params": { "xi": 1.0 } },
    "tau2": 0.5,
    "n": 50
}"#;

const RATES_JSON: &str = r#"{
    "profile": { "kind": "Polynomial", "params": { "xi": 1.0 } },
    "error": { "model": "linear-exact", "tau2": 0.5 },
    "n_grid": [100, 200, 400]
}"#;

const SIM_JSON: &str = r#"{
    "family": "linear",
    "profile": { "kind": "Exponential", "params": { "xi": 1.0 } },
    "tau2": 0.5,
    "n": 30,
    "reps": 20,
    "search_range": [0, 27],
    "methods": ["cv", "ic"],
    "master_seed": 99,
    "r_max_generation": 27
}"#;

#[test]
fn curve_writes_the_expected_table() {
    let d = Drive::new();
    d.write("curve.json", CURVE_JSON);
    let out = d.run(&["curve", "--config", "curve.json", "--out", "o"]);
    assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    assert!(out.stdout.contains("wrote"), "stdout: {}", out.stdout);
    assert!(out.stdout.contains("pe_exact.csv"));
    let rows = emit::read_pe_exact_csv(&d.path().join("o/pe_exact.csv")).unwrap();
    assert_eq!(rows.len(), 48);
    assert_eq!(rows[0].r, 0);
    assert_eq!(rows[47].r, 47);
    let spec = LinearModelSpec {
        profile: BiasProfile::unit(ProfileKind::Polynomial { xi: 1.0 }).unwrap(),
        tau2: 0.5,
        beta0: 0.0,
    };
    let want = linear::exact_pe(&spec, 50, 7).unwrap();
    assert!((rows[7].pe_exact - want).abs() <= 1e-15 * want);
}

#[test]
fn missing_config_exits_with_config_error() {
    let d = Drive::new();
    let out = d.run(&["curve", "--config", "/no/such.json"]);
    assert_eq!(out.code, 2);
    assert_eq!(
        out.stderr.trim(),
        "config error: cannot read config /no/such.json: No such file or directory (os error 2)"
    );
}

#[test]
fn unparseable_config_names_the_file() {
    let d = Drive::new();
    d.write("bad.json", "{\n");
    let out = d.run(&["curve", "--config", "bad.json"]);
    assert_eq!(out.code, 2);
    assert!(
        out.stderr.starts_with("config error: config bad.json does not parse:"),
        "stderr: {}",
        out.stderr
    );
}

#[test]
fn non_object_config_is_rejected() {
    let d = Drive::new();
    d.write("arr.json", "[1, 2]");
    let out = d.run(&["curve", "--config", "arr.json"]);
    assert_eq!(out.code, 2);
    assert_eq!(out.stderr.trim(), "config error: config arr.json must be a JSON object");
}

#[test]
fn unknown_field_is_a_config_error() {
    let d = Drive::new();
    d.write("curve.json", CURVE_JSON);
    let out = d.run(&["curve", "--config", "curve.json", "--set", "bogus=1"]);
    assert_eq!(out.code, 2);
    assert!(out.stderr.contains("unknown field `bogus`"), "stderr: {}", out.stderr);
}

#[test]
fn domain_errors_exit_3() {
    let d = Drive::new();
    d.write("curve.json", CURVE_JSON);
    let out = d.run(&["curve", "--config", "curve.json", "--set", "n=2"]);
    assert_eq!(out.code, 3);
    assert_eq!(
        out.stderr.trim(),
        "domain error: expectation does not exist: requires r <= n - 3, got r=0, n=2"
    );
}

#[test]
fn malformed_override_is_rejected() {
    let d = Drive::new();
    d.write("curve.json", CURVE_JSON);
    let out = d.run(&["curve", "--config", "curve.json", "--set", "tau2"]);
    assert_eq!(out.code, 2);
    assert!(
        out.stderr.contains("is not of the form key=value"),
        "stderr: {}",
        out.stderr
    );
}

#[test]
fn nested_override_changes_the_profile() {
    let d = Drive::new();
    d.write("curve.json", CURVE_JSON);
    let base = d.run(&["curve", "--config", "curve.json", "--out", "a"]);
    assert_eq!(base.code, 0);
    let out = d.run(&[
        "curve",
        "--config",
        "curve.json",
        "--out",
        "b",
        "--set",
        "profile.params.xi=2.5",
    ]);
    assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    let rows = emit::read_pe_exact_csv(&d.path().join("b/pe_exact.csv")).unwrap();
    let spec = LinearModelSpec {
        profile: BiasProfile::unit(ProfileKind::Polynomial { xi: 2.5 }).unwrap(),
        tau2: 0.5,
        beta0: 0.0,
    };
    let want = linear::exact_pe(&spec, 50, 7).unwrap();
    assert!((rows[7].pe_exact - want).abs() <= 1e-15 * want);
}

#[test]
fn array_index_override_replaces_one_grid_point() {
    let d = Drive::new();
    d.write("rates.json", RATES_JSON);
    let out = d.run(&["rates", "--config", "rates.json", "--out", "o", "--set", "n_grid.2=800"]);
    assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.path().join("o/rates.json")).unwrap())
            .unwrap();
    assert_eq!(report["points"][2]["n"], 800);
}

#[test]
fn array_index_out_of_bounds_is_reported() {
    let d = Drive::new();
    d.write("rates.json", RATES_JSON);
    let out = d.run(&["rates", "--config", "rates.json", "--set", "n_grid.7=100"]);
    assert_eq!(out.code, 2);
    assert!(
        out.stderr.contains("index 7 is out of bounds (array length 3)"),
        "stderr: {}",
        out.stderr
    );
}

#[test]
fn output_directory_resolution_order() {
    let d = Drive::new();
    d.write("curve.json", CURVE_JSON);
    // Environment fallback applies when --out is absent.
    let out = d.run_env(&["curve", "--config", "curve.json"], &[("MULTIRES_OUT", "envdir")]);
    assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    assert!(d.path().join("envdir/pe_exact.csv").exists());
    // An explicit --out wins over the environment.
    let out = d.run_env(
        &["curve", "--config", "curve.json", "--out", "flagdir"],
        &[("MULTIRES_OUT", "ignored")],
    );
    assert_eq!(out.code, 0);
    assert!(d.path().join("flagdir/pe_exact.csv").exists());
    assert!(!d.path().join("ignored").exists());
}

#[test]
fn svg_output_is_deterministic() {
    let d = Drive::new();
    d.write("curve.json", CURVE_JSON);
    for sub in ["a", "b"] {
        let out = d.run(&["curve", "--config", "curve.json", "--out", sub, "--svg"]);
        assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    }
    let a = std::fs::read(d.path().join("a/curve.svg")).unwrap();
    let b = std::fs::read(d.path().join("b/curve.svg")).unwrap();
    assert!(a.starts_with(b"<svg"));
    assert_eq!(a, b);
}

#[test]
fn simulate_rejects_svg() {
    let d = Drive::new();
    d.write("sim.json", SIM_JSON);
    let out = d.run(&["simulate", "--config", "sim.json", "--svg"]);
    assert_eq!(out.code, 2);
    assert_eq!(
        out.stderr.trim(),
        "config error: simulate writes aggregate tables only and has no chart; remove --svg"
    );
}

#[test]
fn zero_workers_is_rejected() {
    let d = Drive::new();
    d.write("sim.json", SIM_JSON);
    let out = d.run(&["simulate", "--config", "sim.json", "--workers", "0"]);
    assert_eq!(out.code, 2);
    assert_eq!(out.stderr.trim(), "config error: workers must be >= 1");
}

#[test]
fn descent_rejects_monotone_profiles() {
    let d = Drive::new();
    d.write(
        "mono.json",
        r#"{
            "profile": { "kind": "Polynomial", "params": { "xi": 1.0 } },
            "tau2": 0.0,
            "n": 100
        }"#,
    );
    let out = d.run(&["descent", "--config", "mono.json"]);
    assert_eq!(out.code, 2);
    assert_eq!(
        out.stderr.trim(),
        "config error: descent expects a DoubleDescent or MultiDescent profile; \
         use curve for monotone profiles"
    );
}

#[test]
fn tree_curve_requires_r_max_and_warns_about_noise() {
    let d = Drive::new();
    d.write(
        "tree.json",
        r#"{
            "profile": { "kind": "Exponential", "params": { "xi": 1.0 } },
            "tau2": 0.3,
            "n": 20
        }"#,
    );
    let out = d.run(&["tree-curve", "--config", "tree.json"]);
    assert_eq!(out.code, 2);
    assert!(out.stderr.contains("missing field `r_max`"), "stderr: {}", out.stderr);

    let out = d.run(&[
        "tree-curve",
        "--config",
        "tree.json",
        "--out",
        "o",
        "--set",
        "r_max=6",
    ]);
    assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    assert_eq!(
        out.stderr.trim(),
        "warning: eps_upper assumes tau2 = 0; the bound column ignores tau2 = 0.3"
    );
    let rows = emit::read_tree_curve_csv(&d.path().join("o/tree_curve.csv")).unwrap();
    assert_eq!(rows.len(), 7);
}

#[test]
fn seed_flag_only_fits_seeded_commands() {
    let d = Drive::new();
    d.write("curve.json", CURVE_JSON);
    // curve has no master_seed field, so injecting one must fail loudly
    // rather than being silently ignored.
    let out = d.run(&["curve", "--config", "curve.json", "--seed", "7"]);
    assert_eq!(out.code, 2);
    assert!(out.stderr.contains("unknown field `master_seed`"), "stderr: {}", out.stderr);

    d.write("sim.json", SIM_JSON);
    for (sub, seed) in [("s7", "7"), ("s7b", "7"), ("s8", "8")] {
        let out = d.run(&["simulate", "--config", "sim.json", "--out", sub, "--seed", seed]);
        assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    }
    let bytes = |sub: &str| std::fs::read(d.path().join(sub).join("table.csv")).unwrap();
    assert_eq!(bytes("s7"), bytes("s7b"));
    assert_ne!(bytes("s7"), bytes("s8"));
}
