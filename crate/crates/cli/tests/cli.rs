use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_polariton"));
    c.env_remove("POLARITON_OUT");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn residual<'a>(r: &'a Value, pipeline: &str, name: &str) -> &'a Value {
    r["pipelines"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["name"] == pipeline)
        .and_then(|p| {
            p["residuals"]
                .as_array()
                .unwrap()
                .iter()
                .find(|x| x["name"] == name)
        })
        .unwrap_or_else(|| panic!("no residual {pipeline}/{name}"))
}

/// Small lossy slab with a Drude-Lorentz bath; every pipeline but the oracle.
const SMALL: &str = r#"
pipelines = ["chi", "green", "modes", "verify", "correlate"]

[units]
omega_ref = "1 eV"

[grid]
x_min = "-3 c/omega_ref"
x_max = "3 c/omega_ref"
points = 61

[[layer]]
from = "-3 c/omega_ref"
to = "3 c/omega_ref"
rho = "1 internal"
omega0 = "1.5 omega_ref"
alpha = "1 internal"

[bath]
kind = "drude-lorentz"
width = "0.4 omega_ref"

[mesh]
min = "0.1 omega_ref"
max = "4 omega_ref"
points = 79

[green]
omegas = ["1.2 omega_ref", "2 omega_ref"]
binary = true

[modes]
omega = "1.2 omega_ref"

[verify]
omega = "1.2 omega_ref"
omega_prime = "2 omega_ref"

[correlate]
points = ["-0.5 c/omega_ref", "0 c/omega_ref", "0.5 c/omega_ref"]
taus = ["0 1/omega_ref", "1 1/omega_ref"]
"#;

#[test]
fn lossless_chi_matches_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["chi", "--config"])
        .arg(configs().join("lorentz_chi.toml"))
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(tmp.path());
    assert_eq!(r["schema_version"], 1);
    let c = residual(&r, "chi", "chi_closed_form");
    assert_eq!(c["pass"], true);
    assert!(c["value"].as_f64().unwrap() <= 1e-12);
    assert!(tmp.path().join("chi.csv").exists());
    let sidecar: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("chi.json")).unwrap()).unwrap();
    assert_eq!(sidecar["units"]["omega_ref"], "2000000000000000 rad/s");
    assert_eq!(sidecar["columns"][0], "x");
}

#[test]
fn manifest_checksums_match_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let out = tmp.path().join("out");
    let o = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["status"], "completed");
    let manifest = r["manifest"].as_array().unwrap();
    assert!(manifest.iter().any(|m| m["file"] == "green_0.bin"));
    for m in manifest {
        let bytes = fs::read(out.join(m["file"].as_str().unwrap())).unwrap();
        assert_eq!(m["bytes"].as_u64().unwrap(), bytes.len() as u64);
        assert_eq!(
            m["sha256"].as_str().unwrap(),
            polariton::export::sha256_hex(&bytes)
        );
    }
    // the binary dump holds n² complex values
    let bin = fs::read(out.join("green_0.bin")).unwrap();
    assert_eq!(bin.len(), 16 * 61 * 61);
    assert_eq!(
        r["config_hash"].as_str().unwrap(),
        polariton::export::sha256_hex(SMALL.as_bytes())
    );
    for name in [
        "green_reciprocity",
        "green_equation",
        "eigen_potential_momentum",
        "s_condition",
    ] {
        assert_eq!(residual(&r, "verify", name)["pass"], true, "{name}");
    }
}

#[test]
fn repeated_runs_are_identical_outside_the_header() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let o = bin()
            .args(["run", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(d)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0);
    }
    let mut names: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() > 10);
    for n in &names {
        if n == "report.json" {
            continue;
        }
        assert_eq!(
            fs::read(a.join(n)).unwrap(),
            fs::read(b.join(n)).unwrap(),
            "{n:?} differs"
        );
    }
    let (mut ra, mut rb) = (report(&a), report(&b));
    ra.as_object_mut().unwrap().remove("header");
    rb.as_object_mut().unwrap().remove("header");
    assert_eq!(ra, rb);
}

#[test]
fn overlapping_layers_exit_with_config_error() {
    let o = bin()
        .args(["validate", "--config"])
        .arg(configs().join("overlapping_layers.toml"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    let d: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(d[0]["field"], "layer");
    assert_eq!(d[0]["severity"], "error");

    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["run", "--config"])
        .arg(configs().join("overlapping_layers.toml"))
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn syntax_errors_carry_line_and_column() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL.replace("points = 61", "points = = 61");
    let cfg = write(tmp.path(), "bad.toml", &text);
    let o = bin()
        .args(["validate", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    let d: Value = serde_json::from_slice(&o.stdout).unwrap();
    let line = text.lines().position(|l| l.contains("= = 61")).unwrap() + 1;
    assert_eq!(d[0]["line"].as_u64().unwrap() as usize, line);
    assert!(d[0]["column"].as_u64().unwrap() > 1);
}

#[test]
fn bad_values_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        ("rho = \"1 internal\"", "rho = \"-1 internal\"", "rho"),
        (
            "omega_ref = \"1 eV\"",
            "omega_ref = \"1 furlong\"",
            "units.omega_ref",
        ),
        ("points = 79", "points = 1", "mesh"),
    ];
    for (from, to, field) in cases {
        let cfg = write(tmp.path(), "bad.toml", &SMALL.replace(from, to));
        let o = bin()
            .args(["validate", "--config"])
            .arg(&cfg)
            .output()
            .unwrap();
        assert_eq!(code(&o), 2, "{to}");
        let d: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert!(
            d.as_array()
                .unwrap()
                .iter()
                .any(|x| x["field"].as_str().unwrap().contains(field)),
            "{to}: {d}"
        );
    }
}

#[test]
fn coarse_tabulated_bath_warns() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csv = String::from("omega,v\n");
    for k in 0..20 {
        let w = 0.05 + 0.25 * k as f64;
        csv.push_str(&format!(
            "{w},{}\n",
            0.3 * w * (-(w - 2.0f64).powi(2)).exp()
        ));
    }
    write(tmp.path(), "bath.csv", &csv);
    let text = SMALL
        .replace(
            "kind = \"drude-lorentz\"\nwidth = \"0.4 omega_ref\"",
            "kind = \"tabulated\"\nfile = \"bath.csv\"",
        )
        .replace(
            "pipelines = [\"chi\", \"green\", \"modes\", \"verify\", \"correlate\"]",
            "pipelines = [\"chi\"]",
        );
    let cfg = write(tmp.path(), "tab.toml", &text);
    let o = bin()
        .args(["validate", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let d: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(d
        .as_array()
        .unwrap()
        .iter()
        .any(|x| x["severity"] == "warning" && x["field"] == "bath.file"));

    let o = bin()
        .args(["chi", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let r = report(&tmp.path().join("out"));
    assert!(r["diagnostics"]
        .as_array()
        .unwrap()
        .iter()
        .any(|x| x["field"] == "bath.file"));
}

#[test]
fn tolerance_override_changes_the_verdict_not_the_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let out = tmp.path().join("out");
    let o = bin()
        .args(["chi", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--tol-override", "kramers_kronig=1e-300"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("outside tolerance"));
    let r = report(&out);
    assert_eq!(r["all_within_tolerance"], false);
    let kk = residual(&r, "chi", "kramers_kronig");
    assert_eq!(kk["tolerance"].as_f64().unwrap(), 1e-300);
    assert_eq!(kk["pass"], false);

    let o = bin()
        .args(["chi", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--tol-override", "kramers_kronig"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn unknown_tolerance_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "t.toml",
        &format!("{SMALL}\n[tolerances]\nnot_a_check = 1e-3\n"),
    );
    let o = bin()
        .args(["validate", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn output_root_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let o = bin()
        .args(["chi", "--config"])
        .arg(&cfg)
        .env("POLARITON_OUT", tmp.path().join("env"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(tmp.path().join("env/report.json").exists());

    // a relative [output] dir lands under the root
    let cfg = write(
        tmp.path(),
        "rel.toml",
        &format!("{SMALL}\n[output]\ndir = \"sub\"\n"),
    );
    let o = bin()
        .args(["chi", "--config"])
        .arg(&cfg)
        .env("POLARITON_OUT", tmp.path().join("env"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(tmp.path().join("env/sub/chi.csv").exists());
}

#[test]
fn missing_section_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["oracle", "--config"])
        .arg(configs().join("lorentz_chi.toml"))
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn indefinite_oracle_model_is_a_numerical_failure() {
    let tmp = tempfile::tempdir().unwrap();
    // strong coupling to a low-lying bath overwhelms ρω̃₀²
    let text = r#"
pipelines = ["chi", "oracle"]

[units]
omega_ref = "1 eV"

[grid]
x_min = "-2 c/omega_ref"
x_max = "2 c/omega_ref"
points = 21

[[layer]]
from = "-2 c/omega_ref"
to = "2 c/omega_ref"
rho = "1 internal"
omega0 = "0.5 omega_ref"
alpha = "1 internal"

[bath]
kind = "gaussian"
amplitude = "3 internal"
center = "0.6 omega_ref"
sigma = "0.2 omega_ref"

[mesh]
min = "0.05 omega_ref"
max = "3 omega_ref"
points = 60

[oracle]
bath_modes = 10
bath_min = "0.05 omega_ref"
bath_max = "3 omega_ref"
drive_at = "0 c/omega_ref"
drive_omegas = ["1 omega_ref"]
"#;
    let cfg = write(tmp.path(), "indef.toml", text);
    let out = tmp.path().join("out");
    let o = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    // partial results survive
    let r = report(&out);
    assert_eq!(r["status"], "failed");
    assert_eq!(r["pipelines"][0]["status"], "completed");
    assert_eq!(r["pipelines"][1]["status"], "failed");
    assert!(r["manifest"]
        .as_array()
        .unwrap()
        .iter()
        .any(|m| m["file"] == "chi.csv"));
}

#[test]
fn oracle_driven_config_agrees_with_green_function() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["oracle", "--config"])
        .arg(configs().join("oracle_driven.toml"))
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(tmp.path());
    let c = residual(&r, "oracle", "oracle_response");
    assert_eq!(c["pass"], true);
    assert!(c["value"].as_f64().unwrap() < 1e-2);
}
