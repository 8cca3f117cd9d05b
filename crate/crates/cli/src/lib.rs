//! Batch front end: config in, CSV/JSON artifacts and a run report out.
//!
//! Exit codes: 0 on success (tolerance verdicts live in the report), 2 for
//! config validation errors, 3 for numerical failures inside a pipeline, 1 for
//! I/O problems.

pub mod config;
pub mod pipelines;

use serde::Serialize;
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use config::{Diagnostic, ExperimentConfig, Pipeline};
use pipelines::{Context, PipelineError, Residual};
use polariton::export::{self, UnitDeclaration};

pub const SCHEMA_VERSION: u32 = 1;
/// Default output root when neither `--out` nor `[output] dir` is given.
pub const OUT_ENV: &str = "POLARITON_OUT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Everything that varies between identical runs.
#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub started_unix: u64,
    pub wall_time_s: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Completed,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub name: &'static str,
    pub status: Status,
    pub residuals: Vec<Residual>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub info: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub header: Header,
    pub config_hash: String,
    pub status: Status,
    pub all_within_tolerance: bool,
    pub diagnostics: Vec<Diagnostic>,
    pub pipelines: Vec<PipelineReport>,
    pub manifest: Vec<ManifestEntry>,
}

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
    pub diagnostics: Vec<Diagnostic>,
}

impl Failure {
    fn config(diagnostics: Vec<Diagnostic>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: "invalid configuration".into(),
            diagnostics,
        }
    }
}

pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub text: String,
    pub base_dir: PathBuf,
}

pub fn load(path: &Path) -> Result<LoadedConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure {
        code: EXIT_CONFIG,
        message: format!("cannot read {}: {e}", path.display()),
        diagnostics: vec![],
    })?;
    let config = config::parse(&text).map_err(|d| Failure::config(vec![d]))?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedConfig {
        config,
        text,
        base_dir,
    })
}

/// Applies `name=value` overrides on top of the config's tolerances.
pub fn apply_overrides(cfg: &mut ExperimentConfig, overrides: &[String]) -> Result<(), Failure> {
    let mut diags = Vec::new();
    for o in overrides {
        match o
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim().parse::<f64>()))
        {
            Some((k, Ok(v))) => {
                cfg.tolerances.insert(k.to_string(), v);
            }
            _ => diags.push(Diagnostic {
                severity: config::Severity::Error,
                field: "--tol-override".into(),
                message: format!("expected <name>=<value>, got {o:?}"),
                line: None,
                column: None,
            }),
        }
    }
    if diags.is_empty() {
        Ok(())
    } else {
        Err(Failure::config(diags))
    }
}

/// `--out`, then `[output] dir` (under `$POLARITON_OUT` when relative and the
/// variable is set), then `$POLARITON_OUT`, then `./polariton-out`.
pub fn output_dir(
    cli: Option<&Path>,
    cfg: &ExperimentConfig,
    env_root: Option<PathBuf>,
) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    match (&cfg.output.dir, env_root) {
        (Some(d), Some(root)) if d.is_relative() => root.join(d),
        (Some(d), _) => d.clone(),
        (None, Some(root)) => root,
        (None, None) => PathBuf::from("polariton-out"),
    }
}

/// Runs `selected` pipelines (all requested ones when `None`) in dependency
/// order and writes `report.json` into `out`.
pub fn run(
    loaded: &LoadedConfig,
    selected: Option<Pipeline>,
    out: &Path,
) -> Result<RunReport, Failure> {
    let (res, diagnostics) =
        config::resolve(&loaded.config, &loaded.base_dir).map_err(Failure::config)?;
    let mut order: Vec<Pipeline> = match selected {
        Some(p) => vec![p],
        None => loaded.config.pipelines.clone(),
    };
    order.sort();
    order.dedup();
    if let Some(p) = selected {
        let present = match p {
            Pipeline::Chi => true,
            Pipeline::Green => loaded.config.green.is_some(),
            Pipeline::Modes => loaded.config.modes.is_some(),
            Pipeline::Verify => loaded.config.verify.is_some(),
            Pipeline::Correlate => loaded.config.correlate.is_some(),
            Pipeline::Oracle => loaded.config.oracle.is_some(),
        };
        if !present {
            return Err(Failure::config(vec![Diagnostic {
                severity: config::Severity::Error,
                field: p.name().into(),
                message: format!("no [{}] section in the config", p.name()),
                line: None,
                column: None,
            }]));
        }
    }
    std::fs::create_dir_all(out).map_err(|e| Failure {
        code: EXIT_IO,
        message: format!("cannot create {}: {e}", out.display()),
        diagnostics: vec![],
    })?;

    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let ctx = Context {
        cfg: &loaded.config,
        res: &res,
        units: UnitDeclaration::new(res.units_label.clone()),
        dir: out,
    };
    let mut reports = Vec::new();
    let mut files = Vec::new();
    let mut wall = Vec::new();
    let mut failure: Option<(i32, String)> = None;
    for &p in &order {
        if failure.is_some() {
            reports.push(PipelineReport {
                name: p.name(),
                status: Status::Skipped,
                residuals: vec![],
                error: None,
                info: Value::Null,
            });
            continue;
        }
        let t0 = Instant::now();
        let result = pipelines::run(p, &ctx);
        wall.push((p.name().to_string(), t0.elapsed().as_secs_f64()));
        match result {
            Ok(o) => {
                files.extend(o.files);
                reports.push(PipelineReport {
                    name: p.name(),
                    status: Status::Completed,
                    residuals: o.residuals,
                    error: None,
                    info: o.info,
                });
            }
            Err(e) => {
                let code = match e {
                    PipelineError::Numerical(_) => EXIT_NUMERICAL,
                    PipelineError::Io(_) => EXIT_IO,
                };
                let message = format!("pipeline {}: {e}", p.name());
                failure = Some((code, message.clone()));
                reports.push(PipelineReport {
                    name: p.name(),
                    status: Status::Failed,
                    residuals: vec![],
                    error: Some(message),
                    info: Value::Null,
                });
            }
        }
    }

    let mut manifest = Vec::new();
    files.sort();
    files.dedup();
    for f in &files {
        let sha256 = export::file_checksum(f).map_err(|e| Failure {
            code: EXIT_IO,
            message: e.to_string(),
            diagnostics: vec![],
        })?;
        let bytes = std::fs::metadata(f).map(|m| m.len()).unwrap_or(0);
        let file = f
            .strip_prefix(out)
            .unwrap_or(f)
            .to_string_lossy()
            .into_owned();
        manifest.push(ManifestEntry {
            file,
            sha256,
            bytes,
        });
    }
    let all_within_tolerance = reports
        .iter()
        .flat_map(|r| &r.residuals)
        .all(|r| r.pass != Some(false));
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        header: Header {
            tool: "polariton",
            version: env!("CARGO_PKG_VERSION"),
            started_unix,
            wall_time_s: wall,
        },
        config_hash: export::sha256_hex(loaded.text.as_bytes()),
        status: if failure.is_some() {
            Status::Failed
        } else {
            Status::Completed
        },
        all_within_tolerance,
        diagnostics,
        pipelines: reports,
        manifest,
    };
    export::write_json(&out.join("report.json"), &report).map_err(|e| Failure {
        code: EXIT_IO,
        message: e.to_string(),
        diagnostics: vec![],
    })?;
    match failure {
        Some((code, message)) => Err(Failure {
            code,
            message,
            diagnostics: vec![],
        }),
        None => Ok(report),
    }
}
