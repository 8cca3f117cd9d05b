//! CSV tables with JSON sidecars, plus the raw Green-matrix dump.
//!
//! Every table `<stem>.csv` has a sidecar `<stem>.json` that records units,
//! meshes and whatever diagnostics the producing pipeline attaches. Numbers
//! are written in Rust's shortest round-trip form, so identical inputs give
//! byte-identical files.

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::fields::CorrelationResult;
use crate::greenfn::GreenSolution;
use crate::material::{Grid1D, SusceptibilityTable};
use crate::modes::{FieldCoefficient, LocalKernel};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("cannot write {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("cannot serialize sidecar for {path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, ExportError>;

/// Physical meaning of the internal units, recorded in every sidecar.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitDeclaration {
    /// `ω_ref` as written in the config, e.g. `"2.35e15 rad/s"`.
    pub omega_ref: String,
    pub frequency: &'static str,
    pub length: &'static str,
    pub constants: &'static str,
}

impl UnitDeclaration {
    pub fn new(omega_ref: impl Into<String>) -> Self {
        Self {
            omega_ref: omega_ref.into(),
            frequency: "omega_ref",
            length: "c/omega_ref",
            constants: "hbar = c = eps0 = mu0 = 1 unless hbar is overridden",
        }
    }
}

/// `sha256` of the grid parameters, as a hex string.
pub fn grid_hash(grid: &Grid1D) -> String {
    let mut h = Sha256::new();
    h.update(grid.x_min().to_bits().to_le_bytes());
    h.update(grid.x_max().to_bits().to_le_bytes());
    h.update((grid.len() as u64).to_le_bytes());
    hex(&h.finalize())
}

/// `sha256` of a file's contents.
pub fn file_checksum(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(sha256_hex(&bytes))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn grid_json(grid: &Grid1D) -> Value {
    json!({ "x_min": grid.x_min(), "x_max": grid.x_max(), "n": grid.len(), "hash": grid_hash(grid) })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| ExportError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Writes `rows` under `header` to `path`.
pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> Result<()> {
    let err = |source| ExportError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(err)?;
    }
    w.flush().map_err(|source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| ExportError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `<dir>/<stem>.csv` and its sidecar; returns both paths.
fn table(
    dir: &Path,
    stem: &str,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
    meta: Value,
) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    write_csv(&csv_path, header, rows)?;
    let mut meta = meta;
    meta["table"] = json!(format!("{stem}.csv"));
    meta["columns"] = json!(header);
    write_json(&json_path, &meta)?;
    Ok(vec![csv_path, json_path])
}

/// `x, ω, Re χ, Im χ`.
pub fn export_chi(
    table_: &SusceptibilityTable,
    units: &UnitDeclaration,
    dir: &Path,
    stem: &str,
) -> Result<Vec<PathBuf>> {
    let grid = table_.grid();
    let mesh = table_.mesh();
    let rows = (0..grid.len()).flat_map(|i| {
        mesh.omegas().iter().enumerate().map(move |(k, &w)| {
            let c = table_.get(i, k);
            vec![grid.x(i), w, c.re, c.im]
        })
    });
    let meta = json!({
        "kind": "susceptibility",
        "units": units,
        "grid": grid_json(grid),
        "mesh": { "omega_min": mesh.omega_min(), "omega_max": mesh.omega_max(), "n": mesh.len() },
        "provenance": table_.provenance(),
    });
    table(dir, stem, &["x", "omega", "re_chi", "im_chi"], rows, meta)
}

/// `x, x′, Re G, Im G`, optionally with a raw little-endian dump
/// `<stem>.bin` of the row-major matrix as `(re, im)` f64 pairs.
pub fn export_green(
    g: &GreenSolution,
    units: &UnitDeclaration,
    dir: &Path,
    stem: &str,
    binary: bool,
    extra: Value,
) -> Result<Vec<PathBuf>> {
    let grid = g.grid();
    let n = g.n();
    let rows = (0..n).flat_map(|i| {
        (0..n).map(move |j| {
            let v = g.get(i, j);
            vec![grid.x(i), grid.x(j), v.re, v.im]
        })
    });
    let mut meta = json!({
        "kind": "green",
        "units": units,
        "omega": { "re": g.omega().re, "im": g.omega().im },
        "solver": g.solver(),
        "boundary": g.boundary(),
        "grid": grid_json(grid),
        "reciprocity_defect": g.reciprocity_defect(),
        "warnings": g.warnings(),
        "diagnostics": extra,
    });
    let mut files = Vec::new();
    if binary {
        ensure_dir(dir)?;
        let path = dir.join(format!("{stem}.bin"));
        let mut bytes = Vec::with_capacity(16 * n * n);
        for v in g.values() {
            bytes.extend_from_slice(&v.re.to_le_bytes());
            bytes.extend_from_slice(&v.im.to_le_bytes());
        }
        let mut f = fs::File::create(&path).map_err(|source| ExportError::Io {
            path: path.clone(),
            source,
        })?;
        f.write_all(&bytes).map_err(|source| ExportError::Io {
            path: path.clone(),
            source,
        })?;
        meta["binary"] = json!({
            "file": format!("{stem}.bin"),
            "layout": "row-major n x n, (re, im) little-endian f64 pairs",
            "n": n,
        });
        files.push(path);
    }
    let mut t = table(dir, stem, &["x", "x_prime", "re_g", "im_g"], rows, meta)?;
    t.extend(files);
    Ok(t)
}

/// Any `N × N` coefficient kernel, `x, x′, Re, Im`. Local parts are realized
/// on the diagonal as `1/h`.
pub fn export_kernel(
    grid: &Grid1D,
    value: impl Fn(usize, usize) -> Complex64,
    units: &UnitDeclaration,
    dir: &Path,
    stem: &str,
    meta: Value,
) -> Result<Vec<PathBuf>> {
    let n = grid.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| {
            let v = value(i, j);
            vec![grid.x(i), grid.x(j), v.re, v.im]
        })
        .collect();
    let mut meta = meta;
    meta["units"] = json!(units);
    meta["grid"] = grid_json(grid);
    table(dir, stem, &["x", "x_prime", "re", "im"], rows, meta)
}

pub fn export_field_coefficient(
    grid: &Grid1D,
    k: &FieldCoefficient,
    units: &UnitDeclaration,
    dir: &Path,
    stem: &str,
    meta: Value,
) -> Result<Vec<PathBuf>> {
    export_kernel(grid, |i, j| k.get(i, j), units, dir, stem, meta)
}

pub fn export_local_kernel(
    grid: &Grid1D,
    k: &LocalKernel,
    units: &UnitDeclaration,
    dir: &Path,
    stem: &str,
    meta: Value,
) -> Result<Vec<PathBuf>> {
    export_kernel(grid, |i, j| k.value(i, j), units, dir, stem, meta)
}

/// `x, x′, τ, Re, Im` from the kernel route; the Green route goes in two
/// extra columns.
pub fn export_correlation(
    c: &CorrelationResult,
    units: &UnitDeclaration,
    dir: &Path,
    stem: &str,
) -> Result<Vec<PathBuf>> {
    let rows = c.pairs.iter().enumerate().flat_map(|(p, _)| {
        c.taus.iter().enumerate().map(move |(t, &tau)| {
            let k = c.kernel(p, t);
            let g = c.green(p, t);
            vec![c.x[p].0, c.x[p].1, tau, k.re, k.im, g.re, g.im]
        })
    });
    let meta = json!({
        "kind": "vacuum-correlation-e",
        "units": units,
        "mesh": { "omega_min": c.omega_min, "omega_max": c.omega_max, "n": c.n_omega },
        "route_agreement": c.route_agreement,
        "truncation_ratio": c.truncation_ratio,
        "hermiticity_residual": c.hermiticity_residual(),
        "warnings": c.warnings,
    });
    table(
        dir,
        stem,
        &[
            "x",
            "x_prime",
            "tau",
            "re",
            "im",
            "re_green_route",
            "im_green_route",
        ],
        rows,
        meta,
    )
}

/// Plain `index, value` list, e.g. oracle eigenfrequencies.
pub fn export_series(
    values: &[f64],
    column: &str,
    units: &UnitDeclaration,
    dir: &Path,
    stem: &str,
    meta: Value,
) -> Result<Vec<PathBuf>> {
    let rows = values.iter().enumerate().map(|(k, &v)| vec![k as f64, v]);
    let mut meta = meta;
    meta["units"] = json!(units);
    table(dir, stem, &["index", column], rows, meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_hash_depends_on_every_parameter() {
        let a = Grid1D::new(0.0, 1.0, 11).unwrap();
        let b = Grid1D::new(0.0, 1.0, 12).unwrap();
        let c = Grid1D::new(0.0, 1.5, 11).unwrap();
        assert_eq!(grid_hash(&a), grid_hash(&a.clone()));
        assert_ne!(grid_hash(&a), grid_hash(&b));
        assert_ne!(grid_hash(&a), grid_hash(&c));
        assert_eq!(grid_hash(&a).len(), 64);
    }
}
