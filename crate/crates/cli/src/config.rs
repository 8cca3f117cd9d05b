//! Experiment configuration: TOML with explicit units on every physical
//! quantity.
//!
//! Quantities are strings `"<value> <unit>"`. Internal units are `omega_ref`
//! for frequencies, `c/omega_ref` for lengths, `1/omega_ref` for times and
//! `internal` for the canonical material parameters (ρ, α, bath coupling,
//! ħ), which are only meaningful in the internal system.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use polariton::greenfn::Exterior;
use polariton::material::{
    BathModel, DrudeLorentzBath, FrequencyMesh, Grid1D, MaterialProfile, TabulatedBath,
};
use polariton::oracle::{DEFAULT_MAX_DENSE_DIMENSION, DEFAULT_MAX_DIMENSION};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// rad/s per eV (`e / ħ`).
const RAD_PER_S_PER_EV: f64 = 1.519_267_447e15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Frequency,
    Length,
    Time,
    Internal,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dimension::Frequency => "frequency",
            Dimension::Length => "length",
            Dimension::Time => "time",
            Dimension::Internal => "internal",
        })
    }
}

/// `"<value> <unit>"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Quantity {
    pub value: f64,
    pub unit: String,
}

impl FromStr for Quantity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut parts = s.split_whitespace();
        let (Some(v), Some(u), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(format!("expected \"<value> <unit>\", got {s:?}"));
        };
        let value: f64 = v
            .parse()
            .map_err(|_| format!("invalid number {v:?} in {s:?}"))?;
        if !value.is_finite() {
            return Err(format!("non-finite value in {s:?}"));
        }
        Ok(Self {
            value,
            unit: u.to_string(),
        })
    }
}

impl TryFrom<String> for Quantity {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<Quantity> for String {
    fn from(q: Quantity) -> String {
        q.to_string()
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.value, self.unit)
    }
}

impl Quantity {
    fn dimension(&self) -> Option<Dimension> {
        Some(match self.unit.as_str() {
            "omega_ref" | "rad/s" | "Hz" | "THz" | "eV" => Dimension::Frequency,
            "c/omega_ref" | "m" | "um" | "nm" => Dimension::Length,
            "1/omega_ref" | "s" | "fs" => Dimension::Time,
            "internal" => Dimension::Internal,
            _ => return None,
        })
    }

    /// Value in internal units, given `ω_ref` in rad/s.
    pub fn internal(&self, omega_ref: f64, expect: Dimension) -> Result<f64, String> {
        match self.dimension() {
            None => return Err(format!("unknown unit {:?}", self.unit)),
            Some(d) if d != expect => {
                return Err(format!(
                    "expected a {expect} quantity, got {:?} ({d})",
                    self.to_string()
                ));
            }
            _ => {}
        }
        let v = self.value;
        Ok(match self.unit.as_str() {
            "omega_ref" | "c/omega_ref" | "1/omega_ref" | "internal" => v,
            "rad/s" => v / omega_ref,
            "Hz" => 2.0 * std::f64::consts::PI * v / omega_ref,
            "THz" => 2.0 * std::f64::consts::PI * v * 1e12 / omega_ref,
            "eV" => v * RAD_PER_S_PER_EV / omega_ref,
            "m" => v * omega_ref / SPEED_OF_LIGHT,
            "um" => v * 1e-6 * omega_ref / SPEED_OF_LIGHT,
            "nm" => v * 1e-9 * omega_ref / SPEED_OF_LIGHT,
            "s" => v * omega_ref,
            "fs" => v * 1e-15 * omega_ref,
            _ => unreachable!(),
        })
    }

    /// `ω_ref` itself must be absolute.
    fn reference(&self) -> Result<f64, String> {
        let v = self.value;
        let w = match self.unit.as_str() {
            "rad/s" => v,
            "Hz" => 2.0 * std::f64::consts::PI * v,
            "THz" => 2.0 * std::f64::consts::PI * v * 1e12,
            "eV" => v * RAD_PER_S_PER_EV,
            u => {
                return Err(format!(
                    "omega_ref needs an absolute frequency unit (rad/s, Hz, THz, eV), got {u:?}"
                ))
            }
        };
        if !(w > 0.0) {
            return Err(format!("omega_ref must be positive, got {self}"));
        }
        Ok(w)
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct UnitsSection {
    pub omega_ref: Quantity,
    pub hbar: Option<Quantity>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub x_min: Quantity,
    pub x_max: Quantity,
    pub points: usize,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub from: Quantity,
    pub to: Quantity,
    pub rho: Quantity,
    pub omega0: Quantity,
    pub alpha: Quantity,
    /// Scales the bath coupling inside the layer.
    pub coupling: Option<Quantity>,
}

/// Quadratic ramps of α and of the bath coupling over `width` at both ends.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CladdingSpec {
    pub width: Quantity,
    pub alpha: Quantity,
    /// Added to the layer's coupling scale at full depth, so for the
    /// gaussian bath it multiplies the amplitude too.
    pub coupling: Option<Quantity>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BathKind {
    None,
    DrudeLorentz,
    Gaussian,
    Tabulated,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    pub min: Quantity,
    pub max: Quantity,
    pub points: usize,
}

/// `gaussian`: `v(x, ω) = c(x) A ω exp(−(ω − ω_c)² / 2σ²)`.
/// `tabulated`: CSV `omega,v` (internal units), scaled by `c(x)`.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BathSpec {
    pub kind: BathKind,
    pub width: Option<Quantity>,
    pub amplitude: Option<Quantity>,
    pub center: Option<Quantity>,
    pub sigma: Option<Quantity>,
    pub file: Option<PathBuf>,
    pub mesh: Option<MeshSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExteriorKind {
    #[default]
    Extended,
    Vacuum,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GreenSpec {
    pub omegas: Vec<Quantity>,
    #[serde(default)]
    pub exterior: ExteriorKind,
    #[serde(default)]
    pub binary: bool,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModesSpec {
    pub omega: Quantity,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    pub omega: Quantity,
    pub omega_prime: Quantity,
    /// Every `label_stride`-th absorbing node is used as a mode label.
    pub label_stride: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelateSpec {
    pub points: Vec<Quantity>,
    pub taus: Vec<Quantity>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub bath_modes: usize,
    pub bath_min: Quantity,
    pub bath_max: Quantity,
    pub max_dimension: Option<usize>,
    pub max_dense_dimension: Option<usize>,
    pub drive_at: Quantity,
    pub drive_omegas: Vec<Quantity>,
    /// Imaginary part of the probe frequency in units of the bath spacing.
    pub broadening: Option<f64>,
    /// Band for the smoothed vacuum comparison; skipped when absent.
    pub band: Option<[Quantity; 2]>,
    #[serde(default)]
    pub vacuum_points: Vec<Quantity>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Chi,
    Green,
    Modes,
    Verify,
    Correlate,
    Oracle,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Chi => "chi",
            Pipeline::Green => "green",
            Pipeline::Modes => "modes",
            Pipeline::Verify => "verify",
            Pipeline::Correlate => "correlate",
            Pipeline::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pipelines: Vec<Pipeline>,
    pub units: UnitsSection,
    pub grid: GridSection,
    #[serde(default, rename = "layer")]
    pub layers: Vec<LayerSpec>,
    pub cladding: Option<CladdingSpec>,
    pub bath: BathSpec,
    pub mesh: MeshSpec,
    pub green: Option<GreenSpec>,
    pub modes: Option<ModesSpec>,
    pub verify: Option<VerifySpec>,
    pub correlate: Option<CorrelateSpec>,
    pub oracle: Option<OracleSpec>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Default tolerances, one per reported residual.
pub const TOLERANCES: &[(&str, f64)] = &[
    ("chi_closed_form", 1e-12),
    ("kramers_kronig", 1e-3),
    ("coupling_roundtrip", 1e-6),
    ("green_reciprocity", 1e-10),
    ("green_equation", 1e-10),
    ("green_identity", 1e-6),
    ("surface_flux", 1e-8),
    ("eigen_exact", 1e-14),
    ("eigen_algebraic", 1e-12),
    ("eigen_quadrature", 1e-6),
    ("wave_relation", 1e-8),
    ("s_condition", 1e-15),
    ("commutator", 1e-6),
    ("route_equivalence", 1e-10),
    ("correlation_routes", 1e-4),
    ("hermiticity", 1e-12),
    ("field_commutator", 1e-6),
    ("symplectic", 1e-10),
    ("oracle_response", 1e-2),
    ("oracle_vacuum", 5e-2),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub field: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
}

impl Diagnostic {
    fn error(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            field: field.into(),
            message: message.into(),
            line: None,
            column: None,
        }
    }

    fn warning(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            ..Self::error(field, message)
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}: {}: {}", self.field, self.message)?;
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, " (line {l}, column {c})")?;
        }
        Ok(())
    }
}

pub fn has_errors(d: &[Diagnostic]) -> bool {
    d.iter().any(|d| d.severity == Severity::Error)
}

/// Parses the TOML text; parse errors carry line and column.
pub fn parse(text: &str) -> Result<ExperimentConfig, Diagnostic> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = match e.span() {
            Some(span) => {
                let before = &text[..span.start.min(text.len())];
                let line = before.matches('\n').count() + 1;
                let column = before.len() - before.rfind('\n').map_or(0, |p| p + 1) + 1;
                (Some(line), Some(column))
            }
            None => (None, None),
        };
        Diagnostic {
            severity: Severity::Error,
            field: "config".into(),
            message: e.message().to_string(),
            line,
            column,
        }
    })
}

/// Layer in internal units.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub from: f64,
    pub to: f64,
    pub rho: f64,
    pub omega0: f64,
    pub alpha: f64,
    pub coupling: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cladding {
    pub width: f64,
    pub alpha: f64,
    pub coupling: f64,
}

impl Cladding {
    /// Ramp `((depth into the cladding) / width)²`, zero in the core.
    pub fn ramp(&self, grid: &Grid1D, x: f64) -> f64 {
        let d = (grid.x_min() + self.width - x)
            .max(x - (grid.x_max() - self.width))
            .max(0.0);
        (d / self.width).powi(2)
    }
}

/// Config resolved to internal units and library objects.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub omega_ref: f64,
    pub units_label: String,
    pub profile: MaterialProfile,
    pub bath: BathModel,
    pub bath_kind: BathKind,
    pub mesh: FrequencyMesh,
    pub layers: Vec<Layer>,
    pub cladding: Option<Cladding>,
    pub exterior: Option<Exterior>,
    pub tolerances: BTreeMap<String, f64>,
}

impl Resolved {
    pub fn tol(&self, name: &str) -> f64 {
        self.tolerances[name]
    }

    /// Nodes outside the cladding.
    pub fn core_nodes(&self) -> Vec<usize> {
        let grid = self.profile.grid();
        (0..grid.len())
            .filter(|&i| self.cladding.is_none_or(|c| c.ramp(grid, grid.x(i)) == 0.0))
            .collect()
    }

    /// Layer interfaces strictly inside the grid.
    pub fn interfaces(&self) -> Vec<f64> {
        let grid = self.profile.grid();
        let mut v: Vec<f64> = self
            .layers
            .iter()
            .flat_map(|l| [l.from, l.to])
            .filter(|&x| x > grid.x_min() && x < grid.x_max())
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

/// Static validation collecting every problem, without computation.
pub fn validate(cfg: &ExperimentConfig, base_dir: &Path) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    resolve_inner(cfg, base_dir, &mut out);
    out
}

/// Validates and builds the library objects.
pub fn resolve(
    cfg: &ExperimentConfig,
    base_dir: &Path,
) -> Result<(Resolved, Vec<Diagnostic>), Vec<Diagnostic>> {
    let mut diags = Vec::new();
    match resolve_inner(cfg, base_dir, &mut diags) {
        Some(r) if !has_errors(&diags) => Ok((r, diags)),
        _ => Err(diags),
    }
}

fn resolve_inner(
    cfg: &ExperimentConfig,
    base_dir: &Path,
    out: &mut Vec<Diagnostic>,
) -> Option<Resolved> {
    let omega_ref = match cfg.units.omega_ref.reference() {
        Ok(w) => w,
        Err(e) => {
            out.push(Diagnostic::error("units.omega_ref", e));
            return None;
        }
    };
    let mut q = |field: &str, v: &Quantity, dim: Dimension| -> Option<f64> {
        match v.internal(omega_ref, dim) {
            Ok(x) => Some(x),
            Err(e) => {
                out.push(Diagnostic::error(field, e));
                None
            }
        }
    };

    let hbar = match &cfg.units.hbar {
        Some(h) => q("units.hbar", h, Dimension::Internal),
        None => Some(1.0),
    };
    let x_min = q("grid.x_min", &cfg.grid.x_min, Dimension::Length);
    let x_max = q("grid.x_max", &cfg.grid.x_max, Dimension::Length);
    let mesh_min = q("mesh.min", &cfg.mesh.min, Dimension::Frequency);
    let mesh_max = q("mesh.max", &cfg.mesh.max, Dimension::Frequency);

    let mut layers = Vec::new();
    for (k, l) in cfg.layers.iter().enumerate() {
        let f = |name: &str| format!("layer[{k}].{name}");
        let vals = (
            q(&f("from"), &l.from, Dimension::Length),
            q(&f("to"), &l.to, Dimension::Length),
            q(&f("rho"), &l.rho, Dimension::Internal),
            q(&f("omega0"), &l.omega0, Dimension::Frequency),
            q(&f("alpha"), &l.alpha, Dimension::Internal),
            match &l.coupling {
                Some(c) => q(&f("coupling"), c, Dimension::Internal),
                None => Some(1.0),
            },
        );
        if let (Some(from), Some(to), Some(rho), Some(omega0), Some(alpha), Some(coupling)) = vals {
            layers.push(Layer {
                from,
                to,
                rho,
                omega0,
                alpha,
                coupling,
            });
        }
    }
    let cladding = cfg.cladding.as_ref().and_then(|c| {
        let width = q("cladding.width", &c.width, Dimension::Length)?;
        let alpha = q("cladding.alpha", &c.alpha, Dimension::Internal)?;
        let coupling = match &c.coupling {
            Some(v) => q("cladding.coupling", v, Dimension::Internal)?,
            None => 0.0,
        };
        Some(Cladding {
            width,
            alpha,
            coupling,
        })
    });

    let mut frequency_list = |field: &str, vs: &[Quantity]| -> Vec<f64> {
        vs.iter()
            .enumerate()
            .filter_map(|(k, v)| q(&format!("{field}[{k}]"), v, Dimension::Frequency))
            .collect()
    };
    let green_omegas = cfg
        .green
        .as_ref()
        .map(|g| frequency_list("green.omegas", &g.omegas));
    let drive_omegas = cfg
        .oracle
        .as_ref()
        .map(|o| frequency_list("oracle.drive_omegas", &o.drive_omegas));
    let mut single =
        |field: &str, v: Option<&Quantity>, dim: Dimension| v.and_then(|v| q(field, v, dim));
    let modes_omega = single(
        "modes.omega",
        cfg.modes.as_ref().map(|m| &m.omega),
        Dimension::Frequency,
    );
    let verify_omegas = (
        single(
            "verify.omega",
            cfg.verify.as_ref().map(|v| &v.omega),
            Dimension::Frequency,
        ),
        single(
            "verify.omega_prime",
            cfg.verify.as_ref().map(|v| &v.omega_prime),
            Dimension::Frequency,
        ),
    );
    let mut point_list = |field: &str, vs: &[Quantity], dim: Dimension| -> Vec<f64> {
        vs.iter()
            .enumerate()
            .filter_map(|(k, v)| {
                v.internal(omega_ref, dim)
                    .map_err(|e| out.push(Diagnostic::error(format!("{field}[{k}]"), e)))
                    .ok()
            })
            .collect()
    };
    let corr_points = cfg
        .correlate
        .as_ref()
        .map(|c| point_list("correlate.points", &c.points, Dimension::Length));
    let corr_taus = cfg
        .correlate
        .as_ref()
        .map(|c| point_list("correlate.taus", &c.taus, Dimension::Time));
    let vacuum_points = cfg
        .oracle
        .as_ref()
        .map(|o| point_list("oracle.vacuum_points", &o.vacuum_points, Dimension::Length));
    let oracle_vals = cfg.oracle.as_ref().map(|o| {
        (
            o.bath_min
                .internal(omega_ref, Dimension::Frequency)
                .map_err(|e| out.push(Diagnostic::error("oracle.bath_min", e)))
                .ok(),
            o.bath_max
                .internal(omega_ref, Dimension::Frequency)
                .map_err(|e| out.push(Diagnostic::error("oracle.bath_max", e)))
                .ok(),
            o.drive_at
                .internal(omega_ref, Dimension::Length)
                .map_err(|e| out.push(Diagnostic::error("oracle.drive_at", e)))
                .ok(),
            o.band.as_ref().map(|b| {
                (
                    b[0].internal(omega_ref, Dimension::Frequency)
                        .map_err(|e| out.push(Diagnostic::error("oracle.band[0]", e)))
                        .ok(),
                    b[1].internal(omega_ref, Dimension::Frequency)
                        .map_err(|e| out.push(Diagnostic::error("oracle.band[1]", e)))
                        .ok(),
                )
            }),
        )
    });

    // tolerances
    let mut tolerances: BTreeMap<String, f64> = TOLERANCES
        .iter()
        .map(|&(k, v)| (k.to_string(), v))
        .collect();
    for (k, &v) in &cfg.tolerances {
        if !tolerances.contains_key(k) {
            out.push(Diagnostic::error(
                format!("tolerances.{k}"),
                "unknown tolerance name",
            ));
        } else if !(v > 0.0) || !v.is_finite() {
            out.push(Diagnostic::error(
                format!("tolerances.{k}"),
                format!("tolerance must be positive, got {v}"),
            ));
        } else {
            tolerances.insert(k.clone(), v);
        }
    }

    if cfg.pipelines.is_empty() {
        out.push(Diagnostic::error("pipelines", "no pipeline requested"));
    }
    for (p, present) in [
        (Pipeline::Green, cfg.green.is_some()),
        (Pipeline::Modes, cfg.modes.is_some()),
        (Pipeline::Verify, cfg.verify.is_some()),
        (Pipeline::Correlate, cfg.correlate.is_some()),
        (Pipeline::Oracle, cfg.oracle.is_some()),
    ] {
        if cfg.pipelines.contains(&p) && !present {
            out.push(Diagnostic::error(
                p.name(),
                format!(
                    "pipeline {:?} requested without a [{}] section",
                    p.name(),
                    p.name()
                ),
            ));
        }
    }

    let hbar = hbar?;
    if !(hbar > 0.0) {
        out.push(Diagnostic::error("units.hbar", "ħ must be positive"));
    }
    let (x_min, x_max) = (x_min?, x_max?);
    let grid = match Grid1D::new(x_min, x_max, cfg.grid.points) {
        Ok(g) => g,
        Err(e) => {
            out.push(Diagnostic::error("grid", e.to_string()));
            return None;
        }
    };
    let h = grid.spacing();

    for (k, l) in layers.iter().enumerate() {
        let f = |name: &str| format!("layer[{k}].{name}");
        if !(l.to > l.from) {
            out.push(Diagnostic::error(
                f("to"),
                format!("layer ends at {} before it starts at {}", l.to, l.from),
            ));
        }
        if l.from < x_min - 1e-9 * h || l.to > x_max + 1e-9 * h {
            out.push(Diagnostic::error(
                f("from"),
                format!(
                    "layer [{}, {}] extends beyond the grid [{x_min}, {x_max}]",
                    l.from, l.to
                ),
            ));
        }
        if !(l.rho > 0.0) {
            out.push(Diagnostic::error(
                f("rho"),
                format!("ρ must be positive, got {}", l.rho),
            ));
        }
        if !(l.omega0 > 0.0) {
            out.push(Diagnostic::error(
                f("omega0"),
                format!("ω̃₀ must be positive, got {}", l.omega0),
            ));
        }
        if l.alpha < 0.0 {
            out.push(Diagnostic::error(
                f("alpha"),
                format!("α must be non-negative, got {}", l.alpha),
            ));
        }
        if l.coupling < 0.0 {
            out.push(Diagnostic::error(
                f("coupling"),
                "coupling scale must be non-negative",
            ));
        }
    }
    let mut sorted: Vec<&Layer> = layers.iter().collect();
    sorted.sort_by(|a, b| a.from.total_cmp(&b.from));
    for w in sorted.windows(2) {
        if w[1].from < w[0].to - 1e-12 * h {
            out.push(Diagnostic::error(
                "layer",
                format!(
                    "layers [{}, {}] and [{}, {}] overlap",
                    w[0].from, w[0].to, w[1].from, w[1].to
                ),
            ));
        }
    }
    if let Some(c) = &cladding {
        if !(c.width > 0.0) || 2.0 * c.width >= x_max - x_min {
            out.push(Diagnostic::error(
                "cladding.width",
                "cladding width must be positive and leave a core",
            ));
        }
        if c.alpha < 0.0 || c.coupling < 0.0 {
            out.push(Diagnostic::error(
                "cladding",
                "cladding ramps must be non-negative",
            ));
        }
    }

    let (mesh_min, mesh_max) = (mesh_min?, mesh_max?);
    let mesh = match FrequencyMesh::uniform(mesh_min, mesh_max, cfg.mesh.points) {
        Ok(m) if mesh_min > 0.0 => m,
        Ok(_) => {
            out.push(Diagnostic::error(
                "mesh.min",
                "frequencies must be positive",
            ));
            return None;
        }
        Err(e) => {
            out.push(Diagnostic::error("mesh", e.to_string()));
            return None;
        }
    };

    // material profile: layers, vacuum elsewhere, cladding on top
    let layer_at = |x: f64| -> Option<&Layer> {
        let last = sorted.len().saturating_sub(1);
        sorted
            .iter()
            .enumerate()
            .find(|(k, l)| {
                x >= l.from - 1e-9 * h
                    && (x < l.to - 1e-9 * h || (*k == last && x <= l.to + 1e-9 * h))
            })
            .map(|(_, l)| *l)
    };
    if has_errors(out) {
        return None;
    }
    let material_at = |x: f64| -> (f64, f64, f64) {
        let ramp = cladding.map_or(0.0, |c| c.ramp(&grid, x));
        let (rho, w0, a) = layer_at(x).map_or((1.0, 1.0, 0.0), |l| (l.rho, l.omega0, l.alpha));
        (rho, w0, a + cladding.map_or(0.0, |c| c.alpha) * ramp)
    };
    let coupling_at = |x: f64| -> f64 {
        let ramp = cladding.map_or(0.0, |c| c.ramp(&grid, x));
        layer_at(x).map_or(1.0, |l| l.coupling) + cladding.map_or(0.0, |c| c.coupling) * ramp
    };
    let profile = match MaterialProfile::from_fn(grid.clone(), material_at) {
        Ok(p) => p.with_hbar(hbar),
        Err(e) => {
            out.push(Diagnostic::error("layer", e.to_string()));
            return None;
        }
    };

    let b = &cfg.bath;
    let bath = match b.kind {
        BathKind::None => Some(BathModel::Tabulated(TabulatedBath::zero(
            &grid,
            mesh.clone(),
        ))),
        BathKind::DrudeLorentz => match &b.width {
            None => {
                out.push(Diagnostic::error(
                    "bath.width",
                    "the drude-lorentz bath needs a width",
                ));
                None
            }
            Some(w) => {
                let w = w
                    .internal(omega_ref, Dimension::Frequency)
                    .map_err(|e| out.push(Diagnostic::error("bath.width", e)))
                    .ok()?;
                if !(w > 0.0) {
                    out.push(Diagnostic::error("bath.width", "width must be positive"));
                    return None;
                }
                DrudeLorentzBath::uniform(&profile, w)
                    .map(BathModel::DrudeLorentz)
                    .map_err(|e| out.push(Diagnostic::error("bath", e.to_string())))
                    .ok()
            }
        },
        BathKind::Gaussian => {
            let need =
                |name: &str, v: &Option<Quantity>, dim, out: &mut Vec<Diagnostic>| -> Option<f64> {
                    match v {
                        None => {
                            out.push(Diagnostic::error(
                                format!("bath.{name}"),
                                "required for the gaussian bath",
                            ));
                            None
                        }
                        Some(v) => v
                            .internal(omega_ref, dim)
                            .map_err(|e| out.push(Diagnostic::error(format!("bath.{name}"), e)))
                            .ok(),
                    }
                };
            let amp = need("amplitude", &b.amplitude, Dimension::Internal, out);
            let center = need("center", &b.center, Dimension::Frequency, out);
            let sigma = need("sigma", &b.sigma, Dimension::Frequency, out);
            let bmesh = bath_mesh(b, omega_ref, &mesh, out);
            match (amp, center, sigma, bmesh) {
                (Some(a), Some(c), Some(s), Some(m)) if s > 0.0 => {
                    TabulatedBath::from_fn(&grid, m, |x, w| {
                        coupling_at(x) * a * w * (-(w - c).powi(2) / (2.0 * s * s)).exp()
                    })
                    .map(BathModel::Tabulated)
                    .map_err(|e| out.push(Diagnostic::error("bath", e.to_string())))
                    .ok()
                }
                (_, _, Some(s), _) if !(s > 0.0) => {
                    out.push(Diagnostic::error("bath.sigma", "sigma must be positive"));
                    None
                }
                _ => None,
            }
        }
        BathKind::Tabulated => match &b.file {
            None => {
                out.push(Diagnostic::error(
                    "bath.file",
                    "the tabulated bath needs a file",
                ));
                None
            }
            Some(f) => {
                let path = base_dir.join(f);
                match read_spectrum(&path) {
                    Err(e) => {
                        out.push(Diagnostic::error("bath.file", e));
                        None
                    }
                    Ok((omegas, v)) => {
                        let file_mesh = FrequencyMesh::from_points(omegas.clone());
                        match file_mesh {
                            Err(e) => {
                                out.push(Diagnostic::error("bath.file", e.to_string()));
                                None
                            }
                            Ok(m) => {
                                if m.max_step() > mesh.max_step() * (1.0 + 1e-9) {
                                    out.push(Diagnostic::warning(
                                        "bath.file",
                                        format!(
                                            "bath tabulated on a mesh coarser (step {:.3e}) than the requested mesh (step {:.3e}); \
                                             the coupling will be linearly interpolated",
                                            m.max_step(),
                                            mesh.max_step()
                                        ),
                                    ));
                                }
                                let lookup = |w: f64| {
                                    omegas.iter().position(|&o| o == w).map_or(0.0, |k| v[k])
                                };
                                TabulatedBath::from_fn(&grid, m, |x, w| coupling_at(x) * lookup(w))
                                    .map(BathModel::Tabulated)
                                    .map_err(|e| out.push(Diagnostic::error("bath", e.to_string())))
                                    .ok()
                            }
                        }
                    }
                }
            }
        },
    }?;

    // frequency requests
    let check_positive = |out: &mut Vec<Diagnostic>, field: &str, w: f64| {
        if !(w > 0.0) {
            out.push(Diagnostic::error(
                field,
                format!("frequency must be positive, got {w}"),
            ));
        }
    };
    for (k, &w) in green_omegas.iter().flatten().enumerate() {
        check_positive(out, &format!("green.omegas[{k}]"), w);
    }
    let on_mesh = |out: &mut Vec<Diagnostic>, field: &str, w: Option<f64>| {
        if let Some(w) = w {
            let near = nearest_mesh_point(&mesh, w);
            if (near - w).abs() > 1e-9 * w {
                out.push(Diagnostic::warning(
                    field,
                    format!("{w} is not a mesh point; the nearest mesh point {near} is used"),
                ));
            }
        }
    };
    on_mesh(out, "modes.omega", modes_omega);
    on_mesh(out, "verify.omega", verify_omegas.0);
    on_mesh(out, "verify.omega_prime", verify_omegas.1);
    if let (Some(a), Some(b)) = verify_omegas {
        if nearest_mesh_point(&mesh, a) == nearest_mesh_point(&mesh, b) {
            out.push(Diagnostic::error(
                "verify.omega_prime",
                "ω and ω′ fall on the same mesh point",
            ));
        }
    }
    if cfg.verify.as_ref().and_then(|v| v.label_stride) == Some(0) {
        out.push(Diagnostic::error(
            "verify.label_stride",
            "stride must be at least 1",
        ));
    }
    let in_grid = |out: &mut Vec<Diagnostic>, field: &str, xs: &[f64]| {
        for (k, &x) in xs.iter().enumerate() {
            if x < x_min - 1e-9 * h || x > x_max + 1e-9 * h {
                out.push(Diagnostic::error(
                    format!("{field}[{k}]"),
                    format!("point {x} outside the grid"),
                ));
            }
        }
    };
    if let Some(p) = &corr_points {
        in_grid(out, "correlate.points", p);
        if p.is_empty() {
            out.push(Diagnostic::error(
                "correlate.points",
                "at least one point required",
            ));
        }
    }
    if let Some(t) = &corr_taus {
        if t.is_empty() {
            out.push(Diagnostic::error(
                "correlate.taus",
                "at least one τ required",
            ));
        }
    }
    if let Some(p) = &vacuum_points {
        in_grid(out, "oracle.vacuum_points", p);
    }
    if let (Some(o), Some((bmin, bmax, drive, band))) = (&cfg.oracle, oracle_vals) {
        if let Some(d) = drive {
            in_grid(out, "oracle.drive_at", &[d]);
        }
        if o.bath_modes < 2 {
            out.push(Diagnostic::error(
                "oracle.bath_modes",
                "need at least 2 bath modes",
            ));
        }
        if let (Some(a), Some(b)) = (bmin, bmax) {
            if !(a > 0.0 && b > a) {
                out.push(Diagnostic::error(
                    "oracle.bath_min",
                    "need 0 < bath_min < bath_max",
                ));
            }
        }
        if let Some((Some(a), Some(b))) = band {
            if !(b > a && a >= 0.0) {
                out.push(Diagnostic::error("oracle.band", "band must be increasing"));
            }
            if vacuum_points.as_ref().is_none_or(|v| v.is_empty()) {
                out.push(Diagnostic::error(
                    "oracle.vacuum_points",
                    "a vacuum band needs at least one point",
                ));
            }
        }
        if o.broadening.is_some_and(|b| !(b > 0.0)) {
            out.push(Diagnostic::error(
                "oracle.broadening",
                "broadening must be positive",
            ));
        }
        for (k, &w) in drive_omegas.iter().flatten().enumerate() {
            check_positive(out, &format!("oracle.drive_omegas[{k}]"), w);
        }
        let dim = 2 * grid.len() * (2 + o.bath_modes);
        let cap = o.max_dimension.unwrap_or(DEFAULT_MAX_DIMENSION);
        if dim > cap {
            out.push(Diagnostic::error(
                "oracle.bath_modes",
                format!("oracle dimension {dim} exceeds the cap {cap}; raise oracle.max_dimension or reduce the grid"),
            ));
        }
        let dense = o.max_dense_dimension.unwrap_or(DEFAULT_MAX_DENSE_DIMENSION);
        if o.band.is_some() && dim > dense {
            out.push(Diagnostic::error(
                "oracle.band",
                format!("the vacuum comparison needs a dense diagonalization of dimension {dim} > {dense}"),
            ));
        }
    }

    let exterior = match cfg.green.as_ref().map(|g| g.exterior).unwrap_or_default() {
        ExteriorKind::Extended => None,
        ExteriorKind::Vacuum => Some(Exterior::vacuum()),
    };
    Some(Resolved {
        omega_ref,
        units_label: cfg.units.omega_ref.to_string(),
        profile,
        bath,
        bath_kind: b.kind,
        mesh,
        layers,
        cladding,
        exterior,
        tolerances,
    })
}

fn bath_mesh(
    b: &BathSpec,
    omega_ref: f64,
    fallback: &FrequencyMesh,
    out: &mut Vec<Diagnostic>,
) -> Option<FrequencyMesh> {
    match &b.mesh {
        None => Some(fallback.clone()),
        Some(m) => {
            let lo = m
                .min
                .internal(omega_ref, Dimension::Frequency)
                .map_err(|e| out.push(Diagnostic::error("bath.mesh.min", e)))
                .ok()?;
            let hi = m
                .max
                .internal(omega_ref, Dimension::Frequency)
                .map_err(|e| out.push(Diagnostic::error("bath.mesh.max", e)))
                .ok()?;
            if !(lo > 0.0) {
                out.push(Diagnostic::error(
                    "bath.mesh.min",
                    "frequencies must be positive",
                ));
                return None;
            }
            FrequencyMesh::uniform(lo, hi, m.points)
                .map_err(|e| out.push(Diagnostic::error("bath.mesh", e.to_string())))
                .ok()
        }
    }
}

fn read_spectrum(path: &Path) -> Result<(Vec<f64>, Vec<f64>), String> {
    let mut r =
        csv::Reader::from_path(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let headers = r.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or(format!("{} lacks a {name:?} column", path.display()))
    };
    let (iw, iv) = (col("omega")?, col("v")?);
    let mut omegas = Vec::new();
    let mut v = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let parse = |i: usize| -> Result<f64, String> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or(format!("{} row {}: invalid number", path.display(), k + 2))
        };
        omegas.push(parse(iw)?);
        v.push(parse(iv)?);
    }
    Ok((omegas, v))
}

pub fn nearest_mesh_point(mesh: &FrequencyMesh, w: f64) -> f64 {
    mesh.omegas()
        .iter()
        .copied()
        .min_by(|a, b| (a - w).abs().total_cmp(&(b - w).abs()))
        .unwrap_or(w)
}

/// Internal value of a quantity already checked by [`validate`].
pub fn internal(q: &Quantity, omega_ref: f64, dim: Dimension) -> f64 {
    q.internal(omega_ref, dim).expect("validated quantity")
}
