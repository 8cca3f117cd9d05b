//! Dielectric and bath parameters, and the local susceptibility they produce.
//!
//! The susceptibility follows from eliminating the matter and bath
//! oscillators at fixed frequency:
//!
//! ```text
//! χ(x, ω) = −(α² / ε₀ρ) [ω² − ω̃₀² − Σ(x, ω) / ρ²]⁻¹
//! Σ(x, ω) = ∫ dw w² v_w² / ((ω + i0)² − w²)
//!         = P∫ dw w² v_w² / (ω² − w²) − iπ ω v_ω² / 2
//! ```
//!
//! The `+i0` is realized as a principal-value quadrature plus the explicit
//! delta term; no finite broadening enters the production path.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::quadrature;
use crate::units::{EPS0, HBAR};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaterialError {
    #[error(
        "grid needs at least 3 points with x_max > x_min (got {n} points on [{x_min}, {x_max}])"
    )]
    InvalidGrid { x_min: f64, x_max: f64, n: usize },
    #[error("invalid frequency mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid material profile: {0}")]
    InvalidProfile(String),
    #[error("invalid bath: {0}")]
    InvalidBath(String),
    #[error("grid mismatch: {0}")]
    Mismatch(String),
    #[error("undamped resonance at x = {x}, ω = {omega}: |denominator| = {magnitude:e}")]
    Singular { x: f64, omega: f64, magnitude: f64 },
    #[error(
        "lossless point at x = {x}, ω = {omega}: Im χ = {im_chi:e}, coupling identity undefined"
    )]
    LosslessPoint { x: f64, omega: f64, im_chi: f64 },
    #[error("non-finite bath self-energy at x = {x}, ω = {omega}")]
    DivergentSelfEnergy { x: f64, omega: f64 },
    #[error("vacuum point at x = {x}: α = 0")]
    VacuumPoint { x: f64 },
}

pub type Result<T> = std::result::Result<T, MaterialError>;

/// Uniform one-dimensional grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if n_points < 3 || !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(MaterialError::InvalidGrid {
                x_min,
                x_max,
                n: n_points,
            });
        }
        Ok(Self {
            x_min,
            x_max,
            n_points,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Node spacing `h`.
    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.x_max
        } else {
            self.x_min + i as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Index of the node nearest to `x` (clamped to the grid).
    pub fn nearest(&self, x: f64) -> usize {
        let t = ((x - self.x_min) / self.spacing()).round();
        (t.max(0.0) as usize).min(self.n_points - 1)
    }

    /// Index of the node at `x`, if `x` lies on the grid.
    pub fn node_at(&self, x: f64) -> Option<usize> {
        let i = self.nearest(x);
        ((self.x(i) - x).abs() <= 1e-9 * self.spacing()).then_some(i)
    }
}

/// Ascending positive frequencies with trapezoid weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyMesh {
    omegas: Vec<f64>,
    weights: Vec<f64>,
}

impl FrequencyMesh {
    pub fn uniform(omega_min: f64, omega_max: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(MaterialError::InvalidMesh(format!(
                "need at least 2 points, got {n}"
            )));
        }
        let omegas = (0..n)
            .map(|i| {
                if i + 1 == n {
                    omega_max
                } else {
                    omega_min + (omega_max - omega_min) * i as f64 / (n - 1) as f64
                }
            })
            .collect();
        Self::from_points(omegas)
    }

    pub fn from_points(omegas: Vec<f64>) -> Result<Self> {
        if omegas.len() < 2 {
            return Err(MaterialError::InvalidMesh("need at least 2 points".into()));
        }
        if !(omegas[0] > 0.0) {
            return Err(MaterialError::InvalidMesh(format!(
                "ω_min must be > 0, got {}",
                omegas[0]
            )));
        }
        if omegas.windows(2).any(|w| !(w[1] > w[0])) || omegas.iter().any(|w| !w.is_finite()) {
            return Err(MaterialError::InvalidMesh(
                "frequencies must be finite and strictly ascending".into(),
            ));
        }
        let weights = quadrature::trapezoid_weights(&omegas);
        Ok(Self { omegas, weights })
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn omega_min(&self) -> f64 {
        self.omegas[0]
    }

    pub fn omega_max(&self) -> f64 {
        self.omegas[self.omegas.len() - 1]
    }

    /// Largest spacing between consecutive frequencies.
    pub fn max_step(&self) -> f64 {
        self.omegas
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Index of the mesh point equal to `omega`.
    pub fn locate(&self, omega: f64) -> Option<usize> {
        quadrature::locate_node(&self.omegas, omega)
    }

    pub fn integrate(&self, samples: &[f64]) -> f64 {
        samples.iter().zip(&self.weights).map(|(s, w)| s * w).sum()
    }
}

/// Canonical parameters of the dielectric on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialProfile {
    grid: Grid1D,
    rho: Vec<f64>,
    omega0: Vec<f64>,
    alpha: Vec<f64>,
    hbar: f64,
}

impl MaterialProfile {
    pub fn new(grid: Grid1D, rho: Vec<f64>, omega0: Vec<f64>, alpha: Vec<f64>) -> Result<Self> {
        let n = grid.len();
        for (name, v) in [("rho", &rho), ("omega0", &omega0), ("alpha", &alpha)] {
            if v.len() != n {
                return Err(MaterialError::InvalidProfile(format!(
                    "{name} has {} values for {n} grid points",
                    v.len()
                )));
            }
        }
        if let Some(i) = rho.iter().position(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(MaterialError::InvalidProfile(format!(
                "rho must be > 0 (rho = {} at x = {})",
                rho[i],
                grid.x(i)
            )));
        }
        if let Some(i) = omega0.iter().position(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(MaterialError::InvalidProfile(format!(
                "omega0 must be >= 0 (omega0 = {} at x = {})",
                omega0[i],
                grid.x(i)
            )));
        }
        if let Some(i) = alpha.iter().position(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(MaterialError::InvalidProfile(format!(
                "alpha must be >= 0 (alpha = {} at x = {})",
                alpha[i],
                grid.x(i)
            )));
        }
        Ok(Self {
            grid,
            rho,
            omega0,
            alpha,
            hbar: HBAR,
        })
    }

    pub fn uniform(grid: Grid1D, rho: f64, omega0: f64, alpha: f64) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![rho; n], vec![omega0; n], vec![alpha; n])
    }

    /// Builds a profile by evaluating `(ρ, ω̃₀, α)` at every node.
    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> (f64, f64, f64)) -> Result<Self> {
        let (mut rho, mut omega0, mut alpha) = (Vec::new(), Vec::new(), Vec::new());
        for x in grid.points() {
            let (r, w, a) = f(x);
            rho.push(r);
            omega0.push(w);
            alpha.push(a);
        }
        Self::new(grid, rho, omega0, alpha)
    }

    pub fn with_hbar(mut self, hbar: f64) -> Self {
        self.hbar = hbar;
        self
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn rho(&self, i: usize) -> f64 {
        self.rho[i]
    }

    pub fn omega0(&self, i: usize) -> f64 {
        self.omega0[i]
    }

    pub fn alpha(&self, i: usize) -> f64 {
        self.alpha[i]
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn is_vacuum(&self, i: usize) -> bool {
        self.alpha[i] == 0.0
    }

    /// Replaces the polarization coupling by `λα`.
    pub fn scale_alpha(&self, lambda: f64) -> Result<Self> {
        let alpha = self.alpha.iter().map(|a| a * lambda).collect();
        Ok(Self::new(
            self.grid.clone(),
            self.rho.clone(),
            self.omega0.clone(),
            alpha,
        )?
        .with_hbar(self.hbar))
    }
}

/// Bath coupling tabulated on a frequency mesh, one row per grid node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedBath {
    mesh: FrequencyMesh,
    /// `coupling[i][k] = v(x_i, w_k)`
    coupling: Vec<Vec<f64>>,
}

impl TabulatedBath {
    pub fn new(mesh: FrequencyMesh, coupling: Vec<Vec<f64>>) -> Result<Self> {
        for (i, row) in coupling.iter().enumerate() {
            if row.len() != mesh.len() {
                return Err(MaterialError::InvalidBath(format!(
                    "row {i} has {} values for a {}-point mesh",
                    row.len(),
                    mesh.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
                return Err(MaterialError::InvalidBath(format!(
                    "coupling must be finite and >= 0, got {v} at node {i}"
                )));
            }
        }
        Ok(Self { mesh, coupling })
    }

    pub fn from_fn(
        grid: &Grid1D,
        mesh: FrequencyMesh,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let coupling = grid
            .points()
            .into_iter()
            .map(|x| mesh.omegas().iter().map(|&w| f(x, w)).collect())
            .collect();
        Self::new(mesh, coupling)
    }

    /// A bath that is zero everywhere (lossless medium).
    pub fn zero(grid: &Grid1D, mesh: FrequencyMesh) -> Self {
        let coupling = vec![vec![0.0; mesh.len()]; grid.len()];
        Self { mesh, coupling }
    }

    pub fn mesh(&self) -> &FrequencyMesh {
        &self.mesh
    }

    pub fn n_nodes(&self) -> usize {
        self.coupling.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coupling[i]
    }

    /// Ends of the support: one extra cell beyond each end of the mesh over
    /// which the coupling ramps linearly to zero.
    fn support(&self) -> (f64, f64) {
        let w = self.mesh.omegas();
        let n = w.len();
        let low = w[0] - (w[1] - w[0]).min(w[0] / 2.0);
        let high = w[n - 1] + (w[n - 1] - w[n - 2]);
        (low, high)
    }

    /// Linear interpolation in frequency, ramping to zero over one cell
    /// beyond each end of the mesh and zero further out.
    pub fn coupling(&self, i: usize, omega: f64) -> f64 {
        let w = self.mesh.omegas();
        let n = w.len();
        let row = &self.coupling[i];
        let (low, high) = self.support();
        if omega <= low || omega >= high {
            return 0.0;
        }
        if omega < w[0] {
            return row[0] * (omega - low) / (w[0] - low);
        }
        if omega > w[n - 1] {
            return row[n - 1] * (high - omega) / (high - w[n - 1]);
        }
        if let Some(k) = self.mesh.locate(omega) {
            return row[k];
        }
        let k = w.partition_point(|&x| x < omega);
        let t = (omega - w[k - 1]) / (w[k] - w[k - 1]);
        row[k - 1] + t * (row[k] - row[k - 1])
    }

    /// Quadrature nodes, trapezoid weights and samples of `w² v_w²` at node
    /// `i`, including the two zero-valued nodes that close the support.
    ///
    /// Closing the support keeps the principal value finite when `ω` sits on
    /// an end of the mesh where the coupling is still nonzero.
    pub fn spectrum_quadrature(&self, i: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (low, high) = self.support();
        let mut nodes = Vec::with_capacity(self.mesh.len() + 2);
        nodes.push(low);
        nodes.extend_from_slice(self.mesh.omegas());
        nodes.push(high);
        let weights = quadrature::trapezoid_weights(&nodes);
        let mut g = Vec::with_capacity(nodes.len());
        g.push(0.0);
        g.extend(
            self.mesh
                .omegas()
                .iter()
                .zip(&self.coupling[i])
                .map(|(w, v)| w * w * v * v),
        );
        g.push(0.0);
        (nodes, weights, g)
    }

    /// `Σ(x_i, ω)`: principal value on the bath mesh plus the delta term.
    pub fn self_energy(&self, i: usize, omega: f64) -> Complex64 {
        self.self_energy_with(&self.spectrum_quadrature(i), i, omega)
    }

    /// Same, reusing a quadrature from [`Self::spectrum_quadrature`].
    fn self_energy_with(
        &self,
        quad: &(Vec<f64>, Vec<f64>, Vec<f64>),
        i: usize,
        omega: f64,
    ) -> Complex64 {
        let (nodes, weights, g) = quad;
        let pv = quadrature::principal_value(nodes, weights, g, omega);
        let v = self.coupling(i, omega);
        Complex64::new(pv, -PI * omega * v * v / 2.0)
    }

    /// `∫ dw w² v_w² / (z² − w²)` for `Im z > 0`, by direct trapezoid sum.
    pub fn self_energy_complex(&self, i: usize, z: Complex64) -> Complex64 {
        let z2 = z * z;
        let (nodes, weights, g) = self.spectrum_quadrature(i);
        nodes
            .iter()
            .zip(&weights)
            .zip(&g)
            .map(|((&w, &wt), &gk)| wt * gk / (z2 - w * w))
            .sum()
    }
}

/// Ohmic bath reproducing a Lorentz oscillator `χ = ω_p² / (ω̃₀² − ω² − iγω)`.
///
/// The coupling is frequency independent, `v² = 2ρα²γ / (πε₀ω_p²)`, and the
/// frequency-independent part of the bath self-energy is absorbed in `ω̃₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrudeLorentzBath {
    plasma: Vec<f64>,
    width: Vec<f64>,
}

impl DrudeLorentzBath {
    /// Derives `ω_p = α / √(ε₀ρ)` from the profile.
    pub fn new(profile: &MaterialProfile, width: Vec<f64>) -> Result<Self> {
        let n = profile.grid().len();
        let plasma = (0..n)
            .map(|i| profile.alpha(i) / (EPS0 * profile.rho(i)).sqrt())
            .collect();
        Self::with_plasma(profile, plasma, width)
    }

    pub fn uniform(profile: &MaterialProfile, width: f64) -> Result<Self> {
        Self::new(profile, vec![width; profile.grid().len()])
    }

    /// Explicit plasma frequencies; they must equal `α / √(ε₀ρ)`.
    pub fn with_plasma(
        profile: &MaterialProfile,
        plasma: Vec<f64>,
        width: Vec<f64>,
    ) -> Result<Self> {
        let n = profile.grid().len();
        if plasma.len() != n || width.len() != n {
            return Err(MaterialError::InvalidBath(format!(
                "drude-lorentz arrays must have {n} entries"
            )));
        }
        for i in 0..n {
            let expected = profile.alpha(i) / (EPS0 * profile.rho(i)).sqrt();
            if (plasma[i] - expected).abs() > 1e-12 * expected.max(1.0) {
                return Err(MaterialError::InvalidBath(format!(
                    "plasma frequency {} at x = {} inconsistent with alpha/sqrt(eps0 rho) = {expected}",
                    plasma[i],
                    profile.grid().x(i)
                )));
            }
            if !profile.is_vacuum(i) && !(width[i] > 0.0) {
                return Err(MaterialError::InvalidBath(format!(
                    "width must be > 0 at x = {} (got {})",
                    profile.grid().x(i),
                    width[i]
                )));
            }
        }
        Ok(Self { plasma, width })
    }

    pub fn plasma(&self, i: usize) -> f64 {
        self.plasma[i]
    }

    pub fn width(&self, i: usize) -> f64 {
        self.width[i]
    }
}

/// Bath description entering [`compute_chi`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BathModel {
    Tabulated(TabulatedBath),
    DrudeLorentz(DrudeLorentzBath),
}

impl BathModel {
    pub fn n_nodes(&self) -> usize {
        match self {
            BathModel::Tabulated(t) => t.n_nodes(),
            BathModel::DrudeLorentz(d) => d.plasma.len(),
        }
    }

    /// Coupling strength `v_ω(x_i)`.
    pub fn coupling(&self, profile: &MaterialProfile, i: usize, omega: f64) -> f64 {
        match self {
            BathModel::Tabulated(t) => t.coupling(i, omega),
            BathModel::DrudeLorentz(d) => {
                if profile.is_vacuum(i) {
                    0.0
                } else {
                    let a = profile.alpha(i);
                    let wp = d.plasma[i];
                    (2.0 * profile.rho(i) * a * a * d.width[i] / (PI * EPS0 * wp * wp)).sqrt()
                }
            }
        }
    }

    /// Bath self-energy `Σ(x_i, ω)` on the real axis (`ω + i0`).
    pub fn self_energy(&self, profile: &MaterialProfile, i: usize, omega: f64) -> Complex64 {
        match self {
            BathModel::Tabulated(t) => t.self_energy(i, omega),
            BathModel::DrudeLorentz(_) => {
                let v = self.coupling(profile, i, omega);
                Complex64::new(0.0, -PI * omega * v * v / 2.0)
            }
        }
    }

    fn check_grid(&self, profile: &MaterialProfile) -> Result<()> {
        if self.n_nodes() != profile.grid().len() {
            return Err(MaterialError::Mismatch(format!(
                "bath has {} nodes, profile grid has {}",
                self.n_nodes(),
                profile.grid().len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChiProvenance {
    ComputedFromBath,
    PresetClosedForm,
}

/// Complex `χ(x_i, ω_k)` on grid × mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SusceptibilityTable {
    grid: Grid1D,
    mesh: FrequencyMesh,
    /// row-major: `values[i * n_omega + k]`
    values: Vec<Complex64>,
    provenance: ChiProvenance,
}

impl SusceptibilityTable {
    pub fn from_values(
        grid: Grid1D,
        mesh: FrequencyMesh,
        values: Vec<Complex64>,
        provenance: ChiProvenance,
    ) -> Result<Self> {
        if values.len() != grid.len() * mesh.len() {
            return Err(MaterialError::Mismatch(format!(
                "{} values for {}x{} table",
                values.len(),
                grid.len(),
                mesh.len()
            )));
        }
        Ok(Self {
            grid,
            mesh,
            values,
            provenance,
        })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn mesh(&self) -> &FrequencyMesh {
        &self.mesh
    }

    pub fn provenance(&self) -> ChiProvenance {
        self.provenance
    }

    pub fn get(&self, i: usize, k: usize) -> Complex64 {
        self.values[i * self.mesh.len() + k]
    }

    /// All frequencies at node `i`.
    pub fn node(&self, i: usize) -> &[Complex64] {
        let m = self.mesh.len();
        &self.values[i * m..(i + 1) * m]
    }

    /// All nodes at frequency index `k`.
    pub fn column(&self, k: usize) -> Vec<Complex64> {
        (0..self.grid.len()).map(|i| self.get(i, k)).collect()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Copy with `Re χ` multiplied by `factor` (used to build corrupted fixtures).
    pub fn with_scaled_real_part(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for c in &mut out.values {
            c.re *= factor;
        }
        out
    }
}

fn lorentz_denominator(
    profile: &MaterialProfile,
    i: usize,
    omega: f64,
    sigma: Complex64,
) -> Complex64 {
    let rho = profile.rho(i);
    let w0 = profile.omega0(i);
    Complex64::new(omega * omega - w0 * w0, 0.0) - sigma / (rho * rho)
}

/// `χ(x_i, ω)` for a single point.
pub fn chi_at(
    profile: &MaterialProfile,
    bath: &BathModel,
    i: usize,
    omega: f64,
) -> Result<Complex64> {
    chi_at_with(profile, bath, i, omega, None)
}

fn chi_at_with(
    profile: &MaterialProfile,
    bath: &BathModel,
    i: usize,
    omega: f64,
    quad: Option<&(Vec<f64>, Vec<f64>, Vec<f64>)>,
) -> Result<Complex64> {
    if profile.is_vacuum(i) {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let alpha = profile.alpha(i);
    let rho = profile.rho(i);
    match bath {
        BathModel::DrudeLorentz(d) => {
            let w0 = profile.omega0(i);
            let den = Complex64::new(w0 * w0 - omega * omega, -d.width(i) * omega);
            if den.norm() < 1e-14 {
                return Err(MaterialError::Singular {
                    x: profile.grid().x(i),
                    omega,
                    magnitude: den.norm(),
                });
            }
            let wp = d.plasma(i);
            Ok(Complex64::new(wp * wp, 0.0) / den)
        }
        BathModel::Tabulated(t) => {
            let sigma = match quad {
                Some(q) => t.self_energy_with(q, i, omega),
                None => t.self_energy(i, omega),
            };
            if !sigma.re.is_finite() {
                return Err(MaterialError::DivergentSelfEnergy {
                    x: profile.grid().x(i),
                    omega,
                });
            }
            let den = lorentz_denominator(profile, i, omega, sigma);
            if den.norm() < 1e-14 {
                return Err(MaterialError::Singular {
                    x: profile.grid().x(i),
                    omega,
                    magnitude: den.norm(),
                });
            }
            Ok(-Complex64::new(alpha * alpha / (EPS0 * rho), 0.0) / den)
        }
    }
}

/// `χ(x_i, z)` continued to a complex frequency `z` in the upper half plane.
pub fn chi_at_complex(
    profile: &MaterialProfile,
    bath: &BathModel,
    i: usize,
    z: Complex64,
) -> Result<Complex64> {
    if profile.is_vacuum(i) {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if !(z.im > 0.0) {
        return Err(MaterialError::InvalidMesh(format!(
            "complex frequency must lie in the upper half plane, got {z}"
        )));
    }
    let alpha = profile.alpha(i);
    let rho = profile.rho(i);
    let w0 = profile.omega0(i);
    let den = match bath {
        BathModel::DrudeLorentz(d) => {
            // ω² − ω̃₀² + iγω continued analytically
            z * z - w0 * w0 + Complex64::new(0.0, d.width(i)) * z
        }
        BathModel::Tabulated(t) => z * z - w0 * w0 - t.self_energy_complex(i, z) / (rho * rho),
    };
    Ok(-Complex64::new(alpha * alpha / (EPS0 * rho), 0.0) / den)
}

/// Susceptibility table on `mesh`.
pub fn compute_chi(
    profile: &MaterialProfile,
    bath: &BathModel,
    mesh: &FrequencyMesh,
) -> Result<SusceptibilityTable> {
    bath.check_grid(profile)?;
    let n = profile.grid().len();
    let rows: Vec<Result<Vec<Complex64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let quad = match bath {
                BathModel::Tabulated(t) if !profile.is_vacuum(i) => Some(t.spectrum_quadrature(i)),
                _ => None,
            };
            mesh.omegas()
                .iter()
                .map(|&w| chi_at_with(profile, bath, i, w, quad.as_ref()))
                .collect()
        })
        .collect();
    let mut values = Vec::with_capacity(n * mesh.len());
    for row in rows {
        values.extend(row?);
    }
    let provenance = match bath {
        BathModel::Tabulated(_) => ChiProvenance::ComputedFromBath,
        BathModel::DrudeLorentz(_) => ChiProvenance::PresetClosedForm,
    };
    SusceptibilityTable::from_values(profile.grid().clone(), mesh.clone(), values, provenance)
}

/// `v_ω = α [2ρ Im χ / (π ε₀ ω)]^{1/2} / |χ|` for a single susceptibility value.
pub fn coupling_from_chi(chi: Complex64, alpha: f64, rho: f64, omega: f64) -> Option<f64> {
    if !(chi.im > 0.0) || alpha == 0.0 {
        return None;
    }
    Some(alpha * (2.0 * rho * chi.im / (PI * EPS0 * omega)).sqrt() / chi.norm())
}

/// Recovers the bath coupling from the tabulated susceptibility at node `i`,
/// mesh index `k`.
pub fn recover_coupling(
    chi: &SusceptibilityTable,
    profile: &MaterialProfile,
    i: usize,
    k: usize,
) -> Result<f64> {
    let x = profile.grid().x(i);
    if profile.is_vacuum(i) {
        return Err(MaterialError::VacuumPoint { x });
    }
    let omega = chi.mesh().omegas()[k];
    let value = chi.get(i, k);
    coupling_from_chi(value, profile.alpha(i), profile.rho(i), omega).ok_or(
        MaterialError::LosslessPoint {
            x,
            omega,
            im_chi: value.im,
        },
    )
}

/// Outcome of the dispersion-relation consistency check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum KramersKronig {
    Checked(KramersKronigReport),
    NotApplicable { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KramersKronigReport {
    /// `max |Re χ − (2/π) P∫ w Im χ(w) / (w² − ω²) dw|` over the mesh.
    pub residual: f64,
    /// Largest contribution of the extrapolated region above the mesh.
    pub tail_contribution: f64,
    /// `|χ(ω_max)| / max |χ|`.
    pub edge_ratio: f64,
    pub warning: Option<String>,
}

/// Compares `Re χ` with the Hilbert transform of `Im χ` at node `i`.
///
/// Below the mesh `Im χ` is continued linearly to zero; above it as `w⁻³`,
/// which is the asymptotic falloff of every susceptibility produced by
/// [`compute_chi`].
pub fn kramers_kronig_residual(chi: &SusceptibilityTable, i: usize) -> KramersKronig {
    let mesh = chi.mesh();
    let values = chi.node(i);
    let peak = values.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let peak_im = values.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    if peak_im == 0.0 || peak_im <= 1e-15 * peak {
        return KramersKronig::NotApplicable {
            reason: "Im χ vanishes on the mesh (lossless profile)".into(),
        };
    }
    let omegas = mesh.omegas();
    let f: Vec<f64> = omegas.iter().zip(values).map(|(w, c)| w * c.im).collect();
    let mut residual: f64 = 0.0;
    let mut tail: f64 = 0.0;
    for (k, &w) in omegas.iter().enumerate() {
        let (pv, high) = quadrature::principal_value_half_line(omegas, mesh.weights(), &f, w);
        // (2/π) P∫ w' Im χ / (w'² − ω²) = −(2/π) P∫ f / (ω² − w'²)
        let hilbert = -2.0 / PI * pv;
        residual = residual.max((values[k].re - hilbert).abs());
        tail = tail.max((2.0 / PI * high).abs());
    }
    let edge_ratio = values[values.len() - 1].norm() / peak;
    let warning = (edge_ratio >= 1e-3).then(|| {
        format!(
            "mesh truncated early: |χ(ω_max)|/max|χ| = {edge_ratio:.3e} >= 1e-3; \
             extrapolated tail contributes up to {tail:.3e}"
        )
    });
    KramersKronig::Checked(KramersKronigReport {
        residual,
        tail_contribution: tail,
        edge_ratio,
        warning,
    })
}
