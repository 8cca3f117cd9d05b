//! Green function of the one-dimensional transverse wave equation
//!
//! ```text
//! ∂ₓ² G(x, x′) + ω² ε(x) G(x, x′) = δ(x − x′)
//! ```
//!
//! with outgoing behaviour on both sides. Three solvers are provided: the
//! closed form for a homogeneous medium, a transfer-matrix construction for
//! piecewise-constant stacks, and a second-order finite-difference solver for
//! arbitrary profiles.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::material::{Grid1D, SusceptibilityTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GreenError {
    #[error("degenerate medium: ε = {eps} gives zero wavenumber")]
    DegenerateMedium { eps: Complex64 },
    #[error("gain medium at x = {x}: Im ε = {im:e} < 0")]
    Gain { x: f64, im: f64 },
    #[error("invalid layer stack: {0}")]
    InvalidStack(String),
    #[error("vanishing Wronskian |W| = {magnitude:e} at ω = {omega}: stack resonance")]
    VanishingWronskian { omega: Complex64, magnitude: f64 },
    #[error("singular finite-difference system at ω = {omega} (zero pivot in row {row})")]
    SingularSystem { omega: Complex64, row: usize },
    #[error("size mismatch: {0}")]
    Mismatch(String),
}

pub type Result<T> = std::result::Result<T, GreenError>;

/// Outgoing wavenumber `k = ω√ε` with `Im k ≥ 0`, and `Re k > 0` when `Im k = 0`.
pub fn wavenumber(eps: Complex64, omega: impl Into<Complex64>) -> Result<Complex64> {
    let omega = omega.into();
    let k2 = omega * omega * eps;
    if k2.norm() == 0.0 {
        return Err(GreenError::DegenerateMedium { eps });
    }
    let mut k = k2.sqrt();
    if k.im < 0.0 || (k.im == 0.0 && k.re < 0.0) {
        k = -k;
    }
    Ok(k)
}

/// `G(x, x′) = e^{ik|x−x′|} / (2ik)` in a homogeneous medium.
pub fn green_homogeneous(
    eps: Complex64,
    omega: impl Into<Complex64>,
    x: f64,
    xp: f64,
) -> Result<Complex64> {
    let k = wavenumber(eps, omega)?;
    Ok(homogeneous_with_k(k, (x - xp).abs()))
}

fn homogeneous_with_k(k: Complex64, distance: f64) -> Complex64 {
    (Complex64::i() * k * distance).exp() / (Complex64::i() * k * 2.0)
}

/// Which construction produced a [`GreenSolution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    Analytic,
    TransferMatrix,
    FiniteDifference,
}

/// Permittivity continued beyond the grid ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exterior {
    pub left: Complex64,
    pub right: Complex64,
}

impl Exterior {
    pub fn vacuum() -> Self {
        Self {
            left: Complex64::new(1.0, 0.0),
            right: Complex64::new(1.0, 0.0),
        }
    }
}

/// `ε(x_i) = 1 + χ(x_i, ω)` on a grid at one frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DielectricResponse {
    grid: Grid1D,
    eps: Vec<Complex64>,
    exterior: Exterior,
}

impl DielectricResponse {
    pub fn new(grid: Grid1D, eps: Vec<Complex64>, exterior: Exterior) -> Result<Self> {
        if eps.len() != grid.len() {
            return Err(GreenError::Mismatch(format!(
                "{} permittivity values for {} grid points",
                eps.len(),
                grid.len()
            )));
        }
        for (i, e) in eps.iter().enumerate() {
            if e.im < -1e-12 * e.norm().max(1.0) {
                return Err(GreenError::Gain {
                    x: grid.x(i),
                    im: e.im,
                });
            }
        }
        for e in [exterior.left, exterior.right] {
            if e.im < 0.0 {
                return Err(GreenError::Gain {
                    x: f64::NAN,
                    im: e.im,
                });
            }
        }
        Ok(Self {
            grid,
            eps,
            exterior,
        })
    }

    /// Exterior taken equal to the end values of `eps`, so that an absorbing
    /// cladding at the grid edges continues without reflection.
    pub fn extended(grid: Grid1D, eps: Vec<Complex64>) -> Result<Self> {
        let exterior = Exterior {
            left: eps[0],
            right: eps[eps.len() - 1],
        };
        Self::new(grid, eps, exterior)
    }

    pub fn uniform(grid: Grid1D, eps: Complex64) -> Result<Self> {
        let n = grid.len();
        Self::extended(grid, vec![eps; n])
    }

    /// `ε = 1 + χ` at mesh index `k` of a susceptibility table.
    pub fn from_chi(
        chi: &SusceptibilityTable,
        k: usize,
        exterior: Option<Exterior>,
    ) -> Result<Self> {
        let eps: Vec<Complex64> = chi.column(k).into_iter().map(|c| c + 1.0).collect();
        match exterior {
            Some(ext) => Self::new(chi.grid().clone(), eps, ext),
            None => Self::extended(chi.grid().clone(), eps),
        }
    }

    /// Samples a layer stack; nodes on an interface take the mean of the two
    /// adjacent permittivities.
    pub fn from_stack(stack: &LayerStack, grid: Grid1D) -> Result<Self> {
        let eps = grid
            .points()
            .iter()
            .map(|&x| stack.eps_at_node(x, grid.spacing()))
            .collect();
        let exterior = Exterior {
            left: stack.layers[0].eps,
            right: stack.layers[stack.layers.len() - 1].eps,
        };
        Self::new(grid, eps, exterior)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn eps(&self) -> &[Complex64] {
        &self.eps
    }

    pub fn exterior(&self) -> Exterior {
        self.exterior
    }

    pub fn is_lossless(&self) -> bool {
        self.eps.iter().all(|e| e.im == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub thickness: f64,
    pub eps: Complex64,
}

/// Piecewise-constant medium. Interfaces sit at `origin` plus the cumulative
/// thicknesses; the first and last layers continue to −∞ and +∞.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    origin: f64,
    layers: Vec<Layer>,
}

impl LayerStack {
    pub fn new(origin: f64, layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(GreenError::InvalidStack(
                "at least one layer is required".into(),
            ));
        }
        for (j, l) in layers.iter().enumerate() {
            if !(l.thickness > 0.0) || !l.thickness.is_finite() {
                return Err(GreenError::InvalidStack(format!(
                    "layer {j} has thickness {}",
                    l.thickness
                )));
            }
            if l.eps.im < 0.0 {
                return Err(GreenError::Gain {
                    x: f64::NAN,
                    im: l.eps.im,
                });
            }
            if l.eps.norm() == 0.0 {
                return Err(GreenError::DegenerateMedium { eps: l.eps });
            }
        }
        Ok(Self { origin, layers })
    }

    pub fn homogeneous(eps: Complex64) -> Self {
        Self {
            origin: 0.0,
            layers: vec![Layer {
                thickness: 1.0,
                eps,
            }],
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Interface positions between consecutive layers.
    pub fn interfaces(&self) -> Vec<f64> {
        let mut x = self.origin;
        let mut out = Vec::with_capacity(self.layers.len().saturating_sub(1));
        for l in &self.layers[..self.layers.len() - 1] {
            x += l.thickness;
            out.push(x);
        }
        out
    }

    /// Index of the layer containing `x` (interfaces belong to the left layer).
    pub fn layer_index(&self, x: f64) -> usize {
        self.interfaces().iter().take_while(|&&xi| x > xi).count()
    }

    /// Permittivity sampled at a grid node of spacing `h`.
    pub fn eps_at_node(&self, x: f64, h: f64) -> Complex64 {
        let tol = 1e-9 * h;
        let interfaces = self.interfaces();
        if let Some(j) = interfaces.iter().position(|&xi| (xi - x).abs() <= tol) {
            return (self.layers[j].eps + self.layers[j + 1].eps) * 0.5;
        }
        self.layers[self.layer_index(x)].eps
    }
}

/// Dense Green matrix `G(x_i, x_j; ω)` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenSolution {
    grid: Grid1D,
    omega: Complex64,
    /// row-major: `values[i * n + j] = G(x_i, x_j)`
    values: Vec<Complex64>,
    solver: Solver,
    boundary: String,
    reciprocity_defect: f64,
    warnings: Vec<String>,
}

impl GreenSolution {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn omega(&self) -> Complex64 {
        self.omega
    }

    pub fn n(&self) -> usize {
        self.grid.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.grid.len() + j]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn solver(&self) -> Solver {
        self.solver
    }

    pub fn boundary(&self) -> &str {
        &self.boundary
    }

    /// `max |G_ij − G_ji|` before symmetrization (finite-difference) or as
    /// constructed (other solvers).
    pub fn reciprocity_defect(&self) -> f64 {
        self.reciprocity_defect
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Column `j`, i.e. `G(·, x_j)`.
    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.n()).map(|i| self.get(i, j)).collect()
    }

    /// `max |G_ij − G_ji|` of the stored matrix.
    pub fn reciprocity_residual(&self) -> f64 {
        let n = self.n();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).norm());
            }
        }
        worst
    }

    /// Copy with column `j` set to zero (for sensitivity checks).
    pub fn with_zeroed_column(&self, j: usize) -> Self {
        let mut out = self.clone();
        let n = self.n();
        for i in 0..n {
            out.values[i * n + j] = Complex64::new(0.0, 0.0);
        }
        out
    }

    fn from_parts(grid: Grid1D, omega: Complex64, values: Vec<Complex64>, solver: Solver) -> Self {
        let mut g = Self {
            grid,
            omega,
            values,
            solver,
            boundary: "outgoing".into(),
            reciprocity_defect: 0.0,
            warnings: Vec::new(),
        };
        g.reciprocity_defect = g.reciprocity_residual();
        g
    }
}

/// Analytic Green matrix of a homogeneous medium.
pub fn green_homogeneous_matrix(
    eps: Complex64,
    omega: impl Into<Complex64>,
    grid: &Grid1D,
) -> Result<GreenSolution> {
    let omega = omega.into();
    let k = wavenumber(eps, omega)?;
    let x = grid.points();
    let n = x.len();
    let mut values = Vec::with_capacity(n * n);
    for &xi in &x {
        for &xj in &x {
            values.push(homogeneous_with_k(k, (xi - xj).abs()));
        }
    }
    Ok(GreenSolution::from_parts(
        grid.clone(),
        omega,
        values,
        Solver::Analytic,
    ))
}

/// `(u, u′)` propagated by `d` in a medium of wavenumber `k`.
fn propagate(state: (Complex64, Complex64), k: Complex64, d: f64) -> (Complex64, Complex64) {
    let (c, s) = ((k * d).cos(), (k * d).sin());
    (
        state.0 * c + state.1 * s / k,
        -state.0 * k * s + state.1 * c,
    )
}

/// Green matrix of a layer stack from the two outgoing solutions.
///
/// `u₊` leaves through the right end (`u₊ ∝ e^{ikx}` in the last layer) and
/// `u₋` through the left end; then `G(x, x′) = u₊(x_>) u₋(x_<) / W`.
pub fn green_multilayer(
    stack: &LayerStack,
    omega: impl Into<Complex64>,
    grid: &Grid1D,
) -> Result<GreenSolution> {
    let omega = omega.into();
    let ks: Vec<Complex64> = stack
        .layers
        .iter()
        .map(|l| wavenumber(l.eps, omega))
        .collect::<Result<_>>()?;
    let interfaces = stack.interfaces();
    let nl = ks.len();
    let one = Complex64::new(1.0, 0.0);

    // reference point of each layer and the solution state there
    let (plus_ref, plus_state, minus_ref, minus_state) = if nl == 1 {
        let x0 = stack.origin;
        (
            vec![x0],
            vec![(one, Complex64::i() * ks[0])],
            vec![x0],
            vec![(one, -Complex64::i() * ks[0])],
        )
    } else {
        // u₊ is anchored at the right interface of every layer but the last,
        // which uses its left interface.
        let mut plus_ref = vec![0.0; nl];
        let mut plus_state = vec![(one, one); nl];
        plus_ref[nl - 1] = interfaces[nl - 2];
        plus_state[nl - 1] = (one, Complex64::i() * ks[nl - 1]);
        for j in (0..nl - 1).rev() {
            plus_ref[j] = interfaces[j];
            plus_state[j] = if j == nl - 2 {
                plus_state[nl - 1]
            } else {
                // cross layer j + 1 from its right interface to its left one
                let d = interfaces[j] - interfaces[j + 1];
                propagate(plus_state[j + 1], ks[j + 1], d)
            };
        }
        let mut minus_ref = vec![0.0; nl];
        let mut minus_state = vec![(one, one); nl];
        minus_ref[0] = interfaces[0];
        minus_state[0] = (one, -Complex64::i() * ks[0]);
        for j in 1..nl {
            minus_ref[j] = interfaces[j - 1];
            minus_state[j] = if j == 1 {
                minus_state[0]
            } else {
                let d = interfaces[j - 1] - interfaces[j - 2];
                propagate(minus_state[j - 1], ks[j - 1], d)
            };
        }
        (plus_ref, plus_state, minus_ref, minus_state)
    };

    let eval = |refs: &[f64], states: &[(Complex64, Complex64)], x: f64| {
        let j = stack.layer_index(x);
        propagate(states[j], ks[j], x - refs[j])
    };

    let x_w = minus_ref[0];
    let (um, dum) = eval(&minus_ref, &minus_state, x_w);
    let (up, dup) = eval(&plus_ref, &plus_state, x_w);
    let w = um * dup - dum * up;
    let scale = ks.iter().map(|k| k.norm()).fold(0.0, f64::max);
    if w.norm() < 1e-13 * scale {
        return Err(GreenError::VanishingWronskian {
            omega,
            magnitude: w.norm(),
        });
    }

    let x = grid.points();
    let n = x.len();
    let plus: Vec<Complex64> = x
        .iter()
        .map(|&xi| eval(&plus_ref, &plus_state, xi).0)
        .collect();
    let minus: Vec<Complex64> = x
        .iter()
        .map(|&xi| eval(&minus_ref, &minus_state, xi).0)
        .collect();
    let mut values = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
            values.push(plus[hi] * minus[lo] / w);
        }
    }
    Ok(GreenSolution::from_parts(
        grid.clone(),
        omega,
        values,
        Solver::TransferMatrix,
    ))
}

/// Tridiagonal matrix of the discrete wave operator
/// `(g_{i−1} − 2g_i + g_{i+1})/h² + ω²ε_i g_i`, with outgoing ghost nodes
/// `g_{−1} = e^{ik_L h} g_0` and `g_N = e^{ik_R h} g_{N−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveOperator {
    pub sub: Vec<Complex64>,
    pub diag: Vec<Complex64>,
    pub sup: Vec<Complex64>,
    /// `e^{ik h}` at the left and right ends.
    pub end_phase: [Complex64; 2],
    pub h: f64,
}

impl WaveOperator {
    pub fn new(eps: &DielectricResponse, omega: impl Into<Complex64>) -> Result<Self> {
        let omega = omega.into();
        let n = eps.grid.len();
        let h = eps.grid.spacing();
        let inv_h2 = 1.0 / (h * h);
        let kl = wavenumber(eps.exterior.left, omega)?;
        let kr = wavenumber(eps.exterior.right, omega)?;
        let end_phase = [
            (Complex64::i() * kl * h).exp(),
            (Complex64::i() * kr * h).exp(),
        ];
        let w2 = omega * omega;
        let mut diag: Vec<Complex64> = eps.eps.iter().map(|e| w2 * e - 2.0 * inv_h2).collect();
        diag[0] += end_phase[0] * inv_h2;
        diag[n - 1] += end_phase[1] * inv_h2;
        let off = vec![Complex64::new(inv_h2, 0.0); n - 1];
        Ok(Self {
            sub: off.clone(),
            diag,
            sup: off,
            end_phase,
            h,
        })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * u[i];
                if i > 0 {
                    acc += self.sub[i - 1] * u[i - 1];
                }
                if i + 1 < n {
                    acc += self.sup[i] * u[i + 1];
                }
                acc
            })
            .collect()
    }
}

/// LU factors of a tridiagonal matrix with partial pivoting (row interchanges
/// introduce a second superdiagonal).
struct TridiagonalLu {
    dl: Vec<Complex64>,
    d: Vec<Complex64>,
    du: Vec<Complex64>,
    du2: Vec<Complex64>,
    pivot_swapped: Vec<bool>,
}

impl TridiagonalLu {
    fn factor(op: &WaveOperator) -> std::result::Result<Self, usize> {
        let n = op.len();
        let mut dl = op.sub.clone();
        let mut d = op.diag.clone();
        let mut du = op.sup.clone();
        let mut du2 = vec![Complex64::new(0.0, 0.0); n.saturating_sub(2)];
        let mut pivot_swapped = vec![false; n];
        for i in 0..n - 1 {
            if d[i].norm() >= dl[i].norm() {
                if d[i].norm() == 0.0 {
                    return Err(i);
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                pivot_swapped[i] = true;
            }
        }
        if d[n - 1].norm() == 0.0 {
            return Err(n - 1);
        }
        Ok(Self {
            dl,
            d,
            du,
            du2,
            pivot_swapped,
        })
    }

    fn solve(&self, b: &mut [Complex64]) {
        let n = self.d.len();
        for i in 0..n - 1 {
            if self.pivot_swapped[i] {
                let temp = b[i] - self.dl[i] * b[i + 1];
                b[i] = b[i + 1];
                b[i + 1] = temp;
            } else {
                b[i + 1] = b[i + 1] - self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

/// Minimum resolution below which [`green_fd`] attaches a warning.
pub const MIN_POINTS_PER_WAVELENGTH: f64 = 20.0;

/// Finite-difference Green matrix: column `j` solves `A g = e_j / h`.
///
/// The raw solution is symmetrized; the asymmetry before symmetrization is
/// kept as [`GreenSolution::reciprocity_defect`].
pub fn green_fd(eps: &DielectricResponse, omega: impl Into<Complex64>) -> Result<GreenSolution> {
    let omega = omega.into();
    let op = WaveOperator::new(eps, omega)?;
    let lu = TridiagonalLu::factor(&op).map_err(|row| GreenError::SingularSystem { omega, row })?;
    let n = op.len();
    let h = op.h;
    let columns: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut b = vec![Complex64::new(0.0, 0.0); n];
            b[j] = Complex64::new(1.0 / h, 0.0);
            lu.solve(&mut b);
            b
        })
        .collect();
    let mut raw = vec![Complex64::new(0.0, 0.0); n * n];
    for (j, col) in columns.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            raw[i * n + j] = *v;
        }
    }
    let mut defect: f64 = 0.0;
    let mut values = raw.clone();
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (raw[i * n + j], raw[j * n + i]);
            defect = defect.max((a - b).norm());
            let m = (a + b) * 0.5;
            values[i * n + j] = m;
            values[j * n + i] = m;
        }
    }
    let mut g =
        GreenSolution::from_parts(eps.grid.clone(), omega, values, Solver::FiniteDifference);
    g.reciprocity_defect = defect;
    let ppw = points_per_wavelength(eps, omega)?;
    if ppw < MIN_POINTS_PER_WAVELENGTH {
        g.warnings.push(format!(
            "under-resolved grid: {ppw:.1} points per wavelength (minimum {MIN_POINTS_PER_WAVELENGTH})"
        ));
    }
    Ok(g)
}

/// Smallest number of grid points per internal wavelength `2π / Re k`.
pub fn points_per_wavelength(eps: &DielectricResponse, omega: impl Into<Complex64>) -> Result<f64> {
    let omega = omega.into();
    let h = eps.grid.spacing();
    let mut kmax: f64 = 0.0;
    for e in eps
        .eps
        .iter()
        .chain([&eps.exterior.left, &eps.exterior.right])
    {
        kmax = kmax.max(wavenumber(*e, omega)?.norm());
    }
    Ok(2.0 * std::f64::consts::PI / (kmax * h))
}

/// `max_ij h |(A g_j)_i − δ_ij / h|`: residual of the discrete defining
/// equation, scaled so that the delta has unit weight.
pub fn defining_equation_residual(g: &GreenSolution, eps: &DielectricResponse) -> Result<f64> {
    let op = WaveOperator::new(eps, g.omega)?;
    let n = g.n();
    let h = op.h;
    let worst = (0..n)
        .into_par_iter()
        .map(|j| {
            let r = op.apply(&g.column(j));
            r.iter()
                .enumerate()
                .map(|(i, v)| {
                    let target = if i == j { 1.0 / h } else { 0.0 };
                    (v - target).norm() * h
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

/// Outcome of the Green-identity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenIdentityReport {
    /// `max_ij |Im G − volume − flux| / max |Im G|`.
    pub residual: f64,
    /// `max_ij |volume| / max |Im G|`.
    pub volume_term: f64,
    /// `max_ij |flux| / max |Im G|`.
    pub surface_flux: f64,
    /// `Im ε ≡ 0`: the identity is carried by the surface flux alone.
    pub lossless: bool,
    /// Discrete identity (finite-difference) or trapezoid quadrature
    /// (continuum solvers).
    pub discrete: bool,
}

/// Checks
///
/// ```text
/// Im G(x, x′) = −∫ Im(ω²ε(y)) G(x, y) G*(x′, y) dy + boundary flux
/// ```
///
/// For finite-difference solutions the identity is applied to the discrete
/// operator, where it holds to rounding error: with `A` the wave operator,
/// `Im G = −h Ḡ (Im A) G`, written with rows of the symmetric `G` so that a
/// broken symmetry shows up in the residual. For other solvers the volume integral uses the
/// trapezoid rule on the grid and the flux is the outgoing current through
/// both ends.
///
/// `probes` restricts the pairs `(x_i, x_j)` at which the identity is
/// evaluated (all nodes when `None`); the volume integral always runs over
/// the full grid.
pub fn green_identity_residual(
    g: &GreenSolution,
    eps: &DielectricResponse,
    probes: Option<&[usize]>,
) -> Result<GreenIdentityReport> {
    let n = g.n();
    let all: Vec<usize> = (0..n).collect();
    let probes = probes.unwrap_or(&all);
    if eps.grid.len() != n {
        return Err(GreenError::Mismatch("grid of G and ε differ".into()));
    }
    let omega = g.omega;
    let h = eps.grid.spacing();
    let discrete = g.solver == Solver::FiniteDifference;
    let w2 = omega * omega;
    let weights: Vec<f64> = (0..n)
        .map(|i| {
            if !discrete && (i == 0 || i == n - 1) {
                h / 2.0
            } else {
                h
            }
        })
        .collect();
    let loss: Vec<f64> = eps.eps.iter().map(|e| (w2 * e).im).collect();
    let (flux_l, flux_r) = if discrete {
        let op = WaveOperator::new(eps, omega)?;
        (op.end_phase[0].im / h, op.end_phase[1].im / h)
    } else {
        let kl = wavenumber(eps.exterior.left, omega)?;
        let kr = wavenumber(eps.exterior.right, omega)?;
        // outgoing current ∝ Re k for a real frequency
        (kl.re, kr.re)
    };
    let img_max = probes
        .iter()
        .flat_map(|&i| probes.iter().map(move |&j| (i, j)))
        .map(|(i, j)| g.get(i, j).im.abs())
        .fold(0.0, f64::max);
    let rows: Vec<(f64, f64, f64)> = probes
        .par_iter()
        .map(|&i| {
            let mut worst = (0.0f64, 0.0f64, 0.0f64);
            for &j in probes {
                let mut volume = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    if loss[k] != 0.0 {
                        volume += g.get(i, k) * g.get(j, k).conj() * (loss[k] * weights[k]);
                    }
                }
                let volume = -volume;
                let flux = -(g.get(i, 0) * g.get(j, 0).conj() * flux_l
                    + g.get(i, n - 1) * g.get(j, n - 1).conj() * flux_r);
                let lhs = Complex64::new(g.get(i, j).im, 0.0);
                worst.0 = worst.0.max((lhs - volume - flux).norm());
                worst.1 = worst.1.max(volume.norm());
                worst.2 = worst.2.max(flux.norm());
            }
            worst
        })
        .collect();
    let fold = |f: fn(&(f64, f64, f64)) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let scale = if img_max > 0.0 { img_max } else { 1.0 };
    Ok(GreenIdentityReport {
        residual: fold(|r| r.0) / scale,
        volume_term: fold(|r| r.1) / scale,
        surface_flux: fold(|r| r.2) / scale,
        lossless: eps.is_lossless(),
        discrete,
    })
}
