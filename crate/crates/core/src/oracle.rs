//! Brute-force check of the analytic construction: the Hamiltonian is
//! discretized on the grid with a finite bath and diagonalized directly.
//!
//! Canonical variables are rescaled so the discrete commutators are
//! canonical: `a_i = √h A_i`, `π_i = √h Π_i` (and the same for X, P), and
//! `y_im = √(hΔω′_m) Y_i(ω′_m)`, `q_im = √(hΔω′_m) Q_i(ω′_m)`. The field
//! vanishes on walls one spacing beyond each end of the grid (Dirichlet).
//!
//! Nothing from `modes` or `fields` is used here; the oracle only sees the
//! material description.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::material::{BathModel, Grid1D, MaterialProfile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("model dimension {dimension} exceeds the cap {cap}")]
    TooLarge { dimension: usize, cap: usize },
    #[error(
        "Hamiltonian is not positive definite: at x = {x} the oscillator stiffness ρω̃₀² − Σv̄²/ρ = {margin} (factorization pivot {pivot:?})"
    )]
    Indefinite {
        x: f64,
        margin: f64,
        pivot: Option<usize>,
    },
    #[error("invalid bath discretization: {0}")]
    InvalidBath(String),
    #[error("drive at ω = {omega} hits an undamped resonance")]
    Resonance { omega: Complex64 },
    #[error("size mismatch: {0}")]
    Mismatch(String),
    #[error("linear algebra failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, OracleError>;

/// Default cap on the phase-space dimension `2N(2 + M)`.
pub const DEFAULT_MAX_DIMENSION: usize = 20_000;
/// Cap for the dense symplectic diagonalization.
pub const DEFAULT_MAX_DENSE_DIMENSION: usize = 6_000;

/// Finite bath: frequencies and trapezoid weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathDiscretization {
    pub omegas: Vec<f64>,
    pub weights: Vec<f64>,
}

impl BathDiscretization {
    /// `m` equally spaced modes on `[omega_min, omega_max]` with trapezoid
    /// weights.
    pub fn uniform(omega_min: f64, omega_max: f64, m: usize) -> Result<Self> {
        if m < 2 || !(omega_min > 0.0) || !(omega_max > omega_min) {
            return Err(OracleError::InvalidBath(format!(
                "need m ≥ 2 and 0 < ω_min < ω_max, got m = {m}, [{omega_min}, {omega_max}]"
            )));
        }
        let d = (omega_max - omega_min) / (m - 1) as f64;
        let omegas = (0..m).map(|k| omega_min + d * k as f64).collect();
        let mut weights = vec![d; m];
        weights[0] = d / 2.0;
        weights[m - 1] = d / 2.0;
        Ok(Self { omegas, weights })
    }

    /// Midpoint rule: `m` cells of width `Δ` centred at `ω_min + (k + ½)Δ`.
    pub fn midpoint(omega_min: f64, omega_max: f64, m: usize) -> Result<Self> {
        if m < 1 || !(omega_min >= 0.0) || !(omega_max > omega_min) {
            return Err(OracleError::InvalidBath(format!(
                "need m ≥ 1 and 0 ≤ ω_min < ω_max, got m = {m}, [{omega_min}, {omega_max}]"
            )));
        }
        let d = (omega_max - omega_min) / m as f64;
        Ok(Self {
            omegas: (0..m).map(|k| omega_min + d * (k as f64 + 0.5)).collect(),
            weights: vec![d; m],
        })
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// Typical spacing `Δω′`.
    pub fn spacing(&self) -> f64 {
        self.weights.iter().cloned().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelOptions {
    pub max_dimension: usize,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            max_dimension: DEFAULT_MAX_DIMENSION,
        }
    }
}

/// Which block of the canonical layout an index belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    A(usize),
    X(usize),
    Y(usize, usize),
    Pi(usize),
    P(usize),
    Q(usize, usize),
}

/// `H = ½ zᵀ M_H z` with `z = (a, x, y; π, p, q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteQuadraticModel {
    grid: Grid1D,
    bath: BathDiscretization,
    hbar: f64,
    rho: Vec<f64>,
    alpha: Vec<f64>,
    /// Bare stiffness `ω̃₀²` used in the matrix (preset counterterm included).
    omega0_sq: Vec<f64>,
    /// Counterterm `Σ_m v̄²/ρ²` added for the Drude–Lorentz preset.
    pub counterterm: Vec<f64>,
    /// `coupling[i * M + m] = v̄_m(x_i) = v(x_i, ω′_m) √Δω′_m`
    coupling: Vec<f64>,
    /// Row-compressed symmetric `M_H`: `(col, value)` per row.
    rows: Vec<Vec<(usize, f64)>>,
}

impl DiscreteQuadraticModel {
    pub fn n(&self) -> usize {
        self.grid.len()
    }

    pub fn m(&self) -> usize {
        self.bath.len()
    }

    /// Configuration-space dimension `N(2 + M)`.
    pub fn half_dimension(&self) -> usize {
        self.n() * (2 + self.m())
    }

    pub fn dimension(&self) -> usize {
        2 * self.half_dimension()
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn bath(&self) -> &BathDiscretization {
        &self.bath
    }

    pub fn coupling(&self, i: usize, m: usize) -> f64 {
        self.coupling[i * self.m() + m]
    }

    pub fn index(&self, v: Variable) -> usize {
        let (n, m, d) = (self.n(), self.m(), self.half_dimension());
        match v {
            Variable::A(i) => i,
            Variable::X(i) => n + i,
            Variable::Y(i, k) => 2 * n + i * m + k,
            Variable::Pi(i) => d + i,
            Variable::P(i) => d + n + i,
            Variable::Q(i, k) => d + 2 * n + i * m + k,
        }
    }

    /// `M_H` entry.
    pub fn entry(&self, r: usize, c: usize) -> f64 {
        self.rows[r]
            .iter()
            .filter(|&&(j, _)| j == c)
            .map(|&(_, v)| v)
            .sum()
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows
            .iter()
            .enumerate()
            .all(|(r, row)| row.iter().all(|&(c, v)| self.entry(c, r) == v))
    }

    fn triplets(&self) -> Vec<Triplet<usize, usize, f64>> {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().map(move |&(c, v)| Triplet::new(r, c, v)))
            .collect()
    }

    /// `M_H z`
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(c, v)| v * z[c]).sum())
            .collect()
    }

    /// `ż = J M_H z`
    pub fn generator(&self, z: &[f64]) -> Vec<f64> {
        let d = self.half_dimension();
        let mz = self.apply(z);
        let mut out = vec![0.0; 2 * d];
        out[..d].copy_from_slice(&mz[d..]);
        for k in 0..d {
            out[d + k] = -mz[k];
        }
        out
    }

    /// `½ zᵀ M_H z`
    pub fn energy(&self, z: &[f64]) -> f64 {
        0.5 * self.apply(z).iter().zip(z).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Energy evaluated term by term from the Hamiltonian density in the
    /// unscaled variables.
    pub fn energy_direct(&self, z: &[f64]) -> f64 {
        let (n, m) = (self.n(), self.m());
        let h = self.grid.spacing();
        let sh = h.sqrt();
        let field = |v: Variable| z[self.index(v)] / sh;
        let mut e = 0.0;
        // gradient energy over all edges, walls included
        for i in 0..=n {
            let left = if i == 0 {
                0.0
            } else {
                field(Variable::A(i - 1))
            };
            let right = if i == n { 0.0 } else { field(Variable::A(i)) };
            e += h * 0.5 * ((right - left) / h).powi(2);
        }
        for i in 0..n {
            let (rho, alpha) = (self.rho[i], self.alpha[i]);
            let a = field(Variable::A(i));
            let pi = field(Variable::Pi(i));
            let x = field(Variable::X(i));
            let p = field(Variable::P(i));
            let mut density = 0.5 * pi * pi
                + 0.5 * p * p / rho
                + 0.5 * rho * self.omega0_sq[i] * x * x
                + alpha / rho * a * p
                + 0.5 * alpha * alpha / rho * a * a;
            for k in 0..m {
                let dw = self.bath.weights[k];
                let w = self.bath.omegas[k];
                let y = z[self.index(Variable::Y(i, k))] / (h * dw).sqrt();
                let q = z[self.index(Variable::Q(i, k))] / (h * dw).sqrt();
                let v = self.coupling(i, k) / dw.sqrt();
                density += dw * (0.5 * q * q / rho + 0.5 * rho * w * w * y * y + v / rho * x * q);
            }
            e += h * density;
        }
        e
    }

    /// Stiffness left for the matter oscillator once the bath and the
    /// `A·P` coupling are completed to squares: `ρω̃₀² − Σ_m v̄²/ρ`.
    pub fn stiffness_margin(&self) -> Vec<f64> {
        (0..self.n())
            .map(|i| {
                let s: f64 = (0..self.m()).map(|k| self.coupling(i, k).powi(2)).sum();
                self.rho[i] * self.omega0_sq[i] - s / self.rho[i]
            })
            .collect()
    }

    /// Sparse Cholesky factorization of `M_H`.
    pub fn check_positive_definite(&self) -> Result<()> {
        let d = self.dimension();
        let lower: Vec<_> = self
            .triplets()
            .into_iter()
            .filter(|t| t.row >= t.col)
            .collect();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(d, d, &lower)
            .map_err(|e| OracleError::Numerical(format!("{e:?}")))?;
        let pivot = match mat.sp_cholesky(Side::Lower) {
            Ok(_) => return Ok(()),
            Err(faer::sparse::linalg::LltError::Numeric(
                faer::linalg::cholesky::llt::factor::LltError::NonPositivePivot { index },
            )) => Some(index),
            Err(e) => return Err(OracleError::Numerical(format!("{e:?}"))),
        };
        let margin = self.stiffness_margin();
        let (i, worst) = margin
            .iter()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc },
            );
        Err(OracleError::Indefinite {
            x: self.grid.x(i),
            margin: worst,
            pivot,
        })
    }

    fn dense(&self) -> Mat<f64> {
        let d = self.dimension();
        let mut m = Mat::<f64>::zeros(d, d);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                m[(r, c)] += v;
            }
        }
        m
    }
}

/// Assembles `M_H` for `profile` with the bath sampled on `disc`.
///
/// For the Drude–Lorentz preset the bath integral is renormalized into ω̃₀;
/// the discrete model makes that explicit by adding `Σ v̄²/ρ²` to `ω̃₀²`.
pub fn assemble_hamiltonian(
    profile: &MaterialProfile,
    bath: &BathModel,
    disc: &BathDiscretization,
    options: ModelOptions,
) -> Result<DiscreteQuadraticModel> {
    let grid = profile.grid().clone();
    let n = grid.len();
    let m = disc.len();
    if disc.omegas.len() != disc.weights.len() || disc.omegas.iter().any(|&w| !(w > 0.0)) {
        return Err(OracleError::InvalidBath(
            "bath frequencies must be positive, one weight each".into(),
        ));
    }
    if disc.weights.iter().any(|&w| !(w > 0.0)) {
        return Err(OracleError::InvalidBath(
            "bath weights must be positive".into(),
        ));
    }
    let dimension = 2 * n * (2 + m);
    if dimension > options.max_dimension {
        return Err(OracleError::TooLarge {
            dimension,
            cap: options.max_dimension,
        });
    }
    let h = grid.spacing();
    let rho: Vec<f64> = (0..n).map(|i| profile.rho(i)).collect();
    let alpha: Vec<f64> = (0..n).map(|i| profile.alpha(i)).collect();
    let mut coupling = vec![0.0; n * m];
    for i in 0..n {
        if profile.is_vacuum(i) {
            continue;
        }
        for k in 0..m {
            coupling[i * m + k] =
                bath.coupling(profile, i, disc.omegas[k]) * disc.weights[k].sqrt();
        }
    }
    let counterterm: Vec<f64> = (0..n)
        .map(|i| match bath {
            BathModel::DrudeLorentz(_) => {
                (0..m).map(|k| coupling[i * m + k].powi(2)).sum::<f64>() / (rho[i] * rho[i])
            }
            BathModel::Tabulated(_) => 0.0,
        })
        .collect();
    let omega0_sq: Vec<f64> = (0..n)
        .map(|i| profile.omega0(i).powi(2) + counterterm[i])
        .collect();

    let d = n * (2 + m);
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); 2 * d];
    let mut put = |r: usize, c: usize, v: f64| {
        if v != 0.0 {
            rows[r].push((c, v));
            if r != c {
                rows[c].push((r, v));
            }
        }
    };
    let ia = |i: usize| i;
    let ix = |i: usize| n + i;
    let iy = |i: usize, k: usize| 2 * n + i * m + k;
    let ipi = |i: usize| d + i;
    let ip = |i: usize| d + n + i;
    let iq = |i: usize, k: usize| d + 2 * n + i * m + k;
    for i in 0..n {
        let (r, a) = (rho[i], alpha[i]);
        put(ia(i), ia(i), 2.0 / (h * h) + a * a / r);
        if i + 1 < n {
            put(ia(i), ia(i + 1), -1.0 / (h * h));
        }
        put(ipi(i), ipi(i), 1.0);
        put(ia(i), ip(i), a / r);
        put(ip(i), ip(i), 1.0 / r);
        put(ix(i), ix(i), r * omega0_sq[i]);
        for k in 0..m {
            let w = disc.omegas[k];
            put(iy(i, k), iy(i, k), r * w * w);
            put(iq(i, k), iq(i, k), 1.0 / r);
            put(ix(i), iq(i, k), coupling[i * m + k] / r);
        }
    }
    for row in rows.iter_mut() {
        row.sort_by_key(|&(c, _)| c);
    }

    Ok(DiscreteQuadraticModel {
        grid,
        bath: disc.clone(),
        hbar: profile.hbar(),
        rho,
        alpha,
        omega0_sq,
        counterterm,
        coupling,
        rows,
    })
}

/// Symplectic (Williamson) diagonalization.
///
/// With `M_H = L Lᵀ` and `K = Lᵀ J L`, the Hermitian matrix `iK` has
/// eigenpairs `±Ω_k`; the mode vectors are `w_k = L^{−T} u_k` for the
/// positive half, and `z = Σ_k √(ħΩ_k) (w_k c_k + w̄_k c_k†)`. Degenerate
/// frequencies are handled by the Hermitian solver, which returns an
/// orthonormal basis of each eigenspace.
#[derive(Debug, Clone)]
pub struct NormalModeDecomposition {
    pub frequencies: Vec<f64>,
    /// Column `k` is `w_k`.
    modes: Mat<Complex64>,
    /// Eigenvectors `u_k` of `iK`, positive half.
    u: Mat<Complex64>,
    /// `max |U†U − I|` for the positive half.
    pub orthonormality: f64,
    hbar: f64,
    h: f64,
    half: usize,
    n: usize,
}

pub fn normal_modes(
    model: &DiscreteQuadraticModel,
    max_dense_dimension: usize,
) -> Result<NormalModeDecomposition> {
    let dim = model.dimension();
    if dim > max_dense_dimension {
        return Err(OracleError::TooLarge {
            dimension: dim,
            cap: max_dense_dimension,
        });
    }
    model.check_positive_definite()?;
    let d = model.half_dimension();
    let m = model.dense();
    let llt = m
        .llt(Side::Lower)
        .map_err(|e| OracleError::Numerical(format!("dense Cholesky: {e:?}")))?;
    let l = llt.L().to_owned();
    // J L: q rows take the p rows of L, p rows take minus the q rows
    let mut jl = Mat::<f64>::zeros(dim, dim);
    for c in 0..dim {
        for r in 0..d {
            jl[(r, c)] = l[(d + r, c)];
            jl[(d + r, c)] = -l[(r, c)];
        }
    }
    let k = l.transpose() * &jl;
    let ik = Mat::<Complex64>::from_fn(dim, dim, |r, c| Complex64::new(0.0, k[(r, c)]));
    let eig = ik
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| OracleError::Numerical(format!("Hermitian eigensolver: {e:?}")))?;
    let s = eig.S();
    let uall = eig.U();
    // ascending: the positive half is the upper d eigenvalues
    let frequencies: Vec<f64> = (d..dim).map(|j| s[j].re).collect();
    if frequencies.first().is_some_and(|&w| !(w > 0.0)) {
        return Err(OracleError::Numerical(format!(
            "non-positive normal-mode frequency {}",
            frequencies[0]
        )));
    }
    let u = uall.subcols(d, d).to_owned();

    // w = L^{−T} u = M^{−1} L u, done on real and imaginary parts
    let lu_re = &l * Mat::<f64>::from_fn(dim, d, |r, c| u[(r, c)].re);
    let lu_im = &l * Mat::<f64>::from_fn(dim, d, |r, c| u[(r, c)].im);
    let w_re = llt.solve(&lu_re);
    let w_im = llt.solve(&lu_im);
    let modes =
        Mat::<Complex64>::from_fn(dim, d, |r, c| Complex64::new(w_re[(r, c)], w_im[(r, c)]));

    let gram = u.adjoint() * &u;
    let mut orth: f64 = 0.0;
    for r in 0..d {
        for c in 0..d {
            let target = if r == c { 1.0 } else { 0.0 };
            orth = orth.max((gram[(r, c)] - target).norm());
        }
    }

    Ok(NormalModeDecomposition {
        frequencies,
        modes,
        u,
        orthonormality: orth,
        hbar: model.hbar,
        h: model.grid.spacing(),
        half: d,
        n: model.n(),
    })
}

impl NormalModeDecomposition {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Mode vector `w_k` component `r`.
    pub fn mode(&self, r: usize, k: usize) -> Complex64 {
        self.modes[(r, k)]
    }

    /// Eigenvector `u_k` of `iK`; `c_k = u_k† Lᵀ z / √(ħΩ_k)`.
    pub fn eigenvector(&self, r: usize, k: usize) -> Complex64 {
        self.u[(r, k)]
    }

    /// `max |J + i Σ_k Ω_k (w_k w_k† − w̄_k w_kᵀ)|`: the mode map preserves
    /// the canonical commutators.
    pub fn symplectic_residual(&self) -> f64 {
        let dim = 2 * self.half;
        let s = Mat::<Complex64>::from_fn(dim, self.half, |r, k| {
            self.modes[(r, k)] * self.frequencies[k].sqrt()
        });
        let ssh = &s * s.adjoint();
        (0..dim)
            .into_par_iter()
            .map(|r| {
                let mut worst: f64 = 0.0;
                for c in 0..dim {
                    let j = if c == r + self.half {
                        1.0
                    } else if r == c + self.half {
                        -1.0
                    } else {
                        0.0
                    };
                    // S S† − conj(S S†) = 2i Im(S S†)
                    let val = j - 2.0 * ssh[(r, c)].im;
                    worst = worst.max(val.abs());
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Contribution of each mode to `⟨E(x_i) E(x_j)⟩` at equal times:
    /// `ħΩ_k w_k(π_i) w̄_k(π_j) / h`.
    pub fn mode_weights(&self, i: usize, j: usize) -> Vec<Complex64> {
        let (ri, rj) = (self.half + i, self.half + j);
        (0..self.half)
            .map(|k| {
                self.hbar * self.frequencies[k] * self.modes[(ri, k)] * self.modes[(rj, k)].conj()
                    / self.h
            })
            .collect()
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }
}

/// Equal-time vacuum correlation of `E = −Π` at grid nodes `i`, `j`.
pub fn vacuum_correlation_discrete(dec: &NormalModeDecomposition, i: usize, j: usize) -> Complex64 {
    dec.mode_weights(i, j).iter().sum()
}

/// Lorentzian-smoothed spectral density of `⟨E(x_i) E(x_j)⟩` at `ω`,
/// including the mirror term at `−Ω_k` so that it equals the harmonic
/// extension `−(1/π) Im R(ω + iΓ)` of the retarded function.
pub fn smoothed_spectral_density(
    dec: &NormalModeDecomposition,
    i: usize,
    j: usize,
    omega: f64,
    gamma: f64,
) -> f64 {
    let lor = |d: f64| gamma / (std::f64::consts::PI * (d * d + gamma * gamma));
    dec.mode_weights(i, j)
        .iter()
        .zip(&dec.frequencies)
        .map(|(c, &w)| c.re * (lor(omega - w) - lor(omega + w)))
        .sum()
}

/// `∫_{ω₁}^{ω₂}` of [`smoothed_spectral_density`], in closed form.
pub fn smoothed_band_value(
    dec: &NormalModeDecomposition,
    i: usize,
    j: usize,
    band: (f64, f64),
    gamma: f64,
) -> f64 {
    let prim = |w: f64, omega: f64| ((omega - w) / gamma).atan() - ((omega + w) / gamma).atan();
    dec.mode_weights(i, j)
        .iter()
        .zip(&dec.frequencies)
        .map(|(c, &w)| c.re * (prim(w, band.1) - prim(w, band.0)) / std::f64::consts::PI)
        .sum()
}

/// Steady-state `E(x)` under a drive `j(x) e^{−izt}` added to the equation of
/// motion of Π, at a frequency `z` (real, or with a positive imaginary part
/// that smooths the finite bath).
pub fn classical_response(
    model: &DiscreteQuadraticModel,
    z: Complex64,
    drive: &[f64],
) -> Result<Vec<Complex64>> {
    let n = model.n();
    if drive.len() != n {
        return Err(OracleError::Mismatch(format!(
            "drive of length {} for {n} nodes",
            drive.len()
        )));
    }
    let d = model.half_dimension();
    let dim = 2 * d;
    let h = model.grid.spacing();
    // (−iz − J M) z⃗ = f
    let mut trip: Vec<Triplet<usize, usize, Complex64>> = Vec::new();
    for r in 0..dim {
        trip.push(Triplet::new(r, r, Complex64::new(0.0, -1.0) * z));
    }
    for (r, row) in model.rows.iter().enumerate() {
        for &(c, v) in row {
            // (J M)_{r′c}: q rows take +M of the p rows, p rows take −M of the q rows
            let (rr, val) = if r >= d { (r - d, v) } else { (r + d, -v) };
            trip.push(Triplet::new(rr, c, Complex64::new(-val, 0.0)));
        }
    }
    let a = SparseColMat::<usize, Complex64>::try_new_from_triplets(dim, dim, &trip)
        .map_err(|e| OracleError::Numerical(format!("{e:?}")))?;
    let lu = a.sp_lu().map_err(|_| OracleError::Resonance { omega: z })?;
    let mut rhs = Mat::<Complex64>::zeros(dim, 1);
    for i in 0..n {
        rhs[(d + i, 0)] = Complex64::new(drive[i] * h.sqrt(), 0.0);
    }
    let sol = lu.solve(&rhs);
    let e: Vec<Complex64> = (0..n).map(|i| -sol[(d + i, 0)] / h.sqrt()).collect();
    if e.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(OracleError::Resonance { omega: z });
    }
    Ok(e)
}

/// Relative energy drift of a classical RK4 trajectory from `z0`.
pub fn rk4_energy_drift(model: &DiscreteQuadraticModel, z0: &[f64], dt: f64, steps: usize) -> f64 {
    let e0 = model.energy(z0);
    let mut z = z0.to_vec();
    let mut worst: f64 = 0.0;
    let axpy = |z: &[f64], k: &[f64], s: f64| -> Vec<f64> {
        z.iter().zip(k).map(|(a, b)| a + s * b).collect()
    };
    for _ in 0..steps {
        let k1 = model.generator(&z);
        let k2 = model.generator(&axpy(&z, &k1, dt / 2.0));
        let k3 = model.generator(&axpy(&z, &k2, dt / 2.0));
        let k4 = model.generator(&axpy(&z, &k3, dt));
        for r in 0..z.len() {
            z[r] += dt / 6.0 * (k1[r] + 2.0 * k2[r] + 2.0 * k3[r] + k4[r]);
        }
        worst = worst.max((model.energy(&z) - e0).abs() / e0.abs());
    }
    worst
}

/// Machine-readable summary of an oracle run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub n: usize,
    pub m: usize,
    pub dimension: usize,
    pub frequencies: Vec<f64>,
    pub symplectic_residual: Option<f64>,
    pub orthonormality: Option<f64>,
    pub min_stiffness_margin: f64,
}

impl OracleReport {
    pub fn new(model: &DiscreteQuadraticModel, dec: Option<&NormalModeDecomposition>) -> Self {
        Self {
            n: model.n(),
            m: model.m(),
            dimension: model.dimension(),
            frequencies: dec.map(|d| d.frequencies.clone()).unwrap_or_default(),
            symplectic_residual: dec.map(|d| d.symplectic_residual()),
            orthonormality: dec.map(|d| d.orthonormality),
            min_stiffness_margin: model
                .stiffness_margin()
                .into_iter()
                .fold(f64::INFINITY, f64::min),
        }
    }
}
