//! Coefficient kernels of the diagonalizing operators `C(x′, ω)`.
//!
//! Every kernel is expressed through the electric-field kernel `f_E` and the
//! local tensor `s(x, x′, ω) = s_diag(x′) δ(x − x′)` with the phase
//! `e^{iψ} = iχ*/|χ|`. Spatial delta functions live on the grid as weight
//! `1/h` at the coincident node; they are kept apart from the regular part
//! in [`LocalKernel`] so the algebra stays exact.
//!
//! Bath kernels have a `δ(ω − ω′)` part and a part proportional to
//! `v_{ω′} / ((ω + i0)² − ω′²)`; the latter is stored through its
//! amplitude, the former (including the Plemelj term) as a separate kernel.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::greenfn::{GreenSolution, WaveOperator};
use crate::material::{BathModel, FrequencyMesh, Grid1D, MaterialProfile};
use crate::quadrature;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModesError {
    #[error("phase undefined at x = {x}: χ = 0")]
    PhaseUndefined { x: f64 },
    #[error("vacuum point x = {x} (α = 0) requested as a mode label")]
    VacuumLabel { x: f64 },
    #[error("frequency ω = {omega} is not a node of the ω′ mesh")]
    OmegaNotOnMesh { omega: f64 },
    #[error("size mismatch: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Green(#[from] crate::greenfn::GreenError),
}

pub type Result<T> = std::result::Result<T, ModesError>;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// `s_diag(x, ω) = √(ħωρ/2) · iχ*/|χ|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct STensorDiagonal {
    omega: f64,
    hbar: f64,
    /// `None` where χ = 0 (phase undefined).
    values: Vec<Option<Complex64>>,
    x: Vec<f64>,
    rho: Vec<f64>,
    pub convention: String,
}

impl STensorDiagonal {
    pub fn get(&self, i: usize) -> Result<Complex64> {
        self.values[i].ok_or(ModesError::PhaseUndefined { x: self.x[i] })
    }

    /// Zero where the phase is undefined.
    pub fn value_or_zero(&self, i: usize) -> Complex64 {
        self.values[i].unwrap_or(ZERO)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `max |(|s|²/ρ) − ħω/2| / (ħω/2)` over the nodes where `s` is defined.
    pub fn unitarity_residual(&self) -> f64 {
        let target = self.hbar * self.omega / 2.0;
        self.values
            .iter()
            .zip(&self.rho)
            .filter_map(|(s, r)| s.map(|s| ((s.norm_sqr() / r) - target).abs() / target))
            .fold(0.0, f64::max)
    }

    /// `max ||e^{iψ}| − 1|`.
    pub fn phase_modulus_residual(&self) -> f64 {
        let amp = |r: f64| (self.hbar * self.omega * r / 2.0).sqrt();
        self.values
            .iter()
            .zip(&self.rho)
            .filter_map(|(s, r)| s.map(|s| ((s / amp(*r)).norm() - 1.0).abs()))
            .fold(0.0, f64::max)
    }
}

pub fn build_s(
    profile: &MaterialProfile,
    chi: &[Complex64],
    omega: f64,
) -> Result<STensorDiagonal> {
    let grid = profile.grid();
    check_len(grid, chi.len())?;
    let hbar = profile.hbar();
    let values = (0..grid.len())
        .map(|i| {
            let c = chi[i];
            (c.norm() > 0.0).then(|| {
                let phase = Complex64::i() * c.conj() / c.norm();
                phase * (hbar * omega * profile.rho(i) / 2.0).sqrt()
            })
        })
        .collect();
    Ok(STensorDiagonal {
        omega,
        hbar,
        values,
        x: grid.points(),
        rho: (0..grid.len()).map(|i| profile.rho(i)).collect(),
        convention: "diagonal-local, e^{iψ} = iχ*/|χ|".into(),
    })
}

/// Noise-current amplitude `n(x, ω) = √(ħ Im χ / π) · ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseAmplitude {
    omega: f64,
    values: Vec<f64>,
}

impl NoiseAmplitude {
    pub fn new(profile: &MaterialProfile, chi: &[Complex64], omega: f64) -> Result<Self> {
        check_len(profile.grid(), chi.len())?;
        let hbar = profile.hbar();
        let values = chi
            .iter()
            .map(|c| (hbar * c.im.max(0.0) / PI).sqrt() * omega)
            .collect();
        Ok(Self { omega, values })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn check_len(grid: &Grid1D, n: usize) -> Result<()> {
    if grid.len() != n {
        return Err(ModesError::Mismatch(format!(
            "{n} values for {} grid points",
            grid.len()
        )));
    }
    Ok(())
}

/// Kernel `K(x_i, x_j) = regular_ij + local_j δ_ij / h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalKernel {
    n: usize,
    h: f64,
    local: Vec<Complex64>,
    regular: Vec<Complex64>,
}

impl LocalKernel {
    fn zeros(n: usize, h: f64) -> Self {
        Self {
            n,
            h,
            local: vec![ZERO; n],
            regular: vec![ZERO; n * n],
        }
    }

    pub fn local(&self, j: usize) -> Complex64 {
        self.local[j]
    }

    pub fn regular(&self, i: usize, j: usize) -> Complex64 {
        self.regular[i * self.n + j]
    }

    /// Grid value with the delta realized as `1/h`.
    pub fn value(&self, i: usize, j: usize) -> Complex64 {
        let r = self.regular(i, j);
        if i == j {
            r + self.local[j] / self.h
        } else {
            r
        }
    }
}

fn dense(n: usize) -> Vec<Complex64> {
    vec![ZERO; n * n]
}

/// Mode labels with absorption: `α > 0` and `Im χ > 0`.
pub fn absorbing_labels(profile: &MaterialProfile, chi: &[Complex64]) -> Vec<usize> {
    (0..chi.len())
        .filter(|&i| !profile.is_vacuum(i) && chi[i].im > 0.0)
        .collect()
}

fn check_labels(profile: &MaterialProfile, labels: &[usize]) -> Result<()> {
    for &j in labels {
        if j >= profile.grid().len() {
            return Err(ModesError::Mismatch(format!("label {j} outside the grid")));
        }
        if profile.is_vacuum(j) {
            return Err(ModesError::VacuumLabel {
                x: profile.grid().x(j),
            });
        }
    }
    Ok(())
}

/// Dense `N × N` kernel; columns outside the label set are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldCoefficient {
    n: usize,
    values: Vec<Complex64>,
}

impl FieldCoefficient {
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_abs_difference(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// `f_E(x, x′) = −ω² [v χ s / (ρα)](x′) G(x, x′)`, assembled from the bath
/// coupling and the s tensor.
pub fn build_fe(
    g: &GreenSolution,
    chi: &[Complex64],
    bath: &BathModel,
    s: &STensorDiagonal,
    profile: &MaterialProfile,
    omega: f64,
    labels: &[usize],
) -> Result<FieldCoefficient> {
    let n = g.n();
    check_len(profile.grid(), n)?;
    check_len(profile.grid(), chi.len())?;
    check_labels(profile, labels)?;
    let mut values = dense(n);
    for &j in labels {
        let v = bath.coupling(profile, j, omega);
        let c = -omega * omega * v * chi[j] * s.get(j)? / (profile.rho(j) * profile.alpha(j));
        for i in 0..n {
            values[i * n + j] = c * g.get(i, j);
        }
    }
    Ok(FieldCoefficient { n, values })
}

/// `f_E(x, x′) = −iω G(x, x′) n(x′, ω)`, from the Heisenberg field and the
/// noise-current normalization.
pub fn build_fe_noise_route(
    g: &GreenSolution,
    noise: &NoiseAmplitude,
    labels: &[usize],
) -> FieldCoefficient {
    let n = g.n();
    let omega = noise.omega();
    let mut values = dense(n);
    for &j in labels {
        let c = -Complex64::i() * omega * noise.get(j);
        for i in 0..n {
            values[i * n + j] = c * g.get(i, j);
        }
    }
    FieldCoefficient { n, values }
}

/// Complete set of coefficient kernels at one frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeCoefficientSet {
    grid: Grid1D,
    omega: f64,
    hbar: f64,
    labels: Vec<usize>,
    pub f_e: FieldCoefficient,
    pub f_a: FieldCoefficient,
    pub f_pi: FieldCoefficient,
    pub f_x: LocalKernel,
    pub f_p: LocalKernel,
    /// `δ(ω − ω′)` weight of `f_Y`, Plemelj term included.
    pub f_y_delta: LocalKernel,
    /// `δ(ω − ω′)` weight of `f_Q`.
    pub f_q_delta: LocalKernel,
    /// Same weight without the Plemelj term, `i s δ / (ρω)`.
    pub f_y_delta_bare: LocalKernel,
    /// Amplitude `y` of the bath part `f_Y = y v_{ω′} / ((ω + i0)² − ω′²)`.
    pub f_y_amplitude: LocalKernel,
    mesh: FrequencyMesh,
    omega_index: usize,
    /// `coupling[i * M + k] = v(x_i, ω′_k)`
    coupling: Vec<f64>,
    chi: Vec<Complex64>,
    v_omega: Vec<f64>,
    /// `Σ(x, ω)` recovered from χ.
    sigma: Vec<Complex64>,
    rho: Vec<f64>,
    alpha: Vec<f64>,
    omega0: Vec<f64>,
    s: STensorDiagonal,
}

impl ModeCoefficientSet {
    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn mesh(&self) -> &FrequencyMesh {
        &self.mesh
    }

    pub fn s(&self) -> &STensorDiagonal {
        &self.s
    }

    pub fn chi(&self) -> &[Complex64] {
        &self.chi
    }

    /// Regular part of `f_Y(x_i, x_j, ω′_k, ω)` for `ω′_k ≠ ω`.
    pub fn f_y_regular(&self, i: usize, j: usize, k: usize) -> Complex64 {
        let m = self.mesh.len();
        let wp = self.mesh.omegas()[k];
        if k == self.omega_index {
            return ZERO;
        }
        self.f_y_amplitude.value(i, j) * self.coupling[i * m + k]
            / (self.omega * self.omega - wp * wp)
    }

    /// Regular part of `f_Q(x_i, x_j, ω′_k, ω)` for `ω′_k ≠ ω`.
    pub fn f_q_regular(&self, i: usize, j: usize, k: usize) -> Complex64 {
        let wp = self.mesh.omegas()[k];
        Complex64::new(0.0, -self.rho[i] * wp * wp / self.omega) * self.f_y_regular(i, j, k)
    }
}

/// Assembles `f_A`, `f_Π`, `f_X`, `f_P`, `f_Y`, `f_Q` from `f_E`.
///
/// `mesh` is the ω′ mesh for the bath kernels; it must contain `ω`.
#[allow(clippy::too_many_arguments)]
pub fn build_all_coefficients(
    fe: &FieldCoefficient,
    chi: &[Complex64],
    bath: &BathModel,
    s: &STensorDiagonal,
    profile: &MaterialProfile,
    omega: f64,
    mesh: &FrequencyMesh,
    labels: &[usize],
) -> Result<ModeCoefficientSet> {
    let grid = profile.grid().clone();
    let n = grid.len();
    let h = grid.spacing();
    check_len(&grid, chi.len())?;
    check_labels(profile, labels)?;
    let omega_index = mesh
        .locate(omega)
        .ok_or(ModesError::OmegaNotOnMesh { omega })?;
    let i_unit = Complex64::i();

    let scale = |f: &FieldCoefficient, c: Complex64| FieldCoefficient {
        n,
        values: f.values.iter().map(|v| v * c).collect(),
    };
    let f_a = scale(fe, -i_unit / omega);
    let f_pi = scale(fe, Complex64::new(-1.0, 0.0));

    let rho: Vec<f64> = (0..n).map(|i| profile.rho(i)).collect();
    let alpha: Vec<f64> = (0..n).map(|i| profile.alpha(i)).collect();
    let omega0: Vec<f64> = (0..n).map(|i| profile.omega0(i)).collect();
    let v_omega: Vec<f64> = (0..n).map(|i| bath.coupling(profile, i, omega)).collect();

    // B = v s δ / (ρα) + f_E, the source of every matter and bath kernel
    let mut b = LocalKernel::zeros(n, h);
    for &j in labels {
        b.local[j] = v_omega[j] * s.get(j)? / (rho[j] * alpha[j]);
        for i in 0..n {
            b.regular[i * n + j] = fe.get(i, j);
        }
    }
    let row_map =
        |coef: &dyn Fn(usize) -> Complex64,
         extra: Option<(&FieldCoefficient, &dyn Fn(usize) -> Complex64)>| {
            let mut k = LocalKernel::zeros(n, h);
            for &j in labels {
                k.local[j] = coef(j) * b.local[j];
            }
            for i in 0..n {
                let c = coef(i);
                let e = extra.map(|(f, ce)| (f, ce(i)));
                for &j in labels {
                    let mut val = c * b.regular[i * n + j];
                    if let Some((f, ce)) = e {
                        val += ce * f.get(i, j);
                    }
                    k.regular[i * n + j] = val;
                }
            }
            k
        };
    let matter = |i: usize| alpha[i] > 0.0;

    let x_coef = |i: usize| if matter(i) { -chi[i] / alpha[i] } else { ZERO };
    let f_x = row_map(&x_coef, None);

    let p_coef = |i: usize| {
        if matter(i) {
            i_unit * omega * rho[i] * chi[i] / alpha[i]
        } else {
            ZERO
        }
    };
    let p_extra = |i: usize| i_unit * alpha[i] / omega;
    let f_p = row_map(&p_coef, Some((fe, &p_extra)));

    let y_coef = |i: usize| {
        if matter(i) {
            -i_unit * omega * chi[i] / (rho[i] * alpha[i])
        } else {
            ZERO
        }
    };
    let f_y_amplitude = row_map(&y_coef, None);

    let plemelj_coef = |i: usize| {
        if matter(i) {
            -PI * chi[i] * v_omega[i] / (2.0 * rho[i] * alpha[i])
        } else {
            ZERO
        }
    };
    let mut f_y_delta = row_map(&plemelj_coef, None);
    let mut f_y_delta_bare = LocalKernel::zeros(n, h);
    for &j in labels {
        let bare = i_unit * s.get(j)? / (rho[j] * omega);
        f_y_delta_bare.local[j] = bare;
        f_y_delta.local[j] += bare;
    }
    let mut f_q_delta = f_y_delta.clone();
    for j in 0..n {
        f_q_delta.local[j] *= Complex64::new(0.0, -rho[j] * omega);
    }
    for i in 0..n {
        let c = Complex64::new(0.0, -rho[i] * omega);
        for j in 0..n {
            f_q_delta.regular[i * n + j] *= c;
        }
    }

    let m = mesh.len();
    let mut coupling = vec![0.0; n * m];
    for i in 0..n {
        for (k, &wp) in mesh.omegas().iter().enumerate() {
            coupling[i * m + k] = bath.coupling(profile, i, wp);
        }
    }
    let sigma = (0..n)
        .map(|i| {
            if matter(i) {
                rho[i]
                    * rho[i]
                    * (omega * omega - omega0[i] * omega0[i]
                        + alpha[i] * alpha[i] / (rho[i] * chi[i]))
            } else {
                ZERO
            }
        })
        .collect();

    Ok(ModeCoefficientSet {
        grid,
        omega,
        hbar: profile.hbar(),
        labels: labels.to_vec(),
        f_e: fe.clone(),
        f_a,
        f_pi,
        f_x,
        f_p,
        f_y_delta,
        f_q_delta,
        f_y_delta_bare,
        f_y_amplitude,
        mesh: mesh.clone(),
        omega_index,
        coupling,
        chi: chi.to_vec(),
        v_omega,
        sigma,
        rho,
        alpha,
        omega0,
        s: s.clone(),
    })
}

/// Residual of the wave-operator relation, split into bulk and source nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferentialResidual {
    /// `max |iω f_Π + Δf_A − (α²/ρ) f_A − (α/ρ) f_P| / max |iω f_Π|` over
    /// nodes away from sources and discontinuities.
    pub bulk: f64,
    /// Same at the source node, multiplied by `h` and divided by the weight
    /// of the delta source.
    pub source_scaled: f64,
    pub excluded_nodes: Vec<usize>,
}

/// Relative max-norm residuals of the linear relations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResidualReport {
    /// `iω f_A = −f_Π`
    pub potential_momentum: f64,
    pub wave_equation: DifferentialResidual,
    /// `iω f_X = −(α/ρ) f_A − f_P / ρ`
    pub polarization_velocity: f64,
    /// `iω f_P = ρω̃₀² f_X + (1/ρ) ∫dω′ v_{ω′} f_Q`; `None` when the bath
    /// integral is not defined (the Ohmic preset diverges).
    pub polarization_force: Option<f64>,
    /// `iω f_Y = −(1/ρ) v_{ω′} f_X − f_Q / ρ` at mesh points `ω′ ≠ ω` and for
    /// the `δ(ω − ω′)` weights.
    pub bath_velocity: f64,
    /// `iω f_Q = ρω′² f_Y`
    pub bath_force: f64,
    /// `f_A = −(i/ω) f_E`
    pub potential_from_field: f64,
    /// `f_Π = −f_E`
    pub momentum_from_field: f64,
    /// `f_Q = −iρω′²/ω f_Y`
    pub bath_from_amplitude: f64,
}

fn rel(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// Checks every linear relation at the mesh points.
///
/// The differential relation uses the finite-difference stencil (with the
/// same outgoing ghost nodes as the finite-difference solver) applied to the
/// kernels; nodes whose stencil touches one of `discontinuities` are
/// excluded from the bulk figure.
pub fn eigen_residuals(
    set: &ModeCoefficientSet,
    eps: &crate::greenfn::DielectricResponse,
    bath: &BathModel,
    discontinuities: &[f64],
) -> Result<EigenResidualReport> {
    let n = set.grid.len();
    let h = set.grid.spacing();
    let w = set.omega;
    let iw = Complex64::new(0.0, w);
    let labels = &set.labels;
    let pairs = || {
        labels
            .iter()
            .flat_map(move |&j| (0..n).map(move |i| (i, j)))
    };

    let max_over = |f: &dyn Fn(usize, usize) -> (f64, f64)| {
        let (num, den) = pairs().fold((0.0f64, 0.0f64), |(a, b), (i, j)| {
            let (x, y) = f(i, j);
            (a.max(x), b.max(y))
        });
        rel(num, den)
    };

    let potential_momentum = max_over(&|i, j| {
        let l = iw * set.f_a.get(i, j);
        let r = -set.f_pi.get(i, j);
        ((l - r).norm(), l.norm())
    });
    let potential_from_field = max_over(&|i, j| {
        let e = -Complex64::i() / w * set.f_e.get(i, j);
        ((set.f_a.get(i, j) - e).norm(), e.norm())
    });
    let momentum_from_field = max_over(&|i, j| {
        (
            (set.f_pi.get(i, j) + set.f_e.get(i, j)).norm(),
            set.f_e.get(i, j).norm(),
        )
    });

    let polarization_velocity = max_over(&|i, j| {
        let (rho, alpha) = (set.rho[i], set.alpha[i]);
        let l = iw * set.f_x.value(i, j);
        let r = -(alpha / rho) * set.f_a.get(i, j) - set.f_p.value(i, j) / rho;
        ((l - r).norm(), l.norm().max(r.norm()))
    });

    // relation with the wave operator
    let op = WaveOperator::new(eps, w)?;
    let ext_phase = op.end_phase;
    let excluded: Vec<usize> = (0..n)
        .filter(|&i| {
            let lo = set.grid.x(i.saturating_sub(1));
            let hi = set.grid.x((i + 1).min(n - 1));
            discontinuities
                .iter()
                .any(|&d| d >= lo - 1e-9 * h && d <= hi + 1e-9 * h)
        })
        .collect();
    let (bulk_num, bulk_den, src) = labels
        .par_iter()
        .map(|&j| {
            let fa: Vec<Complex64> = (0..n).map(|i| set.f_a.get(i, j)).collect();
            let mut bulk: (f64, f64, f64) = (0.0, 0.0, 0.0);
            for i in 0..n {
                let left = if i > 0 {
                    fa[i - 1]
                } else {
                    ext_phase[0] * fa[0]
                };
                let right = if i + 1 < n {
                    fa[i + 1]
                } else {
                    ext_phase[1] * fa[n - 1]
                };
                let lap = (left - 2.0 * fa[i] + right) / (h * h);
                let (rho, alpha) = (set.rho[i], set.alpha[i]);
                let lhs = iw * set.f_pi.get(i, j);
                let rhs =
                    -lap + (alpha * alpha / rho) * fa[i] + (alpha / rho) * set.f_p.value(i, j);
                let r = (lhs - rhs).norm();
                bulk.1 = bulk.1.max(lhs.norm());
                if i == j {
                    bulk.2 = bulk.2.max(r * h);
                } else if !excluded.contains(&i) {
                    bulk.0 = bulk.0.max(r);
                }
            }
            bulk
        })
        .reduce(
            || (0.0, 0.0, 0.0),
            |a, b| (a.0.max(b.0), a.1.max(b.1), a.2.max(b.2)),
        );
    // the source residual is compared with the weight of the delta it carries
    let delta_scale = labels
        .iter()
        .map(|&j| (set.alpha[j] / set.rho[j] * set.f_p.local(j)).norm())
        .fold(0.0, f64::max)
        .max(1e-300);
    let wave_equation = DifferentialResidual {
        bulk: rel(bulk_num, bulk_den),
        source_scaled: src / delta_scale,
        excluded_nodes: excluded,
    };

    // bath integral for the polarization-momentum relation
    let polarization_force = match bath {
        BathModel::DrudeLorentz(_) => None,
        BathModel::Tabulated(_) => {
            let m = set.mesh.len();
            let bath_pv: Vec<f64> = (0..n)
                .map(|i| {
                    let g: Vec<f64> = (0..m)
                        .map(|k| {
                            let wp = set.mesh.omegas()[k];
                            let v = set.coupling[i * m + k];
                            wp * wp * v * v
                        })
                        .collect();
                    quadrature::principal_value(set.mesh.omegas(), set.mesh.weights(), &g, w)
                })
                .collect();
            Some(max_over(&|i, j| {
                if set.alpha[i] == 0.0 {
                    return (set.f_p.value(i, j).norm(), 0.0);
                }
                let rho = set.rho[i];
                let lhs = iw * set.f_p.value(i, j);
                let integral = set.v_omega[i] * set.f_q_delta.value(i, j)
                    + Complex64::new(0.0, -rho / w) * set.f_y_amplitude.value(i, j) * bath_pv[i];
                let rhs =
                    rho * set.omega0[i] * set.omega0[i] * set.f_x.value(i, j) + integral / rho;
                ((lhs - rhs).norm(), lhs.norm().max(rhs.norm()))
            }))
        }
    };

    let m = set.mesh.len();
    let ks: Vec<usize> = (0..m).filter(|&k| k != set.omega_index).collect();
    let mut r13 = (0.0f64, 0.0f64);
    let mut r14 = (0.0f64, 0.0f64);
    let mut r510 = (0.0f64, 0.0f64);
    for (i, j) in pairs() {
        let rho = set.rho[i];
        for &k in ks.iter().step_by((ks.len() / 64).max(1)) {
            let wp = set.mesh.omegas()[k];
            let v = set.coupling[i * m + k];
            let fy = set.f_y_regular(i, j, k);
            let fq = set.f_q_regular(i, j, k);
            let l = iw * fy;
            let r = if rho > 0.0 && set.alpha[i] > 0.0 {
                -(v / rho) * set.f_x.value(i, j) - fq / rho
            } else {
                ZERO
            };
            r13 = (r13.0.max((l - r).norm()), r13.1.max(l.norm().max(r.norm())));
            let l = iw * fq;
            let r = rho * wp * wp * fy;
            r14 = (r14.0.max((l - r).norm()), r14.1.max(l.norm()));
            let q = Complex64::new(0.0, -rho * wp * wp / w) * fy;
            r510 = (r510.0.max((fq - q).norm()), r510.1.max(q.norm()));
        }
        // δ(ω − ω′) weights
        let l = iw * set.f_y_delta.value(i, j);
        let r = -set.f_q_delta.value(i, j) / rho;
        r13 = (r13.0.max((l - r).norm()), r13.1.max(l.norm()));
        let l = iw * set.f_q_delta.value(i, j);
        let r = rho * w * w * set.f_y_delta.value(i, j);
        r14 = (r14.0.max((l - r).norm()), r14.1.max(l.norm()));
    }

    Ok(EigenResidualReport {
        potential_momentum,
        wave_equation,
        polarization_velocity,
        polarization_force,
        bath_velocity: rel(r13.0, r13.1),
        bath_force: rel(r14.0, r14.1),
        potential_from_field,
        momentum_from_field,
        bath_from_amplitude: rel(r510.0, r510.1),
    })
}

/// Outcome of the commutator checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommutationReport {
    /// `max |(|s|²/ρ) − ħω/2| / (ħω/2)` at both frequencies.
    pub s_condition: f64,
    /// Discrete double-curl difference integral relative to its terms.
    pub double_curl: f64,
    /// `[C(x, ω), C†(x′, ω′)]` for `ω ≠ ω′`, relative to the largest block.
    pub off_diagonal: f64,
    /// `[C(x, ω), C(x′, ω′)]` spot check, same normalization.
    pub cc: f64,
    /// Largest single block (field, matter or bath) of the commutator sum.
    pub term_scale: f64,
}

/// Checks the commutation constraint between coefficient sets at two
/// distinct frequencies on the same grid.
///
/// The `ω″` integral of the bath block is done in closed form: with
/// `f_Y(ω″, ω) = A δ(ω″ − ω) + a v_{ω″} / ((ω + i0)² − ω″²)`,
///
/// ```text
/// ∫dω″ ω″² f_Y*(ω″, ω) f_Y(ω″, ω′) = A* b ω² v_ω / (ω′² − ω²)
///     + a* B ω′² v_{ω′} / (ω² − ω′²) + a* b (Σ*(ω) − Σ(ω′)) / (ω′² − ω²)
/// ```
///
/// where `Σ` is the bath self-energy recovered from χ.
pub fn commutation_residual(
    a: &ModeCoefficientSet,
    b: &ModeCoefficientSet,
    label_pairs: &[(usize, usize)],
) -> Result<CommutationReport> {
    if a.grid != b.grid {
        return Err(ModesError::Mismatch(
            "coefficient sets live on different grids".into(),
        ));
    }
    let (wa, wb) = (a.omega, b.omega);
    if (wa - wb).abs() <= 1e-12 * wa.max(wb) {
        return Err(ModesError::Mismatch(
            "off-diagonal check needs ω ≠ ω′".into(),
        ));
    }
    let n = a.grid.len();
    let h = a.grid.spacing();
    let s_condition = a.s.unitarity_residual().max(b.s.unitarity_residual());

    let results: Vec<(f64, f64, f64, f64, f64)> = label_pairs
        .par_iter()
        .map(|&(la, lb)| {
            let mut field = ZERO;
            let mut matter = ZERO;
            let mut bath = ZERO;
            let mut field_cc = ZERO;
            let mut matter_cc = ZERO;
            let mut bath_cc = ZERO;
            let (wa2, wb2) = (wa * wa, wb * wb);
            for k in 0..n {
                let (fa_a, fpi_a) = (a.f_a.get(k, la), a.f_pi.get(k, la));
                let (fa_b, fpi_b) = (b.f_a.get(k, lb), b.f_pi.get(k, lb));
                field += fa_a.conj() * fpi_b - fpi_a.conj() * fa_b;
                field_cc += fa_a * fpi_b - fpi_a * fa_b;
                if a.alpha[k] == 0.0 {
                    continue;
                }
                let (fx_a, fp_a) = (a.f_x.value(k, la), a.f_p.value(k, la));
                let (fx_b, fp_b) = (b.f_x.value(k, lb), b.f_p.value(k, lb));
                matter += fx_a.conj() * fp_b - fp_a.conj() * fx_b;
                matter_cc += fx_a * fp_b - fp_a * fx_b;

                let big_a = a.f_y_delta_bare.value(k, la);
                let big_b = b.f_y_delta_bare.value(k, lb);
                let ya = a.f_y_amplitude.value(k, la);
                let yb = b.f_y_amplitude.value(k, lb);
                let rho = a.rho[k];
                let (va, vb) = (a.v_omega[k], b.v_omega[k]);
                let (sa, sb) = (a.sigma[k], b.sigma[k]);

                let inner = big_a.conj() * yb * (wa2 * va / (wb2 - wa2))
                    + ya.conj() * big_b * (wb2 * vb / (wa2 - wb2))
                    + ya.conj() * yb * ((sa.conj() - sb) / (wb2 - wa2));
                bath += Complex64::new(0.0, -rho * (1.0 / wa + 1.0 / wb)) * inner;

                let inner_cc = big_a * yb * (wa2 * va / (wb2 - wa2))
                    + ya * big_b * (wb2 * vb / (wa2 - wb2))
                    + ya * yb * ((sa - sb) / (wb2 - wa2));
                bath_cc += Complex64::new(0.0, -rho * (1.0 / wb - 1.0 / wa)) * inner_cc;
            }
            let total = (field + matter + bath) * h;
            let total_cc = (field_cc + matter_cc + bath_cc) * h;
            let scale = (field.norm()).max(matter.norm()).max(bath.norm()) * h;
            let scale_cc = (field_cc.norm()).max(matter_cc.norm()).max(bath_cc.norm()) * h;

            // double-curl surrogate: interior stencil, telescopes to the ends
            let ua: Vec<Complex64> = (0..n).map(|k| a.f_e.get(k, la).conj()).collect();
            let ub: Vec<Complex64> = (0..n).map(|k| b.f_e.get(k, lb)).collect();
            let mut curl = ZERO;
            let mut curl_scale: f64 = 0.0;
            for k in 1..n - 1 {
                let lap_a = (ua[k - 1] - 2.0 * ua[k] + ua[k + 1]) / (h * h);
                let lap_b = (ub[k - 1] - 2.0 * ub[k] + ub[k + 1]) / (h * h);
                let t1 = lap_a * ub[k] * h;
                let t2 = ua[k] * lap_b * h;
                curl += t1 - t2;
                curl_scale += t1.norm().max(t2.norm());
            }
            (
                total.norm(),
                scale,
                rel(curl.norm(), curl_scale),
                total_cc.norm(),
                scale_cc,
            )
        })
        .collect();

    let term_scale = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let cc_scale = results.iter().map(|r| r.4).fold(0.0, f64::max);
    Ok(CommutationReport {
        s_condition,
        double_curl: results.iter().map(|r| r.2).fold(0.0, f64::max),
        off_diagonal: rel(results.iter().map(|r| r.0).fold(0.0, f64::max), term_scale),
        cc: rel(results.iter().map(|r| r.3).fold(0.0, f64::max), cc_scale),
        term_scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::Grid1D;

    fn profile() -> MaterialProfile {
        MaterialProfile::uniform(Grid1D::new(0.0, 1.0, 3).unwrap(), 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn s_closed_form() {
        let chi = vec![Complex64::new(0.0, 1.0); 3];
        let s = build_s(&profile(), &chi, 2.0).unwrap();
        assert!((s.get(0).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(s.unitarity_residual() < 1e-15);
    }

    #[test]
    fn s_for_real_chi_is_imaginary() {
        let chi = vec![Complex64::new(-0.7, 0.0); 3];
        let s = build_s(&profile(), &chi, 1.3).unwrap();
        let v = s.get(1).unwrap();
        assert_eq!(v.re, 0.0);
        assert!(v.im < 0.0);
        assert!(s.phase_modulus_residual() < 1e-15);
    }

    #[test]
    fn s_undefined_where_chi_vanishes() {
        let chi = vec![Complex64::new(0.0, 0.0); 3];
        let s = build_s(&profile(), &chi, 1.0).unwrap();
        assert!(matches!(s.get(0), Err(ModesError::PhaseUndefined { .. })));
    }

    #[test]
    fn noise_amplitude_vanishes_without_absorption() {
        let chi = vec![
            Complex64::new(0.3, 0.0),
            Complex64::new(0.3, 0.5),
            Complex64::new(0.0, 0.0),
        ];
        let n = NoiseAmplitude::new(&profile(), &chi, 2.0).unwrap();
        assert_eq!(n.get(0), 0.0);
        assert!((n.get(1) - (0.5 / PI).sqrt() * 2.0).abs() < 1e-15);
        assert_eq!(n.get(2), 0.0);
    }
}
