//! Heisenberg-picture field kernels and vacuum correlations.
//!
//! `E(x, t) = ∫dω ∫dx′ K_E(x, x′; ω) C(x′, ω) e^{−iωt} + h.c.`, and the same
//! for D. In the vacuum state `⟨C C†⟩` is a double delta, so
//! `⟨E(x, t) E(x′, t′)⟩ = ∫dω Σ_k h K_E(x, x_k) K_E*(x′, x_k) e^{−iωτ}`. The
//! Green identity turns the spatial sum into `−(ħ/π) ω² Im G(x, x′)` (our G
//! has `Im G(x, x) < 0`); both routes are computed.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::greenfn::{green_fd, DielectricResponse, Exterior, GreenSolution};
use crate::material::{chi_at, chi_at_complex, BathModel, FrequencyMesh, MaterialProfile};
use crate::modes::NoiseAmplitude;

#[derive(Debug, Error)]
pub enum FieldsError {
    #[error("size mismatch: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Material(#[from] crate::material::MaterialError),
    #[error(transparent)]
    Green(#[from] crate::greenfn::GreenError),
    #[error(transparent)]
    Modes(#[from] crate::modes::ModesError),
}

pub type Result<T> = std::result::Result<T, FieldsError>;

/// Default ratio above which the integrand at `ω_max` counts as truncated.
pub const TRUNCATION_RATIO: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldType {
    E,
    D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldKernel {
    pub field: FieldType,
    omega: f64,
    n: usize,
    values: Vec<Complex64>,
}

impl FieldKernel {
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.n + j]
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
}

fn check(g: &GreenSolution, noise: &NoiseAmplitude) -> Result<()> {
    if g.n() != noise.values().len() {
        return Err(FieldsError::Mismatch(format!(
            "Green matrix has {} nodes, noise amplitude {}",
            g.n(),
            noise.values().len()
        )));
    }
    if (g.omega() - Complex64::new(noise.omega(), 0.0)).norm() > 1e-12 * noise.omega() {
        return Err(FieldsError::Mismatch(format!(
            "Green matrix at ω = {}, noise amplitude at ω = {}",
            g.omega(),
            noise.omega()
        )));
    }
    Ok(())
}

/// `K_E(x, x′) = −iω G(x, x′) n(x′)`.
pub fn efield_kernel(g: &GreenSolution, noise: &NoiseAmplitude) -> Result<FieldKernel> {
    check(g, noise)?;
    let n = g.n();
    let omega = noise.omega();
    let mut values = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            values.push(Complex64::new(0.0, -omega) * g.get(i, j) * noise.get(j));
        }
    }
    Ok(FieldKernel {
        field: FieldType::E,
        omega,
        n,
        values,
    })
}

/// `K_D(x, x′) = −iω (1 + χ(x)) G(x, x′) n(x′) + (i/ω) n(x) δ_{xx′}/h`.
pub fn dfield_kernel(
    g: &GreenSolution,
    chi: &[Complex64],
    noise: &NoiseAmplitude,
) -> Result<FieldKernel> {
    check(g, noise)?;
    let n = g.n();
    if chi.len() != n {
        return Err(FieldsError::Mismatch(format!(
            "{} χ values for {n} nodes",
            chi.len()
        )));
    }
    let omega = noise.omega();
    let h = g.grid().spacing();
    let mut values = Vec::with_capacity(n * n);
    for i in 0..n {
        let eps = 1.0 + chi[i];
        for j in 0..n {
            let mut v = Complex64::new(0.0, -omega) * eps * g.get(i, j) * noise.get(j);
            if i == j {
                v += Complex64::new(0.0, noise.get(i) / (omega * h));
            }
            values.push(v);
        }
    }
    Ok(FieldKernel {
        field: FieldType::D,
        omega,
        n,
        values,
    })
}

/// Spectral densities of `⟨E(x) E(x′)⟩` on a frequency mesh, for a list of
/// node pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDensity {
    pub pairs: Vec<(usize, usize)>,
    pub x: Vec<(f64, f64)>,
    pub mesh: FrequencyMesh,
    /// `[k * n_pairs + p]`: `Σ_j h K_E(x, x_j) K_E*(x′, x_j)` at `ω_k`.
    pub kernel_route: Vec<Complex64>,
    /// `[k * n_pairs + p]`: `−(ħ/π) ω² Im G(x, x′)`.
    pub green_route: Vec<f64>,
    /// Largest Green-identity surface term, relative to the largest
    /// equal-point spectral value.
    pub max_reciprocity_defect: f64,
    pub warnings: Vec<String>,
}

impl SpectralDensity {
    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn kernel(&self, k: usize, p: usize) -> Complex64 {
        self.kernel_route[k * self.pairs.len() + p]
    }

    pub fn green(&self, k: usize, p: usize) -> f64 {
        self.green_route[k * self.pairs.len() + p]
    }

    /// Index of the pair `(j, i)` for pair `p = (i, j)`.
    pub fn swapped(&self, p: usize) -> Option<usize> {
        let (i, j) = self.pairs[p];
        self.pairs.iter().position(|&q| q == (j, i))
    }
}

/// Options for [`spectral_density`].
#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    pub exterior: Option<Exterior>,
    /// Restricts the noise sources to the marked nodes (diagnostics only).
    pub source_mask: Option<Vec<bool>>,
}

/// Sweeps the finite-difference Green function over `mesh` and reduces it to
/// spectral densities for `pairs`.
pub fn spectral_density(
    profile: &MaterialProfile,
    bath: &BathModel,
    mesh: &FrequencyMesh,
    pairs: &[(usize, usize)],
    options: &SweepOptions,
) -> Result<SpectralDensity> {
    let grid = profile.grid();
    let n = grid.len();
    let h = grid.spacing();
    if let Some(m) = &options.source_mask {
        if m.len() != n {
            return Err(FieldsError::Mismatch(format!(
                "source mask of length {} for {n} nodes",
                m.len()
            )));
        }
    }
    if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= n || j >= n) {
        return Err(FieldsError::Mismatch(format!(
            "pair ({i}, {j}) outside the grid"
        )));
    }
    let hbar = profile.hbar();

    type Slice = (Vec<Complex64>, Vec<f64>, f64, Vec<String>);
    let per_omega: Vec<Result<Slice>> = mesh
        .omegas()
        .par_iter()
        .map(|&w| {
            let chi = (0..n)
                .map(|i| chi_at(profile, bath, i, w))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let eps: Vec<Complex64> = chi.iter().map(|c| 1.0 + c).collect();
            let response = match options.exterior {
                Some(ext) => DielectricResponse::new(grid.clone(), eps, ext)?,
                None => DielectricResponse::extended(grid.clone(), eps)?,
            };
            let g = green_fd(&response, w)?;
            let noise = NoiseAmplitude::new(profile, &chi, w)?;
            let k = efield_kernel(&g, &noise)?;
            let mask = options.source_mask.as_deref();
            let mut kr = Vec::with_capacity(pairs.len());
            let mut gr = Vec::with_capacity(pairs.len());
            for &(a, b) in pairs {
                let mut s = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    if mask.is_none_or(|m| m[j]) {
                        s += k.get(a, j) * k.get(b, j).conj();
                    }
                }
                kr.push(s * h);
                gr.push(-hbar / PI * w * w * g.get(a, b).im);
            }
            Ok((kr, gr, g.reciprocity_defect(), g.warnings().to_vec()))
        })
        .collect();

    let mut kernel_route = Vec::with_capacity(mesh.len() * pairs.len());
    let mut green_route = Vec::with_capacity(mesh.len() * pairs.len());
    let mut warnings: Vec<String> = Vec::new();
    let mut defect: f64 = 0.0;
    for slice in per_omega {
        let (kr, gr, d, w) = slice?;
        kernel_route.extend(kr);
        green_route.extend(gr);
        defect = defect.max(d);
        for msg in w {
            if !warnings.contains(&msg) {
                warnings.push(msg);
            }
        }
    }
    let np = pairs.len();
    let peak = (0..mesh.len())
        .flat_map(|k| (0..np).map(move |p| (k, p)))
        .map(|(k, p)| kernel_route[k * np + p].norm())
        .fold(0.0, f64::max);
    if np > 0 && peak > 0.0 {
        let last = mesh.len() - 1;
        let edge = (0..np)
            .map(|p| kernel_route[last * np + p].norm())
            .fold(0.0, f64::max);
        if edge > TRUNCATION_RATIO * peak {
            warnings.push(format!(
                "spectral density at ω_max = {} is {:.2e} of its peak; the frequency integral is truncated",
                mesh.omega_max(),
                edge / peak
            ));
        }
    }

    Ok(SpectralDensity {
        pairs: pairs.to_vec(),
        x: pairs.iter().map(|&(a, b)| (grid.x(a), grid.x(b))).collect(),
        mesh: mesh.clone(),
        kernel_route,
        green_route,
        max_reciprocity_defect: defect,
        warnings,
    })
}

/// `⟨E(x, t) E(x′, t′)⟩` on a list of `τ = t − t′`, both routes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub pairs: Vec<(usize, usize)>,
    pub x: Vec<(f64, f64)>,
    pub taus: Vec<f64>,
    /// `[p * n_tau + t]`
    pub kernel_route: Vec<Complex64>,
    pub green_route: Vec<Complex64>,
    /// `max |route i − route ii| / max |route ii|`.
    pub route_agreement: f64,
    /// Largest spectral density at `ω_max` relative to the peak.
    pub truncation_ratio: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub n_omega: usize,
    pub warnings: Vec<String>,
}

impl CorrelationResult {
    pub fn kernel(&self, p: usize, t: usize) -> Complex64 {
        self.kernel_route[p * self.taus.len() + t]
    }

    pub fn green(&self, p: usize, t: usize) -> Complex64 {
        self.green_route[p * self.taus.len() + t]
    }

    /// `max |C(x, x′; τ) − C*(x′, x; −τ)|` over pairs whose swap and `τ`
    /// lists whose negation are both present, for both routes.
    pub fn hermiticity_residual(&self) -> f64 {
        let nt = self.taus.len();
        let mut worst: f64 = 0.0;
        for (p, &(a, b)) in self.pairs.iter().enumerate() {
            let Some(q) = self.pairs.iter().position(|&r| r == (b, a)) else {
                continue;
            };
            for (t, &tau) in self.taus.iter().enumerate() {
                let Some(u) = self.taus.iter().position(|&s| s == -tau) else {
                    continue;
                };
                worst = worst
                    .max(
                        (self.kernel_route[p * nt + t] - self.kernel_route[q * nt + u].conj())
                            .norm(),
                    )
                    .max(
                        (self.green_route[p * nt + t] - self.green_route[q * nt + u].conj()).norm(),
                    );
            }
        }
        worst
    }
}

/// Fourier sums `Σ_k w_k S(ω_k) e^{−iω_k τ}` in mesh order.
pub fn correlate(spec: &SpectralDensity, taus: &[f64]) -> CorrelationResult {
    let np = spec.n_pairs();
    let nt = taus.len();
    let omegas = spec.mesh.omegas();
    let weights = spec.mesh.weights();
    let mut kernel_route = vec![Complex64::new(0.0, 0.0); np * nt];
    let mut green_route = vec![Complex64::new(0.0, 0.0); np * nt];
    for (t, &tau) in taus.iter().enumerate() {
        for (k, (&w, &wt)) in omegas.iter().zip(weights).enumerate() {
            let phase = Complex64::from_polar(wt, -w * tau);
            for p in 0..np {
                kernel_route[p * nt + t] += spec.kernel(k, p) * phase;
                green_route[p * nt + t] += spec.green(k, p) * phase;
            }
        }
    }
    let scale = green_route.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let diff = kernel_route
        .iter()
        .zip(&green_route)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let peak = spec
        .kernel_route
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    let last = omegas.len() - 1;
    let edge = (0..np)
        .map(|p| spec.kernel(last, p).norm())
        .fold(0.0, f64::max);
    CorrelationResult {
        pairs: spec.pairs.clone(),
        x: spec.x.clone(),
        taus: taus.to_vec(),
        kernel_route,
        green_route,
        route_agreement: if scale > 0.0 { diff / scale } else { diff },
        truncation_ratio: if peak > 0.0 { edge / peak } else { 0.0 },
        omega_min: spec.mesh.omega_min(),
        omega_max: spec.mesh.omega_max(),
        n_omega: omegas.len(),
        warnings: spec.warnings.clone(),
    }
}

/// Sweep plus transform.
pub fn vacuum_correlation_e(
    profile: &MaterialProfile,
    bath: &BathModel,
    mesh: &FrequencyMesh,
    pairs: &[(usize, usize)],
    taus: &[f64],
    options: &SweepOptions,
) -> Result<CorrelationResult> {
    let spec = spectral_density(profile, bath, mesh, pairs, options)?;
    Ok(correlate(&spec, taus))
}

/// Equal-time commutator check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommutatorResidual {
    /// `max |[E(x), E(x′)]|` over the pairs.
    pub max_abs: f64,
    /// Equal-point fluctuation scale `max ⟨E(x)²⟩`.
    pub fluctuation_scale: f64,
    pub relative: f64,
}

/// `[E(x, t), E(x′, t)] = ∫dω Σ_j h (K K′* − K′ K*)`, evaluated with the
/// kernel route; it vanishes only through the Green identity.
pub fn equal_time_commutator_residual(spec: &SpectralDensity) -> CommutatorResidual {
    let np = spec.n_pairs();
    let weights = spec.mesh.weights();
    let integrate = |p: usize| -> Complex64 {
        weights
            .iter()
            .enumerate()
            .map(|(k, &w)| spec.kernel(k, p) * w)
            .sum()
    };
    let mut max_abs: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for p in 0..np {
        let (a, b) = spec.pairs[p];
        let c = integrate(p);
        if a == b {
            scale = scale.max(c.re);
        }
        // C(x, x′) − C(x′, x) = C − C* = 2i Im C
        max_abs = max_abs.max(2.0 * c.im.abs());
    }
    CommutatorResidual {
        max_abs,
        fluctuation_scale: scale,
        relative: if scale > 0.0 {
            max_abs / scale
        } else {
            max_abs
        },
    }
}

/// Spectral density of `⟨E(x_i) E(x_j)⟩` smoothed with a Lorentzian of
/// half-width `gamma`: `−(ħ/π) Im[z² G(x_i, x_j; z)]` at `z = ω + iγ`. This is
/// the harmonic extension of the density (mirror term at `−ω` included), so
/// it can be compared with a smoothed discrete spectrum.
pub fn smoothed_spectral_density(
    profile: &MaterialProfile,
    bath: &BathModel,
    pairs: &[(usize, usize)],
    omegas: &[f64],
    gamma: f64,
    exterior: Option<Exterior>,
) -> Result<Vec<Vec<f64>>> {
    let grid = profile.grid();
    let n = grid.len();
    let hbar = profile.hbar();
    omegas
        .par_iter()
        .map(|&w| {
            let z = Complex64::new(w, gamma);
            let eps = (0..n)
                .map(|i| chi_at_complex(profile, bath, i, z).map(|c| 1.0 + c))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let response = match exterior {
                Some(ext) => DielectricResponse::new(grid.clone(), eps, ext)?,
                None => DielectricResponse::extended(grid.clone(), eps)?,
            };
            let g = green_fd(&response, z)?;
            Ok(pairs
                .iter()
                .map(|&(a, b)| -hbar / PI * (z * z * g.get(a, b)).im)
                .collect())
        })
        .collect()
}

/// All ordered pairs of `nodes`, equal points included.
pub fn all_pairs(nodes: &[usize]) -> Vec<(usize, usize)> {
    nodes
        .iter()
        .flat_map(|&a| nodes.iter().map(move |&b| (a, b)))
        .collect()
}
