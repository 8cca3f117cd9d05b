use num_complex::Complex64;
use polariton::fields::smoothed_spectral_density as continuum_density;
use polariton::greenfn::{green_fd, DielectricResponse};
use polariton::material::{
    chi_at_complex, BathModel, DrudeLorentzBath, FrequencyMesh, Grid1D, MaterialProfile,
    TabulatedBath,
};
use polariton::oracle::*;
use proptest::prelude::*;
use std::f64::consts::PI;

fn no_bath(grid: &Grid1D) -> BathModel {
    BathModel::Tabulated(TabulatedBath::zero(
        grid,
        FrequencyMesh::uniform(0.1, 1.0, 4).unwrap(),
    ))
}

fn empty() -> BathDiscretization {
    BathDiscretization {
        omegas: vec![],
        weights: vec![],
    }
}

/// Dirichlet lattice wavenumbers `(2/h) sin(qπ / 2(N+1))`.
fn lattice_k(n: usize, h: f64) -> Vec<f64> {
    (1..=n)
        .map(|q| 2.0 / h * (q as f64 * PI / (2.0 * (n + 1) as f64)).sin())
        .collect()
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Absorbing cladding mild enough to keep the discrete Hamiltonian positive.
fn cladded(x_max: f64, n: usize, bath_max: f64) -> (MaterialProfile, BathModel) {
    let grid = Grid1D::new(-x_max, x_max, n).unwrap();
    let core = 0.3 * x_max;
    let clad = move |x: f64| ((x.abs() - core).max(0.0) / (x_max - core)).powi(2);
    let profile =
        MaterialProfile::from_fn(grid.clone(), |x| (1.0, 2.0, 0.8 + 8.0 * clad(x))).unwrap();
    let bath = TabulatedBath::from_fn(
        &grid,
        FrequencyMesh::uniform(0.02, bath_max, 1500).unwrap(),
        |x, w| (0.35 + 0.3 * clad(x)) * w * (-(w - 2.0).powi(2) / 1.5).exp(),
    )
    .unwrap();
    (profile, BathModel::Tabulated(bath))
}

#[test]
fn uncoupled_spectrum_is_stencil_plus_oscillators() {
    let n = 24;
    let grid = Grid1D::new(0.0, 3.0, n).unwrap();
    let w0 = 1.7;
    let profile = MaterialProfile::uniform(grid.clone(), 1.3, w0, 0.0).unwrap();
    let disc = BathDiscretization::uniform(0.5, 2.5, 3).unwrap();
    let model =
        assemble_hamiltonian(&profile, &no_bath(&grid), &disc, ModelOptions::default()).unwrap();
    let dec = normal_modes(&model, DEFAULT_MAX_DENSE_DIMENSION).unwrap();

    let mut expected = lattice_k(n, grid.spacing());
    expected.extend(std::iter::repeat(w0).take(n));
    for &w in &disc.omegas {
        expected.extend(std::iter::repeat(w).take(n));
    }
    expected.sort_by(f64::total_cmp);
    let mut got = dec.frequencies.clone();
    got.sort_by(f64::total_cmp);
    assert_eq!(got.len(), expected.len());
    for (a, b) in got.iter().zip(&expected) {
        assert!((a - b).abs() < 1e-10 * b, "{a} vs {b}");
    }
    assert!(dec.symplectic_residual() < 1e-10);
}

#[test]
fn lossless_dispersion_matches_root_solve() {
    let n = 30;
    let grid = Grid1D::new(-2.0, 2.0, n).unwrap();
    let (rho, w0, alpha) = (1.5, 1.1, 1.3);
    let profile = MaterialProfile::uniform(grid.clone(), rho, w0, alpha).unwrap();
    let model =
        assemble_hamiltonian(&profile, &no_bath(&grid), &empty(), ModelOptions::default()).unwrap();
    let dec = normal_modes(&model, DEFAULT_MAX_DENSE_DIMENSION).unwrap();

    let chi = |w: f64| alpha * alpha / rho / (w0 * w0 - w * w);
    let mut expected = Vec::new();
    let upper_edge = (w0 * w0 + alpha * alpha / rho).sqrt();
    for k in lattice_k(n, grid.spacing()) {
        let f = |w: f64| w * w * (1.0 + chi(w)) - k * k;
        expected.push(bisect(f, 1e-9, w0 * (1.0 - 1e-15)));
        expected.push(bisect(f, upper_edge, upper_edge + 2.0 * k + 10.0));
    }
    expected.sort_by(f64::total_cmp);
    let mut got = dec.frequencies.clone();
    got.sort_by(f64::total_cmp);
    for (a, b) in got.iter().zip(&expected) {
        assert!((a - b).abs() < 1e-9 * b, "{a} vs {b}");
    }
}

#[test]
fn williamson_form_is_symplectic_with_bath() {
    let (profile, bath) = cladded(3.0, 15, 6.0);
    let disc = BathDiscretization::uniform(0.05, 6.0, 10).unwrap();
    let model = assemble_hamiltonian(&profile, &bath, &disc, ModelOptions::default()).unwrap();
    assert!(model.is_symmetric());
    model.check_positive_definite().unwrap();
    let dec = normal_modes(&model, DEFAULT_MAX_DENSE_DIMENSION).unwrap();
    assert_eq!(dec.len(), model.half_dimension());
    assert!(dec.frequencies.iter().all(|&w| w > 0.0));
    assert!(
        dec.symplectic_residual() < 1e-10,
        "{:e}",
        dec.symplectic_residual()
    );
    assert!(dec.orthonormality < 1e-10, "{:e}", dec.orthonormality);
}

#[test]
fn indefinite_model_is_rejected_at_the_offending_point() {
    let grid = Grid1D::new(-2.0, 2.0, 41).unwrap();
    let (rho, w0) = (1.2, 1.0);
    let profile = MaterialProfile::uniform(grid.clone(), rho, w0, 0.7).unwrap();
    let c = |x: f64| if x >= 1.0 { 1.5 } else { 0.2 };
    let bath = BathModel::Tabulated(
        TabulatedBath::from_fn(
            &grid,
            FrequencyMesh::uniform(0.1, 3.0, 30).unwrap(),
            |x, _| c(x),
        )
        .unwrap(),
    );
    let disc = BathDiscretization::uniform(0.1, 3.0, 12).unwrap();
    let model = assemble_hamiltonian(&profile, &bath, &disc, ModelOptions::default()).unwrap();
    let margin = |x: f64| rho * w0 * w0 - c(x) * c(x) * 2.9 / rho;
    assert!(margin(0.0) > 0.0 && margin(1.5) < 0.0);
    match model.check_positive_definite() {
        Err(OracleError::Indefinite { x, margin: m, .. }) => {
            let first = (0..41).map(|i| grid.x(i)).find(|&x| x >= 1.0).unwrap();
            assert!((x - first).abs() < 1e-12);
            assert!((m - margin(x)).abs() < 1e-12);
        }
        other => panic!("expected Indefinite, got {other:?}"),
    }
    assert!(matches!(
        normal_modes(&model, 10_000),
        Err(OracleError::Indefinite { .. })
    ));
}

#[test]
fn preset_counterterm_keeps_model_positive() {
    let grid = Grid1D::new(-1.0, 1.0, 21).unwrap();
    let profile = MaterialProfile::uniform(grid.clone(), 1.0, 0.5, 1.0).unwrap();
    let bath = BathModel::DrudeLorentz(DrudeLorentzBath::uniform(&profile, 0.8).unwrap());
    let disc = BathDiscretization::uniform(0.05, 8.0, 30).unwrap();
    let model = assemble_hamiltonian(&profile, &bath, &disc, ModelOptions::default()).unwrap();
    assert!(model.counterterm.iter().all(|&c| c > 0.0));
    model.check_positive_definite().unwrap();
    assert!((OracleReport::new(&model, None).min_stiffness_margin - 0.25).abs() < 1e-12);
}

#[test]
fn dimension_cap_is_enforced() {
    let grid = Grid1D::new(-12.0, 12.0, 200).unwrap();
    let profile = MaterialProfile::uniform(grid.clone(), 1.0, 2.0, 1.0).unwrap();
    let disc = BathDiscretization::uniform(0.02, 9.0, 60).unwrap();
    let err = assemble_hamiltonian(&profile, &no_bath(&grid), &disc, ModelOptions::default())
        .unwrap_err();
    assert_eq!(
        err,
        OracleError::TooLarge {
            dimension: 24_800,
            cap: DEFAULT_MAX_DIMENSION
        }
    );
    let model = assemble_hamiltonian(
        &profile,
        &no_bath(&grid),
        &disc,
        ModelOptions {
            max_dimension: 30_000,
        },
    )
    .unwrap();
    assert!(matches!(
        normal_modes(&model, 6_000),
        Err(OracleError::TooLarge { .. })
    ));
}

#[test]
fn free_field_vacuum_is_half_quantum_per_mode() {
    let n = 20;
    let grid = Grid1D::new(0.0, 2.0, n).unwrap();
    let profile = MaterialProfile::uniform(grid.clone(), 1.0, 1.0, 0.0)
        .unwrap()
        .with_hbar(0.7);
    let model =
        assemble_hamiltonian(&profile, &no_bath(&grid), &empty(), ModelOptions::default()).unwrap();
    let dec = normal_modes(&model, 1000).unwrap();
    let h = grid.spacing();
    let ks = lattice_k(n, h);
    for (i, j) in [(0, 0), (5, 5), (5, 6), (3, 12)] {
        let phi = |q: usize, i: usize| {
            (2.0 / (n + 1) as f64).sqrt() * (q as f64 * PI * (i + 1) as f64 / (n + 1) as f64).sin()
        };
        let expected: f64 = (1..=n)
            .map(|q| 0.7 * ks[q - 1] * phi(q, i) * phi(q, j) / (2.0 * h))
            .sum();
        let got = vacuum_correlation_discrete(&dec, i, j);
        assert!(
            (got.re - expected).abs() < 1e-10 * expected.abs().max(1.0),
            "({i},{j}): {got} vs {expected}"
        );
        assert!(got.im.abs() < 1e-10);
    }
}

#[test]
fn energy_forms_agree_and_rk4_conserves() {
    let (profile, bath) = cladded(3.0, 12, 6.0);
    let disc = BathDiscretization::uniform(0.05, 6.0, 6).unwrap();
    let model = assemble_hamiltonian(&profile, &bath, &disc, ModelOptions::default()).unwrap();
    let z0: Vec<f64> = (0..model.dimension())
        .map(|r| ((r as f64) * 0.731).sin())
        .collect();
    let (a, b) = (model.energy(&z0), model.energy_direct(&z0));
    assert!((a - b).abs() < 1e-12 * a.abs(), "{a} vs {b}");
    let w_max = 2.0 / profile.grid().spacing() + 10.0;
    let drift = rk4_energy_drift(&model, &z0, 0.05 / w_max, 400);
    assert!(drift < 1e-6, "drift {drift:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn quadratic_form_matches_direct_energy(seed in 0u64..1000, n in 3usize..9, m in 0usize..5) {
        let grid = Grid1D::new(0.0, 1.0, n).unwrap();
        let s = seed as f64;
        let profile = MaterialProfile::from_fn(grid.clone(), |x| (1.0 + 0.3 * (s + x).sin().abs(), 2.0, 0.5 + x)).unwrap();
        let bath = BathModel::Tabulated(
            TabulatedBath::from_fn(&grid, FrequencyMesh::uniform(0.1, 3.0, 20).unwrap(), |x, w| 0.2 * (1.0 + x) * w / (1.0 + w)).unwrap(),
        );
        let disc = if m == 0 { empty() } else { BathDiscretization::midpoint(0.0, 3.0, m).unwrap() };
        let model = assemble_hamiltonian(&profile, &bath, &disc, ModelOptions::default()).unwrap();
        prop_assert!(model.is_symmetric());
        let z: Vec<f64> = (0..model.dimension()).map(|r| ((r as f64 + 1.0) * (s + 0.37)).cos()).collect();
        let (a, b) = (model.energy(&z), model.energy_direct(&z));
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}

/// Lattice wavenumber of the three-point stencil: `2(cos kh − 1)/h² + z²ε = 0`.
fn lattice_wavenumber(z: Complex64, eps: Complex64, h: f64) -> Complex64 {
    let c = 1.0 - z * z * eps * h * h / 2.0;
    let k = c.acos() / h;
    if k.im < 0.0 {
        -k
    } else {
        k
    }
}

#[test]
fn driven_response_decays_with_lattice_attenuation() {
    let n = 161;
    let grid = Grid1D::new(-8.0, 8.0, n).unwrap();
    let (rho, w0, alpha) = (1.0, 2.0, 1.5);
    let profile = MaterialProfile::uniform(grid.clone(), rho, w0, alpha).unwrap();
    let v = |w: f64| 0.4 * w * (-(w - 2.0).powi(2) / 1.5).exp();
    let bath = BathModel::Tabulated(
        TabulatedBath::from_fn(
            &grid,
            FrequencyMesh::uniform(0.02, 7.0, 2000).unwrap(),
            |_, w| v(w),
        )
        .unwrap(),
    );
    let disc = BathDiscretization::uniform(0.02, 7.0, 40).unwrap();
    let model = assemble_hamiltonian(&profile, &bath, &disc, ModelOptions::default()).unwrap();
    let src = n / 2;
    let mut drive = vec![0.0; n];
    drive[src] = 1.0;
    let z = Complex64::new(1.6, 3.0 * disc.spacing());
    let e = classical_response(&model, z, &drive).unwrap();

    // discrete bath self-energy, independent of the material module
    let sigma: Complex64 = disc
        .omegas
        .iter()
        .zip(&disc.weights)
        .map(|(&w, &wt)| wt * w * w * v(w).powi(2) / (z * z - w * w))
        .sum();
    let chi = -(alpha * alpha / rho) / (z * z - w0 * w0 - sigma / (rho * rho));
    let k = lattice_wavenumber(z, 1.0 + chi, grid.spacing());
    for s in [4usize, 10, 20] {
        let ratio = e[src + s] / e[src];
        let expected = (Complex64::i() * k * grid.spacing() * s as f64).exp();
        assert!(
            (ratio - expected).norm() < 1e-6 * expected.norm(),
            "s = {s}: {ratio} vs {expected}"
        );
    }
    assert!(k.im > 0.0);
    assert!(e[src + 20].norm() < e[src + 4].norm());
}

/// `E(x) = −iz Σ_j h G(x, x_j) j_j` from the finite-difference Green function
/// with the complex-frequency continuum susceptibility.
fn continuum_response(
    profile: &MaterialProfile,
    bath: &BathModel,
    z: Complex64,
    drive: &[f64],
) -> Vec<Complex64> {
    let grid = profile.grid();
    let n = grid.len();
    let eps = (0..n)
        .map(|i| 1.0 + chi_at_complex(profile, bath, i, z).unwrap())
        .collect();
    let g = green_fd(&DielectricResponse::extended(grid.clone(), eps).unwrap(), z).unwrap();
    let h = grid.spacing();
    (0..n)
        .map(|i| {
            -Complex64::i()
                * z
                * (0..n)
                    .map(|j| g.get(i, j) * h * drive[j])
                    .sum::<Complex64>()
        })
        .collect()
}

#[test]
fn driven_response_matches_green_function() {
    let (profile, bath) = cladded(12.0, 200, 9.0);
    let disc = BathDiscretization::uniform(0.02, 9.0, 60).unwrap();
    let model = assemble_hamiltonian(
        &profile,
        &bath,
        &disc,
        ModelOptions {
            max_dimension: 30_000,
        },
    )
    .unwrap();
    model.check_positive_definite().unwrap();
    let grid = profile.grid();
    let src = grid.nearest(-1.0);
    let mut drive = vec![0.0; grid.len()];
    drive[src] = 1.0;
    let core: Vec<usize> = (0..grid.len())
        .filter(|&i| grid.x(i).abs() <= 3.0)
        .collect();
    for w in [0.8, 1.7, 2.6, 3.5] {
        let z = Complex64::new(w, 3.0 * disc.spacing());
        let discrete = classical_response(&model, z, &drive).unwrap();
        let continuum = continuum_response(&profile, &bath, z, &drive);
        let scale = core
            .iter()
            .map(|&i| continuum[i].norm())
            .fold(0.0, f64::max);
        let err = core
            .iter()
            .map(|&i| (discrete[i] - continuum[i]).norm())
            .fold(0.0, f64::max)
            / scale;
        assert!(err < 1e-2, "ω = {w}: relative difference {err:e}");
    }
}

#[test]
fn smoothed_vacuum_matches_continuum_density() {
    let (profile, bath) = cladded(6.0, 60, 5.0);
    let disc = BathDiscretization::uniform(0.02, 5.0, 20).unwrap();
    let model = assemble_hamiltonian(&profile, &bath, &disc, ModelOptions::default()).unwrap();
    let dec = normal_modes(&model, DEFAULT_MAX_DENSE_DIMENSION).unwrap();
    let grid = profile.grid();
    let a = grid.nearest(-0.5);
    let b = grid.nearest(0.8);
    let pairs = [(a, a), (b, b), (a, b)];
    let gamma = 3.0 * disc.spacing();
    let band = (0.5, 4.0);
    let mesh = FrequencyMesh::uniform(band.0, band.1, 401).unwrap();
    let density = continuum_density(&profile, &bath, &pairs, mesh.omegas(), gamma, None).unwrap();
    let scale = smoothed_band_value(&dec, a, a, band, gamma);
    for (p, &(i, j)) in pairs.iter().enumerate() {
        let samples: Vec<f64> = density.iter().map(|row| row[p]).collect();
        let continuum = mesh.integrate(&samples);
        let discrete = smoothed_band_value(&dec, i, j, band, gamma);
        let err = (discrete - continuum).abs() / scale;
        assert!(
            err < 0.05,
            "({i},{j}): discrete {discrete} vs continuum {continuum}"
        );
    }
}
