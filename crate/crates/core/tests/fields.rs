use num_complex::Complex64;
use polariton::fields::*;
use polariton::greenfn::{green_fd, green_homogeneous_matrix, DielectricResponse};
use polariton::material::{
    chi_at, BathModel, DrudeLorentzBath, FrequencyMesh, Grid1D, MaterialProfile, TabulatedBath,
};
use polariton::modes::NoiseAmplitude;

/// Lossy slab in the middle, absorbing cladding towards both ends.
fn cladded(n: usize) -> (MaterialProfile, BathModel) {
    let grid = Grid1D::new(-12.0, 12.0, n).unwrap();
    let clad = |x: f64| ((x.abs() - 3.6).max(0.0) / 8.4).powi(2);
    let profile =
        MaterialProfile::from_fn(grid.clone(), |x| (1.0, 2.0, 0.8 + 8.0 * clad(x))).unwrap();
    let bath = TabulatedBath::from_fn(
        &grid,
        FrequencyMesh::uniform(0.02, 9.0, 1500).unwrap(),
        |x, w| (0.35 + 0.5 * clad(x)) * w * (-(w - 2.0).powi(2) / 1.5).exp(),
    )
    .unwrap();
    (profile, BathModel::Tabulated(bath))
}

fn core_nodes(profile: &MaterialProfile, stride: usize) -> Vec<usize> {
    let grid = profile.grid();
    (0..grid.len())
        .filter(|&i| grid.x(i).abs() <= 2.5)
        .step_by(stride)
        .collect()
}

fn mesh() -> FrequencyMesh {
    FrequencyMesh::uniform(0.4, 4.0, 240).unwrap()
}

#[test]
fn correlation_routes_agree_on_cladded_slab() {
    let (profile, bath) = cladded(481);
    let nodes = core_nodes(&profile, 12);
    let pairs = all_pairs(&nodes);
    let taus = [-1.0, -0.3, 0.0, 0.3, 1.0];
    let r = vacuum_correlation_e(
        &profile,
        &bath,
        &mesh(),
        &pairs,
        &taus,
        &SweepOptions::default(),
    )
    .unwrap();
    assert!(
        r.route_agreement < 1e-4,
        "routes differ by {:e}",
        r.route_agreement
    );
    assert!(
        r.hermiticity_residual() < 1e-12,
        "hermiticity {:e}",
        r.hermiticity_residual()
    );
    let t0 = taus.iter().position(|&t| t == 0.0).unwrap();
    for (p, &(a, b)) in pairs.iter().enumerate() {
        if a == b {
            let c = r.kernel(p, t0);
            assert_eq!(c.im, 0.0);
            assert!(c.re > 0.0);
        }
    }
}

#[test]
fn equal_time_commutator_vanishes() {
    let (profile, bath) = cladded(481);
    let nodes = core_nodes(&profile, 10);
    let spec = spectral_density(
        &profile,
        &bath,
        &mesh(),
        &all_pairs(&nodes),
        &SweepOptions::default(),
    )
    .unwrap();
    let c = equal_time_commutator_residual(&spec);
    assert!(c.relative < 1e-6, "commutator {:e}", c.relative);
    // equal points vanish identically
    for (p, &(a, b)) in spec.pairs.iter().enumerate() {
        if a == b {
            for k in 0..spec.mesh.len() {
                assert_eq!(spec.kernel(k, p).im, 0.0);
            }
        }
    }
}

#[test]
fn commutator_breaks_with_truncated_sources() {
    let (profile, bath) = cladded(241);
    let nodes = core_nodes(&profile, 5);
    let grid = profile.grid();
    // dropping the noise sources on the left half invalidates the identity
    let mask: Vec<bool> = (0..grid.len()).map(|i| grid.x(i) > 0.0).collect();
    let options = SweepOptions {
        source_mask: Some(mask),
        ..Default::default()
    };
    let spec = spectral_density(&profile, &bath, &mesh(), &all_pairs(&nodes), &options).unwrap();
    let c = equal_time_commutator_residual(&spec);
    assert!(
        c.relative > 1e-3,
        "negative control passed: {:e}",
        c.relative
    );
}

#[test]
fn truncated_mesh_warns() {
    let (profile, bath) = cladded(121);
    let nodes = core_nodes(&profile, 4);
    let m = FrequencyMesh::uniform(0.4, 2.0, 40).unwrap();
    let r = vacuum_correlation_e(
        &profile,
        &bath,
        &m,
        &all_pairs(&nodes),
        &[0.0],
        &SweepOptions::default(),
    )
    .unwrap();
    assert!(r.truncation_ratio > TRUNCATION_RATIO);
    assert!(r.warnings.iter().any(|w| w.contains("truncated")));
}

#[test]
fn kernel_scales_with_sqrt_hbar() {
    let grid = Grid1D::new(-1.0, 1.0, 31).unwrap();
    let profile = MaterialProfile::uniform(grid.clone(), 1.0, 1.5, 1.0).unwrap();
    let bath = BathModel::DrudeLorentz(DrudeLorentzBath::uniform(&profile, 0.2).unwrap());
    let omega = 1.2;
    let chi: Vec<Complex64> = (0..31)
        .map(|i| chi_at(&profile, &bath, i, omega).unwrap())
        .collect();
    let g = green_homogeneous_matrix(1.0 + chi[0], omega, &grid).unwrap();
    let k1 = efield_kernel(&g, &NoiseAmplitude::new(&profile, &chi, omega).unwrap()).unwrap();
    let scaled = profile.clone().with_hbar(4.0);
    let k4 = efield_kernel(&g, &NoiseAmplitude::new(&scaled, &chi, omega).unwrap()).unwrap();
    for (a, b) in k1.values().iter().zip(k4.values()) {
        assert!((2.0 * a - b).norm() <= 1e-15 * b.norm().max(1.0));
    }
    // homogeneous absorber: reciprocity of G carries over to the kernel
    for i in 0..31 {
        for j in 0..31 {
            assert!((k1.get(i, j) - k1.get(j, i)).norm() < 1e-14);
        }
    }
}

#[test]
fn d_equals_e_in_vacuum_region() {
    let grid = Grid1D::new(-3.0, 3.0, 121).unwrap();
    let profile = MaterialProfile::from_fn(grid.clone(), |x| {
        (1.0, 1.5, if x < 0.0 { 0.0 } else { 1.0 })
    })
    .unwrap();
    let bath = BathModel::DrudeLorentz(DrudeLorentzBath::uniform(&profile, 0.4).unwrap());
    let omega = 1.3;
    let chi: Vec<Complex64> = (0..121)
        .map(|i| chi_at(&profile, &bath, i, omega).unwrap())
        .collect();
    let eps =
        DielectricResponse::extended(grid.clone(), chi.iter().map(|c| 1.0 + c).collect()).unwrap();
    let g = green_fd(&eps, omega).unwrap();
    let noise = NoiseAmplitude::new(&profile, &chi, omega).unwrap();
    let e = efield_kernel(&g, &noise).unwrap();
    let d = dfield_kernel(&g, &chi, &noise).unwrap();
    for i in (0..121).filter(|&i| grid.x(i) < 0.0) {
        for j in 0..121 {
            assert_eq!(d.get(i, j), e.get(i, j));
        }
    }
    // local term sits on the diagonal of the absorbing half only
    let i = 100;
    let local = d.get(i, i) - (1.0 + chi[i]) * e.get(i, i);
    assert!(local.im > 0.0);
    assert!((d.get(i, i + 1) - (1.0 + chi[i]) * e.get(i, i + 1)).norm() < 1e-15);
}

#[test]
fn sweep_is_bit_reproducible() {
    let (profile, bath) = cladded(121);
    let nodes = core_nodes(&profile, 3);
    let m = FrequencyMesh::uniform(0.4, 3.0, 60).unwrap();
    let a = vacuum_correlation_e(
        &profile,
        &bath,
        &m,
        &all_pairs(&nodes),
        &[0.0, 0.5],
        &SweepOptions::default(),
    )
    .unwrap();
    let b = vacuum_correlation_e(
        &profile,
        &bath,
        &m,
        &all_pairs(&nodes),
        &[0.0, 0.5],
        &SweepOptions::default(),
    )
    .unwrap();
    assert_eq!(a, b);
}
