use faer::Mat;
use num_complex::Complex64;
use polariton::greenfn::*;
use polariton::material::Grid1D;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn three_layer_absorbing() -> LayerStack {
    LayerStack::new(
        -1.0,
        vec![
            Layer {
                thickness: 0.6,
                eps: c(1.0, 0.0),
            },
            Layer {
                thickness: 0.8,
                eps: c(2.5, 0.4),
            },
            Layer {
                thickness: 0.6,
                eps: c(1.5, 0.05),
            },
        ],
    )
    .unwrap()
}

/// Lossless core between two absorbing claddings, each 20% of the grid.
fn cladded_profile(n: usize) -> (DielectricResponse, Vec<usize>) {
    let grid = Grid1D::new(-6.0, 6.0, n).unwrap();
    let eps = grid
        .points()
        .iter()
        .map(|&x| {
            let core = c(1.0 + 0.8 * (-x * x).exp(), 0.0);
            if x.abs() > 3.6 {
                core + c(0.0, 6.0 * ((x.abs() - 3.6) / 0.4).min(1.0))
            } else {
                core
            }
        })
        .collect();
    let core = (0..n).filter(|&i| grid.x(i).abs() <= 3.6).collect();
    (DielectricResponse::extended(grid, eps).unwrap(), core)
}

#[test]
fn single_layer_is_homogeneous() {
    let eps = c(2.0, 0.3);
    let grid = Grid1D::new(-1.3, 2.1, 57).unwrap();
    let tm = green_multilayer(&LayerStack::homogeneous(eps), 1.7, &grid).unwrap();
    let an = green_homogeneous_matrix(eps, 1.7, &grid).unwrap();
    let worst = tm
        .values()
        .iter()
        .zip(an.values())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    assert!(worst < 1e-12, "{worst}");
    assert_eq!(tm.solver(), Solver::TransferMatrix);
}

#[test]
fn multilayer_with_vacuum_sides_matches_homogeneous() {
    // splitting a homogeneous medium into layers must not change G
    let eps = c(1.0, 0.0);
    let stack = LayerStack::new(
        0.0,
        vec![
            Layer {
                thickness: 0.3,
                eps,
            },
            Layer {
                thickness: 0.4,
                eps,
            },
            Layer {
                thickness: 1.0,
                eps,
            },
        ],
    )
    .unwrap();
    let grid = Grid1D::new(-1.0, 2.0, 31).unwrap();
    let tm = green_multilayer(&stack, 2.0, &grid).unwrap();
    let an = green_homogeneous_matrix(eps, 2.0, &grid).unwrap();
    let worst = tm
        .values()
        .iter()
        .zip(an.values())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    assert!(worst < 1e-12, "{worst}");
}

#[test]
fn two_layer_jump_and_continuity() {
    let stack = LayerStack::new(
        0.0,
        vec![
            Layer {
                thickness: 1.0,
                eps: c(1.0, 0.0),
            },
            Layer {
                thickness: 1.0,
                eps: c(4.0, 0.0),
            },
        ],
    )
    .unwrap();
    let d = 1e-7;
    // source on the interior of the second layer
    let grid = Grid1D::new(1.5 - d, 1.5 + d, 3).unwrap();
    let g = green_multilayer(&stack, 1.3, &grid).unwrap();
    let right = (g.get(2, 1) - g.get(1, 1)) / d;
    let left = (g.get(1, 1) - g.get(0, 1)) / d;
    assert!((right - left - 1.0).norm() < 1e-5, "{}", right - left);
}

#[test]
fn interface_continuity_of_derivative() {
    let stack = LayerStack::new(
        0.0,
        vec![
            Layer {
                thickness: 1.0,
                eps: c(1.0, 0.0),
            },
            Layer {
                thickness: 1.0,
                eps: c(4.0, 0.0),
            },
        ],
    )
    .unwrap();
    // source at x = −0.5; evaluate around the interface x = 1 with a tiny grid
    let d = 1e-6;
    let points = [1.0 - d, 1.0, 1.0 + d];
    let vals: Vec<Complex64> = points
        .iter()
        .map(|&x| {
            let grid = Grid1D::new(-0.5, x, 3).unwrap();
            let g = green_multilayer(&stack, 1.3, &grid).unwrap();
            g.get(2, 0)
        })
        .collect();
    let left = (vals[1] - vals[0]) / d;
    let right = (vals[2] - vals[1]) / d;
    assert!((vals[2] - vals[0]).norm() < 1e-5);
    assert!((right - left).norm() < 1e-4, "{left} {right}");
}

#[test]
fn three_layer_reciprocity() {
    let grid = Grid1D::new(-1.5, 1.5, 121).unwrap();
    let g = green_multilayer(&three_layer_absorbing(), 2.2, &grid).unwrap();
    assert!(g.reciprocity_residual() < 1e-10);
    assert!(g.values().iter().all(|v| v.norm().is_finite()));
}

#[test]
fn lossless_resonance_or_clean_solution() {
    // a lossless slab in vacuum still radiates, so W cannot vanish for real ω
    let stack = LayerStack::new(
        0.0,
        vec![
            Layer {
                thickness: 1.0,
                eps: c(1.0, 0.0),
            },
            Layer {
                thickness: 1.0,
                eps: c(9.0, 0.0),
            },
            Layer {
                thickness: 1.0,
                eps: c(1.0, 0.0),
            },
        ],
    )
    .unwrap();
    let grid = Grid1D::new(0.0, 3.0, 31).unwrap();
    assert!(green_multilayer(&stack, 1.0, &grid).is_ok());
    assert!(matches!(
        green_multilayer(&LayerStack::homogeneous(c(0.0, 0.0)), 1.0, &grid),
        Err(GreenError::DegenerateMedium { .. })
    ));
}

#[test]
fn absorbing_homogeneous_decay_and_fd_agreement() {
    let eps = c(2.0, 0.5);
    let omega = 1.0;
    let k = wavenumber(eps, omega).unwrap();
    let g0 = green_homogeneous(eps, omega, 0.0, 0.0).unwrap();
    for d in [0.5, 1.0, 2.0] {
        let g = green_homogeneous(eps, omega, d, 0.0).unwrap();
        assert!(((g.norm() / g0.norm()).ln() + k.im * d).abs() < 1e-12);
    }

    let grid = Grid1D::new(-2.0, 2.0, 4001).unwrap();
    let fd = green_fd(
        &DielectricResponse::uniform(grid.clone(), eps).unwrap(),
        omega,
    )
    .unwrap();
    let mut worst: f64 = 0.0;
    for i in (0..4001).step_by(250) {
        for j in (0..4001).step_by(250) {
            let exact = green_homogeneous(eps, omega, grid.x(i), grid.x(j)).unwrap();
            worst = worst.max((fd.get(i, j) - exact).norm());
        }
    }
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn fd_converges_at_second_order() {
    let omega = 3.0;
    let probes = [-1.0, -0.25, 0.0, 0.5, 1.0];
    let mut errs = Vec::new();
    for n in [81, 161, 321] {
        let grid = Grid1D::new(-1.0, 1.0, n).unwrap();
        let fd = green_fd(
            &DielectricResponse::uniform(grid.clone(), c(1.0, 0.0)).unwrap(),
            omega,
        )
        .unwrap();
        let mut worst: f64 = 0.0;
        for &a in &probes {
            for &b in &probes {
                let (i, j) = (grid.node_at(a).unwrap(), grid.node_at(b).unwrap());
                let exact = green_homogeneous(c(1.0, 0.0), omega, a, b).unwrap();
                worst = worst.max((fd.get(i, j) - exact).norm());
            }
        }
        errs.push(worst);
    }
    let o1 = (errs[0] / errs[1]).log2();
    let o2 = (errs[1] / errs[2]).log2();
    assert!(
        (o1 - 2.0).abs() < 0.1 && (o2 - 2.0).abs() < 0.1,
        "orders {o1} {o2}, errs {errs:?}"
    );
}

#[test]
fn fd_agrees_with_transfer_matrix_at_second_order() {
    let stack = three_layer_absorbing();
    let omega = 2.0;
    let probes = [-1.5, -0.4, 0.0, 0.2, 1.5];
    let mut errs = Vec::new();
    for n in [121, 241, 481] {
        let grid = Grid1D::new(-1.5, 1.5, n).unwrap();
        let tm = green_multilayer(&stack, omega, &grid).unwrap();
        let fd = green_fd(
            &DielectricResponse::from_stack(&stack, grid.clone()).unwrap(),
            omega,
        )
        .unwrap();
        let mut worst: f64 = 0.0;
        for &a in &probes {
            for &b in &probes {
                let (i, j) = (grid.node_at(a).unwrap(), grid.node_at(b).unwrap());
                worst = worst.max((fd.get(i, j) - tm.get(i, j)).norm());
            }
        }
        errs.push(worst);
    }
    let order = (errs[1] / errs[2]).log2();
    assert!(order > 1.8, "order {order}, errs {errs:?}");
}

#[test]
fn fd_reciprocity_on_smooth_lossless_bump() {
    let grid = Grid1D::new(-2.0, 2.0, 401).unwrap();
    let eps = grid
        .points()
        .iter()
        .map(|&x| c(1.0 + 1.5 * (-x * x * 3.0).exp(), 0.0))
        .collect();
    let resp = DielectricResponse::new(grid, eps, Exterior::vacuum()).unwrap();
    let g = green_fd(&resp, 2.5).unwrap();
    assert!(g.reciprocity_defect() < 1e-9, "{}", g.reciprocity_defect());
    assert!(g.warnings().is_empty());
    assert!(defining_equation_residual(&g, &resp).unwrap() < 1e-9);
}

#[test]
fn fd_warns_when_under_resolved() {
    let grid = Grid1D::new(0.0, 10.0, 41).unwrap();
    let g = green_fd(
        &DielectricResponse::uniform(grid, c(4.0, 0.1)).unwrap(),
        2.0,
    )
    .unwrap();
    assert_eq!(g.warnings().len(), 1);
    assert!(g.warnings()[0].contains("points per wavelength"));
}

#[test]
fn absorbing_operator_has_no_real_eigenvalues() {
    let grid = Grid1D::new(0.0, 2.0, 60).unwrap();
    let eps = grid
        .points()
        .iter()
        .map(|&x| c(1.0 + x, 0.05 + 0.1 * x))
        .collect();
    let resp = DielectricResponse::extended(grid, eps).unwrap();
    let op = WaveOperator::new(&resp, 3.0).unwrap();
    let n = op.len();
    let dense = Mat::<Complex64>::from_fn(n, n, |i, j| {
        if i == j {
            op.diag[i]
        } else if i == j + 1 {
            op.sub[j]
        } else if j == i + 1 {
            op.sup[i]
        } else {
            c(0.0, 0.0)
        }
    });
    let eig = dense.eigenvalues().unwrap();
    let min_im = eig.iter().map(|e| e.im).fold(f64::INFINITY, f64::min);
    assert!(min_im > 0.0, "{min_im}");
}

#[test]
fn green_identity_with_absorbing_cladding() {
    let (resp, core) = cladded_profile(601);
    let g = green_fd(&resp, 3.0).unwrap();
    assert!(g.warnings().is_empty());
    let report = green_identity_residual(&g, &resp, Some(&core)).unwrap();
    assert!(report.discrete);
    assert!(report.residual < 1e-6, "{report:?}");
    assert!(report.surface_flux < 1e-8, "{report:?}");
    assert!(!report.lossless);

    let broken = g.with_zeroed_column(300);
    let bad = green_identity_residual(&broken, &resp, Some(&core)).unwrap();
    assert!(bad.residual > 1e-2, "{bad:?}");
}

#[test]
fn green_identity_lossless_is_carried_by_flux() {
    let grid = Grid1D::new(-1.0, 1.0, 201).unwrap();
    let resp = DielectricResponse::uniform(grid.clone(), c(1.0, 0.0)).unwrap();
    let g = green_fd(&resp, 2.0).unwrap();
    let report = green_identity_residual(&g, &resp, None).unwrap();
    assert!(report.lossless);
    assert_eq!(report.volume_term, 0.0);
    assert!(report.surface_flux > 0.5);
    assert!(report.residual < 1e-10, "{report:?}");

    // the continuum form with the analytic G holds exactly as well
    let an = green_homogeneous_matrix(c(1.0, 0.0), 2.0, &grid).unwrap();
    let report = green_identity_residual(&an, &resp, None).unwrap();
    assert!(!report.discrete);
    assert!(report.residual < 1e-12, "{report:?}");
}

#[test]
fn green_identity_continuum_form_converges() {
    let stack = three_layer_absorbing();
    let mut res = Vec::new();
    for n in [151, 301] {
        let grid = Grid1D::new(-1.5, 1.5, n).unwrap();
        let resp = DielectricResponse::from_stack(&stack, grid.clone()).unwrap();
        let g = green_multilayer(&stack, 2.0, &grid).unwrap();
        res.push(green_identity_residual(&g, &resp, None).unwrap().residual);
    }
    assert!(res[1] < res[0] / 3.0, "{res:?}");
    assert!(res[1] < 1e-3, "{res:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn transfer_matrix_reciprocity_and_passivity(
        t in proptest::collection::vec(0.1f64..1.0, 1..5),
        re in proptest::collection::vec(1.0f64..6.0, 5),
        im in proptest::collection::vec(0.0f64..0.8, 5),
        omega in 0.3f64..4.0,
    ) {
        let layers: Vec<Layer> = t.iter().enumerate().map(|(j, &th)| Layer { thickness: th, eps: c(re[j], im[j]) }).collect();
        let stack = LayerStack::new(-0.5, layers).unwrap();
        let grid = Grid1D::new(-1.0, 3.0, 41).unwrap();
        let g = green_multilayer(&stack, omega, &grid).unwrap();
        let scale = g.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        prop_assert!(g.reciprocity_residual() <= 1e-10 * scale.max(1.0));
        for i in 0..grid.len() {
            // local density of states is non-negative: Im G(x, x) ≤ 0
            prop_assert!(g.get(i, i).im <= 1e-12 * scale);
        }
    }

    #[test]
    fn fd_defining_equation_holds(omega in 0.5f64..3.0, loss in 0.0f64..0.5) {
        let grid = Grid1D::new(0.0, 2.0, 121).unwrap();
        let eps = grid.points().iter().map(|&x| c(1.0 + x * x, loss)).collect();
        let resp = DielectricResponse::extended(grid, eps).unwrap();
        let g = green_fd(&resp, omega).unwrap();
        prop_assert!(defining_equation_residual(&g, &resp).unwrap() < 1e-10);
    }
}
