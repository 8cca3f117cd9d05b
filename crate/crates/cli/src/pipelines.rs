//! The six pipelines. Each recomputes what it needs from the resolved config
//! and returns residuals plus the files it wrote.

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use thiserror::Error;

use polariton::export::{self, UnitDeclaration};
use polariton::fields::{self, SweepOptions};
use polariton::greenfn::{
    defining_equation_residual, green_fd, green_identity_residual, DielectricResponse,
    GreenSolution,
};
use polariton::material::{
    chi_at, chi_at_complex, compute_chi, recover_coupling, BathModel, KramersKronig,
    SusceptibilityTable,
};
use polariton::modes::{
    absorbing_labels, build_all_coefficients, build_fe, build_fe_noise_route, build_s,
    commutation_residual, eigen_residuals, ModeCoefficientSet, NoiseAmplitude,
};
use polariton::oracle::{
    assemble_hamiltonian, classical_response, normal_modes, smoothed_band_value,
    BathDiscretization, ModelOptions, DEFAULT_MAX_DENSE_DIMENSION, DEFAULT_MAX_DIMENSION,
};

use crate::config::{
    internal, nearest_mesh_point, BathKind, Dimension, ExperimentConfig, Pipeline, Resolved,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    /// Singular systems, indefinite Hamiltonians, lossless points.
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

macro_rules! numerical {
    ($($t:ty),*) => {$(
        impl From<$t> for PipelineError {
            fn from(e: $t) -> Self {
                PipelineError::Numerical(e.to_string())
            }
        }
    )*};
}
numerical!(
    polariton::material::MaterialError,
    polariton::greenfn::GreenError,
    polariton::modes::ModesError,
    polariton::fields::FieldsError,
    polariton::oracle::OracleError
);

impl From<export::ExportError> for PipelineError {
    fn from(e: export::ExportError) -> Self {
        PipelineError::Io(e.to_string())
    }
}

type Result<T> = std::result::Result<T, PipelineError>;

/// One row of the residual table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    pub name: String,
    pub value: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Residual {
    fn checked(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value: Some(value),
            tolerance: Some(tolerance),
            pass: Some(value.is_finite() && value <= tolerance),
            note: None,
        }
    }

    fn reported(name: impl Into<String>, value: f64, note: &str) -> Self {
        Self {
            name: name.into(),
            value: Some(value),
            tolerance: None,
            pass: None,
            note: Some(note.into()),
        }
    }

    fn not_applicable(name: impl Into<String>, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value: None,
            tolerance: None,
            pass: None,
            note: Some(note.into()),
        }
    }
}

#[derive(Debug, Default)]
pub struct Output {
    pub residuals: Vec<Residual>,
    pub files: Vec<PathBuf>,
    pub info: Value,
}

pub struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub res: &'a Resolved,
    pub units: UnitDeclaration,
    pub dir: &'a Path,
}

pub fn run(p: Pipeline, ctx: &Context) -> Result<Output> {
    match p {
        Pipeline::Chi => chi(ctx),
        Pipeline::Green => green(ctx),
        Pipeline::Modes => modes(ctx),
        Pipeline::Verify => verify(ctx),
        Pipeline::Correlate => correlate(ctx),
        Pipeline::Oracle => oracle(ctx),
    }
}

fn chi_column(res: &Resolved, omega: f64) -> Result<Vec<Complex64>> {
    let n = res.profile.grid().len();
    Ok((0..n)
        .map(|i| chi_at(&res.profile, &res.bath, i, omega))
        .collect::<std::result::Result<_, _>>()?)
}

fn response(res: &Resolved, chi: &[Complex64]) -> Result<DielectricResponse> {
    let grid = res.profile.grid().clone();
    let eps = chi.iter().map(|c| 1.0 + c).collect();
    Ok(match res.exterior {
        Some(ext) => DielectricResponse::new(grid, eps, ext)?,
        None => DielectricResponse::extended(grid, eps)?,
    })
}

fn material_residuals(res: &Resolved, table: &SusceptibilityTable) -> Result<Vec<Residual>> {
    let p = &res.profile;
    let mut out = Vec::new();

    // closed forms exist for the lossless and preset baths
    let closed = |i: usize, w: f64| -> Option<Complex64> {
        let (rho, w0, a) = (p.rho(i), p.omega0(i), p.alpha(i));
        match (&res.bath, res.bath_kind) {
            (_, BathKind::None) => Some(Complex64::new(-(a * a / rho) / (w * w - w0 * w0), 0.0)),
            (BathModel::DrudeLorentz(d), _) => Some(
                Complex64::new(a * a / rho, 0.0) / Complex64::new(w0 * w0 - w * w, -d.width(i) * w),
            ),
            _ => None,
        }
    };
    let n = p.grid().len();
    let mut worst: Option<f64> = None;
    for i in (0..n).filter(|&i| !p.is_vacuum(i)) {
        for (k, &w) in res.mesh.omegas().iter().enumerate() {
            let Some(c) = closed(i, w) else { continue };
            if !c.norm().is_finite() || (w - p.omega0(i)).abs() < 1e-6 * w {
                continue;
            }
            let e = (table.get(i, k) - c).norm() / c.norm();
            worst = Some(worst.unwrap_or(0.0).max(e));
        }
    }
    out.push(match worst {
        Some(v) => Residual::checked("chi_closed_form", v, res.tol("chi_closed_form")),
        None => Residual::not_applicable("chi_closed_form", "no closed form for this bath"),
    });

    let probe: Vec<usize> = (0..n).filter(|&i| !p.is_vacuum(i)).collect();
    let stride = probe.len().div_ceil(8).max(1);
    let mut kk: Option<f64> = None;
    let mut kk_notes = Vec::new();
    let mut rt: Option<f64> = None;
    for &i in probe.iter().step_by(stride) {
        if let KramersKronig::Checked(r) = polariton::material::kramers_kronig_residual(table, i) {
            kk = Some(kk.unwrap_or(0.0).max(r.residual));
            if let Some(w) = r.warning {
                kk_notes.push(format!("x = {}: {w}", p.grid().x(i)));
            }
        }
        let vmax = (0..res.mesh.len())
            .map(|k| res.bath.coupling(p, i, res.mesh.omegas()[k]))
            .fold(0.0, f64::max);
        for k in 1..res.mesh.len() - 1 {
            let v = res.bath.coupling(p, i, res.mesh.omegas()[k]);
            if v <= 1e-6 * vmax || v == 0.0 {
                continue;
            }
            if let Ok(got) = recover_coupling(table, p, i, k) {
                rt = Some(rt.unwrap_or(0.0).max((got - v).abs() / v));
            }
        }
    }
    out.push(match kk {
        Some(v) => {
            let mut r = Residual::checked("kramers_kronig", v, res.tol("kramers_kronig"));
            if !kk_notes.is_empty() {
                r.note = Some(kk_notes.join("; "));
            }
            r
        }
        None => Residual::not_applicable("kramers_kronig", "Im χ vanishes on the mesh"),
    });
    out.push(match rt {
        Some(v) => Residual::checked("coupling_roundtrip", v, res.tol("coupling_roundtrip")),
        None => Residual::not_applicable("coupling_roundtrip", "no absorbing mesh point"),
    });
    Ok(out)
}

fn chi(ctx: &Context) -> Result<Output> {
    let res = ctx.res;
    let table = compute_chi(&res.profile, &res.bath, &res.mesh)?;
    let files = export::export_chi(&table, &ctx.units, ctx.dir, "chi")?;
    Ok(Output {
        residuals: material_residuals(res, &table)?,
        files,
        info: json!({ "provenance": table.provenance() }),
    })
}

fn green_checks(
    res: &Resolved,
    g: &GreenSolution,
    eps: &DielectricResponse,
    tag: &str,
) -> Result<Vec<Residual>> {
    let scale = g.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let core = res.core_nodes();
    let id = green_identity_residual(g, eps, Some(&core))?;
    let mut out = vec![
        Residual::checked(
            format!("green_reciprocity{tag}"),
            g.reciprocity_defect() / scale,
            res.tol("green_reciprocity"),
        ),
        Residual::checked(
            format!("green_equation{tag}"),
            defining_equation_residual(g, eps)?,
            res.tol("green_equation"),
        ),
        Residual::checked(
            format!("green_identity{tag}"),
            id.residual,
            res.tol("green_identity"),
        ),
    ];
    out.push(if res.cladding.is_some() {
        Residual::checked(
            format!("surface_flux{tag}"),
            id.surface_flux,
            res.tol("surface_flux"),
        )
    } else {
        Residual::reported(
            format!("surface_flux{tag}"),
            id.surface_flux,
            "no absorbing cladding configured",
        )
    });
    Ok(out)
}

fn green(ctx: &Context) -> Result<Output> {
    let res = ctx.res;
    let spec = ctx.cfg.green.as_ref().expect("validated");
    let mut out = Output::default();
    let mut info = Vec::new();
    for (k, q) in spec.omegas.iter().enumerate() {
        let w = internal(q, res.omega_ref, Dimension::Frequency);
        let chi = chi_column(res, w)?;
        let eps = response(res, &chi)?;
        let g = green_fd(&eps, w)?;
        let tag = format!("[{k}]");
        let checks = green_checks(res, &g, &eps, &tag)?;
        let diag = json!({ "residuals": checks });
        out.files.extend(export::export_green(
            &g,
            &ctx.units,
            ctx.dir,
            &format!("green_{k}"),
            spec.binary,
            diag,
        )?);
        out.residuals.extend(checks);
        info.push(json!({ "omega": w, "warnings": g.warnings() }));
    }
    out.info = json!(info);
    Ok(out)
}

struct Scene {
    chi: Vec<Complex64>,
    eps: DielectricResponse,
    g: GreenSolution,
    omega: f64,
}

fn scene(res: &Resolved, omega: f64) -> Result<Scene> {
    let chi = chi_column(res, omega)?;
    let eps = response(res, &chi)?;
    let g = green_fd(&eps, omega)?;
    Ok(Scene { chi, eps, g, omega })
}

fn coefficients(res: &Resolved, sc: &Scene, labels: &[usize]) -> Result<ModeCoefficientSet> {
    let s = build_s(&res.profile, &sc.chi, sc.omega)?;
    let fe = build_fe(
        &sc.g,
        &sc.chi,
        &res.bath,
        &s,
        &res.profile,
        sc.omega,
        labels,
    )?;
    Ok(build_all_coefficients(
        &fe,
        &sc.chi,
        &res.bath,
        &s,
        &res.profile,
        sc.omega,
        &res.mesh,
        labels,
    )?)
}

fn route_equivalence(res: &Resolved, sc: &Scene, set: &ModeCoefficientSet) -> Result<Residual> {
    let noise = NoiseAmplitude::new(&res.profile, &sc.chi, sc.omega)?;
    let r2 = build_fe_noise_route(&sc.g, &noise, set.labels());
    let scale = r2.max_abs();
    let v = if scale > 0.0 {
        set.f_e.max_abs_difference(&r2) / scale
    } else {
        0.0
    };
    Ok(Residual::checked(
        "route_equivalence",
        v,
        res.tol("route_equivalence"),
    ))
}

fn modes(ctx: &Context) -> Result<Output> {
    let res = ctx.res;
    let spec = ctx.cfg.modes.as_ref().expect("validated");
    let omega = nearest_mesh_point(
        &res.mesh,
        internal(&spec.omega, res.omega_ref, Dimension::Frequency),
    );
    let sc = scene(res, omega)?;
    let labels = absorbing_labels(&res.profile, &sc.chi);
    let set = coefficients(res, &sc, &labels)?;
    let grid = res.profile.grid();
    let meta = |name: &str| json!({ "kind": "mode-coefficient", "kernel": name, "omega": omega, "labels": labels.len() });
    let mut files = Vec::new();
    for (name, k) in [("f_e", &set.f_e), ("f_a", &set.f_a), ("f_pi", &set.f_pi)] {
        files.extend(export::export_field_coefficient(
            grid,
            k,
            &ctx.units,
            ctx.dir,
            name,
            meta(name),
        )?);
    }
    for (name, k) in [
        ("f_x", &set.f_x),
        ("f_p", &set.f_p),
        ("f_y_delta", &set.f_y_delta),
        ("f_q_delta", &set.f_q_delta),
        ("f_y_amplitude", &set.f_y_amplitude),
    ] {
        files.extend(export::export_local_kernel(
            grid,
            k,
            &ctx.units,
            ctx.dir,
            name,
            meta(name),
        )?);
    }
    Ok(Output {
        residuals: vec![
            route_equivalence(res, &sc, &set)?,
            Residual::checked(
                "s_condition",
                set.s().unitarity_residual(),
                res.tol("s_condition"),
            ),
        ],
        files,
        info: json!({ "omega": omega, "labels": labels.len() }),
    })
}

fn verify(ctx: &Context) -> Result<Output> {
    let res = ctx.res;
    let spec = ctx.cfg.verify.as_ref().expect("validated");
    let w1 = nearest_mesh_point(
        &res.mesh,
        internal(&spec.omega, res.omega_ref, Dimension::Frequency),
    );
    let w2 = nearest_mesh_point(
        &res.mesh,
        internal(&spec.omega_prime, res.omega_ref, Dimension::Frequency),
    );
    let stride = spec.label_stride.unwrap_or(4);
    let a = scene(res, w1)?;
    let b = scene(res, w2)?;
    let core = res.core_nodes();
    let labels: Vec<usize> = absorbing_labels(&res.profile, &a.chi)
        .into_iter()
        .filter(|j| core.contains(j) && b.chi[*j].im > 0.0)
        .step_by(stride)
        .collect();
    if labels.is_empty() {
        return Err(PipelineError::Numerical(format!(
            "no absorbing mode label in the core at ω = {w1} and ω′ = {w2}"
        )));
    }
    let set_a = coefficients(res, &a, &labels)?;
    let set_b = coefficients(res, &b, &labels)?;

    let mut r = material_residuals(res, &compute_chi(&res.profile, &res.bath, &res.mesh)?)?;
    r.extend(green_checks(res, &a.g, &a.eps, "")?);
    r.push(route_equivalence(res, &a, &set_a)?);

    let e = eigen_residuals(&set_a, &a.eps, &res.bath, &res.interfaces())?;
    for (name, v) in [
        ("potential_momentum", e.potential_momentum),
        ("potential_from_field", e.potential_from_field),
        ("momentum_from_field", e.momentum_from_field),
        ("bath_from_amplitude", e.bath_from_amplitude),
    ] {
        r.push(Residual::checked(
            format!("eigen_{name}"),
            v,
            res.tol("eigen_exact"),
        ));
    }
    for (name, v) in [
        ("polarization_velocity", e.polarization_velocity),
        ("bath_velocity", e.bath_velocity),
        ("bath_force", e.bath_force),
    ] {
        r.push(Residual::checked(
            format!("eigen_{name}"),
            v,
            res.tol("eigen_algebraic"),
        ));
    }
    r.push(match e.polarization_force {
        Some(v) => Residual::checked("eigen_polarization_force", v, res.tol("eigen_quadrature")),
        None => Residual::not_applicable(
            "eigen_polarization_force",
            "bath integral diverges for the Ohmic preset",
        ),
    });
    r.push(Residual::checked(
        "eigen_wave_equation_bulk",
        e.wave_equation.bulk,
        res.tol("wave_relation"),
    ));
    r.push(Residual::reported(
        "eigen_wave_equation_source",
        e.wave_equation.source_scaled,
        "source node, scaled by h over the delta weight; converges as O(h²)",
    ));

    let pairs: Vec<(usize, usize)> = labels
        .iter()
        .flat_map(|&i| labels.iter().map(move |&j| (i, j)))
        .collect();
    let c = commutation_residual(&set_a, &set_b, &pairs)?;
    r.push(Residual::checked(
        "s_condition",
        c.s_condition,
        res.tol("s_condition"),
    ));
    r.push(Residual::checked(
        "commutator_off_diagonal",
        c.off_diagonal,
        res.tol("commutator"),
    ));
    r.push(Residual::checked(
        "commutator_cc",
        c.cc,
        res.tol("commutator"),
    ));
    r.push(Residual::checked(
        "commutator_double_curl",
        c.double_curl,
        res.tol("commutator"),
    ));

    let path = ctx.dir.join("verify_residuals.json");
    std::fs::create_dir_all(ctx.dir)
        .map_err(|e| PipelineError::Io(format!("{}: {e}", ctx.dir.display())))?;
    export::write_json(
        &path,
        &json!({ "omega": w1, "omega_prime": w2, "labels": labels.len(), "residuals": r }),
    )?;
    Ok(Output {
        residuals: r,
        files: vec![path],
        info: json!({ "omega": w1, "omega_prime": w2, "labels": labels.len(), "excluded_nodes": e.wave_equation.excluded_nodes }),
    })
}

fn correlate(ctx: &Context) -> Result<Output> {
    let res = ctx.res;
    let spec = ctx.cfg.correlate.as_ref().expect("validated");
    let grid = res.profile.grid();
    let mut nodes: Vec<usize> = spec
        .points
        .iter()
        .map(|q| grid.nearest(internal(q, res.omega_ref, Dimension::Length)))
        .collect();
    nodes.dedup();
    let taus: Vec<f64> = spec
        .taus
        .iter()
        .map(|q| internal(q, res.omega_ref, Dimension::Time))
        .collect();
    let options = SweepOptions {
        exterior: res.exterior,
        ..Default::default()
    };
    let sd = fields::spectral_density(
        &res.profile,
        &res.bath,
        &res.mesh,
        &fields::all_pairs(&nodes),
        &options,
    )?;
    let c = fields::correlate(&sd, &taus);
    let comm = fields::equal_time_commutator_residual(&sd);
    let files = export::export_correlation(&c, &ctx.units, ctx.dir, "correlation_e")?;

    // ⟨E(x)²⟩ at τ = 0 must be real and positive
    let scale = c.kernel_route.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut negative: f64 = 0.0;
    if let Some(t0) = taus.iter().position(|&t| t == 0.0) {
        for (p, &(a, b)) in c.pairs.iter().enumerate() {
            if a == b {
                let v = c.kernel(p, t0);
                negative = negative.max((-v.re).max(0.0)).max(v.im.abs());
            }
        }
    }
    Ok(Output {
        residuals: vec![
            Residual::checked(
                "correlation_routes",
                c.route_agreement,
                res.tol("correlation_routes"),
            ),
            Residual::checked(
                "hermiticity",
                c.hermiticity_residual(),
                res.tol("hermiticity"),
            ),
            Residual::checked(
                "positivity",
                negative / scale.max(f64::MIN_POSITIVE),
                res.tol("hermiticity"),
            ),
            Residual::checked(
                "field_commutator",
                comm.relative,
                res.tol("field_commutator"),
            ),
            Residual::reported(
                "truncation_ratio",
                c.truncation_ratio,
                "integrand at ω_max relative to its peak",
            ),
        ],
        files,
        info: json!({ "warnings": c.warnings, "fluctuation_scale": comm.fluctuation_scale }),
    })
}

fn oracle(ctx: &Context) -> Result<Output> {
    let res = ctx.res;
    let spec = ctx.cfg.oracle.as_ref().expect("validated");
    let f = |q| internal(q, res.omega_ref, Dimension::Frequency);
    let disc = BathDiscretization::uniform(f(&spec.bath_min), f(&spec.bath_max), spec.bath_modes)?;
    let options = ModelOptions {
        max_dimension: spec.max_dimension.unwrap_or(DEFAULT_MAX_DIMENSION),
    };
    let model = assemble_hamiltonian(&res.profile, &res.bath, &disc, options)?;
    model.check_positive_definite()?;
    let grid = res.profile.grid();
    let n = grid.len();
    let h = grid.spacing();
    let eta = spec.broadening.unwrap_or(3.0) * disc.spacing();
    let src = grid.nearest(internal(&spec.drive_at, res.omega_ref, Dimension::Length));
    let mut drive = vec![0.0; n];
    drive[src] = 1.0;
    let core = res.core_nodes();

    let mut residuals = Vec::new();
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for q in &spec.drive_omegas {
        let z = Complex64::new(f(q), eta);
        let discrete = classical_response(&model, z, &drive)?;
        let chi = (0..n)
            .map(|i| chi_at_complex(&res.profile, &res.bath, i, z))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let g = green_fd(&response(res, &chi)?, z)?;
        // E = −iz ∫ G j
        let continuum: Vec<Complex64> = (0..n)
            .map(|i| -Complex64::i() * z * g.get(i, src) * h)
            .collect();
        let scale = core
            .iter()
            .map(|&i| continuum[i].norm())
            .fold(0.0, f64::max);
        let err = core
            .iter()
            .map(|&i| (discrete[i] - continuum[i]).norm())
            .fold(0.0, f64::max)
            / scale;
        worst = worst.max(err);
        for i in 0..n {
            rows.push(vec![
                z.re,
                z.im,
                grid.x(i),
                discrete[i].re,
                discrete[i].im,
                continuum[i].re,
                continuum[i].im,
            ]);
        }
    }
    residuals.push(Residual::checked(
        "oracle_response",
        worst,
        res.tol("oracle_response"),
    ));
    std::fs::create_dir_all(ctx.dir)
        .map_err(|e| PipelineError::Io(format!("{}: {e}", ctx.dir.display())))?;
    let path = ctx.dir.join("oracle_response.csv");
    export::write_csv(
        &path,
        &[
            "omega",
            "eta",
            "x",
            "re_discrete",
            "im_discrete",
            "re_continuum",
            "im_continuum",
        ],
        rows,
    )?;
    let side = ctx.dir.join("oracle_response.json");
    export::write_json(
        &side,
        &json!({
            "kind": "oracle-driven-response",
            "units": ctx.units,
            "drive_node": src,
            "drive_x": grid.x(src),
            "eta": eta,
            "bath_modes": disc.len(),
            "dimension": model.dimension(),
            "continuum": "E = -i z h G(x, x_src; z) with chi continued to complex z",
        }),
    )?;
    let mut files = vec![path, side];
    let mut info = json!({ "dimension": model.dimension(), "eta": eta, "counterterm_applied": model.counterterm.iter().any(|&c| c != 0.0) });

    if let Some(band) = &spec.band {
        let band = (f(&band[0]), f(&band[1]));
        let dec = normal_modes(
            &model,
            spec.max_dense_dimension
                .unwrap_or(DEFAULT_MAX_DENSE_DIMENSION),
        )?;
        residuals.push(Residual::checked(
            "symplectic",
            dec.symplectic_residual(),
            res.tol("symplectic"),
        ));
        let mut nodes: Vec<usize> = spec
            .vacuum_points
            .iter()
            .map(|q| grid.nearest(internal(q, res.omega_ref, Dimension::Length)))
            .collect();
        nodes.dedup();
        let pairs = fields::all_pairs(&nodes);
        let mesh = polariton::material::FrequencyMesh::uniform(band.0.max(1e-9), band.1, 401)?;
        let density = fields::smoothed_spectral_density(
            &res.profile,
            &res.bath,
            &pairs,
            mesh.omegas(),
            eta,
            res.exterior,
        )?;
        let mut values = Vec::new();
        for (p, &(i, j)) in pairs.iter().enumerate() {
            let samples: Vec<f64> = density.iter().map(|row| row[p]).collect();
            values.push((
                i,
                j,
                smoothed_band_value(&dec, i, j, band, eta),
                mesh.integrate(&samples),
            ));
        }
        let scale = values
            .iter()
            .filter(|v| v.0 == v.1)
            .map(|v| v.3.abs())
            .fold(0.0, f64::max);
        let err = values.iter().map(|v| (v.2 - v.3).abs()).fold(0.0, f64::max) / scale;
        residuals.push(Residual::checked(
            "oracle_vacuum",
            err,
            res.tol("oracle_vacuum"),
        ));
        files.extend(export::export_series(
            &dec.frequencies,
            "omega",
            &ctx.units,
            ctx.dir,
            "oracle_frequencies",
            json!({ "kind": "oracle-normal-mode-frequencies", "orthonormality": dec.orthonormality }),
        )?);
        let path = ctx.dir.join("oracle_vacuum.csv");
        export::write_csv(
            &path,
            &["x", "x_prime", "discrete", "continuum"],
            values
                .iter()
                .map(|v| vec![grid.x(v.0), grid.x(v.1), v.2, v.3]),
        )?;
        files.push(path);
        info["band"] = json!([band.0, band.1]);
    }
    Ok(Output {
        residuals,
        files,
        info,
    })
}
