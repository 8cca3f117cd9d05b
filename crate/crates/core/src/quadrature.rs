//! Principal-value quadrature on tabulated meshes.
//!
//! All routines evaluate integrals of the form `P∫ g(w) / (ω² − w²) dw` by
//! subtracting `g(ω)` from the integrand. The remainder is regular at `w = ω`
//! and is integrated with the trapezoid rule; the subtracted piece
//! `g(ω) P∫ dw / (ω² − w²)` is integrated analytically.

/// `P∫_a^b dw / (ω² − w²)` for `0 ≤ a < b`, `ω > 0`.
///
/// The logarithmic singularity at an endpoint coinciding with `ω` is
/// returned as infinite; callers multiply it by a factor that vanishes there.
pub fn pv_reciprocal(a: f64, b: f64, omega: f64) -> f64 {
    // antiderivative of 1/(ω² − w²): (1/2ω) ln|(ω + w)/(ω − w)|
    let anti = |w: f64| -> f64 {
        if w == 0.0 {
            0.0
        } else {
            ((omega + w) / (omega - w)).abs().ln() / (2.0 * omega)
        }
    };
    anti(b) - anti(a)
}

/// Trapezoid weights for an ascending, possibly non-uniform, set of nodes.
pub fn trapezoid_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let d = nodes[i + 1] - nodes[i];
        w[i] += 0.5 * d;
        w[i + 1] += 0.5 * d;
    }
    w
}

/// Index of the node equal to `omega` within a relative tolerance.
pub fn locate_node(nodes: &[f64], omega: f64) -> Option<usize> {
    let tol = 1e-12 * omega.abs().max(1.0);
    let idx = nodes.partition_point(|&w| w < omega - tol);
    if idx < nodes.len() && (nodes[idx] - omega).abs() <= tol {
        Some(idx)
    } else {
        None
    }
}

/// Derivative of tabulated samples at node `k` from a five-point Lagrange
/// stencil (shifted inward at the ends, fewer points on tiny meshes).
fn node_derivative(nodes: &[f64], g: &[f64], k: usize) -> f64 {
    let n = nodes.len();
    let width = n.min(5);
    let start = k.saturating_sub(width / 2).min(n - width);
    lagrange_derivative(
        &nodes[start..start + width],
        &g[start..start + width],
        nodes[k],
    )
}

fn lagrange_derivative(x: &[f64], y: &[f64], at: f64) -> f64 {
    let m = x.len();
    let mut d = 0.0;
    for i in 0..m {
        let mut term = 0.0;
        for j in 0..m {
            if j == i {
                continue;
            }
            let mut prod = 1.0 / (x[i] - x[j]);
            for l in 0..m {
                if l != i && l != j {
                    prod *= (at - x[l]) / (x[i] - x[l]);
                }
            }
            term += prod;
        }
        d += y[i] * term;
    }
    d
}

/// Cubic Lagrange interpolation (value, derivative) of tabulated samples.
pub fn interpolate_cubic(nodes: &[f64], g: &[f64], at: f64) -> (f64, f64) {
    let n = nodes.len();
    if n < 4 {
        let k = nodes.partition_point(|&w| w < at).clamp(1, n - 1);
        let t = (at - nodes[k - 1]) / (nodes[k] - nodes[k - 1]);
        let slope = (g[k] - g[k - 1]) / (nodes[k] - nodes[k - 1]);
        return (g[k - 1] + t * (g[k] - g[k - 1]), slope);
    }
    let k = nodes.partition_point(|&w| w < at);
    let start = k.saturating_sub(2).min(n - 4);
    let xs = &nodes[start..start + 4];
    let ys = &g[start..start + 4];
    let mut value = 0.0;
    let mut deriv = 0.0;
    for i in 0..4 {
        let mut li = 1.0;
        let mut dli = 0.0;
        for j in 0..4 {
            if j == i {
                continue;
            }
            let factor = (at - xs[j]) / (xs[i] - xs[j]);
            dli = dli * factor + li / (xs[i] - xs[j]);
            li *= factor;
        }
        value += ys[i] * li;
        deriv += ys[i] * dli;
    }
    (value, deriv)
}

/// Regularized trapezoid sum `Σ w_k (g_k − g(ω)) / (ω² − w_k²)` over the mesh.
///
/// `g_at` and `dg_at` are the value and slope of `g` at `ω`; nodes closer to
/// `ω` than `1e-6` of the local spacing take the analytic limit
/// `−g′(ω) / (2ω)`.
fn regularized_sum(
    nodes: &[f64],
    weights: &[f64],
    g: &[f64],
    omega: f64,
    g_at: f64,
    dg_at: f64,
) -> f64 {
    let n = nodes.len();
    let mut acc = 0.0;
    for k in 0..n {
        let spacing = if k + 1 < n {
            nodes[k + 1] - nodes[k]
        } else {
            nodes[k] - nodes[k - 1]
        };
        let dw = nodes[k] - omega;
        let term = if dw.abs() <= 1e-6 * spacing {
            let dk = if dw == 0.0 {
                dg_at
            } else {
                node_derivative(nodes, g, k)
            };
            -dk / (2.0 * omega)
        } else {
            (g[k] - g_at) / ((omega - nodes[k]) * (omega + nodes[k]))
        };
        acc += weights[k] * term;
    }
    acc
}

/// `P∫_a^b g(w) / (ω² − w²) dw` for samples of `g` on an ascending mesh
/// `[a, b]`, with `g` taken as zero outside the mesh.
pub fn principal_value(nodes: &[f64], weights: &[f64], g: &[f64], omega: f64) -> f64 {
    let a = nodes[0];
    let b = nodes[nodes.len() - 1];
    if omega < a || omega > b {
        // no pole inside; the plain trapezoid sum is regular
        return nodes
            .iter()
            .zip(weights)
            .zip(g)
            .map(|((&w, &wt), &gk)| wt * gk / ((omega - w) * (omega + w)))
            .sum();
    }
    let (g_at, dg_at) = match locate_node(nodes, omega) {
        Some(k) => (g[k], node_derivative(nodes, g, k)),
        None => interpolate_cubic(nodes, g, omega),
    };
    let regular = regularized_sum(nodes, weights, g, omega, g_at, dg_at);
    let log_part = if g_at == 0.0 {
        0.0
    } else {
        g_at * pv_reciprocal(a, b, omega)
    };
    regular + log_part
}

/// `P∫_0^∞ f(w) / (ω² − w²) dw` where `f` is tabulated on `[a, b]`,
/// continued as `c₀ w²` below `a` and `c∞ / w²` above `b` with coefficients
/// matched to the end samples. Returns `(total, tail)` where `tail` is the
/// contribution of the region above `b`.
pub fn principal_value_half_line(
    nodes: &[f64],
    weights: &[f64],
    f: &[f64],
    omega: f64,
) -> (f64, f64) {
    let n = nodes.len();
    let a = nodes[0];
    let b = nodes[n - 1];
    let (f_at, df_at) = match locate_node(nodes, omega) {
        Some(k) => (f[k], node_derivative(nodes, f, k)),
        None => interpolate_cubic(nodes, f, omega),
    };
    // P∫_0^∞ dw/(ω² − w²) = 0, so subtracting f(ω) everywhere is free.
    let mesh_part = regularized_sum(nodes, weights, f, omega, f_at, df_at);

    let c0 = f[0] / (a * a);
    // ∫_0^a (c0 w² − f(ω)) / (ω² − w²) dw = −c0 a + (c0 ω² − f(ω)) L_low
    let low_factor = c0 * omega * omega - f_at;
    let low = -c0 * a
        + if low_factor == 0.0 || (omega - a).abs() <= 1e-14 * omega {
            0.0
        } else {
            low_factor * pv_reciprocal(0.0, a, omega)
        };

    let c_inf = f[n - 1] * b * b;
    // ∫_b^∞ (c∞/w² − f(ω)) / (ω² − w²) dw = c∞/(ω² b) + (c∞/ω² − f(ω)) L_high
    let l_high = -((b + omega) / (b - omega)).abs().ln() / (2.0 * omega);
    let high_factor = c_inf / (omega * omega) - f_at;
    let high = c_inf / (omega * omega * b)
        + if high_factor == 0.0 || (b - omega).abs() <= 1e-14 * omega {
            0.0
        } else {
            high_factor * l_high
        };
    (low + mesh_part + high, high)
}
