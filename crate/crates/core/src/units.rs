//! Internal unit system.
//!
//! Frequencies are measured in a reference frequency `ω_ref`, lengths in
//! `c / ω_ref`. The vacuum constants below are fixed to one; `ħ` is carried
//! by [`crate::material::MaterialProfile`] so that scaling checks remain
//! possible.

/// Vacuum permittivity.
pub const EPS0: f64 = 1.0;
/// Vacuum permeability.
pub const MU0: f64 = 1.0;
/// Speed of light.
pub const C_LIGHT: f64 = 1.0;
/// Default reduced Planck constant.
pub const HBAR: f64 = 1.0;
