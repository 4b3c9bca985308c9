//! Photon lifetimes from decay rates, and the quadrature jitter relation
//! `τ_1/e = sqrt(2τ² + J1² + J2²)` between a coincidence-peak width and the
//! cavity photon lifetime.
//!
//! Three rate-based estimators are exposed and always reported by name:
//! the detuned (high-Q) and aligned (low-Q) approximations, and the exact
//! per-branch lifetimes from the eigenfrequencies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tcmt::{eigenfrequencies, SystemParams};

/// Coincidence width, channel jitters and the deconvolved lifetime, all in s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimeEstimate {
    pub tau_1e: f64,
    pub jitter1: f64,
    pub jitter2: f64,
    pub tau: f64,
}

impl LifetimeEstimate {
    pub fn from_width(tau_1e: f64, jitter1: f64, jitter2: f64) -> Result<Self> {
        Ok(LifetimeEstimate {
            tau_1e,
            jitter1,
            jitter2,
            tau: deconvolve_jitter(tau_1e, jitter1, jitter2)?,
        })
    }
}

/// Lifetime of a detuned main-ring resonance at critical coupling,
/// `1/(2γ1)`.
pub fn tau_high_q(params: &SystemParams) -> Result<f64> {
    if params.gamma1 <= 0.0 {
        return Err(Error::DivisionByZero("tau_high_q needs gamma1 > 0"));
    }
    Ok(1.0 / (2.0 * params.gamma1))
}

/// Lifetime of the merged resonance near the exceptional point, `1/γc`.
pub fn tau_low_q(params: &SystemParams) -> Result<f64> {
    if params.gamma_c <= 0.0 {
        return Err(Error::DivisionByZero("tau_low_q needs gamma_c > 0"));
    }
    Ok(1.0 / params.gamma_c)
}

/// Per-branch lifetimes `1/(2|Im ω±|)`, in the order (plus, minus).
pub fn tau_exact(params: &SystemParams) -> Result<(f64, f64)> {
    let e = eigenfrequencies(params);
    let branch = |w: num_complex::Complex64, name| {
        if w.im == 0.0 {
            Err(Error::InfiniteLifetime(name))
        } else {
            Ok(1.0 / (2.0 * w.im.abs()))
        }
    };
    Ok((branch(e.omega_plus, "omega_plus")?, branch(e.omega_minus, "omega_minus")?))
}

/// Largest achievable lifetime ratio, `γc/(2γ1)`.
pub fn lifetime_contrast(params: &SystemParams) -> Result<f64> {
    if params.gamma1 <= 0.0 {
        return Err(Error::DivisionByZero("lifetime_contrast needs gamma1 > 0"));
    }
    Ok(params.gamma_c / (2.0 * params.gamma1))
}

fn check_non_negative(pairs: &[(&'static str, f64)]) -> Result<()> {
    for &(field, v) in pairs {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::invalid(field, format!("must be finite and >= 0, got {v}")));
        }
    }
    Ok(())
}

/// Expected coincidence-peak width for lifetime `tau` and channel jitters.
pub fn convolve_jitter(tau: f64, j1: f64, j2: f64) -> Result<f64> {
    check_non_negative(&[("tau", tau), ("jitter1", j1), ("jitter2", j2)])?;
    Ok((2.0 * tau * tau + j1 * j1 + j2 * j2).sqrt())
}

/// Inverse of [`convolve_jitter`]. A width exactly equal to the combined
/// jitter gives zero; a narrower one is unresolvable.
pub fn deconvolve_jitter(tau_1e: f64, j1: f64, j2: f64) -> Result<f64> {
    check_non_negative(&[("tau_1e", tau_1e), ("jitter1", j1), ("jitter2", j2)])?;
    let excess = tau_1e * tau_1e - j1 * j1 - j2 * j2;
    if excess < 0.0 {
        return Err(Error::Domain(format!(
            "width {tau_1e:e} s is below the combined channel jitter {:e} s",
            (j1 * j1 + j2 * j2).sqrt()
        )));
    }
    Ok((excess / 2.0).sqrt())
}
