//! Two-mode temporal coupled-mode model of the main ring (mode 1) coupled to
//! the bus-loaded auxiliary ring (mode 2).
//!
//! Field amplitudes evolve as
//!
//! ```text
//! da1/dt = (-i ω1 - γ1/2) a1 - i κ a2
//! da2/dt = (-i ω2 - (γ2 + γc)/2) a2 - i κ a1 + sqrt(γc) s_in
//! s_out  = s_in - sqrt(γc) a2
//! ```
//!
//! so the effective Hamiltonian is `[[ω1 - iγ1/2, κ], [κ, ω2 - i(γ2+γc)/2]]`
//! and only the auxiliary ring talks to the bus.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{Spectrum, SpectrumKind};
use crate::units;

pub type Matrix2 = [[Complex64; 2]; 2];

/// Physical parameters of the coupled-ring pair. Every field is in s⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Resonance of the main ring.
    pub omega1: f64,
    /// Detuning of the auxiliary ring, `ω2 - ω1`.
    pub delta_omega: f64,
    /// Intrinsic decay of the main ring.
    pub gamma1: f64,
    /// Intrinsic decay of the auxiliary ring.
    pub gamma2: f64,
    /// Auxiliary-ring to bus coupling decay.
    pub gamma_c: f64,
    /// Ring-to-ring coupling.
    pub kappa: f64,
}

impl SystemParams {
    /// Rates extracted for the fabricated device (γ1 = γ2 = 3.0 GHz,
    /// γc = 146.8 GHz, κ = 45.5 GHz), aligned rings, main resonance at the
    /// 1536.9 nm pump channel.
    pub fn fitted_device() -> Self {
        SystemParams {
            omega1: units::angular_from_nm(1536.9),
            delta_omega: 0.0,
            gamma1: 3.0 * units::GHZ,
            gamma2: 3.0 * units::GHZ,
            gamma_c: 146.8 * units::GHZ,
            kappa: 45.5 * units::GHZ,
        }
    }

    pub fn omega2(&self) -> f64 {
        self.omega1 + self.delta_omega
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("omega1", self.omega1),
            ("delta_omega", self.delta_omega),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("gamma_c", self.gamma_c),
            ("kappa", self.kappa),
        ];
        for (field, v) in finite {
            if !v.is_finite() {
                return Err(Error::invalid(field, format!("must be finite, got {v}")));
            }
        }
        for (field, v) in [
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("gamma_c", self.gamma_c),
            ("kappa", self.kappa),
        ] {
            if v < 0.0 {
                return Err(Error::invalid(field, format!("must be >= 0, got {v}")));
            }
        }
        if self.omega1 <= 0.0 {
            return Err(Error::invalid("omega1", format!("must be > 0, got {}", self.omega1)));
        }
        Ok(())
    }

    pub fn with_delta_omega(mut self, delta_omega: f64) -> Self {
        self.delta_omega = delta_omega;
        self
    }

    /// Sum of all decay rates, `γ1 + γ2 + γc`.
    pub fn total_decay(&self) -> f64 {
        self.gamma1 + self.gamma2 + self.gamma_c
    }
}

/// Relative distance from an exact midpoint, in auxiliary FSRs, below which
/// a main resonance is treated as equidistant from two auxiliary lines.
pub const PAIRING_TIE: f64 = 1e-9;

/// Comb layout of the two rings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceGeometry {
    /// Main-ring free spectral range, s⁻¹.
    pub fsr1: f64,
    /// Auxiliary-ring free spectral range, s⁻¹.
    pub fsr2: f64,
    /// Main-ring resonances modelled on each side of the reference mode.
    pub n_modes: usize,
    /// Offset of the auxiliary comb from the main comb at zero tuning, s⁻¹.
    pub alignment_offset: f64,
}

impl DeviceGeometry {
    /// 0.78 nm main-ring FSR around 1536.9 nm, auxiliary FSR exactly twice
    /// that, three resonances on each side of the pump (seven in total).
    pub fn fitted_device() -> Self {
        let fsr1 = units::angular_from_hz(units::hz_spacing_from_nm(1536.9, 0.78));
        DeviceGeometry {
            fsr1,
            fsr2: 2.0 * fsr1,
            n_modes: 3,
            alignment_offset: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fsr1.is_finite() && self.fsr1 > 0.0) {
            return Err(Error::invalid("fsr1", "must be finite and > 0"));
        }
        if !(self.fsr2.is_finite() && self.fsr2 > 0.0) {
            return Err(Error::invalid("fsr2", "must be finite and > 0"));
        }
        if self.n_modes < 1 {
            return Err(Error::invalid("n_modes", "must be >= 1"));
        }
        if !self.alignment_offset.is_finite() {
            return Err(Error::invalid("alignment_offset", "must be finite"));
        }
        Ok(())
    }

    /// Frequency of main-ring resonance `m` (m = 0 is the reference).
    pub fn main_line(&self, omega1: f64, m: i64) -> f64 {
        omega1 + m as f64 * self.fsr1
    }

    /// Frequency of auxiliary-ring resonance `k` at the given tuning.
    pub fn aux_line(&self, omega1: f64, tuning: f64, k: i64) -> f64 {
        omega1 + self.alignment_offset + tuning + k as f64 * self.fsr2
    }

    /// Index of the auxiliary line nearest to main resonance `m`. A main line
    /// within `PAIRING_TIE` auxiliary FSRs of the midpoint between two
    /// auxiliary lines counts as a tie and goes to the higher line.
    pub fn nearest_aux(&self, tuning: f64, m: i64) -> i64 {
        let y = (m as f64 * self.fsr1 - self.alignment_offset - tuning) / self.fsr2 + 0.5;
        let k = y.round();
        if (y - k).abs() < PAIRING_TIE {
            k as i64
        } else {
            y.floor() as i64
        }
    }

    /// Tunings within `(lo, hi)` at which some modelled main resonance is
    /// exactly halfway between two auxiliary lines, in ascending order.
    pub fn pairing_switches(&self, lo: f64, hi: f64) -> Vec<f64> {
        let n = self.n_modes as i64;
        let mut out = Vec::new();
        for m in -n..=n {
            // tuning = m·fsr1 - offset - (j + 1/2)·fsr2
            let base = m as f64 * self.fsr1 - self.alignment_offset - 0.5 * self.fsr2;
            let j_lo = ((base - hi) / self.fsr2).ceil() as i64;
            let j_hi = ((base - lo) / self.fsr2).floor() as i64;
            for j in j_lo..=j_hi {
                let t = base - j as f64 * self.fsr2;
                if t > lo && t < hi {
                    out.push(t);
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() <= PAIRING_TIE * self.fsr2);
        out
    }

    /// Detuning `ω_aux - ω_main` seen by main resonance `m`.
    pub fn detuning_of(&self, tuning: f64, m: i64) -> f64 {
        let k = self.nearest_aux(tuning, m);
        self.alignment_offset + tuning + k as f64 * self.fsr2 - m as f64 * self.fsr1
    }
}

/// Eigenpairs of the effective Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenSolution {
    pub omega_plus: Complex64,
    pub omega_minus: Complex64,
    pub eigvec_plus: [Complex64; 2],
    pub eigvec_minus: [Complex64; 2],
}

impl EigenSolution {
    /// `|<v+, v->|` for the unit-normalised eigenvectors; 1 at an
    /// exceptional point.
    pub fn eigvec_overlap(&self) -> f64 {
        let [a0, a1] = self.eigvec_plus;
        let [b0, b1] = self.eigvec_minus;
        (a0.conj() * b0 + a1.conj() * b1).norm()
    }

    pub fn splitting(&self) -> f64 {
        (self.omega_plus - self.omega_minus).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateResponse {
    pub a1: Complex64,
    pub a2: Complex64,
    pub s_out: Complex64,
    pub drive_freq: f64,
}

pub fn hamiltonian(params: &SystemParams) -> Matrix2 {
    let i = Complex64::i();
    let k = Complex64::new(params.kappa, 0.0);
    [
        [params.omega1 - i * (params.gamma1 / 2.0), k],
        [k, params.omega2() - i * ((params.gamma2 + params.gamma_c) / 2.0)],
    ]
}

/// Exact eigenvalues and eigenvectors of [`hamiltonian`].
///
/// `omega_plus` is the root with the larger real part; when the real parts
/// coincide (broken phase at zero detuning) it is the less damped one.
pub fn eigenfrequencies(params: &SystemParams) -> EigenSolution {
    let i = Complex64::i();
    // mean = (H00 + H11)/2 and half = (H00 - H11)/2 built from the parameters
    // directly so the large common ω1 never gets subtracted from itself.
    let mean = Complex64::new(params.omega1 + params.delta_omega / 2.0, 0.0)
        - i * (params.total_decay() / 4.0);
    let half = Complex64::new(-params.delta_omega / 2.0, 0.0)
        + i * ((params.gamma2 + params.gamma_c - params.gamma1) / 4.0);
    let root = (half * half + params.kappa * params.kappa).sqrt();

    let (mut lp, mut lm) = (mean + root, mean - root);
    let tie = 4.0 * f64::EPSILON * mean.norm().max(root.norm());
    let swap = if (lp.re - lm.re).abs() <= tie {
        lm.im > lp.im
    } else {
        lm.re > lp.re
    };
    if swap {
        std::mem::swap(&mut lp, &mut lm);
    }

    let (vp, vm) = if params.kappa == 0.0 {
        // Decoupled: eigenvectors are the bare ring modes.
        let h00 = mean + half;
        let e0 = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let e1 = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        if (lp - h00).norm() <= (lm - h00).norm() {
            (e0, e1)
        } else {
            (e1, e0)
        }
    } else {
        (
            eigenvector(params.kappa, lp - mean, half),
            eigenvector(params.kappa, lm - mean, half),
        )
    };

    EigenSolution {
        omega_plus: lp,
        omega_minus: lm,
        eigvec_plus: vp,
        eigvec_minus: vm,
    }
}

/// Null vector of `H - λ` with `shift = λ - mean`. Both rows of `H - λ` give a
/// candidate; the larger one is better conditioned.
fn eigenvector(kappa: f64, shift: Complex64, half: Complex64) -> [Complex64; 2] {
    let k = Complex64::new(kappa, 0.0);
    let from_row0 = [k, shift - half];
    let from_row1 = [shift + half, k];
    let norm = |v: &[Complex64; 2]| (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    let v = if norm(&from_row0) >= norm(&from_row1) {
        from_row0
    } else {
        from_row1
    };
    let n = norm(&v);
    [v[0] / n, v[1] / n]
}

/// Signed distance to the zero-detuning exceptional point,
/// `κ - (γ2 + γc - γ1)/4`. Positive in the split phase, negative in the
/// broken phase.
pub fn ep_distance(params: &SystemParams) -> f64 {
    params.kappa - (params.gamma2 + params.gamma_c - params.gamma1) / 4.0
}

/// Linear steady state under a monochromatic bus drive at `drive_freq`.
pub fn steady_state_response(
    params: &SystemParams,
    drive_freq: f64,
    s_in: Complex64,
) -> Result<SteadyStateResponse> {
    if s_in == Complex64::new(0.0, 0.0) {
        return Err(Error::invalid("s_in", "drive amplitude must be nonzero"));
    }
    let (d1, d2) = mode_denominators(params, drive_freq);
    let det = d1 * d2 + params.kappa * params.kappa;
    if det == Complex64::new(0.0, 0.0) {
        return Err(Error::SingularSystem { drive_freq });
    }
    let drive = params.gamma_c.sqrt() * s_in;
    let a2 = d1 * drive / det;
    let a1 = -Complex64::i() * params.kappa * drive / det;
    let s_out = s_in - params.gamma_c.sqrt() * a2;
    Ok(SteadyStateResponse {
        a1,
        a2,
        s_out,
        drive_freq,
    })
}

/// `(i(ω1-ω) + γ1/2, i(ω2-ω) + (γ2+γc)/2)`.
fn mode_denominators(params: &SystemParams, drive_freq: f64) -> (Complex64, Complex64) {
    let det1 = params.omega1 - drive_freq;
    let det2 = det1 + params.delta_omega;
    (
        Complex64::new(params.gamma1 / 2.0, det1),
        Complex64::new((params.gamma2 + params.gamma_c) / 2.0, det2),
    )
}

pub(crate) fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::invalid("grid", "needs at least 2 points"));
    }
    if grid.iter().any(|f| !f.is_finite()) {
        return Err(Error::invalid("grid", "contains non-finite values"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("grid", "must be strictly increasing"));
    }
    Ok(())
}

/// Power transmission `|s_out/s_in|²` on `grid`.
pub fn transmission_spectrum(params: &SystemParams, grid: &[f64]) -> Result<Spectrum> {
    params.validate()?;
    validate_grid(grid)?;
    let one = Complex64::new(1.0, 0.0);
    let values = grid
        .iter()
        .map(|&w| steady_state_response(params, w, one).map(|r| r.s_out.norm_sqr()))
        .collect::<Result<Vec<_>>>()?;
    Spectrum::new(SpectrumKind::Transmission, grid.to_vec(), values)
}

/// Main-ring intracavity density of states `|a1|²` for a unit drive,
/// optionally scaled to a peak of 1. An all-zero response (κ = 0) stays zero.
pub fn dos_spectrum(params: &SystemParams, grid: &[f64], normalize: bool) -> Result<Spectrum> {
    params.validate()?;
    validate_grid(grid)?;
    let one = Complex64::new(1.0, 0.0);
    let mut values = grid
        .iter()
        .map(|&w| steady_state_response(params, w, one).map(|r| r.a1.norm_sqr()))
        .collect::<Result<Vec<_>>>()?;
    if normalize {
        let peak = values.iter().cloned().fold(0.0_f64, f64::max);
        if peak > 0.0 {
            values.iter_mut().for_each(|v| *v /= peak);
        }
    }
    Spectrum::new(SpectrumKind::Dos, grid.to_vec(), values)
}

/// Transmission of the multi-resonance band.
///
/// Main resonance `m ∈ [-n_modes, n_modes]` sits at `ω1 + m·fsr1` and couples
/// (with the rates of `params_base`) to the nearest auxiliary line at
/// `ω1 + alignment_offset + tuning + k·fsr2`. Main resonances are not coupled
/// to each other. An auxiliary line shared by several main resonances is
/// solved once with all of them attached, so its own bus dip is counted once;
/// with a one-to-one pairing this is exactly the product of two-mode
/// transmissions. `params_base.delta_omega` is ignored: per-mode detunings
/// come from the geometry.
pub fn comb_spectrum(
    params_base: &SystemParams,
    geom: &DeviceGeometry,
    tuning: f64,
    grid: &[f64],
) -> Result<Spectrum> {
    params_base.validate()?;
    geom.validate()?;
    validate_grid(grid)?;
    if !tuning.is_finite() {
        return Err(Error::invalid("tuning", "must be finite"));
    }
    let values = comb_transmission(params_base, geom, tuning, grid)?;
    Spectrum::new(SpectrumKind::Transmission, grid.to_vec(), values)
}

/// Unvalidated comb evaluation, shared with the spectrum fitter.
pub(crate) fn comb_transmission(
    p: &SystemParams,
    geom: &DeviceGeometry,
    tuning: f64,
    grid: &[f64],
) -> Result<Vec<f64>> {
    comb_transmission_paired(p, geom, tuning, tuning, grid)
}

/// As [`comb_transmission`], with main modes paired as they would be at
/// `pairing_tuning` rather than at `tuning`.
pub(crate) fn comb_transmission_paired(
    p: &SystemParams,
    geom: &DeviceGeometry,
    tuning: f64,
    pairing_tuning: f64,
    grid: &[f64],
) -> Result<Vec<f64>> {
    let n = geom.n_modes as i64;
    let mut groups: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for m in -n..=n {
        groups
            .entry(geom.nearest_aux(pairing_tuning, m))
            .or_default()
            .push(geom.main_line(p.omega1, m));
    }
    let groups: Vec<(f64, Vec<f64>)> = groups
        .into_iter()
        .map(|(k, mains)| (geom.aux_line(p.omega1, tuning, k), mains))
        .collect();

    let kappa2 = p.kappa * p.kappa;
    let half_aux = (p.gamma2 + p.gamma_c) / 2.0;
    let half_main = p.gamma1 / 2.0;
    grid.iter()
        .map(|&w| {
            let mut total = 1.0;
            for (aux, mains) in &groups {
                let mut denom = Complex64::new(half_aux, aux - w);
                let mut blocked = false;
                for &main in mains {
                    let d1 = Complex64::new(half_main, main - w);
                    if d1 == Complex64::new(0.0, 0.0) {
                        // lossless main mode on resonance pins a2 to zero
                        if kappa2 > 0.0 {
                            blocked = true;
                        }
                        continue;
                    }
                    denom += kappa2 / d1;
                }
                if blocked {
                    continue;
                }
                if denom == Complex64::new(0.0, 0.0) {
                    return Err(Error::SingularSystem { drive_freq: w });
                }
                total *= (1.0 - p.gamma_c / denom).norm_sqr();
            }
            Ok(total)
        })
        .collect()
}

/// Evenly spaced grid of `points` values from `start` to `stop` inclusive.
pub fn linear_grid(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (points - 1) as f64;
            (0..points).map(|i| start + step * i as f64).collect()
        }
    }
}
