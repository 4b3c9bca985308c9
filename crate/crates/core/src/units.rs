//! Unit conversions used at ingestion and serialization boundaries.
//!
//! Inside the model every frequency, detuning and rate is an angular rate in
//! s⁻¹ (the quantity multiplying `t` in `exp(-iωt)`). Files and wavelength
//! inputs use optical frequency in Hz; the two differ by 2π and the helpers
//! here are the only place that factor appears.

use std::f64::consts::TAU;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub const GHZ: f64 = 1e9;
pub const PS: f64 = 1e-12;

/// Optical frequency (Hz) of a vacuum wavelength in nm: f = c/λ.
pub fn hz_from_nm(lambda_nm: f64) -> f64 {
    SPEED_OF_LIGHT / (lambda_nm * 1e-9)
}

pub fn nm_from_hz(freq_hz: f64) -> f64 {
    SPEED_OF_LIGHT / freq_hz * 1e9
}

pub fn angular_from_hz(freq_hz: f64) -> f64 {
    freq_hz * TAU
}

pub fn hz_from_angular(omega: f64) -> f64 {
    omega / TAU
}

/// Model-axis frequency for a wavelength in nm.
pub fn angular_from_nm(lambda_nm: f64) -> f64 {
    angular_from_hz(hz_from_nm(lambda_nm))
}

/// Frequency spacing (Hz) of a wavelength spacing `delta_nm` around `center_nm`.
pub fn hz_spacing_from_nm(center_nm: f64, delta_nm: f64) -> f64 {
    SPEED_OF_LIGHT * delta_nm * 1e-9 / (center_nm * 1e-9).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavelength_round_trip() {
        let f = hz_from_nm(1536.9);
        assert!((nm_from_hz(f) - 1536.9).abs() < 1e-9);
        assert!((f - 195.06e12).abs() < 0.01e12);
    }

    #[test]
    fn fsr_of_main_ring_is_about_100_ghz() {
        let fsr = hz_spacing_from_nm(1536.9, 0.78);
        assert!((fsr / GHZ - 99.0).abs() < 0.5, "{fsr}");
    }
}
