//! Synthetic detector records for a cavity-enhanced pair source, and
//! count-level simulators for two-photon interference and heralded HBT runs.
//!
//! All generators are deterministic in their seed. Times are quantised to
//! 1 ps with ties to even.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tcmt::{dos_spectrum, linear_grid, SystemParams};
use crate::timestamps::TimestampStream;
use crate::units::PS;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSourceConfig {
    /// Pairs per second per mW² of pump.
    pub pgr_coefficient: f64,
    /// mW.
    pub pump_power: f64,
    pub tau_signal: f64,
    pub tau_idler: f64,
    pub eff_signal: f64,
    pub eff_idler: f64,
    /// Dark-count rates, s⁻¹.
    pub dark_signal: f64,
    pub dark_idler: f64,
    /// Gaussian standard deviation of each channel's timing response, s.
    pub jitter_signal: f64,
    pub jitter_idler: f64,
    pub duration: f64,
    pub seed: u64,
}

impl PairSourceConfig {
    pub fn validate(&self) -> Result<()> {
        let non_negative = [
            ("pgr_coefficient", self.pgr_coefficient),
            ("pump_power", self.pump_power),
            ("tau_signal", self.tau_signal),
            ("tau_idler", self.tau_idler),
            ("dark_signal", self.dark_signal),
            ("dark_idler", self.dark_idler),
            ("jitter_signal", self.jitter_signal),
            ("jitter_idler", self.jitter_idler),
        ];
        for (field, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(field, format!("must be finite and >= 0, got {v}")));
            }
        }
        for (field, v) in [("eff_signal", self.eff_signal), ("eff_idler", self.eff_idler)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(field, format!("must lie in [0, 1], got {v}")));
            }
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::invalid("duration", format!("must be finite and > 0, got {}", self.duration)));
        }
        if self.duration / PS > 2f64.powi(62) {
            return Err(Error::invalid("duration", "does not fit the picosecond time base"));
        }
        Ok(())
    }
}

/// Pair generation rate `coeff · P²`, s⁻¹.
pub fn pair_rate(config: &PairSourceConfig) -> f64 {
    config.pgr_coefficient * config.pump_power * config.pump_power
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedRate {
    pub rate: f64,
    /// `∫DOS_s · ∫DOS_i / (∫DOS_ref)²`.
    pub multiplier: f64,
    pub warnings: Vec<String>,
}

/// Fraction of the peak that the density of states may keep at the edge of
/// the integration window before a warning is raised.
const EDGE_TOLERANCE: f64 = 1e-3;
const MAX_INTEGRATION_POINTS: usize = 2_000_001;

/// Integrated main-ring density of states over ±10 total linewidths around
/// the two resonances. Returns the integral and, if the window is too
/// narrow, a warning.
fn integrated_dos(params: &SystemParams, label: &str) -> Result<(f64, Option<String>)> {
    params.validate()?;
    let center = params.omega1 + params.delta_omega / 2.0;
    let half = 10.0 * params.total_decay() + params.delta_omega.abs() / 2.0;
    let narrowest = [params.gamma1, params.gamma2 + params.gamma_c]
        .into_iter()
        .filter(|g| *g > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !narrowest.is_finite() || half <= 0.0 {
        return Err(Error::invalid("params", format!("{label} resonances have no linewidth to integrate over")));
    }
    let wanted = (2.0 * half / (narrowest / 20.0)).ceil() as usize;
    // Simpson needs an odd point count
    let points = (wanted.clamp(1001, MAX_INTEGRATION_POINTS - 1) / 2) * 2 + 1;
    let grid = linear_grid(center - half, center + half, points);
    let dos = dos_spectrum(params, &grid, false)?;
    let h = grid[1] - grid[0];
    let v = &dos.values;
    let interior: f64 = v[1..points - 1]
        .iter()
        .enumerate()
        .map(|(i, x)| if i % 2 == 0 { 4.0 * x } else { 2.0 * x })
        .sum();
    let integral = h / 3.0 * (v[0] + interior + v[points - 1]);
    let peak = v.iter().cloned().fold(0.0, f64::max);
    let edge = v[0].max(v[points - 1]);
    let warning = (peak > 0.0 && edge > EDGE_TOLERANCE * peak)
        .then(|| format!("{label} DOS at the window edge is {:.2e} of its peak", edge / peak));
    Ok((integral, warning))
}

/// Pair rate scaled by the signal and idler main-ring density of states
/// relative to a reference configuration.
pub fn dos_weighted_rate(
    config: &PairSourceConfig,
    params_signal: &SystemParams,
    params_idler: &SystemParams,
    reference: &SystemParams,
) -> Result<WeightedRate> {
    config.validate()?;
    let mut warnings = Vec::new();
    let mut integrate = |p, label| {
        let (value, warning) = integrated_dos(p, label)?;
        warnings.extend(warning);
        Ok::<_, Error>(value)
    };
    let s = integrate(params_signal, "signal")?;
    let i = integrate(params_idler, "idler")?;
    let r = integrate(reference, "reference")?;
    if r <= 0.0 {
        return Err(Error::DivisionByZero("reference configuration has zero main-ring DOS"));
    }
    let multiplier = s * i / (r * r);
    Ok(WeightedRate {
        rate: pair_rate(config) * multiplier,
        multiplier,
        warnings,
    })
}

fn poisson<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
}

fn to_ps(t: f64) -> u64 {
    (t / PS).round_ties_even() as u64
}

/// Detection delay after pair creation: exponential escape plus Gaussian
/// jitter.
fn delay<R: Rng>(rng: &mut R, tau: f64, jitter: f64) -> f64 {
    let e: f64 = rng.sample(Exp1);
    let g: f64 = rng.sample(StandardNormal);
    tau * e + jitter * g
}

fn add_dark_counts<R: Rng>(rng: &mut R, times: &mut Vec<u64>, rate: f64, duration: f64) {
    let n = poisson(rng, rate * duration);
    times.extend((0..n).map(|_| to_ps(rng.random::<f64>() * duration)));
}

/// Signal and idler records of a continuously pumped source.
///
/// Every pair draws its creation time, both delays and both detection
/// decisions whether or not the photons are kept, so changing one
/// efficiency does not reshuffle the other channel's randomness.
pub fn generate_pair_streams(config: &PairSourceConfig) -> Result<(TimestampStream, TimestampStream)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let duration_ps = to_ps(config.duration);
    let n_pairs = poisson(&mut rng, pair_rate(config) * config.duration);
    let mut signal = Vec::new();
    let mut idler = Vec::new();
    for _ in 0..n_pairs {
        let created = rng.random::<f64>() * config.duration;
        let ts = created + delay(&mut rng, config.tau_signal, config.jitter_signal);
        let ti = created + delay(&mut rng, config.tau_idler, config.jitter_idler);
        let keep_s = rng.random::<f64>() < config.eff_signal;
        let keep_i = rng.random::<f64>() < config.eff_idler;
        if keep_s && ts >= 0.0 {
            signal.push(to_ps(ts));
        }
        if keep_i && ti >= 0.0 {
            idler.push(to_ps(ti));
        }
    }
    add_dark_counts(&mut rng, &mut signal, config.dark_signal, config.duration);
    add_dark_counts(&mut rng, &mut idler, config.dark_idler, config.duration);
    let finish = |mut v: Vec<u64>, name: &str| {
        v.retain(|&t| t <= duration_ps);
        v.sort_unstable();
        TimestampStream { channel: name.to_string(), times_ps: v }
    };
    Ok((finish(signal, "signal"), finish(idler, "idler")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FransonConfig {
    /// Interferometer phase, rad.
    pub phase: f64,
    pub visibility_true: f64,
    /// Coincidence rate at the fringe maximum, s⁻¹.
    pub base_rate: f64,
    pub singles_signal: f64,
    pub singles_idler: f64,
    pub integration_time: f64,
    pub seed: u64,
}

impl FransonConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.phase.is_finite() {
            return Err(Error::invalid("phase", "must be finite"));
        }
        if !(0.0..=1.0).contains(&self.visibility_true) {
            return Err(Error::invalid("visibility_true", format!("must lie in [0, 1], got {}", self.visibility_true)));
        }
        for (field, v) in [
            ("base_rate", self.base_rate),
            ("singles_signal", self.singles_signal),
            ("singles_idler", self.singles_idler),
            ("integration_time", self.integration_time),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(field, format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FransonCounts {
    pub signal_singles: u64,
    pub idler_singles: u64,
    pub coincidences: u64,
}

/// One phase setting of a two-photon fringe measurement:
/// coincidences ~ Poisson(R·T·(1 + V cos φ)/2), singles phase-independent.
pub fn simulate_franson(config: &FransonConfig) -> Result<FransonCounts> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let t = config.integration_time;
    let fringe = (1.0 + config.visibility_true * config.phase.cos()) / 2.0;
    let coincidences = poisson(&mut rng, config.base_rate * t * fringe);
    let signal_singles = poisson(&mut rng, config.singles_signal * t);
    let idler_singles = poisson(&mut rng, config.singles_idler * t);
    Ok(FransonCounts {
        signal_singles,
        idler_singles,
        coincidences,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HbtConfig {
    pub mean_pairs_per_window: f64,
    /// Probability that an idler photon goes to arm 1.
    pub splitter_ratio: f64,
    pub n_windows: u64,
    /// Spacing of the emission windows, s. All pairs of a window are
    /// created at its start.
    pub window_period: f64,
    pub seed: u64,
}

impl HbtConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_pairs_per_window.is_finite() && self.mean_pairs_per_window >= 0.0) {
            return Err(Error::invalid("mean_pairs_per_window", "must be finite and >= 0"));
        }
        if !(self.splitter_ratio > 0.0 && self.splitter_ratio < 1.0) {
            return Err(Error::invalid("splitter_ratio", format!("must lie in (0, 1), got {}", self.splitter_ratio)));
        }
        if !(self.window_period.is_finite() && self.window_period > 0.0) {
            return Err(Error::invalid("window_period", "must be finite and > 0"));
        }
        if self.n_windows as f64 * self.window_period / PS > 2f64.powi(62) {
            return Err(Error::invalid("n_windows", "run does not fit the picosecond time base"));
        }
        Ok(())
    }
}

/// Herald, arm-1 and arm-2 records of a heralded HBT measurement.
///
/// Signal photons herald; each idler goes to arm 1 with probability
/// `splitter_ratio`. Decay, jitter, efficiencies and dark counts come from
/// `source` (the idler values apply to both arms); its pump, duration and
/// seed are not used.
pub fn simulate_hbt(
    source: &PairSourceConfig,
    hbt: &HbtConfig,
) -> Result<(TimestampStream, TimestampStream, TimestampStream)> {
    source.validate()?;
    hbt.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(hbt.seed);
    let duration = hbt.n_windows as f64 * hbt.window_period;
    let mut herald = Vec::new();
    let mut arm1 = Vec::new();
    let mut arm2 = Vec::new();
    for w in 0..hbt.n_windows {
        let created = w as f64 * hbt.window_period;
        for _ in 0..poisson(&mut rng, hbt.mean_pairs_per_window) {
            let ts = created + delay(&mut rng, source.tau_signal, source.jitter_signal);
            let ti = created + delay(&mut rng, source.tau_idler, source.jitter_idler);
            let keep_s = rng.random::<f64>() < source.eff_signal;
            let keep_i = rng.random::<f64>() < source.eff_idler;
            let to_arm1 = rng.random::<f64>() < hbt.splitter_ratio;
            if keep_s && ts >= 0.0 {
                herald.push(to_ps(ts));
            }
            if keep_i && ti >= 0.0 {
                if to_arm1 {
                    arm1.push(to_ps(ti));
                } else {
                    arm2.push(to_ps(ti));
                }
            }
        }
    }
    add_dark_counts(&mut rng, &mut herald, source.dark_signal, duration);
    add_dark_counts(&mut rng, &mut arm1, source.dark_idler, duration);
    add_dark_counts(&mut rng, &mut arm2, source.dark_idler, duration);
    let end = to_ps(duration);
    let finish = |mut v: Vec<u64>, name: &str| {
        v.retain(|&t| t <= end);
        v.sort_unstable();
        TimestampStream { channel: name.to_string(), times_ps: v }
    };
    Ok((finish(herald, "herald"), finish(arm1, "arm1"), finish(arm2, "arm2")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::GHZ;

    fn source() -> PairSourceConfig {
        PairSourceConfig {
            pgr_coefficient: 1e4,
            pump_power: 2.0,
            tau_signal: 156.4 * PS,
            tau_idler: 156.4 * PS,
            eff_signal: 0.9,
            eff_idler: 0.9,
            dark_signal: 30.0,
            dark_idler: 30.0,
            jitter_signal: 74.5 * PS,
            jitter_idler: 53.5 * PS,
            duration: 0.1,
            seed: 7,
        }
    }

    #[test]
    fn quadratic_pump_law() {
        let mut c = source();
        c.pgr_coefficient = 1.0;
        assert_eq!(pair_rate(&c), 4.0);
        let before = pair_rate(&c);
        c.pump_power *= 2.0;
        assert_eq!(pair_rate(&c), 4.0 * before);
        let (lo, hi) = (0.25f64, 14.12f64);
        c.pump_power = lo;
        let r_lo = pair_rate(&c);
        c.pump_power = hi;
        let r_hi = pair_rate(&c);
        let slope = (r_hi / r_lo).ln() / (hi / lo).ln();
        assert!((slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        let mut c = source();
        c.eff_signal = 1.5;
        assert!(c.validate().is_err());
        let mut c = source();
        c.duration = 0.0;
        assert!(c.validate().is_err());
        let mut c = source();
        c.jitter_idler = -1.0;
        assert!(generate_pair_streams(&c).is_err());
    }

    #[test]
    fn zero_efficiency_gives_empty_streams() {
        let c = PairSourceConfig {
            eff_signal: 0.0,
            eff_idler: 0.0,
            dark_signal: 0.0,
            dark_idler: 0.0,
            ..source()
        };
        let (s, i) = generate_pair_streams(&c).unwrap();
        assert!(s.is_empty() && i.is_empty());
    }

    #[test]
    fn streams_are_deterministic_sorted_and_bounded() {
        let c = source();
        let (s1, i1) = generate_pair_streams(&c).unwrap();
        let (s2, i2) = generate_pair_streams(&c).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(i1, i2);
        let end = to_ps(c.duration);
        for s in [&s1, &i1] {
            assert!(s.times_ps.windows(2).all(|w| w[0] <= w[1]));
            assert!(s.times_ps.iter().all(|&t| t <= end));
        }
        let (s3, _) = generate_pair_streams(&PairSourceConfig { seed: 8, ..c }).unwrap();
        assert_ne!(s1, s3);
    }

    #[test]
    fn pair_counts_follow_the_rate() {
        let c = PairSourceConfig {
            pgr_coefficient: 1e5,
            pump_power: 1.0,
            eff_signal: 1.0,
            eff_idler: 1.0,
            dark_signal: 0.0,
            dark_idler: 0.0,
            duration: 1.0,
            ..source()
        };
        let (s, i) = generate_pair_streams(&c).unwrap();
        let sigma = 1e5f64.sqrt();
        // a few photons near the end of the run decay past it
        for n in [s.len(), i.len()] {
            assert!((n as f64 - 1e5).abs() < 5.0 * sigma, "{n}");
        }
    }

    #[test]
    fn rounding_is_half_even() {
        assert_eq!(to_ps(2.5 * PS), 2);
        assert_eq!(to_ps(3.5 * PS), 4);
        assert_eq!(to_ps(3.4 * PS), 3);
    }

    #[test]
    fn franson_counts() {
        let c = FransonConfig {
            phase: std::f64::consts::PI,
            visibility_true: 1.0,
            base_rate: 50.0,
            singles_signal: 40_100.0,
            singles_idler: 40_000.0,
            integration_time: 20.0,
            seed: 3,
        };
        let r = simulate_franson(&c).unwrap();
        assert_eq!(r.coincidences, 0);
        assert_eq!(r, simulate_franson(&c).unwrap());
        assert!((r.signal_singles as f64 - 802_000.0).abs() < 5.0 * 802_000f64.sqrt());
        let bad = FransonConfig { visibility_true: 1.2, ..c };
        assert!(simulate_franson(&bad).is_err());
    }

    #[test]
    fn hbt_fair_splitter() {
        let source = PairSourceConfig {
            dark_signal: 0.0,
            dark_idler: 0.0,
            ..source()
        };
        let hbt = HbtConfig {
            mean_pairs_per_window: 0.1,
            splitter_ratio: 0.5,
            n_windows: 200_000,
            window_period: 10e-9,
            seed: 11,
        };
        let (h, a1, a2) = simulate_hbt(&source, &hbt).unwrap();
        let n = (a1.len() + a2.len()) as f64;
        // binomial σ of the split
        assert!((a1.len() as f64 - n / 2.0).abs() < 5.0 * (n / 4.0).sqrt());
        let expected = 0.1 * 200_000.0 * 0.9;
        assert!((h.len() as f64 - expected).abs() < 5.0 * expected.sqrt());
        assert_eq!(simulate_hbt(&source, &hbt).unwrap().0, h);
        assert!(simulate_hbt(&source, &HbtConfig { splitter_ratio: 1.0, ..hbt }).is_err());
    }

    #[test]
    fn dos_weighting() {
        let c = source();
        let reference = SystemParams::fitted_device().with_delta_omega(400.0 * GHZ);
        let same = dos_weighted_rate(&c, &reference, &reference, &reference).unwrap();
        assert!((same.multiplier - 1.0).abs() < 1e-12);
        assert!(same.warnings.is_empty(), "{:?}", same.warnings);

        let aligned = SystemParams::fitted_device();
        let broad = dos_weighted_rate(&c, &aligned, &aligned, &reference).unwrap();
        assert!(broad.multiplier > 1.0, "{}", broad.multiplier);

        let dark = SystemParams { kappa: 0.0, ..aligned };
        let none = dos_weighted_rate(&c, &dark, &aligned, &reference).unwrap();
        assert_eq!(none.multiplier, 0.0);
        assert!(dos_weighted_rate(&c, &aligned, &aligned, &dark).is_err());
    }
}
