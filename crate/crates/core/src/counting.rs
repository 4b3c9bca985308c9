//! Analysis of detector timestamp records: start-stop coincidence
//! histograms, coincidence-peak widths, CAR, fringe visibility and heralded
//! second-order correlation.

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lifetime::deconvolve_jitter;
use crate::optimize::{levenberg_marquardt, LmOptions};
use crate::timestamps::TimestampStream;
use crate::units::PS;

/// Visibility above which a two-photon fringe violates a Bell inequality.
pub const BELL_THRESHOLD: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    /// s.
    pub bin_width: f64,
    /// Bin centres of `t_stop - t_start`, s.
    pub offsets: Vec<f64>,
    pub counts: Vec<u64>,
    pub start_channel: String,
    pub stop_channel: String,
    pub total_starts: u64,
}

impl CoincidenceHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Index of the zero-offset bin.
    pub fn center_index(&self) -> usize {
        self.counts.len() / 2
    }
}

fn whole_ps(field: &'static str, seconds: f64) -> Result<i64> {
    let ps = (seconds / PS).round();
    if !(ps.is_finite() && ps >= 1.0 && ps < 2f64.powi(62)) {
        return Err(Error::invalid(field, format!("must be at least 1 ps, got {seconds:e} s")));
    }
    Ok(ps as i64)
}

/// Histogram of every (start, stop) pair with `|t_stop - t_start| ≤ span/2`.
///
/// Bins have width `bin_width` and are centred on integer multiples of it.
/// A difference exactly halfway between two centres goes to the even bin
/// index: the rule is odd in `Δt`, so swapping start and stop mirrors the
/// histogram exactly, and every bin stays symmetric about its centre.
/// Both widths are rounded to whole picoseconds.
pub fn coincidence_histogram(
    start: &TimestampStream,
    stop: &TimestampStream,
    bin_width: f64,
    span: f64,
) -> Result<CoincidenceHistogram> {
    let b = whole_ps("bin_width", bin_width)?;
    let span_ps = whole_ps("span", span)?;
    if span_ps < b {
        return Err(Error::invalid("span", "must be at least one bin wide"));
    }
    let k_max = (span_ps + b) / (2 * b);
    let n_bins = (2 * k_max + 1) as usize;
    let mut counts = vec![0u64; n_bins];
    let stops = &stop.times_ps;
    let mut lo = 0usize;
    for &t in &start.times_ps {
        let t = t as i128;
        let span = span_ps as i128;
        while lo < stops.len() && 2 * (stops[lo] as i128 - t) < -span {
            lo += 1;
        }
        for &s in &stops[lo..] {
            let d = s as i128 - t;
            if 2 * d > span {
                break;
            }
            counts[(bin_index(d, b as i128) + k_max as i128) as usize] += 1;
        }
    }
    let offsets = (-k_max..=k_max).map(|k| (k * b) as f64 * PS).collect();
    Ok(CoincidenceHistogram {
        bin_width: b as f64 * PS,
        offsets,
        counts,
        start_channel: start.channel.clone(),
        stop_channel: stop.channel.clone(),
        total_starts: start.len() as u64,
    })
}

/// `round(d / b)` with ties to even.
fn bin_index(d: i128, b: i128) -> i128 {
    let (q, r) = (d.abs() / b, d.abs() % b);
    let up = 2 * r > b || (2 * r == b && q % 2 == 1);
    d.signum() * (q + up as i128)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakFit {
    /// RMS width of the background-subtracted peak, s. For an exponential
    /// decay pair convolved with Gaussian jitters this is
    /// `sqrt(2τ² + J1² + J2²)`.
    pub tau_1e: f64,
    /// 1/e half-width of the fitted two-sided exponential, s.
    pub decay: f64,
    /// Fitted peak height above the baseline, counts per bin.
    pub amplitude: f64,
    /// Counts per bin far from the peak.
    pub baseline: f64,
    /// Fitted peak position, s.
    pub center: f64,
}

/// Peak must exceed the median bin by this factor.
const PEAK_DOMINANCE: f64 = 5.0;
/// Half-width, in fitted decay lengths, over which the peak moments are taken.
const MOMENT_RANGE: f64 = 12.0;

/// Fits `A·exp(-|Δt - t0|/w) + B` around the peak and measures the RMS width
/// of the peak over ±12w, with `B` re-estimated from the bins outside.
pub fn fit_double_exponential(hist: &CoincidenceHistogram) -> Result<PeakFit> {
    let n = hist.counts.len();
    let counts: Vec<f64> = hist.counts.iter().map(|&c| c as f64).collect();
    let mut sorted = counts.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[n / 2];
    let (imax, cmax) = counts
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, &c)| if c > acc.1 { (i, c) } else { acc });
    if cmax <= 0.0 || cmax < PEAK_DOMINANCE * median {
        return Err(Error::NoPeak(format!("maximum {cmax} counts against a median of {median}")));
    }

    let b = hist.bin_width;
    let level = median + (cmax - median) / std::f64::consts::E;
    let left = (0..imax).rev().find(|&k| counts[k] < level).unwrap_or(0);
    let right = (imax..n).find(|&k| counts[k] < level).unwrap_or(n - 1);
    let w0 = ((right - left) as f64 * b / 2.0).max(b);
    let reach = ((5.0 * w0 / b).ceil() as usize).max(5);
    let lo = imax.saturating_sub(reach);
    let hi = (imax + reach).min(n - 1);
    let x: Vec<f64> = (lo..=hi).map(|k| (hist.offsets[k] - hist.offsets[imax]) / b).collect();
    let y: Vec<f64> = counts[lo..=hi].iter().map(|c| c / cmax).collect();

    // parameters: t0 and ln w in bins, amplitude and baseline relative to the peak bin
    let residuals = |p: &[f64]| {
        let w = p[1].exp();
        Some(x.iter().zip(&y).map(|(x, y)| p[2] * (-(x - p[0]).abs() / w).exp() + p[3] - y).collect())
    };
    let start = [0.0, (w0 / b).ln(), 1.0 - median / cmax, median / cmax];
    let fit = levenberg_marquardt(residuals, &start, &LmOptions::default())?;
    let p = &fit.params;
    let center = hist.offsets[imax] + p[0] * b;
    let decay = p[1].exp() * b;
    let amplitude = p[2] * cmax;

    let inside = |k: usize| (hist.offsets[k] - center).abs() <= MOMENT_RANGE * decay;
    let wings: Vec<f64> = (0..n).filter(|&k| !inside(k)).map(|k| counts[k]).collect();
    let baseline = if wings.is_empty() {
        p[3] * cmax
    } else {
        wings.iter().sum::<f64>() / wings.len() as f64
    };
    let (mut s0, mut s1) = (0.0, 0.0);
    for k in (0..n).filter(|&k| inside(k)) {
        s0 += counts[k] - baseline;
        s1 += (counts[k] - baseline) * hist.offsets[k];
    }
    if s0 <= 0.0 {
        return Err(Error::NoPeak("no counts above the baseline".into()));
    }
    let mean = s1 / s0;
    let s2: f64 = (0..n)
        .filter(|&k| inside(k))
        .map(|k| (counts[k] - baseline) * (hist.offsets[k] - mean).powi(2))
        .sum();
    // remove the variance added by binning
    let variance = s2 / s0 - b * b / 12.0;
    if variance <= 0.0 {
        return Err(Error::NoPeak("peak narrower than one bin".into()));
    }
    Ok(PeakFit {
        tau_1e: variance.sqrt(),
        decay,
        amplitude,
        baseline,
        center,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarResult {
    pub car: f64,
    pub car_sigma: f64,
    /// Counts with `|Δt| ≤ peak_window`.
    pub peak_counts: u64,
    /// Mean counts of an accidental window as wide as the peak window.
    pub accidental_mean: f64,
    /// Set when no accidentals were seen and one count was assumed, making
    /// `car` a lower bound.
    pub lower_bound: bool,
}

/// Coincidence-to-accidental ratio. The peak is every bin within
/// `±peak_window` of zero; accidentals are every bin at `|Δt| ≥
/// accidental_window`, rescaled to the width of the peak region.
/// With `allow_lower_bound`, an empty accidental region is treated as one
/// count instead of failing.
pub fn car(
    hist: &CoincidenceHistogram,
    peak_window: f64,
    accidental_window: f64,
    allow_lower_bound: bool,
) -> Result<CarResult> {
    if !(peak_window > 0.0) {
        return Err(Error::invalid("peak_window", "must be > 0"));
    }
    if !(accidental_window > peak_window) {
        return Err(Error::invalid("accidental_window", "must lie outside the peak window"));
    }
    let tol = 1e-6 * hist.bin_width;
    let edge = hist.offsets.last().copied().unwrap_or(0.0);
    if peak_window > edge + hist.bin_width / 2.0 {
        return Err(Error::invalid("peak_window", "extends beyond the histogram"));
    }
    let (mut peak, mut n_peak, mut acc, mut n_acc) = (0u64, 0usize, 0u64, 0usize);
    for (o, &c) in hist.offsets.iter().zip(&hist.counts) {
        if o.abs() <= peak_window + tol {
            peak += c;
            n_peak += 1;
        } else if o.abs() >= accidental_window - tol {
            acc += c;
            n_acc += 1;
        }
    }
    if n_acc == 0 {
        return Err(Error::invalid("accidental_window", "no histogram bins lie beyond it"));
    }
    let lower_bound = acc == 0;
    if lower_bound && !allow_lower_bound {
        return Err(Error::ZeroAccidentals);
    }
    let acc_counts = acc.max(1) as f64;
    let accidental_mean = acc_counts * n_peak as f64 / n_acc as f64;
    let p = peak as f64;
    let car = p / accidental_mean;
    // independent Poisson errors on the peak and accidental sums
    let car_sigma = (p + p * p / acc_counts).sqrt() / accidental_mean;
    Ok(CarResult {
        car,
        car_sigma,
        peak_counts: peak,
        accidental_mean,
        lower_bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimeAnalysis {
    pub fit: PeakFit,
    /// Lifetime after removing the channel jitters from `fit.tau_1e`, s.
    pub tau: f64,
    pub car: CarResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub bin_width: f64,
    pub span: f64,
    pub jitter_start: f64,
    pub jitter_stop: f64,
    /// Peak half-window in units of the fitted width.
    pub peak_factor: f64,
    /// Start of the accidental region in units of the fitted width.
    pub accidental_factor: f64,
    pub allow_lower_bound: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            bin_width: 10.0 * PS,
            span: 10_000.0 * PS,
            jitter_start: 0.0,
            jitter_stop: 0.0,
            peak_factor: 3.0,
            accidental_factor: 10.0,
            allow_lower_bound: false,
        }
    }
}

/// Histogram, peak width, jitter-corrected lifetime and CAR in one pass.
pub fn analyze_streams(
    start: &TimestampStream,
    stop: &TimestampStream,
    config: &AnalysisConfig,
) -> Result<(CoincidenceHistogram, LifetimeAnalysis)> {
    let hist = coincidence_histogram(start, stop, config.bin_width, config.span)?;
    let fit = fit_double_exponential(&hist)?;
    let tau = deconvolve_jitter(fit.tau_1e, config.jitter_start, config.jitter_stop)?;
    let car = car(
        &hist,
        config.peak_factor * fit.tau_1e,
        config.accidental_factor * fit.tau_1e,
        config.allow_lower_bound,
    )?;
    Ok((hist, LifetimeAnalysis { fit, tau, car }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityResult {
    pub visibility: f64,
    pub sigma: f64,
    /// `O·V` of `C(φ) = O(1 + V cos(φ - φ0))`.
    pub fit_amplitude: f64,
    pub fit_offset: f64,
    pub fit_phase: f64,
    pub n_trials: usize,
}

/// Least-squares `C = O + a cos φ + b sin φ`, returned as (O, amplitude, φ0).
fn fit_fringe(phases: &[f64], counts: &[f64]) -> Result<(f64, f64, f64)> {
    let mut normal = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for (&phi, &c) in phases.iter().zip(counts) {
        let row = Vector3::new(1.0, phi.cos(), phi.sin());
        normal += row * row.transpose();
        rhs += row * c;
    }
    let sol = normal
        .cholesky()
        .map(|ch| ch.solve(&rhs))
        .ok_or_else(|| Error::DegenerateFit("phase settings do not determine a sinusoid".into()))?;
    let (o, a, b) = (sol[0], sol[1], sol[2]);
    if !(o > 0.0) {
        return Err(Error::DegenerateFit(format!("fitted offset {o} is not positive")));
    }
    Ok((o, a.hypot(b), b.atan2(a)))
}

/// Visibility of a two-photon fringe from raw coincidence counts, with the
/// standard deviation over `n_trials` Poisson resamplings of the data.
/// Trial `k` draws from its own stream of the seeded generator.
pub fn visibility_fit(phases: &[f64], coincidences: &[u64], n_trials: usize, seed: u64) -> Result<VisibilityResult> {
    if phases.len() != coincidences.len() {
        return Err(Error::invalid("coincidences", "must have one count per phase"));
    }
    if phases.len() < 5 {
        return Err(Error::invalid("phases", "need at least 5 phase settings"));
    }
    if phases.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("phases", "must be finite"));
    }
    let range = phases.iter().cloned().fold(f64::MIN, f64::max) - phases.iter().cloned().fold(f64::MAX, f64::min);
    if range < std::f64::consts::PI {
        return Err(Error::invalid("phases", "must span at least π"));
    }
    if coincidences.iter().all(|&c| c == coincidences[0]) {
        return Err(Error::DegenerateFit("all coincidence counts are equal".into()));
    }
    let observed: Vec<f64> = coincidences.iter().map(|&c| c as f64).collect();
    let (offset, amplitude, phase) = fit_fringe(phases, &observed)?;

    let mut trial_v = Vec::with_capacity(n_trials);
    let mut resampled = vec![0.0; observed.len()];
    for trial in 0..n_trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64);
        for (r, &c) in resampled.iter_mut().zip(&observed) {
            *r = if c > 0.0 { Poisson::new(c).unwrap().sample(&mut rng) } else { 0.0 };
        }
        if let Ok((o, a, _)) = fit_fringe(phases, &resampled) {
            trial_v.push(a / o);
        }
    }
    let sigma = if trial_v.len() > 1 {
        let m = trial_v.iter().sum::<f64>() / trial_v.len() as f64;
        (trial_v.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (trial_v.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(VisibilityResult {
        visibility: amplitude / offset,
        sigma,
        fit_amplitude: amplitude,
        fit_offset: offset,
        fit_phase: phase,
        n_trials,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellCheck {
    pub violates: bool,
    pub margin: f64,
}

/// Strict comparison of the visibility against 1/√2.
pub fn bell_threshold_check(result: &VisibilityResult) -> BellCheck {
    BellCheck {
        violates: result.visibility > BELL_THRESHOLD,
        margin: result.visibility - BELL_THRESHOLD,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Result {
    /// s.
    pub delays: Vec<f64>,
    pub g2: Vec<f64>,
    pub g2_zero: f64,
    pub sigma_zero: f64,
}

fn has_event_within(times: &[u64], center: i128, half_window: i128) -> bool {
    let lo = center - half_window;
    let i = times.partition_point(|&t| (t as i128) < lo);
    i < times.len() && (times[i] as i128) <= center + half_window
}

struct G2Counts {
    heralds: u64,
    h1: u64,
    h2: u64,
    triples: u64,
}

fn g2_counts(herald: &[u64], arm1: &[u64], arm2: &[u64], half_window: i128, delay: i128) -> G2Counts {
    let mut c = G2Counts {
        heralds: herald.len() as u64,
        h1: 0,
        h2: 0,
        triples: 0,
    };
    for &t in herald {
        let t = t as i128;
        let one = has_event_within(arm1, t, half_window);
        let two = has_event_within(arm2, t + delay, half_window);
        c.h1 += one as u64;
        c.h2 += two as u64;
        c.triples += (one && two) as u64;
    }
    c
}

/// Heralded `g²(d) = N_h12(d)·N_h / (N_h1·N_h2(d))`, counting each herald
/// once per arm if that arm has any event within `±coincidence_window/2`
/// (arm 2 shifted by `d`). `delays` must be symmetric about zero.
///
/// `sigma_zero` propagates Poisson errors on the four counts; with no
/// threefolds at zero delay one count is assumed for the error.
pub fn heralded_g2(
    herald: &TimestampStream,
    arm1: &TimestampStream,
    arm2: &TimestampStream,
    coincidence_window: f64,
    delays: &[f64],
) -> Result<G2Result> {
    let window = whole_ps("coincidence_window", coincidence_window)?;
    let half = (window / 2) as i128;
    let to_ps = |d: f64| -> Result<i128> {
        if !d.is_finite() {
            return Err(Error::invalid("delays", "must be finite"));
        }
        Ok((d / PS).round() as i128)
    };
    let delays_ps = delays.iter().map(|&d| to_ps(d)).collect::<Result<Vec<_>>>()?;
    if delays_ps.iter().any(|d| !delays_ps.contains(&-d)) {
        return Err(Error::invalid("delays", "must be symmetric about zero"));
    }
    let g2_of = |c: &G2Counts, d: i128| -> Result<f64> {
        if c.h1 == 0 || c.h2 == 0 {
            return Err(Error::InsufficientStatistics(format!(
                "no herald-arm coincidences at delay {} ps (arm 1: {}, arm 2: {})",
                d, c.h1, c.h2
            )));
        }
        Ok(c.triples as f64 * c.heralds as f64 / (c.h1 as f64 * c.h2 as f64))
    };
    let (h, a1, a2) = (&herald.times_ps[..], &arm1.times_ps[..], &arm2.times_ps[..]);
    let g2 = delays_ps
        .iter()
        .map(|&d| g2_of(&g2_counts(h, a1, a2, half, d), d))
        .collect::<Result<Vec<_>>>()?;
    let zero = g2_counts(h, a1, a2, half, 0);
    let g2_zero = g2_of(&zero, 0)?;
    let scale = zero.heralds as f64 / (zero.h1 as f64 * zero.h2 as f64);
    let sigma_zero = (scale * scale * zero.triples.max(1) as f64
        + g2_zero * g2_zero * (1.0 / zero.heralds as f64 + 1.0 / zero.h1 as f64 + 1.0 / zero.h2 as f64))
        .sqrt();
    Ok(G2Result {
        delays: delays_ps.iter().map(|&d| d as f64 * PS).collect(),
        g2,
        g2_zero,
        sigma_zero,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(name: &str, t: &[u64]) -> TimestampStream {
        TimestampStream::new(name, t.to_vec()).unwrap()
    }

    fn hist_from(counts: Vec<u64>, bin_ps: i64) -> CoincidenceHistogram {
        let k = (counts.len() / 2) as i64;
        CoincidenceHistogram {
            bin_width: bin_ps as f64 * PS,
            offsets: (-k..=k).map(|i| (i * bin_ps) as f64 * PS).collect(),
            counts,
            start_channel: "a".into(),
            stop_channel: "b".into(),
            total_starts: 0,
        }
    }

    #[test]
    fn single_pair_lands_in_nearest_bin() {
        let h = coincidence_histogram(&stream("i", &[0]), &stream("s", &[100]), 50.0 * PS, 1000.0 * PS).unwrap();
        assert_eq!(h.total(), 1);
        let k = h.counts.iter().position(|&c| c == 1).unwrap();
        assert!((h.offsets[k] - 100.0 * PS).abs() < 1e-18);
        assert!(h.offsets.windows(2).all(|w| ((w[1] - w[0]) - h.bin_width).abs() < 1e-18));
        assert_eq!(h.counts.len(), h.offsets.len());
    }

    #[test]
    fn half_bin_ties_round_to_even_index() {
        let h = coincidence_histogram(
            &stream("a", &[1000]),
            &stream("b", &[925, 975, 1025, 1075]),
            50.0 * PS,
            400.0 * PS,
        )
        .unwrap();
        let c = h.center_index();
        assert_eq!(h.counts[c], 2);
        assert_eq!(h.counts[c + 2], 1);
        assert_eq!(h.counts[c - 2], 1);
        assert_eq!(h.total(), 4);
    }

    #[test]
    fn span_edge_is_inclusive() {
        let h = coincidence_histogram(&stream("a", &[500]), &stream("b", &[0, 1000, 1001]), 10.0 * PS, 1000.0 * PS)
            .unwrap();
        assert_eq!(h.total(), 2);
        assert_eq!(*h.counts.first().unwrap(), 1);
        assert_eq!(*h.counts.last().unwrap(), 1);
    }

    #[test]
    fn empty_streams_give_zero_histogram() {
        let h = coincidence_histogram(&stream("a", &[]), &stream("b", &[]), 10.0 * PS, 100.0 * PS).unwrap();
        assert_eq!(h.total(), 0);
        assert!(coincidence_histogram(&stream("a", &[]), &stream("b", &[]), 0.1 * PS, 100.0 * PS).is_err());
        assert!(coincidence_histogram(&stream("a", &[]), &stream("b", &[]), 10.0 * PS, 5.0 * PS).is_err());
    }

    #[test]
    fn laplace_histogram_width() {
        let scale = 100.0;
        let counts: Vec<u64> = (-2000i64..=2000)
            .map(|k| (1e6 * (-(k as f64).abs() / scale).exp()).round() as u64 + 20)
            .collect();
        let h = hist_from(counts, 1);
        let f = fit_double_exponential(&h).unwrap();
        assert!((f.decay / PS - scale).abs() < 1.0, "{f:?}");
        // RMS width of a two-sided exponential is √2 times its scale
        assert!((f.tau_1e / PS - 2f64.sqrt() * scale).abs() < 0.02 * 2f64.sqrt() * scale, "{f:?}");
        assert!((f.baseline - 20.0).abs() < 1.0);
        assert!(f.center.abs() < 0.5 * PS);
    }

    #[test]
    fn flat_histogram_has_no_peak() {
        let h = hist_from(vec![10; 101], 10);
        assert!(matches!(fit_double_exponential(&h), Err(Error::NoPeak(_))));
        let h = hist_from(vec![0; 101], 10);
        assert!(matches!(fit_double_exponential(&h), Err(Error::NoPeak(_))));
    }

    #[test]
    fn car_of_constructed_histograms() {
        let uniform = hist_from(vec![7; 201], 10);
        let r = car(&uniform, 30.0 * PS, 300.0 * PS, false).unwrap();
        assert!((r.car - 1.0).abs() < 1e-12);

        // nine peak bins holding 1530 counts over a floor of 10 per bin
        let mut h = hist_from(vec![10u64; 201], 10);
        let c = h.center_index();
        for k in c - 4..=c + 4 {
            h.counts[k] = 170;
        }
        let r = car(&h, 45.0 * PS, 300.0 * PS, false).unwrap();
        assert!((r.car - 17.0).abs() < 1e-12);
        assert_eq!(r.peak_counts, 1530);
        assert!((r.car_sigma - 17.0 * (1.0f64 / 1530.0 + 1.0 / 1420.0).sqrt()).abs() < 1e-9);

        let mut empty = hist_from(vec![0; 101], 10);
        empty.counts[50] = 5;
        assert!(matches!(car(&empty, 20.0 * PS, 200.0 * PS, false), Err(Error::ZeroAccidentals)));
        let lb = car(&empty, 20.0 * PS, 200.0 * PS, true).unwrap();
        assert!(lb.lower_bound);
        assert!(car(&uniform, 30.0 * PS, 20.0 * PS, false).is_err());
    }

    #[test]
    fn perfect_fringe() {
        let phases: Vec<f64> = (0..20).map(|k| k as f64 * std::f64::consts::PI / 10.0).collect();
        let counts: Vec<u64> = phases.iter().map(|p| (100.0 * (1.0 + p.cos())).round() as u64).collect();
        let r = visibility_fit(&phases, &counts, 200, 1).unwrap();
        assert!((r.visibility - 1.0).abs() < 2e-3, "{r:?}");
        assert_eq!(r, visibility_fit(&phases, &counts, 200, 1).unwrap());
        assert!(visibility_fit(&phases, &[5; 20], 10, 1).is_err());
        assert!(visibility_fit(&phases[..4], &counts[..4], 10, 1).is_err());
        assert!(visibility_fit(&phases[..6], &counts[..6], 10, 1).is_err());
    }

    #[test]
    fn bell_threshold_is_strict() {
        let v = |visibility| VisibilityResult {
            visibility,
            sigma: 0.0,
            fit_amplitude: 0.0,
            fit_offset: 1.0,
            fit_phase: 0.0,
            n_trials: 0,
        };
        let c = bell_threshold_check(&v(0.871));
        assert!(c.violates);
        assert!((c.margin - 0.1639).abs() < 1e-4);
        assert!(!bell_threshold_check(&v(0.7071)).violates);
        assert!(!bell_threshold_check(&v(0.5)).violates);
    }

    #[test]
    fn g2_counts_per_herald() {
        let h = stream("h", &[1000, 5000, 9000]);
        let a1 = stream("1", &[1010, 5005, 20000]);
        let a2 = stream("2", &[995, 9100, 30000]);
        let r = heralded_g2(&h, &a1, &a2, 100.0 * PS, &[0.0]).unwrap();
        // N_h = 3, N_h1 = 2, N_h2 = 2 (9100 is inside ±50? no: 100 ps away) -> N_h2 = 1
        assert!((r.g2_zero - 1.0 * 3.0 / (2.0 * 1.0)).abs() < 1e-12);
        assert!(heralded_g2(&h, &a1, &stream("2", &[]), 100.0 * PS, &[0.0]).is_err());
        assert!(heralded_g2(&h, &a1, &a2, 100.0 * PS, &[0.0, 1e-9]).is_err());
    }
}
