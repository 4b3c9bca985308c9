//! Command-line flags. Every numeric flag is optional so that a `--config`
//! file can supply it; defaults are applied after layering.
//!
//! Rates, detunings and tunings are given in GHz and enter the model as
//! s⁻¹ without a factor of 2π. Optical positions are given as vacuum
//! wavelengths in nm.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use ptring::units::{self, GHZ, PS};
use ptring::{DeviceGeometry, SystemParams};

#[derive(Parser, Debug)]
#[command(name = "ptring", version, about = "Coupled dual-microring photon-pair source: model, simulation and analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Transmission spectrum of the coupled-ring comb (or a single mode pair).
    #[command(allow_negative_numbers = true)]
    SimulateSpectrum(SimulateSpectrumArgs),
    /// Main-ring DOS maps against detuning in the split and merged regimes.
    #[command(allow_negative_numbers = true)]
    SweepDetuning(SweepDetuningArgs),
    /// Recover the coupled-ring parameters from a transmission spectrum.
    #[command(allow_negative_numbers = true)]
    FitSpectrum(FitSpectrumArgs),
    /// Lifetimes predicted from the ring parameters.
    #[command(allow_negative_numbers = true)]
    PredictLifetime(PredictLifetimeArgs),
    /// Signal and idler detection timestamps from a pair source.
    #[command(allow_negative_numbers = true)]
    SimulatePairs(SimulatePairsArgs),
    /// Coincidence histogram, lifetime and CAR of two timestamp files.
    #[command(allow_negative_numbers = true)]
    Analyze(AnalyzeArgs),
    /// Simulated two-photon fringe, visibility fit and Bell check.
    #[command(allow_negative_numbers = true)]
    Franson(FransonArgs),
    /// Simulated heralded HBT run and g² analysis.
    #[command(allow_negative_numbers = true)]
    G2(G2Args),
}

#[derive(ValueEnum, Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

fn skip_false(b: &bool) -> bool {
    !*b
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
pub struct ModelArgs {
    /// Wavelength of the reference main-ring resonance, nm [default: 1536.9]
    #[arg(long)]
    pub center_nm: Option<f64>,
    /// Main-ring intrinsic loss γ1, GHz [default: 3.0]
    #[arg(long)]
    pub gamma1_ghz: Option<f64>,
    /// Auxiliary-ring intrinsic loss γ2, GHz [default: 3.0]
    #[arg(long)]
    pub gamma2_ghz: Option<f64>,
    /// Auxiliary-ring bus coupling γc, GHz [default: 146.8]
    #[arg(long)]
    pub gamma_c_ghz: Option<f64>,
    /// Inter-ring coupling κ, GHz [default: 45.5]
    #[arg(long)]
    pub kappa_ghz: Option<f64>,
    /// Detuning ω2 − ω1, GHz [default: 0]
    #[arg(long, allow_hyphen_values = true)]
    pub delta_omega_ghz: Option<f64>,
}

impl ModelArgs {
    pub fn center_nm(&self) -> f64 {
        self.center_nm.unwrap_or(1536.9)
    }

    pub fn params(&self) -> SystemParams {
        let d = SystemParams::fitted_device();
        let ghz = |v: Option<f64>, default: f64| v.map_or(default, |x| x * GHZ);
        SystemParams {
            omega1: units::angular_from_nm(self.center_nm()),
            delta_omega: ghz(self.delta_omega_ghz, d.delta_omega),
            gamma1: ghz(self.gamma1_ghz, d.gamma1),
            gamma2: ghz(self.gamma2_ghz, d.gamma2),
            gamma_c: ghz(self.gamma_c_ghz, d.gamma_c),
            kappa: ghz(self.kappa_ghz, d.kappa),
        }
    }
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
pub struct GeometryArgs {
    /// Main-ring free spectral range, nm [default: 0.78]
    #[arg(long)]
    pub fsr_nm: Option<f64>,
    /// Auxiliary FSR as a multiple of the main FSR [default: 2]
    #[arg(long)]
    pub fsr_ratio: Option<f64>,
    /// Main resonances modelled on each side of the reference [default: 3]
    #[arg(long)]
    pub n_modes: Option<usize>,
    /// Offset of the auxiliary comb at zero tuning, GHz [default: 0]
    #[arg(long, allow_hyphen_values = true)]
    pub alignment_offset_ghz: Option<f64>,
    /// Shift of the auxiliary comb, GHz [default: 0]
    #[arg(long, allow_hyphen_values = true)]
    pub tuning_ghz: Option<f64>,
}

impl GeometryArgs {
    pub fn geometry(&self, center_nm: f64) -> DeviceGeometry {
        let fsr1 = units::angular_from_hz(units::hz_spacing_from_nm(center_nm, self.fsr_nm.unwrap_or(0.78)));
        DeviceGeometry {
            fsr1,
            fsr2: self.fsr_ratio.unwrap_or(2.0) * fsr1,
            n_modes: self.n_modes.unwrap_or(3),
            alignment_offset: self.alignment_offset_ghz.unwrap_or(0.0) * GHZ,
        }
    }

    pub fn tuning(&self) -> f64 {
        self.tuning_ghz.unwrap_or(0.0) * GHZ
    }
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
pub struct DetectorArgs {
    /// Signal photon lifetime, ps [default: 156.4]
    #[arg(long)]
    pub tau_signal_ps: Option<f64>,
    /// Idler photon lifetime, ps [default: 156.4]
    #[arg(long)]
    pub tau_idler_ps: Option<f64>,
    /// Signal detection efficiency [default: 0.5]
    #[arg(long)]
    pub eff_signal: Option<f64>,
    /// Idler detection efficiency [default: 0.5]
    #[arg(long)]
    pub eff_idler: Option<f64>,
    /// Signal dark-count rate, s⁻¹ [default: 100]
    #[arg(long)]
    pub dark_signal: Option<f64>,
    /// Idler dark-count rate, s⁻¹ [default: 100]
    #[arg(long)]
    pub dark_idler: Option<f64>,
    /// Signal channel jitter, ps [default: 74.5]
    #[arg(long)]
    pub jitter_signal_ps: Option<f64>,
    /// Idler channel jitter, ps [default: 53.5]
    #[arg(long)]
    pub jitter_idler_ps: Option<f64>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
pub struct SourceArgs {
    /// Pair rate per squared pump power, s⁻¹ mW⁻² [default: 1e5]
    #[arg(long)]
    pub pgr_coefficient: Option<f64>,
    /// On-chip pump power, mW [default: 1]
    #[arg(long)]
    pub pump_mw: Option<f64>,
    /// Acquisition time, s [default: 1]
    #[arg(long)]
    pub duration_s: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub detector: DetectorArgs,
}

impl SourceArgs {
    pub fn config(&self, seed: u64) -> ptring::photon_sim::PairSourceConfig {
        let d = &self.detector;
        ptring::photon_sim::PairSourceConfig {
            pgr_coefficient: self.pgr_coefficient.unwrap_or(1e5),
            pump_power: self.pump_mw.unwrap_or(1.0),
            tau_signal: d.tau_signal_ps.unwrap_or(156.4) * PS,
            tau_idler: d.tau_idler_ps.unwrap_or(156.4) * PS,
            eff_signal: d.eff_signal.unwrap_or(0.5),
            eff_idler: d.eff_idler.unwrap_or(0.5),
            dark_signal: d.dark_signal.unwrap_or(100.0),
            dark_idler: d.dark_idler.unwrap_or(100.0),
            jitter_signal: d.jitter_signal_ps.unwrap_or(74.5) * PS,
            jitter_idler: d.jitter_idler_ps.unwrap_or(53.5) * PS,
            duration: self.duration_s.unwrap_or(1.0),
            seed,
        }
    }
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
pub struct GridArgs {
    /// Start of the wavelength band, nm [default: 1534]
    #[arg(long)]
    pub start_nm: Option<f64>,
    /// End of the wavelength band, nm [default: 1540]
    #[arg(long)]
    pub stop_nm: Option<f64>,
    /// Number of evenly spaced frequency samples [default: 8001]
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
pub struct SimulateSpectrumArgs {
    /// JSON file of flag values; flags on the command line take precedence
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output file
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Output format [default: csv]
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Model only the reference mode pair instead of the comb
    #[arg(long)]
    #[serde(default, skip_serializing_if = "skip_false")]
    pub single: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
pub struct SweepDetuningArgs {
    /// JSON file of flag values; flags on the command line take precedence
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output file
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Output format [default: csv]
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Smallest detuning, GHz [default: -100]
    #[arg(long, allow_hyphen_values = true)]
    pub detuning_min_ghz: Option<f64>,
    /// Largest detuning, GHz [default: 100]
    #[arg(long, allow_hyphen_values = true)]
    pub detuning_max_ghz: Option<f64>,
    /// Number of detuning rows per regime [default: 41]
    #[arg(long)]
    pub rows: Option<usize>,
    /// Width of the probe window around (ω1 + ω2)/2, GHz [default: 300]
    #[arg(long)]
    pub span_ghz: Option<f64>,
    /// Probe frequencies per row [default: 601]
    #[arg(long)]
    pub points: Option<usize>,
    /// Bus coupling used for the split regime, GHz [default: 10]
    #[arg(long)]
    pub split_gamma_c_ghz: Option<f64>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
pub struct FitSpectrumArgs {
    /// JSON file of flag values; flags on the command line take precedence
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Transmission spectrum CSV (freq_hz,transmission)
    #[arg(long, short)]
    pub input: Option<PathBuf>,
    /// Result JSON
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    // starting values; the reference resonance is the detected dip nearest --center-nm
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub geometry: GeometryArgs,
    /// Minimum dip depth for resonance detection [default: 0.5]
    #[arg(long)]
    pub prominence: Option<f64>,
    /// Fit one intrinsic loss shared by both rings
    #[arg(long)]
    #[serde(default, skip_serializing_if = "skip_false")]
    pub tie_gammas: bool,
    /// Noise level of a spectrum that was clipped to [0, 1]
    #[arg(long)]
    pub clip_sigma: Option<f64>,
    /// Optimizer iteration cap [default: 10000]
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
pub struct PredictLifetimeArgs {
    /// JSON file of flag values; flags on the command line take precedence
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Also write the result to this file
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Measured coincidence 1/e width to deconvolve, ps
    #[arg(long)]
    pub tau_1e_ps: Option<f64>,
    /// First channel jitter for the deconvolution, ps [default: 74.5]
    #[arg(long)]
    pub jitter1_ps: Option<f64>,
    /// Second channel jitter for the deconvolution, ps [default: 53.5]
    #[arg(long)]
    pub jitter2_ps: Option<f64>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
pub struct SimulatePairsArgs {
    /// JSON file of flag values; flags on the command line take precedence
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Signal timestamp file
    #[arg(long)]
    pub signal_out: Option<PathBuf>,
    /// Idler timestamp file
    #[arg(long)]
    pub idler_out: Option<PathBuf>,
    /// Output format [default: csv]
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Random seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
pub struct AnalyzeArgs {
    /// JSON file of flag values; flags on the command line take precedence
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Start-channel timestamp CSV (idler)
    #[arg(long)]
    pub start: Option<PathBuf>,
    /// Stop-channel timestamp CSV (signal)
    #[arg(long)]
    pub stop: Option<PathBuf>,
    /// Channel to take from the start file when it holds several
    #[arg(long)]
    pub start_channel: Option<String>,
    /// Channel to take from the stop file when it holds several
    #[arg(long)]
    pub stop_channel: Option<String>,
    /// Analysis result JSON
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Also write the histogram as JSON here
    #[arg(long)]
    pub histogram: Option<PathBuf>,
    /// Histogram bin width, ps [default: 10]
    #[arg(long)]
    pub bin_width_ps: Option<f64>,
    /// Full histogram span, ns [default: 10]
    #[arg(long)]
    pub span_ns: Option<f64>,
    /// Start-channel jitter, ps [default: 53.5]
    #[arg(long)]
    pub jitter_start_ps: Option<f64>,
    /// Stop-channel jitter, ps [default: 74.5]
    #[arg(long)]
    pub jitter_stop_ps: Option<f64>,
    /// Peak half-window in units of the fitted width [default: 3]
    #[arg(long)]
    pub peak_factor: Option<f64>,
    /// Start of the accidental wings in units of the fitted width [default: 10]
    #[arg(long)]
    pub accidental_factor: Option<f64>,
    /// Report a lower bound instead of failing when the wings are empty
    #[arg(long)]
    #[serde(default, skip_serializing_if = "skip_false")]
    pub allow_lower_bound: bool,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
pub struct FransonArgs {
    /// JSON file of flag values; flags on the command line take precedence
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Fringe JSON
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Random seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Visibility of the simulated fringe [default: 0.871]
    #[arg(long)]
    pub visibility_true: Option<f64>,
    /// Coincidence rate at the fringe maximum, s⁻¹ [default: 40]
    #[arg(long)]
    pub base_rate: Option<f64>,
    /// Signal singles rate, s⁻¹ [default: 40100]
    #[arg(long)]
    pub singles_signal: Option<f64>,
    /// Idler singles rate, s⁻¹ [default: 40000]
    #[arg(long)]
    pub singles_idler: Option<f64>,
    /// Counting time per phase setting, s [default: 20]
    #[arg(long)]
    pub integration_time_s: Option<f64>,
    /// Phase settings spread evenly over [0, 2π] [default: 21]
    #[arg(long)]
    pub phases: Option<usize>,
    /// Monte Carlo resamplings for the uncertainty [default: 1000]
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
pub struct G2Args {
    /// JSON file of flag values; flags on the command line take precedence
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// G² result JSON
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Random seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub detector: DetectorArgs,
    /// Mean pairs per emission window [default: 0.02]
    #[arg(long)]
    pub mean_pairs: Option<f64>,
    /// Probability of an idler taking arm 1 [default: 0.5]
    #[arg(long)]
    pub splitter_ratio: Option<f64>,
    /// Number of emission windows [default: 1000000]
    #[arg(long)]
    pub windows: Option<u64>,
    /// Spacing of the emission windows, ns [default: 10]
    #[arg(long)]
    pub window_period_ns: Option<f64>,
    /// Coincidence window, ns [default: 1]
    #[arg(long)]
    pub coincidence_window_ns: Option<f64>,
    /// Comma-separated arm-2 delays, symmetric about 0, ns [default: -30,-20,-10,0,10,20,30]
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub delays_ns: Option<Vec<f64>>,
}
