//! Simulation and analysis toolkit for coupled dual-microring photon-pair
//! sources.
//!
//! The crate is split along the processing chain:
//!
//! * [`tcmt`] evaluates the two-mode non-Hermitian coupled-mode model
//!   (eigenfrequencies, exceptional-point diagnostics, steady-state
//!   transmission and intracavity density of states).
//! * [`spectra`] detects and fits resonances and recovers the coupled-ring
//!   parameters from a transmission spectrum.
//! * [`lifetime`] turns rates into photon lifetimes and handles the jitter
//!   quadrature relation between coincidence widths and lifetimes.
//! * [`photon_sim`] generates synthetic detector timestamp streams.
//! * [`counting`] builds coincidence histograms and derives lifetimes, CAR,
//!   interference visibility and heralded g².
//!
//! All rates and frequencies share one unit (s⁻¹) and no factor of 2π is
//! applied anywhere in the model; see [`units`] for conversions at the
//! file and wavelength boundaries.

pub mod counting;
pub mod error;
pub mod lifetime;
pub mod optimize;
pub mod photon_sim;
pub mod spectra;
pub mod spectrum;
pub mod tcmt;
pub mod timestamps;
pub mod units;

pub use error::{Error, Result};
pub use spectrum::{Spectrum, SpectrumKind};
pub use tcmt::{DeviceGeometry, EigenSolution, SteadyStateResponse, SystemParams};
pub use timestamps::TimestampStream;
