//! Desk-scale model of heralded-photon storage in a diamond Raman memory,
//! retrieval with shifted centre frequency and reshaped bandwidth, and the
//! photon-counting statistics used to certify non-classical correlations.
//!
//! Module map:
//!
//! * [`spectral`] – wavelength/frequency arithmetic, sampled Gaussian spectra,
//!   FWHM extraction and monochromator response.
//! * [`dispersion`] – diamond refractive index, wavevectors, phase mismatch and
//!   the sinc² conversion envelope.
//! * [`memory`] – transduction rules: retrieved spectrum, storage decay,
//!   absorption dip and pulse-duration deconvolution.
//! * [`counting`] – seeded, shardable Monte Carlo of per-slot detections and
//!   coincidence histograms.
//! * [`analysis`] – analytic and estimated g⁽²⁾, Cauchy–Schwarz test, curve fits.
//! * [`scenario`] – batch scenarios writing CSV/JSON results.

pub mod analysis;
pub mod config;
pub mod counting;
pub mod dispersion;
mod error;
pub mod memory;
pub mod scenario;
pub mod spectral;

pub use analysis::{
    cauchy_schwarz_check, g2_analytic_full, g2_curve, g2_from_counts, nonclassical_range,
    Classicality, FitResult, G2Estimate, NonclassicalRange,
};
pub use config::{load_config, ConfigFile, ExperimentConfig};
pub use counting::{
    accidental_estimate, background_subtract, CoincidenceHistogram, CountRecord, SlotProbabilities,
    TrialOutcome,
};
pub use dispersion::{PhaseMatchResult, SellmeierModel, SellmeierTerm};
pub use error::{Error, Result};
pub use spectral::{PulseSpec, SpectralDensity, SpectralGrid};

/// Speed of light in nm·THz.
pub const SPEED_OF_LIGHT_NM_THZ: f64 = 299_792.458;
