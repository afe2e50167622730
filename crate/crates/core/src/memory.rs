//! Transduction rules of the diamond memory.
//!
//! The stored phonon is read out by the read pulse: the retrieved photon has
//! the read spectrum shifted up by one phonon frequency, filtered by the
//! phase-matching envelope, and its amplitude decays with the read delay.

use crate::dispersion::{delta_k_for_output, sinc2};
use crate::spectral::{shift_wavelength, trapezoid, wavelength_to_frequency};
use crate::{
    Error, ExperimentConfig, PulseSpec, Result, SellmeierModel, SpectralDensity, SpectralGrid,
    SPEED_OF_LIGHT_NM_THZ,
};

/// Photon retrieved by one read pulse.
#[derive(Debug, Clone)]
pub struct RetrievedPhoton {
    /// Normalized output spectrum.
    pub spectrum: SpectralDensity,
    /// Read carrier blue-shifted by the phonon frequency, nm.
    pub carrier_nm: f64,
    /// Wavelength of the spectrum's maximum, nm.
    pub peak_nm: f64,
    /// sinc² averaged over the shifted read spectrum.
    pub mean_sinc2: f64,
    /// η_fc(0) · ⟨sinc²⟩ · exp(−delay/lifetime).
    pub efficiency: f64,
}

/// Output spectrum `I_o(λ) ∝ I_read(ω − Ω) · sinc²(Δk(ω)L/2)` on `grid`.
pub fn retrieved_spectrum(
    read: &PulseSpec,
    delay_ps: f64,
    cfg: &ExperimentConfig,
    model: &SellmeierModel,
    grid: &SpectralGrid,
) -> Result<RetrievedPhoton> {
    let decay = storage_decay(delay_ps, cfg)?;
    let omega = cfg.phonon_freq;
    let carrier_nm = shift_wavelength(read.center, omega)?;

    // Width of the shifted read spectrum near the carrier.
    let scale = (carrier_nm / read.center).powi(2);
    let out_sigma = read.sigma() * scale;
    if carrier_nm - 5.0 * out_sigma < grid.lambda_min()
        || carrier_nm + 5.0 * out_sigma > grid.lambda_max()
    {
        return Err(Error::Resolution(format!(
            "retrieved spectrum around {carrier_nm:.3} nm exits the grid [{}, {}]",
            grid.lambda_min(),
            grid.lambda_max()
        )));
    }
    if read.fwhm * scale < 3.0 * grid.step() {
        return Err(Error::Resolution(
            "retrieved spectrum narrower than 3 grid steps".into(),
        ));
    }

    let mut shifted = Vec::with_capacity(grid.n_points());
    let mut filtered = Vec::with_capacity(grid.n_points());
    for lambda in grid.wavelengths() {
        let read_freq = SPEED_OF_LIGHT_NM_THZ / lambda - omega;
        if read_freq <= 0.0 {
            shifted.push(0.0);
            filtered.push(0.0);
            continue;
        }
        let read_nm = SPEED_OF_LIGHT_NM_THZ / read_freq;
        // Density per nm: dλ_r/dλ_o = (λ_r/λ_o)².
        let weight = read.profile(read_nm) * (read_nm / lambda).powi(2);
        if weight < 1e-30 {
            shifted.push(0.0);
            filtered.push(0.0);
            continue;
        }
        let dk = delta_k_for_output(model, lambda, cfg)?;
        shifted.push(weight);
        filtered.push(weight * sinc2(dk * cfg.crystal_length / 2.0));
    }

    let step = grid.step();
    let shifted_total = trapezoid(&shifted, step);
    let mean_sinc2 = trapezoid(&filtered, step) / shifted_total;
    let spectrum = SpectralDensity::new(*grid, filtered)?.normalized()?;
    let (_, peak_nm) = spectrum.peak();
    Ok(RetrievedPhoton {
        spectrum,
        carrier_nm,
        peak_nm,
        mean_sinc2,
        efficiency: cfg.eta_fc0 * mean_sinc2 * decay,
    })
}

/// Output carrier frequency (THz) for a read carrier at `read_nm`.
pub fn output_frequency(read_nm: f64, cfg: &ExperimentConfig) -> Result<f64> {
    Ok(wavelength_to_frequency(read_nm)? + cfg.phonon_freq)
}

/// exp(−delay/lifetime).
pub fn storage_decay(delay_ps: f64, cfg: &ExperimentConfig) -> Result<f64> {
    if !(delay_ps >= 0.0) {
        return Err(Error::Domain(format!(
            "read delay must be >= 0, got {delay_ps} ps"
        )));
    }
    Ok((-delay_ps / cfg.lifetime).exp())
}

/// Gaussian deconvolution `√(dip² − probe²)`.
pub fn deconvolve_duration(dip_fwhm: f64, write_duration: f64) -> Result<f64> {
    if !(write_duration >= 0.0) || !(dip_fwhm > write_duration) {
        return Err(Error::Domain(format!(
            "cannot deconvolve a {write_duration} fs probe from a {dip_fwhm} fs dip"
        )));
    }
    Ok((dip_fwhm * dip_fwhm - write_duration * write_duration).sqrt())
}

/// Relative input–herald coincidence rate versus input–write delay (fs).
pub fn absorption_dip(delay_fs: f64, cfg: &ExperimentConfig) -> f64 {
    let write2 = cfg.write_duration * cfg.write_duration;
    let input2 = (cfg.dip_fwhm * cfg.dip_fwhm - write2).max(0.0);
    let width2 = input2 + write2;
    1.0 - cfg.dip_depth * (-4.0 * std::f64::consts::LN_2 * delay_fs * delay_fs / width2).exp()
}
