//! Diamond dispersion and collinear phase matching of the read-out process.
//!
//! The retrieved photon carries phonon momentum written as `k_i − k_w` and
//! read out as `k_o − k_r`; the mismatch
//! `Δk = k_i − k_o + k_r − k_w` sets the conversion envelope
//! `sinc²(ΔkL/2)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::spectral::{frequency_to_wavelength, wavelength_to_frequency};
use crate::{Error, ExperimentConfig, Result, SPEED_OF_LIGHT_NM_THZ};

/// One `A·λ²/(λ² − λ_p²)` term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SellmeierTerm {
    pub strength: f64,
    pub pole_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SellmeierModel {
    pub terms: Vec<SellmeierTerm>,
    /// `[min, max]` in nm; no extrapolation outside.
    pub valid_range_nm: [f64; 2],
}

impl Default for SellmeierModel {
    /// Two-pole room-temperature diamond model (poles at 175 nm and 106 nm).
    fn default() -> Self {
        Self {
            terms: vec![
                SellmeierTerm {
                    strength: 0.3306,
                    pole_nm: 175.0,
                },
                SellmeierTerm {
                    strength: 4.3356,
                    pole_nm: 106.0,
                },
            ],
            valid_range_nm: [400.0, 1100.0],
        }
    }
}

impl SellmeierModel {
    /// n = 1 everywhere on the given range.
    pub fn vacuum(valid_range_nm: [f64; 2]) -> Self {
        Self {
            terms: vec![SellmeierTerm {
                strength: 0.0,
                pole_nm: 1.0,
            }],
            valid_range_nm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.valid_range_nm;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::config(
                "sellmeier.valid_range_nm",
                "must satisfy 0 < min < max",
            ));
        }
        for (i, t) in self.terms.iter().enumerate() {
            if !(t.strength >= 0.0) || !t.strength.is_finite() {
                return Err(Error::config(
                    format!("sellmeier.terms[{i}].strength"),
                    "must be finite and >= 0",
                ));
            }
            if !(t.pole_nm > 0.0) || (t.pole_nm >= lo && t.pole_nm <= hi) {
                return Err(Error::config(
                    format!("sellmeier.terms[{i}].pole_nm"),
                    "must be positive and outside the valid range",
                ));
            }
        }
        // Evaluate n² on a coarse scan: a pole below the range can still drive it negative.
        for j in 0..=64 {
            let lambda = lo + (hi - lo) * j as f64 / 64.0;
            let n2 = self.n_squared(lambda);
            if !(n2 >= 1.0) || !n2.is_finite() {
                return Err(Error::config(
                    "sellmeier.terms",
                    format!("n^2 = {n2} at {lambda} nm; index must be real and >= 1"),
                ));
            }
        }
        Ok(())
    }

    fn n_squared(&self, lambda_nm: f64) -> f64 {
        let l2 = lambda_nm * lambda_nm;
        1.0 + self
            .terms
            .iter()
            .map(|t| t.strength * l2 / (l2 - t.pole_nm * t.pole_nm))
            .sum::<f64>()
    }

    fn check_range(&self, lambda_nm: f64) -> Result<()> {
        let [lo, hi] = self.valid_range_nm;
        if lambda_nm >= lo && lambda_nm <= hi {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "{lambda_nm} nm outside the dispersion model range [{lo}, {hi}] nm"
            )))
        }
    }
}

pub fn refractive_index(model: &SellmeierModel, lambda_nm: f64) -> Result<f64> {
    model.check_range(lambda_nm)?;
    Ok(model.n_squared(lambda_nm).sqrt())
}

/// Wavevector magnitude in rad/m.
pub fn wavevector(model: &SellmeierModel, lambda_nm: f64) -> Result<f64> {
    let n = refractive_index(model, lambda_nm)?;
    Ok(2.0 * PI * n / (lambda_nm * 1e-9))
}

/// sin(x)/x with sinc(0) = 1.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

pub fn sinc2(x: f64) -> f64 {
    let s = sinc(x);
    s * s
}

/// Wavevectors and mismatch for one read setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseMatchResult {
    /// Input wavelength actually stored: the write field plus one phonon.
    pub input_nm: f64,
    pub output_nm: f64,
    pub k_i: f64,
    pub k_o: f64,
    pub k_r: f64,
    pub k_w: f64,
    pub delta_k: f64,
    pub sinc2: f64,
}

/// Phase mismatch for a read field at `read_center` nm.
///
/// The output is the read field blue-shifted by the phonon frequency. The
/// input wavevector is taken at the Raman-resonant component
/// `ω_w + Ω` of the broadband input photon, so that reading with the write
/// wavelength retrieves the stored frequency and `Δk` vanishes exactly.
pub fn phase_mismatch(
    model: &SellmeierModel,
    read_center: f64,
    cfg: &ExperimentConfig,
) -> Result<PhaseMatchResult> {
    let omega = cfg.phonon_freq;
    let write_nm = cfg.write_pulse.center;
    let input_nm = frequency_to_wavelength(wavelength_to_frequency(write_nm)? + omega)?;
    let output_nm = frequency_to_wavelength(wavelength_to_frequency(read_center)? + omega)?;

    let k_i = wavevector(model, input_nm)?;
    let k_o = wavevector(model, output_nm)?;
    let k_r = wavevector(model, read_center)?;
    let k_w = wavevector(model, write_nm)?;
    let delta_k = k_i - k_o + k_r - k_w;
    Ok(PhaseMatchResult {
        input_nm,
        output_nm,
        k_i,
        k_o,
        k_r,
        k_w,
        delta_k,
        sinc2: sinc2(delta_k * cfg.crystal_length / 2.0),
    })
}

/// Mismatch for light retrieved at `output_nm` (not necessarily the carrier):
/// the read component that produced it sits one phonon to the red.
pub(crate) fn delta_k_for_output(
    model: &SellmeierModel,
    output_nm: f64,
    cfg: &ExperimentConfig,
) -> Result<f64> {
    let omega = cfg.phonon_freq;
    let write_nm = cfg.write_pulse.center;
    let input_nm = frequency_to_wavelength(wavelength_to_frequency(write_nm)? + omega)?;
    let read_freq = SPEED_OF_LIGHT_NM_THZ / output_nm - omega;
    let read_nm = frequency_to_wavelength(read_freq)?;
    Ok(
        wavevector(model, input_nm)? - wavevector(model, output_nm)? + wavevector(model, read_nm)?
            - wavevector(model, write_nm)?,
    )
}

/// η_fc(Δω) = η_fc(0) · sinc²(ΔkL/2).
pub fn conversion_efficiency(
    model: &SellmeierModel,
    read_center: f64,
    cfg: &ExperimentConfig,
) -> Result<f64> {
    Ok(cfg.eta_fc0 * phase_mismatch(model, read_center, cfg)?.sinc2)
}
