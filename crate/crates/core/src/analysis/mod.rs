//! Cross-correlation g⁽²⁾: closed-form model, estimates from counts and the
//! classical (Cauchy–Schwarz) bound.

mod fit;

pub use fit::{fit_exponential, fit_gaussian, DataPoint, FitResult};

use serde::Serialize;

use crate::dispersion::conversion_efficiency;
use crate::spectral::shift_wavelength;
use crate::{CountRecord, Error, ExperimentConfig, Result, SellmeierModel};

/// Thermal marginals: g⁽²⁾_ss = g⁽²⁾_hh = 2.
pub const THERMAL_AUTOCORRELATION: f64 = 2.0;

/// `(η_h η_fc + P_n) / (P_h η_h η_fc + P_n)`.
pub fn g2_full(eta_h: f64, eta_fc: f64, p_herald: f64, p_noise: f64) -> Result<f64> {
    let signal = eta_h * eta_fc;
    let denom = p_herald * signal + p_noise;
    if denom <= 0.0 {
        return Err(Error::Degenerate(
            "no noise and no converted photons: g2 undefined".into(),
        ));
    }
    Ok((signal + p_noise) / denom)
}

/// Low-herald-rate approximation `1 + η_h η_fc / P_n`.
pub fn g2_approx(eta_h: f64, eta_fc: f64, p_noise: f64) -> Result<f64> {
    if p_noise <= 0.0 {
        return Err(Error::Degenerate("approximation needs P_n > 0".into()));
    }
    Ok(1.0 + eta_h * eta_fc / p_noise)
}

/// Full-form g⁽²⁾ at conversion efficiency `eta_fc` with the config's rates.
pub fn g2_analytic_full(cfg: &ExperimentConfig, eta_fc: f64) -> Result<f64> {
    g2_full(cfg.eta_h, eta_fc, cfg.p_herald, cfg.p_noise)
}

/// Analytic g⁽²⁾ versus read wavelength.
pub fn g2_curve(
    cfg: &ExperimentConfig,
    model: &SellmeierModel,
    read_wavelengths: &[f64],
) -> Result<Vec<(f64, f64)>> {
    read_wavelengths
        .iter()
        .map(|&read| {
            let eta = conversion_efficiency(model, read, cfg)?;
            Ok((read, g2_analytic_full(cfg, eta)?))
        })
        .collect()
}

/// Span of read (and output) wavelengths over which the curve exceeds 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NonclassicalRange {
    pub read_low_nm: f64,
    pub read_high_nm: f64,
    pub read_span_nm: f64,
    pub output_span_nm: f64,
}

impl NonclassicalRange {
    fn empty() -> Self {
        Self {
            read_low_nm: f64::NAN,
            read_high_nm: f64::NAN,
            read_span_nm: 0.0,
            output_span_nm: 0.0,
        }
    }
}

/// Interpolated g⁽²⁾ = 2 crossings on both sides of the curve's peak.
///
/// `curve` must be sorted by wavelength; `phonon_freq` (THz) converts the
/// read crossings to output wavelengths.
pub fn nonclassical_range(curve: &[(f64, f64)], phonon_freq: f64) -> Result<NonclassicalRange> {
    let bound = THERMAL_AUTOCORRELATION;
    let Some((peak, &(_, peak_g2))) = curve
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
    else {
        return Err(Error::Shape("empty g2 curve".into()));
    };
    if peak_g2 <= bound {
        return Ok(NonclassicalRange::empty());
    }
    let crossing = |i: usize, j: usize| {
        let ((l0, g0), (l1, g1)) = (curve[i], curve[j]);
        l0 + (bound - g0) / (g1 - g0) * (l1 - l0)
    };
    let left = (0..peak)
        .rev()
        .find(|&i| curve[i].1 <= bound)
        .ok_or(Error::UnboundedRange {
            bound,
            side: "short-wavelength",
        })?;
    let right = (peak + 1..curve.len())
        .find(|&i| curve[i].1 <= bound)
        .ok_or(Error::UnboundedRange {
            bound,
            side: "long-wavelength",
        })?;
    let low = crossing(left, left + 1);
    let high = crossing(right - 1, right);
    let out_low = shift_wavelength(low, phonon_freq)?;
    let out_high = shift_wavelength(high, phonon_freq)?;
    Ok(NonclassicalRange {
        read_low_nm: low,
        read_high_nm: high,
        read_span_nm: high - low,
        output_span_nm: out_high - out_low,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct G2Estimate {
    pub value: f64,
    pub std_error: f64,
    pub inputs: CountRecord,
}

/// `n_coincidence · n_slots / (n_signal · n_herald)` with first-order Poisson
/// errors (σ = 1 floor for an empty coincidence count).
pub fn g2_from_counts(r: &CountRecord) -> Result<G2Estimate> {
    if r.n_herald == 0 || r.n_signal == 0 {
        return Err(Error::Estimator(format!(
            "need herald and signal counts, got {} and {}",
            r.n_herald, r.n_signal
        )));
    }
    let (n, nh, ns, nc) = (
        r.n_slots as f64,
        r.n_herald as f64,
        r.n_signal as f64,
        r.n_coincidence as f64,
    );
    let scale = n / (ns * nh);
    let value = nc * scale;
    let sigma_c = nc.sqrt().max(1.0);
    let std_error = ((sigma_c * scale).powi(2) + value * value * (1.0 / ns + 1.0 / nh)).sqrt();
    Ok(G2Estimate {
        value,
        std_error,
        inputs: *r,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classicality {
    ClassicalCompatible,
    NonClassical,
}

/// Non-classical iff `g2_sh > √(g2_ss · g2_hh)`.
pub fn cauchy_schwarz_check(g2_sh: f64, g2_ss: f64, g2_hh: f64) -> Classicality {
    if g2_sh > (g2_ss * g2_hh).sqrt() {
        Classicality::NonClassical
    } else {
        Classicality::ClassicalCompatible
    }
}
