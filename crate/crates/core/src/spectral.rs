//! Wavelength grids, sampled spectral densities and the operations the rest of
//! the crate performs on them.
//!
//! Spectra are intensity per nm sampled on a uniform wavelength grid. All
//! integrals use the trapezoidal rule.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, SPEED_OF_LIGHT_NM_THZ};

/// FWHM = `FWHM_PER_SIGMA` × σ for a Gaussian.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

pub fn wavelength_to_frequency(lambda_nm: f64) -> Result<f64> {
    if !(lambda_nm > 0.0) || !lambda_nm.is_finite() {
        return Err(Error::Domain(format!(
            "wavelength must be positive, got {lambda_nm}"
        )));
    }
    Ok(SPEED_OF_LIGHT_NM_THZ / lambda_nm)
}

pub fn frequency_to_wavelength(freq_thz: f64) -> Result<f64> {
    if !(freq_thz > 0.0) || !freq_thz.is_finite() {
        return Err(Error::Domain(format!(
            "frequency must be positive, got {freq_thz}"
        )));
    }
    Ok(SPEED_OF_LIGHT_NM_THZ / freq_thz)
}

/// Wavelength reached by shifting `lambda_nm` by `shift_thz` in frequency
/// (positive shift is a blue shift).
pub fn shift_wavelength(lambda_nm: f64, shift_thz: f64) -> Result<f64> {
    frequency_to_wavelength(wavelength_to_frequency(lambda_nm)? + shift_thz)
}

/// Uniform wavelength grid `[lambda_min, lambda_max]` with `n_points` samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralGrid {
    lambda_min: f64,
    lambda_max: f64,
    n_points: usize,
}

impl SpectralGrid {
    pub fn new(lambda_min: f64, lambda_max: f64, n_points: usize) -> Result<Self> {
        if !(lambda_min > 0.0) || !(lambda_max > lambda_min) || !lambda_max.is_finite() {
            return Err(Error::Domain(format!(
                "grid bounds must satisfy 0 < min < max, got [{lambda_min}, {lambda_max}]"
            )));
        }
        if n_points < 2 {
            return Err(Error::Domain("grid needs at least 2 points".into()));
        }
        Ok(Self {
            lambda_min,
            lambda_max,
            n_points,
        })
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn step(&self) -> f64 {
        (self.lambda_max - self.lambda_min) / (self.n_points - 1) as f64
    }

    pub fn span(&self) -> f64 {
        self.lambda_max - self.lambda_min
    }

    pub fn wavelength(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.lambda_max
        } else {
            self.lambda_min + i as f64 * self.step()
        }
    }

    pub fn wavelengths(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.wavelength(i))
    }

    pub fn contains(&self, lambda: f64) -> bool {
        lambda >= self.lambda_min && lambda <= self.lambda_max
    }
}

impl Default for SpectralGrid {
    /// 690–860 nm at 0.02 nm: every wavelength in the experiment with
    /// ≥ 50 samples across the narrowest spectrum.
    fn default() -> Self {
        Self {
            lambda_min: 690.0,
            lambda_max: 860.0,
            n_points: 8501,
        }
    }
}

/// Centre wavelength and FWHM of a Gaussian pulse or photon spectrum, in nm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    pub center: f64,
    pub fwhm: f64,
}

impl PulseSpec {
    pub fn new(center: f64, fwhm: f64) -> Result<Self> {
        let p = Self { center, fwhm };
        p.validate("pulse")?;
        Ok(p)
    }

    pub(crate) fn validate(&self, field: &str) -> Result<()> {
        if !(self.center > 0.0) || !self.center.is_finite() {
            return Err(Error::config(format!("{field}.center"), "must be > 0"));
        }
        if !(self.fwhm > 0.0 && self.fwhm < self.center) {
            return Err(Error::config(
                format!("{field}.fwhm"),
                "must satisfy 0 < fwhm < center",
            ));
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.fwhm / FWHM_PER_SIGMA
    }

    /// Unnormalized Gaussian profile, 1 at the centre.
    pub fn profile(&self, lambda: f64) -> f64 {
        let z = (lambda - self.center) / self.sigma();
        (-0.5 * z * z).exp()
    }
}

/// Non-negative intensity per nm sampled on a [`SpectralGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensity {
    grid: SpectralGrid,
    values: Vec<f64>,
}

impl SpectralDensity {
    pub fn new(grid: SpectralGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::Shape(format!(
                "{} values for a {}-point grid",
                values.len(),
                grid.n_points()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Domain(format!(
                "spectral values must be finite and >= 0, got {v}"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.grid.step())
    }

    /// Rescale to unit trapezoidal integral.
    pub fn normalized(mut self) -> Result<Self> {
        let total = self.integral();
        if !(total > 0.0) {
            return Err(Error::Resolution(
                "spectrum has zero integral on this grid".into(),
            ));
        }
        self.values.iter_mut().for_each(|v| *v /= total);
        Ok(self)
    }

    /// Grid index and wavelength of the global maximum (first one on ties).
    pub fn peak(&self) -> (usize, f64) {
        let (idx, _) = self
            .values
            .iter()
            .enumerate()
            .fold(
                (0, f64::MIN),
                |best, (i, &v)| if v > best.1 { (i, v) } else { best },
            );
        (idx, self.grid.wavelength(idx))
    }

    /// Intensity-weighted mean wavelength.
    pub fn mean_wavelength(&self) -> f64 {
        let weighted: Vec<f64> = self
            .grid
            .wavelengths()
            .zip(&self.values)
            .map(|(l, v)| l * v)
            .collect();
        trapezoid(&weighted, self.grid.step()) / self.integral()
    }
}

pub(crate) fn trapezoid(values: &[f64], step: f64) -> f64 {
    match values {
        [] | [_] => 0.0,
        [first, .., last] => step * (values.iter().sum::<f64>() - 0.5 * (first + last)),
    }
}

/// Normalized Gaussian (in wavelength) with the pulse's centre and FWHM.
pub fn gaussian_spectrum(pulse: &PulseSpec, grid: &SpectralGrid) -> Result<SpectralDensity> {
    if !grid.contains(pulse.center) {
        return Err(Error::Domain(format!(
            "pulse centre {} nm outside grid [{}, {}]",
            pulse.center,
            grid.lambda_min(),
            grid.lambda_max()
        )));
    }
    if pulse.fwhm < 3.0 * grid.step() {
        return Err(Error::Resolution(format!(
            "FWHM {} nm is below 3 grid steps ({} nm)",
            pulse.fwhm,
            3.0 * grid.step()
        )));
    }
    let values = grid.wavelengths().map(|l| pulse.profile(l)).collect();
    SpectralDensity::new(*grid, values)?.normalized()
}

/// Full width at half maximum, linearly interpolating the half-maximum
/// crossing on each side of the global peak. When the profile crosses half
/// maximum several times on one side the crossing nearest the peak is used.
pub fn fwhm(s: &SpectralDensity) -> Result<f64> {
    let values = s.values();
    let grid = s.grid();
    let (peak, _) = s.peak();
    if peak == 0 || peak + 1 == values.len() {
        return Err(Error::Edge);
    }
    let half = 0.5 * values[peak];

    let left = (0..peak)
        .rev()
        .find(|&i| values[i] <= half)
        .ok_or(Error::Edge)?;
    let right = (peak + 1..values.len())
        .find(|&i| values[i] <= half)
        .ok_or(Error::Edge)?;

    let cross = |lo: usize, hi: usize| {
        let (v0, v1) = (values[lo], values[hi]);
        let (l0, l1) = (grid.wavelength(lo), grid.wavelength(hi));
        l0 + (half - v0) / (v1 - v0) * (l1 - l0)
    };
    Ok(cross(right - 1, right) - cross(left, left + 1))
}

/// Convolve with a normalized Gaussian instrument response of the given FWHM
/// and renormalize. Samples beyond the grid are treated as zero.
pub fn convolve_response(s: &SpectralDensity, resolution_fwhm: f64) -> Result<SpectralDensity> {
    if !(resolution_fwhm >= 0.0) {
        return Err(Error::Domain(format!(
            "resolution must be >= 0, got {resolution_fwhm}"
        )));
    }
    if resolution_fwhm == 0.0 {
        return Ok(s.clone());
    }
    let grid = *s.grid();
    if resolution_fwhm > grid.span() {
        return Err(Error::Resolution(format!(
            "response FWHM {resolution_fwhm} nm wider than the {} nm grid",
            grid.span()
        )));
    }
    let step = grid.step();
    let sigma = resolution_fwhm / FWHM_PER_SIGMA;
    let half_width = ((6.0 * sigma / step).ceil() as usize).min(grid.n_points() - 1);
    let kernel: Vec<f64> = (0..=2 * half_width)
        .map(|j| {
            let x = (j as f64 - half_width as f64) * step / sigma;
            (-0.5 * x * x).exp()
        })
        .collect();
    let norm: f64 = kernel.iter().sum();

    let input = s.values();
    let n = input.len();
    let out = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half_width);
            let hi = (i + half_width).min(n - 1);
            (lo..=hi)
                .map(|j| input[j] * kernel[j + half_width - i])
                .sum::<f64>()
                / norm
        })
        .collect();
    SpectralDensity::new(grid, out)?.normalized()
}
