//! Experiment parameters and the JSON config file.
//!
//! ```json
//! {
//!   "experiment": { "lifetime": 7.0, "p_noise": 3.8e-6 },
//!   "sellmeier": { "terms": [{"strength": 0.3306, "pole_nm": 175.0}], "valid_range_nm": [400, 1100] }
//! }
//! ```
//!
//! Both sections and every field are optional; missing values take the
//! defaults of [`ExperimentConfig::default`] / [`SellmeierModel::default`].
//! Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, PulseSpec, Result, SellmeierModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Heralded input photon, nm.
    pub input_pulse: PulseSpec,
    pub write_pulse: PulseSpec,
    /// nm
    pub herald_wavelength: f64,
    /// Optical phonon frequency Ω, THz.
    pub phonon_freq: f64,
    /// Diamond length along the beams, m.
    pub crystal_length: f64,
    /// Phonon (memory) lifetime, ps.
    pub lifetime: f64,
    /// Retrieval efficiency without frequency conversion.
    pub eta_fc0: f64,
    /// Heralding efficiency of the signal arm, monochromator included.
    pub eta_h: f64,
    /// Noise detection probability per slot.
    pub p_noise: f64,
    /// Herald detection probability per slot.
    pub p_herald: f64,
    /// Laser repetition rate, MHz.
    pub rep_rate: f64,
    /// Monochromator resolution FWHM, nm.
    pub mono_resolution: f64,
    pub mono_efficiency: f64,
    /// Write pulse duration, fs.
    pub write_duration: f64,
    /// Width of the input–write absorption dip, fs.
    pub dip_fwhm: f64,
    pub dip_depth: f64,
    /// Input–herald cross-correlation measured at the source.
    pub g2_source: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            input_pulse: PulseSpec {
                center: 723.5,
                fwhm: 4.1,
            },
            write_pulse: PulseSpec {
                center: 800.0,
                fwhm: 5.0,
            },
            herald_wavelength: 894.6,
            phonon_freq: 40.0,
            crystal_length: 2.3e-3,
            lifetime: 3.5,
            eta_fc0: 0.011,
            eta_h: 1.3e-3,
            p_noise: 3.8e-6,
            p_herald: 2.5e-4,
            rep_rate: 80.0,
            mono_resolution: 1.1,
            mono_efficiency: 0.10,
            write_duration: 190.0,
            dip_fwhm: 346.0,
            dip_depth: 0.18,
            g2_source: 164.0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.input_pulse.validate("experiment.input_pulse")?;
        self.write_pulse.validate("experiment.write_pulse")?;

        let probabilities = [
            ("eta_fc0", self.eta_fc0),
            ("eta_h", self.eta_h),
            ("p_noise", self.p_noise),
            ("p_herald", self.p_herald),
            ("mono_efficiency", self.mono_efficiency),
            ("dip_depth", self.dip_depth),
        ];
        for (name, p) in probabilities {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(
                    format!("experiment.{name}"),
                    format!("{p} not in [0, 1]"),
                ));
            }
        }

        let positive = [
            ("herald_wavelength", self.herald_wavelength),
            ("phonon_freq", self.phonon_freq),
            ("crystal_length", self.crystal_length),
            ("lifetime", self.lifetime),
            ("rep_rate", self.rep_rate),
            ("write_duration", self.write_duration),
            ("dip_fwhm", self.dip_fwhm),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(
                    format!("experiment.{name}"),
                    format!("{v} must be > 0"),
                ));
            }
        }
        if !(self.mono_resolution >= 0.0) {
            return Err(Error::config("experiment.mono_resolution", "must be >= 0"));
        }
        if !(self.g2_source >= 1.0) {
            return Err(Error::config("experiment.g2_source", "must be >= 1"));
        }
        if self.dip_fwhm <= self.write_duration {
            return Err(Error::config(
                "experiment.dip_fwhm",
                "must exceed write_duration (deconvolution)",
            ));
        }
        Ok(())
    }

    /// Time between adjacent laser pulses, ns.
    pub fn slot_period_ns(&self) -> f64 {
        1e3 / self.rep_rate
    }

    /// Input photon duration, fs, deconvolved from the absorption dip.
    pub fn input_duration(&self) -> Result<f64> {
        crate::memory::deconvolve_duration(self.dip_fwhm, self.write_duration)
    }

    /// Mean pairs per pulse implied by the source cross-correlation, μ ≈ 1/(g⁽²⁾ − 1).
    pub fn mean_pairs_per_slot(&self) -> f64 {
        1.0 / (self.g2_source - 1.0)
    }
}

/// Parsed config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: ExperimentConfig,
    pub sellmeier: SellmeierModel,
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ConfigFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.experiment.validate()?;
        self.sellmeier.validate()?;
        for (field, lambda) in [
            (
                "experiment.write_pulse.center",
                self.experiment.write_pulse.center,
            ),
            (
                "experiment.input_pulse.center",
                self.experiment.input_pulse.center,
            ),
        ] {
            let [lo, hi] = self.sellmeier.valid_range_nm;
            if lambda < lo || lambda > hi {
                return Err(Error::config(field, "outside the dispersion model range"));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical (fully defaulted) JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ConfigFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    ConfigFile::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg = ConfigFile::from_json("{}").unwrap();
        assert_eq!(cfg, ConfigFile::default());
        assert_eq!(cfg.experiment.phonon_freq, 40.0);
        assert_eq!(cfg.experiment.crystal_length, 2.3e-3);
        assert_eq!(cfg.experiment.eta_fc0, 0.011);
        assert_eq!(cfg.experiment.p_noise, 3.8e-6);
        assert_eq!(cfg.experiment.lifetime, 3.5);
    }

    #[test]
    fn negative_noise_names_field() {
        let err = ConfigFile::from_json(r#"{"experiment": {"p_noise": -1}}"#).unwrap_err();
        assert!(err.to_string().contains("p_noise"), "{err}");
        assert!(err.is_config());
    }

    #[test]
    fn partial_override() {
        let cfg = ConfigFile::from_json(r#"{"experiment": {"lifetime": 7.0}}"#).unwrap();
        assert_eq!(cfg.experiment.lifetime, 7.0);
        assert_eq!(cfg.experiment.eta_h, 1.3e-3);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(
            ConfigFile::from_json(r#"{"experimnt": {}}"#),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            ConfigFile::from_json(r#"{"experiment": {"lifetme": 1}}"#),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn missing_file() {
        let err = load_config("/nonexistent/qosp.json").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.is_config());
    }

    #[test]
    fn derived_durations() {
        let cfg = ExperimentConfig::default();
        assert!((cfg.input_duration().unwrap() - 289.15).abs() < 0.05);
        assert!((cfg.slot_period_ns() - 12.5).abs() < 1e-12);
        assert!((cfg.mean_pairs_per_slot() - 0.006_13).abs() < 1e-5);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ConfigFile::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.experiment.lifetime = 7.0;
        assert_ne!(a.hash(), b.hash());
    }
}
