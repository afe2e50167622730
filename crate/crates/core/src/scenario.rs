//! Batch scenarios, one per experiment figure, writing CSV series and JSON
//! summaries to an output directory.
//!
//! Data files depend only on the config, the scenario parameters and the
//! seed. The `run.json` sidecar additionally records the tool version, the
//! config hash and a wall-clock timestamp.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{fit_exponential, DataPoint, THERMAL_AUTOCORRELATION};
use crate::counting::{simulate_slots_sharded, SimulationRun};
use crate::dispersion::{conversion_efficiency, phase_mismatch};
use crate::memory::{retrieved_spectrum, storage_decay};
use crate::spectral::{convolve_response, fwhm, gaussian_spectrum, shift_wavelength};
use crate::{
    accidental_estimate, cauchy_schwarz_check, g2_analytic_full, g2_curve, g2_from_counts,
    nonclassical_range, ConfigFile, CountRecord, Error, PulseSpec, Result, SlotProbabilities,
    SpectralDensity, SpectralGrid,
};

pub const TOOL_NAME: &str = "qosp";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// g⁽²⁾ versus read wavelength.
    FreqSweep { read_nm: Vec<f64>, read_fwhm: f64 },
    /// Retrieved coincidences versus read delay, with an exponential fit.
    DelayScan { read_nm: f64, delays_ps: Vec<f64> },
    /// Output spectra for several read bandwidths.
    Bandwidth { read_nm: f64, read_fwhm: Vec<f64> },
    /// Signal–herald coincidences in ±2 neighbouring slots.
    Histogram { read_nm: f64, delay_ps: f64 },
    /// One g⁽²⁾ measurement with its classicality verdict.
    G2Point { read_nm: f64, delay_ps: f64 },
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::FreqSweep { .. } => "freq-sweep",
            ScenarioKind::DelayScan { .. } => "delay-scan",
            ScenarioKind::Bandwidth { .. } => "bandwidth",
            ScenarioKind::Histogram { .. } => "histogram",
            ScenarioKind::G2Point { .. } => "g2-point",
        }
    }

    /// Default acquisition length (trigger slots per point).
    pub fn default_trials(&self) -> u64 {
        match self {
            ScenarioKind::FreqSweep { .. } => 10_000_000_000,
            ScenarioKind::DelayScan { .. } => 42_000_000_000,
            _ => 100_000_000_000,
        }
    }

    pub fn freq_sweep_default() -> Self {
        ScenarioKind::FreqSweep {
            read_nm: (0..=30).map(|i| 784.0 + i as f64).collect(),
            read_fwhm: 3.5,
        }
    }

    pub fn delay_scan_default() -> Self {
        ScenarioKind::DelayScan {
            read_nm: 800.0,
            delays_ps: (0..15).map(|i| 10.0 * i as f64 / 14.0).collect(),
        }
    }

    pub fn bandwidth_default() -> Self {
        ScenarioKind::Bandwidth {
            read_nm: 801.0,
            read_fwhm: vec![2.1, 12.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    #[serde(flatten)]
    pub kind: ScenarioKind,
    pub trials: u64,
    pub seed: u64,
    pub analytic_only: bool,
}

impl Scenario {
    pub fn new(kind: ScenarioKind, seed: u64) -> Self {
        Self {
            trials: kind.default_trials(),
            kind,
            seed,
            analytic_only: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials", "must be >= 1"));
        }
        let empty = match &self.kind {
            ScenarioKind::FreqSweep { read_nm, .. } => read_nm.is_empty(),
            ScenarioKind::DelayScan { delays_ps, .. } => delays_ps.is_empty(),
            ScenarioKind::Bandwidth { read_fwhm, .. } => read_fwhm.is_empty(),
            _ => false,
        };
        if empty {
            return Err(Error::config(
                self.kind.name(),
                "parameter list must not be empty",
            ));
        }
        Ok(())
    }
}

/// One rendered output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

/// Format with 9 significant digits; trailing zeros trimmed.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return "nan".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let fixed = format!("{x:.decimals$}");
        if fixed.contains('.') {
            fixed
                .trim_end_matches('0')
                .trim_end_matches('.')
                .to_string()
        } else {
            fixed
        }
    } else {
        let mantissa = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{mantissa}e{exp}")
    }
}

/// Round to 9 significant digits for JSON output.
fn r9(x: f64) -> Value {
    if x.is_finite() {
        json!(format_number(x)
            .parse::<f64>()
            .expect("formatted number parses"))
    } else {
        Value::Null
    }
}

struct Csv(String);

impl Csv {
    fn new(header: &[&str]) -> Self {
        Csv(header.join(",") + "\n")
    }

    fn row(&mut self, cells: &[String]) {
        self.0.push_str(&cells.join(","));
        self.0.push('\n');
    }
}

fn json_file(name: &str, value: &Value) -> OutputFile {
    OutputFile {
        name: name.into(),
        contents: serde_json::to_string_pretty(value).expect("json") + "\n",
    }
}

/// Per-point seed; points are independent runs of the counting simulation.
fn point_seed(seed: u64, point: usize) -> u64 {
    // splitmix64 finalizer.
    let mut z = seed
        ^ (point as u64)
            .wrapping_add(1)
            .wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Context<'a> {
    cfg: &'a ConfigFile,
    scenario: &'a Scenario,
    shards: usize,
}

impl Context<'_> {
    fn simulate(&self, read_nm: f64, delay_ps: f64, point: usize) -> Result<SimulationRun> {
        let probs = SlotProbabilities::for_setting(
            &self.cfg.experiment,
            &self.cfg.sellmeier,
            read_nm,
            delay_ps,
        )?;
        simulate_slots_sharded(
            &probs,
            self.scenario.trials,
            point_seed(self.scenario.seed, point),
            self.shards,
        )
    }
}

/// Render all data files of a scenario without touching the filesystem.
pub fn render_scenario(
    scenario: &Scenario,
    cfg: &ConfigFile,
    shards: usize,
) -> Result<Vec<OutputFile>> {
    scenario.validate()?;
    cfg.validate()?;
    let ctx = Context {
        cfg,
        scenario,
        shards: shards.max(1),
    };
    match &scenario.kind {
        ScenarioKind::FreqSweep { read_nm, read_fwhm } => freq_sweep(&ctx, read_nm, *read_fwhm),
        ScenarioKind::DelayScan { read_nm, delays_ps } => delay_scan(&ctx, *read_nm, delays_ps),
        ScenarioKind::Bandwidth { read_nm, read_fwhm } => bandwidth(&ctx, *read_nm, read_fwhm),
        ScenarioKind::Histogram { read_nm, delay_ps } => histogram(&ctx, *read_nm, *delay_ps),
        ScenarioKind::G2Point { read_nm, delay_ps } => g2_point(&ctx, *read_nm, *delay_ps),
    }
}

fn freq_sweep(ctx: &Context, reads: &[f64], read_fwhm: f64) -> Result<Vec<OutputFile>> {
    let exp = &ctx.cfg.experiment;
    let model = &ctx.cfg.sellmeier;
    PulseSpec::new(reads[0], read_fwhm)?;
    let mut csv = Csv::new(&[
        "read_nm",
        "output_center_nm",
        "eta_fc",
        "g2_analytic",
        "g2_mc",
        "g2_mc_err",
    ]);
    let curve = g2_curve(exp, model, reads)?;
    for (i, &(read, g2)) in curve.iter().enumerate() {
        let pm = phase_mismatch(model, read, exp)?;
        let eta = conversion_efficiency(model, read, exp)?;
        let (mc, err) = if ctx.scenario.analytic_only {
            (String::new(), String::new())
        } else {
            let run = ctx.simulate(read, 0.0, i)?;
            match g2_from_counts(&run.record) {
                Ok(est) => (format_number(est.value), format_number(est.std_error)),
                Err(_) => ("nan".into(), "nan".into()),
            }
        };
        csv.row(&[
            format_number(read),
            format_number(pm.output_nm),
            format_number(eta),
            format_number(g2),
            mc,
            err,
        ]);
    }

    let mut sorted = curve.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let range = match nonclassical_range(&sorted, exp.phonon_freq) {
        Ok(r) => json!({
            "read_low_nm": r9(r.read_low_nm),
            "read_high_nm": r9(r.read_high_nm),
            "read_span_nm": r9(r.read_span_nm),
            "output_span_nm": r9(r.output_span_nm),
        }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let peak = sorted.iter().map(|p| p.1).fold(f64::MIN, f64::max);
    let summary = json!({
        "peak_g2_analytic": r9(peak),
        "classical_bound": r9(THERMAL_AUTOCORRELATION),
        "nonclassical_range": range,
    });
    Ok(vec![
        OutputFile {
            name: "freq-sweep.csv".into(),
            contents: csv.0,
        },
        json_file("freq-sweep-summary.json", &summary),
    ])
}

/// Background-subtracted coincidences at each delay, ready for fitting.
pub fn delay_point(run: &SimulationRun) -> Result<(f64, f64, DataPoint)> {
    let on = run.histogram.count(0).unwrap_or(0) as f64;
    let noise = accidental_estimate(&run.histogram)?;
    let side_total = 4.0 * noise;
    let sigma = (on.max(1.0) + side_total / 16.0).sqrt();
    Ok((on, noise, DataPoint::new(0.0, on - noise, sigma)))
}

fn delay_scan(ctx: &Context, read_nm: f64, delays: &[f64]) -> Result<Vec<OutputFile>> {
    let exp = &ctx.cfg.experiment;
    let mut rows = Vec::with_capacity(delays.len());
    let mut points = Vec::with_capacity(delays.len());
    for (i, &delay) in delays.iter().enumerate() {
        storage_decay(delay, exp)?;
        let (counts, noise, point) = if ctx.scenario.analytic_only {
            let probs = SlotProbabilities::for_setting(exp, &ctx.cfg.sellmeier, read_nm, delay)?;
            let n = ctx.scenario.trials as f64;
            let noise = n * probs.signal_probability() * probs.herald;
            let counts = n * probs.coincidence_probability();
            (
                counts,
                noise,
                DataPoint::new(delay, counts - noise, counts.max(1.0).sqrt()),
            )
        } else {
            let run = ctx.simulate(read_nm, delay, i)?;
            let (c, n, p) = delay_point(&run)?;
            (c, n, DataPoint { x: delay, ..p })
        };
        rows.push((delay, counts, noise));
        points.push(point);
    }
    let fit = fit_exponential(&points)?;
    let (amp, lifetime) = (fit.value("amplitude"), fit.value("lifetime"));

    let mut csv = Csv::new(&["delay_ps", "counts", "noise", "fit"]);
    for (delay, counts, noise) in &rows {
        csv.row(&[
            format_number(*delay),
            format_number(*counts),
            format_number(*noise),
            format_number(amp * (-delay / lifetime).exp()),
        ]);
    }
    let summary = json!({
        "model": "amplitude * exp(-delay_ps / lifetime_ps)",
        "amplitude": r9(amp),
        "amplitude_err": r9(fit.error("amplitude")),
        "lifetime_ps": r9(lifetime),
        "lifetime_err_ps": r9(fit.error("lifetime")),
        "residual_norm": r9(fit.residual_norm),
        "converged": fit.converged,
        "iterations": fit.iterations,
    });
    Ok(vec![
        OutputFile {
            name: "delay-scan.csv".into(),
            contents: csv.0,
        },
        json_file("delay-scan-fit.json", &summary),
    ])
}

fn spectrum_csv(s: &SpectralDensity) -> String {
    let mut csv = Csv::new(&["wavelength_nm", "intensity"]);
    for (l, v) in s.grid().wavelengths().zip(s.values()) {
        csv.row(&[format_number(l), format_number(*v)]);
    }
    csv.0
}

fn bandwidth(ctx: &Context, read_nm: f64, widths: &[f64]) -> Result<Vec<OutputFile>> {
    let exp = &ctx.cfg.experiment;
    let model = &ctx.cfg.sellmeier;
    let grid = SpectralGrid::default();
    let res = exp.mono_resolution;
    let mut files = Vec::new();
    let mut summaries = Vec::new();

    let input_raw = gaussian_spectrum(&exp.input_pulse, &grid)?;
    let input_conv = convolve_response(&input_raw, res)?;

    for &width in widths {
        let read = PulseSpec::new(read_nm, width)?;
        let read_raw = gaussian_spectrum(&read, &grid)?;
        let read_conv = convolve_response(&read_raw, res)?;
        let out = retrieved_spectrum(&read, 0.0, exp, model, &grid)?;
        let out_conv = convolve_response(&out.spectrum, res)?;
        let tag = format_number(width);
        for (series, raw, conv) in [
            ("input", &input_raw, &input_conv),
            ("read", &read_raw, &read_conv),
            ("output", &out.spectrum, &out_conv),
        ] {
            files.push(OutputFile {
                name: format!("bandwidth-{tag}nm-{series}-raw.csv"),
                contents: spectrum_csv(raw),
            });
            files.push(OutputFile {
                name: format!("bandwidth-{tag}nm-{series}-convolved.csv"),
                contents: spectrum_csv(conv),
            });
        }
        summaries.push(json!({
            "read_center_nm": r9(read_nm),
            "read_fwhm_nm": r9(width),
            "read_shifted_center_nm": r9(shift_wavelength(read_nm, exp.phonon_freq)?),
            "input_fwhm_raw_nm": r9(fwhm(&input_raw)?),
            "input_fwhm_convolved_nm": r9(fwhm(&input_conv)?),
            "read_fwhm_raw_nm": r9(fwhm(&read_raw)?),
            "read_fwhm_convolved_nm": r9(fwhm(&read_conv)?),
            "output_carrier_nm": r9(out.carrier_nm),
            "output_peak_nm": r9(out.peak_nm),
            "output_fwhm_raw_nm": r9(fwhm(&out.spectrum)?),
            "output_fwhm_convolved_nm": r9(fwhm(&out_conv)?),
            "mean_sinc2": r9(out.mean_sinc2),
            "retrieval_efficiency": r9(out.efficiency),
        }));
    }
    files.push(json_file(
        "bandwidth-summary.json",
        &json!({ "mono_resolution_nm": r9(res), "settings": summaries }),
    ));
    Ok(files)
}

fn histogram(ctx: &Context, read_nm: f64, delay_ps: f64) -> Result<Vec<OutputFile>> {
    let exp = &ctx.cfg.experiment;
    let period = exp.slot_period_ns();
    let probs = SlotProbabilities::for_setting(exp, &ctx.cfg.sellmeier, read_nm, delay_ps)?;
    let n = ctx.scenario.trials as f64;
    let (offsets, counts): (Vec<i64>, Vec<f64>) = if ctx.scenario.analytic_only {
        (-2..=2)
            .map(|k: i64| {
                let c = if k == 0 {
                    n * probs.coincidence_probability()
                } else {
                    (n - k.abs() as f64) * probs.signal_probability() * probs.herald
                };
                (k, c)
            })
            .unzip()
    } else {
        let run = ctx.simulate(read_nm, delay_ps, 0)?;
        run.histogram
            .bin_offsets()
            .iter()
            .zip(run.histogram.counts())
            .map(|(&k, &c)| (k, c as f64))
            .unzip()
    };
    let mut csv = Csv::new(&["bin_offset_ns", "counts"]);
    for (k, c) in offsets.iter().zip(&counts) {
        csv.row(&[format_number(*k as f64 * period), format_number(*c)]);
    }
    let center = counts[offsets.iter().position(|&k| k == 0).expect("zero bin")];
    let accidental = offsets
        .iter()
        .zip(&counts)
        .filter(|(k, _)| **k != 0)
        .map(|(_, c)| c)
        .sum::<f64>()
        / 4.0;
    let summary = json!({
        "slot_period_ns": r9(period),
        "center_counts": r9(center),
        "accidental_estimate": r9(accidental),
        "center_to_accidental": r9(if accidental > 0.0 { center / accidental } else { f64::NAN }),
    });
    Ok(vec![
        OutputFile {
            name: "histogram.csv".into(),
            contents: csv.0,
        },
        json_file("histogram-summary.json", &summary),
    ])
}

fn g2_point(ctx: &Context, read_nm: f64, delay_ps: f64) -> Result<Vec<OutputFile>> {
    let exp = &ctx.cfg.experiment;
    let eta =
        conversion_efficiency(&ctx.cfg.sellmeier, read_nm, exp)? * storage_decay(delay_ps, exp)?;
    let analytic = g2_analytic_full(exp, eta)?;
    let (value, error, record) = if ctx.scenario.analytic_only {
        (analytic, 0.0, None)
    } else {
        let run = ctx.simulate(read_nm, delay_ps, 0)?;
        let est = g2_from_counts(&run.record)?;
        (est.value, est.std_error, Some(run.record))
    };
    let verdict = cauchy_schwarz_check(value, THERMAL_AUTOCORRELATION, THERMAL_AUTOCORRELATION);
    let counts = record.map(|r: CountRecord| {
        json!({
            "n_slots": r.n_slots,
            "n_herald": r.n_herald,
            "n_signal": r.n_signal,
            "n_coincidence": r.n_coincidence,
        })
    });
    let summary = json!({
        "read_nm": r9(read_nm),
        "delay_ps": r9(delay_ps),
        "value": r9(value),
        "error": r9(error),
        "analytic": r9(analytic),
        "classicality": verdict,
        "counts": counts,
    });
    Ok(vec![json_file("g2-point.json", &summary)])
}

/// Render, then write every data file plus the `run.json` sidecar into
/// `out_dir`. Files already written are removed if a later write fails.
pub fn run_scenario(
    scenario: &Scenario,
    cfg: &ConfigFile,
    out_dir: &Path,
    shards: usize,
) -> Result<Vec<PathBuf>> {
    let mut files = render_scenario(scenario, cfg, shards)?;
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let sidecar = json!({
        "tool": TOOL_NAME,
        "version": TOOL_VERSION,
        "scenario": scenario,
        "seed": scenario.seed,
        "config_hash": cfg.hash(),
        "config": cfg,
        "files": files.iter().map(|f| f.name.clone()).collect::<Vec<_>>(),
        "timestamp_unix": timestamp,
    });
    files.push(json_file("run.json", &sidecar));

    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| Error::Io { path, source }
    };
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut written = Vec::with_capacity(files.len());
    for f in &files {
        let path = out_dir.join(&f.name);
        if let Err(e) = std::fs::write(&path, &f.contents) {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            let _ = std::fs::remove_file(&path);
            return Err(io_err(&path)(e));
        }
        written.push(path);
    }
    Ok(written)
}

/// Human-readable one-line summary for CLI output.
pub fn describe(files: &[PathBuf]) -> String {
    let mut s = String::new();
    for f in files {
        let _ = writeln!(s, "wrote {}", f.display());
    }
    s
}
