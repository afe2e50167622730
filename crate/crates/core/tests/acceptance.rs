//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any criterion fails.

use std::time::Instant;

use qosp_core::analysis::fit_exponential;
use qosp_core::counting::simulate_slots_sharded;
use qosp_core::memory::{deconvolve_duration, retrieved_spectrum};
use qosp_core::scenario::{delay_point, render_scenario, Scenario, ScenarioKind};
use qosp_core::spectral::{convolve_response, fwhm};
use qosp_core::{
    g2_analytic_full, g2_curve, g2_from_counts, nonclassical_range, ConfigFile, ExperimentConfig,
    PulseSpec, SellmeierModel, SlotProbabilities, SpectralGrid,
};

const SHARDS: usize = 4;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Check = fn() -> Result<Outcome, qosp_core::Error>;

fn peak_value() -> Result<Outcome, qosp_core::Error> {
    let cfg = ExperimentConfig::default();
    let g = g2_analytic_full(&cfg, cfg.eta_fc0)?;
    Ok(outcome(
        (g - 4.76).abs() <= 0.05,
        format!("peak g2 = {g:.4}, want 4.76 ± 0.05"),
    ))
}

fn nonclassical_span() -> Result<Outcome, qosp_core::Error> {
    let cfg = ExperimentConfig::default();
    let reads: Vec<f64> = (0..=1600).map(|i| 760.0 + 0.05 * i as f64).collect();
    let curve = g2_curve(&cfg, &SellmeierModel::default(), &reads)?;
    let r = nonclassical_range(&curve, cfg.phonon_freq)?;
    Ok(outcome(
        (r.read_span_nm - 17.0).abs() <= 3.0,
        format!(
            "read span {:.2} nm ({:.2}–{:.2}), want 17 ± 3; output span {:.2} nm",
            r.read_span_nm, r.read_low_nm, r.read_high_nm, r.output_span_nm
        ),
    ))
}

fn shifted_centers() -> Result<Outcome, qosp_core::Error> {
    let cfg = ExperimentConfig::default();
    let model = SellmeierModel::default();
    let grid = SpectralGrid::default();
    let mut pass = true;
    let mut detail = Vec::new();
    for (read, want) in [(792.0, 716.3), (808.0, 729.4)] {
        let out = retrieved_spectrum(&PulseSpec::new(read, 3.5)?, 0.0, &cfg, &model, &grid)?;
        pass &= (out.carrier_nm - want).abs() <= 2.0 && (out.peak_nm - want).abs() <= 2.0;
        detail.push(format!(
            "read {read} → carrier {:.2} / peak {:.2} (want {want} ± 2)",
            out.carrier_nm, out.peak_nm
        ));
    }
    Ok(outcome(pass, detail.join("; ")))
}

fn lifetime_recovery() -> Result<Outcome, qosp_core::Error> {
    let cfg = ExperimentConfig::default();
    let model = SellmeierModel::default();
    let trials = 42_000_000_000;
    let delays: Vec<f64> = (0..15).map(|i| 10.0 * i as f64 / 14.0).collect();
    let probs: Vec<SlotProbabilities> = delays
        .iter()
        .map(|&d| SlotProbabilities::for_setting(&cfg, &model, 800.0, d))
        .collect::<Result<_, _>>()?;
    let seeds = 100u64;
    let mut covered = 0;
    for seed in 0..seeds {
        let mut points = Vec::with_capacity(delays.len());
        for (i, (p, &d)) in probs.iter().zip(&delays).enumerate() {
            let run = simulate_slots_sharded(p, trials, seed * 1000 + i as u64, SHARDS)?;
            let (_, _, point) = delay_point(&run)?;
            points.push(qosp_core::analysis::DataPoint { x: d, ..point });
        }
        let fit = fit_exponential(&points)?;
        let (t, err) = (fit.value("lifetime"), fit.error("lifetime"));
        if (t - cfg.lifetime).abs() <= 3.0 * err {
            covered += 1;
        }
    }
    Ok(outcome(
        covered * 100 >= 95 * seeds,
        format!(
            "T = {} ps recovered within 3σ in {covered}/{seeds} seeds, want ≥ 95%",
            cfg.lifetime
        ),
    ))
}

fn deconvolution() -> Result<Outcome, qosp_core::Error> {
    let d = deconvolve_duration(346.0, 190.0)?;
    Ok(outcome(
        (d - 289.2).abs() <= 0.1,
        format!("√(346² − 190²) = {d:.3} fs, want 289.2 ± 0.1"),
    ))
}

fn bandwidth_conversion() -> Result<Outcome, qosp_core::Error> {
    let cfg = ExperimentConfig::default();
    let model = SellmeierModel::default();
    let grid = SpectralGrid::default();
    let mut pass = true;
    let mut detail = Vec::new();
    for (width, lo, hi) in [(12.1, 6.1, 9.1), (2.1, 2.0, 2.7)] {
        let out = retrieved_spectrum(&PulseSpec::new(801.0, width)?, 0.0, &cfg, &model, &grid)?;
        let conv = fwhm(&convolve_response(&out.spectrum, cfg.mono_resolution)?)?;
        pass &= (lo..=hi).contains(&conv);
        detail.push(format!(
            "read {width} nm → output {conv:.3} nm (want [{lo}, {hi}])"
        ));
    }
    Ok(outcome(pass, detail.join("; ")))
}

fn estimator_agreement() -> Result<Outcome, qosp_core::Error> {
    let cfg = ExperimentConfig::default();
    let model = SellmeierModel::default();
    let probs = SlotProbabilities::for_setting(&cfg, &model, 800.0, 0.0)?;
    let analytic = g2_analytic_full(&cfg, cfg.eta_fc0)?;
    let mut pass = true;
    let mut detail = Vec::new();
    let mut errors = Vec::new();
    for (k, n) in [1_000_000u64, 10_000_000, 100_000_000]
        .into_iter()
        .enumerate()
    {
        let run = simulate_slots_sharded(&probs, n, 7_000 + k as u64, SHARDS)?;
        match g2_from_counts(&run.record) {
            Ok(est) => {
                let ok = (est.value - analytic).abs() <= 3.0 * est.std_error;
                pass &= ok;
                errors.push(Some(est.std_error));
                detail.push(format!(
                    "n={n:e}: g2 {:.3} ± {:.3} (Nc={})",
                    est.value, est.std_error, run.record.n_coincidence
                ));
            }
            Err(e) => {
                pass = false;
                errors.push(None);
                detail.push(format!("n={n:e}: {e}"));
            }
        }
    }
    for w in errors.windows(2) {
        match (w[0], w[1]) {
            (Some(a), Some(b)) => {
                let ratio = a / b;
                let ok = (ratio / 10f64.sqrt() - 1.0).abs() <= 0.2;
                pass &= ok;
                detail.push(format!("σ ratio {ratio:.3} (want √10 ± 20%)"));
            }
            _ => pass = false,
        }
    }
    detail.push(format!("analytic {analytic:.3}"));
    Ok(outcome(pass, detail.join("; ")))
}

fn noise_only_baseline() -> Result<Outcome, qosp_core::Error> {
    let cfg = ExperimentConfig::default();
    let probs = SlotProbabilities::new(cfg.p_herald, 0.0, cfg.p_noise)?;
    let seeds = 100u64;
    let mut compatible = 0;
    for seed in 0..seeds {
        let run = simulate_slots_sharded(&probs, 100_000_000_000, 50_000 + seed, SHARDS)?;
        let est = g2_from_counts(&run.record)?;
        if (est.value - 1.0).abs() < 3.0 * est.std_error {
            compatible += 1;
        }
    }
    Ok(outcome(
        compatible >= 99,
        format!("|g2 − 1| < 3σ in {compatible}/{seeds} seeds, want ≥ 99"),
    ))
}

fn determinism() -> Result<Outcome, qosp_core::Error> {
    let cfg = ConfigFile::default();
    let kinds = [
        ScenarioKind::freq_sweep_default(),
        ScenarioKind::delay_scan_default(),
        ScenarioKind::bandwidth_default(),
        ScenarioKind::Histogram {
            read_nm: 800.0,
            delay_ps: 0.0,
        },
        ScenarioKind::G2Point {
            read_nm: 800.0,
            delay_ps: 0.0,
        },
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for kind in kinds {
        let name = kind.name();
        let scenario = Scenario::new(kind, 20_26);
        let a = render_scenario(&scenario, &cfg, 1)?;
        let b = render_scenario(&scenario, &cfg, 7)?;
        let c = render_scenario(&scenario, &cfg, 1)?;
        let same = a == b && a == c;
        pass &= same;
        detail.push(format!(
            "{name}: {} files {}",
            a.len(),
            if same { "identical" } else { "DIFFER" }
        ));
    }
    Ok(outcome(pass, detail.join("; ")))
}

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("peak g2 value", peak_value),
        ("non-classical conversion range", nonclassical_span),
        ("frequency-shift arithmetic", shifted_centers),
        ("lifetime recovery", lifetime_recovery),
        ("pulse-duration deconvolution", deconvolution),
        ("bandwidth conversion", bandwidth_conversion),
        ("estimator-oracle agreement", estimator_agreement),
        ("noise-only baseline", noise_only_baseline),
        ("determinism across shard counts", determinism),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.iter().any(|f| *f == id || name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = check().unwrap_or_else(|e| outcome(false, format!("error: {e}")));
        let secs = start.elapsed().as_secs_f64();
        let tag = if result.pass { "PASS" } else { "FAIL" };
        println!(
            "{tag} criterion {id} ({name}): {} [{secs:.1}s]",
            result.detail
        );
        failed += usize::from(!result.pass);
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion(s) failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
