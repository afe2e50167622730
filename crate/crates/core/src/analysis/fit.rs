//! Weighted least-squares fits by damped Gauss–Newton with step halving.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::{Error, Result};

const MAX_ITERATIONS: usize = 200;
const MAX_HALVINGS: usize = 60;
const STEP_TOLERANCE: f64 = 1e-9;
const GRADIENT_TOLERANCE: f64 = 1e-12;

/// One measurement `y ± sigma` at abscissa `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DataPoint {
    pub x: f64,
    pub y: f64,
    pub sigma: f64,
}

impl DataPoint {
    pub fn new(x: f64, y: f64, sigma: f64) -> Self {
        Self { x, y, sigma }
    }

    /// Poisson error `√N`, floored at 1 for empty bins.
    pub fn poisson(x: f64, counts: f64) -> Self {
        Self {
            x,
            y: counts,
            sigma: counts.sqrt().max(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub names: Vec<&'static str>,
    pub parameters: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// √χ² at the solution.
    pub residual_norm: f64,
    /// ‖Jᵀr‖ at the solution.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub message: String,
}

impl FitResult {
    fn index(&self, name: &str) -> usize {
        self.names
            .iter()
            .position(|n| *n == name)
            .unwrap_or_else(|| panic!("no fit parameter named {name}"))
    }

    pub fn value(&self, name: &str) -> f64 {
        self.parameters[self.index(name)]
    }

    pub fn error(&self, name: &str) -> f64 {
        self.std_errors[self.index(name)]
    }
}

trait Model {
    const NAMES: &'static [&'static str];
    fn eval(&self, p: &[f64], x: f64) -> f64;
    fn gradient(&self, p: &[f64], x: f64, out: &mut [f64]);
}

struct Exponential;

impl Model for Exponential {
    const NAMES: &'static [&'static str] = &["amplitude", "lifetime"];

    fn eval(&self, p: &[f64], t: f64) -> f64 {
        p[0] * (-t / p[1]).exp()
    }

    fn gradient(&self, p: &[f64], t: f64, out: &mut [f64]) {
        let e = (-t / p[1]).exp();
        out[0] = e;
        out[1] = p[0] * e * t / (p[1] * p[1]);
    }
}

struct Gaussian;

const FOUR_LN2: f64 = 4.0 * std::f64::consts::LN_2;

impl Model for Gaussian {
    const NAMES: &'static [&'static str] = &["center", "fwhm", "amplitude", "offset"];

    fn eval(&self, p: &[f64], x: f64) -> f64 {
        let z = (x - p[0]) / p[1];
        p[3] + p[2] * (-FOUR_LN2 * z * z).exp()
    }

    fn gradient(&self, p: &[f64], x: f64, out: &mut [f64]) {
        let z = (x - p[0]) / p[1];
        let e = (-FOUR_LN2 * z * z).exp();
        out[0] = p[2] * e * 2.0 * FOUR_LN2 * z / p[1];
        out[1] = p[2] * e * 2.0 * FOUR_LN2 * z * z / p[1];
        out[2] = e;
        out[3] = 1.0;
    }
}

fn chi2<M: Model>(model: &M, data: &[DataPoint], p: &[f64]) -> f64 {
    data.iter()
        .map(|d| ((d.y - model.eval(p, d.x)) / d.sigma).powi(2))
        .sum()
}

/// Weighted Jacobian `J` and residual vector `r`.
fn linearize<M: Model>(model: &M, data: &[DataPoint], p: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let k = p.len();
    let mut jac = DMatrix::zeros(data.len(), k);
    let mut res = DVector::zeros(data.len());
    let mut grad = vec![0.0; k];
    for (i, d) in data.iter().enumerate() {
        model.gradient(p, d.x, &mut grad);
        for j in 0..k {
            jac[(i, j)] = grad[j] / d.sigma;
        }
        res[i] = (d.y - model.eval(p, d.x)) / d.sigma;
    }
    (jac, res)
}

fn solve_normal(jtj: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = jtj.clone().cholesky() {
        return Some(ch.solve(rhs));
    }
    // Nearly singular: add a small Levenberg term.
    let damping = 1e-12 * jtj.diagonal().max().max(f64::MIN_POSITIVE);
    let damped = jtj + DMatrix::from_diagonal(&jtj.diagonal().map(|d| d.max(damping) * 1e-9));
    damped.cholesky().map(|ch| ch.solve(rhs))
}

fn gauss_newton<M: Model>(model: &M, data: &[DataPoint], initial: Vec<f64>) -> Result<FitResult> {
    let mut p = initial;
    let mut current = chi2(model, data, &p);
    let mut converged = false;
    let mut message = String::from("iteration limit reached");
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (jac, res) = linearize(model, data, &p);
        let jt = jac.transpose();
        let gradient = &jt * &res;
        if gradient.norm() < GRADIENT_TOLERANCE {
            converged = true;
            message = "gradient below tolerance".into();
            break;
        }
        let Some(step) = solve_normal(&(&jt * &jac), &gradient) else {
            message = "normal equations singular".into();
            break;
        };
        let relative = step
            .iter()
            .zip(&p)
            .map(|(s, v)| s.abs() / v.abs().max(1e-300))
            .fold(0.0, f64::max);

        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = p
                .iter()
                .zip(step.iter())
                .map(|(v, s)| v + scale * s)
                .collect();
            let value = chi2(model, data, &trial);
            if value.is_finite() && value <= current {
                p = trial;
                current = value;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            // No decrease even for tiny steps: either at the floating-point
            // minimum already or genuinely stuck.
            if relative < 1e3 * STEP_TOLERANCE {
                converged = true;
                message = "at numerical minimum".into();
            } else {
                message = "line search stalled".into();
            }
            break;
        }
        if relative * scale < STEP_TOLERANCE {
            converged = true;
            message = "relative step below tolerance".into();
            break;
        }
    }

    let (jac, res) = linearize(model, data, &p);
    let jtj = jac.transpose() * &jac;
    let gradient_norm = (jac.transpose() * &res).norm();
    let std_errors = match jtj.clone().cholesky() {
        Some(ch) => ch
            .inverse()
            .diagonal()
            .iter()
            .map(|v| v.max(0.0).sqrt())
            .collect(),
        None => vec![f64::INFINITY; p.len()],
    };
    Ok(FitResult {
        names: M::NAMES.to_vec(),
        parameters: p,
        std_errors,
        residual_norm: current.sqrt(),
        gradient_norm,
        iterations,
        converged,
        message,
    })
}

fn check_points(points: &[DataPoint], min_points: usize) -> Result<()> {
    if points.len() < min_points {
        return Err(Error::Fit(format!(
            "need at least {min_points} points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points
        .iter()
        .find(|p| !(p.sigma > 0.0) || !p.x.is_finite() || !p.y.is_finite())
    {
        return Err(Error::Fit(format!("invalid data point {p:?}")));
    }
    Ok(())
}

/// Fit `A·exp(−t/T)` to `(delay, counts ± σ)` points.
pub fn fit_exponential(points: &[DataPoint]) -> Result<FitResult> {
    check_points(points, 2)?;
    let first = points[0].x;
    if points.iter().all(|p| p.x == first) {
        return Err(Error::Fit("all delays are equal".into()));
    }

    // Start from a weighted log-linear regression on the positive counts.
    let positive: Vec<&DataPoint> = points.iter().filter(|p| p.y > 0.0).collect();
    let span = points.iter().map(|p| p.x).fold(f64::MIN, f64::max)
        - points.iter().map(|p| p.x).fold(f64::MAX, f64::min);
    let (mut amplitude, mut lifetime) = (points.iter().map(|p| p.y).fold(f64::MIN, f64::max), span);
    if positive.len() >= 2 {
        let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for p in &positive {
            let w = (p.y / p.sigma).powi(2);
            let ly = p.y.ln();
            sw += w;
            sx += w * p.x;
            sy += w * ly;
            sxx += w * p.x * p.x;
            sxy += w * p.x * ly;
        }
        let det = sw * sxx - sx * sx;
        if det > 0.0 {
            let slope = (sw * sxy - sx * sy) / det;
            let intercept = (sy - slope * sx) / sw;
            if slope < 0.0 {
                lifetime = -1.0 / slope;
                amplitude = intercept.exp();
            }
        }
    }
    if !(amplitude > 0.0) {
        amplitude = 1.0;
    }
    gauss_newton(&Exponential, points, vec![amplitude, lifetime])
}

/// Fit `offset + amplitude·exp(−4 ln2 (x − center)²/fwhm²)`.
pub fn fit_gaussian(points: &[DataPoint]) -> Result<FitResult> {
    check_points(points, 5)?;
    let (peak_idx, peak) = points
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.y.total_cmp(&b.1.y))
        .expect("non-empty");
    let base = points.iter().map(|p| p.y).fold(f64::MAX, f64::min);
    let height = peak.y - base;
    if !(height > 1e-12 * peak.y.abs().max(base.abs())) || height == 0.0 {
        return Err(Error::Fit("flat data: no peak to fit".into()));
    }
    if peak_idx == 0 || peak_idx + 1 == points.len() {
        return Err(Error::Fit("peak at the edge of the scan".into()));
    }

    let weights: Vec<f64> = points.iter().map(|p| p.y - base).collect();
    let total: f64 = weights.iter().sum();
    let var = points
        .iter()
        .zip(&weights)
        .map(|(p, w)| w * (p.x - peak.x).powi(2))
        .sum::<f64>()
        / total;
    let step = (points[1].x - points[0].x).abs();
    let width = (crate::spectral::FWHM_PER_SIGMA * var.sqrt()).max(2.0 * step);

    let fit = gauss_newton(&Gaussian, points, vec![peak.x, width, height, base])?;
    if fit.converged && fit.value("amplitude").abs() < 1e-9 * height {
        return Err(Error::Fit("fitted amplitude vanishes".into()));
    }
    Ok(fit)
}
