//! Visibility formulas and curve fits for interference dips.
//!
//! Dips are fitted with a sloped baseline multiplied by a Gaussian notch,
//! `C(τ) = (a + b·τ)·(1 − V·exp(−(τ−τ₀)²/(2w²)))`, so the fitted `V` is the
//! dip depth relative to the local baseline.

pub mod lm;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use lm::{minimize, LeastSquaresProblem, LmSettings};

/// Minimum number of points accepted by [`fit_dip`].
pub const MIN_DIP_POINTS: usize = 6;

/// Ideal two-photon dip visibility for a coupler of reflectivity `eta`.
pub fn v_ideal(eta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(invalid(format!("eta must lie in [0, 1], got {eta}")));
    }
    Ok(2.0 * eta * (1.0 - eta) / (1.0 - 2.0 * eta + 2.0 * eta * eta))
}

/// Measured visibility divided by the ideal one for the same coupler.
pub fn relative_visibility(visibility: f64, eta: f64) -> Result<f64> {
    let ideal = v_ideal(eta)?;
    if ideal <= 0.0 {
        return Err(Error::DivisionDomain(format!(
            "ideal visibility vanishes at eta = {eta}"
        )));
    }
    Ok(visibility / ideal)
}

/// Poisson standard deviation for a count, floored at one.
pub fn poisson_sigma(counts: f64) -> f64 {
    counts.max(1.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipPoint {
    pub tau_s: f64,
    pub counts: f64,
    pub sigma: f64,
}

impl DipPoint {
    pub fn new(tau_s: f64, counts: f64, sigma: f64) -> Self {
        Self { tau_s, counts, sigma }
    }

    pub fn poisson(tau_s: f64, counts: f64) -> Self {
        Self::new(tau_s, counts, poisson_sigma(counts))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipParameters {
    pub baseline_a: f64,
    pub baseline_slope_b: f64,
    pub visibility: f64,
    pub center_tau0: f64,
    pub width_w: f64,
}

impl DipParameters {
    pub fn evaluate(&self, tau: f64) -> f64 {
        let g = (-(tau - self.center_tau0).powi(2) / (2.0 * self.width_w.powi(2))).exp();
        (self.baseline_a + self.baseline_slope_b * tau) * (1.0 - self.visibility * g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipFitResult {
    pub parameters: DipParameters,
    /// One standard error per parameter.
    pub uncertainties: DipParameters,
    pub reduced_chi2: f64,
    pub iterations: usize,
    /// Set when the fitted visibility left `[0, 1]` and was clamped.
    pub clamped: bool,
}

impl DipFitResult {
    pub fn visibility(&self) -> f64 {
        self.parameters.visibility
    }

    pub fn visibility_err(&self) -> f64 {
        self.uncertainties.visibility
    }
}

/// Dip fit in scaled units: delays divided by `ts`, counts by `ys`.
struct DipProblem {
    tau: Vec<f64>,
    y: Vec<f64>,
    sigma: Vec<f64>,
}

impl DipProblem {
    fn model(p: &DVector<f64>, tau: f64) -> (f64, f64, f64) {
        let base = p[0] + p[1] * tau;
        let dt = tau - p[3];
        let g = (-dt * dt / (2.0 * p[4] * p[4])).exp();
        (base, g, dt)
    }
}

impl LeastSquaresProblem for DipProblem {
    fn residuals(&self, p: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.tau.len(),
            (0..self.tau.len()).map(|i| {
                let (base, g, _) = Self::model(p, self.tau[i]);
                (base * (1.0 - p[2] * g) - self.y[i]) / self.sigma[i]
            }),
        )
    }

    fn jacobian(&self, p: &DVector<f64>) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.tau.len(), 5);
        for i in 0..self.tau.len() {
            let tau = self.tau[i];
            let (base, g, dt) = Self::model(p, tau);
            let s = self.sigma[i];
            let w2 = p[4] * p[4];
            jac[(i, 0)] = (1.0 - p[2] * g) / s;
            jac[(i, 1)] = tau * (1.0 - p[2] * g) / s;
            jac[(i, 2)] = -base * g / s;
            jac[(i, 3)] = -base * p[2] * g * dt / w2 / s;
            jac[(i, 4)] = -base * p[2] * g * dt * dt / (w2 * p[4]) / s;
        }
        jac
    }
}

fn fit_failure(iterations: usize, reason: impl Into<String>) -> Error {
    Error::FitFailure {
        iterations,
        reason: reason.into(),
    }
}

/// Weighted Gaussian-times-linear dip fit.
///
/// Initial guesses come from the data: baseline from the outer quartiles of
/// the delay range, zero slope, center at the minimum, width an eighth of
/// the delay span, visibility from the raw `(max − min)/max`.
pub fn fit_dip(points: &[DipPoint]) -> Result<DipFitResult> {
    let n = points.len();
    if n < MIN_DIP_POINTS {
        return Err(Error::InvalidData(format!(
            "dip fit needs at least {MIN_DIP_POINTS} points, got {n}"
        )));
    }
    if let Some(p) = points
        .iter()
        .find(|p| !p.tau_s.is_finite() || !p.counts.is_finite() || !(p.sigma > 0.0) || !p.sigma.is_finite())
    {
        return Err(Error::InvalidData(format!(
            "bad point at tau = {}: counts {}, sigma {}",
            p.tau_s, p.counts, p.sigma
        )));
    }

    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.tau_s.total_cmp(&b.tau_s));
    let span = sorted[n - 1].tau_s - sorted[0].tau_s;
    let max_counts = sorted.iter().map(|p| p.counts).fold(f64::NEG_INFINITY, f64::max);
    let argmin = sorted
        .iter()
        .min_by(|a, b| a.counts.total_cmp(&b.counts))
        .expect("nonempty");
    let min_counts = argmin.counts;
    if !(span > 0.0) {
        return Err(fit_failure(0, "all delays coincide"));
    }
    if !(max_counts > 0.0) || max_counts == min_counts {
        return Err(fit_failure(0, "flat data: no dip to fit"));
    }

    let quarter = (n / 4).max(1);
    let outer: Vec<f64> = sorted[..quarter]
        .iter()
        .chain(&sorted[n - quarter..])
        .map(|p| p.counts)
        .collect();
    let a0 = outer.iter().sum::<f64>() / outer.len() as f64;
    let v0 = ((max_counts - min_counts) / max_counts).clamp(0.0, 1.0);

    let ts = sorted.iter().map(|p| p.tau_s.abs()).fold(0.0, f64::max);
    let ys = max_counts;
    let problem = DipProblem {
        tau: points.iter().map(|p| p.tau_s / ts).collect(),
        y: points.iter().map(|p| p.counts / ys).collect(),
        sigma: points.iter().map(|p| p.sigma / ys).collect(),
    };
    let initial = DVector::from_vec(vec![a0 / ys, 0.0, v0, argmin.tau_s / ts, span / 8.0 / ts]);
    let report = minimize(&problem, initial, &LmSettings::default());
    if !report.converged {
        return Err(fit_failure(
            report.iterations,
            format!("no convergence (chi2 = {:.6e})", report.chi2),
        ));
    }
    let p = &report.params;
    if !(p[4].abs() > 0.0) || !p.iter().all(|x| x.is_finite()) {
        return Err(fit_failure(report.iterations, "degenerate parameters"));
    }

    let dof = (n - 5) as f64;
    let reduced_chi2 = report.chi2 / dof;
    let Some(mut cov) = report.normal_matrix.clone().try_inverse() else {
        return Err(fit_failure(
            report.iterations,
            "singular covariance; parameters not identifiable",
        ));
    };
    if reduced_chi2 > 1.0 {
        cov *= reduced_chi2;
    }
    let err = |k: usize| cov[(k, k)].max(0.0).sqrt();

    let mut visibility = p[2];
    let clamped = !(0.0..=1.0).contains(&visibility);
    if clamped {
        warn!("fitted visibility {visibility} outside [0, 1]; clamping");
        visibility = visibility.clamp(0.0, 1.0);
    }

    Ok(DipFitResult {
        parameters: DipParameters {
            baseline_a: p[0] * ys,
            baseline_slope_b: p[1] * ys / ts,
            visibility,
            center_tau0: p[3] * ts,
            width_w: p[4].abs() * ts,
        },
        uncertainties: DipParameters {
            baseline_a: err(0) * ys,
            baseline_slope_b: err(1) * ys / ts,
            visibility: err(2),
            center_tau0: err(3) * ts,
            width_w: err(4) * ts,
        },
        reduced_chi2,
        iterations: report.iterations,
        clamped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityPoint {
    pub eta: f64,
    pub visibility: f64,
    pub sigma: f64,
}

impl VisibilityPoint {
    pub fn new(eta: f64, visibility: f64, sigma: f64) -> Self {
        Self { eta, visibility, sigma }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeMismatchFit {
    /// Mode-match factor multiplying the ideal visibility curve.
    pub m: f64,
    pub uncertainty: f64,
    /// `V − M·V_ideal(η)` per point.
    pub residuals: Vec<f64>,
    pub reduced_chi2: f64,
    pub clamped: bool,
}

/// Weighted one-parameter fit of `V = M·v_ideal(η)`.
pub fn fit_mode_mismatch(points: &[VisibilityPoint]) -> Result<ModeMismatchFit> {
    if points.is_empty() {
        return Err(Error::InvalidData("no visibility points".into()));
    }
    let mut s_vv = 0.0;
    let mut s_yv = 0.0;
    let mut ideal = Vec::with_capacity(points.len());
    for p in points {
        if !(p.sigma > 0.0) || !p.visibility.is_finite() {
            return Err(Error::InvalidData(format!(
                "bad visibility point at eta = {}: V {}, sigma {}",
                p.eta, p.visibility, p.sigma
            )));
        }
        let v = v_ideal(p.eta)?;
        let w = 1.0 / (p.sigma * p.sigma);
        s_vv += w * v * v;
        s_yv += w * p.visibility * v;
        ideal.push(v);
    }
    if s_vv == 0.0 {
        return Err(Error::InvalidData(
            "ideal visibility is zero at every reflectivity".into(),
        ));
    }
    let m = s_yv / s_vv;
    let residuals: Vec<f64> = points.iter().zip(&ideal).map(|(p, v)| p.visibility - m * v).collect();
    let chi2: f64 = points.iter().zip(&residuals).map(|(p, r)| (r / p.sigma).powi(2)).sum();
    let dof = points.len() - 1;
    let reduced_chi2 = if dof > 0 { chi2 / dof as f64 } else { 0.0 };
    let mut variance = 1.0 / s_vv;
    if reduced_chi2 > 1.0 {
        variance *= reduced_chi2;
    }
    let clamped = !(0.0..=1.0).contains(&m);
    if clamped {
        warn!("fitted mode-match factor {m} outside [0, 1]; clamping");
    }
    Ok(ModeMismatchFit {
        m: m.clamp(0.0, 1.0),
        uncertainty: variance.sqrt(),
        residuals,
        reduced_chi2,
        clamped,
    })
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn v_ideal_symmetric(eta in 0.0..=1.0f64) {
            prop_assert!((v_ideal(eta).unwrap() - v_ideal(1.0 - eta).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn v_ideal_in_unit_interval(eta in 0.0..=1.0f64) {
            let v = v_ideal(eta).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
