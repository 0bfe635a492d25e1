//! Levenberg-Marquardt for small dense weighted least-squares problems.
//!
//! Minimizes `χ² = Σ rᵢ(p)²` where the residuals are already divided by their
//! standard deviations. Steps solve `(JᵀJ + λ·diag(JᵀJ)) δ = −Jᵀr`.

use nalgebra::{DMatrix, DVector};

pub trait LeastSquaresProblem {
    fn residuals(&self, params: &DVector<f64>) -> DVector<f64>;
    /// `∂rᵢ/∂pⱼ`.
    fn jacobian(&self, params: &DVector<f64>) -> DMatrix<f64>;
}

#[derive(Debug, Clone, Copy)]
pub struct LmSettings {
    pub max_iterations: usize,
    /// Converged once every step component satisfies
    /// `|δⱼ| ≤ xtol·(|pⱼ| + xtol)`.
    pub xtol: f64,
    pub initial_lambda: f64,
}

impl Default for LmSettings {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            xtol: 1e-10,
            initial_lambda: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: DVector<f64>,
    pub chi2: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `JᵀJ` at the returned parameters.
    pub normal_matrix: DMatrix<f64>,
}

const LAMBDA_CEILING: f64 = 1e16;

pub fn minimize<P: LeastSquaresProblem>(problem: &P, initial: DVector<f64>, settings: &LmSettings) -> LmReport {
    let mut params = initial;
    let mut residuals = problem.residuals(&params);
    let mut chi2 = residuals.norm_squared();
    let mut lambda = settings.initial_lambda;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < settings.max_iterations {
        iterations += 1;
        let jac = problem.jacobian(&params);
        let jtj = jac.transpose() * &jac;
        let gradient = jac.transpose() * &residuals;

        let mut accepted = false;
        while lambda <= LAMBDA_CEILING {
            let mut damped = jtj.clone();
            for k in 0..damped.nrows() {
                let d = jtj[(k, k)];
                damped[(k, k)] += lambda * if d > 0.0 { d } else { 1.0 };
            }
            let Some(step) = damped.cholesky().map(|c| c.solve(&(-&gradient))) else {
                lambda *= 10.0;
                continue;
            };
            let trial = &params + &step;
            let trial_residuals = problem.residuals(&trial);
            let trial_chi2 = trial_residuals.norm_squared();
            if trial_chi2.is_finite() && trial_chi2 <= chi2 {
                let small = step
                    .iter()
                    .zip(params.iter())
                    .all(|(d, p)| d.abs() <= settings.xtol * (p.abs() + settings.xtol));
                params = trial;
                residuals = trial_residuals;
                chi2 = trial_chi2;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                converged = small;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No downhill step at any damping: already at a minimum to
            // working precision.
            converged = true;
        }
        if converged {
            break;
        }
    }

    let jac = problem.jacobian(&params);
    LmReport {
        normal_matrix: jac.transpose() * &jac,
        params,
        chi2,
        iterations,
        converged,
    }
}
