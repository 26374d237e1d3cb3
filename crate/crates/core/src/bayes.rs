//! Bayesian ridge regression fitted by evidence maximization.
//!
//! Inputs and target are standardized before fitting. In the standardized
//! space the model is `y = Xw + ε` with `ε ~ N(0, 1/α)` and prior
//! `w ~ N(0, I/λ)`. Each iteration computes the posterior mean
//! `w = α (λI + αXᵀX)⁻¹ Xᵀy` and the effective number of parameters
//! `γ = m - λ tr((λI + αXᵀX)⁻¹)`, then re-estimates
//!
//! ```text
//! λ ← (γ + 2λ₁) / (‖w‖² + 2λ₂)
//! α ← (n - γ + 2α₁) / (‖y - Xw‖² + 2α₂)
//! ```
//!
//! with weak Gamma hyperpriors `α₁ = α₂ = λ₁ = λ₂ = 1e-6`, which keep `α`
//! bounded on noiseless data.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::math::{abs, dot, mean_std};

const HYPER_PRIOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayesRidgeOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub alpha_init: f64,
    pub lambda_init: f64,
    /// Hold the weight precision fixed instead of re-estimating it.
    pub fixed_lambda: Option<f64>,
}

impl Default for BayesRidgeOptions {
    fn default() -> Self {
        Self { max_iter: 300, tol: 1e-4, alpha_init: 1.0, lambda_init: 1.0, fixed_lambda: None }
    }
}

/// Fitted linear model, stored on the original scale of inputs and target.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesRidgeModel {
    /// One weight per input column; dropped constant columns carry 0.
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Noise precision in standardized units.
    pub alpha: f64,
    /// Weight precision in standardized units.
    pub lambda: f64,
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    /// Columns with zero spread in the training rows.
    pub dropped: Vec<bool>,
    pub target_mean: f64,
    pub target_std: f64,
    pub iterations: usize,
}

impl BayesRidgeModel {
    /// A fixed linear map `intercept + weights · x`, without any fitting.
    pub fn from_weights(weights: Vec<f64>, intercept: f64) -> Self {
        let m = weights.len();
        Self {
            weights,
            intercept,
            alpha: 1.0,
            lambda: 1.0,
            input_mean: vec![0.0; m],
            input_std: vec![1.0; m],
            dropped: vec![false; m],
            target_mean: 0.0,
            target_std: 1.0,
            iterations: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn predict_one(&self, x: &[f64]) -> f64 {
        self.intercept + dot(&self.weights, x)
    }

    pub fn predict(&self, rows: &Matrix) -> Vec<f64> {
        (0..rows.rows()).map(|i| self.predict_one(rows.row(i))).collect()
    }
}

/// Fits by evidence maximization. Fails with `Degenerate` on a constant
/// target; use [`fit_bayes_ridge_or_constant`] for the constant fallback.
pub fn fit_bayes_ridge(x: &Matrix, y: &[f64], opts: &BayesRidgeOptions) -> Result<BayesRidgeModel> {
    let (n, m) = (x.rows(), x.cols());
    if n < 2 {
        bail!(Geometry, "need at least 2 rows, got {}", n);
    }
    if y.len() != n {
        bail!(Geometry, "{} targets for {} rows", y.len(), n);
    }
    if x.as_slice().iter().chain(y).any(|v| !v.is_finite()) {
        bail!(Numerical, "non-finite training data");
    }
    let (target_mean, target_std) = mean_std(y);
    if !(target_std > 0.0) {
        bail!(Degenerate, "target has zero variance");
    }

    let mut input_mean = Vec::with_capacity(m);
    let mut input_std = Vec::with_capacity(m);
    let mut dropped = Vec::with_capacity(m);
    for j in 0..m {
        let (mu, sd) = mean_std(&x.column(j));
        let keep = sd > 1e-12 * (1.0 + abs(mu));
        input_mean.push(mu);
        input_std.push(if keep { sd } else { 1.0 });
        dropped.push(!keep);
    }
    let kept: Vec<usize> = (0..m).filter(|&j| !dropped[j]).collect();
    let k = kept.len();

    let mut z = Matrix::zeros(n, k);
    for i in 0..n {
        let src = x.row(i);
        for (c, &j) in kept.iter().enumerate() {
            z[(i, c)] = (src[j] - input_mean[j]) / input_std[j];
        }
    }
    let ys: Vec<f64> = y.iter().map(|v| (v - target_mean) / target_std).collect();
    let ztz = z.gram();
    let zty = z.t_matvec(&ys);

    let mut alpha = opts.alpha_init;
    let mut lambda = opts.fixed_lambda.unwrap_or(opts.lambda_init);
    let mut iterations = 0;
    let mut w = vec![0.0; k];
    for it in 0..opts.max_iter {
        iterations = it + 1;
        let (w_new, gamma) = posterior(&ztz, &zty, alpha, lambda, k)?;
        w = w_new;
        let rss: f64 = (0..n)
            .map(|i| {
                let r = ys[i] - dot(z.row(i), &w);
                r * r
            })
            .sum();
        let wsq = dot(&w, &w);
        let lambda_new = match opts.fixed_lambda {
            Some(l) => l,
            None => (gamma + 2.0 * HYPER_PRIOR) / (wsq + 2.0 * HYPER_PRIOR),
        };
        let alpha_new = (n as f64 - gamma + 2.0 * HYPER_PRIOR) / (rss + 2.0 * HYPER_PRIOR);
        if !alpha_new.is_finite() || !lambda_new.is_finite() || alpha_new <= 0.0 || lambda_new <= 0.0 {
            bail!(Numerical, "hyperparameters diverged (alpha={}, lambda={})", alpha_new, lambda_new);
        }
        let converged =
            abs(alpha_new - alpha) <= opts.tol * alpha && abs(lambda_new - lambda) <= opts.tol * lambda;
        alpha = alpha_new;
        lambda = lambda_new;
        if converged {
            break;
        }
    }
    if iterations > 0 {
        w = posterior(&ztz, &zty, alpha, lambda, k)?.0;
    }

    let mut weights = vec![0.0; m];
    let mut intercept = target_mean;
    for (c, &j) in kept.iter().enumerate() {
        let wj = w[c] * target_std / input_std[j];
        weights[j] = wj;
        intercept -= wj * input_mean[j];
    }
    Ok(BayesRidgeModel {
        weights,
        intercept,
        alpha,
        lambda,
        input_mean,
        input_std,
        dropped,
        target_mean,
        target_std,
        iterations,
    })
}

/// Like [`fit_bayes_ridge`], but a constant target yields a model that
/// returns that constant everywhere.
pub fn fit_bayes_ridge_or_constant(x: &Matrix, y: &[f64], opts: &BayesRidgeOptions) -> Result<BayesRidgeModel> {
    match fit_bayes_ridge(x, y, opts) {
        Err(Error::Degenerate(_)) => {
            let mut model = BayesRidgeModel::from_weights(vec![0.0; x.cols()], y[0]);
            model.target_mean = y[0];
            model.target_std = 0.0;
            model.dropped = vec![true; x.cols()];
            Ok(model)
        }
        other => other,
    }
}

fn posterior(ztz: &Matrix, zty: &[f64], alpha: f64, lambda: f64, k: usize) -> Result<(Vec<f64>, f64)> {
    if k == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let mut a = Matrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            a[(i, j)] = alpha * ztz[(i, j)];
        }
    }
    a.add_diagonal(lambda);
    let chol = Cholesky::factor(&a).ok_or_else(|| Error::Numerical("posterior precision not positive definite".into()))?;
    let rhs: Vec<f64> = zty.iter().map(|v| alpha * v).collect();
    let w = chol.solve(&rhs);
    let gamma = k as f64 - lambda * chol.inverse_trace();
    if w.iter().any(|v| !v.is_finite()) || !gamma.is_finite() {
        bail!(Numerical, "non-finite posterior");
    }
    Ok((w, gamma))
}
