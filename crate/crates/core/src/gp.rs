//! Exact Gaussian-process regression with the composite kernel.
//!
//! With Gram matrix `K` over the training inputs, cross-covariance `K_*`
//! and test covariance `K_**`, the posterior is
//!
//! ```text
//! μ* = K_* (K + σ²I)⁻¹ y
//! Σ* = K_** - K_* (K + σ²I)⁻¹ K_*ᵀ
//! ```
//!
//! evaluated through the Cholesky factor `K + σ²I = L Lᵀ`: the mean is
//! `K_* α` with `α = L⁻ᵀ L⁻¹ y`, and the variance of each test point is
//! `k** - ‖L⁻¹ k*‖²`.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::kernel::KernelConfig;
use crate::linalg::{Cholesky, Matrix};
use crate::math::{dot, mean_std};

/// Jitter ladder tried when `K + σ²I` is not numerically positive definite.
pub const JITTER_START: f64 = 1e-10;
pub const JITTER_MAX: f64 = 1e-4;

/// Tolerated negative posterior variance (standardized scale) before the
/// prediction is declared numerically broken.
pub const NEGATIVE_VARIANCE_TOL: f64 = 1e-6;

/// Per-column affine standardization of inputs and target.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaling {
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
}

impl Scaling {
    pub fn identity(cols: usize) -> Self {
        Self { input_mean: alloc::vec![0.0; cols], input_std: alloc::vec![1.0; cols], target_mean: 0.0, target_std: 1.0 }
    }

    /// Mean/std of each column and of the target over the given rows.
    /// Zero-spread columns keep unit scale.
    pub fn fit(inputs: &Matrix, targets: &[f64]) -> Self {
        let mut input_mean = Vec::with_capacity(inputs.cols());
        let mut input_std = Vec::with_capacity(inputs.cols());
        for j in 0..inputs.cols() {
            let (m, s) = mean_std(&inputs.column(j));
            input_mean.push(m);
            input_std.push(if s > 0.0 { s } else { 1.0 });
        }
        let (target_mean, s) = mean_std(targets);
        Self { input_mean, input_std, target_mean, target_std: if s > 0.0 { s } else { 1.0 } }
    }

    pub fn apply(&self, inputs: &Matrix) -> Matrix {
        let mut out = inputs.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = (*v - self.input_mean[j]) / self.input_std[j];
            }
        }
        out
    }

    pub fn scale_targets(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| (v - self.target_mean) / self.target_std).collect()
    }
}

/// Fitted GP adapter.
#[derive(Debug, Clone, PartialEq)]
pub struct GpModel {
    pub kernel: KernelConfig,
    /// Standardized training inputs `[z1 | z2]`.
    pub train_inputs: Matrix,
    /// Number of leading columns that belong to `k1`.
    pub split: usize,
    /// Standardized training targets.
    pub train_targets: Vec<f64>,
    pub cholesky: Cholesky,
    /// `(K + σ²I)⁻¹ y` in standardized units.
    pub alpha: Vec<f64>,
    pub scaling: Scaling,
    /// Diagonal jitter that was needed on top of the noise variance.
    pub jitter: f64,
}

/// Full composite Gram matrix over the rows of `x`.
pub fn composite_gram(kernel: &KernelConfig, split: usize, x: &Matrix) -> Matrix {
    let n = x.rows();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval(split, x.row(i), x.row(j));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Factorizes `gram + noise·I`, escalating diagonal jitter geometrically
/// from [`JITTER_START`] to [`JITTER_MAX`] on failure.
pub fn factor_with_jitter(gram: &Matrix, noise: f64) -> Result<(Cholesky, f64)> {
    let mut a = gram.clone();
    a.add_diagonal(noise);
    if let Some(c) = Cholesky::factor(&a) {
        return Ok((c, 0.0));
    }
    let mut jitter = JITTER_START;
    let mut applied = 0.0;
    while jitter <= JITTER_MAX * (1.0 + 1e-9) {
        a.add_diagonal(jitter - applied);
        applied = jitter;
        if let Some(c) = Cholesky::factor(&a) {
            log::debug!("gram factorized with jitter {jitter:e}");
            return Ok((c, jitter));
        }
        jitter *= 10.0;
    }
    bail!(Numerical, "kernel matrix not positive definite even with jitter {:e}", JITTER_MAX)
}

impl GpModel {
    /// Fits on raw inputs; `scaling` is applied to inputs and targets before
    /// the kernel sees them.
    pub fn fit(inputs: &Matrix, targets: &[f64], split: usize, kernel: KernelConfig, scaling: Scaling) -> Result<Self> {
        kernel.validate()?;
        if inputs.rows() == 0 || inputs.rows() != targets.len() {
            bail!(Geometry, "{} input rows for {} targets", inputs.rows(), targets.len());
        }
        if split > inputs.cols() || scaling.input_mean.len() != inputs.cols() {
            bail!(Geometry, "input split {} or scaling does not match {} columns", split, inputs.cols());
        }
        let x = scaling.apply(inputs);
        let y = scaling.scale_targets(targets);
        if x.as_slice().iter().chain(&y).any(|v| !v.is_finite()) {
            bail!(Numerical, "non-finite GP training data");
        }
        let gram = composite_gram(&kernel, split, &x);
        let (cholesky, jitter) = factor_with_jitter(&gram, kernel.noise_variance)?;
        let alpha = cholesky.solve(&y);
        if alpha.iter().any(|v| !v.is_finite()) {
            bail!(Numerical, "non-finite GP weights");
        }
        Ok(Self { kernel, train_inputs: x, split, train_targets: y, cholesky, alpha, scaling, jitter })
    }

    pub fn n_train(&self) -> usize {
        self.train_inputs.rows()
    }

    /// Posterior mean and variance in standardized units, variance floored
    /// at zero.
    pub fn predict_standardized(&self, test_inputs: &Matrix) -> Result<(Vec<f64>, Vec<f64>)> {
        if test_inputs.cols() != self.train_inputs.cols() {
            bail!(Geometry, "test rows have {} columns, model has {}", test_inputs.cols(), self.train_inputs.cols());
        }
        let z = self.scaling.apply(test_inputs);
        let n = self.n_train();
        let mut mean = Vec::with_capacity(z.rows());
        let mut var = Vec::with_capacity(z.rows());
        let mut kstar = alloc::vec![0.0; n];
        for i in 0..z.rows() {
            let zi = z.row(i);
            for (j, slot) in kstar.iter_mut().enumerate() {
                *slot = self.kernel.eval(self.split, zi, self.train_inputs.row(j));
            }
            let m = dot(&kstar, &self.alpha);
            let v = self.cholesky.solve_lower(&kstar);
            let raw = self.kernel.eval(self.split, zi, zi) - dot(&v, &v);
            if !m.is_finite() || !raw.is_finite() {
                bail!(Numerical, "non-finite posterior at test row {}", i);
            }
            if raw < -NEGATIVE_VARIANCE_TOL {
                bail!(Numerical, "posterior variance {:e} below tolerance at test row {}", raw, i);
            }
            mean.push(m);
            var.push(raw.max(0.0));
        }
        Ok((mean, var))
    }

    /// Posterior mean and variance on the original target scale.
    pub fn predict(&self, test_inputs: &Matrix) -> Result<(Vec<f64>, Vec<f64>)> {
        let (mut mean, mut var) = self.predict_standardized(test_inputs)?;
        let (mu, sd) = (self.scaling.target_mean, self.scaling.target_std);
        mean.iter_mut().for_each(|m| *m = *m * sd + mu);
        var.iter_mut().for_each(|v| *v *= sd * sd);
        Ok((mean, var))
    }
}

/// Convenience wrapper matching the functional style of the rest of the crate.
pub fn gp_fit(inputs: &Matrix, targets: &[f64], split: usize, kernel: KernelConfig, scaling: Scaling) -> Result<GpModel> {
    GpModel::fit(inputs, targets, split, kernel, scaling)
}

pub fn gp_predict(model: &GpModel, test_inputs: &Matrix) -> Result<(Vec<f64>, Vec<f64>)> {
    model.predict(test_inputs)
}
