//! Covariance functions and the additive composite kernel.

use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::math::{dot, exp, sqrt};

const SQRT3: f64 = 1.732_050_807_568_877_2;
const SQRT5: f64 = 2.236_067_977_499_79;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KernelKind {
    Rbf,
    Matern32,
    Matern52,
    Linear,
}

impl KernelKind {
    pub const ALL: [KernelKind; 4] = [KernelKind::Rbf, KernelKind::Matern32, KernelKind::Matern52, KernelKind::Linear];

    pub fn as_str(self) -> &'static str {
        match self {
            KernelKind::Rbf => "rbf",
            KernelKind::Matern32 => "matern32",
            KernelKind::Matern52 => "matern52",
            KernelKind::Linear => "linear",
        }
    }

    /// Whether the lengthscale enters the kernel at all.
    pub fn uses_lengthscale(self) -> bool {
        !matches!(self, KernelKind::Linear)
    }

    /// Kernel value with unit signal variance.
    #[inline]
    pub fn unit(self, lengthscale: f64, a: &[f64], b: &[f64]) -> f64 {
        match self {
            KernelKind::Linear => dot(a, b),
            stationary => {
                let r2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                stationary.unit_of_sq_distance(lengthscale, r2)
            }
        }
    }

    #[inline]
    pub(crate) fn unit_of_sq_distance(self, lengthscale: f64, r2: f64) -> f64 {
        match self {
            KernelKind::Rbf => exp(-r2 / (2.0 * lengthscale * lengthscale)),
            KernelKind::Matern32 => {
                let s = SQRT3 * sqrt(r2) / lengthscale;
                (1.0 + s) * exp(-s)
            }
            KernelKind::Matern52 => {
                let r = sqrt(r2);
                let s = SQRT5 * r / lengthscale;
                (1.0 + s + 5.0 * r2 / (3.0 * lengthscale * lengthscale)) * exp(-s)
            }
            KernelKind::Linear => unreachable!("linear kernel is not stationary"),
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rbf" => Ok(KernelKind::Rbf),
            "matern32" => Ok(KernelKind::Matern32),
            "matern52" => Ok(KernelKind::Matern52),
            "linear" => Ok(KernelKind::Linear),
            other => Err(Error::Config(alloc::format!("unknown kernel '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    /// Signal variance σ_f².
    pub variance: f64,
    /// Ignored by the linear kernel.
    pub lengthscale: f64,
}

impl KernelParams {
    pub fn new(variance: f64, lengthscale: f64) -> Self {
        Self { variance, lengthscale }
    }
}

/// `k1` acts on the first `split` input columns (pseudo-forecast, lags,
/// positions), `k2` on the remaining covariate columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    pub k1_kind: KernelKind,
    pub k2_kind: KernelKind,
    pub k1: KernelParams,
    pub k2: KernelParams,
    pub noise_variance: f64,
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        for p in [self.k1, self.k2] {
            if !(p.variance > 0.0) || !(p.lengthscale > 0.0) || !p.variance.is_finite() || !p.lengthscale.is_finite() {
                return Err(Error::Config(alloc::format!(
                    "kernel variance and lengthscale must be positive, got {:?}",
                    p
                )));
            }
        }
        if !(self.noise_variance >= 0.0) || !self.noise_variance.is_finite() {
            return Err(Error::Config(alloc::format!("noise variance {} must be >= 0", self.noise_variance)));
        }
        Ok(())
    }

    /// `k1(a[..split], b[..split]) + k2(a[split..], b[split..])`.
    pub fn eval(&self, split: usize, a: &[f64], b: &[f64]) -> f64 {
        kernel_eval(self.k1_kind, &self.k1, &a[..split], &b[..split])
            + kernel_eval(self.k2_kind, &self.k2, &a[split..], &b[split..])
    }
}

pub fn kernel_eval(kind: KernelKind, params: &KernelParams, a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    params.variance * kind.unit(params.lengthscale, a, b)
}
