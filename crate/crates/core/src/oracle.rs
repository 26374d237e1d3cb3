//! Black-box base forecaster interface, call accounting and the built-in
//! desk-scale forecasters.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::math::dot;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRequest {
    pub context: Vec<f64>,
    pub horizon: usize,
    pub request_id: u64,
}

impl OracleRequest {
    pub fn new(context: &[f64], horizon: usize, request_id: u64) -> Result<Self> {
        if context.is_empty() {
            bail!(Geometry, "oracle context is empty");
        }
        if horizon == 0 {
            bail!(Geometry, "oracle horizon must be at least 1");
        }
        Ok(Self { context: context.to_vec(), horizon, request_id })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleForecast {
    pub mean: Vec<f64>,
    pub request_id: u64,
}

/// A univariate forecaster `M(Y_{1:h}) -> Ŷ_{h+1:h+F}`.
pub trait Oracle {
    fn forecast(&mut self, request: &OracleRequest) -> Result<OracleForecast>;
}

impl<O: Oracle + ?Sized> Oracle for &mut O {
    fn forecast(&mut self, request: &OracleRequest) -> Result<OracleForecast> {
        (**self).forecast(request)
    }
}

impl<O: Oracle + ?Sized> Oracle for Box<O> {
    fn forecast(&mut self, request: &OracleRequest) -> Result<OracleForecast> {
        (**self).forecast(request)
    }
}

/// Checks the reply contract: matching id, exact length, finite values.
pub fn check_reply(request: &OracleRequest, reply: &OracleForecast) -> Result<()> {
    if reply.request_id != request.request_id {
        bail!(Oracle, "reply id {} does not match request id {}", reply.request_id, request.request_id);
    }
    if reply.mean.len() != request.horizon {
        bail!(Oracle, "reply has {} values for horizon {}", reply.mean.len(), request.horizon);
    }
    if let Some(i) = reply.mean.iter().position(|v| !v.is_finite()) {
        bail!(Oracle, "reply value {} is not finite", i);
    }
    Ok(())
}

/// Record of every oracle invocation, successful or not.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CallLedger {
    pub calls: usize,
    pub per_call_context_lengths: Vec<usize>,
}

impl CallLedger {
    fn record(&mut self, context_len: usize) {
        self.calls += 1;
        self.per_call_context_lengths.push(context_len);
    }
}

/// Wraps an oracle, enforcing the reply contract and counting calls.
#[derive(Debug)]
pub struct MeteredOracle<O> {
    inner: O,
    ledger: CallLedger,
}

impl<O: Oracle> MeteredOracle<O> {
    pub fn new(inner: O) -> Self {
        Self { inner, ledger: CallLedger::default() }
    }

    pub fn ledger(&self) -> &CallLedger {
        &self.ledger
    }

    pub fn into_inner(self) -> (O, CallLedger) {
        (self.inner, self.ledger)
    }
}

impl<O: Oracle> Oracle for MeteredOracle<O> {
    fn forecast(&mut self, request: &OracleRequest) -> Result<OracleForecast> {
        self.ledger.record(request.context.len());
        let reply = self.inner.forecast(request)?;
        check_reply(request, &reply)?;
        Ok(reply)
    }
}

/// Repeats the last season of the context.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeasonalNaive {
    pub seasonality: usize,
}

pub fn builtin_seasonal_naive(seasonality: usize) -> Result<SeasonalNaive> {
    if seasonality == 0 {
        bail!(Config, "seasonality must be at least 1");
    }
    Ok(SeasonalNaive { seasonality })
}

impl Oracle for SeasonalNaive {
    fn forecast(&mut self, request: &OracleRequest) -> Result<OracleForecast> {
        let s = self.seasonality;
        let n = request.context.len();
        if n < s {
            bail!(Geometry, "context of {} is shorter than seasonality {}", n, s);
        }
        let last = &request.context[n - s..];
        let mean = (0..request.horizon).map(|j| last[j % s]).collect();
        Ok(OracleForecast { mean, request_id: request.request_id })
    }
}

/// Autoregression of the given order with an unpenalized intercept, fitted
/// by ridge least squares on the context and rolled forward recursively.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Autoregressive {
    pub order: usize,
    pub ridge_penalty: f64,
}

pub const DEFAULT_AR_PENALTY: f64 = 1e-6;

pub fn builtin_ar(order: usize, ridge_penalty: f64) -> Result<Autoregressive> {
    if order == 0 {
        bail!(Config, "AR order must be at least 1");
    }
    if !(ridge_penalty >= 0.0) || !ridge_penalty.is_finite() {
        bail!(Config, "ridge penalty must be finite and >= 0");
    }
    Ok(Autoregressive { order, ridge_penalty })
}

impl Autoregressive {
    /// `(intercept, coefficients)` with `coefficients[i]` multiplying `y_{t-1-i}`.
    pub fn fit(&self, context: &[f64]) -> Result<(f64, Vec<f64>)> {
        let p = self.order;
        if context.len() < p + 1 {
            bail!(Geometry, "context of {} is too short for AR({})", context.len(), p);
        }
        let rows = context.len() - p;
        let mut x = Matrix::zeros(rows, p);
        let mut y = Vec::with_capacity(rows);
        for r in 0..rows {
            let t = r + p;
            for i in 0..p {
                x[(r, i)] = context[t - 1 - i];
            }
            y.push(context[t]);
        }
        // centring absorbs the intercept so only the coefficients are penalized
        let ymean = y.iter().sum::<f64>() / rows as f64;
        let xmean: Vec<f64> = (0..p).map(|i| x.column(i).iter().sum::<f64>() / rows as f64).collect();
        for r in 0..rows {
            for i in 0..p {
                x[(r, i)] -= xmean[i];
            }
        }
        let yc: Vec<f64> = y.iter().map(|v| v - ymean).collect();
        let mut a = x.gram();
        let scale = (0..p).map(|i| a[(i, i)]).fold(0.0, f64::max);
        a.add_diagonal(self.ridge_penalty * scale.max(1.0));
        let coef = match Cholesky::factor(&a) {
            Some(c) => c.solve(&x.t_matvec(&yc)),
            // a constant context has an all-zero centred design
            None if scale == 0.0 => alloc::vec![0.0; p],
            None => bail!(Numerical, "AR normal equations are singular; use a positive ridge penalty"),
        };
        let intercept = ymean - dot(&coef, &xmean);
        Ok((intercept, coef))
    }
}

impl Oracle for Autoregressive {
    fn forecast(&mut self, request: &OracleRequest) -> Result<OracleForecast> {
        let (intercept, coef) = self.fit(&request.context)?;
        let p = self.order;
        let mut buf: Vec<f64> = request.context[request.context.len() - p..].to_vec();
        let mut mean = Vec::with_capacity(request.horizon);
        for _ in 0..request.horizon {
            let n = buf.len();
            let next = intercept + (0..p).map(|i| coef[i] * buf[n - 1 - i]).sum::<f64>();
            buf.push(next);
            mean.push(next);
        }
        if mean.iter().any(|v| !v.is_finite()) {
            bail!(Numerical, "AR recursion diverged");
        }
        Ok(OracleForecast { mean, request_id: request.request_id })
    }
}

/// Replays fixed replies; handy for wiring tests and scripted experiments.
#[derive(Debug, Clone, Default)]
pub struct ScriptedOracle {
    replies: Vec<core::result::Result<Vec<f64>, String>>,
    next: usize,
}

impl ScriptedOracle {
    pub fn new(replies: Vec<core::result::Result<Vec<f64>, String>>) -> Self {
        Self { replies, next: 0 }
    }
}

impl Oracle for ScriptedOracle {
    fn forecast(&mut self, request: &OracleRequest) -> Result<OracleForecast> {
        let reply = self.replies.get(self.next).cloned().ok_or_else(|| Error::Oracle("script exhausted".into()))?;
        self.next += 1;
        match reply {
            Ok(mean) => Ok(OracleForecast { mean, request_id: request.request_id }),
            Err(msg) => Err(Error::Oracle(msg)),
        }
    }
}
