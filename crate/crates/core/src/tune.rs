//! Validation-driven selection of kernel pair, hyperparameters and
//! auxiliary feature subset for the GP adapter.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::error::{bail, Result};
use crate::gp::{factor_with_jitter, GpModel, Scaling};
use crate::kernel::{KernelConfig, KernelKind, KernelParams};
use crate::linalg::Matrix;
use crate::math::{abs, dot};

/// Which auxiliary feature groups join the pseudo-forecast in `z1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureSubset {
    pub lags: bool,
    pub positions: bool,
}

impl FeatureSubset {
    pub const NONE: FeatureSubset = FeatureSubset { lags: false, positions: false };
    pub const LAGS: FeatureSubset = FeatureSubset { lags: true, positions: false };
    pub const POSITIONS: FeatureSubset = FeatureSubset { lags: false, positions: true };
    pub const BOTH: FeatureSubset = FeatureSubset { lags: true, positions: true };
    pub const ALL: [FeatureSubset; 4] = [Self::NONE, Self::LAGS, Self::POSITIONS, Self::BOTH];

    pub fn as_str(self) -> &'static str {
        match (self.lags, self.positions) {
            (false, false) => "none",
            (true, false) => "lags",
            (false, true) => "positions",
            (true, true) => "lags+positions",
        }
    }
}

impl fmt::Display for FeatureSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Stage-II design rows, kept in separate blocks so any feature subset can
/// be assembled without recomputation.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage2Rows {
    pub pseudo: Vec<f64>,
    pub lags: Matrix,
    pub positions: Matrix,
    pub covariates: Matrix,
    /// Empty for prediction-only rows.
    pub targets: Vec<f64>,
}

impl Stage2Rows {
    pub fn len(&self) -> usize {
        self.pseudo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pseudo.is_empty()
    }

    /// `[pseudo; lags?; positions? | covariates]` and the `k1`/`k2` split.
    pub fn assemble(&self, subset: FeatureSubset) -> (Matrix, usize) {
        let split = 1 + if subset.lags { self.lags.cols() } else { 0 }
            + if subset.positions { self.positions.cols() } else { 0 };
        let cols = split + self.covariates.cols();
        let mut data = Vec::with_capacity(self.len() * cols);
        for i in 0..self.len() {
            data.push(self.pseudo[i]);
            if subset.lags {
                data.extend_from_slice(self.lags.row(i));
            }
            if subset.positions {
                data.extend_from_slice(self.positions.row(i));
            }
            data.extend_from_slice(self.covariates.row(i));
        }
        (Matrix::from_row_major(self.len(), cols, data).expect("consistent blocks"), split)
    }

    pub fn feature_columns(&self, subset: FeatureSubset) -> usize {
        (if subset.lags { self.lags.cols() } else { 0 }) + (if subset.positions { self.positions.cols() } else { 0 })
    }

    /// Concatenates two row sets with the same column layout.
    pub fn concat(&self, other: &Stage2Rows) -> Stage2Rows {
        fn stack(a: &Matrix, b: &Matrix) -> Matrix {
            let mut data = a.as_slice().to_vec();
            data.extend_from_slice(b.as_slice());
            Matrix::from_row_major(a.rows() + b.rows(), a.cols(), data).expect("same column count")
        }
        let mut pseudo = self.pseudo.clone();
        pseudo.extend_from_slice(&other.pseudo);
        let mut targets = self.targets.clone();
        targets.extend_from_slice(&other.targets);
        Stage2Rows {
            pseudo,
            lags: stack(&self.lags, &other.lags),
            positions: stack(&self.positions, &other.positions),
            covariates: stack(&self.covariates, &other.covariates),
            targets,
        }
    }
}

/// Candidate grid. Each candidate applies the same signal variance and
/// lengthscale to both kernels of the pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub k1_kinds: Vec<KernelKind>,
    pub k2_kinds: Vec<KernelKind>,
    pub lengthscales: Vec<f64>,
    pub variances: Vec<f64>,
    pub noises: Vec<f64>,
    pub feature_subsets: Vec<FeatureSubset>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            k1_kinds: KernelKind::ALL.to_vec(),
            k2_kinds: KernelKind::ALL.to_vec(),
            lengthscales: vec![0.1, 0.5, 1.0, 2.0, 5.0],
            variances: vec![0.5, 1.0, 2.0],
            noises: vec![1e-4, 1e-2, 1e-1],
            feature_subsets: FeatureSubset::ALL.to_vec(),
        }
    }
}

impl SearchSpace {
    /// A 96-candidate grid for long histories where the full grid is too
    /// slow.
    pub fn compact() -> Self {
        Self {
            k1_kinds: vec![KernelKind::Rbf, KernelKind::Linear],
            k2_kinds: vec![KernelKind::Linear, KernelKind::Matern52],
            lengthscales: vec![0.5, 2.0],
            variances: vec![1.0],
            noises: vec![1e-4, 1e-2, 1e-1],
            feature_subsets: FeatureSubset::ALL.to_vec(),
        }
    }

    /// Exactly one candidate.
    pub fn single(config: KernelConfig, subset: FeatureSubset) -> Self {
        Self {
            k1_kinds: vec![config.k1_kind],
            k2_kinds: vec![config.k2_kind],
            lengthscales: vec![config.k1.lengthscale],
            variances: vec![config.k1.variance],
            noises: vec![config.noise_variance],
            feature_subsets: vec![subset],
        }
    }

    pub fn len(&self) -> usize {
        self.k1_kinds.len()
            * self.k2_kinds.len()
            * self.lengthscales.len()
            * self.variances.len()
            * self.noises.len()
            * self.feature_subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn declaration_index(&self, k1: usize, k2: usize, l: usize, v: usize, n: usize, f: usize) -> usize {
        ((((k1 * self.k2_kinds.len() + k2) * self.lengthscales.len() + l) * self.variances.len() + v)
            * self.noises.len()
            + n)
            * self.feature_subsets.len()
            + f
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOutcome {
    pub kernel: KernelConfig,
    pub features: FeatureSubset,
    pub validation_mae: f64,
    /// Validation predictions of the winner refit on the training rows,
    /// original target scale.
    pub validation_mean: Vec<f64>,
    pub validation_variance: Vec<f64>,
    pub evaluated: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, Copy)]
struct Score {
    mae: f64,
    feature_cols: usize,
    noise: f64,
    index: usize,
}

impl Score {
    fn cmp(&self, other: &Score) -> Ordering {
        self.mae
            .total_cmp(&other.mae)
            .then(self.feature_cols.cmp(&other.feature_cols))
            .then(self.noise.total_cmp(&other.noise))
            .then(self.index.cmp(&other.index))
    }
}

/// Unit-variance kernel blocks for one kernel kind and lengthscale.
struct Blocks {
    train: Matrix,
    cross: Matrix,
}

fn blocks(kind: KernelKind, lengthscale: f64, train: &Matrix, val: &Matrix, cols: core::ops::Range<usize>) -> Blocks {
    let n = train.rows();
    let mut g = Matrix::zeros(n, n);
    for i in 0..n {
        let a = &train.row(i)[cols.clone()];
        for j in 0..=i {
            let v = kind.unit(lengthscale, a, &train.row(j)[cols.clone()]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    let mut c = Matrix::zeros(val.rows(), n);
    for i in 0..val.rows() {
        let a = &val.row(i)[cols.clone()];
        for j in 0..n {
            c[(i, j)] = kind.unit(lengthscale, a, &train.row(j)[cols.clone()]);
        }
    }
    Blocks { train: g, cross: c }
}

fn mae_of(pred: &[f64], truth: &[f64]) -> f64 {
    pred.iter().zip(truth).map(|(p, t)| abs(p - t)).sum::<f64>() / truth.len() as f64
}

/// Exhaustive grid search scored by validation MAE on the original scale.
/// Ties go to fewer feature columns, then smaller noise, then declaration
/// order (`k1 × k2 × lengthscale × variance × noise × features`). Candidates
/// whose fit fails are skipped.
pub fn tune_gp(train: &Stage2Rows, validation: &Stage2Rows, space: &SearchSpace) -> Result<TuneOutcome> {
    if validation.is_empty() || validation.targets.len() != validation.len() {
        bail!(Geometry, "validation rows need targets and at least one row");
    }
    if train.is_empty() || train.targets.len() != train.len() {
        bail!(Geometry, "training rows need targets and at least one row");
    }
    if space.is_empty() {
        bail!(Config, "empty search space");
    }

    let mut best: Option<(Score, KernelConfig, FeatureSubset)> = None;
    let mut evaluated = 0;
    let mut failed = 0;

    for (fi, &subset) in space.feature_subsets.iter().enumerate() {
        let (x_train, split) = train.assemble(subset);
        let (x_val, _) = validation.assemble(subset);
        let scaling = Scaling::fit(&x_train, &train.targets);
        let z_train = scaling.apply(&x_train);
        let z_val = scaling.apply(&x_val);
        let y = scaling.scale_targets(&train.targets);
        let cols = x_train.cols();
        let feature_cols = train.feature_columns(subset);
        let finite = z_train.as_slice().iter().chain(z_val.as_slice()).chain(&y).all(|v| v.is_finite())
            && validation.targets.iter().all(|v| v.is_finite());

        for (li, &ell) in space.lengthscales.iter().enumerate() {
            let k2_blocks: Vec<Option<Blocks>> = space
                .k2_kinds
                .iter()
                .map(|&kind| finite.then(|| blocks(kind, ell, &z_train, &z_val, split..cols)))
                .collect();
            for (k1i, &k1) in space.k1_kinds.iter().enumerate() {
                let k1_block = finite.then(|| blocks(k1, ell, &z_train, &z_val, 0..split));
                for (k2i, &k2) in space.k2_kinds.iter().enumerate() {
                    if li > 0 && !k1.uses_lengthscale() && !k2.uses_lengthscale() {
                        // identical to lengthscale index 0, which wins any tie.
                        continue;
                    }
                    for (vi, &var) in space.variances.iter().enumerate() {
                        for (ni, &noise) in space.noises.iter().enumerate() {
                            let index = space.declaration_index(k1i, k2i, li, vi, ni, fi);
                            let kernel = KernelConfig {
                                k1_kind: k1,
                                k2_kind: k2,
                                k1: KernelParams::new(var, ell),
                                k2: KernelParams::new(var, ell),
                                noise_variance: noise,
                            };
                            evaluated += 1;
                            let score = match (&k1_block, &k2_blocks[k2i]) {
                                (Some(b1), Some(b2)) => score_candidate(b1, b2, var, noise, &y, &scaling, &validation.targets),
                                _ => None,
                            };
                            let Some(mae) = score else {
                                failed += 1;
                                log::debug!("candidate {index} ({k1}+{k2}, {subset}) failed");
                                continue;
                            };
                            let s = Score { mae, feature_cols, noise, index };
                            if best.as_ref().is_none_or(|(b, _, _)| s.cmp(b) == Ordering::Less) {
                                best = Some((s, kernel, subset));
                            }
                        }
                    }
                }
            }
        }
    }

    let Some((score, kernel, features)) = best else {
        bail!(Numerical, "all {} GP candidates failed", evaluated);
    };
    let (x_train, split) = train.assemble(features);
    let (x_val, _) = validation.assemble(features);
    let model = GpModel::fit(&x_train, &train.targets, split, kernel, Scaling::fit(&x_train, &train.targets))?;
    let (validation_mean, validation_variance) = model.predict(&x_val)?;
    Ok(TuneOutcome {
        kernel,
        features,
        validation_mae: score.mae,
        validation_mean,
        validation_variance,
        evaluated,
        failed,
    })
}

fn score_candidate(
    k1: &Blocks,
    k2: &Blocks,
    variance: f64,
    noise: f64,
    y: &[f64],
    scaling: &Scaling,
    truth: &[f64],
) -> Option<f64> {
    let n = y.len();
    let mut gram = Matrix::zeros(n, n);
    {
        let (a, b) = (k1.train.as_slice(), k2.train.as_slice());
        for i in 0..n {
            let row = gram.row_mut(i);
            let off = i * n;
            for j in 0..=i {
                row[j] = variance * (a[off + j] + b[off + j]);
            }
        }
    }
    let (chol, _) = factor_with_jitter(&gram, noise).ok()?;
    let alpha = chol.solve(y);
    let mut pred = Vec::with_capacity(truth.len());
    let mut kstar = vec![0.0; n];
    for i in 0..truth.len() {
        let (a, b) = (k1.cross.row(i), k2.cross.row(i));
        for j in 0..n {
            kstar[j] = variance * (a[j] + b[j]);
        }
        pred.push(dot(&kstar, &alpha) * scaling.target_std + scaling.target_mean);
    }
    let mae = mae_of(&pred, truth);
    mae.is_finite().then_some(mae)
}
