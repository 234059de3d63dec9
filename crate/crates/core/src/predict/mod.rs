//! Predicting per-image parameters from image features.
//!
//! Two ν-SVR regressors with an RBF kernel map a feature vector to the
//! intercept and slope of the image's logistic relevance model. The same
//! regressor can also predict specificity directly.

mod svr;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{spearman, CurvePoint};
use crate::corpus::{Dataset, Description};
use crate::lexsim::{Lexicon, SentenceProfile, TfIdfModel};
use crate::retrieval::{train_params_from_pools, LRParams, ParamMap, ParamSource};
use crate::{seed, Error, Result};

use svr::{solve_nu_svr, KernelMatrix};

/// Stopping tolerance on the maximal KKT violation of the dual.
pub const KKT_TOLERANCE: f64 = 1e-6;
/// Standard deviations below this are replaced by it.
pub const SCALE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrHyper {
    /// Fraction bound on support vectors / margin errors, in `(0, 1]`.
    pub nu: f64,
    /// Box constraint on each dual variable.
    pub c: f64,
    /// RBF bandwidth; `None` picks `1 / (d · mean per-dimension variance)` of
    /// the standardized training inputs.
    pub gamma: Option<f64>,
}

impl Default for SvrHyper {
    fn default() -> Self {
        SvrHyper {
            nu: 0.5,
            c: 1.0,
            gamma: None,
        }
    }
}

impl SvrHyper {
    fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "nu must be in (0, 1], got {}",
                self.nu
            )));
        }
        if !(self.c > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "C must be positive, got {}",
                self.c
            )));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "gamma must be positive, got {g}"
                )));
            }
        }
        Ok(())
    }
}

/// Per-dimension `(x − mean) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[&[f64]]) -> Self {
        let d = x.first().map_or(0, |r| r.len());
        let n = x.len() as f64;
        let mut mean = vec![0.0; d];
        for row in x {
            for (m, v) in mean.iter_mut().zip(row.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in x {
            for ((s, v), m) in var.iter_mut().zip(row.iter()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| (s / n).sqrt().max(SCALE_FLOOR))
            .collect();
        Standardizer { mean, scale }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    (-gamma * squared_distance(a, b)).exp()
}

fn kernel_matrix(z: &[Vec<f64>], gamma: f64) -> KernelMatrix {
    let n = z.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        1.0
                    } else {
                        rbf(gamma, &z[i], &z[j])
                    }
                })
                .collect()
        })
        .collect();
    KernelMatrix {
        n,
        values: rows.into_iter().flatten().collect(),
    }
}

fn default_gamma(z: &[Vec<f64>]) -> f64 {
    let d = z.first().map_or(1, |r| r.len()).max(1);
    let n = z.len() as f64;
    let mut total_var = 0.0;
    for k in 0..d {
        let m: f64 = z.iter().map(|r| r[k]).sum::<f64>() / n;
        total_var += z.iter().map(|r| (r[k] - m) * (r[k] - m)).sum::<f64>() / n;
    }
    let mean_var = total_var / d as f64;
    if mean_var > 0.0 {
        1.0 / (d as f64 * mean_var)
    } else {
        1.0 / d as f64
    }
}

/// A fitted ν-SVR with RBF kernel, operating on standardized inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelRegressor {
    /// Standardized inputs with non-zero dual coefficient.
    pub support_inputs: Vec<Vec<f64>>,
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    /// Width of the learned ε-insensitive tube.
    pub epsilon: f64,
    pub hyper: SvrHyper,
    pub standardization: Standardizer,
    /// Maximal KKT violation when the solver stopped.
    pub kkt_violation: f64,
}

impl KernelRegressor {
    pub fn dim(&self) -> usize {
        self.standardization.dim()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let z = self.standardization.apply(x);
        Ok(self.predict_standardized(&z))
    }

    fn predict_standardized(&self, z: &[f64]) -> f64 {
        self.support_inputs
            .iter()
            .zip(&self.dual_coefs)
            .map(|(s, c)| c * rbf(self.gamma, s, z))
            .sum::<f64>()
            + self.bias
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(BufWriter::new(f), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(BufReader::new(f))?)
    }
}

/// Standardized training inputs with their kernel, shareable between the
/// regressors fitted on one training set.
struct TrainingInputs {
    standardizer: Standardizer,
    z: Vec<Vec<f64>>,
    gamma: f64,
    kernel: KernelMatrix,
}

impl TrainingInputs {
    fn new(x: &[&[f64]], hyper: &SvrHyper) -> Result<Self> {
        hyper.validate()?;
        if x.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "ν-SVR needs at least 2 training points, got {}",
                x.len()
            )));
        }
        let d = x[0].len();
        if let Some(bad) = x.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        let standardizer = Standardizer::fit(x);
        let z: Vec<Vec<f64>> = x.iter().map(|r| standardizer.apply(r)).collect();
        let gamma = hyper.gamma.unwrap_or_else(|| default_gamma(&z));
        let kernel = kernel_matrix(&z, gamma);
        Ok(TrainingInputs {
            standardizer,
            z,
            gamma,
            kernel,
        })
    }

    fn identical_inputs(&self) -> bool {
        self.z.iter().all(|r| r == &self.z[0])
    }

    fn fit(&self, y: &[f64], hyper: &SvrHyper) -> Result<KernelRegressor> {
        if y.len() != self.z.len() {
            return Err(Error::LengthMismatch {
                left: self.z.len(),
                right: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "non-finite regression target".into(),
            ));
        }
        let constant_target = y.iter().all(|v| *v == y[0]);
        if self.identical_inputs() && !constant_target {
            return Err(Error::Degenerate(
                "all training inputs are identical but the targets differ".into(),
            ));
        }
        let sol = solve_nu_svr(&self.kernel, y, hyper.nu, hyper.c, KKT_TOLERANCE);
        log::debug!(
            "nu-SVR converged in {} iterations, violation {:.2e}",
            sol.iterations,
            sol.violation
        );
        let (support_inputs, dual_coefs) = self
            .z
            .iter()
            .zip(&sol.coef)
            .filter(|(_, &c)| c != 0.0)
            .map(|(z, &c)| (z.clone(), c))
            .unzip();
        Ok(KernelRegressor {
            support_inputs,
            dual_coefs,
            bias: sol.bias,
            gamma: self.gamma,
            epsilon: sol.epsilon,
            hyper: *hyper,
            standardization: self.standardizer.clone(),
            kkt_violation: sol.violation,
        })
    }
}

/// Fits a ν-SVR with RBF kernel to `(x, y)`.
pub fn fit_svr(x: &[Vec<f64>], y: &[f64], hyper: &SvrHyper) -> Result<KernelRegressor> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let rows: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
    TrainingInputs::new(&rows, hyper)?.fit(y, hyper)
}

/// Fits a regressor for specificity itself; rejects constant targets, for
/// which a rank correlation with predictions would be undefined.
pub fn fit_specificity_regressor(
    x: &[Vec<f64>],
    spec: &[f64],
    hyper: &SvrHyper,
) -> Result<KernelRegressor> {
    if spec.iter().all(|v| *v == spec[0]) {
        return Err(Error::Degenerate("specificity targets are constant".into()));
    }
    fit_svr(x, spec, hyper)
}

pub fn predict_lr_params(
    image_id: &str,
    intercept: &KernelRegressor,
    slope: &KernelRegressor,
    x: &[f64],
) -> Result<LRParams> {
    Ok(LRParams::new(
        image_id,
        intercept.predict(x)?,
        slope.predict(x)?,
        ParamSource::Predicted,
    ))
}

/// The two regressors predicting LR intercept and slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRegressors {
    pub intercept: KernelRegressor,
    pub slope: KernelRegressor,
}

impl ParamRegressors {
    pub fn fit(x: &[&[f64]], targets: &[&LRParams], hyper: &SvrHyper) -> Result<Self> {
        let inputs = TrainingInputs::new(x, hyper)?;
        let b0: Vec<f64> = targets.iter().map(|p| p.beta0).collect();
        let b1: Vec<f64> = targets.iter().map(|p| p.beta1).collect();
        Ok(ParamRegressors {
            intercept: inputs.fit(&b0, hyper)?,
            slope: inputs.fit(&b1, hyper)?,
        })
    }

    pub fn predict(&self, image_id: &str, x: &[f64]) -> Result<LRParams> {
        predict_lr_params(image_id, &self.intercept, &self.slope, x)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(BufWriter::new(f), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(BufReader::new(f))?)
    }
}

fn features(db: &Dataset) -> Result<Vec<&[f64]>> {
    db.images
        .iter()
        .map(|i| {
            i.features
                .as_deref()
                .ok_or_else(|| Error::MissingFeatures(i.id.clone()))
        })
        .collect()
}

/// Fits both regressors on every image of `db` with ground-truth params.
pub fn fit_param_regressors(
    db: &Dataset,
    gt: &ParamMap,
    hyper: &SvrHyper,
) -> Result<ParamRegressors> {
    let x = features(db)?;
    let targets = targets(db, gt)?;
    ParamRegressors::fit(&x, &targets, hyper)
}

fn targets<'a>(db: &Dataset, gt: &'a ParamMap) -> Result<Vec<&'a LRParams>> {
    db.images
        .iter()
        .map(|i| {
            gt.get(&i.id)
                .ok_or_else(|| Error::MissingParams(i.id.clone()))
        })
        .collect()
}

/// Leave-one-out prediction of every image's params: the regressors for
/// image `i` never see image `i`'s features or targets.
///
/// The caller's ground-truth params are used as targets as they are; see
/// [`loocv_predict_params_isolated`] for the variant that also keeps image
/// `i`'s descriptions out of the targets' own training.
pub fn loocv_predict_params(
    db: &Dataset,
    gt: &ParamMap,
    hyper: &SvrHyper,
) -> Result<Vec<LRParams>> {
    let x = features(db)?;
    let targets = targets(db, gt)?;
    if db.len() < 3 {
        return Err(Error::TooFewImages {
            required: 3,
            found: db.len(),
        });
    }
    (0..db.len())
        .into_par_iter()
        .map(|i| {
            let tx: Vec<&[f64]> = x
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, r)| *r)
                .collect();
            let ty: Vec<&LRParams> = targets
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, p)| *p)
                .collect();
            ParamRegressors::fit(&tx, &ty, hyper)?.predict(&db.images[i].id, x[i])
        })
        .collect()
}

/// Leave-one-out prediction where each fold rebuilds its own targets: the
/// TF-IDF model, the training pairs and the LR fits of the remaining images
/// are all computed without image `i`'s descriptions.
///
/// `train_pools[i]` are the training sentences of `db.images[i]`. Fold `i`
/// trains the remaining LRs as [`train_params_from_pools`] would with the
/// master seed `derive(seed, [i])`.
pub fn loocv_predict_params_isolated(
    db: &Dataset,
    train_pools: &[Vec<Description>],
    lexicon: &Lexicon,
    hyper: &SvrHyper,
    seed: u64,
) -> Result<Vec<LRParams>> {
    let x = features(db)?;
    if db.len() < 4 {
        return Err(Error::TooFewImages {
            required: 4,
            found: db.len(),
        });
    }
    if train_pools.len() != db.len() {
        return Err(Error::LengthMismatch {
            left: db.len(),
            right: train_pools.len(),
        });
    }
    (0..db.len())
        .into_par_iter()
        .map(|i| {
            let keep: Vec<usize> = (0..db.len()).filter(|&j| j != i).collect();
            let tfidf = TfIdfModel::fit_iter(
                keep.iter()
                    .flat_map(|&j| train_pools[j].iter().map(|d| d.tokens.as_slice())),
            )?;
            let pools: Vec<Vec<SentenceProfile>> = keep
                .iter()
                .map(|&j| {
                    train_pools[j]
                        .iter()
                        .map(|d| SentenceProfile::new(&d.tokens, lexicon, &tfidf))
                        .collect()
                })
                .collect();
            let ids: Vec<&str> = keep.iter().map(|&j| db.images[j].id.as_str()).collect();
            let fold_seed = seed::derive(seed, &[i as u64]);
            let gt = train_params_from_pools(&ids, &pools, lexicon, fold_seed)?;
            let tx: Vec<&[f64]> = keep.iter().map(|&j| x[j]).collect();
            let ty: Vec<&LRParams> = gt.iter().collect();
            ParamRegressors::fit(&tx, &ty, hyper)?.predict(&db.images[i].id, x[i])
        })
        .collect()
}

/// Rank correlation between predicted and automated specificity on a fixed
/// held-out set, for growing training-set sizes, over `n_runs` random
/// splits. Runs whose predictions are constant count as zero correlation.
pub fn specificity_prediction_curve(
    x: &[Vec<f64>],
    spec: &[f64],
    train_sizes: &[usize],
    held_out: usize,
    n_runs: usize,
    hyper: &SvrHyper,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    if x.len() != spec.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: spec.len(),
        });
    }
    let available = x.len().saturating_sub(held_out);
    if let Some(&too_big) = train_sizes.iter().find(|&&s| s > available || s < 2) {
        return Err(Error::InvalidArgument(format!(
            "training size {too_big} is outside 2..={available}"
        )));
    }
    if held_out < 2 || n_runs == 0 {
        return Err(Error::InvalidArgument(
            "need at least 2 held-out points and 1 run".into(),
        ));
    }
    let per_run: Vec<Vec<f64>> = (0..n_runs)
        .into_par_iter()
        .map(|run| {
            let mut idx: Vec<usize> = (0..x.len()).collect();
            idx.shuffle(&mut seed::rng(seed, &[run as u64]));
            let (test, rest) = idx.split_at(held_out);
            train_sizes
                .iter()
                .map(|&size| {
                    let tx: Vec<Vec<f64>> = rest[..size].iter().map(|&j| x[j].clone()).collect();
                    let ty: Vec<f64> = rest[..size].iter().map(|&j| spec[j]).collect();
                    if ty.iter().all(|v| *v == ty[0]) {
                        return Ok(0.0);
                    }
                    let reg = fit_svr(&tx, &ty, hyper)?;
                    let pred: Vec<f64> = test
                        .iter()
                        .map(|&j| reg.predict(&x[j]))
                        .collect::<Result<_>>()?;
                    let truth: Vec<f64> = test.iter().map(|&j| spec[j]).collect();
                    match spearman(&pred, &truth) {
                        Ok(rho) => Ok(rho),
                        Err(Error::ZeroVariance) => Ok(0.0),
                        Err(e) => Err(e),
                    }
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(train_sizes
        .iter()
        .enumerate()
        .map(|(k, &size)| CurvePoint::from_samples(size, per_run.iter().map(|r| r[k])))
        .collect())
}
