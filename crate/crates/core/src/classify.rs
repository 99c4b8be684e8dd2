//! Kernel SVM training and k-fold cross-validated evaluation.
//!
//! Binary models are trained with a sequential minimal optimization
//! loop over a cached error vector; multiclass prediction is
//! one-vs-rest with ties resolved toward the lowest class id. All
//! choices inside training are deterministic (lowest-index
//! tie-breaks, fixed sweep order), so a seed fixes the entire
//! cross-validation outcome.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::{apply_scaler, fit_scaler, ScalerMode, ScalerParams};

/// Precompute the full kernel matrix up to this many training rows;
/// beyond it, kernel values are evaluated on demand.
const GRAM_LIMIT: usize = 20_000;

/// Hard cap on optimization sweeps, guarding against cycling.
const MAX_SWEEPS: usize = 10_000;

// ── kernels ─────────────────────────────────────────────────────────────

/// Kernel choice for SVM training and prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: f64 },
}

impl KernelSpec {
    fn validate(&self) -> Result<()> {
        if let KernelSpec::Rbf { gamma } = self {
            if !gamma.is_finite() || *gamma <= 0.0 {
                return Err(Error::invalid("gamma", format!("must be positive, got {gamma}")));
            }
        }
        Ok(())
    }
}

/// Evaluates the kernel on two equally long vectors.
pub fn kernel_eval(kernel: &KernelSpec, a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    match kernel {
        KernelSpec::Linear => a.iter().zip(b.iter()).map(|(x, y)| x * y).sum(),
        KernelSpec::Rbf { gamma } => {
            let sq: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
            (-gamma * sq).exp()
        }
    }
}

// ── configuration ───────────────────────────────────────────────────────

/// Training settings for one binary SVM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SvmConfig {
    /// Soft-margin penalty; every multiplier stays in [0, C].
    pub c: f64,
    pub kernel: KernelSpec,
    /// Slack allowed on the optimality conditions.
    pub tol: f64,
    /// Consecutive sweeps without an update before stopping.
    pub max_passes: usize,
}

impl SvmConfig {
    /// Default settings for the given feature width: C = 10 and an RBF
    /// kernel with gamma = 1/width.
    pub fn for_dim(dim: usize) -> SvmConfig {
        SvmConfig {
            c: 10.0,
            kernel: KernelSpec::Rbf { gamma: 1.0 / dim.max(1) as f64 },
            tol: 1e-3,
            max_passes: 10,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.c.is_finite() || self.c <= 0.0 {
            return Err(Error::invalid("c", format!("must be positive, got {}", self.c)));
        }
        if !self.tol.is_finite() || self.tol <= 0.0 {
            return Err(Error::invalid("tol", format!("must be positive, got {}", self.tol)));
        }
        if self.max_passes < 1 {
            return Err(Error::invalid("max_passes", "must be at least 1"));
        }
        self.kernel.validate()
    }
}

// ── binary model ────────────────────────────────────────────────────────

/// A trained binary classifier: only rows with a positive multiplier
/// are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmBinaryModel {
    support_vectors: Array2<f64>,
    labels: Vec<f64>,
    alphas: Vec<f64>,
    bias: f64,
    kernel: KernelSpec,
}

impl SvmBinaryModel {
    /// Assembles a model from its parts. Labels must be exactly ±1 and
    /// multipliers non-negative; an empty support set is allowed, in
    /// which case the decision value is the bias alone.
    pub fn new(
        support_vectors: Array2<f64>,
        labels: Vec<f64>,
        alphas: Vec<f64>,
        bias: f64,
        kernel: KernelSpec,
    ) -> Result<SvmBinaryModel> {
        kernel.validate()?;
        if labels.len() != support_vectors.nrows() || alphas.len() != support_vectors.nrows() {
            return Err(Error::ShapeMismatch {
                subject: "support set".into(),
                expected: format!("{} labels and multipliers", support_vectors.nrows()),
                found: format!("{} labels, {} multipliers", labels.len(), alphas.len()),
            });
        }
        if !labels.iter().all(|&y| y == 1.0 || y == -1.0) {
            return Err(Error::invalid("labels", "binary labels must be exactly +1 or -1"));
        }
        if !alphas.iter().all(|&a| a.is_finite() && a >= 0.0) {
            return Err(Error::invalid("alphas", "multipliers must be finite and non-negative"));
        }
        if !bias.is_finite() {
            return Err(Error::invalid("bias", "must be finite"));
        }
        Ok(SvmBinaryModel { support_vectors, labels, alphas, bias, kernel })
    }

    pub fn support_vectors(&self) -> &Array2<f64> {
        &self.support_vectors
    }

    /// Training label (±1) of each support vector.
    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn support_count(&self) -> usize {
        self.alphas.len()
    }
}

/// Kernel matrix of the training rows.
fn compute_gram(x: &Array2<f64>, kernel: &KernelSpec) -> Array2<f64> {
    let mut g = x.dot(&x.t());
    if let KernelSpec::Rbf { gamma } = kernel {
        let sq: Vec<f64> = (0..g.nrows()).map(|i| g[[i, i]]).collect();
        for ((i, j), v) in g.indexed_iter_mut() {
            let dist_sq = (sq[i] + sq[j] - 2.0 * *v).max(0.0);
            *v = (-gamma * dist_sq).exp();
        }
    }
    g
}

/// Core training loop. `gram`, when given, must be the kernel matrix
/// of `x`; otherwise kernel values are computed on demand.
fn smo_train(
    x: &Array2<f64>,
    gram: Option<&Array2<f64>>,
    y: &[f64],
    config: &SvmConfig,
) -> Result<SvmBinaryModel> {
    config.validate()?;
    let n = x.nrows();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if y.len() != n {
        return Err(Error::ShapeMismatch {
            subject: "binary labels".into(),
            expected: format!("{n} labels"),
            found: format!("{} labels", y.len()),
        });
    }
    if !y.iter().all(|&v| v == 1.0 || v == -1.0) {
        return Err(Error::invalid("labels", "binary labels must be exactly +1 or -1"));
    }
    if !y.contains(&1.0) || !y.contains(&-1.0) {
        return Err(Error::SingleClass);
    }

    let k = |i: usize, j: usize| match gram {
        Some(g) => g[[i, j]],
        None => kernel_eval(&config.kernel, x.row(i), x.row(j)),
    };
    let c = config.c;
    let mut alpha = vec![0.0f64; n];
    let mut b = 0.0f64;
    // Cached prediction errors: e[i] = f(x_i) - y_i. All multipliers
    // start at zero, so f is identically zero.
    let mut e: Vec<f64> = y.iter().map(|&yi| -yi).collect();

    // Tries to optimize the pair (i, j); applies the update and
    // refreshes the error cache when the step is large enough.
    let attempt = |i: usize,
                   j: usize,
                   alpha: &mut [f64],
                   e: &mut [f64],
                   b: &mut f64|
     -> bool {
        let (ei, ej) = (e[i], e[j]);
        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        let (lo, hi) = if y[i] != y[j] {
            ((aj_old - ai_old).max(0.0), (c + aj_old - ai_old).min(c))
        } else {
            ((ai_old + aj_old - c).max(0.0), (ai_old + aj_old).min(c))
        };
        if lo >= hi {
            return false;
        }
        let (kii, kjj, kij) = (k(i, i), k(j, j), k(i, j));
        let eta = 2.0 * kij - kii - kjj;
        if eta >= 0.0 {
            return false;
        }
        // Snap results that land within rounding error of a bound onto
        // it, so no phantom support vector with a ~1e-16 multiplier
        // survives a step that really drove it to zero.
        let eps = 1e-10 * c.max(1.0);
        let snap = |v: f64| {
            if v < eps {
                0.0
            } else if v > c - eps {
                c
            } else {
                v
            }
        };
        let aj = snap((aj_old - y[j] * (ei - ej) / eta).clamp(lo, hi));
        if (aj - aj_old).abs() < 1e-5 {
            return false;
        }
        let ai = snap(ai_old + y[i] * y[j] * (aj_old - aj));
        let (dai, daj) = (ai - ai_old, aj - aj_old);
        let b1 = *b - ei - y[i] * dai * kii - y[j] * daj * kij;
        let b2 = *b - ej - y[i] * dai * kij - y[j] * daj * kjj;
        let b_new = if ai > 0.0 && ai < c {
            b1
        } else if aj > 0.0 && aj < c {
            b2
        } else {
            0.5 * (b1 + b2)
        };
        let db = b_new - *b;
        for (t, et) in e.iter_mut().enumerate() {
            *et += y[i] * dai * k(i, t) + y[j] * daj * k(j, t) + db;
        }
        alpha[i] = ai;
        alpha[j] = aj;
        *b = b_new;
        true
    };

    let mut quiet_passes = 0;
    let mut sweeps = 0;
    while quiet_passes < config.max_passes && sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut changed = 0usize;
        for i in 0..n {
            let ri = e[i] * y[i];
            let violates = (ri < -config.tol && alpha[i] < c) || (ri > config.tol && alpha[i] > 0.0);
            if !violates {
                continue;
            }
            // Partner with the largest error gap first (lowest index
            // wins ties), then the remaining rows in ascending order
            // until one yields a usable step.
            let mut best = usize::MAX;
            let mut best_gap = -1.0;
            for cand in 0..n {
                if cand == i {
                    continue;
                }
                let gap = (e[i] - e[cand]).abs();
                if gap > best_gap {
                    best_gap = gap;
                    best = cand;
                }
            }
            let mut progressed = attempt(i, best, &mut alpha, &mut e, &mut b);
            if !progressed {
                for cand in 0..n {
                    if cand == i || cand == best {
                        continue;
                    }
                    if attempt(i, cand, &mut alpha, &mut e, &mut b) {
                        progressed = true;
                        break;
                    }
                }
            }
            if progressed {
                changed += 1;
            }
        }
        if changed == 0 {
            quiet_passes += 1;
        } else {
            quiet_passes = 0;
        }
    }

    let support: Vec<usize> = (0..n).filter(|&i| alpha[i] > 0.0).collect();

    // Final bias from the converged multipliers. Free support vectors
    // pin it exactly; with every multiplier at a bound the running value
    // from the last pair step can sit outside the feasible window, so
    // take that window's midpoint instead.
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    for i in 0..n {
        let mut g = 0.0;
        for &j in &support {
            g += alpha[j] * y[j] * k(j, i);
        }
        // The bias that would put row i exactly on its margin.
        let target = y[i] - g;
        if alpha[i] > 0.0 && alpha[i] < c {
            free_sum += target;
            free_count += 1;
        } else if (y[i] > 0.0) == (alpha[i] == 0.0) {
            lower = lower.max(target);
        } else {
            upper = upper.min(target);
        }
    }
    b = if free_count > 0 {
        free_sum / free_count as f64
    } else if lower.is_finite() && upper.is_finite() {
        0.5 * (lower + upper)
    } else if lower.is_finite() {
        lower
    } else if upper.is_finite() {
        upper
    } else {
        0.0
    };

    let mut sv = Array2::zeros((support.len(), x.ncols()));
    for (r, &i) in support.iter().enumerate() {
        sv.row_mut(r).assign(&x.row(i));
    }
    SvmBinaryModel::new(
        sv,
        support.iter().map(|&i| y[i]).collect(),
        support.iter().map(|&i| alpha[i]).collect(),
        b,
        config.kernel,
    )
}

/// Trains one binary soft-margin SVM. Requires at least one example of
/// each sign.
pub fn train_binary_svm(x: &Array2<f64>, y: &[f64], config: &SvmConfig) -> Result<SvmBinaryModel> {
    config.validate()?;
    let gram = (x.nrows() <= GRAM_LIMIT && x.nrows() > 0)
        .then(|| compute_gram(x, &config.kernel));
    smo_train(x, gram.as_ref(), y, config)
}

/// Signed decision value: the kernel-weighted vote of the support set
/// plus the bias, accumulated in storage order.
pub fn decision_function(model: &SvmBinaryModel, x: ArrayView1<f64>) -> f64 {
    let mut acc = 0.0;
    for (r, (&a, &y)) in model.alphas.iter().zip(&model.labels).enumerate() {
        acc += a * y * kernel_eval(&model.kernel, model.support_vectors.row(r), x);
    }
    acc + model.bias
}

// ── one-vs-rest ─────────────────────────────────────────────────────────

/// One binary model per class, plus the scaling applied before any
/// decision. A `None` model means the class was absent from training.
#[derive(Debug, Clone, PartialEq)]
pub struct OneVsRestModel {
    classes: Vec<i32>,
    models: Vec<Option<SvmBinaryModel>>,
    scaler: Option<ScalerParams>,
}

impl OneVsRestModel {
    /// Class ids in ascending order, parallel to [`Self::models`].
    pub fn classes(&self) -> &[i32] {
        &self.classes
    }

    pub fn models(&self) -> &[Option<SvmBinaryModel>] {
        &self.models
    }

    pub fn scaler(&self) -> Option<&ScalerParams> {
        self.scaler.as_ref()
    }

    /// Attaches scaling statistics that [`Self::predict`] applies to
    /// every incoming row.
    pub fn with_scaler(mut self, scaler: ScalerParams) -> OneVsRestModel {
        self.scaler = Some(scaler);
        self
    }

    /// Predicts the class with the highest decision value; exact ties
    /// go to the lowest class id. Classes without a model abstain.
    pub fn predict(&self, x: ArrayView1<f64>) -> Result<i32> {
        let row: Array1<f64> = match &self.scaler {
            Some(params) => {
                let mut m = Array2::zeros((1, x.len()));
                m.row_mut(0).assign(&x);
                apply_scaler(&m, params)?.row(0).to_owned()
            }
            None => x.to_owned(),
        };
        let mut best: Option<(i32, f64)> = None;
        for (&class, model) in self.classes.iter().zip(&self.models) {
            let Some(model) = model else { continue };
            let value = decision_function(model, row.view());
            if best.is_none_or(|(_, bv)| value > bv) {
                best = Some((class, value));
            }
        }
        best.map(|(class, _)| class).ok_or(Error::SingleClass)
    }

    /// Predicts many rows, preserving order.
    pub fn predict_rows(&self, x: &Array2<f64>) -> Result<Vec<i32>> {
        (0..x.nrows())
            .into_par_iter()
            .map(|i| self.predict(x.row(i)))
            .collect()
    }
}

fn distinct_classes(labels: &[i32]) -> Vec<i32> {
    let set: BTreeSet<i32> = labels.iter().copied().collect();
    set.into_iter().collect()
}

fn select_rows(x: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((rows.len(), x.ncols()));
    for (r, &i) in rows.iter().enumerate() {
        out.row_mut(r).assign(&x.row(i));
    }
    out
}

/// Trains one binary model per class present in `labels`, sharing one
/// kernel matrix across them. Requires at least two distinct classes.
pub fn train_one_vs_rest(
    x: &Array2<f64>,
    labels: &[i32],
    config: &SvmConfig,
) -> Result<OneVsRestModel> {
    config.validate()?;
    if x.nrows() == 0 {
        return Err(Error::EmptyInput);
    }
    if labels.len() != x.nrows() {
        return Err(Error::ShapeMismatch {
            subject: "class labels".into(),
            expected: format!("{} labels", x.nrows()),
            found: format!("{} labels", labels.len()),
        });
    }
    let classes = distinct_classes(labels);
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }
    let gram = (x.nrows() <= GRAM_LIMIT).then(|| compute_gram(x, &config.kernel));
    let models = classes
        .iter()
        .map(|&class| {
            let y: Vec<f64> = labels.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
            smo_train(x, gram.as_ref(), &y, config).map(Some)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OneVsRestModel { classes, models, scaler: None })
}

// ── cross-validation ────────────────────────────────────────────────────

/// Row indices of each fold, ascending within a fold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldPlan {
    folds: Vec<Vec<usize>>,
    seed: u64,
}

impl FoldPlan {
    pub fn folds(&self) -> &[Vec<usize>] {
        &self.folds
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }
}

/// Splits `n` rows into `k` folds of size within one of each other: the
/// rows are shuffled once, then dealt round-robin. Requires `2 <= k <= n`.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::invalid("folds", format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::invalid(
            "folds",
            format!("cannot split {n} rows into {k} folds"),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (position, row) in order.into_iter().enumerate() {
        folds[position % k].push(row);
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(FoldPlan { folds, seed })
}

/// Settings for [`evaluate_cv`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CvConfig {
    pub k: usize,
    pub svm: SvmConfig,
    pub scaler: ScalerMode,
    pub seed: u64,
}

/// A class that had no positive training example in some fold, so that
/// fold's model for it was skipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SkippedModel {
    pub fold: usize,
    pub class: i32,
}

/// Aggregated cross-validation metrics. Accuracies are percentages;
/// the confusion matrix is indexed `[true class][predicted class]` in
/// the order of `classes`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub overall_accuracy: f64,
    pub classes: Vec<i32>,
    pub per_class_accuracy: Vec<f64>,
    pub confusion: Vec<Vec<usize>>,
    pub folds: usize,
    pub skipped: Vec<SkippedModel>,
}

impl EvalReport {
    /// Builds the metrics from parallel truth/prediction slices. A
    /// class with no true instances scores zero recall.
    pub fn from_predictions(truth: &[i32], predicted: &[i32], folds: usize) -> Result<EvalReport> {
        if truth.is_empty() {
            return Err(Error::EmptyInput);
        }
        if truth.len() != predicted.len() {
            return Err(Error::ShapeMismatch {
                subject: "predictions".into(),
                expected: format!("{} values", truth.len()),
                found: format!("{} values", predicted.len()),
            });
        }
        let mut all: Vec<i32> = truth.to_vec();
        all.extend_from_slice(predicted);
        let classes = distinct_classes(&all);
        let index = |class: i32| classes.binary_search(&class).expect("class listed");
        let mut confusion = vec![vec![0usize; classes.len()]; classes.len()];
        for (&t, &p) in truth.iter().zip(predicted) {
            confusion[index(t)][index(p)] += 1;
        }
        let mut correct = 0usize;
        let per_class_accuracy = classes
            .iter()
            .enumerate()
            .map(|(ci, _)| {
                let row_total: usize = confusion[ci].iter().sum();
                correct += confusion[ci][ci];
                if row_total == 0 {
                    0.0
                } else {
                    confusion[ci][ci] as f64 / row_total as f64 * 100.0
                }
            })
            .collect();
        Ok(EvalReport {
            overall_accuracy: correct as f64 / truth.len() as f64 * 100.0,
            classes,
            per_class_accuracy,
            confusion,
            folds,
            skipped: Vec::new(),
        })
    }
}

/// Metrics plus the out-of-fold prediction for every row.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub report: EvalReport,
    pub predictions: Vec<i32>,
}

/// Runs k-fold cross-validation: per fold, scaling statistics are
/// fitted on the training rows alone, one-vs-rest models are trained
/// on them, and the held-out rows are predicted. Every row is
/// predicted exactly once. The class list is fixed from the full label
/// set; a class absent from some fold's training rows is skipped there
/// and flagged in the report. A training split with fewer than two
/// distinct classes is an error.
pub fn evaluate_cv(features: &Array2<f64>, labels: &[i32], config: &CvConfig) -> Result<EvalOutcome> {
    config.svm.validate()?;
    let n = features.nrows();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if labels.len() != n {
        return Err(Error::ShapeMismatch {
            subject: "class labels".into(),
            expected: format!("{n} labels"),
            found: format!("{} labels", labels.len()),
        });
    }
    let classes = distinct_classes(labels);
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }
    let plan = make_folds(n, config.k, config.seed)?;

    type FoldOutcome = (Vec<(usize, i32)>, Vec<SkippedModel>);
    let fold_outcomes: Vec<FoldOutcome> = (0..config.k)
        .into_par_iter()
        .map(|f| -> Result<FoldOutcome> {
            let test = &plan.folds()[f];
            let mut held_out = vec![false; n];
            for &row in test {
                held_out[row] = true;
            }
            let train: Vec<usize> = (0..n).filter(|&row| !held_out[row]).collect();
            let train_labels: Vec<i32> = train.iter().map(|&row| labels[row]).collect();
            let present = distinct_classes(&train_labels);
            if present.len() < 2 {
                return Err(Error::SingleClass);
            }
            let train_x = select_rows(features, &train);
            let params = fit_scaler(&train_x, config.scaler)?;
            let train_scaled = apply_scaler(&train_x, &params)?;
            let gram = (train.len() <= GRAM_LIMIT)
                .then(|| compute_gram(&train_scaled, &config.svm.kernel));
            let mut models = Vec::with_capacity(classes.len());
            let mut skipped = Vec::new();
            for &class in &classes {
                if !present.contains(&class) {
                    skipped.push(SkippedModel { fold: f, class });
                    models.push(None);
                    continue;
                }
                let y: Vec<f64> = train_labels
                    .iter()
                    .map(|&l| if l == class { 1.0 } else { -1.0 })
                    .collect();
                models.push(Some(smo_train(&train_scaled, gram.as_ref(), &y, &config.svm)?));
            }
            let model = OneVsRestModel {
                classes: classes.clone(),
                models,
                scaler: Some(params),
            };
            let preds = test
                .iter()
                .map(|&row| Ok((row, model.predict(features.row(row))?)))
                .collect::<Result<Vec<_>>>()?;
            Ok((preds, skipped))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut predictions: Vec<Option<i32>> = vec![None; n];
    let mut skipped = Vec::new();
    for (preds, fold_skipped) in fold_outcomes {
        for (row, pred) in preds {
            debug_assert!(predictions[row].is_none());
            predictions[row] = Some(pred);
        }
        skipped.extend(fold_skipped);
    }
    let predictions: Vec<i32> = predictions
        .into_iter()
        .map(|p| p.expect("every row belongs to exactly one fold"))
        .collect();
    let mut report = EvalReport::from_predictions(labels, &predictions, config.k)?;
    report.skipped = skipped;
    Ok(EvalOutcome { report, predictions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use ndarray::{arr1, arr2};
    use rand::Rng;

    // ── kernels ──

    #[test]
    fn linear_kernel_is_the_dot_product() {
        let k = kernel_eval(&KernelSpec::Linear, arr1(&[1.0, 2.0]).view(), arr1(&[3.0, 4.0]).view());
        assert_eq!(k, 11.0);
    }

    #[test]
    fn rbf_kernel_matches_closed_forms() {
        let rbf = KernelSpec::Rbf { gamma: 0.5 };
        let a = arr1(&[0.0, 0.0]);
        let b = arr1(&[1.0, 1.0]);
        assert_eq!(kernel_eval(&rbf, a.view(), a.view()), 1.0);
        let k = kernel_eval(&rbf, a.view(), b.view());
        assert!((k - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(k, kernel_eval(&rbf, b.view(), a.view()));
    }

    // ── binary training ──

    fn two_point_config() -> SvmConfig {
        SvmConfig {
            c: 10.0,
            kernel: KernelSpec::Linear,
            tol: 1e-3,
            max_passes: 10,
        }
    }

    #[test]
    fn two_point_problem_recovers_the_analytic_solution() {
        let x = arr2(&[[-1.0], [1.0]]);
        let y = [-1.0, 1.0];
        let model = train_binary_svm(&x, &y, &two_point_config()).unwrap();
        assert_eq!(model.support_count(), 2);
        for &a in model.alphas() {
            assert!((a - 0.5).abs() < 1e-6);
        }
        assert!(model.bias().abs() < 1e-6);
        // The decision function is f(x) = x.
        for probe in [-1.0, -0.3, 0.0, 0.7, 2.0] {
            let f = decision_function(&model, arr1(&[probe]).view());
            assert!((f - probe).abs() < 1e-6, "f({probe}) = {f}");
        }
    }

    fn random_problem(n: usize, dim: usize, seed: u64, separation: f64) -> (Array2<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::zeros((n, dim));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let label = if i % 2 == 0 { 1.0 } else { -1.0 };
            for c in 0..dim {
                let center = if c == 0 { label * separation } else { 0.0 };
                x[[i, c]] = center + rng.gen_range(-1.0..1.0);
            }
            y.push(label);
        }
        (x, y)
    }

    #[test]
    fn trained_multipliers_are_feasible() {
        for seed in 0..6 {
            let (x, y) = random_problem(12, 3, seed, 0.8);
            let config = SvmConfig {
                c: 2.5,
                kernel: if seed % 2 == 0 { KernelSpec::Linear } else { KernelSpec::Rbf { gamma: 0.4 } },
                tol: 1e-3,
                max_passes: 10,
            };
            let model = train_binary_svm(&x, &y, &config).unwrap();
            let mut balance = 0.0;
            for (&a, &label) in model.alphas().iter().zip(model.labels()) {
                assert!(a > 0.0 && a <= config.c + 1e-12);
                balance += a * label;
            }
            assert!(balance.abs() < 1e-6, "multiplier balance {balance}");
        }
    }

    #[test]
    fn trained_models_satisfy_the_optimality_conditions() {
        for seed in 0..6 {
            let (x, y) = random_problem(16, 2, seed + 50, 1.2);
            let config = SvmConfig {
                c: 5.0,
                kernel: KernelSpec::Rbf { gamma: 0.7 },
                tol: 1e-3,
                max_passes: 10,
            };
            let model = train_binary_svm(&x, &y, &config).unwrap();
            let mut alpha = vec![0.0; x.nrows()];
            // Recover the full multiplier vector by matching support rows.
            for (r, a) in model.alphas().iter().enumerate() {
                let sv = model.support_vectors().row(r);
                let i = (0..x.nrows())
                    .find(|&i| x.row(i) == sv && alpha[i] == 0.0)
                    .expect("support vector is a training row");
                alpha[i] = *a;
            }
            let slack = config.tol + 1e-6;
            for i in 0..x.nrows() {
                let margin = y[i] * decision_function(&model, x.row(i));
                if alpha[i] == 0.0 {
                    assert!(margin >= 1.0 - slack, "seed {seed} row {i}: margin {margin}");
                } else if alpha[i] < config.c {
                    assert!((margin - 1.0).abs() <= slack, "seed {seed} row {i}: margin {margin}");
                } else {
                    assert!(margin <= 1.0 + slack, "seed {seed} row {i}: margin {margin}");
                }
            }
        }
    }

    /// Value of the dual objective for a multiplier vector.
    fn dual_objective(alpha: &[f64], y: &[f64], k: &Array2<f64>) -> f64 {
        let n = alpha.len();
        let mut value: f64 = alpha.iter().sum();
        for i in 0..n {
            for j in 0..n {
                value -= 0.5 * alpha[i] * alpha[j] * y[i] * y[j] * k[[i, j]];
            }
        }
        value
    }

    /// Exhaustive reference optimum: every multiplier is pinned at 0,
    /// pinned at C, or left free; free values come from the linear
    /// stationarity system of that assignment. The best feasible value
    /// over all assignments is the global optimum of the concave dual.
    fn oracle_best_dual(y: &[f64], k: &Array2<f64>, c: f64) -> f64 {
        let n = y.len();
        let mut best = f64::NEG_INFINITY;
        for mask in 0..3usize.pow(n as u32) {
            let mut kind = [0u8; 8];
            let mut m = mask;
            for slot in kind.iter_mut().take(n) {
                *slot = (m % 3) as u8;
                m /= 3;
            }
            let free: Vec<usize> = (0..n).filter(|&t| kind[t] == 2).collect();
            let bound: Vec<usize> = (0..n).filter(|&t| kind[t] == 1).collect();
            let mut alpha = vec![0.0; n];
            for &i in &bound {
                alpha[i] = c;
            }
            if free.is_empty() {
                let balance: f64 = bound.iter().map(|&i| y[i]).sum();
                if balance.abs() < 1e-12 {
                    best = best.max(dual_objective(&alpha, y, k));
                }
                continue;
            }
            let m = free.len();
            let mut a = DMatrix::zeros(m + 1, m + 1);
            let mut rhs = DVector::zeros(m + 1);
            for (r, &i) in free.iter().enumerate() {
                for (col, &j) in free.iter().enumerate() {
                    a[(r, col)] = y[i] * y[j] * k[[i, j]];
                }
                a[(r, m)] = y[i];
                let from_bound: f64 = bound.iter().map(|&j| y[i] * y[j] * k[[i, j]] * c).sum();
                rhs[r] = 1.0 - from_bound;
            }
            for (col, &j) in free.iter().enumerate() {
                a[(m, col)] = y[j];
            }
            rhs[m] = -c * bound.iter().map(|&j| y[j]).sum::<f64>();
            let Some(solution) = a.lu().solve(&rhs) else { continue };
            let feasible = free
                .iter()
                .enumerate()
                .all(|(t, _)| solution[t] >= -1e-9 && solution[t] <= c + 1e-9);
            if !feasible {
                continue;
            }
            for (t, &i) in free.iter().enumerate() {
                alpha[i] = solution[t].clamp(0.0, c);
            }
            best = best.max(dual_objective(&alpha, y, k));
        }
        best
    }

    fn model_dual_value(model: &SvmBinaryModel) -> f64 {
        let sv = model.support_vectors();
        let m = sv.nrows();
        let mut k = Array2::zeros((m, m));
        for i in 0..m {
            for j in 0..m {
                k[[i, j]] = kernel_eval(model.kernel(), sv.row(i), sv.row(j));
            }
        }
        dual_objective(model.alphas(), model.labels(), &k)
    }

    #[test]
    fn training_reaches_the_reference_dual_optimum() {
        for seed in 0..8 {
            let n = 4 + (seed as usize % 5); // 4..=8 points
            let (x, y) = random_problem(n, 2, seed + 100, 0.6);
            let config = SvmConfig {
                c: 1.5,
                kernel: if seed % 2 == 0 { KernelSpec::Linear } else { KernelSpec::Rbf { gamma: 0.8 } },
                tol: 1e-4,
                max_passes: 20,
            };
            let model = train_binary_svm(&x, &y, &config).unwrap();
            let mut k = Array2::zeros((n, n));
            for i in 0..n {
                for j in 0..n {
                    k[[i, j]] = kernel_eval(&config.kernel, x.row(i), x.row(j));
                }
            }
            let best = oracle_best_dual(&y, &k, config.c);
            let reached = model_dual_value(&model);
            assert!(
                (reached - best).abs() <= 1e-3 * (1.0 + best.abs()),
                "seed {seed}: reached {reached}, optimum {best}"
            );
        }
    }

    #[test]
    fn two_point_dual_has_the_closed_form_value() {
        // W(a) = 2a - 2a^2 for the symmetric pair, maximized at a = 1/2.
        let x = arr2(&[[-1.0], [1.0]]);
        let y = [-1.0, 1.0];
        let model = train_binary_svm(&x, &y, &two_point_config()).unwrap();
        assert!((model_dual_value(&model) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn decision_matches_compensated_summation() {
        fn two_sum(a: f64, b: f64) -> (f64, f64) {
            let s = a + b;
            let bb = s - a;
            (s, (a - (s - bb)) + (b - bb))
        }
        let (x, y) = random_problem(30, 4, 321, 0.5);
        let config = SvmConfig {
            c: 3.0,
            kernel: KernelSpec::Rbf { gamma: 0.3 },
            tol: 1e-3,
            max_passes: 10,
        };
        let model = train_binary_svm(&x, &y, &config).unwrap();
        let probe = arr1(&[0.1, -0.2, 0.3, 0.05]);
        let got = decision_function(&model, probe.view());
        // Reference: the same terms accumulated with error compensation.
        let (mut hi, mut lo) = (0.0f64, 0.0f64);
        for r in 0..model.support_count() {
            let term = model.alphas()[r]
                * model.labels()[r]
                * kernel_eval(model.kernel(), model.support_vectors().row(r), probe.view());
            let (s, err) = two_sum(hi, term);
            hi = s;
            lo += err;
        }
        let want = hi + lo + model.bias();
        assert!((got - want).abs() <= 1e-9 * (1.0 + want.abs()), "{got} vs {want}");
    }

    #[test]
    fn empty_support_set_returns_the_bias() {
        let model = SvmBinaryModel::new(
            Array2::zeros((0, 2)),
            vec![],
            vec![],
            -0.75,
            KernelSpec::Linear,
        )
        .unwrap();
        assert_eq!(decision_function(&model, arr1(&[5.0, 5.0]).view()), -0.75);
    }

    #[test]
    fn predictions_ignore_support_vector_order() {
        let (x, y) = random_problem(20, 3, 77, 0.7);
        let config = SvmConfig {
            c: 4.0,
            kernel: KernelSpec::Rbf { gamma: 0.5 },
            tol: 1e-3,
            max_passes: 10,
        };
        let model = train_binary_svm(&x, &y, &config).unwrap();
        let m = model.support_count();
        assert!(m >= 2);
        // Rebuild the model with the support set reversed.
        let order: Vec<usize> = (0..m).rev().collect();
        let mut sv = Array2::zeros((m, x.ncols()));
        for (r, &from) in order.iter().enumerate() {
            sv.row_mut(r).assign(&model.support_vectors().row(from));
        }
        let reversed = SvmBinaryModel::new(
            sv,
            order.iter().map(|&i| model.labels()[i]).collect(),
            order.iter().map(|&i| model.alphas()[i]).collect(),
            model.bias(),
            *model.kernel(),
        )
        .unwrap();
        for i in 0..x.nrows() {
            let a = decision_function(&model, x.row(i));
            let b = decision_function(&reversed, x.row(i));
            assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
            assert_eq!(a.signum(), b.signum());
        }
    }

    #[test]
    fn training_rejects_bad_inputs() {
        let x = arr2(&[[0.0], [1.0]]);
        assert!(matches!(
            train_binary_svm(&x, &[1.0, 1.0], &two_point_config()),
            Err(Error::SingleClass)
        ));
        assert!(train_binary_svm(&x, &[1.0], &two_point_config()).is_err());
        assert!(train_binary_svm(&x, &[1.0, 0.5], &two_point_config()).is_err());
        let bad_c = SvmConfig { c: 0.0, ..two_point_config() };
        assert!(train_binary_svm(&x, &[1.0, -1.0], &bad_c).is_err());
        let bad_gamma = SvmConfig {
            kernel: KernelSpec::Rbf { gamma: 0.0 },
            ..two_point_config()
        };
        assert!(train_binary_svm(&x, &[1.0, -1.0], &bad_gamma).is_err());
    }

    // ── one-vs-rest ──

    fn three_clusters(per: usize, seed: u64) -> (Array2<f64>, Vec<i32>) {
        let centers = [[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::zeros((3 * per, 2));
        let mut labels = Vec::new();
        for (ci, center) in centers.iter().enumerate() {
            for p in 0..per {
                let r = ci * per + p;
                x[[r, 0]] = center[0] + rng.gen_range(-0.8..0.8);
                x[[r, 1]] = center[1] + rng.gen_range(-0.8..0.8);
                labels.push(ci as i32 * 2); // classes 0, 2, 4
            }
        }
        (x, labels)
    }

    #[test]
    fn one_vs_rest_separates_three_clusters() {
        let (x, labels) = three_clusters(15, 9);
        let model = train_one_vs_rest(&x, &labels, &SvmConfig::for_dim(2)).unwrap();
        assert_eq!(model.classes(), &[0, 2, 4]);
        assert!(model.models().iter().all(|m| m.is_some()));
        let predicted = model.predict_rows(&x).unwrap();
        assert_eq!(predicted, labels);
    }

    #[test]
    fn exact_ties_resolve_to_the_lowest_class() {
        // Mirror-symmetric pair: both binary decisions vanish at the
        // origin, so the tie must fall to class 0.
        let x = arr2(&[[-1.0], [1.0]]);
        let labels = vec![0, 1];
        let model = train_one_vs_rest(&x, &labels, &two_point_config()).unwrap();
        let d0 = decision_function(model.models()[0].as_ref().unwrap(), arr1(&[0.0]).view());
        let d1 = decision_function(model.models()[1].as_ref().unwrap(), arr1(&[0.0]).view());
        assert_eq!(d0, d1);
        assert_eq!(model.predict(arr1(&[0.0]).view()).unwrap(), 0);
    }

    #[test]
    fn one_vs_rest_requires_two_classes() {
        let x = arr2(&[[0.0], [1.0]]);
        assert!(matches!(
            train_one_vs_rest(&x, &[3, 3], &two_point_config()),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn attached_scaler_is_applied_before_deciding() {
        let (x, labels) = three_clusters(12, 31);
        let params = fit_scaler(&x, ScalerMode::Standardize).unwrap();
        let scaled = apply_scaler(&x, &params).unwrap();
        let model = train_one_vs_rest(&scaled, &labels, &SvmConfig::for_dim(2)).unwrap();
        let with_scaler = model.clone().with_scaler(params);
        for i in 0..x.nrows() {
            let direct = model.predict(scaled.row(i)).unwrap();
            let through = with_scaler.predict(x.row(i)).unwrap();
            assert_eq!(direct, through);
        }
    }

    // ── folds ──

    #[test]
    fn fold_sizes_differ_by_at_most_one() {
        let plan = make_folds(95, 10, 3).unwrap();
        let sizes: Vec<usize> = plan.folds().iter().map(|f| f.len()).collect();
        assert_eq!(sizes, vec![10, 10, 10, 10, 10, 9, 9, 9, 9, 9]);
    }

    #[test]
    fn folds_partition_the_rows() {
        let plan = make_folds(31, 4, 11).unwrap();
        let mut seen: Vec<usize> = plan.folds().iter().flatten().copied().collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..31).collect::<Vec<_>>());
        assert_eq!(plan.len(), 4);
        // Determinism per seed; different seeds shuffle differently.
        assert_eq!(make_folds(31, 4, 11).unwrap(), plan);
        assert_ne!(make_folds(31, 4, 12).unwrap().folds(), plan.folds());
    }

    #[test]
    fn fold_parameters_are_validated() {
        assert!(make_folds(10, 1, 0).is_err());
        assert!(make_folds(3, 4, 0).is_err());
        assert!(make_folds(4, 4, 0).is_ok());
    }

    // ── metrics ──

    #[test]
    fn report_handles_a_degenerate_predictor() {
        let truth = vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let predicted = vec![0; 10];
        let report = EvalReport::from_predictions(&truth, &predicted, 2).unwrap();
        assert_eq!(report.overall_accuracy, 50.0);
        assert_eq!(report.classes, vec![0, 1]);
        assert_eq!(report.per_class_accuracy, vec![100.0, 0.0]);
        assert_eq!(report.confusion, vec![vec![5, 0], vec![5, 0]]);
        assert_eq!(report.folds, 2);
    }

    #[test]
    fn report_rejects_mismatched_lengths() {
        assert!(EvalReport::from_predictions(&[0, 1], &[0], 2).is_err());
        assert!(EvalReport::from_predictions(&[], &[], 2).is_err());
    }

    // ── cross-validation ──

    fn cluster_cv_config(k: usize, seed: u64) -> CvConfig {
        CvConfig {
            k,
            svm: SvmConfig::for_dim(2),
            scaler: ScalerMode::Standardize,
            seed,
        }
    }

    #[test]
    fn cross_validation_predicts_every_row_once() {
        let (x, labels) = three_clusters(20, 40);
        let outcome = evaluate_cv(&x, &labels, &cluster_cv_config(5, 1)).unwrap();
        assert_eq!(outcome.predictions.len(), labels.len());
        assert!(outcome.report.skipped.is_empty());
        assert!(outcome.report.overall_accuracy >= 95.0);
        assert_eq!(outcome.report.classes, vec![0, 2, 4]);
        let correct = outcome
            .predictions
            .iter()
            .zip(&labels)
            .filter(|(p, t)| p == t)
            .count();
        let expected = correct as f64 / labels.len() as f64 * 100.0;
        assert_eq!(outcome.report.overall_accuracy, expected);
    }

    #[test]
    fn cross_validation_matches_a_leak_free_reference() {
        // The held-out rows include extreme values, so fitting the
        // scaler on them too would shift every statistic. The outcome
        // must equal a reference pipeline that never sees them.
        let (mut x, labels) = three_clusters(10, 55);
        x[[0, 0]] = 500.0;
        x[[17, 1]] = -800.0;
        let config = cluster_cv_config(2, 6);
        let outcome = evaluate_cv(&x, &labels, &config).unwrap();

        let plan = make_folds(x.nrows(), config.k, config.seed).unwrap();
        let mut reference = vec![None; x.nrows()];
        for fold in plan.folds() {
            let mut held_out = vec![false; x.nrows()];
            for &row in fold {
                held_out[row] = true;
            }
            let train: Vec<usize> = (0..x.nrows()).filter(|&r| !held_out[r]).collect();
            let train_x = select_rows(&x, &train);
            let train_labels: Vec<i32> = train.iter().map(|&r| labels[r]).collect();
            let params = fit_scaler(&train_x, config.scaler).unwrap();
            let train_scaled = apply_scaler(&train_x, &params).unwrap();
            let model = train_one_vs_rest(&train_scaled, &train_labels, &config.svm).unwrap();
            let test_scaled = apply_scaler(&select_rows(&x, fold), &params).unwrap();
            for (t, &row) in fold.iter().enumerate() {
                reference[row] = Some(model.predict(test_scaled.row(t)).unwrap());
            }
        }
        let reference: Vec<i32> = reference.into_iter().map(Option::unwrap).collect();
        assert_eq!(outcome.predictions, reference);
    }

    #[test]
    fn missing_class_in_training_is_skipped_and_flagged() {
        let (x, mut labels) = three_clusters(8, 70);
        // A lone example of class 9: whichever fold holds it out trains
        // without any positive example for it.
        labels[5] = 9;
        let outcome = evaluate_cv(&x, &labels, &cluster_cv_config(2, 4)).unwrap();
        assert_eq!(outcome.report.skipped.len(), 1);
        assert_eq!(outcome.report.skipped[0].class, 9);
        assert!(outcome.report.skipped[0].fold < 2);
        // The lone row was still predicted, necessarily as some other class.
        assert_ne!(outcome.predictions[5], 9);
        let ci = outcome.report.classes.iter().position(|&c| c == 9).unwrap();
        assert_eq!(outcome.report.per_class_accuracy[ci], 0.0);
    }

    #[test]
    fn single_class_training_split_is_an_error() {
        let x = arr2(&[[0.0, 0.0], [5.0, 5.0]]);
        let labels = vec![0, 1];
        assert!(matches!(
            evaluate_cv(&x, &labels, &cluster_cv_config(2, 0)),
            Err(Error::SingleClass)
        ));
        let same = vec![4, 4, 4, 4];
        let x4 = Array2::zeros((4, 2));
        assert!(matches!(
            evaluate_cv(&x4, &same, &cluster_cv_config(2, 0)),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn cross_validation_is_deterministic() {
        let (x, labels) = three_clusters(12, 90);
        let config = cluster_cv_config(4, 17);
        let a = evaluate_cv(&x, &labels, &config).unwrap();
        let b = evaluate_cv(&x, &labels, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a.report).unwrap(),
            serde_json::to_string(&b.report).unwrap()
        );
        let shifted = evaluate_cv(&x, &labels, &cluster_cv_config(4, 18)).unwrap();
        assert_eq!(a.predictions.len(), shifted.predictions.len());
    }

    // ── properties ──

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn folds_cover_rows_exactly_once(n in 4usize..120, k in 2usize..8, seed in 0u64..1000) {
            proptest::prop_assume!(n >= k);
            let plan = make_folds(n, k, seed).unwrap();
            let sizes: Vec<usize> = plan.folds().iter().map(|f| f.len()).collect();
            let (lo, hi) = (n / k, n.div_ceil(k));
            proptest::prop_assert!(sizes.iter().all(|&s| s == lo || s == hi));
            let mut seen: Vec<usize> = plan.folds().iter().flatten().copied().collect();
            seen.sort_unstable();
            proptest::prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
        }

        #[test]
        fn multipliers_stay_feasible_on_random_problems(seed in 0u64..300, n in 2usize..7) {
            let (x, y) = random_problem(2 * n, 2, seed, 0.4);
            let config = SvmConfig {
                c: 2.0,
                kernel: KernelSpec::Rbf { gamma: 0.6 },
                tol: 1e-3,
                max_passes: 5,
            };
            let model = train_binary_svm(&x, &y, &config).unwrap();
            let mut balance = 0.0;
            for (&a, &label) in model.alphas().iter().zip(model.labels()) {
                proptest::prop_assert!(a > 0.0 && a <= config.c + 1e-12);
                balance += a * label;
            }
            proptest::prop_assert!(balance.abs() < 1e-6);
        }
    }
}
