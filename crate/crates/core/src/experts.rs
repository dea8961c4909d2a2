//! Context prior estimation and per-modality multinomial logistic experts.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::domain::{ClipRecord, ContextState, IntentDistribution, IntentLabel};
use crate::error::{Error, Result};

/// Lower bound applied to per-feature standard deviations.
pub const STD_FLOOR: f64 = 1e-6;

/// Default additive smoothing for the context prior.
pub const DEFAULT_PSEUDO_COUNT: f64 = 0.01;

const EXPERT_FILE_VERSION: u32 = 1;
const MAX_LR_HALVINGS: usize = 60;

// ---------------------------------------------------------------------------
// Context prior
// ---------------------------------------------------------------------------

/// Smoothed `P(y | c)`, one row per context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextPriorTable {
    pub rows: [IntentDistribution; 3],
    pub pseudo_count: f64,
}

impl ContextPriorTable {
    pub fn row(&self, context: ContextState) -> IntentDistribution {
        self.rows[context.index()]
    }
}

/// `row[c][y] = (count(c,y) + ε) / (count(c) + 3ε)`. Contexts with no mass
/// at all (absent, with ε = 0) fall back to the uniform row.
pub fn fit_context_prior<'a, I>(clips: I, pseudo_count: f64) -> Result<ContextPriorTable>
where
    I: IntoIterator<Item = &'a ClipRecord>,
{
    if !(pseudo_count.is_finite() && pseudo_count >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "pseudo_count must be a finite non-negative number, got {pseudo_count}"
        )));
    }
    let mut counts = [[0usize; 3]; 3];
    let mut n = 0usize;
    for clip in clips {
        counts[clip.context.index()][clip.label.index()] += 1;
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyInput("context prior needs at least one clip"));
    }

    let rows = counts.map(|row| {
        let total = row.iter().sum::<usize>() as f64 + 3.0 * pseudo_count;
        if total > 0.0 {
            IntentDistribution::from_masses(row.map(|k| k as f64 + pseudo_count))
                .unwrap_or(IntentDistribution::UNIFORM)
        } else {
            IntentDistribution::UNIFORM
        }
    });
    Ok(ContextPriorTable { rows, pseudo_count })
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, features: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = features.to_owned();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.std[j];
            }
        }
        out
    }

    pub fn transform_row(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Column means and population standard deviations, floored at
/// [`STD_FLOOR`].
pub fn fit_standardizer(features: ArrayView2<'_, f64>) -> Result<Standardizer> {
    let n = features.nrows();
    if n == 0 {
        return Err(Error::EmptyInput("standardizer needs at least one row"));
    }
    let mean = features
        .mean_axis(Axis(0))
        .expect("non-empty rows")
        .to_vec();
    let std = features
        .axis_iter(Axis(1))
        .zip(&mean)
        .map(|(col, m)| {
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
            var.sqrt().max(STD_FLOOR)
        })
        .collect();
    Ok(Standardizer { mean, std })
}

// ---------------------------------------------------------------------------
// Logistic experts
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Pose,
    Audio,
    Concat,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Pose => "pose",
            Modality::Audio => "audio",
            Modality::Concat => "concat",
        }
    }

    /// Feature vector this expert consumes for a clip.
    pub fn features(self, clip: &ClipRecord) -> Vec<f64> {
        match self {
            Modality::Pose => clip.pose_features.clone(),
            Modality::Audio => clip.audio_features.clone(),
            Modality::Concat => build_concat_features(clip),
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "pose" => Ok(Modality::Pose),
            "audio" => Ok(Modality::Audio),
            "concat" => Ok(Modality::Concat),
            other => Err(other.to_owned()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub l2_strength: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Stop once the relative loss change of an epoch falls below this.
    pub convergence_tol: f64,
    pub seed: u64,
    /// Candidate L2 strengths for inner grouped cross-validation. Empty
    /// disables tuning and uses `l2_strength` directly.
    pub l2_grid: Vec<f64>,
    pub inner_folds: usize,
    /// Additive smoothing ε of the context prior.
    pub prior_pseudo_count: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            l2_strength: 1e-2,
            learning_rate: 0.5,
            max_epochs: 5000,
            convergence_tol: 1e-8,
            seed: 0,
            l2_grid: vec![1e-3, 1e-2, 1e-1],
            inner_folds: 5,
            prior_pseudo_count: DEFAULT_PSEUDO_COUNT,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_owned()));
        if !(self.l2_strength.is_finite() && self.l2_strength >= 0.0) {
            return bad("l2_strength must be finite and non-negative");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive");
        }
        if self.convergence_tol.is_nan() || self.convergence_tol <= 0.0 {
            return bad("convergence_tol must be positive");
        }
        if self.l2_grid.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("l2_grid entries must be finite and non-negative");
        }
        if self.inner_folds < 2 {
            return bad("inner_folds must be at least 2");
        }
        if !(self.prior_pseudo_count.is_finite() && self.prior_pseudo_count >= 0.0) {
            return bad("prior_pseudo_count must be finite and non-negative");
        }
        Ok(())
    }
}

/// Trained `softmax(W · standardize(x) + b)` classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticExpert {
    /// 3 × d, rows in canonical label order.
    pub weights: Array2<f64>,
    pub bias: [f64; 3],
    pub standardizer: Standardizer,
    pub l2_strength: f64,
    pub modality: Modality,
}

/// Optimization record of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    /// Loss at initialization followed by the loss after each accepted step.
    pub losses: Vec<f64>,
    pub lr_halvings: usize,
    pub final_learning_rate: f64,
    pub converged: bool,
}

impl TrainTrace {
    pub fn epochs(&self) -> usize {
        self.losses.len().saturating_sub(1)
    }
}

/// Loss and gradient of the regularized mean cross-entropy.
#[derive(Debug, Clone)]
pub struct Objective {
    pub loss: f64,
    pub grad_weights: Array2<f64>,
    pub grad_bias: [f64; 3],
}

/// `mean_i −log softmax(W x_i + b)[y_i] + (l2/2)·‖W‖²` and its gradient.
/// `x` must already be standardized.
pub fn objective(
    weights: ArrayView2<'_, f64>,
    bias: &[f64; 3],
    x: ArrayView2<'_, f64>,
    labels: &[IntentLabel],
    l2: f64,
) -> Objective {
    let (n, d) = x.dim();
    let x = x.as_standard_layout();
    let w = weights.as_standard_layout();
    let (xs, ws) = (x.as_slice().expect("standard layout"), w.as_slice().expect("standard layout"));
    let (w0, rest) = ws.split_at(d);
    let (w1, w2) = rest.split_at(d);

    let mut grad = vec![0.0; 3 * d];
    let mut grad_bias = [0.0; 3];
    let mut loss = 0.0;
    for (row, label) in xs.chunks_exact(d.max(1)).take(n).zip(labels) {
        let row = &row[..d];
        let mut z = *bias;
        for j in 0..d {
            z[0] += w0[j] * row[j];
            z[1] += w1[j] * row[j];
            z[2] += w2[j] * row[j];
        }
        let (mut r, log_norm) = stable_softmax(z);
        let y = label.index();
        loss += log_norm - z[y];
        r[y] -= 1.0;
        let (g0, rest) = grad.split_at_mut(d);
        let (g1, g2) = rest.split_at_mut(d);
        for j in 0..d {
            g0[j] += r[0] * row[j];
            g1[j] += r[1] * row[j];
            g2[j] += r[2] * row[j];
        }
        for k in 0..3 {
            grad_bias[k] += r[k];
        }
    }

    let scale = 1.0 / n as f64;
    let mut penalty = 0.0;
    for (g, wv) in grad.iter_mut().zip(ws) {
        *g = *g * scale + l2 * wv;
        penalty += wv * wv;
    }
    Objective {
        loss: loss * scale + 0.5 * l2 * penalty,
        grad_weights: Array2::from_shape_vec((3, d), grad).expect("3 x d gradient"),
        grad_bias: grad_bias.map(|g| g * scale),
    }
}

/// Softmax with max subtraction; also returns `log Σ exp(z)`.
fn stable_softmax(z: [f64; 3]) -> ([f64; 3], f64) {
    let m = z[0].max(z[1]).max(z[2]);
    let e = z.map(|v| (v - m).exp());
    let s = e[0] + e[1] + e[2];
    (e.map(|v| v / s), m + s.ln())
}

pub fn softmax(logits: [f64; 3]) -> IntentDistribution {
    IntentDistribution::from_normalized_unchecked(stable_softmax(logits).0)
}

fn features_matrix(rows: &[Vec<f64>], d: usize) -> Result<Array2<f64>> {
    let mut m = Array2::zeros((rows.len(), d));
    for (i, r) in rows.iter().enumerate() {
        if r.len() != d {
            return Err(Error::LengthMismatch {
                expected: d,
                found: r.len(),
            });
        }
        for (j, v) in r.iter().enumerate() {
            m[[i, j]] = *v;
        }
    }
    Ok(m)
}

pub fn train_logistic_expert(
    features: ArrayView2<'_, f64>,
    labels: &[IntentLabel],
    cfg: &TrainConfig,
    modality: Modality,
) -> Result<LogisticExpert> {
    train_logistic_expert_traced(features, labels, cfg, modality).map(|(e, _)| e)
}

/// Full-batch gradient descent from zero initialization.
///
/// A step that would increase the loss is retried with half the learning
/// rate; every halving is recorded in the trace, so accepted losses are
/// non-increasing.
pub fn train_logistic_expert_traced(
    features: ArrayView2<'_, f64>,
    labels: &[IntentLabel],
    cfg: &TrainConfig,
    modality: Modality,
) -> Result<(LogisticExpert, TrainTrace)> {
    cfg.validate()?;
    let n = features.nrows();
    if n == 0 {
        return Err(Error::EmptyInput("training needs at least one row"));
    }
    if labels.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: labels.len(),
        });
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidDistribution(
            "training features must be finite".into(),
        ));
    }

    let standardizer = fit_standardizer(features)?;
    let x = standardizer.transform(features);
    let d = x.ncols();
    let l2 = cfg.l2_strength;

    let mut weights = Array2::<f64>::zeros((3, d));
    let mut bias = [0.0; 3];
    let mut current = objective(weights.view(), &bias, x.view(), labels, l2);
    if !current.loss.is_finite() {
        return Err(Error::NonFiniteLoss { epoch: 0 });
    }

    let mut lr = cfg.learning_rate;
    let mut losses = vec![current.loss];
    let mut lr_halvings = 0;
    let mut converged = false;

    'epochs: for epoch in 1..=cfg.max_epochs {
        let mut attempts = 0;
        let (cand_w, cand_b, cand) = loop {
            let mut w = weights.clone();
            w.scaled_add(-lr, &current.grad_weights);
            let b = [
                bias[0] - lr * current.grad_bias[0],
                bias[1] - lr * current.grad_bias[1],
                bias[2] - lr * current.grad_bias[2],
            ];
            let obj = objective(w.view(), &b, x.view(), labels, l2);
            if obj.loss.is_nan() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            if obj.loss <= current.loss {
                break (w, b, obj);
            }
            attempts += 1;
            if attempts > MAX_LR_HALVINGS {
                // No descent direction left at machine precision.
                converged = true;
                break 'epochs;
            }
            lr *= 0.5;
            lr_halvings += 1;
        };
        if !cand.loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }

        let rel_change = (current.loss - cand.loss).abs() / current.loss.abs().max(f64::MIN_POSITIVE);
        weights = cand_w;
        bias = cand_b;
        current = cand;
        losses.push(current.loss);
        if rel_change < cfg.convergence_tol {
            converged = true;
            break;
        }
    }

    let expert = LogisticExpert {
        weights,
        bias,
        standardizer,
        l2_strength: l2,
        modality,
    };
    let trace = TrainTrace {
        losses,
        lr_halvings,
        final_learning_rate: lr,
        converged,
    };
    Ok((expert, trace))
}

/// Trains an expert from per-row feature vectors.
pub fn train_from_rows(
    rows: &[Vec<f64>],
    labels: &[IntentLabel],
    d: usize,
    cfg: &TrainConfig,
    modality: Modality,
) -> Result<LogisticExpert> {
    let x = features_matrix(rows, d)?;
    train_logistic_expert(x.view(), labels, cfg, modality)
}

impl LogisticExpert {
    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn logits(&self, x: &[f64]) -> Result<[f64; 3]> {
        if x.len() != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let z = self.standardizer.transform_row(x);
        let mut out = self.bias;
        for (k, row) in self.weights.rows().into_iter().enumerate() {
            out[k] += row.iter().zip(&z).map(|(w, v)| w * v).sum::<f64>();
        }
        Ok(out)
    }

    /// Serializes to the versioned key-value parameter format.
    pub fn to_text(&self) -> String {
        fn join(vals: impl IntoIterator<Item = f64>) -> String {
            vals.into_iter()
                .map(|v| format!("{v:?}"))
                .collect::<Vec<_>>()
                .join(" ")
        }
        let mut s = String::new();
        let _ = writeln!(s, "# logistic expert parameters");
        let _ = writeln!(s, "format_version = {EXPERT_FILE_VERSION}");
        let _ = writeln!(s, "modality = {}", self.modality);
        let _ = writeln!(s, "classes = EXIT FOOD IDLE");
        let _ = writeln!(s, "dim = {}", self.dim());
        let _ = writeln!(s, "l2_strength = {:?}", self.l2_strength);
        let _ = writeln!(s, "weights = {}", join(self.weights.iter().copied()));
        let _ = writeln!(s, "bias = {}", join(self.bias));
        let _ = writeln!(s, "mean = {}", join(self.standardizer.mean.iter().copied()));
        let _ = writeln!(s, "std = {}", join(self.standardizer.std.iter().copied()));
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut fields = std::collections::HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i as u64 + 1,
                message: format!("expected `key = value`, got {line:?}"),
            })?;
            fields.insert(k.trim().to_owned(), (i as u64 + 1, v.trim().to_owned()));
        }
        let get = |key: &'static str| {
            fields.get(key).ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("missing key `{key}`"),
            })
        };
        let floats = |key: &'static str| -> Result<Vec<f64>> {
            let (line, v) = get(key)?;
            v.split_whitespace()
                .map(|t| {
                    t.parse::<f64>().map_err(|_| Error::Parse {
                        line: *line,
                        message: format!("bad number {t:?} for `{key}`"),
                    })
                })
                .collect()
        };

        let (line, version) = get("format_version")?;
        if version != &EXPERT_FILE_VERSION.to_string() {
            return Err(Error::Parse {
                line: *line,
                message: format!("unsupported format_version {version}"),
            });
        }
        let (line, modality) = get("modality")?;
        let modality = modality.parse::<Modality>().map_err(|token| Error::UnknownToken {
            line: *line,
            field: "modality",
            token,
        })?;
        let (line, dim) = get("dim")?;
        let dim: usize = dim.parse().map_err(|_| Error::Parse {
            line: *line,
            message: format!("bad dim {dim:?}"),
        })?;
        let l2 = floats("l2_strength")?;
        let weights = floats("weights")?;
        let bias = floats("bias")?;
        let mean = floats("mean")?;
        let std = floats("std")?;
        if l2.len() != 1 || weights.len() != 3 * dim || bias.len() != 3 || mean.len() != dim || std.len() != dim {
            return Err(Error::Parse {
                line: 0,
                message: format!("parameter lengths inconsistent with dim = {dim}"),
            });
        }
        Ok(LogisticExpert {
            weights: Array2::from_shape_vec((3, dim), weights).expect("length checked"),
            bias: [bias[0], bias[1], bias[2]],
            standardizer: Standardizer { mean, std },
            l2_strength: l2[0],
            modality,
        })
    }
}

/// `softmax(W · standardize(x) + b)`.
pub fn predict_expert(e: &LogisticExpert, x: &[f64]) -> Result<IntentDistribution> {
    Ok(softmax(e.logits(x)?))
}

/// One-hot context (canonical order) followed by pose then audio features.
pub fn build_concat_features(clip: &ClipRecord) -> Vec<f64> {
    let mut out = Vec::with_capacity(3 + clip.pose_features.len() + clip.audio_features.len());
    let mut onehot = [0.0; 3];
    onehot[clip.context.index()] = 1.0;
    out.extend_from_slice(&onehot);
    out.extend_from_slice(&clip.pose_features);
    out.extend_from_slice(&clip.audio_features);
    out
}

// ---------------------------------------------------------------------------
// L2 tuning by grouped inner cross-validation
// ---------------------------------------------------------------------------

/// Outcome of inner cross-validation over the L2 grid.
#[derive(Debug, Clone, PartialEq)]
pub struct L2Selection {
    pub l2_strength: f64,
    /// Pooled inner-CV accuracy per grid entry.
    pub scores: Vec<f64>,
}

/// Assigns each distinct group (sorted) to one of `k` folds round-robin.
pub fn grouped_kfold(groups: &[&str], k: usize) -> Vec<usize> {
    let distinct: BTreeSet<&str> = groups.iter().copied().collect();
    let k = k.min(distinct.len()).max(1);
    let fold_of: std::collections::HashMap<&str, usize> = distinct
        .into_iter()
        .enumerate()
        .map(|(i, g)| (g, i % k))
        .collect();
    groups.iter().map(|g| fold_of[g]).collect()
}

/// Picks the L2 strength with the highest pooled grouped-CV accuracy; ties
/// go to the earlier grid entry. With fewer than two groups, or an empty
/// grid, `cfg.l2_strength` is returned untouched.
pub fn select_l2(
    rows: &[Vec<f64>],
    labels: &[IntentLabel],
    groups: &[&str],
    d: usize,
    cfg: &TrainConfig,
    modality: Modality,
) -> Result<L2Selection> {
    let n_groups = groups.iter().collect::<BTreeSet<_>>().len();
    if cfg.l2_grid.is_empty() || n_groups < 2 {
        return Ok(L2Selection {
            l2_strength: cfg.l2_strength,
            scores: vec![],
        });
    }
    let x = features_matrix(rows, d)?;
    let fold_of = grouped_kfold(groups, cfg.inner_folds);
    let k = fold_of.iter().max().map_or(1, |m| m + 1);

    let mut scores = Vec::with_capacity(cfg.l2_grid.len());
    for &l2 in &cfg.l2_grid {
        let inner = TrainConfig {
            l2_strength: l2,
            ..cfg.clone()
        };
        let mut correct = 0usize;
        for fold in 0..k {
            let train_idx: Vec<usize> = (0..fold_of.len()).filter(|&i| fold_of[i] != fold).collect();
            let test_idx: Vec<usize> = (0..fold_of.len()).filter(|&i| fold_of[i] == fold).collect();
            let xt = x.select(Axis(0), &train_idx);
            let yt: Vec<IntentLabel> = train_idx.iter().map(|&i| labels[i]).collect();
            let expert = train_logistic_expert(xt.view(), &yt, &inner, modality)?;
            for &i in &test_idx {
                let p = predict_expert(&expert, &rows[i])?;
                if crate::domain::argmax_label(&p) == labels[i] {
                    correct += 1;
                }
            }
        }
        scores.push(correct as f64 / rows.len() as f64);
    }
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    Ok(L2Selection {
        l2_strength: cfg.l2_grid[best],
        scores,
    })
}

/// Mean log-loss, exposed for diagnostics.
pub fn mean_log_loss(e: &LogisticExpert, rows: &[Vec<f64>], labels: &[IntentLabel]) -> Result<f64> {
    let mut total = 0.0;
    for (x, y) in rows.iter().zip(labels) {
        total -= predict_expert(e, x)?.prob(*y).max(f64::MIN_POSITIVE).ln();
    }
    Ok(total / rows.len().max(1) as f64)
}
