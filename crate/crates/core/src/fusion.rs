//! Context-prior Product-of-Experts fusion and the late-fusion baselines.
//!
//! The full model scores each label as
//! `α·log P(y|c) + log P(y|x_pose) + log P(y|x_audio)` and normalizes with a
//! log-sum-exp. Working in log space keeps ε-smoothed structural zeros of
//! the prior (around 1e-4) from underflowing when multiplied with
//! confident expert outputs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{argmax_label, ClipRecord, IntentDistribution, IntentLabel, SIMPLEX_TOL};
use crate::error::{Error, Result};
use crate::experts::{build_concat_features, predict_expert, ContextPriorTable, LogisticExpert};

pub const DEFAULT_ALPHA: f64 = 1.0;

/// Grid resolution of [`fit_late_weights`]: weights are multiples of 1/10.
const LATE_GRID_STEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Method {
    ContextOnly,
    PoseOnly,
    AudioOnly,
    FeatureConcat,
    LateAvg,
    LateWeighted,
    PoeCtxPose,
    PoeCtxAud,
    PoeFull,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::ContextOnly,
        Method::PoseOnly,
        Method::AudioOnly,
        Method::FeatureConcat,
        Method::LateAvg,
        Method::LateWeighted,
        Method::PoeCtxPose,
        Method::PoeCtxAud,
        Method::PoeFull,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::ContextOnly => "CONTEXT_ONLY",
            Method::PoseOnly => "POSE_ONLY",
            Method::AudioOnly => "AUDIO_ONLY",
            Method::FeatureConcat => "FEATURE_CONCAT",
            Method::LateAvg => "LATE_AVG",
            Method::LateWeighted => "LATE_WEIGHTED",
            Method::PoeCtxPose => "POE_CTX_POSE",
            Method::PoeCtxAud => "POE_CTX_AUD",
            Method::PoeFull => "POE_FULL",
        }
    }

    pub fn needs(self) -> Components {
        use Method::*;
        Components {
            prior: matches!(self, ContextOnly | LateAvg | LateWeighted | PoeCtxPose | PoeCtxAud | PoeFull),
            pose: matches!(self, PoseOnly | LateAvg | LateWeighted | PoeCtxPose | PoeFull),
            audio: matches!(self, AudioOnly | LateAvg | LateWeighted | PoeCtxAud | PoeFull),
            concat: matches!(self, FeatureConcat),
            late_weights: matches!(self, LateWeighted),
        }
    }

    pub fn valid_names() -> String {
        Self::ALL.map(Method::as_str).join(", ")
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownMethod {
                given: s.to_owned(),
                valid: Self::valid_names(),
            })
    }
}

/// Which trained pieces a method consumes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Components {
    pub prior: bool,
    pub pose: bool,
    pub audio: bool,
    pub concat: bool,
    pub late_weights: bool,
}

impl Components {
    pub fn union(self, other: Components) -> Components {
        Components {
            prior: self.prior || other.prior,
            pose: self.pose || other.pose,
            audio: self.audio || other.audio,
            concat: self.concat || other.concat,
            late_weights: self.late_weights || other.late_weights,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub method: Method,
    /// Exponent on the context prior for the PoE methods.
    pub alpha: f64,
    /// Fixed (context, pose, audio) weights for LATE_WEIGHTED. When absent
    /// the weights are fit on each training fold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub late_weights: Option<[f64; 3]>,
}

impl FusionConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            alpha: DEFAULT_ALPHA,
            late_weights: None,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if let Some(w) = self.late_weights {
            check_simplex_weights(&w)?;
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha >= 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "alpha must be finite and non-negative, got {alpha}"
        )))
    }
}

fn check_simplex_weights(w: &[f64]) -> Result<()> {
    let sum: f64 = w.iter().sum();
    if w.iter().any(|v| v.is_nan() || *v < 0.0) || (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidConfig(format!(
            "late-fusion weights must be non-negative and sum to 1, got {w:?}"
        )));
    }
    Ok(())
}

/// A fused distribution plus whether the product had no finite mass at all.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusedDistribution {
    pub distribution: IntentDistribution,
    pub degenerate: bool,
}

impl FusedDistribution {
    fn plain(distribution: IntentDistribution) -> Self {
        Self {
            distribution,
            degenerate: false,
        }
    }

    pub fn label(&self) -> IntentLabel {
        argmax_label(&self.distribution)
    }
}

/// `log Σ exp(x)`; `−∞` when every entry is `−∞`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Normalizes log masses. All-`−∞` input yields uniform, flagged degenerate.
pub fn normalize_log_masses(log_masses: [f64; 3]) -> FusedDistribution {
    let z = log_sum_exp(&log_masses);
    if z == f64::NEG_INFINITY {
        return FusedDistribution {
            distribution: IntentDistribution::UNIFORM,
            degenerate: true,
        };
    }
    let p = log_masses.map(|l| (l - z).exp());
    // exp of values ≤ 0 stays in [0, 1]; one more pass removes rounding drift.
    let s: f64 = p.iter().sum();
    FusedDistribution::plain(IntentDistribution::from_normalized_unchecked(p.map(|v| v / s)))
}

/// `α·log p`, with `0·log 0 = 0` so α = 0 removes the prior entirely.
fn scaled_log(p: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        0.0
    } else {
        alpha * p.ln()
    }
}

fn poe_log_masses(prior: &IntentDistribution, evidence: &[&IntentDistribution], alpha: f64) -> [f64; 3] {
    let mut out = prior.probs().map(|p| scaled_log(p, alpha));
    for e in evidence {
        for (o, p) in out.iter_mut().zip(e.probs()) {
            *o += p.ln();
        }
    }
    out
}

/// `P(y|c)^α · P(y|x_pose) · P(y|x_audio)`, renormalized.
pub fn poe_fuse(
    prior: &IntentDistribution,
    pose: &IntentDistribution,
    audio: &IntentDistribution,
    alpha: f64,
) -> Result<FusedDistribution> {
    check_alpha(alpha)?;
    Ok(normalize_log_masses(poe_log_masses(prior, &[pose, audio], alpha)))
}

/// `P(y|c)^α · P(y|x)` for a single evidence expert.
pub fn poe_fuse_partial(
    prior: &IntentDistribution,
    evidence: &IntentDistribution,
    alpha: f64,
) -> Result<FusedDistribution> {
    check_alpha(alpha)?;
    Ok(normalize_log_masses(poe_log_masses(prior, &[evidence], alpha)))
}

/// Component-wise arithmetic mean.
pub fn late_fuse_avg(dists: &[IntentDistribution]) -> Result<IntentDistribution> {
    if dists.is_empty() {
        return Err(Error::EmptyInput("late_fuse_avg needs at least one distribution"));
    }
    let n = dists.len() as f64;
    let mut acc = [0.0; 3];
    for d in dists {
        for (a, p) in acc.iter_mut().zip(d.probs()) {
            *a += p;
        }
    }
    Ok(IntentDistribution::from_normalized_unchecked(acc.map(|v| v / n)))
}

/// Convex combination of (context, pose, audio) distributions.
pub fn late_fuse_weighted(dists: &[IntentDistribution], weights: &[f64; 3]) -> Result<IntentDistribution> {
    if dists.len() != 3 {
        return Err(Error::LengthMismatch {
            expected: 3,
            found: dists.len(),
        });
    }
    check_simplex_weights(weights)?;
    let mut acc = [0.0; 3];
    for (d, w) in dists.iter().zip(weights) {
        for (a, p) in acc.iter_mut().zip(d.probs()) {
            *a += w * p;
        }
    }
    Ok(IntentDistribution::from_normalized_unchecked(acc))
}

/// The 66 points of the step-0.1 simplex grid over (context, pose, audio).
///
/// Points are listed in descending lexicographic order, so index 0 is
/// (1, 0, 0) and the last is (0, 0, 1).
pub fn late_weight_grid() -> Vec<[f64; 3]> {
    let n = LATE_GRID_STEPS;
    let mut out = Vec::with_capacity((n + 1) * (n + 2) / 2);
    for i in (0..=n).rev() {
        for j in (0..=n - i).rev() {
            let k = n - i - j;
            out.push([i as f64 / n as f64, j as f64 / n as f64, k as f64 / n as f64]);
        }
    }
    out
}

/// Grid search for the late-fusion weights maximizing training accuracy.
/// Ties go to the lowest grid index.
pub fn fit_late_weights(
    train_predictions: &[[IntentDistribution; 3]],
    train_labels: &[IntentLabel],
) -> Result<[f64; 3]> {
    if train_predictions.len() != train_labels.len() {
        return Err(Error::LengthMismatch {
            expected: train_predictions.len(),
            found: train_labels.len(),
        });
    }
    if train_predictions.is_empty() {
        return Err(Error::EmptyInput("fit_late_weights needs at least one clip"));
    }
    let mut best: Option<([f64; 3], usize)> = None;
    for w in late_weight_grid() {
        let mut correct = 0;
        for (triple, label) in train_predictions.iter().zip(train_labels) {
            if argmax_label(&late_fuse_weighted(triple, &w)?) == *label {
                correct += 1;
            }
        }
        if best.is_none_or(|(_, c)| correct > c) {
            best = Some((w, correct));
        }
    }
    Ok(best.expect("grid is non-empty").0)
}

/// Everything trained on one fold that a method may need.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainedBundle {
    pub prior: Option<ContextPriorTable>,
    pub pose: Option<LogisticExpert>,
    pub audio: Option<LogisticExpert>,
    pub concat: Option<LogisticExpert>,
    pub late_weights: Option<[f64; 3]>,
}

impl TrainedBundle {
    fn prior(&self) -> Result<&ContextPriorTable> {
        self.prior.as_ref().ok_or(Error::MissingComponent("context prior"))
    }

    fn pose(&self) -> Result<&LogisticExpert> {
        self.pose.as_ref().ok_or(Error::MissingComponent("pose expert"))
    }

    fn audio(&self) -> Result<&LogisticExpert> {
        self.audio.as_ref().ok_or(Error::MissingComponent("audio expert"))
    }

    fn concat(&self) -> Result<&LogisticExpert> {
        self.concat.as_ref().ok_or(Error::MissingComponent("concat expert"))
    }

    /// (context, pose, audio) distributions for a clip.
    pub fn expert_triple(&self, clip: &ClipRecord) -> Result<[IntentDistribution; 3]> {
        Ok([
            self.prior()?.row(clip.context),
            predict_expert(self.pose()?, &clip.pose_features)?,
            predict_expert(self.audio()?, &clip.audio_features)?,
        ])
    }
}

/// Routes a clip through the expert/fusion composition of `cfg.method`.
pub fn predict_method(cfg: &FusionConfig, bundle: &TrainedBundle, clip: &ClipRecord) -> Result<FusedDistribution> {
    let alpha = cfg.alpha;
    let pose = || predict_expert(bundle.pose()?, &clip.pose_features);
    let audio = || predict_expert(bundle.audio()?, &clip.audio_features);
    let prior = || bundle.prior().map(|t| t.row(clip.context));

    let out = match cfg.method {
        Method::ContextOnly => FusedDistribution::plain(prior()?),
        Method::PoseOnly => FusedDistribution::plain(pose()?),
        Method::AudioOnly => FusedDistribution::plain(audio()?),
        Method::FeatureConcat => {
            FusedDistribution::plain(predict_expert(bundle.concat()?, &build_concat_features(clip))?)
        }
        Method::LateAvg => FusedDistribution::plain(late_fuse_avg(&bundle.expert_triple(clip)?)?),
        Method::LateWeighted => {
            let w = cfg
                .late_weights
                .or(bundle.late_weights)
                .ok_or(Error::MissingComponent("late-fusion weights"))?;
            FusedDistribution::plain(late_fuse_weighted(&bundle.expert_triple(clip)?, &w)?)
        }
        Method::PoeCtxPose => poe_fuse_partial(&prior()?, &pose()?, alpha)?,
        Method::PoeCtxAud => poe_fuse_partial(&prior()?, &audio()?, alpha)?,
        Method::PoeFull => poe_fuse(&prior()?, &pose()?, &audio()?, alpha)?,
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ContextState;
    use crate::experts::{fit_context_prior, Modality, Standardizer};
    use ndarray::Array2;
    use proptest::prelude::*;

    fn d(p: [f64; 3]) -> IntentDistribution {
        IntentDistribution::new(p).unwrap()
    }

    fn close(a: [f64; 3], b: [f64; 3], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn poe_examples() {
        let out = poe_fuse(&d([0.5, 0.25, 0.25]), &d([0.2, 0.4, 0.4]), &IntentDistribution::UNIFORM, 1.0).unwrap();
        assert!(close(out.distribution.probs(), [1.0 / 3.0; 3], 1e-15));
        assert!(!out.degenerate);

        let prior = d([0.7, 0.1, 0.2]);
        let u = IntentDistribution::UNIFORM;
        let out = poe_fuse(&prior, &u, &u, 1.0).unwrap();
        assert!(close(out.distribution.probs(), prior.probs(), 1e-15));

        let out = poe_fuse(&prior, &d([0.6, 0.3, 0.1]), &u, 0.0).unwrap();
        assert!(close(out.distribution.probs(), [0.6, 0.3, 0.1], 1e-15));
    }

    #[test]
    fn partial_examples() {
        let eps = 1e-4;
        let prior = d([0.9, eps, 0.1 - eps]);
        // Hand product: 0.9 * 0.1 = 0.09 beats 0.1 * 0.8 = 0.08, so the door
        // prior still wins here; stronger idle evidence flips it.
        let out = poe_fuse_partial(&prior, &d([0.1, 0.1, 0.8]), 1.0).unwrap();
        assert_eq!(out.label(), IntentLabel::Exit);
        let out = poe_fuse_partial(&prior, &d([0.05, 0.05, 0.9]), 1.0).unwrap();
        assert_eq!(out.label(), IntentLabel::Idle);

        let out = poe_fuse_partial(&prior, &IntentDistribution::UNIFORM, 2.0).unwrap();
        let m = prior.probs().map(|p| p * p);
        let s: f64 = m.iter().sum();
        assert!(close(out.distribution.probs(), m.map(|v| v / s), 1e-15));

        let ev = d([0.2, 0.3, 0.5]);
        let out = poe_fuse_partial(&prior, &ev, 0.0).unwrap();
        assert!(close(out.distribution.probs(), ev.probs(), 1e-15));
    }

    #[test]
    fn structural_zero_prior_with_alpha_zero_is_not_nan() {
        let prior = d([0.0, 0.0, 1.0]);
        let out = poe_fuse_partial(&prior, &d([0.5, 0.5, 0.0]), 0.0).unwrap();
        assert!(close(out.distribution.probs(), [0.5, 0.5, 0.0], 0.0));
    }

    #[test]
    fn degenerate_product_is_uniform_and_flagged() {
        let out = poe_fuse(&d([1.0, 0.0, 0.0]), &d([0.0, 1.0, 0.0]), &d([0.0, 0.0, 1.0]), 1.0).unwrap();
        assert!(out.degenerate);
        assert_eq!(out.distribution, IntentDistribution::UNIFORM);
    }

    #[test]
    fn negative_alpha_is_rejected() {
        let u = IntentDistribution::UNIFORM;
        assert!(poe_fuse(&u, &u, &u, -0.1).is_err());
        assert!(poe_fuse_partial(&u, &u, f64::NAN).is_err());
    }

    #[test]
    fn late_avg_examples() {
        let out = late_fuse_avg(&[d([1.0, 0.0, 0.0]), d([0.0, 1.0, 0.0])]).unwrap();
        assert_eq!(out.probs(), [0.5, 0.5, 0.0]);
        let x = d([0.2, 0.3, 0.5]);
        assert_eq!(late_fuse_avg(&[x]).unwrap(), x);
        let u = IntentDistribution::UNIFORM;
        assert!(close(late_fuse_avg(&[u, u, u]).unwrap().probs(), u.probs(), 1e-16));
        assert!(late_fuse_avg(&[]).is_err());
    }

    #[test]
    fn late_weighted_examples() {
        let a = d([0.2, 0.3, 0.5]);
        let b = d([0.6, 0.3, 0.1]);
        let c = d([0.1, 0.1, 0.8]);
        assert_eq!(late_fuse_weighted(&[a, b, c], &[1.0, 0.0, 0.0]).unwrap(), a);
        let w = late_fuse_weighted(&[a, b, c], &[1.0 / 3.0; 3]).unwrap();
        assert!(close(w.probs(), late_fuse_avg(&[a, b, c]).unwrap().probs(), 1e-15));
        let out = late_fuse_weighted(
            &[d([1.0, 0.0, 0.0]), d([0.0, 1.0, 0.0]), d([0.0, 0.0, 1.0])],
            &[0.5, 0.5, 0.0],
        )
        .unwrap();
        assert_eq!(out.probs(), [0.5, 0.5, 0.0]);
        assert!(late_fuse_weighted(&[a, b, c], &[0.5, 0.6, 0.0]).is_err());
        assert!(late_fuse_weighted(&[a, b], &[0.5, 0.5, 0.0]).is_err());
    }

    #[test]
    fn grid_has_66_points_in_descending_order() {
        let g = late_weight_grid();
        assert_eq!(g.len(), 66);
        assert_eq!(g[0], [1.0, 0.0, 0.0]);
        assert_eq!(g[1], [0.9, 0.1, 0.0]);
        assert_eq!(g[65], [0.0, 0.0, 1.0]);
        for w in &g {
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        for pair in g.windows(2) {
            assert!(pair[0].partial_cmp(&pair[1]) == Some(std::cmp::Ordering::Greater));
        }
    }

    #[test]
    fn late_weights_degenerate_cases() {
        let x = d([0.1, 0.7, 0.2]);
        // Identical experts: every grid point ties.
        let preds = vec![[x, x, x]; 4];
        let labels = vec![IntentLabel::Food; 4];
        assert_eq!(fit_late_weights(&preds, &labels).unwrap(), [1.0, 0.0, 0.0]);
        assert_eq!(
            fit_late_weights(&preds[..1], &labels[..1]).unwrap(),
            [1.0, 0.0, 0.0]
        );
        assert!(fit_late_weights(&[], &[]).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.as_str()));
        }
        let err = "POE".parse::<Method>().unwrap_err().to_string();
        assert!(err.contains("POE_FULL") && err.contains("CONTEXT_ONLY"));
    }

    fn uniform_expert(modality: Modality, d: usize) -> LogisticExpert {
        LogisticExpert {
            weights: Array2::zeros((3, d)),
            bias: [0.0; 3],
            standardizer: Standardizer {
                mean: vec![0.0; d],
                std: vec![1.0; d],
            },
            l2_strength: 0.0,
            modality,
        }
    }

    fn clip(context: ContextState, label: IntentLabel, i: usize) -> ClipRecord {
        ClipRecord {
            clip_id: format!("c{i}"),
            video_id: "v".into(),
            context,
            label,
            pose_features: vec![0.3, -1.0],
            audio_features: vec![2.0],
        }
    }

    #[test]
    fn dispatcher_contract() {
        let clips: Vec<ClipRecord> = (0..20)
            .map(|i| {
                let (c, l) = match i % 4 {
                    0 => (ContextState::Neutral, IntentLabel::Idle),
                    1 => (ContextState::NearBowl, IntentLabel::Food),
                    2 => (ContextState::NearDoor, IntentLabel::Exit),
                    _ => (ContextState::NearDoor, IntentLabel::Idle),
                };
                clip(c, l, i)
            })
            .collect();
        let prior = fit_context_prior(&clips, 0.01).unwrap();
        let bundle = TrainedBundle {
            prior: Some(prior.clone()),
            pose: Some(uniform_expert(Modality::Pose, 2)),
            audio: Some(uniform_expert(Modality::Audio, 1)),
            ..Default::default()
        };

        let neutral = &clips[0];
        let out = predict_method(&FusionConfig::new(Method::ContextOnly), &bundle, neutral).unwrap();
        assert_eq!(out.label(), IntentLabel::Idle);
        assert!(out.distribution.prob(IntentLabel::Idle) >= 0.9);

        let alpha = 0.8;
        let full = predict_method(&FusionConfig::new(Method::PoeFull).with_alpha(alpha), &bundle, &clips[2]).unwrap();
        let row = prior.row(ContextState::NearDoor).probs();
        let m = row.map(|p| p.powf(alpha));
        let s: f64 = m.iter().sum();
        assert!(close(full.distribution.probs(), m.map(|v| v / s), 1e-14));

        let triple = bundle.expert_triple(&clips[3]).unwrap();
        let direct = poe_fuse(&triple[0], &triple[1], &triple[2], alpha).unwrap();
        let routed = predict_method(&FusionConfig::new(Method::PoeFull).with_alpha(alpha), &bundle, &clips[3]).unwrap();
        assert_eq!(direct, routed);

        let err = predict_method(&FusionConfig::new(Method::FeatureConcat), &bundle, &clips[3]).unwrap_err();
        assert!(err.to_string().contains("concat expert"));
        let err = predict_method(&FusionConfig::new(Method::LateWeighted), &bundle, &clips[3]).unwrap_err();
        assert!(err.to_string().contains("late-fusion weights"));
    }

    fn simplex() -> impl Strategy<Value = IntentDistribution> {
        prop::array::uniform3(1e-6f64..1.0).prop_map(|m| IntentDistribution::from_masses(m).unwrap())
    }

    proptest! {
        #[test]
        fn fusion_outputs_are_distributions(
            a in simplex(), b in simplex(), c in simplex(), alpha in 0.0f64..3.0,
        ) {
            for out in [
                poe_fuse(&a, &b, &c, alpha).unwrap().distribution,
                poe_fuse_partial(&a, &b, alpha).unwrap().distribution,
                late_fuse_avg(&[a, b, c]).unwrap(),
            ] {
                prop_assert!(IntentDistribution::new(out.probs()).is_ok());
            }
        }

        #[test]
        fn log_offset_on_one_expert_changes_nothing(
            a in simplex(), b in simplex(), c in simplex(), shift in -5.0f64..5.0,
        ) {
            let base = poe_fuse(&a, &b, &c, 1.0).unwrap().distribution.probs();
            let logs: [f64; 3] =
                std::array::from_fn(|k| a.probs()[k].ln() + b.probs()[k].ln() + c.probs()[k].ln() + shift);
            let shifted = normalize_log_masses(logs).distribution.probs();
            prop_assert!(close(base, shifted, 1e-12));
        }

        #[test]
        fn prior_normalization_is_irrelevant(
            a in simplex(), b in simplex(), c in simplex(), alpha in 0.0f64..2.0,
        ) {
            let pa = a.probs().map(|p| p.powf(alpha));
            let renorm = IntentDistribution::from_masses(pa).unwrap();
            let x = poe_fuse(&a, &b, &c, alpha).unwrap().distribution.probs();
            let y = poe_fuse(&renorm, &b, &c, 1.0).unwrap().distribution.probs();
            prop_assert!(close(x, y, 1e-12));
        }
    }
}
