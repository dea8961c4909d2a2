//! Leave-one-video-out evaluation, metrics and the α sweep.
//!
//! Every fold refits the context prior and whichever experts the method
//! needs on the training videos only, including the inner L2 grid search
//! and late-fusion weight fitting. α enters only at fusion time, so the
//! sweep trains once per fold and reuses the experts for every α.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{argmax_label, validate_dataset, ClipRecord, ContextState, Dataset, IntentDistribution, IntentLabel};
use crate::error::{Error, Result};
use crate::experts::{fit_context_prior, predict_expert, select_l2, train_from_rows, Modality, TrainConfig};
use crate::fusion::{fit_late_weights, predict_method, Components, FusionConfig, Method, TrainedBundle};

/// The α grid of the prior-strength ablation.
pub const DEFAULT_ALPHA_GRID: [f64; 6] = [0.0, 0.3, 0.5, 0.8, 1.0, 1.2];

/// One held-out clip's prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub clip_id: String,
    pub video_id: String,
    pub context: ContextState,
    pub label: IntentLabel,
    pub predicted: IntentLabel,
    pub distribution: IntentDistribution,
    /// Largest component of `distribution`.
    pub confidence: f64,
    pub degenerate: bool,
}

impl PredictionRow {
    pub fn correct(&self) -> bool {
        self.label == self.predicted
    }
}

/// L2 strengths chosen by inner cross-validation for this fold.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectedL2 {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub held_out_video_id: String,
    pub predictions: Vec<PredictionRow>,
    pub fold_accuracy: f64,
    pub selected_l2: SelectedL2,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub late_weights: Option<[f64; 3]>,
    /// Training structures that saw at least one held-out clip. Always empty
    /// unless the split is broken.
    pub leaked_structures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: FusionConfig,
    pub folds: Vec<FoldResult>,
    pub mean_fold_accuracy: f64,
    /// Population standard deviation across folds.
    pub std_fold_accuracy: f64,
    pub pooled_macro_f1: f64,
    pub pooled_accuracy: f64,
    pub degenerate_fusion_count: usize,
}

impl EvalReport {
    /// All held-out predictions in fold order.
    pub fn predictions(&self) -> impl Iterator<Item = &PredictionRow> {
        self.folds.iter().flat_map(|f| f.predictions.iter())
    }

    pub fn summary_line(&self) -> String {
        format!(
            "method={} alpha={} mean_acc={:.2}% std_acc={:.2}% macro_f1={:.4} pooled_acc={:.2}% degenerate={}",
            self.method.method,
            self.method.alpha,
            100.0 * self.mean_fold_accuracy,
            100.0 * self.std_fold_accuracy,
            self.pooled_macro_f1,
            100.0 * self.pooled_accuracy,
            self.degenerate_fusion_count
        )
    }
}

/// Record of which videos fed each training structure of a fold.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLedger {
    pub structures: BTreeMap<&'static str, BTreeSet<String>>,
}

impl TrainingLedger {
    fn record<'a>(&mut self, structure: &'static str, videos: impl IntoIterator<Item = &'a str>) {
        self.structures
            .entry(structure)
            .or_default()
            .extend(videos.into_iter().map(str::to_owned));
    }

    /// Structures whose inputs included `video_id`.
    pub fn contaminated_by(&self, video_id: &str) -> Vec<String> {
        self.structures
            .iter()
            .filter(|(_, vids)| vids.contains(video_id))
            .map(|(k, _)| (*k).to_owned())
            .collect()
    }
}

/// A fold's trained components, reusable across fusion configurations.
#[derive(Debug, Clone)]
pub struct FoldModel {
    pub held_out_video_id: String,
    pub test_indices: Vec<usize>,
    pub bundle: TrainedBundle,
    pub selected_l2: SelectedL2,
    pub ledger: TrainingLedger,
}

/// One `(train, test)` index pair per distinct video, sorted by video id.
pub fn lovo_split(ds: &Dataset) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    let videos = ds.video_ids();
    if videos.len() < 2 {
        return Err(Error::TooFewVideos(videos.len()));
    }
    Ok(videos
        .iter()
        .map(|v| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..ds.len()).partition(|&i| &ds.clips[i].video_id == v);
            (train, test)
        })
        .collect())
}

/// Stable per-fold seed derived from the run seed and the held-out video.
pub fn fold_seed(seed: u64, video_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(video_id.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 has 32 bytes"))
}

fn train_expert(
    clips: &[&ClipRecord],
    modality: Modality,
    cfg: &TrainConfig,
    ledger: &mut TrainingLedger,
) -> Result<(crate::experts::LogisticExpert, f64)> {
    let rows: Vec<Vec<f64>> = clips.iter().map(|c| modality.features(c)).collect();
    let labels: Vec<IntentLabel> = clips.iter().map(|c| c.label).collect();
    let groups: Vec<&str> = clips.iter().map(|c| c.video_id.as_str()).collect();
    let d = rows.first().map_or(0, Vec::len);

    let (inner_key, fit_key) = match modality {
        Modality::Pose => ("pose_inner_cv", "pose_expert"),
        Modality::Audio => ("audio_inner_cv", "audio_expert"),
        Modality::Concat => ("concat_inner_cv", "concat_expert"),
    };
    ledger.record(inner_key, groups.iter().copied());
    let selection = select_l2(&rows, &labels, &groups, d, cfg, modality)?;
    let final_cfg = TrainConfig {
        l2_strength: selection.l2_strength,
        ..cfg.clone()
    };
    ledger.record(fit_key, groups.iter().copied());
    let expert = train_from_rows(&rows, &labels, d, &final_cfg, modality)?;
    Ok((expert, selection.l2_strength))
}

/// Trains the requested components on `train` clips only.
pub fn fit_fold(
    ds: &Dataset,
    train: &[usize],
    test: &[usize],
    needs: Components,
    train_cfg: &TrainConfig,
) -> Result<FoldModel> {
    let held_out = ds.clips[test[0]].video_id.clone();
    let cfg = TrainConfig {
        seed: fold_seed(train_cfg.seed, &held_out),
        ..train_cfg.clone()
    };
    let clips: Vec<&ClipRecord> = train.iter().map(|&i| &ds.clips[i]).collect();
    let mut ledger = TrainingLedger::default();
    let mut bundle = TrainedBundle::default();
    let mut selected = SelectedL2::default();

    let needs_triple = needs.late_weights;
    if needs.prior || needs_triple {
        ledger.record("context_prior", clips.iter().map(|c| c.video_id.as_str()));
        bundle.prior = Some(fit_context_prior(clips.iter().copied(), cfg.prior_pseudo_count)?);
    }
    if needs.pose || needs_triple {
        let (e, l2) = train_expert(&clips, Modality::Pose, &cfg, &mut ledger)?;
        bundle.pose = Some(e);
        selected.pose = Some(l2);
    }
    if needs.audio || needs_triple {
        let (e, l2) = train_expert(&clips, Modality::Audio, &cfg, &mut ledger)?;
        bundle.audio = Some(e);
        selected.audio = Some(l2);
    }
    if needs.concat {
        let (e, l2) = train_expert(&clips, Modality::Concat, &cfg, &mut ledger)?;
        bundle.concat = Some(e);
        selected.concat = Some(l2);
    }
    if needs_triple {
        ledger.record("late_weights", clips.iter().map(|c| c.video_id.as_str()));
        let triples = clips
            .iter()
            .map(|c| bundle.expert_triple(c))
            .collect::<Result<Vec<_>>>()?;
        let labels: Vec<IntentLabel> = clips.iter().map(|c| c.label).collect();
        bundle.late_weights = Some(fit_late_weights(&triples, &labels)?);
    }

    Ok(FoldModel {
        held_out_video_id: held_out,
        test_indices: test.to_vec(),
        bundle,
        selected_l2: selected,
        ledger,
    })
}

/// Fits every fold in parallel; results come back in sorted video order.
pub fn fit_folds(ds: &Dataset, needs: Components, train_cfg: &TrainConfig) -> Result<Vec<FoldModel>> {
    train_cfg.validate()?;
    validate_dataset(ds)?;
    let splits = lovo_split(ds)?;
    splits
        .par_iter()
        .map(|(train, test)| {
            fit_fold(ds, train, test, needs, train_cfg)
                .map_err(|e| Error::in_fold(&ds.clips[test[0]].video_id, e))
        })
        .collect()
}

fn predict_fold(ds: &Dataset, fold: &FoldModel, cfg: &FusionConfig) -> Result<FoldResult> {
    let mut predictions = Vec::with_capacity(fold.test_indices.len());
    for &i in &fold.test_indices {
        let clip = &ds.clips[i];
        let fused = predict_method(cfg, &fold.bundle, clip).map_err(|e| Error::in_fold(&fold.held_out_video_id, e))?;
        predictions.push(PredictionRow {
            clip_id: clip.clip_id.clone(),
            video_id: clip.video_id.clone(),
            context: clip.context,
            label: clip.label,
            predicted: argmax_label(&fused.distribution),
            distribution: fused.distribution,
            confidence: fused.distribution.confidence(),
            degenerate: fused.degenerate,
        });
    }
    let correct = predictions.iter().filter(|p| p.correct()).count();
    let late_weights = match cfg.method {
        Method::LateWeighted => cfg.late_weights.or(fold.bundle.late_weights),
        _ => None,
    };
    Ok(FoldResult {
        held_out_video_id: fold.held_out_video_id.clone(),
        fold_accuracy: correct as f64 / predictions.len() as f64,
        predictions,
        selected_l2: fold.selected_l2.clone(),
        late_weights,
        leaked_structures: fold.ledger.contaminated_by(&fold.held_out_video_id),
    })
}

/// Evaluates one fusion configuration on already-fitted folds.
pub fn evaluate_folds(ds: &Dataset, folds: &[FoldModel], cfg: &FusionConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let folds = folds
        .iter()
        .map(|f| predict_fold(ds, f, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(cfg.clone(), folds))
}

/// Recomputes all aggregates from the fold results.
pub fn aggregate(method: FusionConfig, folds: Vec<FoldResult>) -> EvalReport {
    let accs: Vec<f64> = folds.iter().map(|f| f.fold_accuracy).collect();
    let (mean, std) = mean_and_population_std(&accs);
    let pairs: Vec<(IntentLabel, IntentLabel)> = folds
        .iter()
        .flat_map(|f| f.predictions.iter().map(|p| (p.label, p.predicted)))
        .collect();
    let n = pairs.len();
    let correct = pairs.iter().filter(|(t, p)| t == p).count();
    let degenerate = folds
        .iter()
        .flat_map(|f| &f.predictions)
        .filter(|p| p.degenerate)
        .count();
    EvalReport {
        method,
        mean_fold_accuracy: mean,
        std_fold_accuracy: std,
        pooled_macro_f1: macro_f1(&pairs),
        pooled_accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
        degenerate_fusion_count: degenerate,
        folds,
    }
}

pub fn mean_and_population_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Full leave-one-video-out run for one method.
pub fn run_lovo(ds: &Dataset, cfg: &FusionConfig, train_cfg: &TrainConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let mut needs = cfg.method.needs();
    if cfg.late_weights.is_some() {
        needs.late_weights = false;
    }
    let folds = fit_folds(ds, needs, train_cfg)?;
    evaluate_folds(ds, &folds, cfg)
}

/// Runs several configurations against one shared set of fitted folds.
pub fn run_lovo_many(ds: &Dataset, cfgs: &[FusionConfig], train_cfg: &TrainConfig) -> Result<Vec<EvalReport>> {
    let needs = cfgs
        .iter()
        .map(|c| c.method.needs())
        .fold(Components::default(), Components::union);
    let folds = fit_folds(ds, needs, train_cfg)?;
    cfgs.iter().map(|c| evaluate_folds(ds, &folds, c)).collect()
}

/// Unweighted mean of per-class F1 over the three labels. A class with no
/// true and no predicted instances contributes 0.
pub fn macro_f1(pairs: &[(IntentLabel, IntentLabel)]) -> f64 {
    let mut tp = [0u128; 3];
    let mut fp = [0u128; 3];
    let mut fn_ = [0u128; 3];
    for &(truth, pred) in pairs {
        if truth == pred {
            tp[truth.index()] += 1;
        } else {
            fp[pred.index()] += 1;
            fn_[truth.index()] += 1;
        }
    }
    // Summed as an exact fraction so the mean is rounded once.
    let (mut num, mut den) = (0u128, 1u128);
    for k in 0..3 {
        let d = 2 * tp[k] + fp[k] + fn_[k];
        if d == 0 {
            continue;
        }
        num = num * d + 2 * tp[k] * den;
        den *= d;
        let g = gcd(num, den);
        (num, den) = (num / g, den / g);
    }
    den *= 3;
    let g = gcd(num, den);
    (num / g) as f64 / (den / g) as f64
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaRow {
    pub alpha: f64,
    pub mean_acc: f64,
    pub std_acc: f64,
    pub macro_f1: f64,
}

impl AlphaRow {
    fn from_report(r: &EvalReport) -> Self {
        Self {
            alpha: r.method.alpha,
            mean_acc: r.mean_fold_accuracy,
            std_acc: r.std_fold_accuracy,
            macro_f1: r.pooled_macro_f1,
        }
    }
}

/// POE_FULL at each α over one set of per-fold experts.
pub fn alpha_sweep_on_folds(ds: &Dataset, folds: &[FoldModel], alphas: &[f64]) -> Result<Vec<EvalReport>> {
    if alphas.is_empty() {
        return Err(Error::EmptyInput("alpha sweep needs at least one alpha"));
    }
    alphas
        .iter()
        .map(|&a| evaluate_folds(ds, folds, &FusionConfig::new(Method::PoeFull).with_alpha(a)))
        .collect()
}

pub fn alpha_sweep(ds: &Dataset, alphas: &[f64], train_cfg: &TrainConfig) -> Result<Vec<AlphaRow>> {
    if alphas.is_empty() {
        return Err(Error::EmptyInput("alpha sweep needs at least one alpha"));
    }
    let folds = fit_folds(ds, Method::PoeFull.needs(), train_cfg)?;
    Ok(alpha_sweep_on_folds(ds, &folds, alphas)?
        .iter()
        .map(AlphaRow::from_report)
        .collect())
}

/// Pooled accuracy of the expert-free majority-class rule fit per fold, for
/// reference baselines.
pub fn majority_baseline_accuracy(ds: &Dataset) -> Result<f64> {
    let mut correct = 0usize;
    for (train, test) in lovo_split(ds)? {
        let mut counts = [0usize; 3];
        for &i in &train {
            counts[ds.clips[i].label.index()] += 1;
        }
        let mut best = 0;
        for k in 1..3 {
            if counts[k] > counts[best] {
                best = k;
            }
        }
        correct += test.iter().filter(|&&i| ds.clips[i].label.index() == best).count();
    }
    Ok(correct as f64 / ds.len() as f64)
}

/// In-sample expert predictions, used by tests and diagnostics.
pub fn expert_accuracy(bundle: &TrainedBundle, clips: &[&ClipRecord], modality: Modality) -> Result<f64> {
    let expert = match modality {
        Modality::Pose => bundle.pose.as_ref(),
        Modality::Audio => bundle.audio.as_ref(),
        Modality::Concat => bundle.concat.as_ref(),
    }
    .ok_or(Error::MissingComponent("expert"))?;
    let mut correct = 0;
    for c in clips {
        if argmax_label(&predict_expert(expert, &modality.features(c))?) == c.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / clips.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use IntentLabel::*;

    fn clip(id: usize, video: &str, context: ContextState, label: IntentLabel, pose: Vec<f64>) -> ClipRecord {
        ClipRecord {
            clip_id: format!("c{id:03}"),
            video_id: video.into(),
            context,
            label,
            audio_features: pose.clone(),
            pose_features: pose,
        }
    }

    #[test]
    fn split_partitions_by_video() {
        let mut clips = Vec::new();
        let mut id = 0;
        for (v, n) in [("vb", 3), ("va", 2), ("vc", 4)] {
            for _ in 0..n {
                clips.push(clip(id, v, ContextState::Neutral, Idle, vec![0.0]));
                id += 1;
            }
        }
        let ds = Dataset::new(clips, 1, 1);
        let splits = lovo_split(&ds).unwrap();
        let sizes: Vec<usize> = splits.iter().map(|(_, t)| t.len()).collect();
        assert_eq!(sizes, vec![2, 3, 4]);
        for (train, test) in &splits {
            let mut all: Vec<usize> = train.iter().chain(test).copied().collect();
            all.sort();
            assert_eq!(all, (0..ds.len()).collect::<Vec<_>>());
            assert!(train.iter().all(|i| !test.contains(i)));
        }
    }

    #[test]
    fn single_video_is_an_error() {
        let ds = Dataset::new(
            (0..4).map(|i| clip(i, "only", ContextState::Neutral, Idle, vec![0.0])).collect(),
            1,
            1,
        );
        assert!(matches!(lovo_split(&ds), Err(Error::TooFewVideos(1))));
    }

    #[test]
    fn macro_f1_examples() {
        let all = [(Exit, Exit), (Food, Food), (Idle, Idle)];
        assert_eq!(macro_f1(&all), 1.0);
        let pairs = [(Exit, Exit), (Food, Exit), (Idle, Idle)];
        assert_eq!(macro_f1(&pairs), 5.0 / 9.0);
        assert_eq!(macro_f1(&[(Idle, Idle), (Idle, Idle)]), 1.0 / 3.0);
    }

    #[test]
    fn population_std() {
        let (m, s) = mean_and_population_std(&[0.0, 1.0]);
        assert_eq!(m, 0.5);
        assert_eq!(s, 0.5);
        assert_eq!(mean_and_population_std(&[]), (0.0, 0.0));
    }

    #[test]
    fn fold_seed_is_stable_and_video_specific() {
        assert_eq!(fold_seed(7, "v001"), fold_seed(7, "v001"));
        assert_ne!(fold_seed(7, "v001"), fold_seed(7, "v002"));
        assert_ne!(fold_seed(7, "v001"), fold_seed(8, "v001"));
    }

    fn fast_cfg() -> TrainConfig {
        TrainConfig {
            l2_grid: vec![],
            max_epochs: 300,
            ..Default::default()
        }
    }

    #[test]
    fn two_videos_hold_out_only_their_own_clips() {
        let mut clips = Vec::new();
        for i in 0..12 {
            let v = if i % 2 == 0 { "a" } else { "b" };
            let (c, l) = if i % 3 == 0 {
                (ContextState::NearDoor, Exit)
            } else {
                (ContextState::Neutral, Idle)
            };
            clips.push(clip(i, v, c, l, vec![i as f64 * 0.1]));
        }
        let ds = Dataset::new(clips, 1, 1);
        let r = run_lovo(&ds, &FusionConfig::new(Method::PoeFull), &fast_cfg()).unwrap();
        assert_eq!(r.folds.len(), 2);
        for f in &r.folds {
            assert!(f.predictions.iter().all(|p| p.video_id == f.held_out_video_id));
            assert!(f.leaked_structures.is_empty());
        }
    }

    #[test]
    fn constant_pose_features_give_majority_accuracy() {
        let mut clips = Vec::new();
        for i in 0..30 {
            let v = format!("v{}", i % 5);
            let (c, l) = match i % 3 {
                0 => (ContextState::NearDoor, Exit),
                _ => (ContextState::Neutral, Idle),
            };
            clips.push(clip(i, &v, c, l, vec![1.5, -2.0]));
        }
        let ds = Dataset::new(clips, 2, 2);
        let r = run_lovo(&ds, &FusionConfig::new(Method::PoseOnly), &fast_cfg()).unwrap();
        assert_eq!(r.pooled_accuracy, majority_baseline_accuracy(&ds).unwrap());
    }

    #[test]
    fn missing_components_surface_as_errors() {
        let ds = Dataset::new(
            (0..6)
                .map(|i| clip(i, if i < 3 { "a" } else { "b" }, ContextState::Neutral, Idle, vec![0.0]))
                .collect(),
            1,
            1,
        );
        let folds = fit_folds(&ds, Method::ContextOnly.needs(), &fast_cfg()).unwrap();
        let err = evaluate_folds(&ds, &folds, &FusionConfig::new(Method::PoeFull)).unwrap_err();
        assert!(err.to_string().contains("pose expert"), "{err}");
    }

    #[test]
    fn empty_alpha_grid_is_rejected() {
        let ds = Dataset::new(
            (0..4)
                .map(|i| clip(i, if i < 2 { "a" } else { "b" }, ContextState::Neutral, Idle, vec![0.0]))
                .collect(),
            1,
            1,
        );
        assert!(alpha_sweep(&ds, &[], &fast_cfg()).is_err());
    }
}
