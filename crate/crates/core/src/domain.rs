//! Label and context vocabularies, clip records, and the dataset container.
//!
//! Every vector or table indexed by label or context uses the canonical
//! orders `EXIT, FOOD, IDLE` and `near_bowl, near_door, neutral`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `sum(p) == 1` for a valid [`IntentDistribution`].
pub const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IntentLabel {
    #[serde(rename = "EXIT")]
    Exit,
    #[serde(rename = "FOOD")]
    Food,
    #[serde(rename = "IDLE")]
    Idle,
}

impl IntentLabel {
    pub const ALL: [IntentLabel; 3] = [IntentLabel::Exit, IntentLabel::Food, IntentLabel::Idle];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            IntentLabel::Exit => "EXIT",
            IntentLabel::Food => "FOOD",
            IntentLabel::Idle => "IDLE",
        }
    }
}

impl fmt::Display for IntentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IntentLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| s.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextState {
    NearBowl,
    NearDoor,
    Neutral,
}

impl ContextState {
    pub const ALL: [ContextState; 3] = [
        ContextState::NearBowl,
        ContextState::NearDoor,
        ContextState::Neutral,
    ];

    /// Contexts that constrain but do not determine the intent.
    pub const AMBIGUOUS: [ContextState; 2] = [ContextState::NearBowl, ContextState::NearDoor];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ContextState::NearBowl => "near_bowl",
            ContextState::NearDoor => "near_door",
            ContextState::Neutral => "neutral",
        }
    }

    /// The goal label a context-only predictor collapses to, if any.
    pub fn shortcut_label(self) -> Option<IntentLabel> {
        match self {
            ContextState::NearBowl => Some(IntentLabel::Food),
            ContextState::NearDoor => Some(IntentLabel::Exit),
            ContextState::Neutral => None,
        }
    }
}

impl fmt::Display for ContextState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ContextState {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| s.to_owned())
    }
}

/// Which labels each context admits. `allowed[c][y]` is true when label `y`
/// may occur in context `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feasibility {
    pub allowed: [[bool; 3]; 3],
}

impl Feasibility {
    /// near_bowl admits FOOD and IDLE, near_door admits EXIT and IDLE,
    /// neutral admits IDLE only.
    pub const STANDARD: Feasibility = Feasibility {
        allowed: [[false, true, true], [true, false, true], [false, false, true]],
    };

    pub fn permits(&self, context: ContextState, label: IntentLabel) -> bool {
        self.allowed[context.index()][label.index()]
    }

    pub fn labels(&self, context: ContextState) -> Vec<IntentLabel> {
        IntentLabel::ALL
            .into_iter()
            .filter(|&l| self.permits(context, l))
            .collect()
    }
}

impl Default for Feasibility {
    fn default() -> Self {
        Self::STANDARD
    }
}

/// One 3-second clip with its clip-level pose and audio descriptors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRecord {
    pub clip_id: String,
    pub video_id: String,
    pub context: ContextState,
    pub label: IntentLabel,
    pub pose_features: Vec<f64>,
    pub audio_features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub clips: Vec<ClipRecord>,
    pub d_pose: usize,
    pub d_audio: usize,
    pub feasibility: Feasibility,
}

impl Dataset {
    pub fn new(clips: Vec<ClipRecord>, d_pose: usize, d_audio: usize) -> Self {
        Self {
            clips,
            d_pose,
            d_audio,
            feasibility: Feasibility::STANDARD,
        }
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    /// Distinct video ids in sorted order.
    pub fn video_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.clips.iter().map(|c| c.video_id.clone()).collect();
        ids.sort();
        ids.dedup();
        ids
    }
}

/// A point on the 3-class simplex in canonical label order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct IntentDistribution([f64; 3]);

impl IntentDistribution {
    pub const UNIFORM: IntentDistribution = IntentDistribution([1.0 / 3.0; 3]);

    pub fn new(p: [f64; 3]) -> Result<Self> {
        if p.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::InvalidDistribution(format!(
                "components must lie in [0, 1], got {p:?}"
            )));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidDistribution(format!(
                "components sum to {sum}, expected 1"
            )));
        }
        Ok(Self(p))
    }

    /// Normalizes non-negative masses. Fails when every mass is zero.
    pub fn from_masses(m: [f64; 3]) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "masses must be finite and non-negative, got {m:?}"
            )));
        }
        let sum: f64 = m.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidDistribution("all masses are zero".into()));
        }
        Ok(Self(m.map(|v| v / sum)))
    }

    /// Wraps values already known to be on the simplex.
    pub(crate) fn from_normalized_unchecked(p: [f64; 3]) -> Self {
        debug_assert!((p.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL, "{p:?}");
        Self(p)
    }

    pub fn probs(&self) -> [f64; 3] {
        self.0
    }

    pub fn prob(&self, label: IntentLabel) -> f64 {
        self.0[label.index()]
    }

    /// Largest component, used as the selective-prediction confidence.
    pub fn confidence(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl TryFrom<[f64; 3]> for IntentDistribution {
    type Error = Error;

    fn try_from(p: [f64; 3]) -> Result<Self> {
        Self::new(p)
    }
}

impl From<IntentDistribution> for [f64; 3] {
    fn from(d: IntentDistribution) -> Self {
        d.0
    }
}

/// Highest-probability label; ties go to the earlier canonical label.
pub fn argmax_label(d: &IntentDistribution) -> IntentLabel {
    let mut best = 0;
    for i in 1..3 {
        if d.0[i] > d.0[best] {
            best = i;
        }
    }
    IntentLabel::ALL[best]
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Feasibility {
        clip_id: String,
        context: ContextState,
        label: IntentLabel,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Feasibility {
                clip_id,
                context,
                label,
            } => write!(
                f,
                "feasibility violation: clip {clip_id:?} has label {label} in context {context}"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationSummary {
    /// `counts[c][y]` clips per context × label.
    pub counts: [[usize; 3]; 3],
    pub warnings: Vec<Violation>,
}

impl ValidationSummary {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn count(&self, context: ContextState, label: IntentLabel) -> usize {
        self.counts[context.index()][label.index()]
    }
}

/// Checks the dataset invariants. Duplicate ids, non-finite features and
/// dimension mismatches are hard errors; feasibility violations are
/// returned as warnings.
pub fn validate_dataset(ds: &Dataset) -> Result<ValidationSummary> {
    let mut seen = HashSet::with_capacity(ds.clips.len());
    let mut summary = ValidationSummary::default();

    for clip in &ds.clips {
        if !seen.insert(clip.clip_id.as_str()) {
            return Err(Error::DuplicateClipId(clip.clip_id.clone()));
        }
        for (modality, feats, expected) in [
            ("pose", &clip.pose_features, ds.d_pose),
            ("audio", &clip.audio_features, ds.d_audio),
        ] {
            if feats.len() != expected {
                return Err(Error::DimensionMismatch {
                    clip_id: clip.clip_id.clone(),
                    modality,
                    expected,
                    found: feats.len(),
                });
            }
            if let Some(index) = feats.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteFeature {
                    clip_id: clip.clip_id.clone(),
                    modality,
                    index,
                });
            }
        }
        summary.counts[clip.context.index()][clip.label.index()] += 1;
        if !ds.feasibility.permits(clip.context, clip.label) {
            summary.warnings.push(Violation::Feasibility {
                clip_id: clip.clip_id.clone(),
                context: clip.context,
                label: clip.label,
            });
        }
    }
    Ok(summary)
}

/// Clip counts per video, sorted by video id.
pub fn clips_per_video(ds: &Dataset) -> BTreeMap<&str, usize> {
    let mut out = BTreeMap::new();
    for c in &ds.clips {
        *out.entry(c.video_id.as_str()).or_insert(0) += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn clip(id: &str, context: ContextState, label: IntentLabel) -> ClipRecord {
        ClipRecord {
            clip_id: id.into(),
            video_id: "v0".into(),
            context,
            label,
            pose_features: vec![0.0],
            audio_features: vec![0.0],
        }
    }

    #[test]
    fn canonical_indices() {
        for (i, l) in IntentLabel::ALL.into_iter().enumerate() {
            assert_eq!(l.index(), i);
            assert_eq!(IntentLabel::from_index(i), Some(l));
        }
        for (i, c) in ContextState::ALL.into_iter().enumerate() {
            assert_eq!(c.index(), i);
            assert_eq!(ContextState::from_index(i), Some(c));
        }
        assert_eq!("near_door".parse::<ContextState>(), Ok(ContextState::NearDoor));
        assert!("near_Door".parse::<ContextState>().is_err());
        assert!("idle".parse::<IntentLabel>().is_err());
    }

    #[test]
    fn neutral_food_is_a_warning() {
        let ds = Dataset::new(
            vec![
                clip("a", ContextState::Neutral, IntentLabel::Food),
                clip("b", ContextState::Neutral, IntentLabel::Idle),
            ],
            1,
            1,
        );
        let s = validate_dataset(&ds).unwrap();
        assert_eq!(s.warnings.len(), 1);
        assert!(s.warnings[0].to_string().contains("feasibility violation"));
        assert_eq!(s.count(ContextState::Neutral, IntentLabel::Food), 1);
    }

    #[test]
    fn empty_dataset_has_zero_counts() {
        let s = validate_dataset(&Dataset::new(vec![], 3, 4)).unwrap();
        assert_eq!(s.total(), 0);
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn duplicate_clip_id_is_an_error() {
        let ds = Dataset::new(
            vec![
                clip("c1", ContextState::Neutral, IntentLabel::Idle),
                clip("c1", ContextState::NearBowl, IntentLabel::Food),
            ],
            1,
            1,
        );
        assert!(matches!(validate_dataset(&ds), Err(Error::DuplicateClipId(id)) if id == "c1"));
    }

    #[test]
    fn non_finite_and_wrong_length_features_are_errors() {
        let mut c = clip("x", ContextState::Neutral, IntentLabel::Idle);
        c.audio_features = vec![f64::NAN];
        let ds = Dataset::new(vec![c.clone()], 1, 1);
        assert!(matches!(
            validate_dataset(&ds),
            Err(Error::NonFiniteFeature { modality: "audio", index: 0, .. })
        ));
        c.audio_features = vec![0.0, 1.0];
        let ds = Dataset::new(vec![c], 1, 1);
        assert!(matches!(validate_dataset(&ds), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn validation_does_not_mutate() {
        let ds = Dataset::new(vec![clip("a", ContextState::NearDoor, IntentLabel::Food)], 1, 1);
        let before = ds.clone();
        let _ = validate_dataset(&ds).unwrap();
        assert_eq!(ds, before);
    }

    #[test]
    fn argmax_examples() {
        let d = |p| IntentDistribution::new(p).unwrap();
        assert_eq!(argmax_label(&d([0.2, 0.5, 0.3])), IntentLabel::Food);
        assert_eq!(argmax_label(&IntentDistribution::UNIFORM), IntentLabel::Exit);
        assert_eq!(argmax_label(&d([0.4, 0.4, 0.2])), IntentLabel::Exit);
        assert_eq!(argmax_label(&d([0.2, 0.4, 0.4])), IntentLabel::Food);
    }

    #[test]
    fn distribution_validation() {
        assert!(IntentDistribution::new([0.5, 0.5, 0.1]).is_err());
        assert!(IntentDistribution::new([-0.1, 0.6, 0.5]).is_err());
        assert!(IntentDistribution::new([f64::NAN, 0.5, 0.5]).is_err());
        assert!(IntentDistribution::from_masses([0.0, 0.0, 0.0]).is_err());
        let d = IntentDistribution::from_masses([2.0, 1.0, 1.0]).unwrap();
        assert_eq!(d.probs(), [0.5, 0.25, 0.25]);
        assert_eq!(d.confidence(), 0.5);
    }

    proptest! {
        #[test]
        fn argmax_is_scale_invariant(
            m in prop::array::uniform3(0.0f64..10.0),
            scale in 1e-3f64..1e3,
        ) {
            prop_assume!(m.iter().sum::<f64>() > 1e-6);
            let a = IntentDistribution::from_masses(m).unwrap();
            let b = IntentDistribution::from_masses(a.probs().map(|v| v * scale)).unwrap();
            // Renormalization may perturb exact ties; only compare clear maxima.
            let p = a.probs();
            let mut sorted = p;
            sorted.sort_by(f64::total_cmp);
            prop_assume!(sorted[2] - sorted[1] > 1e-12);
            prop_assert_eq!(argmax_label(&a), argmax_label(&b));
        }
    }
}
