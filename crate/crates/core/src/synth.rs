//! Seeded synthetic benchmark with the same structure as the household
//! recordings: strict context feasibility, IDLE admitted everywhere, audio
//! evidence stronger than pose evidence, and per-video session offsets.
//!
//! Each video draws one offset vector per modality from `N(0, σ_video² I)`.
//! Each clip draws a context, then a feasible label, then features
//! `δ · μ(label, modality) + offset + noise · N(0, I)` where the class means
//! `μ` are seed-derived unit vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::domain::{ClipRecord, ContextState, Dataset, Feasibility, IntentLabel, SIMPLEX_TOL};
use crate::error::{Error, Result};

/// Calibrated benchmark configuration shipped with the crate.
pub const PAPERLIKE_CONFIG: &str = include_str!("../configs/paperlike.toml");

const MEANS_STREAM: u64 = 0;
const SAMPLES_STREAM: u64 = 1;

/// Label distribution per context, each in canonical label order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentGivenContext {
    pub near_bowl: [f64; 3],
    pub near_door: [f64; 3],
    pub neutral: [f64; 3],
}

impl IntentGivenContext {
    pub fn row(&self, c: ContextState) -> &[f64; 3] {
        match c {
            ContextState::NearBowl => &self.near_bowl,
            ContextState::NearDoor => &self.near_door,
            ContextState::Neutral => &self.neutral,
        }
    }
}

impl Default for IntentGivenContext {
    fn default() -> Self {
        Self {
            near_bowl: [0.0, 0.6, 0.4],
            near_door: [0.6, 0.0, 0.4],
            neutral: [0.0, 0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub seed: u64,
    pub n_videos: usize,
    /// Inclusive `[min, max]` number of clips per video.
    pub clips_per_video: [usize; 2],
    /// (near_bowl, near_door, neutral).
    pub context_probs: [f64; 3],
    pub intent_given_context: IntentGivenContext,
    pub d_pose: usize,
    pub d_audio: usize,
    pub pose_separation: f64,
    pub audio_separation: f64,
    pub video_effect_scale: f64,
    pub noise_scale: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_videos: 34,
            clips_per_video: [4, 10],
            context_probs: [0.4, 0.4, 0.2],
            intent_given_context: IntentGivenContext::default(),
            d_pose: 8,
            d_audio: 12,
            pose_separation: 1.0,
            audio_separation: 2.5,
            video_effect_scale: 0.75,
            noise_scale: 1.0,
        }
    }
}

fn on_simplex(p: &[f64; 3]) -> bool {
    p.iter().all(|v| *v >= 0.0 && v.is_finite()) && (p.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL
}

impl GenConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: GenConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("GenConfig is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_videos == 0 {
            return bad("n_videos must be positive".into());
        }
        let [lo, hi] = self.clips_per_video;
        if lo == 0 || lo > hi {
            return bad(format!("clips_per_video must satisfy 1 <= min <= max, got [{lo}, {hi}]"));
        }
        if self.d_pose == 0 || self.d_audio == 0 {
            return bad("d_pose and d_audio must be positive".into());
        }
        if !on_simplex(&self.context_probs) {
            return bad(format!("context_probs must lie on the simplex, got {:?}", self.context_probs));
        }
        let feas = Feasibility::STANDARD;
        for c in ContextState::ALL {
            let row = self.intent_given_context.row(c);
            if !on_simplex(row) {
                return bad(format!("intent_given_context.{c} must lie on the simplex, got {row:?}"));
            }
            for l in IntentLabel::ALL {
                if !feas.permits(c, l) && row[l.index()] != 0.0 {
                    return bad(format!("intent_given_context.{c} puts mass on infeasible label {l}"));
                }
            }
        }
        for (name, v) in [
            ("pose_separation", self.pose_separation),
            ("audio_separation", self.audio_separation),
            ("video_effect_scale", self.video_effect_scale),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if !(self.noise_scale.is_finite() && self.noise_scale > 0.0) {
            return bad(format!("noise_scale must be positive, got {}", self.noise_scale));
        }
        Ok(())
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d)
        .map(|_| scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect()
}

fn unit_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v = gaussian_vec(rng, d, 1.0);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Seed-derived unit class means, `[label][component]`, for one modality.
fn class_means(rng: &mut ChaCha8Rng, d: usize) -> [Vec<f64>; 3] {
    [unit_vec(rng, d), unit_vec(rng, d), unit_vec(rng, d)]
}

pub fn generate_dataset(cfg: &GenConfig) -> Result<Dataset> {
    cfg.validate()?;

    let mut means_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    means_rng.set_stream(MEANS_STREAM);
    let pose_means = class_means(&mut means_rng, cfg.d_pose);
    let audio_means = class_means(&mut means_rng, cfg.d_audio);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(SAMPLES_STREAM);
    let context_dist = WeightedIndex::new(cfg.context_probs).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let label_dists = ContextState::ALL
        .map(|c| WeightedIndex::new(cfg.intent_given_context.row(c)).map_err(|e| Error::InvalidConfig(e.to_string())));
    let label_dists = {
        let [a, b, c] = label_dists;
        [a?, b?, c?]
    };

    let emit = |means: &[Vec<f64>; 3], label: IntentLabel, sep: f64, offset: &[f64], noise: Vec<f64>| -> Vec<f64> {
        means[label.index()]
            .iter()
            .zip(offset)
            .zip(noise)
            .map(|((m, o), e)| sep * m + o + e)
            .collect()
    };

    let mut clips = Vec::new();
    for v in 0..cfg.n_videos {
        let video_id = format!("v{v:03}");
        let n_clips = rng.gen_range(cfg.clips_per_video[0]..=cfg.clips_per_video[1]);
        let pose_offset = gaussian_vec(&mut rng, cfg.d_pose, cfg.video_effect_scale);
        let audio_offset = gaussian_vec(&mut rng, cfg.d_audio, cfg.video_effect_scale);
        for k in 0..n_clips {
            let context = ContextState::ALL[context_dist.sample(&mut rng)];
            let label = IntentLabel::ALL[label_dists[context.index()].sample(&mut rng)];
            let pose_noise = gaussian_vec(&mut rng, cfg.d_pose, cfg.noise_scale);
            let audio_noise = gaussian_vec(&mut rng, cfg.d_audio, cfg.noise_scale);
            clips.push(ClipRecord {
                clip_id: format!("{video_id}_c{k:02}"),
                video_id: video_id.clone(),
                context,
                label,
                pose_features: emit(&pose_means, label, cfg.pose_separation, &pose_offset, pose_noise),
                audio_features: emit(&audio_means, label, cfg.audio_separation, &audio_offset, audio_noise),
            });
        }
    }

    Ok(Dataset {
        clips,
        d_pose: cfg.d_pose,
        d_audio: cfg.d_audio,
        feasibility: Feasibility::STANDARD,
    })
}

pub fn paperlike_config() -> GenConfig {
    GenConfig::from_toml(PAPERLIKE_CONFIG).expect("shipped benchmark config is valid")
}

/// The shipped, calibrated benchmark dataset.
pub fn paperlike_benchmark() -> Dataset {
    generate_dataset(&paperlike_config()).expect("shipped benchmark config is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::validate_dataset;

    #[test]
    fn default_config_is_feasible_and_deterministic() {
        let cfg = GenConfig::default();
        let a = generate_dataset(&cfg).unwrap();
        let b = generate_dataset(&cfg).unwrap();
        assert_eq!(a, b);
        let summary = validate_dataset(&a).unwrap();
        assert!(summary.warnings.is_empty());
        for c in &a.clips {
            if c.context == ContextState::Neutral {
                assert_eq!(c.label, IntentLabel::Idle);
            }
        }
    }

    #[test]
    fn different_seeds_differ() {
        let a = generate_dataset(&GenConfig::default()).unwrap();
        let b = generate_dataset(&GenConfig { seed: 1, ..Default::default() }).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn infeasible_intent_table_is_rejected() {
        let mut cfg = GenConfig::default();
        cfg.intent_given_context.neutral = [0.0, 0.1, 0.9];
        assert!(matches!(generate_dataset(&cfg), Err(Error::InvalidConfig(_))));
        let mut cfg = GenConfig::default();
        cfg.intent_given_context.near_door = [0.5, 0.1, 0.4];
        assert!(generate_dataset(&cfg).is_err());
    }

    #[test]
    fn invalid_scalars_are_rejected() {
        for cfg in [
            GenConfig { pose_separation: -1.0, ..Default::default() },
            GenConfig { noise_scale: 0.0, ..Default::default() },
            GenConfig { n_videos: 0, ..Default::default() },
            GenConfig { clips_per_video: [5, 4], ..Default::default() },
            GenConfig { context_probs: [0.5, 0.5, 0.5], ..Default::default() },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn toml_round_trip() {
        let cfg = paperlike_config();
        assert_eq!(GenConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert!(GenConfig::from_toml("seed = 1\nbogus = 2\n").is_err());
    }

    #[test]
    fn context_frequencies_match_probabilities() {
        let cfg = GenConfig {
            n_videos: 1000,
            clips_per_video: [10, 10],
            seed: 99,
            ..Default::default()
        };
        let ds = generate_dataset(&cfg).unwrap();
        let n = ds.len() as f64;
        assert_eq!(ds.len(), 10_000);
        for c in ContextState::ALL {
            let p = cfg.context_probs[c.index()];
            let k = ds.clips.iter().filter(|x| x.context == c).count() as f64;
            let sigma = (n * p * (1.0 - p)).sqrt();
            assert!((k - n * p).abs() <= 3.0 * sigma, "{c}: {k} vs {}", n * p);
        }
    }

    #[test]
    fn benchmark_shape() {
        let ds = paperlike_benchmark();
        let n = ds.len() as f64;
        assert!((n - 212.0).abs() <= 21.2, "{n} clips");
        let s = validate_dataset(&ds).unwrap();
        for c in ContextState::AMBIGUOUS {
            let goal = c.shortcut_label().unwrap();
            let idle = s.count(c, IntentLabel::Idle);
            let goals = s.count(c, goal);
            assert!(idle > 0 && goals > 0);
            let share = idle as f64 / (idle + goals) as f64;
            assert!((0.35..=0.65).contains(&share), "{c}: idle share {share}");
        }
    }
}
