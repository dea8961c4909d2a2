//! Context-prior Product-of-Experts intent inference.
//!
//! A discrete spatial context supplies a prior `P(y|c)` over three intents
//! (EXIT, FOOD, IDLE); pose and audio experts supply evidence `P(y|x)`. The
//! fused distribution is
//!
//! ```text
//! P~(y | x_all) ∝ P(y | c)^α · P(y | x_pose) · P(y | x_audio)
//! ```
//!
//! evaluated in log space. Around that core the crate ships every baseline
//! the comparison needs (single modality, feature concatenation, late
//! fusion, partial products), a leave-one-video-out harness, shortcut and
//! selective-prediction analyses, and a seeded synthetic benchmark.

pub mod analysis;
pub mod cli;
pub mod domain;
pub mod error;
pub mod eval;
pub mod experts;
pub mod fusion;
pub mod io;
pub mod manifest;
pub mod svg;
pub mod synth;

pub use domain::{
    argmax_label, validate_dataset, ClipRecord, ContextState, Dataset, Feasibility,
    IntentDistribution, IntentLabel, ValidationSummary,
};
pub use error::{Error, ErrorKind, Result};
pub use eval::{alpha_sweep, lovo_split, macro_f1, run_lovo, EvalReport, FoldResult};
pub use experts::{ContextPriorTable, LogisticExpert, Modality, Standardizer, TrainConfig};
pub use fusion::{FusedDistribution, FusionConfig, Method};
pub use synth::{generate_dataset, paperlike_benchmark, GenConfig};
