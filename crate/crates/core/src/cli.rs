//! Command implementations behind the `intent-poe` binary.
//!
//! Every command computes all of its outputs in memory before writing any
//! file, so a failing command leaves the output directory untouched.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{ambiguous_curves, shortcut_failure_rates, CoverageCurve, ShortcutReport};
use crate::domain::{validate_dataset, ContextState, Dataset, IntentLabel};
use crate::error::{Error, ErrorKind, Result};
use crate::eval::{alpha_sweep_on_folds, fit_folds, evaluate_folds, AlphaRow, EvalReport, DEFAULT_ALPHA_GRID};
use crate::experts::TrainConfig;
use crate::fusion::{Components, FusionConfig, Method, DEFAULT_ALPHA};
use crate::io::{
    alpha_table_to_csv, coverage_table_to_csv, dataset_fingerprint, dataset_to_csv, parse_dataset_csv,
    parse_predictions_csv, predictions_to_csv, report_to_json, shortcut_table_to_csv, write_atomic, PredictionTable,
    ReportFile,
};
use crate::manifest::{RunManifest, TOOL_VERSION};
use crate::svg;
use crate::synth::{generate_dataset, paperlike_config, GenConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

pub fn exit_code(err: &Error) -> i32 {
    match err.kind() {
        ErrorKind::Config => EXIT_CONFIG,
        ErrorKind::Data => EXIT_DATA,
        ErrorKind::Internal => EXIT_INTERNAL,
    }
}

#[derive(Debug, Parser)]
#[command(name = "intent-poe", version, about = "Context-prior Product-of-Experts intent inference")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset from a TOML config.
    Gen(GenArgs),
    /// Leave-one-video-out evaluation of one or more methods.
    Eval(EvalArgs),
    /// Prior-strength sweep of the full PoE model.
    Ablate(AblateArgs),
    /// Shortcut-failure rates and accuracy-coverage curves from prediction tables.
    Analyze(AnalyzeArgs),
    /// Print per-context label counts and feasibility warnings.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Generator config (TOML). Defaults to the shipped benchmark config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated L2 candidates for inner cross-validation.
    #[arg(long, value_delimiter = ',')]
    pub l2_grid: Option<Vec<f64>>,
}

impl TrainArgs {
    fn train_config(&self) -> Result<TrainConfig> {
        let mut cfg = TrainConfig {
            seed: self.seed,
            ..TrainConfig::default()
        };
        if let Some(grid) = &self.l2_grid {
            cfg.l2_grid = grid.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Method name, a comma-separated list, or ALL.
    #[arg(long, value_delimiter = ',', required = true)]
    pub method: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Comma-separated α values.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Prediction tables written by `eval`; repeat for several methods.
    #[arg(long = "predictions", required = true)]
    pub predictions: Vec<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
}

/// Files a command wants written, relative to its output directory.
#[derive(Debug, Default)]
pub struct Outputs {
    pub files: Vec<(String, Vec<u8>)>,
    /// Text for standard output.
    pub stdout: Vec<String>,
    /// Warnings for standard error.
    pub warnings: Vec<String>,
}

impl Outputs {
    fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    fn finish(mut self, mut manifest: RunManifest, manifest_name: &str) -> Result<Self> {
        manifest.outputs = self.names();
        self.add(manifest_name, manifest.to_json()?);
        Ok(self)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            write_atomic(&dir.join(name), bytes)?;
        }
        Ok(())
    }
}

fn load_dataset(path: &Path) -> Result<(Dataset, String, Vec<String>)> {
    let ds = parse_dataset_csv(path)?;
    let summary = validate_dataset(&ds)?;
    let warnings = summary.warnings.iter().map(ToString::to_string).collect();
    let fp = dataset_fingerprint(&ds)?;
    Ok((ds, fp, warnings))
}

pub fn cmd_gen(args: &GenArgs) -> Result<Outputs> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| Error::InvalidConfig(format!(
                "cannot read {}: {source}",
                path.display()
            )))?;
            GenConfig::from_toml(&text)?
        }
        None => paperlike_config(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let ds = generate_dataset(&cfg)?;
    let bytes = dataset_to_csv(&ds)?;
    let fp = dataset_fingerprint(&ds)?;

    let mut out = Outputs::default();
    out.add("dataset.csv", bytes);
    out.add("gen_config.toml", cfg.to_toml().into_bytes());
    out.stdout.push(format!("wrote {} clips from {} videos, fingerprint {fp}", ds.len(), ds.video_ids().len()));
    let mut manifest = RunManifest::new("gen", cfg.seed, fp);
    manifest.configs.gen = Some(cfg);
    if let Some(p) = &args.config {
        manifest.inputs.push(p.display().to_string());
    }
    out.finish(manifest, "manifest_gen.json")
}

fn parse_methods(names: &[String]) -> Result<Vec<Method>> {
    if names.len() == 1 && names[0] == "ALL" {
        return Ok(Method::ALL.to_vec());
    }
    let mut out = Vec::new();
    for n in names {
        let m: Method = n.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

pub fn cmd_eval(args: &EvalArgs) -> Result<Outputs> {
    let methods = parse_methods(&args.method)?;
    let train_cfg = args.train.train_config()?;
    let cfgs: Vec<FusionConfig> = methods.iter().map(|m| FusionConfig::new(*m).with_alpha(args.alpha)).collect();
    for c in &cfgs {
        c.validate()?;
    }
    let (ds, fp, warnings) = load_dataset(&args.dataset)?;

    let needs = methods.iter().map(|m| m.needs()).fold(Components::default(), Components::union);
    let folds = fit_folds(&ds, needs, &train_cfg)?;
    let reports = cfgs
        .iter()
        .map(|c| evaluate_folds(&ds, &folds, c))
        .collect::<Result<Vec<EvalReport>>>()?;

    let mut out = Outputs {
        warnings,
        ..Default::default()
    };
    let manifest_name = if methods.len() == 1 {
        format!("manifest_eval_{}.json", methods[0])
    } else {
        "manifest_eval.json".to_owned()
    };
    for report in &reports {
        let name = report.method.method.as_str();
        let file = ReportFile {
            tool_version: TOOL_VERSION.to_owned(),
            dataset_fingerprint: fp.clone(),
            manifest: manifest_name.clone(),
            train_config: train_cfg.clone(),
            report: report.clone(),
        };
        out.add(format!("report_{name}.json"), report_to_json(&file)?);
        out.add(
            format!("predictions_{name}.csv"),
            predictions_to_csv(&PredictionTable::from_report(report, &fp))?,
        );
        out.stdout.push(report.summary_line());
    }
    let mut manifest = RunManifest::new("eval", train_cfg.seed, fp);
    manifest.configs.train = Some(train_cfg);
    manifest.configs.fusion = cfgs;
    manifest.inputs.push(args.dataset.display().to_string());
    out.finish(manifest, &manifest_name)
}

/// Removes repeated α values, keeping first occurrences.
pub fn dedup_alphas(alphas: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut kept: Vec<f64> = Vec::new();
    let mut dropped = Vec::new();
    for &a in alphas {
        if kept.iter().any(|k| k.to_bits() == a.to_bits()) {
            dropped.push(a);
        } else {
            kept.push(a);
        }
    }
    (kept, dropped)
}

pub fn cmd_ablate(args: &AblateArgs) -> Result<Outputs> {
    let train_cfg = args.train.train_config()?;
    let requested = args.alphas.clone().unwrap_or_else(|| DEFAULT_ALPHA_GRID.to_vec());
    let (alphas, dropped) = dedup_alphas(&requested);
    if alphas.is_empty() {
        return Err(Error::InvalidConfig("--alphas needs at least one value".into()));
    }
    for &a in &alphas {
        FusionConfig::new(Method::PoeFull).with_alpha(a).validate()?;
    }
    let (ds, fp, mut warnings) = load_dataset(&args.dataset)?;
    if !dropped.is_empty() {
        warnings.push(format!("duplicate alpha values ignored: {dropped:?}"));
    }

    let folds = fit_folds(&ds, Method::PoeFull.needs(), &train_cfg)?;
    let reports = alpha_sweep_on_folds(&ds, &folds, &alphas)?;
    let rows: Vec<AlphaRow> = reports
        .iter()
        .map(|r| AlphaRow {
            alpha: r.method.alpha,
            mean_acc: r.mean_fold_accuracy,
            std_acc: r.std_fold_accuracy,
            macro_f1: r.pooled_macro_f1,
        })
        .collect();

    let mut out = Outputs {
        warnings,
        ..Default::default()
    };
    out.add("alpha_sweep.csv", alpha_table_to_csv(&rows)?);
    for r in &rows {
        out.stdout.push(format!(
            "alpha={} mean_acc={:.2}% std_acc={:.2}% macro_f1={:.4}",
            r.alpha,
            100.0 * r.mean_acc,
            100.0 * r.std_acc,
            r.macro_f1
        ));
    }
    let mut manifest = RunManifest::new("ablate", train_cfg.seed, fp);
    manifest.configs.train = Some(train_cfg);
    manifest.configs.fusion = reports.into_iter().map(|r| r.method).collect();
    manifest.inputs.push(args.dataset.display().to_string());
    out.finish(manifest, "manifest_ablate.json")
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<Outputs> {
    let tables = args
        .predictions
        .iter()
        .map(|p| parse_predictions_csv(p))
        .collect::<Result<Vec<_>>>()?;
    let fingerprints: BTreeSet<&str> = tables.iter().map(|t| t.dataset_fingerprint.as_str()).collect();
    if fingerprints.len() > 1 {
        return Err(Error::FingerprintMismatch(format!(
            "prediction tables come from {} different datasets: {:?}",
            fingerprints.len(),
            fingerprints
        )));
    }
    let fp = fingerprints.into_iter().next().unwrap_or_default().to_owned();

    let mut rates: Vec<(String, ShortcutReport)> = Vec::new();
    let mut curves: Vec<(String, CoverageCurve)> = Vec::new();
    for t in &tables {
        rates.push((t.method.clone(), shortcut_failure_rates(&t.rows)));
        for c in ambiguous_curves(&t.rows)? {
            curves.push((t.method.clone(), c));
        }
    }

    let mut out = Outputs::default();
    out.add("shortcut_rates.csv", shortcut_table_to_csv(&rates)?);
    out.add("coverage_curves.csv", coverage_table_to_csv(&curves)?);

    let categories: Vec<String> = ContextState::AMBIGUOUS
        .iter()
        .map(|c| format!("{c} (IDLE→{})", c.shortcut_label().map_or("", IntentLabel::as_str)))
        .collect();
    let series: Vec<(String, Vec<Option<f64>>)> = rates
        .iter()
        .map(|(m, r)| (m.clone(), ContextState::AMBIGUOUS.iter().map(|c| r.rate(*c)).collect()))
        .collect();
    out.add(
        "shortcut_rates.svg",
        svg::bar_chart("Shortcut failure rate on IDLE clips", &categories, &series).into_bytes(),
    );
    for subset in ["ambiguous", "near_bowl", "near_door"] {
        let series: Vec<(String, Vec<(f64, f64)>)> = curves
            .iter()
            .filter(|(_, c)| c.subset_tag == subset)
            .map(|(m, c)| {
                (
                    m.clone(),
                    c.points.iter().map(|p| (p.coverage, p.cumulative_accuracy)).collect(),
                )
            })
            .collect();
        if series.is_empty() {
            continue;
        }
        out.add(
            format!("coverage_{subset}.svg"),
            svg::line_chart(
                &format!("Accuracy vs coverage ({subset})"),
                "coverage",
                "cumulative accuracy",
                &series,
            )
            .into_bytes(),
        );
    }
    for (m, r) in &rates {
        let cell = |c: ContextState| r.rate(c).map_or("n/a".to_owned(), |v| format!("{:.1}%", 100.0 * v));
        out.stdout.push(format!(
            "method={m} near_bowl_failure={} near_door_failure={}",
            cell(ContextState::NearBowl),
            cell(ContextState::NearDoor)
        ));
    }

    let mut manifest = RunManifest::new("analyze", 0, fp);
    manifest.inputs = args.predictions.iter().map(|p| p.display().to_string()).collect();
    out.finish(manifest, "manifest_analyze.json")
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<Outputs> {
    let ds = parse_dataset_csv(&args.dataset)?;
    let summary = validate_dataset(&ds)?;
    let mut out = Outputs::default();
    out.stdout.push(format!(
        "{} clips, {} videos, d_pose={}, d_audio={}",
        ds.len(),
        ds.video_ids().len(),
        ds.d_pose,
        ds.d_audio
    ));
    out.stdout.push("context,EXIT,FOOD,IDLE".into());
    for c in ContextState::ALL {
        let k = summary.counts[c.index()];
        out.stdout.push(format!("{c},{},{},{}", k[0], k[1], k[2]));
    }
    out.warnings = summary.warnings.iter().map(ToString::to_string).collect();
    Ok(out)
}

/// Runs a parsed command, writes its outputs and returns the exit status.
pub fn run(cli: Cli) -> i32 {
    let (result, out_dir) = match &cli.command {
        Command::Gen(a) => (cmd_gen(a), Some(a.out_dir.as_path())),
        Command::Eval(a) => (cmd_eval(a), Some(a.out_dir.as_path())),
        Command::Ablate(a) => (cmd_ablate(a), Some(a.out_dir.as_path())),
        Command::Analyze(a) => (cmd_analyze(a), Some(a.out_dir.as_path())),
        Command::Validate(a) => (cmd_validate(a), None),
    };
    let outputs = result.and_then(|out| {
        if let Some(dir) = out_dir {
            out.write(dir)?;
        }
        Ok(out)
    });
    match outputs {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            for line in &out.stdout {
                println!("{line}");
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
