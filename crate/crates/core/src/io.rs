//! On-disk formats: dataset and prediction CSVs, report JSON, and the
//! analysis tables.
//!
//! Dataset CSV header:
//!
//! ```text
//! clip_id,video_id,context,label,pose_0,...,pose_{P-1},audio_0,...,audio_{A-1}
//! ```
//!
//! Features are written with 17 significant digits (`%.17g` style), so a
//! parse of an emitted file reproduces every `f64` bit for bit. Files are
//! UTF-8 with LF line endings.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{CoverageCurve, ShortcutReport};
use crate::domain::{ClipRecord, ContextState, Dataset, IntentDistribution, IntentLabel};
use crate::error::{Error, Result};
use crate::eval::{AlphaRow, EvalReport, PredictionRow};
use crate::experts::TrainConfig;

/// `%.17g` formatting: shortest of fixed or exponent notation with 17
/// significant digits and trailing zeros removed.
pub fn format_g17(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let prec = (16 - exp).max(0) as usize;
        strip_zeros(&format!("{v:.prec$}")).to_owned()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn dataset_header(d_pose: usize, d_audio: usize) -> Vec<String> {
    let mut h: Vec<String> = ["clip_id", "video_id", "context", "label"].map(String::from).into();
    h.extend((0..d_pose).map(|i| format!("pose_{i}")));
    h.extend((0..d_audio).map(|i| format!("audio_{i}")));
    h
}

fn csv_writer(buf: &mut Vec<u8>) -> csv::Writer<&mut Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(buf)
}

/// Canonical CSV bytes of a dataset.
pub fn dataset_to_csv(ds: &Dataset) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    {
        let mut w = csv_writer(&mut buf);
        w.write_record(dataset_header(ds.d_pose, ds.d_audio))?;
        for c in &ds.clips {
            let mut rec = vec![
                c.clip_id.clone(),
                c.video_id.clone(),
                c.context.as_str().to_owned(),
                c.label.as_str().to_owned(),
            ];
            rec.extend(c.pose_features.iter().map(|v| format_g17(*v)));
            rec.extend(c.audio_features.iter().map(|v| format_g17(*v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    Ok(buf)
}

/// SHA-256 of the canonical CSV bytes, hex encoded.
pub fn dataset_fingerprint(ds: &Dataset) -> Result<String> {
    Ok(hex::encode(Sha256::digest(dataset_to_csv(ds)?)))
}

fn parse_header(header: &csv::StringRecord) -> Result<(usize, usize)> {
    let fields: Vec<&str> = header.iter().collect();
    if fields.len() < 4 || fields[..4] != ["clip_id", "video_id", "context", "label"] {
        return Err(Error::Parse {
            line: 1,
            message: "header must start with clip_id,video_id,context,label".into(),
        });
    }
    let d_pose = fields[4..].iter().take_while(|f| f.starts_with("pose_")).count();
    let d_audio = fields.len() - 4 - d_pose;
    if fields != dataset_header(d_pose, d_audio) {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "header must list pose_0..pose_{{P-1}} then audio_0..audio_{{A-1}}, got {:?}",
                &fields[4..]
            ),
        });
    }
    Ok((d_pose, d_audio))
}

fn parse_float(token: &str, line: u64, column: &str) -> Result<f64> {
    let v: f64 = token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("column {column}: not a number: {token:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("column {column}: non-finite value {token:?}"),
        });
    }
    Ok(v)
}

pub fn parse_dataset_csv_bytes(bytes: &[u8]) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(bytes);
    let header = rdr.headers()?.clone();
    let (d_pose, d_audio) = parse_header(&header)?;
    let width = 4 + d_pose + d_audio;

    let mut clips = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Parse {
                line,
                message: e.to_string(),
            }
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(Error::Parse {
                line,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        let context = rec[2].parse::<ContextState>().map_err(|token| Error::UnknownToken {
            line,
            field: "context",
            token,
        })?;
        let label = rec[3].parse::<IntentLabel>().map_err(|token| Error::UnknownToken {
            line,
            field: "label",
            token,
        })?;
        let mut feats = Vec::with_capacity(d_pose + d_audio);
        for (j, tok) in rec.iter().enumerate().skip(4) {
            feats.push(parse_float(tok, line, &header[j])?);
        }
        let audio_features = feats.split_off(d_pose);
        clips.push(ClipRecord {
            clip_id: rec[0].to_owned(),
            video_id: rec[1].to_owned(),
            context,
            label,
            pose_features: feats,
            audio_features,
        });
    }
    Ok(Dataset::new(clips, d_pose, d_audio))
}

pub fn parse_dataset_csv(path: &Path) -> Result<Dataset> {
    parse_dataset_csv_bytes(&read_input(path)?)
}

/// Reads an input file, reporting failures as data errors.
pub fn read_input(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::InputFile {
        path: path.display().to_string(),
        source,
    })
}

pub fn emit_dataset_csv(ds: &Dataset, path: &Path) -> Result<()> {
    write_atomic(path, &dataset_to_csv(ds)?)
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidInput, "path has no file name")))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Prediction tables
// ---------------------------------------------------------------------------

const PREDICTION_HEADER: [&str; 12] = [
    "method",
    "dataset_fingerprint",
    "clip_id",
    "video_id",
    "context",
    "label",
    "predicted",
    "p_exit",
    "p_food",
    "p_idle",
    "confidence",
    "degenerate",
];

/// Held-out predictions of one method on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTable {
    pub method: String,
    pub dataset_fingerprint: String,
    pub rows: Vec<PredictionRow>,
}

impl PredictionTable {
    pub fn from_report(report: &EvalReport, dataset_fingerprint: &str) -> Self {
        Self {
            method: report.method.method.as_str().to_owned(),
            dataset_fingerprint: dataset_fingerprint.to_owned(),
            rows: report.predictions().cloned().collect(),
        }
    }
}

pub fn predictions_to_csv(table: &PredictionTable) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    {
        let mut w = csv_writer(&mut buf);
        w.write_record(PREDICTION_HEADER)?;
        for r in &table.rows {
            let p = r.distribution.probs();
            w.write_record([
                table.method.clone(),
                table.dataset_fingerprint.clone(),
                r.clip_id.clone(),
                r.video_id.clone(),
                r.context.as_str().to_owned(),
                r.label.as_str().to_owned(),
                r.predicted.as_str().to_owned(),
                format_g17(p[0]),
                format_g17(p[1]),
                format_g17(p[2]),
                format_g17(r.confidence),
                (r.degenerate as u8).to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(buf)
}

pub fn parse_predictions_csv_bytes(bytes: &[u8]) -> Result<PredictionTable> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(bytes);
    let header = rdr.headers()?.clone();
    if header.iter().ne(PREDICTION_HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: format!("prediction header must be {}", PREDICTION_HEADER.join(",")),
        });
    }
    let mut method: Option<String> = None;
    let mut fingerprint: Option<String> = None;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != PREDICTION_HEADER.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", PREDICTION_HEADER.len(), rec.len()),
            });
        }
        for (slot, value, what) in [(&mut method, &rec[0], "method"), (&mut fingerprint, &rec[1], "dataset_fingerprint")] {
            match slot {
                None => *slot = Some(value.to_owned()),
                Some(v) if v == value => {}
                Some(v) => {
                    return Err(Error::Parse {
                        line,
                        message: format!("{what} changes within one table ({v} vs {value})"),
                    })
                }
            }
        }
        let label = |i: usize, field: &'static str| {
            rec[i].parse::<IntentLabel>().map_err(|token| Error::UnknownToken { line, field, token })
        };
        let p = [
            parse_float(&rec[7], line, "p_exit")?,
            parse_float(&rec[8], line, "p_food")?,
            parse_float(&rec[9], line, "p_idle")?,
        ];
        rows.push(PredictionRow {
            clip_id: rec[2].to_owned(),
            video_id: rec[3].to_owned(),
            context: rec[4].parse::<ContextState>().map_err(|token| Error::UnknownToken {
                line,
                field: "context",
                token,
            })?,
            label: label(5, "label")?,
            predicted: label(6, "predicted")?,
            distribution: IntentDistribution::new(p).map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?,
            confidence: parse_float(&rec[10], line, "confidence")?,
            degenerate: match &rec[11] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::UnknownToken {
                        line,
                        field: "degenerate",
                        token: other.to_owned(),
                    })
                }
            },
        });
    }
    Ok(PredictionTable {
        method: method.unwrap_or_default(),
        dataset_fingerprint: fingerprint.unwrap_or_default(),
        rows,
    })
}

pub fn parse_predictions_csv(path: &Path) -> Result<PredictionTable> {
    parse_predictions_csv_bytes(&read_input(path)?)
}

// ---------------------------------------------------------------------------
// Report file
// ---------------------------------------------------------------------------

/// Top-level object of a report file: config echo, folds, aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub tool_version: String,
    pub dataset_fingerprint: String,
    pub manifest: String,
    pub train_config: TrainConfig,
    pub report: EvalReport,
}

pub fn report_to_json(file: &ReportFile) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(file)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn parse_report_json(bytes: &[u8]) -> Result<ReportFile> {
    Ok(serde_json::from_slice(bytes)?)
}

// ---------------------------------------------------------------------------
// Analysis tables
// ---------------------------------------------------------------------------

pub fn alpha_table_to_csv(rows: &[AlphaRow]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    {
        let mut w = csv_writer(&mut buf);
        w.write_record(["alpha", "mean_acc", "std_acc", "macro_f1"])?;
        for r in rows {
            w.write_record([r.alpha, r.mean_acc, r.std_acc, r.macro_f1].map(format_g17))?;
        }
        w.flush()?;
    }
    Ok(buf)
}

pub fn shortcut_table_to_csv(reports: &[(String, ShortcutReport)]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    {
        let mut w = csv_writer(&mut buf);
        w.write_record(["method", "context", "shortcut_label", "idle_count", "shortcut_failures", "failure_rate"])?;
        for (method, report) in reports {
            for cell in &report.cells {
                w.write_record([
                    method.clone(),
                    cell.context.as_str().to_owned(),
                    cell.shortcut_label.as_str().to_owned(),
                    cell.idle_count.to_string(),
                    cell.shortcut_failures.to_string(),
                    cell.failure_rate.map(format_g17).unwrap_or_default(),
                ])?;
            }
        }
        w.flush()?;
    }
    Ok(buf)
}

pub fn coverage_table_to_csv(curves: &[(String, CoverageCurve)]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    {
        let mut w = csv_writer(&mut buf);
        w.write_record(["method", "subset", "rank", "coverage", "cumulative_accuracy"])?;
        for (method, curve) in curves {
            for (k, p) in curve.points.iter().enumerate() {
                w.write_record([
                    method.clone(),
                    curve.subset_tag.clone(),
                    (k + 1).to_string(),
                    format_g17(p.coverage),
                    format_g17(p.cumulative_accuracy),
                ])?;
            }
        }
        w.flush()?;
    }
    Ok(buf)
}
