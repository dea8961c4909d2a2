//! Shortcut-failure rates and accuracy–coverage curves over per-clip
//! prediction tables.

use serde::{Deserialize, Serialize};

use crate::domain::{ContextState, IntentLabel};
use crate::error::{Error, Result};
use crate::eval::PredictionRow;

/// Shortcut statistics for one ambiguous context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortcutCell {
    pub context: ContextState,
    pub shortcut_label: IntentLabel,
    pub idle_count: usize,
    pub shortcut_failures: usize,
    /// `None` when the context has no IDLE clips.
    pub failure_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortcutReport {
    /// near_bowl then near_door.
    pub cells: [ShortcutCell; 2],
}

impl ShortcutReport {
    pub fn cell(&self, context: ContextState) -> Option<&ShortcutCell> {
        self.cells.iter().find(|c| c.context == context)
    }

    pub fn rate(&self, context: ContextState) -> Option<f64> {
        self.cell(context).and_then(|c| c.failure_rate)
    }
}

/// Fraction of true-IDLE clips in each ambiguous context predicted as that
/// context's goal label (near_bowl → FOOD, near_door → EXIT).
pub fn shortcut_failure_rates<'a, I>(rows: I) -> ShortcutReport
where
    I: IntoIterator<Item = &'a PredictionRow>,
{
    let mut idle = [0usize; 2];
    let mut failures = [0usize; 2];
    for row in rows {
        let Some(slot) = ContextState::AMBIGUOUS.iter().position(|c| *c == row.context) else {
            continue;
        };
        if row.label != IntentLabel::Idle {
            continue;
        }
        idle[slot] += 1;
        if Some(row.predicted) == row.context.shortcut_label() {
            failures[slot] += 1;
        }
    }
    let cell = |slot: usize| {
        let context = ContextState::AMBIGUOUS[slot];
        ShortcutCell {
            context,
            shortcut_label: context.shortcut_label().expect("ambiguous contexts have a shortcut"),
            idle_count: idle[slot],
            shortcut_failures: failures[slot],
            failure_rate: (idle[slot] > 0).then(|| failures[slot] as f64 / idle[slot] as f64),
        }
    };
    ShortcutReport {
        cells: [cell(0), cell(1)],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveragePoint {
    pub coverage: f64,
    pub cumulative_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCurve {
    pub subset_tag: String,
    pub points: Vec<CoveragePoint>,
}

impl CoverageCurve {
    /// Cumulative accuracy at the first point whose coverage reaches
    /// `coverage`.
    pub fn accuracy_at(&self, coverage: f64) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.coverage >= coverage - 1e-12)
            .map(|p| p.cumulative_accuracy)
    }

    /// Mean cumulative accuracy over all prefixes.
    pub fn area(&self) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        self.points.iter().map(|p| p.cumulative_accuracy).sum::<f64>() / self.points.len() as f64
    }
}

/// Sorts by confidence (descending, ties by clip_id ascending) and emits
/// `(k/n, correct(k)/k)` for every prefix.
pub fn accuracy_coverage_curve(rows: &[&PredictionRow], subset_tag: &str) -> Result<CoverageCurve> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("accuracy-coverage curve needs at least one row"));
    }
    let mut order: Vec<&PredictionRow> = rows.to_vec();
    order.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then_with(|| a.clip_id.cmp(&b.clip_id))
    });
    let n = order.len() as f64;
    let mut correct = 0usize;
    let points = order
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if r.correct() {
                correct += 1;
            }
            let k = i + 1;
            CoveragePoint {
                coverage: k as f64 / n,
                cumulative_accuracy: correct as f64 / k as f64,
            }
        })
        .collect();
    Ok(CoverageCurve {
        subset_tag: subset_tag.to_owned(),
        points,
    })
}

/// Rows whose context is near_bowl or near_door.
pub fn ambiguous_subset<'a, I>(rows: I) -> Vec<&'a PredictionRow>
where
    I: IntoIterator<Item = &'a PredictionRow>,
{
    rows.into_iter()
        .filter(|r| ContextState::AMBIGUOUS.contains(&r.context))
        .collect()
}

/// Pooled ambiguous curve followed by one curve per ambiguous context.
/// Contexts without rows are skipped.
pub fn ambiguous_curves(rows: &[PredictionRow]) -> Result<Vec<CoverageCurve>> {
    let pooled = ambiguous_subset(rows);
    let mut out = vec![accuracy_coverage_curve(&pooled, "ambiguous")?];
    for c in ContextState::AMBIGUOUS {
        let subset: Vec<&PredictionRow> = rows.iter().filter(|r| r.context == c).collect();
        if !subset.is_empty() {
            out.push(accuracy_coverage_curve(&subset, c.as_str())?);
        }
    }
    Ok(out)
}

pub fn subset_accuracy(rows: &[&PredictionRow]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().filter(|r| r.correct()).count() as f64 / rows.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::IntentDistribution;
    use proptest::prelude::*;
    use IntentLabel::*;

    fn row(id: &str, context: ContextState, label: IntentLabel, predicted: IntentLabel, confidence: f64) -> PredictionRow {
        PredictionRow {
            clip_id: id.into(),
            video_id: "v".into(),
            context,
            label,
            predicted,
            distribution: IntentDistribution::UNIFORM,
            confidence,
            degenerate: false,
        }
    }

    #[test]
    fn near_door_rate() {
        let rows = [
            row("a", ContextState::NearDoor, Idle, Exit, 0.5),
            row("b", ContextState::NearDoor, Idle, Idle, 0.5),
            row("c", ContextState::NearDoor, Idle, Exit, 0.5),
            row("d", ContextState::NearDoor, Exit, Exit, 0.5),
            row("e", ContextState::Neutral, Idle, Exit, 0.5),
        ];
        let r = shortcut_failure_rates(&rows);
        let door = r.cell(ContextState::NearDoor).unwrap();
        assert_eq!(door.idle_count, 3);
        assert_eq!(door.shortcut_failures, 2);
        assert_eq!(door.failure_rate, Some(2.0 / 3.0));
        assert_eq!(door.shortcut_label, Exit);
        assert_eq!(r.rate(ContextState::NearBowl), None);
        assert_eq!(r.cell(ContextState::NearBowl).unwrap().idle_count, 0);
    }

    #[test]
    fn shortcut_predictor_fails_every_idle_clip() {
        let rows: Vec<_> = (0..6)
            .map(|i| {
                let c = if i % 2 == 0 { ContextState::NearBowl } else { ContextState::NearDoor };
                row(&format!("{i}"), c, Idle, c.shortcut_label().unwrap(), 0.7)
            })
            .collect();
        let r = shortcut_failure_rates(&rows);
        assert_eq!(r.rate(ContextState::NearBowl), Some(1.0));
        assert_eq!(r.rate(ContextState::NearDoor), Some(1.0));
    }

    #[test]
    fn curve_examples() {
        let a = row("a", ContextState::NearBowl, Food, Food, 0.9);
        let b = row("b", ContextState::NearBowl, Food, Idle, 0.6);
        let c = accuracy_coverage_curve(&[&b, &a], "t").unwrap();
        assert_eq!(
            c.points,
            vec![
                CoveragePoint { coverage: 0.5, cumulative_accuracy: 1.0 },
                CoveragePoint { coverage: 1.0, cumulative_accuracy: 0.5 },
            ]
        );
        assert_eq!(c.accuracy_at(0.5), Some(1.0));

        let good: Vec<_> = (0..5)
            .map(|i| row(&format!("{i}"), ContextState::NearDoor, Exit, Exit, 0.1 * i as f64))
            .collect();
        let refs: Vec<_> = good.iter().collect();
        let c = accuracy_coverage_curve(&refs, "t").unwrap();
        assert!(c.points.iter().all(|p| p.cumulative_accuracy == 1.0));

        assert!(accuracy_coverage_curve(&[], "t").is_err());
    }

    #[test]
    fn equal_confidences_follow_clip_id_order() {
        let rows = [
            row("c", ContextState::NearDoor, Exit, Idle, 0.5),
            row("a", ContextState::NearDoor, Exit, Exit, 0.5),
            row("b", ContextState::NearDoor, Exit, Idle, 0.5),
        ];
        let refs: Vec<_> = rows.iter().collect();
        let acc: Vec<f64> = accuracy_coverage_curve(&refs, "t")
            .unwrap()
            .points
            .iter()
            .map(|p| p.cumulative_accuracy)
            .collect();
        assert_eq!(acc, vec![1.0, 0.5, 1.0 / 3.0]);
    }

    #[test]
    fn subset_filter() {
        let mut rows = Vec::new();
        for i in 0..10 {
            let c = match i % 5 {
                0 | 1 => ContextState::Neutral,
                2 | 3 => ContextState::NearBowl,
                _ => ContextState::NearDoor,
            };
            rows.push(row(&format!("{i}"), c, Idle, Idle, 0.5));
        }
        let once = ambiguous_subset(&rows);
        assert_eq!(once.len(), 6);
        let twice = ambiguous_subset(once.iter().copied());
        assert_eq!(once, twice);

        let neutral: Vec<_> = rows.iter().filter(|r| r.context == ContextState::Neutral).cloned().collect();
        assert!(ambiguous_subset(&neutral).is_empty());
        assert!(ambiguous_curves(&neutral).is_err());
    }

    fn arb_row() -> impl Strategy<Value = PredictionRow> {
        (0usize..1000, 0usize..3, 0usize..3, 0usize..3, 0u8..5).prop_map(|(id, c, t, p, conf)| {
            row(
                &format!("r{id}"),
                ContextState::ALL[c],
                IntentLabel::ALL[t],
                IntentLabel::ALL[p],
                0.4 + 0.1 * conf as f64,
            )
        })
    }

    proptest! {
        #[test]
        fn curve_invariants(mut rows in prop::collection::vec(arb_row(), 1..40), seed in any::<u64>()) {
            // Unique ids make the tie rule total.
            for (i, r) in rows.iter_mut().enumerate() {
                r.clip_id = format!("{}-{i:03}", r.clip_id);
            }
            let refs: Vec<&PredictionRow> = rows.iter().collect();
            let curve = accuracy_coverage_curve(&refs, "t").unwrap();
            let last = curve.points.last().unwrap();
            prop_assert_eq!(last.coverage, 1.0);
            prop_assert_eq!(last.cumulative_accuracy, subset_accuracy(&refs));
            prop_assert!(curve.points.windows(2).all(|w| w[0].coverage < w[1].coverage));

            let mut shuffled = refs.clone();
            let n = shuffled.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
            prop_assert_eq!(accuracy_coverage_curve(&shuffled, "t").unwrap(), curve);

            let report = shortcut_failure_rates(rows.iter());
            for cell in &report.cells {
                prop_assert!(cell.shortcut_failures <= cell.idle_count);
                if let Some(r) = cell.failure_rate {
                    prop_assert!((0.0..=1.0).contains(&r));
                }
            }
        }
    }
}
