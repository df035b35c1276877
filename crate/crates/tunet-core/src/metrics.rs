//! Evaluation suite: per-sample and per-series accuracy, AP@a over a
//! threshold sweep, and confusion matrices.
//!
//! AP@a is the fraction of test series whose per-series sample accuracy is
//! at least `a` (boundary counts as success); mean AP averages it over the
//! default thresholds 0.5..0.9.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// The five standard thresholds.
pub fn default_thresholds() -> Vec<f64> {
    vec![0.5, 0.6, 0.7, 0.8, 0.9]
}

/// Fraction of positions where prediction equals truth.
pub fn per_series_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "per_series_accuracy: {} predictions vs {} truths",
            pred.len(),
            truth.len()
        )));
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// (1/N) * sum 1{acc_i >= a}.
pub fn ap_at(per_series_acc: &[f64], a: f64) -> Result<f64> {
    if per_series_acc.is_empty() {
        return Err(Error::InvalidConfig("ap_at: empty accuracy list".into()));
    }
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::InvalidConfig(format!(
            "ap_at: threshold {} outside [0, 1]",
            a
        )));
    }
    let hits = per_series_acc.iter().filter(|&&acc| acc >= a).count();
    Ok(hits as f64 / per_series_acc.len() as f64)
}

/// Per-threshold average precision values and their mean.
#[derive(Clone, Debug, PartialEq)]
pub struct ApReport {
    pub thresholds: Vec<f64>,
    pub ap_values: Vec<f64>,
    pub mean_ap: f64,
    /// Number of test series.
    pub n: usize,
    pub per_series_acc: Vec<f64>,
}

impl ApReport {
    pub fn compute(per_series_acc: &[f64], thresholds: &[f64]) -> Result<ApReport> {
        let ap_values: Vec<f64> = thresholds
            .iter()
            .map(|&a| ap_at(per_series_acc, a))
            .collect::<Result<_>>()?;
        let mean_ap = ap_values.iter().sum::<f64>() / ap_values.len().max(1) as f64;
        Ok(ApReport {
            thresholds: thresholds.to_vec(),
            ap_values,
            mean_ap,
            n: per_series_acc.len(),
            per_series_acc: per_series_acc.to_vec(),
        })
    }
}

/// Square count matrix indexed (true class, predicted class).
#[derive(Clone, Debug, PartialEq)]
pub struct ConfusionMatrix {
    pub num_classes: usize,
    counts: Vec<u64>,
    pub class_names: Vec<String>,
}

/// Count (truth, prediction) pairs into a `num_classes` square matrix.
pub fn confusion(preds: &[usize], truths: &[usize], num_classes: usize) -> Result<ConfusionMatrix> {
    if preds.len() != truths.len() {
        return Err(Error::ShapeMismatch(format!(
            "confusion: {} predictions vs {} truths",
            preds.len(),
            truths.len()
        )));
    }
    let mut counts = vec![0u64; num_classes * num_classes];
    for (&p, &t) in preds.iter().zip(truths) {
        if p >= num_classes || t >= num_classes {
            return Err(Error::ShapeMismatch(format!(
                "confusion: class ({}, {}) out of range for {} classes",
                t, p, num_classes
            )));
        }
        counts[t * num_classes + p] += 1;
    }
    let class_names = (0..num_classes).map(|c| format!("class{c}")).collect();
    Ok(ConfusionMatrix {
        num_classes,
        counts,
        class_names,
    })
}

impl ConfusionMatrix {
    pub fn count(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.num_classes + pred]
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        (0..self.num_classes).map(|p| self.count(truth, p)).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes).map(|c| self.count(c, c)).sum()
    }

    /// trace / total: the overall sample accuracy.
    pub fn overall_accuracy(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        self.trace() as f64 / self.total() as f64
    }

    /// Row-normalized view for display; rows with no samples stay zero.
    pub fn row_normalized(&self) -> Vec<Vec<f64>> {
        (0..self.num_classes)
            .map(|t| {
                let total = self.row_sum(t);
                (0..self.num_classes)
                    .map(|p| {
                        if total == 0 {
                            0.0
                        } else {
                            self.count(t, p) as f64 / total as f64
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Full evaluation block: headline pooled accuracy, mean per-series
/// accuracy, the AP sweep, and the confusion matrix.
#[derive(Clone, Debug)]
pub struct EvalReport {
    pub overall_accuracy: f64,
    pub mean_series_accuracy: f64,
    pub ap: ApReport,
    pub confusion: ConfusionMatrix,
}

impl EvalReport {
    /// Human-readable table.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "overall sample accuracy: {:.4}", self.overall_accuracy);
        let _ = writeln!(
            s,
            "mean per-series accuracy: {:.4}",
            self.mean_series_accuracy
        );
        let _ = writeln!(s, "test series: {}", self.ap.n);
        for (a, ap) in self.ap.thresholds.iter().zip(&self.ap.ap_values) {
            let _ = writeln!(s, "AP@{:.1}: {:.2}", a, ap);
        }
        let _ = writeln!(s, "mean AP: {:.2}", self.ap.mean_ap);
        let _ = writeln!(s, "confusion (rows = truth, cols = prediction):");
        for t in 0..self.confusion.num_classes {
            let row: Vec<String> = (0..self.confusion.num_classes)
                .map(|p| format!("{:>8}", self.confusion.count(t, p)))
                .collect();
            let _ = writeln!(s, "  {} |{}", self.confusion.class_names[t], row.join(""));
        }
        s
    }

    /// Machine-readable block: one `ap,<a>,<value>` line per threshold, a
    /// mean-AP line, one `confusion,<truth>,...` line per row, and the
    /// accuracy lines.
    pub fn to_csv_block(&self) -> String {
        let mut s = String::new();
        for (a, ap) in self.ap.thresholds.iter().zip(&self.ap.ap_values) {
            let _ = writeln!(s, "ap,{},{}", a, ap);
        }
        let _ = writeln!(s, "mean_ap,{}", self.ap.mean_ap);
        for t in 0..self.confusion.num_classes {
            let row: Vec<String> = (0..self.confusion.num_classes)
                .map(|p| self.confusion.count(t, p).to_string())
                .collect();
            let _ = writeln!(s, "confusion,{},{}", t, row.join(","));
        }
        let _ = writeln!(s, "overall_accuracy,{}", self.overall_accuracy);
        let _ = writeln!(s, "mean_series_accuracy,{}", self.mean_series_accuracy);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_basics() {
        assert_eq!(per_series_accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(per_series_accuracy(&[0, 1], &[1, 0]).unwrap(), 0.0);
        assert_eq!(
            per_series_accuracy(&[0, 1, 1, 0], &[0, 1, 0, 0]).unwrap(),
            0.75
        );
        assert!(per_series_accuracy(&[0, 1], &[0]).is_err());
        assert!(per_series_accuracy(&[], &[]).is_err());
    }

    #[test]
    fn ap_boundary_counts_as_pass() {
        let accs = [0.5, 0.9, 1.0];
        let ap = ap_at(&accs, 0.9).unwrap();
        assert!((ap - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ap_all_perfect() {
        let accs = [1.0; 7];
        for a in [0.0, 0.5, 0.9, 1.0] {
            assert_eq!(ap_at(&accs, a).unwrap(), 1.0);
        }
    }

    #[test]
    fn ap_at_zero_is_one() {
        let accs = [0.0, 0.3, 0.99];
        assert_eq!(ap_at(&accs, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn ap_is_non_increasing_in_threshold() {
        let accs: Vec<f64> = (0..100).map(|i| (i as f64) / 99.0).collect();
        let mut prev = f64::INFINITY;
        for i in 0..=20 {
            let a = i as f64 / 20.0;
            let ap = ap_at(&accs, a).unwrap();
            assert!(ap <= prev);
            prev = ap;
        }
    }

    #[test]
    fn detection_row_identity_256_of_278() {
        // 256 of 278 series at accuracy >= 0.9 gives AP@0.9 that rounds to 0.92.
        let mut accs = vec![0.95; 256];
        accs.extend(vec![0.5; 22]);
        let ap = ap_at(&accs, 0.9).unwrap();
        assert_eq!(accs.len(), 278);
        assert!((ap - 256.0 / 278.0).abs() < 1e-12);
        assert_eq!(format!("{:.2}", ap), "0.92");
    }

    #[test]
    fn table_rows_reproduce_reported_means() {
        let detection = [1.0, 1.0, 1.0, 1.0, 0.92];
        let mean: f64 = detection.iter().sum::<f64>() / 5.0;
        assert!((mean - 0.984).abs() < 1e-12);
        assert_eq!(format!("{:.2}", mean), "0.98");

        let classification = [0.99, 0.94, 0.87, 0.81, 0.69];
        let mean: f64 = classification.iter().sum::<f64>() / 5.0;
        assert!((mean - 0.86).abs() < 1e-12);
    }

    #[test]
    fn mean_of_equal_aps_is_that_value() {
        // Every acc passes all thresholds: APs all 1, mean 1.
        let report = ApReport::compute(&[0.95; 10], &default_thresholds()).unwrap();
        assert!(report.ap_values.iter().all(|&v| v == 1.0));
        assert_eq!(report.mean_ap, 1.0);

        // Every acc fails all thresholds: APs all 0, mean 0.
        let report = ApReport::compute(&[0.3; 10], &default_thresholds()).unwrap();
        assert!(report.ap_values.iter().all(|&v| v == 0.0));
        assert_eq!(report.mean_ap, 0.0);

        // Half pass everywhere: APs all 0.5, mean 0.5.
        let mut accs = vec![0.95; 5];
        accs.extend(vec![0.1; 5]);
        let report = ApReport::compute(&accs, &default_thresholds()).unwrap();
        assert!(report.ap_values.iter().all(|&v| v == 0.5));
        assert_eq!(report.mean_ap, 0.5);
    }

    #[test]
    fn confusion_hand_example() {
        let m = confusion(&[0, 1, 1], &[0, 0, 1], 2).unwrap();
        assert_eq!(m.count(0, 0), 1);
        assert_eq!(m.count(0, 1), 1);
        assert_eq!(m.count(1, 0), 0);
        assert_eq!(m.count(1, 1), 1);
        assert_eq!(m.total(), 3);
    }

    #[test]
    fn perfect_predictions_are_diagonal() {
        let truths = vec![0, 1, 2, 1, 0, 2, 2];
        let m = confusion(&truths, &truths, 3).unwrap();
        for t in 0..3 {
            for p in 0..3 {
                if t == p {
                    assert_eq!(m.count(t, p), m.row_sum(t));
                } else {
                    assert_eq!(m.count(t, p), 0);
                }
            }
        }
        assert_eq!(m.overall_accuracy(), 1.0);
    }

    #[test]
    fn trace_over_total_is_overall_accuracy() {
        let preds = vec![0, 1, 0, 2, 2, 1, 0];
        let truths = vec![0, 1, 1, 2, 0, 1, 0];
        let m = confusion(&preds, &truths, 3).unwrap();
        let direct = per_series_accuracy(&preds, &truths).unwrap();
        assert!((m.overall_accuracy() - direct).abs() < 1e-12);
    }

    #[test]
    fn confusion_rejects_out_of_range() {
        assert!(confusion(&[0, 3], &[0, 1], 3).is_err());
        assert!(confusion(&[0, 1], &[0, 5], 3).is_err());
    }

    #[test]
    fn csv_block_is_parseable() {
        let ap = ApReport::compute(&[1.0, 0.8, 0.6], &default_thresholds()).unwrap();
        let m = confusion(&[0, 1, 1], &[0, 0, 1], 2).unwrap();
        let report = EvalReport {
            overall_accuracy: 2.0 / 3.0,
            mean_series_accuracy: 0.8,
            ap,
            confusion: m,
        };
        let block = report.to_csv_block();
        assert!(block.lines().any(|l| l.starts_with("ap,0.5,")));
        assert!(block.lines().any(|l| l.starts_with("mean_ap,")));
        assert!(block.lines().any(|l| l.starts_with("confusion,0,")));
        assert!(block.lines().any(|l| l.starts_with("overall_accuracy,")));
    }
}
