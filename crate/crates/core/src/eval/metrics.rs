use std::collections::BTreeMap;
use std::fmt::Display;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Counts indexed `[true][predicted]` in the order of `classes`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix<L> {
    pub classes: Vec<L>,
    pub counts: Vec<Vec<usize>>,
}

impl<L: Copy + PartialEq + Display> ConfusionMatrix<L> {
    pub fn new(truth: &[L], predicted: &[L], classes: &[L]) -> Result<Self, EvalError> {
        if truth.len() != predicted.len() {
            return Err(EvalError::LengthMismatch {
                truth: truth.len(),
                predicted: predicted.len(),
            });
        }
        let index = |l: &L| {
            classes
                .iter()
                .position(|c| c == l)
                .ok_or_else(|| EvalError::UnknownLabel(l.to_string()))
        };
        let mut counts = vec![vec![0; classes.len()]; classes.len()];
        for (t, p) in truth.iter().zip(predicted) {
            counts[index(t)?][index(p)?] += 1;
        }
        Ok(ConfusionMatrix {
            classes: classes.to_vec(),
            counts,
        })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn true_positives(&self, k: usize) -> usize {
        self.counts[k][k]
    }

    /// Row sum: users whose true label is class `k`.
    pub fn support(&self, k: usize) -> usize {
        self.counts[k].iter().sum()
    }

    /// Column sum: users predicted as class `k`.
    pub fn predicted_count(&self, k: usize) -> usize {
        self.counts.iter().map(|row| row[k]).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    /// Neither in the truth nor among the predictions; excluded from macro means.
    pub absent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub avg_precision: f64,
    pub avg_recall: f64,
    /// Harmonic mean of `avg_precision` and `avg_recall`.
    pub f1: f64,
    /// Unweighted mean of the per-class F1 values.
    pub mean_class_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport<L: Ord> {
    pub per_class: BTreeMap<L, ClassMetrics>,
    #[serde(rename = "macro")]
    pub macro_avg: MacroMetrics,
    pub accuracy: f64,
    /// Mean absolute distance between true and predicted positions in the
    /// ordered class list.
    pub ordinal_error: f64,
    pub n: usize,
    pub confusion: ConfusionMatrix<L>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub(crate) fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// One-vs-rest precision, recall and F1 per class, plus macro averages over
/// the classes that occur in the truth or the predictions.
pub fn compute_metrics<L>(truth: &[L], predicted: &[L], classes: &[L]) -> Result<MetricsReport<L>, EvalError>
where
    L: Copy + Ord + Display,
{
    let cm = ConfusionMatrix::new(truth, predicted, classes)?;
    let mut per_class = BTreeMap::new();
    let (mut sp, mut sr, mut sf, mut present) = (0.0, 0.0, 0.0, 0usize);
    for (k, &label) in classes.iter().enumerate() {
        let tp = cm.true_positives(k);
        let support = cm.support(k);
        let predicted_k = cm.predicted_count(k);
        let precision = ratio(tp, predicted_k);
        let recall = ratio(tp, support);
        let f1 = harmonic(precision, recall);
        let absent = support == 0 && predicted_k == 0;
        if !absent {
            sp += precision;
            sr += recall;
            sf += f1;
            present += 1;
        }
        per_class.insert(
            label,
            ClassMetrics {
                precision,
                recall,
                f1,
                support,
                absent,
            },
        );
    }
    let avg = |s: f64| if present == 0 { 0.0 } else { s / present as f64 };
    let (avg_precision, avg_recall) = (avg(sp), avg(sr));
    let n = cm.total();
    let correct: usize = (0..classes.len()).map(|k| cm.true_positives(k)).sum();
    let distance: usize = cm
        .counts
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, &c)| c * i.abs_diff(j)))
        .sum();
    Ok(MetricsReport {
        per_class,
        macro_avg: MacroMetrics {
            avg_precision,
            avg_recall,
            f1: harmonic(avg_precision, avg_recall),
            mean_class_f1: avg(sf),
        },
        accuracy: ratio(correct, n),
        ordinal_error: ratio(distance, n),
        n,
        confusion: cm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SeverityLabel::{self, *};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn perfect_prediction_scores_one() {
        let t = [Supportive, Ideation, Behavior, Attempt, Ideation];
        let m = compute_metrics(&t, &t, &SeverityLabel::ALL).unwrap();
        for c in m.per_class.values() {
            assert_eq!((c.precision, c.recall, c.f1), (1.0, 1.0, 1.0));
        }
        assert_eq!(m.macro_avg.f1, 1.0);
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.ordinal_error, 0.0);
    }

    #[test]
    fn hand_built_four_by_four() {
        // truth I,I,B,A ; pred I,B,B,A
        // I: tp 1, predicted 1, support 2 -> P 1, R 1/2
        // B: tp 1, predicted 2, support 1 -> P 1/2, R 1
        // A: tp 1, predicted 1, support 1 -> P 1, R 1
        // S: absent.
        let m = compute_metrics(
            &[Ideation, Ideation, Behavior, Attempt],
            &[Ideation, Behavior, Behavior, Attempt],
            &SeverityLabel::ALL,
        )
        .unwrap();
        assert_eq!(m.confusion.counts[1], vec![0, 1, 1, 0]);
        let i = m.per_class[&Ideation];
        assert_eq!((i.precision, i.recall, i.support), (1.0, 0.5, 2));
        assert!((i.f1 - 2.0 / 3.0).abs() < 1e-15);
        let b = m.per_class[&Behavior];
        assert_eq!((b.precision, b.recall), (0.5, 1.0));
        let s = m.per_class[&Supportive];
        assert!(s.absent);
        assert_eq!((s.precision, s.recall, s.support), (0.0, 0.0, 0));
        assert!((m.macro_avg.avg_precision - 2.5 / 3.0).abs() < 1e-15);
        assert!((m.macro_avg.avg_recall - 2.5 / 3.0).abs() < 1e-15);
        assert_eq!(m.accuracy, 0.75);
        assert_eq!(m.ordinal_error, 0.25);
    }

    #[test]
    fn length_mismatch_and_unknown_labels() {
        assert!(matches!(
            compute_metrics(&[Ideation], &[], &SeverityLabel::ALL),
            Err(EvalError::LengthMismatch { .. })
        ));
        assert!(matches!(
            compute_metrics(&[Ideation], &[Attempt], &[Ideation]),
            Err(EvalError::UnknownLabel(_))
        ));
    }

    /// Per-class counts by direct scanning, no matrix.
    fn oracle(truth: &[usize], pred: &[usize], k: usize) -> (Vec<(f64, f64)>, f64, f64) {
        let mut pr = Vec::new();
        let (mut sp, mut sr, mut present) = (0.0, 0.0, 0);
        for c in 0..k {
            let tp = truth.iter().zip(pred).filter(|(t, p)| **t == c && **p == c).count();
            let fp = truth.iter().zip(pred).filter(|(t, p)| **t != c && **p == c).count();
            let fn_ = truth.iter().zip(pred).filter(|(t, p)| **t == c && **p != c).count();
            let p = if tp + fp == 0 {
                0.0
            } else {
                tp as f64 / (tp + fp) as f64
            };
            let r = if tp + fn_ == 0 {
                0.0
            } else {
                tp as f64 / (tp + fn_) as f64
            };
            if tp + fp + fn_ > 0 {
                sp += p;
                sr += r;
                present += 1;
            }
            pr.push((p, r));
        }
        (pr, sp / present as f64, sr / present as f64)
    }

    #[test]
    fn matches_scanning_oracle_on_random_cases() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..1000 {
            let n = rng.gen_range(1..40);
            let t: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
            let p: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
            let m = compute_metrics(&t, &p, &[0, 1, 2, 3]).unwrap();
            let (pr, ap, ar) = oracle(&t, &p, 4);
            for c in 0..4 {
                assert_eq!((m.per_class[&c].precision, m.per_class[&c].recall), pr[c]);
            }
            assert_eq!(m.macro_avg.avg_precision, ap);
            assert_eq!(m.macro_avg.avg_recall, ar);
        }
    }

    proptest! {
        #[test]
        fn metrics_stay_in_unit_interval(pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..60)) {
            let (t, p): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let m = compute_metrics(&t, &p, &[0, 1, 2, 3]).unwrap();
            prop_assert_eq!(m.confusion.total(), t.len());
            for c in m.per_class.values() {
                for v in [c.precision, c.recall, c.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
                prop_assert_eq!(c.f1, harmonic(c.precision, c.recall));
            }
            prop_assert!((0.0..=1.0).contains(&m.macro_avg.f1));
        }
    }
}
