use std::collections::BTreeMap;
use std::fmt::Display;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// One-vs-rest ROC curve. Points run from (0,0) to (1,1) with non-decreasing
/// coordinates; `auc` is the trapezoid area under them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve<L> {
    pub positive_class: L,
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Curve from binary truth and scores. Equal scores form a single threshold
/// step, so ties contribute a diagonal segment.
pub fn roc_from_scores(is_positive: &[bool], scores: &[f64]) -> Result<(Vec<(f64, f64)>, f64), EvalError> {
    if is_positive.len() != scores.len() {
        return Err(EvalError::LengthMismatch {
            truth: is_positive.len(),
            predicted: scores.len(),
        });
    }
    if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
        return Err(EvalError::MissingScore {
            class: "positive".into(),
            index,
        });
    }
    let pos = is_positive.iter().filter(|&&p| p).count();
    let neg = is_positive.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::RocUndefined("positive".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if is_positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let next = (fp as f64 / neg as f64, tp as f64 / pos as f64);
        let prev = *points.last().expect("starts at origin");
        auc += (next.0 - prev.0) * (next.1 + prev.1) / 2.0;
        points.push(next);
    }
    Ok((points, auc))
}

/// One-vs-rest ROC for `positive` from per-user probability maps.
pub fn compute_roc<L>(truth: &[L], scores: &[BTreeMap<L, f64>], positive: L) -> Result<RocCurve<L>, EvalError>
where
    L: Copy + Ord + Display,
{
    if truth.len() != scores.len() {
        return Err(EvalError::LengthMismatch {
            truth: truth.len(),
            predicted: scores.len(),
        });
    }
    let values = scores
        .iter()
        .enumerate()
        .map(|(index, m)| {
            m.get(&positive)
                .copied()
                .filter(|v| v.is_finite())
                .ok_or_else(|| EvalError::MissingScore {
                    class: positive.to_string(),
                    index,
                })
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let is_positive: Vec<bool> = truth.iter().map(|t| *t == positive).collect();
    let (points, auc) = roc_from_scores(&is_positive, &values).map_err(|e| match e {
        EvalError::RocUndefined(_) => EvalError::RocUndefined(positive.to_string()),
        other => other,
    })?;
    Ok(RocCurve {
        positive_class: positive,
        points,
        auc,
    })
}
