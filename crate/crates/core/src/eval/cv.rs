use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{compute_metrics, compute_roc, EvalError, MetricsReport, RocCurve};
use crate::corpus::{SeverityLabel, UserRecord};
use crate::lexicon::EmbeddingTable;
use crate::models::{train_method, Method, TrainConfig, UserPrediction};
use crate::seed;

pub const DEFAULT_FOLDS: usize = 5;

/// Fold id per user. Each class is shuffled under its own seed stream and
/// dealt round-robin, continuing the deal across classes.
pub fn stratified_folds(labels: &[SeverityLabel], folds: usize, master_seed: u64) -> Result<Vec<usize>, EvalError> {
    if folds < 2 {
        return Err(EvalError::InvalidFolds(folds));
    }
    let mut by_class: BTreeMap<SeverityLabel, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(*l).or_default().push(i);
    }
    if by_class.len() < 2 {
        return Err(EvalError::SingleClass);
    }
    for (class, members) in &by_class {
        if members.len() < folds {
            return Err(EvalError::Stratification {
                class: class.to_string(),
                count: members.len(),
                folds,
            });
        }
    }
    let mut assignment = vec![0; labels.len()];
    let mut deal = 0;
    for (class, mut members) in by_class {
        members.shuffle(&mut seed::rng(master_seed, &format!("folds/{class}")));
        for i in members {
            assignment[i] = deal % folds;
            deal += 1;
        }
    }
    Ok(assignment)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPrediction {
    pub fold: usize,
    pub truth: SeverityLabel,
    pub prediction: UserPrediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub method: Method,
    pub folds: usize,
    pub rng_seed: u64,
    /// In input user order.
    pub predictions: Vec<CvPrediction>,
    pub metrics: MetricsReport<SeverityLabel>,
    /// One curve per class that has both positives and negatives in the pool.
    pub roc: Vec<RocCurve<SeverityLabel>>,
}

/// Stratified k-fold cross-validation. Every user is predicted exactly once by
/// a model that never saw it; metrics and ROC curves use the pooled predictions.
///
/// Folds train concurrently; fold `k` trains with seed stream `fold-k` of
/// `config.rng_seed`.
pub fn cross_validate(
    users: &[UserRecord],
    method: Method,
    folds: usize,
    embeddings: Option<&EmbeddingTable>,
    config: &TrainConfig,
) -> Result<CvResult, EvalError> {
    let labels: Vec<SeverityLabel> = users.iter().map(|u| u.user_label).collect();
    let assignment = stratified_folds(&labels, folds, seed::derive(config.rng_seed, "folds"))?;
    let per_fold: Vec<Vec<(usize, UserPrediction)>> = (0..folds)
        .into_par_iter()
        .map(|k| {
            let train: Vec<UserRecord> = users
                .iter()
                .zip(&assignment)
                .filter(|(_, &f)| f != k)
                .map(|(u, _)| u.clone())
                .collect();
            let fold_config = TrainConfig {
                rng_seed: seed::derive(config.rng_seed, &format!("fold-{k}")),
                ..config.clone()
            };
            let model = train_method(method, &train, embeddings, &fold_config)?;
            users
                .iter()
                .enumerate()
                .filter(|(i, _)| assignment[*i] == k)
                .map(|(i, u)| Ok((i, model.predict(u)?)))
                .collect::<Result<Vec<_>, EvalError>>()
        })
        .collect::<Result<_, EvalError>>()?;

    let mut slots: Vec<Option<CvPrediction>> = vec![None; users.len()];
    for (k, preds) in per_fold.into_iter().enumerate() {
        for (i, prediction) in preds {
            slots[i] = Some(CvPrediction {
                fold: k,
                truth: labels[i],
                prediction,
            });
        }
    }
    let predictions: Vec<CvPrediction> = slots
        .into_iter()
        .map(|s| s.expect("every user belongs to exactly one fold"))
        .collect();
    let predicted: Vec<SeverityLabel> = predictions.iter().map(|p| p.prediction.predicted).collect();
    let metrics = compute_metrics(&labels, &predicted, &SeverityLabel::ALL)?;
    let scores: Vec<_> = predictions.iter().map(|p| p.prediction.probabilities.clone()).collect();
    let roc = SeverityLabel::ALL
        .iter()
        .filter_map(|&c| compute_roc(&labels, &scores, c).ok())
        .collect();
    Ok(CvResult {
        method,
        folds,
        rng_seed: config.rng_seed,
        predictions,
        metrics,
        roc,
    })
}
