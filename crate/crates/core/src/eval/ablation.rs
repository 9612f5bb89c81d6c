use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cross_validate, MetricsReport, RocCurve};
use crate::corpus::{ablation_slice, AblationFlags, SeverityLabel, UserRecord};
use crate::lexicon::EmbeddingTable;
use crate::models::{Method, TrainConfig};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationSpec {
    /// 1-based experiment number; the row id is `S{number}`.
    pub number: usize,
    pub method: Method,
    pub flags: AblationFlags,
}

impl AblationSpec {
    pub fn id(&self) -> String {
        format!("S{}", self.number)
    }
}

/// S1 to S8 are TinvM and S9 to S16 TvarM. Within each method the (TA, UI, SU)
/// flags count down from all-yes to all-no, SU varying fastest.
pub fn ablation_grid() -> Vec<AblationSpec> {
    let mut grid = Vec::with_capacity(16);
    for (m, method) in [Method::Tinvm, Method::Tvarm].into_iter().enumerate() {
        for combo in 0..8usize {
            grid.push(AblationSpec {
                number: m * 8 + combo + 1,
                method,
                flags: AblationFlags::new(combo & 4 == 0, combo & 2 == 0, combo & 1 == 0),
            });
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub experiment_id: String,
    pub method: Method,
    pub flags: AblationFlags,
    pub rng_seed: u64,
    pub n_users: usize,
    pub metrics: Option<MetricsReport<SeverityLabel>>,
    pub roc: Vec<RocCurve<SeverityLabel>>,
    /// Set when the row failed; the grid still has 16 rows.
    pub error: Option<String>,
}

/// Runs the 16-experiment grid. Row `S{n}` slices `users` with its flags and
/// cross-validates under seed stream `S{n}` of `config.rng_seed`.
pub fn run_ablation(
    users: &[UserRecord],
    folds: usize,
    embeddings: Option<&EmbeddingTable>,
    config: &TrainConfig,
) -> Vec<AblationRow> {
    ablation_grid()
        .into_par_iter()
        .map(|spec| {
            let id = spec.id();
            let rng_seed = seed::derive(config.rng_seed, &id);
            let sliced = ablation_slice(users, spec.flags);
            let row_config = TrainConfig {
                rng_seed,
                ..config.clone()
            };
            let mut row = AblationRow {
                experiment_id: id,
                method: spec.method,
                flags: spec.flags,
                rng_seed,
                n_users: sliced.len(),
                metrics: None,
                roc: Vec::new(),
                error: None,
            };
            match cross_validate(&sliced, spec.method, folds, embeddings, &row_config) {
                Ok(cv) => {
                    row.metrics = Some(cv.metrics);
                    row.roc = cv.roc;
                }
                Err(e) => {
                    log::warn!("{} failed: {e}", row.experiment_id);
                    row.error = Some(e.to_string());
                }
            }
            row
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_matches_table_layout() {
        let yes_no = |f: AblationFlags| {
            [f.include_throwaway, f.include_uninformative, f.include_supportive]
                .map(|b| if b { 'y' } else { 'n' })
                .iter()
                .collect::<String>()
        };
        let grid = ablation_grid();
        assert_eq!(grid.len(), 16);
        let expected = ["yyy", "yyn", "yny", "ynn", "nyy", "nyn", "nny", "nnn"];
        for (i, spec) in grid.iter().enumerate() {
            assert_eq!(spec.id(), format!("S{}", i + 1));
            assert_eq!(spec.method, if i < 8 { Method::Tinvm } else { Method::Tvarm });
            assert_eq!(yes_no(spec.flags), expected[i % 8]);
        }
        assert_eq!(grid[0].flags, AblationFlags::ALL_INCLUDED);
        assert_eq!(grid[8].flags, AblationFlags::ALL_INCLUDED);
    }

    #[test]
    fn failed_rows_are_kept() {
        let users = crate::synthetic::keyword_corpus(&crate::synthetic::CorpusSpec::small(), 1);
        // 3 users per class cannot fill 5 folds.
        let rows = run_ablation(&users, 5, None, &TrainConfig::default());
        assert_eq!(rows.len(), 16);
        assert!(rows.iter().all(|r| r.error.is_some() && r.metrics.is_none()));
    }
}
