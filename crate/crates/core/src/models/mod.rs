//! The two user-level methodologies and the per-post classifier they share.
//!
//! TvarM is trained in two stages: the post LSTM is fit on post labels and
//! frozen, then the user CNN is fit on each user's time-ordered sequence of
//! post risk probabilities. TinvM is a single Kim-style CNN over the
//! concatenation of all of a user's posts.
//!
//! Argmax ties resolve toward the *higher* severity level. This is a
//! clinical-safety default: when the model is undecided, the riskier reading
//! wins.

mod bundle;
mod encoder;
mod post;
mod tinvm;
mod trainer;
mod tvarm;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{PostLabel, SeverityLabel, UserRecord};
use crate::lexicon::EmbeddingTable;
use crate::nn::NnError;

pub use bundle::{BundleKind, ModelBundle, TrainedModel, BUNDLE_FORMAT_VERSION};
pub use encoder::{EmbeddingSource, TextEncoder};
pub use post::{predict_post, train_post_classifier};
pub use tinvm::{predict_user_tinvm, tinvm_tokens, train_tinvm};
pub use tvarm::{predict_user_tvarm, train_tvarm, tvarm_input, user_cnn_probs, TvarmInput};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("degenerate labels: training data needs at least two distinct classes")]
    DegenerateLabels,
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("user `{0}` has no posts")]
    EmptyUser(String),
    #[error("wrong bundle kind: expected {expected}, found {found}")]
    WrongBundle { expected: BundleKind, found: BundleKind },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("bundle I/O error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("bundle format error: {0}")]
    Format(String),
    #[error("training diverged: non-finite loss in epoch {epoch}")]
    Diverged { epoch: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "tinvm", alias = "TinvM")]
    Tinvm,
    #[serde(rename = "tvarm", alias = "TvarM")]
    Tvarm,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Tinvm, Method::Tvarm];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Tinvm => "TinvM",
            Method::Tvarm => "TvarM",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "tinvm" => Ok(Method::Tinvm),
            "tvarm" => Ok(Method::Tvarm),
            other => Err(format!("unknown method `{other}` (expected tinvm or tvarm)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    None,
    InverseFrequency,
}

/// Training hyperparameters. Every field has a default, so partial JSON
/// configs deserialize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub rng_seed: u64,
    pub max_tokens_per_post: usize,
    pub max_posts_per_user: usize,
    pub class_weighting: ClassWeighting,
    /// Classify `normalized_text` when a post has one.
    pub use_normalized_text: bool,
    /// Width of learned embeddings when no pre-trained table is supplied.
    pub embedding_dim: usize,
    pub lstm_hidden: usize,
    pub kim_widths: Vec<usize>,
    pub kim_maps: usize,
    pub user_cnn_widths: Vec<usize>,
    pub user_cnn_maps: usize,
    pub dropout: f64,
    /// Global gradient-norm clip applied before each optimizer step.
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            learning_rate: 1e-3,
            batch_size: 16,
            rng_seed: 0,
            max_tokens_per_post: 256,
            max_posts_per_user: 32,
            class_weighting: ClassWeighting::InverseFrequency,
            use_normalized_text: true,
            embedding_dim: 50,
            lstm_hidden: 64,
            kim_widths: vec![3, 4, 5],
            kim_maps: 100,
            user_cnn_widths: vec![2, 3],
            user_cnn_maps: 32,
            dropout: 0.5,
            grad_clip: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("max_tokens_per_post", self.max_tokens_per_post),
            ("max_posts_per_user", self.max_posts_per_user),
            ("embedding_dim", self.embedding_dim),
            ("lstm_hidden", self.lstm_hidden),
            ("kim_maps", self.kim_maps),
            ("user_cnn_maps", self.user_cnn_maps),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(ModelError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::InvalidConfig("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::InvalidConfig("dropout must be in [0, 1)".into()));
        }
        if !(self.grad_clip > 0.0) {
            return Err(ModelError::InvalidConfig("grad_clip must be positive".into()));
        }
        for (name, widths) in [
            ("kim_widths", &self.kim_widths),
            ("user_cnn_widths", &self.user_cnn_widths),
        ] {
            if widths.is_empty() || widths.contains(&0) {
                return Err(ModelError::InvalidConfig(format!(
                    "{name} must be non-empty and positive"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostPrediction {
    pub post_id: String,
    pub timestamp: i64,
    pub probabilities: BTreeMap<PostLabel, f64>,
    pub predicted: PostLabel,
}

impl PostPrediction {
    pub(crate) fn from_probs(post_id: &str, timestamp: i64, probs: &[f64]) -> Self {
        let probabilities: BTreeMap<PostLabel, f64> = PostLabel::ALL.iter().zip(probs).map(|(&l, &p)| (l, p)).collect();
        let predicted = argmax_by_priority(&PostLabel::TIE_BREAK_ORDER, |l| probabilities[l]);
        PostPrediction {
            post_id: post_id.to_string(),
            timestamp,
            probabilities,
            predicted,
        }
    }

    /// `[Pr(S) Pr(I) Pr(B) Pr(A)]`, without renormalization.
    pub fn risk_vector(&self) -> [f64; 4] {
        let p = |l| self.probabilities[&l];
        [
            p(PostLabel::Supportive),
            p(PostLabel::Ideation),
            p(PostLabel::Behavior),
            p(PostLabel::Attempt),
        ]
    }
}

/// Audit trail attached to a user prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionAudit {
    /// Number of posts that reached the model after truncation.
    pub posts_used: usize,
    /// TvarM: per-post predictions in the order the user CNN saw them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub posts: Vec<PostPrediction>,
    /// TinvM: tokens in the concatenated input after truncation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effective_tokens: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserPrediction {
    pub user_id: String,
    pub probabilities: BTreeMap<SeverityLabel, f64>,
    pub predicted: SeverityLabel,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit: Option<PredictionAudit>,
}

impl UserPrediction {
    pub(crate) fn from_probs(user_id: &str, probs: &[f64], method: Method, audit: PredictionAudit) -> Self {
        let probabilities: BTreeMap<SeverityLabel, f64> =
            SeverityLabel::ALL.iter().zip(probs).map(|(&l, &p)| (l, p)).collect();
        let mut order = SeverityLabel::ALL;
        order.reverse();
        let predicted = argmax_by_priority(&order, |l| probabilities[l]);
        UserPrediction {
            user_id: user_id.to_string(),
            probabilities,
            predicted,
            method,
            audit: Some(audit),
        }
    }

    pub fn score(&self, label: SeverityLabel) -> f64 {
        self.probabilities.get(&label).copied().unwrap_or(0.0)
    }
}

/// First element of `priority` with the strictly largest score.
fn argmax_by_priority<L: Copy>(priority: &[L], score: impl Fn(&L) -> f64) -> L {
    let mut best = priority[0];
    let mut best_score = score(&best);
    for l in &priority[1..] {
        let s = score(l);
        if s > best_score {
            best = *l;
            best_score = s;
        }
    }
    best
}

/// Trains one methodology end to end on `users`.
pub fn train_method(
    method: Method,
    users: &[UserRecord],
    embeddings: Option<&EmbeddingTable>,
    config: &TrainConfig,
) -> Result<TrainedModel, ModelError> {
    match method {
        Method::Tinvm => Ok(TrainedModel::Tinvm {
            model: train_tinvm(users, embeddings, config)?,
        }),
        Method::Tvarm => {
            let labeled: Vec<(&crate::corpus::PostRecord, PostLabel)> = users
                .iter()
                .flat_map(|u| u.posts.iter().map(|p| (p, p.label)))
                .collect();
            let post = train_post_classifier(&labeled, embeddings, config)?;
            let user = train_tvarm(users, &post, config)?;
            Ok(TrainedModel::Tvarm { post, user })
        }
    }
}
