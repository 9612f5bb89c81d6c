use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{predict_user_tinvm, predict_user_tvarm, Method, ModelError, TextEncoder, TrainConfig, UserPrediction};
use crate::corpus::UserRecord;
use crate::nn::{ParameterSet, Tensor};

pub const BUNDLE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BundleKind {
    PostClassifier,
    TvarmUser,
    Tinvm,
}

impl fmt::Display for BundleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BundleKind::PostClassifier => "post_classifier",
            BundleKind::TvarmUser => "tvarm_user",
            BundleKind::Tinvm => "tinvm",
        })
    }
}

/// A trained network: configuration, vocabulary and weights.
///
/// Serializes to JSON with shortest round-trip floats, so save/load is
/// lossless and identical training runs produce identical bytes.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(try_from = "BundleRepr")]
pub struct ModelBundle {
    pub kind: BundleKind,
    pub config: TrainConfig,
    pub encoder: Option<TextEncoder>,
    pub params: ParameterSet,
    pub training_log: Vec<f64>,
}

#[derive(Serialize)]
struct BundleRef<'a> {
    format_version: u32,
    kind: BundleKind,
    config: &'a TrainConfig,
    encoder: &'a Option<TextEncoder>,
    param_seed: u64,
    params: &'a BTreeMap<String, Tensor>,
    training_log: &'a [f64],
}

#[derive(Deserialize)]
struct BundleRepr {
    format_version: u32,
    kind: BundleKind,
    config: TrainConfig,
    encoder: Option<TextEncoder>,
    param_seed: u64,
    params: BTreeMap<String, Tensor>,
    training_log: Vec<f64>,
}

impl TryFrom<BundleRepr> for ModelBundle {
    type Error = String;

    fn try_from(r: BundleRepr) -> Result<Self, Self::Error> {
        if r.format_version != BUNDLE_FORMAT_VERSION {
            return Err(format!(
                "unsupported bundle format version {} (expected {BUNDLE_FORMAT_VERSION})",
                r.format_version
            ));
        }
        let bundle = ModelBundle {
            kind: r.kind,
            config: r.config,
            encoder: r.encoder,
            params: ParameterSet::from_values(r.param_seed, r.params),
            training_log: r.training_log,
        };
        if let Some(enc) = &bundle.encoder {
            enc.check_params(&bundle.params).map_err(|e| e.to_string())?;
        }
        Ok(bundle)
    }
}

impl Serialize for ModelBundle {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        BundleRef {
            format_version: BUNDLE_FORMAT_VERSION,
            kind: self.kind,
            config: &self.config,
            encoder: &self.encoder,
            param_seed: self.params.rng_seed(),
            params: self.params.values(),
            training_log: &self.training_log,
        }
        .serialize(serializer)
    }
}

impl ModelBundle {
    pub(crate) fn expect_kind(&self, expected: BundleKind) -> Result<(), ModelError> {
        if self.kind == expected {
            Ok(())
        } else {
            Err(ModelError::WrongBundle {
                expected,
                found: self.kind,
            })
        }
    }

    pub(crate) fn encoder(&self) -> Result<&TextEncoder, ModelError> {
        self.encoder
            .as_ref()
            .ok_or_else(|| ModelError::Format(format!("{} bundle has no text encoder", self.kind)))
    }

    pub fn to_json_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("bundle serialization cannot fail")
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Self, ModelError> {
        serde_json::from_slice(bytes).map_err(|e| ModelError::Format(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        write_bytes(path, &self.to_json_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::from_json_slice(&read_bytes(path)?)
    }
}

/// A complete user-level model for one methodology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum TrainedModel {
    Tinvm { model: ModelBundle },
    Tvarm { post: ModelBundle, user: ModelBundle },
}

impl TrainedModel {
    pub fn method(&self) -> Method {
        match self {
            TrainedModel::Tinvm { .. } => Method::Tinvm,
            TrainedModel::Tvarm { .. } => Method::Tvarm,
        }
    }

    pub fn predict(&self, user: &UserRecord) -> Result<UserPrediction, ModelError> {
        match self {
            TrainedModel::Tinvm { model } => predict_user_tinvm(model, user),
            TrainedModel::Tvarm { post, user: user_model } => predict_user_tvarm(post, user_model, user),
        }
    }

    pub fn to_json_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("model serialization cannot fail")
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Self, ModelError> {
        let model: TrainedModel = serde_json::from_slice(bytes).map_err(|e| ModelError::Format(e.to_string()))?;
        match &model {
            TrainedModel::Tinvm { model } => model.expect_kind(BundleKind::Tinvm)?,
            TrainedModel::Tvarm { post, user } => {
                post.expect_kind(BundleKind::PostClassifier)?;
                user.expect_kind(BundleKind::TvarmUser)?;
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        write_bytes(path, &self.to_json_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::from_json_slice(&read_bytes(path)?)
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), ModelError> {
    std::fs::write(path, bytes).map_err(|e| ModelError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, ModelError> {
    std::fs::read(path).map_err(|e| ModelError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{train_method, TrainConfig};
    use crate::synthetic;

    fn config() -> TrainConfig {
        TrainConfig {
            epochs: 3,
            learning_rate: 0.01,
            embedding_dim: 6,
            lstm_hidden: 6,
            kim_maps: 4,
            user_cnn_maps: 4,
            max_posts_per_user: 6,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn identical_seed_gives_identical_bytes() {
        let users = synthetic::keyword_corpus(&synthetic::CorpusSpec::small(), 8);
        for method in Method::ALL {
            let a = train_method(method, &users, None, &config()).unwrap();
            let b = train_method(method, &users, None, &config()).unwrap();
            assert_eq!(a.to_json_bytes(), b.to_json_bytes(), "{method}");
            let c = train_method(
                method,
                &users,
                None,
                &TrainConfig {
                    rng_seed: 1,
                    ..config()
                },
            )
            .unwrap();
            assert_ne!(a.to_json_bytes(), c.to_json_bytes(), "{method}");
        }
    }

    #[test]
    fn reload_reproduces_predictions_bitwise() {
        let users = synthetic::keyword_corpus(&synthetic::CorpusSpec::small(), 8);
        let table = synthetic::random_embeddings(5, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for method in Method::ALL {
            let model = train_method(method, &users, Some(&table), &config()).unwrap();
            let path = dir.path().join(format!("{method}.json"));
            model.save(&path).unwrap();
            let back = TrainedModel::load(&path).unwrap();
            assert_eq!(back, model);
            for u in &users {
                assert_eq!(back.predict(u).unwrap(), model.predict(u).unwrap());
                assert_eq!(model.predict(u).unwrap(), model.predict(u).unwrap());
            }
        }
    }

    #[test]
    fn wrong_kind_and_version_are_rejected() {
        let users = synthetic::keyword_corpus(&synthetic::CorpusSpec::small(), 8);
        let TrainedModel::Tvarm { post, user } = train_method(Method::Tvarm, &users, None, &config()).unwrap() else {
            unreachable!()
        };
        let swapped = TrainedModel::Tvarm {
            post: user.clone(),
            user: post.clone(),
        };
        assert!(matches!(
            TrainedModel::from_json_slice(&swapped.to_json_bytes()),
            Err(ModelError::WrongBundle { .. })
        ));
        assert!(matches!(
            crate::models::predict_post(&user, &users[0].posts[0]),
            Err(ModelError::WrongBundle { .. })
        ));
        let text = String::from_utf8(post.to_json_bytes()).unwrap().replacen(
            &format!("\"format_version\":{BUNDLE_FORMAT_VERSION}"),
            "\"format_version\":99",
            1,
        );
        assert!(matches!(
            ModelBundle::from_json_slice(text.as_bytes()),
            Err(ModelError::Format(_))
        ));
    }

    #[test]
    fn probabilities_are_distributions() {
        let users = synthetic::keyword_corpus(&synthetic::CorpusSpec::small(), 8);
        for method in Method::ALL {
            let model = train_method(method, &users, None, &config()).unwrap();
            for u in &users {
                let p = model.predict(u).unwrap();
                let total: f64 = p.probabilities.values().sum();
                assert!((total - 1.0).abs() < 1e-9);
                assert!(p.probabilities.values().all(|&v| v >= 0.0));
                for post in &p.audit.as_ref().unwrap().posts {
                    let t: f64 = post.probabilities.values().sum();
                    assert!((t - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
