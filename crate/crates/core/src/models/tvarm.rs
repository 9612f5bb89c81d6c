use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::bundle::{BundleKind, ModelBundle};
use super::post::predict_post;
use super::trainer::{fit, infer};
use super::{Method, ModelError, PostPrediction, PredictionAudit, TrainConfig, UserPrediction};
use crate::corpus::{SeverityLabel, UserRecord};
use crate::nn::{Graph, NnError, NodeId, ParameterSet, Tensor};
use crate::seed;

const RISK_CHANNELS: usize = 4;

/// The user CNN's input: one `[Pr(S) Pr(I) Pr(B) Pr(A)]` row per post in
/// time order, zero-padded after the last post.
#[derive(Debug, Clone, PartialEq)]
pub struct TvarmInput {
    pub matrix: Tensor,
    pub valid_len: usize,
    pub posts: Vec<PostPrediction>,
}

/// Scores the user's most recent `max_posts_per_user` posts with the frozen
/// post classifier.
pub fn tvarm_input(
    post_bundle: &ModelBundle,
    user: &UserRecord,
    config: &TrainConfig,
) -> Result<TvarmInput, ModelError> {
    if user.posts.is_empty() {
        return Err(ModelError::EmptyUser(user.user_id.clone()));
    }
    let start = user.posts.len().saturating_sub(config.max_posts_per_user);
    let posts = user.posts[start..]
        .iter()
        .map(|p| predict_post(post_bundle, p))
        .collect::<Result<Vec<_>, _>>()?;
    let widest = config.user_cnn_widths.iter().copied().max().unwrap_or(1);
    let rows = config.max_posts_per_user.max(widest);
    let mut matrix = Tensor::zeros(&[rows, RISK_CHANNELS]);
    for (i, p) in posts.iter().enumerate() {
        matrix.row_mut(i).copy_from_slice(&p.risk_vector());
    }
    Ok(TvarmInput {
        matrix,
        valid_len: posts.len(),
        posts,
    })
}

fn forward(
    g: &mut Graph<'_>,
    config: &TrainConfig,
    input: &TvarmInput,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<NodeId, NnError> {
    let x = g.input(input.matrix.clone());
    let mut pooled = Vec::with_capacity(config.user_cnn_widths.len());
    for w in &config.user_cnn_widths {
        let f = g.param(&format!("user.conv{w}.filters"))?;
        let b = g.param(&format!("user.conv{w}.bias"))?;
        pooled.push(g.conv_maxpool(x, f, b, input.valid_len)?);
    }
    let features = g.concat(pooled);
    let features = g.dropout(features, config.dropout, rng);
    let (w, b) = (g.param("user.out.w")?, g.param("user.out.b")?);
    let logits = g.dense(features, w, b)?;
    Ok(g.softmax(logits))
}

/// Second TvarM stage: fits the user CNN on post-probability sequences.
/// `post_bundle` is only read.
pub fn train_tvarm(
    users: &[UserRecord],
    post_bundle: &ModelBundle,
    config: &TrainConfig,
) -> Result<ModelBundle, ModelError> {
    config.validate()?;
    post_bundle.expect_kind(BundleKind::PostClassifier)?;
    if users.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let inputs = users
        .par_iter()
        .map(|u| tvarm_input(post_bundle, u, config))
        .collect::<Result<Vec<_>, _>>()?;
    let targets: Vec<usize> = users.iter().map(|u| u.user_label.index()).collect();

    let mut params = ParameterSet::new(seed::derive(config.rng_seed, "tvarm-user"));
    let maps = config.user_cnn_maps;
    for w in &config.user_cnn_widths {
        params.init_glorot(
            &format!("user.conv{w}.filters"),
            &[maps, *w, RISK_CHANNELS],
            w * RISK_CHANNELS,
            maps,
        );
        params.init_constant(&format!("user.conv{w}.bias"), &[maps], 0.0);
    }
    let k = SeverityLabel::ALL.len();
    let features = maps * config.user_cnn_widths.len();
    params.init_glorot("user.out.w", &[k, features], features, k);
    params.init_constant("user.out.b", &[k], 0.0);

    let log = fit(&mut params, &inputs, &targets, k, config, |g, x, rng| {
        forward(g, config, x, rng)
    })?;
    Ok(ModelBundle {
        kind: BundleKind::TvarmUser,
        config: config.clone(),
        encoder: None,
        params,
        training_log: log,
    })
}

pub fn predict_user_tvarm(
    post_bundle: &ModelBundle,
    user_bundle: &ModelBundle,
    user: &UserRecord,
) -> Result<UserPrediction, ModelError> {
    user_bundle.expect_kind(BundleKind::TvarmUser)?;
    let config = &user_bundle.config;
    let input = tvarm_input(post_bundle, user, config)?;
    let probs = infer(&user_bundle.params, &input, |g, x, rng| forward(g, config, x, rng))?;
    let audit = PredictionAudit {
        posts_used: input.valid_len,
        posts: input.posts,
        effective_tokens: None,
    };
    Ok(UserPrediction::from_probs(&user.user_id, &probs, Method::Tvarm, audit))
}

/// User-CNN probabilities for an explicit input matrix.
pub fn user_cnn_probs(user_bundle: &ModelBundle, input: &TvarmInput) -> Result<Vec<f64>, ModelError> {
    user_bundle.expect_kind(BundleKind::TvarmUser)?;
    let config = &user_bundle.config;
    infer(&user_bundle.params, input, |g, x, rng| forward(g, config, x, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{PostLabel, PostRecord};
    use crate::models::train_post_classifier;
    use crate::synthetic;

    fn config() -> TrainConfig {
        TrainConfig {
            epochs: 30,
            learning_rate: 0.02,
            batch_size: 8,
            embedding_dim: 8,
            lstm_hidden: 8,
            user_cnn_maps: 8,
            max_posts_per_user: 8,
            dropout: 0.0,
            ..TrainConfig::default()
        }
    }

    fn labeled(users: &[UserRecord]) -> Vec<(&PostRecord, PostLabel)> {
        users
            .iter()
            .flat_map(|u| u.posts.iter().map(|p| (p, p.label)))
            .collect()
    }

    #[test]
    fn input_keeps_most_recent_posts_and_pads() {
        let users = synthetic::keyword_corpus(&synthetic::CorpusSpec::small(), 5);
        let cfg = TrainConfig { epochs: 1, ..config() };
        let post = train_post_classifier(&labeled(&users), None, &cfg).unwrap();
        let u = users.iter().max_by_key(|u| u.posts.len()).unwrap();
        let tight = TrainConfig {
            max_posts_per_user: 2,
            ..cfg.clone()
        };
        let input = tvarm_input(&post, u, &tight).unwrap();
        assert_eq!(input.valid_len, 2.min(u.posts.len()));
        // Widest filter is 3, so the matrix has at least 3 rows.
        assert_eq!(input.matrix.rows(), 3);
        assert_eq!(input.posts.last().unwrap().post_id, u.posts.last().unwrap().post_id);
        assert!(input.matrix.row(2).iter().all(|&v| v == 0.0));
        for (i, p) in input.posts.iter().enumerate() {
            assert_eq!(input.matrix.row(i), &p.risk_vector());
        }
    }

    #[test]
    fn second_stage_leaves_post_classifier_untouched() {
        let users = synthetic::keyword_corpus(&synthetic::CorpusSpec::small(), 5);
        let cfg = TrainConfig { epochs: 3, ..config() };
        let post = train_post_classifier(&labeled(&users), None, &cfg).unwrap();
        let before = post.to_json_bytes();
        let user = train_tvarm(&users, &post, &cfg).unwrap();
        assert_eq!(post.to_json_bytes(), before);
        assert!(user.params.names().all(|n| n.starts_with("user.")));
    }

    #[test]
    fn user_cnn_is_order_sensitive() {
        let users = synthetic::keyword_corpus(&synthetic::CorpusSpec::small(), 5);
        let cfg = TrainConfig { epochs: 2, ..config() };
        let post = train_post_classifier(&labeled(&users), None, &cfg).unwrap();
        let user_model = train_tvarm(&users, &post, &cfg).unwrap();
        let rows = [
            [0.9, 0.05, 0.03, 0.02],
            [0.1, 0.7, 0.1, 0.1],
            [0.0, 0.1, 0.2, 0.7],
            [0.2, 0.2, 0.5, 0.1],
        ];
        let build = |order: &[usize]| {
            let mut m = Tensor::zeros(&[cfg.max_posts_per_user, 4]);
            for (i, &r) in order.iter().enumerate() {
                m.row_mut(i).copy_from_slice(&rows[r]);
            }
            TvarmInput {
                matrix: m,
                valid_len: order.len(),
                posts: vec![],
            }
        };
        let a = user_cnn_probs(&user_model, &build(&[0, 1, 2, 3])).unwrap();
        let permutations: [[usize; 4]; 3] = [[3, 2, 1, 0], [1, 0, 3, 2], [2, 0, 3, 1]];
        let changed = permutations
            .iter()
            .any(|p| user_cnn_probs(&user_model, &build(p)).unwrap() != a);
        assert!(changed);
    }

    #[test]
    fn end_to_end_fits_keyword_users() {
        let users = synthetic::keyword_corpus(&synthetic::CorpusSpec::default(), 21);
        let cfg = config();
        let post = train_post_classifier(&labeled(&users), None, &cfg).unwrap();
        let user_model = train_tvarm(&users, &post, &TrainConfig { epochs: 60, ..cfg }).unwrap();
        let correct = users
            .iter()
            .filter(|u| predict_user_tvarm(&post, &user_model, u).unwrap().predicted == u.user_label)
            .count();
        let acc = correct as f64 / users.len() as f64;
        assert!(acc >= 0.95, "user accuracy {acc}");
    }

    #[test]
    fn single_post_user_and_timestamp_permutation() {
        let users = synthetic::keyword_corpus(&synthetic::CorpusSpec::small(), 5);
        let cfg = TrainConfig { epochs: 2, ..config() };
        let post = train_post_classifier(&labeled(&users), None, &cfg).unwrap();
        let user_model = train_tvarm(&users, &post, &cfg).unwrap();

        let mut single = users[0].clone();
        single.posts.truncate(1);
        let pred = predict_user_tvarm(&post, &user_model, &single).unwrap();
        assert_eq!(pred.audit.unwrap().posts_used, 1);

        let u = users.iter().find(|u| u.posts.len() >= 3).unwrap();
        let mut permuted_posts = u.posts.clone();
        let n = permuted_posts.len() as i64;
        for (i, p) in permuted_posts.iter_mut().enumerate() {
            p.timestamp = 10 * (n - i as i64);
        }
        let permuted = UserRecord::new(u.user_id.clone(), u.username.clone(), permuted_posts, u.user_label);
        let trace: Vec<String> = predict_user_tvarm(&post, &user_model, &permuted)
            .unwrap()
            .audit
            .unwrap()
            .posts
            .into_iter()
            .map(|p| p.post_id)
            .collect();
        let mut expected: Vec<String> = u.posts.iter().map(|p| p.post_id.clone()).collect();
        expected.reverse();
        assert_eq!(trace, expected);
    }
    /// Post-level trace (Ideation, Behavior, Behavior, Uninformative) resolved
    /// to a user-level Ideation by a hand-set user CNN that keys on the
    /// strongest ideation signal.
    #[test]
    fn behavior_majority_can_still_yield_ideation() {
        let users = synthetic::keyword_corpus(&synthetic::CorpusSpec::default(), 4);
        let post = train_post_classifier(&labeled(&users), None, &config()).unwrap();
        let texts = [
            (PostLabel::Ideation, "i wish i could disappear it all feels pointless"),
            (PostLabel::Behavior, "counted the pills next to the razor"),
            (PostLabel::Behavior, "the bridge and the rope again"),
            (PostLabel::Uninformative, "going home from work tonight"),
        ];
        let posts: Vec<PostRecord> = texts
            .iter()
            .enumerate()
            .map(|(i, (label, text))| PostRecord {
                post_id: format!("t4-{i}"),
                user_id: "t4".into(),
                timestamp: i as i64,
                subreddit: "SuicideWatch".into(),
                text: text.to_string(),
                normalized_text: None,
                label: *label,
            })
            .collect();
        let user = UserRecord::new("t4", None, posts, SeverityLabel::Ideation);

        let cfg = TrainConfig {
            user_cnn_widths: vec![1],
            user_cnn_maps: 1,
            ..config()
        };
        let mut params = ParameterSet::new(0);
        // One width-1 filter reading the Pr(I) channel; only the Ideation logit
        // depends on it.
        params.insert(
            "user.conv1.filters",
            Tensor::new(vec![1, 1, 4], vec![0.0, 1.0, 0.0, 0.0]).unwrap(),
        );
        params.insert("user.conv1.bias", Tensor::zeros(&[1]));
        params.insert(
            "user.out.w",
            Tensor::new(vec![4, 1], vec![0.0, 10.0, 0.0, 0.0]).unwrap(),
        );
        params.insert("user.out.b", Tensor::zeros(&[4]));
        let user_model = ModelBundle {
            kind: BundleKind::TvarmUser,
            config: cfg,
            encoder: None,
            params,
            training_log: vec![],
        };

        let pred = predict_user_tvarm(&post, &user_model, &user).unwrap();
        let audit = pred.audit.as_ref().unwrap();
        let trace: Vec<PostLabel> = audit.posts.iter().map(|p| p.predicted).collect();
        assert_eq!(trace, texts.map(|(l, _)| l));
        assert_eq!(audit.posts_used, 4);
        assert_eq!(pred.predicted, SeverityLabel::Ideation);
    }
}
