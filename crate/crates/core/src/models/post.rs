use rand_chacha::ChaCha8Rng;

use super::bundle::{BundleKind, ModelBundle};
use super::encoder::{EmbeddingSource, TextEncoder, TABLE_PARAM};
use super::trainer::{fit, infer};
use super::{ModelError, PostPrediction, TrainConfig};
use crate::corpus::{PostLabel, PostRecord};
use crate::lexicon::{words, EmbeddingTable};
use crate::nn::{Graph, NnError, NodeId, ParameterSet, RowRef};
use crate::seed;

const LSTM_INIT_BOUND: f64 = 0.08;
const FORGET_BIAS: f64 = 1.0;

pub(crate) fn post_tokens(post: &PostRecord, config: &TrainConfig) -> Vec<String> {
    let mut w = words(post.model_text(config.use_normalized_text));
    w.truncate(config.max_tokens_per_post);
    w
}

pub(crate) fn embedding_source<'a>(
    embeddings: Option<&'a EmbeddingTable>,
    config: &TrainConfig,
) -> EmbeddingSource<'a> {
    match embeddings {
        Some(t) => EmbeddingSource::Pretrained(t),
        None => EmbeddingSource::Learned {
            dim: config.embedding_dim,
        },
    }
}

fn forward(
    g: &mut Graph<'_>,
    encoder: &TextEncoder,
    config: &TrainConfig,
    rows: &[RowRef],
    rng: Option<&mut ChaCha8Rng>,
) -> Result<NodeId, NnError> {
    let table = g.param(TABLE_PARAM)?;
    let rows = if rows.is_empty() {
        vec![TextEncoder::oov()]
    } else {
        rows.to_vec()
    };
    let x = g.lookup(table, encoder.frozen(), rows)?;
    let (wx, wh, b) = (g.param("lstm.w_x")?, g.param("lstm.w_h")?, g.param("lstm.bias")?);
    let h = g.lstm(x, wx, wh, b, config.lstm_hidden)?;
    let h = g.dropout(h, config.dropout, rng);
    let (w, b) = (g.param("post.out.w")?, g.param("post.out.b")?);
    let logits = g.dense(h, w, b)?;
    Ok(g.softmax(logits))
}

/// Fits the per-post LSTM on `(post, label)` pairs.
pub fn train_post_classifier(
    posts: &[(&PostRecord, PostLabel)],
    embeddings: Option<&EmbeddingTable>,
    config: &TrainConfig,
) -> Result<ModelBundle, ModelError> {
    config.validate()?;
    let tokens: Vec<Vec<String>> = posts.iter().map(|(p, _)| post_tokens(p, config)).collect();
    let mut params = ParameterSet::new(seed::derive(config.rng_seed, "post-classifier"));
    let encoder = TextEncoder::build(
        tokens.iter().map(Vec::as_slice),
        embedding_source(embeddings, config),
        &mut params,
    );
    let (d, h) = (encoder.dim(), config.lstm_hidden);
    params.init_uniform("lstm.w_x", &[4 * h, d], LSTM_INIT_BOUND);
    params.init_uniform("lstm.w_h", &[4 * h, h], LSTM_INIT_BOUND);
    let mut bias = vec![0.0; 4 * h];
    bias[h..2 * h].fill(FORGET_BIAS);
    params.insert("lstm.bias", crate::nn::Tensor::vector(bias));
    let k = PostLabel::ALL.len();
    params.init_glorot("post.out.w", &[k, h], h, k);
    params.init_constant("post.out.b", &[k], 0.0);

    let inputs: Vec<Vec<RowRef>> = tokens.iter().map(|t| encoder.encode(t)).collect();
    let targets: Vec<usize> = posts.iter().map(|(_, l)| l.index()).collect();
    let log = fit(&mut params, &inputs, &targets, k, config, |g, rows, rng| {
        forward(g, &encoder, config, rows, rng)
    })?;
    Ok(ModelBundle {
        kind: BundleKind::PostClassifier,
        config: config.clone(),
        encoder: Some(encoder),
        params,
        training_log: log,
    })
}

/// Five-way probability vector for one post.
pub fn predict_post(bundle: &ModelBundle, post: &PostRecord) -> Result<PostPrediction, ModelError> {
    bundle.expect_kind(BundleKind::PostClassifier)?;
    let encoder = bundle.encoder()?;
    let rows = encoder.encode(&post_tokens(post, &bundle.config));
    let probs = infer(&bundle.params, &rows, |g, rows, rng| {
        forward(g, encoder, &bundle.config, rows, rng)
    })?;
    Ok(PostPrediction::from_probs(&post.post_id, post.timestamp, &probs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    fn small_config() -> TrainConfig {
        TrainConfig {
            epochs: 30,
            learning_rate: 0.02,
            batch_size: 8,
            embedding_dim: 8,
            lstm_hidden: 8,
            dropout: 0.0,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn learns_keyword_separable_posts() {
        let users = synthetic::keyword_corpus(&synthetic::CorpusSpec::small(), 11);
        let labeled: Vec<(&PostRecord, PostLabel)> = users
            .iter()
            .flat_map(|u| u.posts.iter().map(|p| (p, p.label)))
            .collect();
        let bundle = train_post_classifier(&labeled, None, &small_config()).unwrap();
        let correct = labeled
            .iter()
            .filter(|(p, l)| predict_post(&bundle, p).unwrap().predicted == *l)
            .count();
        let acc = correct as f64 / labeled.len() as f64;
        assert!(acc >= 0.95, "post accuracy {acc}");
    }

    #[test]
    fn post_without_known_tokens_still_gets_a_distribution() {
        let users = synthetic::keyword_corpus(&synthetic::CorpusSpec::small(), 3);
        let labeled: Vec<(&PostRecord, PostLabel)> = users
            .iter()
            .flat_map(|u| u.posts.iter().map(|p| (p, p.label)))
            .collect();
        let config = TrainConfig {
            epochs: 1,
            ..small_config()
        };
        let bundle = train_post_classifier(&labeled, None, &config).unwrap();
        let mut post = labeled[0].0.clone();
        post.text = "qwertyuiop asdfgh".into();
        post.normalized_text = None;
        let pred = predict_post(&bundle, &post).unwrap();
        let total: f64 = pred.probabilities.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
        post.text = "".into();
        assert!(predict_post(&bundle, &post).is_ok());
    }

    #[test]
    fn single_label_training_set_is_degenerate() {
        let users = synthetic::keyword_corpus(&synthetic::CorpusSpec::small(), 3);
        let labeled: Vec<(&PostRecord, PostLabel)> = users[0].posts.iter().map(|p| (p, PostLabel::Ideation)).collect();
        let err = train_post_classifier(&labeled, None, &small_config()).unwrap_err();
        assert!(matches!(err, ModelError::DegenerateLabels));
    }
}
