use rand_chacha::ChaCha8Rng;

use super::bundle::{BundleKind, ModelBundle};
use super::encoder::{TextEncoder, TABLE_PARAM};
use super::post::{embedding_source, post_tokens};
use super::trainer::{fit, infer};
use super::{Method, ModelError, PredictionAudit, TrainConfig, UserPrediction};
use crate::corpus::{SeverityLabel, UserRecord};
use crate::lexicon::EmbeddingTable;
use crate::nn::{Graph, NnError, NodeId, ParameterSet, RowRef};
use crate::seed;

/// Per-post token lists for the user's most recent `max_posts_per_user`
/// posts, each truncated to `max_tokens_per_post`.
pub fn tinvm_tokens(user: &UserRecord, config: &TrainConfig) -> Vec<Vec<String>> {
    let start = user.posts.len().saturating_sub(config.max_posts_per_user);
    user.posts[start..].iter().map(|p| post_tokens(p, config)).collect()
}

struct EncodedUser {
    rows: Vec<RowRef>,
    valid_len: usize,
    tokens: usize,
    posts: usize,
}

/// Posts joined by the separator row, zero-padded up to the widest filter.
fn encode_user(encoder: &TextEncoder, segments: &[Vec<String>], config: &TrainConfig) -> EncodedUser {
    let mut rows = Vec::new();
    let mut tokens = 0;
    for (i, seg) in segments.iter().enumerate() {
        if i > 0 {
            rows.push(TextEncoder::separator());
        }
        tokens += seg.len();
        rows.extend(encoder.encode(seg));
    }
    if rows.is_empty() {
        rows.push(TextEncoder::oov());
    }
    let valid_len = rows.len();
    let widest = config.kim_widths.iter().copied().max().unwrap_or(1);
    rows.resize(valid_len.max(widest), RowRef::Zero);
    EncodedUser {
        rows,
        valid_len,
        tokens,
        posts: segments.len(),
    }
}

fn forward(
    g: &mut Graph<'_>,
    encoder: &TextEncoder,
    config: &TrainConfig,
    user: &EncodedUser,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<NodeId, NnError> {
    let table = g.param(TABLE_PARAM)?;
    let x = g.lookup(table, encoder.frozen(), user.rows.clone())?;
    let mut pooled = Vec::with_capacity(config.kim_widths.len());
    for w in &config.kim_widths {
        let f = g.param(&format!("kim.conv{w}.filters"))?;
        let b = g.param(&format!("kim.conv{w}.bias"))?;
        pooled.push(g.conv_maxpool(x, f, b, user.valid_len)?);
    }
    let features = g.concat(pooled);
    let features = g.dropout(features, config.dropout, rng);
    let (w, b) = (g.param("kim.out.w")?, g.param("kim.out.b")?);
    let logits = g.dense(features, w, b)?;
    Ok(g.softmax(logits))
}

/// Fits the Kim CNN on the concatenated posts of each user.
pub fn train_tinvm(
    users: &[UserRecord],
    embeddings: Option<&EmbeddingTable>,
    config: &TrainConfig,
) -> Result<ModelBundle, ModelError> {
    config.validate()?;
    if users.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    if let Some(u) = users.iter().find(|u| u.posts.is_empty()) {
        return Err(ModelError::EmptyUser(u.user_id.clone()));
    }
    let segments: Vec<Vec<Vec<String>>> = users.iter().map(|u| tinvm_tokens(u, config)).collect();
    let mut params = ParameterSet::new(seed::derive(config.rng_seed, "tinvm"));
    let encoder = TextEncoder::build(
        segments.iter().flatten().map(Vec::as_slice),
        embedding_source(embeddings, config),
        &mut params,
    );
    let (d, maps) = (encoder.dim(), config.kim_maps);
    for w in &config.kim_widths {
        params.init_glorot(&format!("kim.conv{w}.filters"), &[maps, *w, d], w * d, maps);
        params.init_constant(&format!("kim.conv{w}.bias"), &[maps], 0.0);
    }
    let k = SeverityLabel::ALL.len();
    let features = maps * config.kim_widths.len();
    params.init_glorot("kim.out.w", &[k, features], features, k);
    params.init_constant("kim.out.b", &[k], 0.0);

    let inputs: Vec<EncodedUser> = segments.iter().map(|s| encode_user(&encoder, s, config)).collect();
    let targets: Vec<usize> = users.iter().map(|u| u.user_label.index()).collect();
    let log = fit(&mut params, &inputs, &targets, k, config, |g, x, rng| {
        forward(g, &encoder, config, x, rng)
    })?;
    Ok(ModelBundle {
        kind: BundleKind::Tinvm,
        config: config.clone(),
        encoder: Some(encoder),
        params,
        training_log: log,
    })
}

pub fn predict_user_tinvm(bundle: &ModelBundle, user: &UserRecord) -> Result<UserPrediction, ModelError> {
    bundle.expect_kind(BundleKind::Tinvm)?;
    if user.posts.is_empty() {
        return Err(ModelError::EmptyUser(user.user_id.clone()));
    }
    let encoder = bundle.encoder()?;
    let config = &bundle.config;
    let encoded = encode_user(encoder, &tinvm_tokens(user, config), config);
    let probs = infer(&bundle.params, &encoded, |g, x, rng| {
        forward(g, encoder, config, x, rng)
    })?;
    let audit = PredictionAudit {
        posts_used: encoded.posts,
        posts: Vec::new(),
        effective_tokens: Some(encoded.tokens),
    };
    Ok(UserPrediction::from_probs(&user.user_id, &probs, Method::Tinvm, audit))
}
