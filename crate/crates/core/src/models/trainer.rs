use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::{ClassWeighting, ModelError, TrainConfig};
use crate::nn::{adam_step, AdamConfig, AdamState, Graph, NnError, NodeId, ParameterSet};
use crate::seed;

/// `w_c = N / (K · n_c)` over the `K` classes present; absent classes get 0.
pub(crate) fn class_weights(targets: &[usize], n_classes: usize, scheme: ClassWeighting) -> Vec<f64> {
    if scheme == ClassWeighting::None {
        return vec![1.0; n_classes];
    }
    let mut counts = vec![0usize; n_classes];
    for &t in targets {
        counts[t] += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count() as f64;
    let n = targets.len() as f64;
    counts
        .iter()
        .map(|&c| if c == 0 { 0.0 } else { n / (present * c as f64) })
        .collect()
}

/// Runs mini-batch Adam on weighted cross-entropy.
///
/// `forward` builds the probability node for one example; it gets a dropout
/// RNG during training. Returns the mean weighted loss of each epoch.
pub(crate) fn fit<X, F>(
    params: &mut ParameterSet,
    inputs: &[X],
    targets: &[usize],
    n_classes: usize,
    config: &TrainConfig,
    forward: F,
) -> Result<Vec<f64>, ModelError>
where
    F: Fn(&mut Graph<'_>, &X, Option<&mut ChaCha8Rng>) -> Result<NodeId, NnError>,
{
    config.validate()?;
    if inputs.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    debug_assert_eq!(inputs.len(), targets.len());
    let distinct = {
        let mut t = targets.to_vec();
        t.sort_unstable();
        t.dedup();
        t.len()
    };
    if distinct < 2 {
        return Err(ModelError::DegenerateLabels);
    }
    let weights = class_weights(targets, n_classes, config.class_weighting);
    let adam = AdamConfig {
        learning_rate: config.learning_rate,
        ..AdamConfig::default()
    };
    let mut state = AdamState::default();
    let mut shuffle_rng = seed::rng(params.rng_seed(), "shuffle");
    let mut dropout_rng = seed::rng(params.rng_seed(), "dropout");
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            params.zero_grads();
            for &i in batch {
                let grads = {
                    let mut g = Graph::new(params);
                    let probs = forward(&mut g, &inputs[i], Some(&mut dropout_rng))?;
                    let loss = g.cross_entropy(probs, targets[i], weights[targets[i]])?;
                    total += g.value(loss).data()[0];
                    g.backward(loss)?
                };
                params.accumulate(&grads)?;
            }
            params.scale_grads(1.0 / batch.len() as f64);
            params.clip_grad_norm(config.grad_clip);
            adam_step(params, &mut state, adam);
        }
        let mean = total / inputs.len() as f64;
        if !mean.is_finite() {
            return Err(ModelError::Diverged { epoch });
        }
        log::debug!("epoch {epoch}: mean loss {mean:.6}");
        log.push(mean);
    }
    params.zero_grads();
    Ok(log)
}

/// Inference pass: no dropout, returns the probability vector.
pub(crate) fn infer<X, F>(params: &ParameterSet, input: &X, forward: F) -> Result<Vec<f64>, ModelError>
where
    F: Fn(&mut Graph<'_>, &X, Option<&mut ChaCha8Rng>) -> Result<NodeId, NnError>,
{
    let mut g = Graph::new(params);
    let probs = forward(&mut g, input, None)?;
    Ok(g.value(probs).data().to_vec())
}
