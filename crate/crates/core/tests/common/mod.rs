//! Finite-difference gradient harness shared by the oracle and acceptance
//! targets.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use suicide_risk::nn::{Gradients, Graph, ParameterSet, RowRef, Tensor};

pub const FD_STEP: f64 = 1e-4;
pub const FD_TOLERANCE: f64 = 1e-3;
/// Denominator floor so gradients near zero are compared absolutely.
pub const FD_FLOOR: f64 = 1e-3;
pub const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], bound: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-bound..bound)).collect()).unwrap()
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR)
}

/// Largest relative error per parameter between the backward gradient and a
/// central difference over every entry.
pub fn fd_errors(params: &ParameterSet, loss: impl Fn(&ParameterSet) -> (f64, Gradients)) -> BTreeMap<String, f64> {
    let (_, grads) = loss(params);
    let mut worst = BTreeMap::new();
    for name in params.names().map(str::to_string).collect::<Vec<_>>() {
        let n = params.get(&name).unwrap().len();
        let mut max = 0.0f64;
        for i in 0..n {
            let mut plus = params.clone();
            plus.get_mut(&name).unwrap().data_mut()[i] += FD_STEP;
            let mut minus = params.clone();
            minus.get_mut(&name).unwrap().data_mut()[i] -= FD_STEP;
            let numeric = (loss(&plus).0 - loss(&minus).0) / (2.0 * FD_STEP);
            let analytic = grads.get(&name).map_or(0.0, |g| g.data()[i]);
            max = max.max(relative_error(analytic, numeric));
        }
        worst.insert(name, max);
    }
    worst
}

/// Embedding lookup (frozen, trainable and zero rows) into an LSTM, then
/// dense + softmax + weighted cross-entropy. Embedding parameter: `emb`; LSTM
/// parameters: `w_x`, `w_h`, `b`.
pub fn lstm_stack_errors(seed: u64) -> BTreeMap<String, f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (d, h, classes) = (3, 3, 4);
    let mut params = ParameterSet::new(seed);
    params.insert("emb", random_tensor(&mut rng, &[3, d], 0.8));
    params.insert("w_x", random_tensor(&mut rng, &[4 * h, d], 0.6));
    params.insert("w_h", random_tensor(&mut rng, &[4 * h, h], 0.6));
    params.insert("b", random_tensor(&mut rng, &[4 * h], 0.3));
    params.insert("out_w", random_tensor(&mut rng, &[classes, h], 0.8));
    params.insert("out_b", random_tensor(&mut rng, &[classes], 0.3));
    let frozen = random_tensor(&mut rng, &[4, d], 0.8);
    let rows = vec![
        RowRef::Trainable(1),
        RowRef::Frozen(2),
        RowRef::Trainable(0),
        RowRef::Trainable(1),
        RowRef::Zero,
    ];
    let target = rng.gen_range(0..classes);
    fd_errors(&params, |p| {
        let mut g = Graph::new(p);
        let table = g.param("emb").unwrap();
        let x = g.lookup(table, Some(&frozen), rows.clone()).unwrap();
        let (wx, wh, b) = (g.param("w_x").unwrap(), g.param("w_h").unwrap(), g.param("b").unwrap());
        let hid = g.lstm(x, wx, wh, b, h).unwrap();
        let (ow, ob) = (g.param("out_w").unwrap(), g.param("out_b").unwrap());
        let logits = g.dense(hid, ow, ob).unwrap();
        let probs = g.softmax(logits);
        let loss = g.cross_entropy(probs, target, 1.3).unwrap();
        (g.value(loss).data()[0], g.backward(loss).unwrap())
    })
}

/// Two convolution widths with max-pooling, concatenated, under a fixed
/// dropout mask. Convolution parameters: `f2`, `b2`, `f3`, `b3`.
pub fn conv_stack_errors(seed: u64) -> BTreeMap<String, f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c, classes) = (3, 4);
    let mut params = ParameterSet::new(seed);
    params.insert("emb", random_tensor(&mut rng, &[5, c], 1.0));
    params.insert("f2", random_tensor(&mut rng, &[3, 2, c], 1.0));
    params.insert("b2", random_tensor(&mut rng, &[3], 0.2));
    params.insert("f3", random_tensor(&mut rng, &[2, 3, c], 1.0));
    params.insert("b3", random_tensor(&mut rng, &[2], 0.2));
    params.insert("out_w", random_tensor(&mut rng, &[classes, 5], 0.8));
    params.insert("out_b", random_tensor(&mut rng, &[classes], 0.3));
    let rows: Vec<RowRef> = (0..7).map(|_| RowRef::Trainable(rng.gen_range(0..5))).collect();
    let target = rng.gen_range(0..classes);
    let dropout_seed = rng.gen::<u64>();
    fd_errors(&params, |p| {
        let mut g = Graph::new(p);
        let table = g.param("emb").unwrap();
        let x = g.lookup(table, None, rows.clone()).unwrap();
        let (f2, b2) = (g.param("f2").unwrap(), g.param("b2").unwrap());
        let (f3, b3) = (g.param("f3").unwrap(), g.param("b3").unwrap());
        let p2 = g.conv_maxpool(x, f2, b2, rows.len()).unwrap();
        let p3 = g.conv_maxpool(x, f3, b3, rows.len()).unwrap();
        let feats = g.concat(vec![p2, p3]);
        // Same mask on every evaluation.
        let mut drop_rng = ChaCha8Rng::seed_from_u64(dropout_seed);
        let dropped = g.dropout(feats, 0.3, Some(&mut drop_rng));
        let (ow, ob) = (g.param("out_w").unwrap(), g.param("out_b").unwrap());
        let logits = g.dense(dropped, ow, ob).unwrap();
        let probs = g.softmax(logits);
        let loss = g.cross_entropy(probs, target, 1.0).unwrap();
        (g.value(loss).data()[0], g.backward(loss).unwrap())
    })
}

/// Dense + softmax + weighted cross-entropy on a fixed input.
pub fn dense_errors(seed: u64) -> BTreeMap<String, f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, classes) = (6, 4);
    let mut params = ParameterSet::new(seed);
    params.insert("w", random_tensor(&mut rng, &[classes, n], 1.0));
    params.insert("b", random_tensor(&mut rng, &[classes], 1.0));
    let x = random_tensor(&mut rng, &[n], 1.5);
    let target = rng.gen_range(0..classes);
    fd_errors(&params, |p| {
        let mut g = Graph::new(p);
        let input = g.input(x.clone());
        let (w, b) = (g.param("w").unwrap(), g.param("b").unwrap());
        let logits = g.dense(input, w, b).unwrap();
        let probs = g.softmax(logits);
        let loss = g.cross_entropy(probs, target, 0.7).unwrap();
        (g.value(loss).data()[0], g.backward(loss).unwrap())
    })
}

/// Worst error per layer over all seeds: embedding, LSTM, conv+maxpool and
/// dense+softmax+CE.
pub fn layer_errors() -> Vec<(&'static str, f64)> {
    let mut out = vec![
        ("embedding", 0.0f64),
        ("lstm", 0.0),
        ("conv_maxpool", 0.0),
        ("dense_softmax_ce", 0.0),
    ];
    let mut bump = |i: usize, e: f64| out[i].1 = out[i].1.max(e);
    for seed in SEEDS {
        for (name, e) in lstm_stack_errors(seed) {
            match name.as_str() {
                "emb" => bump(0, e),
                "w_x" | "w_h" | "b" => bump(1, e),
                _ => bump(3, e),
            }
        }
        for (name, e) in conv_stack_errors(seed) {
            match name.as_str() {
                "emb" => bump(0, e),
                "f2" | "b2" | "f3" | "b3" => bump(2, e),
                _ => bump(3, e),
            }
        }
        for (_, e) in dense_errors(seed) {
            bump(3, e);
        }
    }
    out
}
