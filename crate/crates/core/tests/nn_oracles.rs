use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use suicide_risk::nn::{
    adam_step, conv1d_maxpool, cross_entropy, dense_softmax, embed_sequence, lstm_forward, softmax, AdamConfig,
    AdamState, Graph, LstmWeights, ParameterSet, Tensor,
};

mod common;

use common::{random_tensor, FD_TOLERANCE, SEEDS};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[test]
fn embedding_rows_match_indexing() {
    for seed in SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_tensor(&mut rng, &[7, 4], 1.0);
        let ids: Vec<usize> = (0..9).map(|_| rng.gen_range(0..7)).collect();
        let out = embed_sequence(&ids, &m).unwrap();
        assert_eq!(out.shape(), [9, 4]);
        for (t, &id) in ids.iter().enumerate() {
            for d in 0..4 {
                assert_eq!(out.data()[t * 4 + d], m.data()[id * 4 + d]);
            }
        }
    }
}

/// Second implementation of the recurrence: gate blocks i, f, g, o.
fn lstm_oracle(x: &Tensor, w_x: &Tensor, w_h: &Tensor, b: &Tensor, h: usize) -> Vec<f64> {
    let d = x.row_len();
    let mut hs = vec![0.0; h];
    let mut cs = vec![0.0; h];
    for t in 0..x.rows() {
        let pre = |gate: usize, j: usize| {
            let r = gate * h + j;
            let mut z = b.data()[r];
            for k in 0..d {
                z += w_x.data()[r * d + k] * x.data()[t * d + k];
            }
            for k in 0..h {
                z += w_h.data()[r * h + k] * hs[k];
            }
            z
        };
        let mut next_h = vec![0.0; h];
        for j in 0..h {
            let i = sigmoid(pre(0, j));
            let f = sigmoid(pre(1, j));
            let g = pre(2, j).tanh();
            let o = sigmoid(pre(3, j));
            cs[j] = f * cs[j] + i * g;
            next_h[j] = o * cs[j].tanh();
        }
        hs = next_h;
    }
    hs
}

#[test]
fn lstm_matches_step_by_step_oracle() {
    for seed in SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (t, d, h) = (rng.gen_range(1..6), rng.gen_range(1..5), rng.gen_range(1..5));
        let x = random_tensor(&mut rng, &[t, d], 1.0);
        let w_x = random_tensor(&mut rng, &[4 * h, d], 0.5);
        let w_h = random_tensor(&mut rng, &[4 * h, h], 0.5);
        let b = random_tensor(&mut rng, &[4 * h], 0.5);
        let got = lstm_forward(
            &x,
            LstmWeights {
                w_x: &w_x,
                w_h: &w_h,
                bias: &b,
            },
            h,
        )
        .unwrap();
        for (a, e) in got.data().iter().zip(lstm_oracle(&x, &w_x, &w_h, &b, h)) {
            assert!((a - e).abs() < 1e-12);
        }
    }
}

#[test]
fn conv_matches_triple_loop_oracle() {
    for seed in SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (t, c, k, w) = (
            rng.gen_range(3..9),
            rng.gen_range(1..4),
            rng.gen_range(1..5),
            rng.gen_range(1..4),
        );
        let x = random_tensor(&mut rng, &[t, c], 1.0);
        let filters = random_tensor(&mut rng, &[k, w, c], 1.0);
        let bias = random_tensor(&mut rng, &[k], 0.5);
        let got = conv1d_maxpool(&x, &filters, &bias).unwrap();
        for f in 0..k {
            let mut best = f64::NEG_INFINITY;
            for s in 0..=t - w {
                let mut acc = bias.data()[f];
                for dw in 0..w {
                    for ch in 0..c {
                        acc += filters.data()[(f * w + dw) * c + ch] * x.data()[(s + dw) * c + ch];
                    }
                }
                best = best.max(acc.max(0.0));
            }
            assert!((got.data()[f] - best).abs() < 1e-12);
        }
    }
}

#[test]
fn dense_softmax_and_cross_entropy_match_formulas() {
    for seed in SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, m) = (rng.gen_range(1..6), rng.gen_range(2..5));
        let x = random_tensor(&mut rng, &[n], 2.0);
        let w = random_tensor(&mut rng, &[m, n], 2.0);
        let b = random_tensor(&mut rng, &[m], 2.0);
        let got = dense_softmax(&x, &w, &b).unwrap();
        let z: Vec<f64> = (0..m)
            .map(|r| (0..n).map(|c| w.data()[r * n + c] * x.data()[c]).sum::<f64>() + b.data()[r])
            .collect();
        let total: f64 = z.iter().map(|v| v.exp()).sum();
        for r in 0..m {
            let p = z[r].exp() / total;
            assert!((got.data()[r] - p).abs() < 1e-12);
            assert!((cross_entropy(&got, r).unwrap() + p.ln()).abs() < 1e-10);
        }
    }
}

fn assert_within_tolerance(errors: std::collections::BTreeMap<String, f64>, seed: u64) {
    assert!(!errors.is_empty());
    for (name, e) in errors {
        assert!(e < FD_TOLERANCE, "seed {seed}, {name}: relative error {e}");
    }
}

#[test]
fn embedding_and_lstm_gradients_match_finite_differences() {
    for seed in SEEDS {
        assert_within_tolerance(common::lstm_stack_errors(seed), seed);
    }
}

#[test]
fn conv_pool_gradients_match_finite_differences() {
    for seed in SEEDS {
        assert_within_tolerance(common::conv_stack_errors(seed), seed);
    }
}

#[test]
fn dense_softmax_gradients_match_finite_differences() {
    for seed in SEEDS {
        assert_within_tolerance(common::dense_errors(seed), seed);
    }
}

#[test]
fn adam_runs_are_bitwise_reproducible() {
    let run = || {
        let mut params = ParameterSet::new(11);
        params.init_uniform("w", &[4, 3], 0.5);
        params.init_constant("b", &[4], 0.0);
        let mut state = AdamState::default();
        for step in 0..5 {
            let mut g = Graph::new(&params);
            let x = g.input(Tensor::vector(vec![1.0, -0.5, 0.25]));
            let (w, b) = (g.param("w").unwrap(), g.param("b").unwrap());
            let logits = g.dense(x, w, b).unwrap();
            let probs = g.softmax(logits);
            let loss = g.cross_entropy(probs, step % 4, 1.0).unwrap();
            let grads = g.backward(loss).unwrap();
            params.zero_grads();
            params.accumulate(&grads).unwrap();
            adam_step(&mut params, &mut state, AdamConfig::default());
        }
        params.values().clone()
    };
    let a = run();
    let b = run();
    for (k, v) in &a {
        let bits = |t: &Tensor| t.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(v), bits(&b[k]));
    }
}

proptest! {
    #[test]
    fn softmax_is_a_distribution(logits in proptest::collection::vec(-1000.0f64..1000.0, 1..8)) {
        let p = softmax(&logits);
        prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
