//! Forward kernels. The graph records their caches for the backward pass; the
//! free functions here are the plain, stateless versions.

use super::{NnError, Tensor};

/// Probability floor applied inside [`cross_entropy`].
pub const PROB_FLOOR: f64 = 1e-12;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Row `t` of the output is row `token_ids[t]` of the matrix.
pub fn embed_sequence(token_ids: &[usize], embedding_matrix: &Tensor) -> Result<Tensor, NnError> {
    if embedding_matrix.shape().len() != 2 {
        return Err(NnError::Shape("embedding matrix must be 2-D".into()));
    }
    if token_ids.is_empty() {
        return Err(NnError::Shape("empty token sequence".into()));
    }
    let (vocab, dim) = (embedding_matrix.rows(), embedding_matrix.row_len());
    let mut data = Vec::with_capacity(token_ids.len() * dim);
    for &id in token_ids {
        if id >= vocab {
            return Err(NnError::IndexOutOfRange { index: id, len: vocab });
        }
        data.extend_from_slice(embedding_matrix.row(id));
    }
    Tensor::new(vec![token_ids.len(), dim], data)
}

/// LSTM weights. Gate blocks are stacked in the order input, forget, cell
/// candidate, output: `w_x` is `[4h × d]`, `w_h` is `[4h × h]`, `bias` is `[4h]`.
#[derive(Debug, Clone, Copy)]
pub struct LstmWeights<'a> {
    pub w_x: &'a Tensor,
    pub w_h: &'a Tensor,
    pub bias: &'a Tensor,
}

impl LstmWeights<'_> {
    pub fn check(&self, input_dim: usize, hidden: usize) -> Result<(), NnError> {
        let ok = self.w_x.shape() == [4 * hidden, input_dim]
            && self.w_h.shape() == [4 * hidden, hidden]
            && self.bias.shape() == [4 * hidden];
        if ok {
            Ok(())
        } else {
            Err(NnError::Shape(format!(
                "LSTM weights {:?}/{:?}/{:?} inconsistent with input {input_dim}, hidden {hidden}",
                self.w_x.shape(),
                self.w_h.shape(),
                self.bias.shape()
            )))
        }
    }
}

/// Per-step activations kept for backpropagation through time.
#[derive(Debug, Clone, Default)]
pub struct LstmCache {
    pub hidden: usize,
    /// `[T × 4h]`: post-nonlinearity gate values i, f, g, o.
    pub gates: Vec<f64>,
    /// `[(T+1) × h]`, row 0 is the zero initial state.
    pub cells: Vec<f64>,
    pub hiddens: Vec<f64>,
}

pub fn lstm_forward_cached(inputs: &Tensor, w: LstmWeights<'_>, hidden: usize) -> Result<(Tensor, LstmCache), NnError> {
    if inputs.shape().len() != 2 || inputs.rows() == 0 {
        return Err(NnError::Shape("LSTM input must be a non-empty [T × d] matrix".into()));
    }
    let (steps, dim) = (inputs.rows(), inputs.row_len());
    w.check(dim, hidden)?;
    let h4 = 4 * hidden;
    let mut cache = LstmCache {
        hidden,
        gates: vec![0.0; steps * h4],
        cells: vec![0.0; (steps + 1) * hidden],
        hiddens: vec![0.0; (steps + 1) * hidden],
    };
    let wx = w.w_x.data();
    let wh = w.w_h.data();
    let b = w.bias.data();
    let mut z = vec![0.0; h4];
    for t in 0..steps {
        let x = inputs.row(t);
        let h_prev = &cache.hiddens[t * hidden..(t + 1) * hidden];
        for (r, zr) in z.iter_mut().enumerate() {
            let mut acc = b[r];
            let wxr = &wx[r * dim..(r + 1) * dim];
            for (a, v) in wxr.iter().zip(x) {
                acc += a * v;
            }
            let whr = &wh[r * hidden..(r + 1) * hidden];
            for (a, v) in whr.iter().zip(h_prev) {
                acc += a * v;
            }
            *zr = acc;
        }
        let gates = &mut cache.gates[t * h4..(t + 1) * h4];
        for j in 0..hidden {
            gates[j] = sigmoid(z[j]);
            gates[hidden + j] = sigmoid(z[hidden + j]);
            gates[2 * hidden + j] = z[2 * hidden + j].tanh();
            gates[3 * hidden + j] = sigmoid(z[3 * hidden + j]);
        }
        for j in 0..hidden {
            let (i, f, g, o) = (
                gates[j],
                gates[hidden + j],
                gates[2 * hidden + j],
                gates[3 * hidden + j],
            );
            let c = f * cache.cells[t * hidden + j] + i * g;
            cache.cells[(t + 1) * hidden + j] = c;
            cache.hiddens[(t + 1) * hidden + j] = o * c.tanh();
        }
    }
    let last = cache.hiddens[steps * hidden..].to_vec();
    Ok((Tensor::vector(last), cache))
}

/// Final hidden state of a standard LSTM run over the rows of `inputs`.
pub fn lstm_forward(inputs: &Tensor, w: LstmWeights<'_>, hidden: usize) -> Result<Tensor, NnError> {
    lstm_forward_cached(inputs, w, hidden).map(|(h, _)| h)
}

/// Result of [`conv1d_maxpool_masked`]: pooled activations plus, per filter, the
/// winning window start when its ReLU was active.
#[derive(Debug, Clone)]
pub struct ConvPoolOutput {
    pub pooled: Tensor,
    pub winners: Vec<Option<usize>>,
}

/// Valid 1-D convolution over time, ReLU, then max over windows.
///
/// Only windows starting before `valid_len` take part in the max; rows at or
/// after `valid_len` are padding, so windows made entirely of padding are masked.
pub fn conv1d_maxpool_masked(
    inputs: &Tensor,
    filters: &Tensor,
    bias: &Tensor,
    valid_len: usize,
) -> Result<ConvPoolOutput, NnError> {
    if inputs.shape().len() != 2 || filters.shape().len() != 3 {
        return Err(NnError::Shape(
            "conv expects [T × c] input and [K × w × c] filters".into(),
        ));
    }
    let (steps, channels) = (inputs.rows(), inputs.row_len());
    let (k, width, fc) = (filters.shape()[0], filters.shape()[1], filters.shape()[2]);
    if fc != channels || bias.shape() != [k] {
        return Err(NnError::Shape(format!(
            "filters {:?} / bias {:?} do not fit {channels} input channels",
            filters.shape(),
            bias.shape()
        )));
    }
    if width == 0 || steps < width {
        return Err(NnError::SequenceTooShort { len: steps, width });
    }
    let windows = (steps - width + 1).min(valid_len.max(1));
    let span = width * channels;
    let x = inputs.data();
    let mut pooled = vec![0.0; k];
    let mut winners = vec![None; k];
    for f in 0..k {
        let w = &filters.data()[f * span..(f + 1) * span];
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for s in 0..windows {
            let xs = &x[s * channels..s * channels + span];
            let mut acc = bias.data()[f];
            for (a, b) in w.iter().zip(xs) {
                acc += a * b;
            }
            if acc > best {
                best = acc;
                arg = s;
            }
        }
        if best > 0.0 {
            pooled[f] = best;
            winners[f] = Some(arg);
        }
    }
    Ok(ConvPoolOutput {
        pooled: Tensor::vector(pooled),
        winners,
    })
}

pub fn conv1d_maxpool(inputs: &Tensor, filters: &Tensor, bias: &Tensor) -> Result<Tensor, NnError> {
    conv1d_maxpool_masked(inputs, filters, bias, inputs.rows()).map(|o| o.pooled)
}

/// `W x + b`.
pub fn dense(x: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor, NnError> {
    let n = x.len();
    let m = bias.len();
    if weights.shape() != [m, n] || bias.shape() != [m] {
        return Err(NnError::Shape(format!(
            "dense weights {:?} / bias {:?} do not fit input {n}",
            weights.shape(),
            bias.shape()
        )));
    }
    let out = (0..m)
        .map(|r| weights.row(r).iter().zip(x.data()).map(|(a, b)| a * b).sum::<f64>() + bias.data()[r])
        .collect();
    Ok(Tensor::vector(out))
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn dense_softmax(x: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor, NnError> {
    Ok(Tensor::vector(softmax(dense(x, weights, bias)?.data())))
}

/// `−ln(max(pred[target], 1e-12))`.
pub fn cross_entropy(pred: &Tensor, target: usize) -> Result<f64, NnError> {
    let p = pred.data().get(target).ok_or(NnError::IndexOutOfRange {
        index: target,
        len: pred.len(),
    })?;
    Ok(-p.max(PROB_FLOOR).ln())
}
