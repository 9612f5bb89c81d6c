//! Tape-based reverse-mode differentiation over the layer kernels.
//!
//! A [`Graph`] records one forward pass. Nodes are appended in execution order,
//! so walking the tape backwards visits every node after all of its consumers.

use std::collections::BTreeMap;

use rand::Rng;

use super::layers::{self, LstmCache, LstmWeights, PROB_FLOOR};
use super::params::Gradients;
use super::{NnError, ParameterSet, Tensor};

pub type NodeId = usize;

/// Where a looked-up embedding row comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowRef {
    /// Row of the frozen matrix; receives no gradient.
    Frozen(usize),
    /// Row of the trainable table node.
    Trainable(usize),
    /// All-zero padding row.
    Zero,
}

enum Op {
    Input,
    Param(String),
    Lookup {
        table: NodeId,
        rows: Vec<RowRef>,
    },
    Lstm {
        input: NodeId,
        w_x: NodeId,
        w_h: NodeId,
        bias: NodeId,
        cache: LstmCache,
    },
    ConvPool {
        input: NodeId,
        filters: NodeId,
        bias: NodeId,
        winners: Vec<Option<usize>>,
    },
    Concat(Vec<NodeId>),
    Dropout {
        input: NodeId,
        mask: Vec<f64>,
    },
    Dense {
        input: NodeId,
        weights: NodeId,
        bias: NodeId,
    },
    Softmax {
        input: NodeId,
    },
    CrossEntropy {
        input: NodeId,
        target: usize,
        weight: f64,
    },
}

struct Node {
    op: Op,
    /// `None` for parameters, whose value lives in the parameter set.
    value: Option<Tensor>,
}

pub struct Graph<'a> {
    params: &'a ParameterSet,
    nodes: Vec<Node>,
}

impl<'a> Graph<'a> {
    pub fn new(params: &'a ParameterSet) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
        }
    }

    fn push(&mut self, op: Op, value: Option<Tensor>) -> NodeId {
        self.nodes.push(Node { op, value });
        self.nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        let node = &self.nodes[id];
        match &node.op {
            Op::Param(name) => self.params.get(name).expect("parameter checked when added"),
            _ => node.value.as_ref().expect("non-parameter nodes carry values"),
        }
    }

    /// A constant leaf; gradients stop here.
    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Input, Some(value))
    }

    /// Copies a node's value into a constant leaf, cutting it off from the tape.
    pub fn detach(&mut self, id: NodeId) -> NodeId {
        let v = self.value(id).clone();
        self.input(v)
    }

    pub fn param(&mut self, name: &str) -> Result<NodeId, NnError> {
        self.params.get(name)?;
        Ok(self.push(Op::Param(name.to_string()), None))
    }

    /// Builds a `[T × d]` matrix from rows of a frozen matrix, a trainable table
    /// node, or zero padding.
    pub fn lookup(&mut self, table: NodeId, frozen: Option<&Tensor>, rows: Vec<RowRef>) -> Result<NodeId, NnError> {
        let t = self.value(table);
        let dim = t.row_len();
        if let Some(f) = frozen {
            if f.row_len() != dim {
                return Err(NnError::Shape("frozen and trainable tables differ in width".into()));
            }
        }
        if rows.is_empty() {
            return Err(NnError::Shape("empty lookup".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in &rows {
            match *r {
                RowRef::Trainable(i) => {
                    if i >= t.rows() {
                        return Err(NnError::IndexOutOfRange {
                            index: i,
                            len: t.rows(),
                        });
                    }
                    data.extend_from_slice(t.row(i));
                }
                RowRef::Frozen(i) => {
                    let f = frozen.ok_or_else(|| NnError::Shape("no frozen table supplied".into()))?;
                    if i >= f.rows() {
                        return Err(NnError::IndexOutOfRange {
                            index: i,
                            len: f.rows(),
                        });
                    }
                    data.extend_from_slice(f.row(i));
                }
                RowRef::Zero => data.extend(std::iter::repeat_n(0.0, dim)),
            }
        }
        let value = Tensor::new(vec![rows.len(), dim], data)?;
        Ok(self.push(Op::Lookup { table, rows }, Some(value)))
    }

    pub fn lstm(
        &mut self,
        input: NodeId,
        w_x: NodeId,
        w_h: NodeId,
        bias: NodeId,
        hidden: usize,
    ) -> Result<NodeId, NnError> {
        let weights = LstmWeights {
            w_x: self.value(w_x),
            w_h: self.value(w_h),
            bias: self.value(bias),
        };
        let (h, cache) = layers::lstm_forward_cached(self.value(input), weights, hidden)?;
        Ok(self.push(
            Op::Lstm {
                input,
                w_x,
                w_h,
                bias,
                cache,
            },
            Some(h),
        ))
    }

    pub fn conv_maxpool(
        &mut self,
        input: NodeId,
        filters: NodeId,
        bias: NodeId,
        valid_len: usize,
    ) -> Result<NodeId, NnError> {
        let out = layers::conv1d_maxpool_masked(self.value(input), self.value(filters), self.value(bias), valid_len)?;
        Ok(self.push(
            Op::ConvPool {
                input,
                filters,
                bias,
                winners: out.winners,
            },
            Some(out.pooled),
        ))
    }

    pub fn concat(&mut self, parts: Vec<NodeId>) -> NodeId {
        let data: Vec<f64> = parts.iter().flat_map(|&p| self.value(p).data().to_vec()).collect();
        self.push(Op::Concat(parts), Some(Tensor::vector(data)))
    }

    /// Inverted dropout; identity when `rate` is zero or no RNG is given.
    pub fn dropout<R: Rng>(&mut self, input: NodeId, rate: f64, rng: Option<&mut R>) -> NodeId {
        let Some(rng) = rng.filter(|_| rate > 0.0) else {
            return input;
        };
        let keep = 1.0 - rate;
        let mask: Vec<f64> = (0..self.value(input).len())
            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let x = self.value(input);
        let data = x.data().iter().zip(&mask).map(|(a, m)| a * m).collect();
        let value = Tensor::new(x.shape().to_vec(), data).expect("same shape");
        self.push(Op::Dropout { input, mask }, Some(value))
    }

    pub fn dense(&mut self, input: NodeId, weights: NodeId, bias: NodeId) -> Result<NodeId, NnError> {
        let v = layers::dense(self.value(input), self.value(weights), self.value(bias))?;
        Ok(self.push(Op::Dense { input, weights, bias }, Some(v)))
    }

    pub fn softmax(&mut self, input: NodeId) -> NodeId {
        let v = Tensor::vector(layers::softmax(self.value(input).data()));
        self.push(Op::Softmax { input }, Some(v))
    }

    /// Weighted `−w · ln(max(p[target], ε))` on a probability node.
    pub fn cross_entropy(&mut self, input: NodeId, target: usize, weight: f64) -> Result<NodeId, NnError> {
        let loss = layers::cross_entropy(self.value(input), target)? * weight;
        Ok(self.push(Op::CrossEntropy { input, target, weight }, Some(Tensor::scalar(loss))))
    }

    /// Reverse-mode gradients of the scalar `loss` for every parameter that
    /// reaches it.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients, NnError> {
        if self.nodes.is_empty() || loss >= self.nodes.len() {
            return Err(NnError::NoForward);
        }
        if self.value(loss).len() != 1 {
            return Err(NnError::Shape("backward needs a scalar loss".into()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss] = Some(Tensor::scalar(1.0));
        let mut out: BTreeMap<String, Tensor> = BTreeMap::new();

        for id in (0..=loss).rev() {
            let Some(g) = grads[id].take() else { continue };
            match &self.nodes[id].op {
                Op::Input => {}
                Op::Param(name) => match out.get_mut(name) {
                    Some(acc) => acc.add_assign(&g),
                    None => {
                        out.insert(name.clone(), g);
                    }
                },
                Op::Lookup { table, rows, .. } => {
                    let t = self.value(*table);
                    let dim = t.row_len();
                    let mut gt = Tensor::zeros(t.shape());
                    let mut touched = false;
                    for (k, r) in rows.iter().enumerate() {
                        if let RowRef::Trainable(i) = *r {
                            let src = &g.data()[k * dim..(k + 1) * dim];
                            gt.row_mut(i).iter_mut().zip(src).for_each(|(a, b)| *a += b);
                            touched = true;
                        }
                    }
                    if touched {
                        add_grad(&mut grads, *table, gt);
                    }
                }
                Op::Lstm {
                    input,
                    w_x,
                    w_h,
                    bias,
                    cache,
                } => {
                    let (dx, dwx, dwh, db) =
                        lstm_backward(self.value(*input), self.value(*w_x), self.value(*w_h), cache, g.data());
                    add_grad(&mut grads, *input, dx);
                    add_grad(&mut grads, *w_x, dwx);
                    add_grad(&mut grads, *w_h, dwh);
                    add_grad(&mut grads, *bias, db);
                }
                Op::ConvPool {
                    input,
                    filters,
                    bias,
                    winners,
                } => {
                    let x = self.value(*input);
                    let f = self.value(*filters);
                    let channels = x.row_len();
                    let span = f.shape()[1] * channels;
                    let mut dx = Tensor::zeros(x.shape());
                    let mut df = Tensor::zeros(f.shape());
                    let mut db = Tensor::zeros(self.value(*bias).shape());
                    for (k, win) in winners.iter().enumerate() {
                        let (Some(s), gk) = (*win, g.data()[k]) else { continue };
                        db.data_mut()[k] += gk;
                        let fk = &f.data()[k * span..(k + 1) * span];
                        let xs = &x.data()[s * channels..s * channels + span];
                        let dfk = &mut df.data_mut()[k * span..(k + 1) * span];
                        for j in 0..span {
                            dfk[j] += gk * xs[j];
                        }
                        let dxs = &mut dx.data_mut()[s * channels..s * channels + span];
                        for j in 0..span {
                            dxs[j] += gk * fk[j];
                        }
                    }
                    add_grad(&mut grads, *input, dx);
                    add_grad(&mut grads, *filters, df);
                    add_grad(&mut grads, *bias, db);
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let n = self.value(p).len();
                        let shape = self.value(p).shape().to_vec();
                        let piece = Tensor::new(shape, g.data()[offset..offset + n].to_vec())?;
                        add_grad(&mut grads, p, piece);
                        offset += n;
                    }
                }
                Op::Dropout { input, mask } => {
                    let data = g.data().iter().zip(mask).map(|(a, m)| a * m).collect();
                    add_grad(&mut grads, *input, Tensor::new(g.shape().to_vec(), data)?);
                }
                Op::Dense { input, weights, bias } => {
                    let x = self.value(*input);
                    let w = self.value(*weights);
                    let (m, n) = (w.rows(), w.row_len());
                    let mut dw = Tensor::zeros(w.shape());
                    let mut dx = vec![0.0; n];
                    for r in 0..m {
                        let gr = g.data()[r];
                        if gr == 0.0 {
                            continue;
                        }
                        let wr = w.row(r);
                        let dwr = dw.row_mut(r);
                        for c in 0..n {
                            dwr[c] += gr * x.data()[c];
                            dx[c] += gr * wr[c];
                        }
                    }
                    add_grad(&mut grads, *input, Tensor::new(x.shape().to_vec(), dx)?);
                    add_grad(&mut grads, *weights, dw);
                    add_grad(&mut grads, *bias, g.clone());
                }
                Op::Softmax { input } => {
                    let p = self.value(id).data();
                    let dot: f64 = p.iter().zip(g.data()).map(|(a, b)| a * b).sum();
                    let dx = p.iter().zip(g.data()).map(|(pi, gi)| pi * (gi - dot)).collect();
                    add_grad(&mut grads, *input, Tensor::vector(dx));
                }
                Op::CrossEntropy { input, target, weight } => {
                    let p = self.value(*input);
                    let mut dp = Tensor::zeros(p.shape());
                    let pt = p.data()[*target];
                    if pt > PROB_FLOOR {
                        dp.data_mut()[*target] = -weight * g.data()[0] / pt;
                    }
                    add_grad(&mut grads, *input, dp);
                }
            }
        }
        Ok(Gradients(out))
    }
}

fn add_grad(grads: &mut [Option<Tensor>], id: NodeId, g: Tensor) {
    match &mut grads[id] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// Backpropagation through time for the final-hidden-state LSTM.
fn lstm_backward(
    x: &Tensor,
    w_x: &Tensor,
    w_h: &Tensor,
    cache: &LstmCache,
    dh_last: &[f64],
) -> (Tensor, Tensor, Tensor, Tensor) {
    let h = cache.hidden;
    let h4 = 4 * h;
    let (steps, dim) = (x.rows(), x.row_len());
    let mut dx = Tensor::zeros(x.shape());
    let mut dwx = Tensor::zeros(w_x.shape());
    let mut dwh = Tensor::zeros(w_h.shape());
    let mut db = Tensor::zeros(&[h4]);
    let mut dh = dh_last.to_vec();
    let mut dc_next = vec![0.0; h];
    let mut dz = vec![0.0; h4];
    for t in (0..steps).rev() {
        let gates = &cache.gates[t * h4..(t + 1) * h4];
        let c_prev = &cache.cells[t * h..(t + 1) * h];
        let c = &cache.cells[(t + 1) * h..(t + 2) * h];
        for j in 0..h {
            let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
            let tc = c[j].tanh();
            let d_o = dh[j] * tc;
            let dc = dc_next[j] + dh[j] * o * (1.0 - tc * tc);
            dz[j] = dc * g * i * (1.0 - i);
            dz[h + j] = dc * c_prev[j] * f * (1.0 - f);
            dz[2 * h + j] = dc * i * (1.0 - g * g);
            dz[3 * h + j] = d_o * o * (1.0 - o);
            dc_next[j] = dc * f;
        }
        let xt = x.row(t);
        let h_prev = &cache.hiddens[t * h..(t + 1) * h];
        let dxt = dx.row_mut(t);
        let mut dh_prev = vec![0.0; h];
        for r in 0..h4 {
            let dzr = dz[r];
            db.data_mut()[r] += dzr;
            if dzr == 0.0 {
                continue;
            }
            let wxr = w_x.row(r);
            let dwxr = &mut dwx.data_mut()[r * dim..(r + 1) * dim];
            for c in 0..dim {
                dwxr[c] += dzr * xt[c];
                dxt[c] += dzr * wxr[c];
            }
            let whr = w_h.row(r);
            let dwhr = &mut dwh.data_mut()[r * h..(r + 1) * h];
            for c in 0..h {
                dwhr[c] += dzr * h_prev[c];
                dh_prev[c] += dzr * whr[c];
            }
        }
        dh = dh_prev;
    }
    (dx, dwx, dwh, db)
}
