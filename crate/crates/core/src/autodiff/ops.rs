use std::sync::Arc;

use super::graph::NodeId;
use super::tensor::{gemm, gemm_nt_acc, gemm_tn_acc, Tensor};

/// Operation recorded for one graph node.
#[derive(Clone, Debug)]
pub(crate) enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    /// `x[.., n] + bias[n]`, bias repeated over every leading index.
    AddBias(NodeId, NodeId),
    MatMul(NodeId, NodeId),
    BatchMatMul(NodeId, NodeId),
    TransposeLast2(NodeId),
    Reshape(NodeId, Vec<usize>),
    Gather {
        table: NodeId,
        ids: Arc<Vec<usize>>,
    },
    Softmax(NodeId),
    LogSoftmax(NodeId),
    Log(NodeId),
    Exp(NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Relu(NodeId),
    Concat(Vec<NodeId>),
    Slice {
        input: NodeId,
        start: usize,
        len: usize,
    },
    Scale(NodeId, f64),
    AddScalar(NodeId, f64),
    Sum(NodeId),
    WeightedSum {
        input: NodeId,
        weights: Arc<Vec<f64>>,
    },
    /// Per-row negative log-likelihood of `targets` under row log-probabilities,
    /// mixed with the uniform distribution by `smoothing`. Output `[rows, 1]`.
    Nll {
        logp: NodeId,
        targets: Arc<Vec<usize>>,
        smoothing: f64,
    },
}

impl Op {
    pub(crate) fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::AddBias(..) => "add_bias",
            Op::MatMul(..) => "matmul",
            Op::BatchMatMul(..) => "batch_matmul",
            Op::TransposeLast2(..) => "transpose",
            Op::Reshape(..) => "reshape",
            Op::Gather { .. } => "gather",
            Op::Softmax(..) => "softmax",
            Op::LogSoftmax(..) => "log_softmax",
            Op::Log(..) => "log",
            Op::Exp(..) => "exp",
            Op::Tanh(..) => "tanh",
            Op::Sigmoid(..) => "sigmoid",
            Op::Relu(..) => "relu",
            Op::Concat(..) => "concat",
            Op::Slice { .. } => "slice",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::Sum(..) => "sum",
            Op::WeightedSum { .. } => "weighted_sum",
            Op::Nll { .. } => "nll",
        }
    }

    pub(crate) fn inputs(&self) -> Vec<NodeId> {
        match self {
            Op::Leaf => vec![],
            Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::AddBias(a, b)
            | Op::MatMul(a, b)
            | Op::BatchMatMul(a, b) => vec![*a, *b],
            Op::TransposeLast2(x)
            | Op::Reshape(x, _)
            | Op::Softmax(x)
            | Op::LogSoftmax(x)
            | Op::Log(x)
            | Op::Exp(x)
            | Op::Tanh(x)
            | Op::Sigmoid(x)
            | Op::Relu(x)
            | Op::Scale(x, _)
            | Op::AddScalar(x, _)
            | Op::Sum(x) => vec![*x],
            Op::Gather { table, .. } => vec![*table],
            Op::Concat(parts) => parts.clone(),
            Op::Slice { input, .. } => vec![*input],
            Op::WeightedSum { input, .. } => vec![*input],
            Op::Nll { logp, .. } => vec![*logp],
        }
    }

    /// Computes the node value from its input values.
    pub(crate) fn eval(&self, args: &[&Tensor]) -> Result<Tensor, String> {
        match self {
            Op::Leaf => unreachable!("leaves are bound, not evaluated"),
            Op::Add(..) => zip_same(args[0], args[1], |a, b| a + b),
            Op::Sub(..) => zip_same(args[0], args[1], |a, b| a - b),
            Op::Mul(..) => zip_same(args[0], args[1], |a, b| a * b),
            Op::AddBias(..) => {
                let (x, bias) = (args[0], args[1]);
                if bias.rank() != 1 || bias.numel() != x.last_dim() {
                    return Err(format!("bias {:?} vs input {:?}", bias.shape(), x.shape()));
                }
                let n = bias.numel();
                let b = bias.data();
                let data = x
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v + b[i % n])
                    .collect();
                Ok(Tensor::from_parts(x.shape().to_vec(), data))
            }
            Op::MatMul(..) => {
                let (a, b) = (args[0], args[1]);
                if a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0] {
                    return Err(format!("{:?} x {:?}", a.shape(), b.shape()));
                }
                let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
                Ok(Tensor::from_parts(vec![m, n], gemm(a.data(), b.data(), m, k, n)))
            }
            Op::BatchMatMul(..) => {
                let (a, b) = (args[0], args[1]);
                if a.rank() != 3 || b.rank() != 3 || a.shape()[0] != b.shape()[0] || a.shape()[2] != b.shape()[1] {
                    return Err(format!("{:?} x {:?}", a.shape(), b.shape()));
                }
                let (bs, m, k, n) = (a.shape()[0], a.shape()[1], a.shape()[2], b.shape()[2]);
                let mut data = Vec::with_capacity(bs * m * n);
                for s in 0..bs {
                    let ab = &a.data()[s * m * k..(s + 1) * m * k];
                    let bb = &b.data()[s * k * n..(s + 1) * k * n];
                    data.extend(gemm(ab, bb, m, k, n));
                }
                Ok(Tensor::from_parts(vec![bs, m, n], data))
            }
            Op::TransposeLast2(..) => {
                let x = args[0];
                if x.rank() < 2 {
                    return Err(format!("rank {} < 2", x.rank()));
                }
                let r = x.rank();
                let (rows, cols) = (x.shape()[r - 2], x.shape()[r - 1]);
                let mut shape = x.shape().to_vec();
                shape.swap(r - 2, r - 1);
                let mut data = vec![0.0; x.numel()];
                for (blk, src) in x.data().chunks(rows * cols).enumerate() {
                    let dst = &mut data[blk * rows * cols..(blk + 1) * rows * cols];
                    for i in 0..rows {
                        for j in 0..cols {
                            dst[j * rows + i] = src[i * cols + j];
                        }
                    }
                }
                Ok(Tensor::from_parts(shape, data))
            }
            Op::Reshape(_, shape) => args[0].reshape(shape.clone()).map_err(|e| e.to_string()),
            Op::Gather { ids, .. } => {
                let table = args[0];
                if table.rank() != 2 {
                    return Err(format!("table must be 2-d, got {:?}", table.shape()));
                }
                let (rows, width) = (table.shape()[0], table.shape()[1]);
                if ids.is_empty() {
                    return Err("no ids to gather".into());
                }
                let mut data = Vec::with_capacity(ids.len() * width);
                for &id in ids.iter() {
                    if id >= rows {
                        return Err(format!("id {id} out of range for {rows} rows"));
                    }
                    data.extend_from_slice(table.row(id));
                }
                Ok(Tensor::from_parts(vec![ids.len(), width], data))
            }
            Op::Softmax(..) => Ok(row_softmax(args[0], false)),
            Op::LogSoftmax(..) => Ok(row_softmax(args[0], true)),
            Op::Log(..) => Ok(args[0].map(f64::ln)),
            Op::Exp(..) => Ok(args[0].map(f64::exp)),
            Op::Tanh(..) => Ok(args[0].map(f64::tanh)),
            Op::Sigmoid(..) => Ok(args[0].map(sigmoid)),
            Op::Relu(..) => Ok(args[0].map(|v| v.max(0.0))),
            Op::Concat(..) => {
                let lead = &args[0].shape()[..args[0].rank() - 1];
                let rows: usize = lead.iter().product();
                let mut width = 0;
                for a in args {
                    if a.rank() != args[0].rank() || &a.shape()[..a.rank() - 1] != lead {
                        return Err(format!("cannot concat {:?} with {:?}", args[0].shape(), a.shape()));
                    }
                    width += a.last_dim();
                }
                let mut data = Vec::with_capacity(rows * width);
                for r in 0..rows {
                    for a in args {
                        data.extend_from_slice(a.row(r));
                    }
                }
                let mut shape = lead.to_vec();
                shape.push(width);
                Ok(Tensor::from_parts(shape, data))
            }
            Op::Slice { start, len, .. } => {
                let x = args[0];
                let width = x.last_dim();
                if *len == 0 || start + len > width {
                    return Err(format!("slice {start}..{} of width {width}", start + len));
                }
                let rows = x.numel() / width;
                let mut data = Vec::with_capacity(rows * len);
                for r in 0..rows {
                    data.extend_from_slice(&x.row(r)[*start..start + len]);
                }
                let mut shape = x.shape().to_vec();
                *shape.last_mut().unwrap() = *len;
                Ok(Tensor::from_parts(shape, data))
            }
            Op::Scale(_, c) => Ok(args[0].map(|v| v * c)),
            Op::AddScalar(_, c) => Ok(args[0].map(|v| v + c)),
            Op::Sum(..) => Ok(Tensor::scalar(args[0].data().iter().sum())),
            Op::WeightedSum { weights, .. } => {
                let x = args[0];
                if weights.len() != x.numel() {
                    return Err(format!("{} weights for {} values", weights.len(), x.numel()));
                }
                let total = x.data().iter().zip(weights.iter()).map(|(v, w)| v * w).sum();
                Ok(Tensor::scalar(total))
            }
            Op::Nll {
                targets, smoothing, ..
            } => {
                let logp = args[0];
                if logp.rank() != 2 || logp.shape()[0] != targets.len() {
                    return Err(format!("{} targets for log-probs {:?}", targets.len(), logp.shape()));
                }
                let vocab = logp.shape()[1];
                let mut data = Vec::with_capacity(targets.len());
                for (r, &y) in targets.iter().enumerate() {
                    if y >= vocab {
                        return Err(format!("target {y} out of range for {vocab} classes"));
                    }
                    let row = logp.row(r);
                    let mut loss = -(1.0 - smoothing) * row[y];
                    if *smoothing > 0.0 {
                        loss -= smoothing / vocab as f64 * row.iter().sum::<f64>();
                    }
                    data.push(loss);
                }
                Ok(Tensor::from_parts(vec![targets.len(), 1], data))
            }
        }
    }

    /// Accumulates input gradients given the output value and its gradient.
    ///
    /// `grads[i]` is `Some` exactly for inputs that require a gradient.
    pub(crate) fn backward(&self, args: &[&Tensor], out: &Tensor, g: &[f64], grads: &mut [Option<&mut Vec<f64>>]) {
        match self {
            Op::Leaf => {}
            Op::Add(..) => {
                for slot in grads.iter_mut().flatten() {
                    add_into(slot, g);
                }
            }
            Op::Sub(..) => {
                if let Some(ga) = grads[0].as_mut() {
                    add_into(ga, g);
                }
                if let Some(gb) = grads[1].as_mut() {
                    gb.iter_mut().zip(g).for_each(|(d, v)| *d -= v);
                }
            }
            Op::Mul(..) => {
                let (a, b) = (args[0].data(), args[1].data());
                if let Some(ga) = grads[0].as_mut() {
                    for ((d, gv), bv) in ga.iter_mut().zip(g).zip(b) {
                        *d += gv * bv;
                    }
                }
                if let Some(gb) = grads[1].as_mut() {
                    for ((d, gv), av) in gb.iter_mut().zip(g).zip(a) {
                        *d += gv * av;
                    }
                }
            }
            Op::AddBias(..) => {
                if let Some(gx) = grads[0].as_mut() {
                    add_into(gx, g);
                }
                if let Some(gb) = grads[1].as_mut() {
                    let n = gb.len();
                    for row in g.chunks(n) {
                        add_into(gb, row);
                    }
                }
            }
            Op::MatMul(..) => {
                let (a, b) = (args[0], args[1]);
                let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
                if let Some(ga) = grads[0].as_mut() {
                    gemm_nt_acc(ga, g, b.data(), m, n, k);
                }
                if let Some(gb) = grads[1].as_mut() {
                    gemm_tn_acc(gb, a.data(), g, m, k, n);
                }
            }
            Op::BatchMatMul(..) => {
                let (a, b) = (args[0], args[1]);
                let (bs, m, k, n) = (a.shape()[0], a.shape()[1], a.shape()[2], b.shape()[2]);
                for s in 0..bs {
                    let gs = &g[s * m * n..(s + 1) * m * n];
                    if let Some(ga) = grads[0].as_mut() {
                        let bb = &b.data()[s * k * n..(s + 1) * k * n];
                        gemm_nt_acc(&mut ga[s * m * k..(s + 1) * m * k], gs, bb, m, n, k);
                    }
                    if let Some(gb) = grads[1].as_mut() {
                        let ab = &a.data()[s * m * k..(s + 1) * m * k];
                        gemm_tn_acc(&mut gb[s * k * n..(s + 1) * k * n], ab, gs, m, k, n);
                    }
                }
            }
            Op::TransposeLast2(..) => {
                if let Some(gx) = grads[0].as_mut() {
                    let x = args[0];
                    let r = x.rank();
                    let (rows, cols) = (x.shape()[r - 2], x.shape()[r - 1]);
                    for (blk, gsrc) in g.chunks(rows * cols).enumerate() {
                        let dst = &mut gx[blk * rows * cols..(blk + 1) * rows * cols];
                        for i in 0..rows {
                            for j in 0..cols {
                                dst[i * cols + j] += gsrc[j * rows + i];
                            }
                        }
                    }
                }
            }
            Op::Reshape(..) | Op::AddScalar(..) => {
                if let Some(gx) = grads[0].as_mut() {
                    add_into(gx, g);
                }
            }
            Op::Gather { ids, .. } => {
                if let Some(gt) = grads[0].as_mut() {
                    let width = args[0].shape()[1];
                    for (r, &id) in ids.iter().enumerate() {
                        add_into(&mut gt[id * width..(id + 1) * width], &g[r * width..(r + 1) * width]);
                    }
                }
            }
            Op::Softmax(..) => {
                if let Some(gx) = grads[0].as_mut() {
                    let width = out.last_dim();
                    for (r, (y, gr)) in out.data().chunks(width).zip(g.chunks(width)).enumerate() {
                        let dot: f64 = y.iter().zip(gr).map(|(a, b)| a * b).sum();
                        let dst = &mut gx[r * width..(r + 1) * width];
                        for ((d, yv), gv) in dst.iter_mut().zip(y).zip(gr) {
                            *d += yv * (gv - dot);
                        }
                    }
                }
            }
            Op::LogSoftmax(..) => {
                if let Some(gx) = grads[0].as_mut() {
                    let width = out.last_dim();
                    for (r, (y, gr)) in out.data().chunks(width).zip(g.chunks(width)).enumerate() {
                        let total: f64 = gr.iter().sum();
                        let dst = &mut gx[r * width..(r + 1) * width];
                        for ((d, yv), gv) in dst.iter_mut().zip(y).zip(gr) {
                            *d += gv - yv.exp() * total;
                        }
                    }
                }
            }
            Op::Log(..) => unary(grads, g, args[0].data(), |gv, x| gv / x),
            Op::Exp(..) => unary(grads, g, out.data(), |gv, y| gv * y),
            Op::Tanh(..) => unary(grads, g, out.data(), |gv, y| gv * (1.0 - y * y)),
            Op::Sigmoid(..) => unary(grads, g, out.data(), |gv, y| gv * y * (1.0 - y)),
            Op::Relu(..) => unary(grads, g, args[0].data(), |gv, x| if x > 0.0 { gv } else { 0.0 }),
            Op::Concat(..) => {
                let width = out.last_dim();
                let rows = out.numel() / width;
                let mut offset = 0;
                for (slot, a) in grads.iter_mut().zip(args) {
                    let w = a.last_dim();
                    if let Some(ga) = slot.as_mut() {
                        for r in 0..rows {
                            add_into(&mut ga[r * w..(r + 1) * w], &g[r * width + offset..r * width + offset + w]);
                        }
                    }
                    offset += w;
                }
            }
            Op::Slice { start, len, .. } => {
                if let Some(gx) = grads[0].as_mut() {
                    let width = args[0].last_dim();
                    for (r, gr) in g.chunks(*len).enumerate() {
                        add_into(&mut gx[r * width + start..r * width + start + len], gr);
                    }
                }
            }
            Op::Scale(_, c) => {
                if let Some(gx) = grads[0].as_mut() {
                    gx.iter_mut().zip(g).for_each(|(d, v)| *d += c * v);
                }
            }
            Op::Sum(..) => {
                if let Some(gx) = grads[0].as_mut() {
                    gx.iter_mut().for_each(|d| *d += g[0]);
                }
            }
            Op::WeightedSum { weights, .. } => {
                if let Some(gx) = grads[0].as_mut() {
                    gx.iter_mut().zip(weights.iter()).for_each(|(d, w)| *d += g[0] * w);
                }
            }
            Op::Nll {
                targets, smoothing, ..
            } => {
                if let Some(gx) = grads[0].as_mut() {
                    let vocab = args[0].shape()[1];
                    let spread = smoothing / vocab as f64;
                    for (r, &y) in targets.iter().enumerate() {
                        let row = &mut gx[r * vocab..(r + 1) * vocab];
                        if spread > 0.0 {
                            row.iter_mut().for_each(|d| *d -= g[r] * spread);
                        }
                        row[y] -= g[r] * (1.0 - smoothing);
                    }
                }
            }
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax (or log-softmax) over the last axis with the row maximum subtracted.
pub(crate) fn row_softmax(x: &Tensor, log: bool) -> Tensor {
    let width = x.last_dim();
    let mut data = Vec::with_capacity(x.numel());
    for row in x.data().chunks(width) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = row.iter().map(|v| (v - max).exp()).sum();
        if log {
            let log_total = total.ln();
            data.extend(row.iter().map(|v| v - max - log_total));
        } else {
            data.extend(row.iter().map(|v| (v - max).exp() / total));
        }
    }
    Tensor::from_parts(x.shape().to_vec(), data)
}

fn zip_same(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor, String> {
    if a.shape() != b.shape() {
        return Err(format!("{:?} vs {:?}", a.shape(), b.shape()));
    }
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Ok(Tensor::from_parts(a.shape().to_vec(), data))
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

fn unary(grads: &mut [Option<&mut Vec<f64>>], g: &[f64], saved: &[f64], f: impl Fn(f64, f64) -> f64) {
    if let Some(gx) = grads[0].as_mut() {
        for ((d, &gv), &s) in gx.iter_mut().zip(g).zip(saved) {
            *d += f(gv, s);
        }
    }
}
