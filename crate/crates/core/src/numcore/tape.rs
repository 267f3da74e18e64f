//! Execution tape for reverse-mode differentiation.
//!
//! Every operation records a node holding handles to its inputs and output.
//! Nodes are appended in execution order, so the record is topologically
//! sorted by construction; [`Tape::backward`] walks it once in reverse,
//! accumulating gradients into every tensor that carries gradient storage.
//! Recurrent models simply run their whole unrolled forward pass on one
//! per-example tape.

use std::cell::RefCell;

use crate::error::{Error, Result};
use crate::numcore::tensor::Tensor;

enum Node {
    MatVec { w: Tensor, x: Tensor, out: Tensor },
    Add { a: Tensor, b: Tensor, out: Tensor },
    Sub { a: Tensor, b: Tensor, out: Tensor },
    Hadamard { a: Tensor, b: Tensor, out: Tensor },
    Concat { parts: Vec<Tensor>, out: Tensor },
    Sigmoid { x: Tensor, out: Tensor },
    Tanh { x: Tensor, out: Tensor },
    Softmax { x: Tensor, out: Tensor },
    LogSoftmax { x: Tensor, out: Tensor },
    Sum { x: Tensor, out: Tensor },
    Scale { x: Tensor, factor: f64, out: Tensor },
    Abs { x: Tensor, out: Tensor },
}

/// Ordered record of executed operations.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

fn require_same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            op,
            lhs: a.shape(),
            rhs: b.shape(),
        });
    }
    Ok(())
}

fn require_rank1(op: &'static str, t: &Tensor) -> Result<()> {
    if t.rank() != 1 {
        return Err(Error::Rank {
            op,
            expected: 1,
            shape: t.shape(),
        });
    }
    Ok(())
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    fn push(&self, node: Node) {
        self.nodes.borrow_mut().push(node);
    }

    fn output(&self, data: Vec<f64>, shape: Vec<usize>, requires_grad: bool) -> Tensor {
        if requires_grad {
            if shape.len() == 1 {
                Tensor::param_vector(data)
            } else {
                Tensor::param_matrix(shape[0], shape[1], data).expect("internal shape invariant")
            }
        } else if shape.len() == 1 {
            Tensor::vector(data)
        } else {
            Tensor::matrix(shape[0], shape[1], data).expect("internal shape invariant")
        }
    }

    /// Matrix-vector product: `w` is rank-2 `[m, n]`, `x` rank-1 `[n]`.
    pub fn matvec(&self, w: &Tensor, x: &Tensor) -> Result<Tensor> {
        let wshape = w.shape();
        if wshape.len() != 2 {
            return Err(Error::Rank {
                op: "matvec",
                expected: 2,
                shape: wshape,
            });
        }
        require_rank1("matvec", x)?;
        let (m, n) = (wshape[0], wshape[1]);
        if x.len() != n {
            return Err(Error::ShapeMismatch {
                op: "matvec",
                lhs: wshape,
                rhs: x.shape(),
            });
        }
        let wd = w.data();
        let xd = x.data();
        let mut data = vec![0.0; m];
        for i in 0..m {
            let row = &wd[i * n..(i + 1) * n];
            data[i] = row.iter().zip(xd.iter()).map(|(a, b)| a * b).sum();
        }
        drop(wd);
        drop(xd);
        let out = self.output(data, vec![m], w.requires_grad() || x.requires_grad());
        self.push(Node::MatVec {
            w: w.clone(),
            x: x.clone(),
            out: out.clone(),
        });
        Ok(out)
    }

    /// Elementwise sum of equally shaped tensors.
    pub fn add(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        require_same_shape("add", a, b)?;
        let data = a
            .data()
            .iter()
            .zip(b.data().iter())
            .map(|(x, y)| x + y)
            .collect();
        let out = self.output(data, a.shape(), a.requires_grad() || b.requires_grad());
        self.push(Node::Add {
            a: a.clone(),
            b: b.clone(),
            out: out.clone(),
        });
        Ok(out)
    }

    /// Elementwise difference `a - b`.
    pub fn sub(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        require_same_shape("sub", a, b)?;
        let data = a
            .data()
            .iter()
            .zip(b.data().iter())
            .map(|(x, y)| x - y)
            .collect();
        let out = self.output(data, a.shape(), a.requires_grad() || b.requires_grad());
        self.push(Node::Sub {
            a: a.clone(),
            b: b.clone(),
            out: out.clone(),
        });
        Ok(out)
    }

    /// Elementwise (Hadamard) product.
    pub fn hadamard(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        require_same_shape("hadamard", a, b)?;
        let data = a
            .data()
            .iter()
            .zip(b.data().iter())
            .map(|(x, y)| x * y)
            .collect();
        let out = self.output(data, a.shape(), a.requires_grad() || b.requires_grad());
        self.push(Node::Hadamard {
            a: a.clone(),
            b: b.clone(),
            out: out.clone(),
        });
        Ok(out)
    }

    /// End-to-end concatenation of rank-1 tensors.
    pub fn concat(&self, parts: &[&Tensor]) -> Result<Tensor> {
        if parts.is_empty() {
            return Err(Error::Contract("concat of zero tensors".into()));
        }
        let mut data = Vec::new();
        let mut requires_grad = false;
        for p in parts {
            require_rank1("concat", p)?;
            data.extend_from_slice(&p.data());
            requires_grad |= p.requires_grad();
        }
        let n = data.len();
        let out = self.output(data, vec![n], requires_grad);
        self.push(Node::Concat {
            parts: parts.iter().map(|p| (*p).clone()).collect(),
            out: out.clone(),
        });
        Ok(out)
    }

    /// Elementwise logistic sigmoid.
    pub fn sigmoid(&self, x: &Tensor) -> Result<Tensor> {
        let data = x.data().iter().map(|&v| 1.0 / (1.0 + (-v).exp())).collect();
        let out = self.output(data, x.shape(), x.requires_grad());
        self.push(Node::Sigmoid {
            x: x.clone(),
            out: out.clone(),
        });
        Ok(out)
    }

    /// Elementwise hyperbolic tangent.
    pub fn tanh(&self, x: &Tensor) -> Result<Tensor> {
        let data = x.data().iter().map(|&v| v.tanh()).collect();
        let out = self.output(data, x.shape(), x.requires_grad());
        self.push(Node::Tanh {
            x: x.clone(),
            out: out.clone(),
        });
        Ok(out)
    }

    /// Numerically stabilized softmax over a rank-1 tensor; the output is a
    /// strictly positive probability vector.
    pub fn softmax(&self, x: &Tensor) -> Result<Tensor> {
        require_rank1("softmax", x)?;
        if x.is_empty() {
            return Err(Error::Contract("softmax of an empty tensor".into()));
        }
        let xd = x.to_vec();
        let max = xd.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = xd.iter().map(|&v| (v - max).exp()).collect();
        let denom: f64 = exps.iter().sum();
        let data = exps.iter().map(|&e| e / denom).collect();
        let out = self.output(data, x.shape(), x.requires_grad());
        self.push(Node::Softmax {
            x: x.clone(),
            out: out.clone(),
        });
        Ok(out)
    }

    /// Log of the stabilized softmax.
    pub fn log_softmax(&self, x: &Tensor) -> Result<Tensor> {
        require_rank1("log_softmax", x)?;
        if x.is_empty() {
            return Err(Error::Contract("log_softmax of an empty tensor".into()));
        }
        let xd = x.to_vec();
        let max = xd.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_denom = xd.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        let data = xd.iter().map(|&v| v - max - log_denom).collect();
        let out = self.output(data, x.shape(), x.requires_grad());
        self.push(Node::LogSoftmax {
            x: x.clone(),
            out: out.clone(),
        });
        Ok(out)
    }

    /// Sum of all entries, as a single-element tensor.
    pub fn sum(&self, x: &Tensor) -> Result<Tensor> {
        let total: f64 = x.data().iter().sum();
        let out = self.output(vec![total], vec![1], x.requires_grad());
        self.push(Node::Sum {
            x: x.clone(),
            out: out.clone(),
        });
        Ok(out)
    }

    /// Multiplication by a constant.
    pub fn scale(&self, x: &Tensor, factor: f64) -> Result<Tensor> {
        let data = x.data().iter().map(|&v| v * factor).collect();
        let out = self.output(data, x.shape(), x.requires_grad());
        self.push(Node::Scale {
            x: x.clone(),
            factor,
            out: out.clone(),
        });
        Ok(out)
    }

    /// Elementwise absolute value; the subgradient at zero is zero.
    pub fn abs(&self, x: &Tensor) -> Result<Tensor> {
        let data = x.data().iter().map(|&v| v.abs()).collect();
        let out = self.output(data, x.shape(), x.requires_grad());
        self.push(Node::Abs {
            x: x.clone(),
            out: out.clone(),
        });
        Ok(out)
    }

    /// Reverse pass from a scalar loss. Gradients accumulate into every
    /// leaf tensor the loss depends on; repeated calls without `zero_grad`
    /// keep accumulating. Grads of op outputs (non-leaves) are reset at the
    /// start of each pass so repeat calls stay linear.
    pub fn backward(&self, loss: &Tensor) -> Result<()> {
        if loss.len() != 1 {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                loss.shape()
            )));
        }
        let nodes = self.nodes.borrow();
        for node in nodes.iter() {
            node_output(node).zero_grad();
        }
        loss.accumulate_grad(&[1.0]);
        for node in nodes.iter().rev() {
            step_backward(node);
        }
        Ok(())
    }
}

fn node_output(node: &Node) -> &Tensor {
    match node {
        Node::MatVec { out, .. }
        | Node::Add { out, .. }
        | Node::Sub { out, .. }
        | Node::Hadamard { out, .. }
        | Node::Concat { out, .. }
        | Node::Sigmoid { out, .. }
        | Node::Tanh { out, .. }
        | Node::Softmax { out, .. }
        | Node::LogSoftmax { out, .. }
        | Node::Sum { out, .. }
        | Node::Scale { out, .. }
        | Node::Abs { out, .. } => out,
    }
}

fn step_backward(node: &Node) {
    // A missing gradient buffer on the output means nothing downstream
    // consumed it; the node contributes nothing.
    match node {
        Node::MatVec { w, x, out } => {
            let Some(g) = out.grad_or_none() else { return };
            let (m, n) = (w.shape()[0], w.shape()[1]);
            if w.requires_grad() {
                let xd = x.to_vec();
                let mut dw = vec![0.0; m * n];
                for i in 0..m {
                    for j in 0..n {
                        dw[i * n + j] = g[i] * xd[j];
                    }
                }
                w.accumulate_grad(&dw);
            }
            if x.requires_grad() {
                let wd = w.to_vec();
                let mut dx = vec![0.0; n];
                for i in 0..m {
                    for j in 0..n {
                        dx[j] += wd[i * n + j] * g[i];
                    }
                }
                x.accumulate_grad(&dx);
            }
        }
        Node::Add { a, b, out } => {
            let Some(g) = out.grad_or_none() else { return };
            a.accumulate_grad(&g);
            b.accumulate_grad(&g);
        }
        Node::Sub { a, b, out } => {
            let Some(g) = out.grad_or_none() else { return };
            a.accumulate_grad(&g);
            let neg: Vec<f64> = g.iter().map(|v| -v).collect();
            b.accumulate_grad(&neg);
        }
        Node::Hadamard { a, b, out } => {
            let Some(g) = out.grad_or_none() else { return };
            let ad = a.to_vec();
            let bd = b.to_vec();
            let da: Vec<f64> = g.iter().zip(&bd).map(|(gi, bi)| gi * bi).collect();
            let db: Vec<f64> = g.iter().zip(&ad).map(|(gi, ai)| gi * ai).collect();
            a.accumulate_grad(&da);
            b.accumulate_grad(&db);
        }
        Node::Concat { parts, out } => {
            let Some(g) = out.grad_or_none() else { return };
            let mut offset = 0;
            for p in parts {
                let len = p.len();
                p.accumulate_grad(&g[offset..offset + len]);
                offset += len;
            }
        }
        Node::Sigmoid { x, out } => {
            let Some(g) = out.grad_or_none() else { return };
            let s = out.to_vec();
            let dx: Vec<f64> = g
                .iter()
                .zip(&s)
                .map(|(gi, si)| gi * si * (1.0 - si))
                .collect();
            x.accumulate_grad(&dx);
        }
        Node::Tanh { x, out } => {
            let Some(g) = out.grad_or_none() else { return };
            let t = out.to_vec();
            let dx: Vec<f64> = g.iter().zip(&t).map(|(gi, ti)| gi * (1.0 - ti * ti)).collect();
            x.accumulate_grad(&dx);
        }
        Node::Softmax { x, out } => {
            let Some(g) = out.grad_or_none() else { return };
            let y = out.to_vec();
            let dot: f64 = g.iter().zip(&y).map(|(gi, yi)| gi * yi).sum();
            let dx: Vec<f64> = g.iter().zip(&y).map(|(gi, yi)| yi * (gi - dot)).collect();
            x.accumulate_grad(&dx);
        }
        Node::LogSoftmax { x, out } => {
            let Some(g) = out.grad_or_none() else { return };
            let soft: Vec<f64> = out.to_vec().iter().map(|&v| v.exp()).collect();
            let gsum: f64 = g.iter().sum();
            let dx: Vec<f64> = g
                .iter()
                .zip(&soft)
                .map(|(gi, si)| gi - si * gsum)
                .collect();
            x.accumulate_grad(&dx);
        }
        Node::Sum { x, out } => {
            let Some(g) = out.grad_or_none() else { return };
            let dx = vec![g[0]; x.len()];
            x.accumulate_grad(&dx);
        }
        Node::Scale { x, factor, out } => {
            let Some(g) = out.grad_or_none() else { return };
            let dx: Vec<f64> = g.iter().map(|gi| gi * factor).collect();
            x.accumulate_grad(&dx);
        }
        Node::Abs { x, out } => {
            let Some(g) = out.grad_or_none() else { return };
            let xd = x.to_vec();
            let dx: Vec<f64> = g
                .iter()
                .zip(&xd)
                .map(|(gi, xi)| {
                    if *xi > 0.0 {
                        *gi
                    } else if *xi < 0.0 {
                        -gi
                    } else {
                        0.0
                    }
                })
                .collect();
            x.accumulate_grad(&dx);
        }
    }
}
