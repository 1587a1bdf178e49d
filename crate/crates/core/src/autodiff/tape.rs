//! Reverse-mode differentiation over a recorded operation tape.
//!
//! Backward passes are themselves recorded as tape operations, so a gradient
//! is an ordinary [`Var`] that can be differentiated again. The R1 penalty
//! relies on this (gradient of a gradient norm).

use std::cell::RefCell;
use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::rc::Rc;

use crate::tensor::{ops, shape_err, Element, Tensor, TensorError};

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    Powf(usize, f64),
    Sigmoid(usize),
    Softplus(usize),
    LeakyRelu(usize, f64),
    /// `g` masked by the slope of leaky relu at `x`; zero derivative in `x`.
    LeakyGrad { g: usize, x: usize, alpha: f64 },
    MatMul(usize, usize),
    Transpose(usize),
    Conv2d(usize, usize),
    Conv2dWeightGrad { x: usize, g: usize },
    FlipTranspose(usize),
    Upsample2x(usize),
    SumPool2x(usize),
    BroadcastTo(usize),
    SumTo(usize),
    Reshape(usize),
}

impl Op {
    fn inputs(&self) -> Vec<usize> {
        use Op::*;
        match *self {
            Leaf => vec![],
            Add(a, b) | Sub(a, b) | Mul(a, b) | MatMul(a, b) | Conv2d(a, b) => vec![a, b],
            LeakyGrad { g, x, .. } => vec![g, x],
            Conv2dWeightGrad { x, g, .. } => vec![x, g],
            Scale(a, _) | AddScalar(a) | Powf(a, _) | Sigmoid(a) | Softplus(a)
            | LeakyRelu(a, _) | Transpose(a) | FlipTranspose(a) | Upsample2x(a)
            | SumPool2x(a) | BroadcastTo(a) | SumTo(a) | Reshape(a) => vec![a],
        }
    }
}

struct Node<T> {
    value: Rc<Tensor<T>>,
    op: Op,
}

/// An append-only record of operations. Node ids are positions on the tape,
/// so inputs always precede the nodes that consume them.
pub struct Tape<T: Element = f32> {
    nodes: RefCell<Vec<Node<T>>>,
}

impl<T: Element> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Handle to a value on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t, T: Element = f32> {
    tape: &'t Tape<T>,
    id: usize,
}

impl<T: Element> std::fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}{:?}", self.id, self.shape())
    }
}

impl<T: Element> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor<T>, op: Op) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Rc::new(value),
            op,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    /// Registers an input or parameter.
    pub fn leaf(&self, value: Tensor<T>) -> Var<'_, T> {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, id: usize) -> Rc<Tensor<T>> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    /// Hash of the sign pattern of every leaky-relu input on the tape. Two
    /// evaluations with equal signatures lie in the same linear piece of the
    /// network, which is what finite-difference checks require.
    pub fn kink_signature(&self) -> u64 {
        let nodes = self.nodes.borrow();
        let mut h = DefaultHasher::new();
        for node in nodes.iter() {
            if let Op::LeakyRelu(a, _) = node.op {
                for v in nodes[a].value.data() {
                    (*v >= T::zero()).hash(&mut h);
                }
            }
        }
        h.finish()
    }

    /// Gradients of the scalar `loss` with respect to each of `wrt`, recorded
    /// on the tape so they can be differentiated again. Inputs that `loss`
    /// does not depend on receive zeros.
    pub fn grad<'t>(
        &'t self,
        loss: Var<'t, T>,
        wrt: &[Var<'t, T>],
    ) -> Result<Vec<Var<'t, T>>, TensorError> {
        let n = loss.id + 1;
        if loss.value().len() != 1 {
            return Err(TensorError::Contract(format!(
                "loss must be scalar, got shape {:?}",
                loss.shape()
            )));
        }
        let ops: Vec<Op> = {
            let nodes = self.nodes.borrow();
            nodes[..n].iter().map(|nd| nd.op.clone()).collect()
        };
        let mut needs = vec![false; n];
        for w in wrt {
            if w.id < n {
                needs[w.id] = true;
            }
        }
        for (i, op) in ops.iter().enumerate() {
            for inp in op.inputs() {
                if inp >= i {
                    return Err(TensorError::Corruption(format!(
                        "node {i} references input {inp} that does not precede it"
                    )));
                }
                if needs[inp] {
                    needs[i] = true;
                }
            }
        }

        let mut adj: Vec<Option<Var<'t, T>>> = vec![None; n];
        if needs[loss.id] {
            adj[loss.id] = Some(self.leaf(Tensor::ones(loss.shape().as_slice())));
        }
        for i in (0..n).rev() {
            let Some(g) = adj[i] else { continue };
            if !needs[i] {
                continue;
            }
            let contributions = self.backward_node(i, &ops[i], g, &needs)?;
            for (inp, contrib) in contributions {
                adj[inp] = Some(match adj[inp] {
                    Some(prev) => prev.add(contrib)?,
                    None => contrib,
                });
            }
        }

        wrt.iter()
            .map(|w| match adj.get(w.id).copied().flatten() {
                Some(g) => Ok(g),
                None => Ok(self.leaf(Tensor::zeros(w.shape().as_slice()))),
            })
            .collect()
    }

    fn var(&self, id: usize) -> Var<'_, T> {
        Var { tape: self, id }
    }

    fn backward_node<'t>(
        &'t self,
        id: usize,
        op: &Op,
        g: Var<'t, T>,
        needs: &[bool],
    ) -> Result<Vec<(usize, Var<'t, T>)>, TensorError> {
        let v = |i: usize| self.var(i);
        let mut out = Vec::with_capacity(2);
        match *op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                if needs[a] {
                    out.push((a, g));
                }
                if needs[b] {
                    out.push((b, g));
                }
            }
            Op::Sub(a, b) => {
                if needs[a] {
                    out.push((a, g));
                }
                if needs[b] {
                    out.push((b, g.scale(-1.0)));
                }
            }
            Op::Mul(a, b) => {
                if needs[a] {
                    out.push((a, g.mul(v(b))?));
                }
                if needs[b] {
                    out.push((b, g.mul(v(a))?));
                }
            }
            Op::Scale(a, c) => out.push((a, g.scale(c))),
            Op::AddScalar(a) => out.push((a, g)),
            Op::Powf(a, p) => {
                let d = v(a).powf(p - 1.0).scale(p);
                out.push((a, g.mul(d)?));
            }
            Op::Sigmoid(a) => {
                let s = v(id);
                let ds = s.sub(s.mul(s)?)?;
                out.push((a, g.mul(ds)?));
            }
            Op::Softplus(a) => out.push((a, g.mul(v(a).sigmoid())?)),
            Op::LeakyRelu(a, alpha) => out.push((a, g.leaky_relu_grad(v(a), alpha)?)),
            Op::LeakyGrad { g: ga, x, alpha } => {
                if needs[ga] {
                    out.push((ga, g.leaky_relu_grad(v(x), alpha)?));
                }
            }
            Op::MatMul(a, b) => {
                if needs[a] {
                    out.push((a, g.matmul(v(b).transpose()?)?));
                }
                if needs[b] {
                    out.push((b, v(a).transpose()?.matmul(g)?));
                }
            }
            Op::Transpose(a) => out.push((a, g.transpose()?)),
            Op::Conv2d(x, k) => {
                if needs[x] {
                    out.push((x, g.conv2d(v(k).flip_transpose()?)?));
                }
                if needs[k] {
                    let ks = v(k).shape()[2];
                    out.push((k, v(x).conv2d_weight_grad(g, ks)?));
                }
            }
            Op::Conv2dWeightGrad { x, g: gg, .. } => {
                if needs[x] {
                    out.push((x, v(gg).conv2d(g.flip_transpose()?)?));
                }
                if needs[gg] {
                    out.push((gg, v(x).conv2d(g)?));
                }
            }
            Op::FlipTranspose(a) => out.push((a, g.flip_transpose()?)),
            Op::Upsample2x(a) => out.push((a, g.sum_pool2x()?)),
            Op::SumPool2x(a) => out.push((a, g.upsample2x()?)),
            Op::BroadcastTo(a) => out.push((a, g.sum_to(&v(a).shape())?)),
            Op::SumTo(a) => out.push((a, g.broadcast_to(&v(a).shape())?)),
            Op::Reshape(a) => out.push((a, g.reshape(&v(a).shape())?)),
        }
        Ok(out)
    }
}

impl<'t, T: Element> Var<'t, T> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape<T> {
        self.tape
    }

    pub fn value(&self) -> Rc<Tensor<T>> {
        self.tape.value(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].value.shape().to_vec()
    }

    fn unary(
        self,
        op: Op,
        f: impl FnOnce(&Tensor<T>) -> Result<Tensor<T>, TensorError>,
    ) -> Result<Var<'t, T>, TensorError> {
        let value = f(&self.value())?;
        Ok(self.tape.push(value, op))
    }

    fn binary(
        self,
        other: Var<'t, T>,
        op: Op,
        f: impl FnOnce(&Tensor<T>, &Tensor<T>) -> Result<Tensor<T>, TensorError>,
    ) -> Result<Var<'t, T>, TensorError> {
        let value = f(&self.value(), &other.value())?;
        Ok(self.tape.push(value, op))
    }

    pub fn add(self, o: Var<'t, T>) -> Result<Var<'t, T>, TensorError> {
        self.binary(o, Op::Add(self.id, o.id), ops::add)
    }

    pub fn sub(self, o: Var<'t, T>) -> Result<Var<'t, T>, TensorError> {
        self.binary(o, Op::Sub(self.id, o.id), ops::sub)
    }

    pub fn mul(self, o: Var<'t, T>) -> Result<Var<'t, T>, TensorError> {
        self.binary(o, Op::Mul(self.id, o.id), ops::mul)
    }

    pub fn scale(self, c: f64) -> Var<'t, T> {
        let value = ops::scale(&self.value(), c);
        self.tape.push(value, Op::Scale(self.id, c))
    }

    pub fn add_scalar(self, c: f64) -> Var<'t, T> {
        let value = ops::add_scalar(&self.value(), c);
        self.tape.push(value, Op::AddScalar(self.id))
    }

    pub fn powf(self, p: f64) -> Var<'t, T> {
        let value = ops::powf(&self.value(), p);
        self.tape.push(value, Op::Powf(self.id, p))
    }

    pub fn square(self) -> Result<Var<'t, T>, TensorError> {
        self.mul(self)
    }

    pub fn sigmoid(self) -> Var<'t, T> {
        let value = ops::sigmoid(&self.value());
        self.tape.push(value, Op::Sigmoid(self.id))
    }

    pub fn softplus(self) -> Var<'t, T> {
        let value = ops::softplus(&self.value());
        self.tape.push(value, Op::Softplus(self.id))
    }

    pub fn leaky_relu(self, alpha: f64) -> Var<'t, T> {
        let value = ops::leaky_relu(&self.value(), alpha);
        self.tape.push(value, Op::LeakyRelu(self.id, alpha))
    }

    fn leaky_relu_grad(self, x: Var<'t, T>, alpha: f64) -> Result<Var<'t, T>, TensorError> {
        self.binary(
            x,
            Op::LeakyGrad {
                g: self.id,
                x: x.id,
                alpha,
            },
            |g, xv| ops::leaky_relu_grad(g, xv, alpha),
        )
    }

    pub fn matmul(self, o: Var<'t, T>) -> Result<Var<'t, T>, TensorError> {
        self.binary(o, Op::MatMul(self.id, o.id), ops::matmul)
    }

    pub fn transpose(self) -> Result<Var<'t, T>, TensorError> {
        self.unary(Op::Transpose(self.id), ops::transpose2d)
    }

    /// Convolution without bias; `self` is the `[n,c,h,w]` input.
    pub fn conv2d(self, kernel: Var<'t, T>) -> Result<Var<'t, T>, TensorError> {
        self.binary(kernel, Op::Conv2d(self.id, kernel.id), ops::conv2d_nobias)
    }

    fn conv2d_weight_grad(self, g: Var<'t, T>, ks: usize) -> Result<Var<'t, T>, TensorError> {
        self.binary(
            g,
            Op::Conv2dWeightGrad {
                x: self.id,
                g: g.id,
            },
            |x, gv| ops::conv2d_weight_grad(x, gv, ks),
        )
    }

    fn flip_transpose(self) -> Result<Var<'t, T>, TensorError> {
        self.unary(Op::FlipTranspose(self.id), ops::flip_transpose_kernel)
    }

    pub fn upsample2x(self) -> Result<Var<'t, T>, TensorError> {
        self.unary(Op::Upsample2x(self.id), ops::upsample2x)
    }

    pub fn sum_pool2x(self) -> Result<Var<'t, T>, TensorError> {
        self.unary(Op::SumPool2x(self.id), ops::sum_pool2x)
    }

    pub fn avg_pool2x(self) -> Result<Var<'t, T>, TensorError> {
        Ok(self.sum_pool2x()?.scale(0.25))
    }

    pub fn broadcast_to(self, shape: &[usize]) -> Result<Var<'t, T>, TensorError> {
        self.unary(Op::BroadcastTo(self.id), |x| ops::broadcast_to(x, shape))
    }

    pub fn sum_to(self, shape: &[usize]) -> Result<Var<'t, T>, TensorError> {
        self.unary(Op::SumTo(self.id), |x| ops::sum_to(x, shape))
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Var<'t, T>, TensorError> {
        self.unary(Op::Reshape(self.id), |x| x.clone().reshape(shape))
    }

    /// Sum of all elements as a `[1]` tensor.
    pub fn sum(self) -> Result<Var<'t, T>, TensorError> {
        let ones = vec![1; self.shape().len()];
        self.sum_to(&ones)?.reshape(&[1])
    }

    pub fn mean(self) -> Result<Var<'t, T>, TensorError> {
        let n = self.value().len() as f64;
        Ok(self.sum()?.scale(1.0 / n))
    }

    /// Fully connected layer `x·W + b` with `b` of shape `[out]`.
    pub fn dense(self, w: Var<'t, T>, b: Var<'t, T>) -> Result<Var<'t, T>, TensorError> {
        let y = self.matmul(w)?;
        let ys = y.shape();
        let bs = b.shape();
        if bs.len() != 1 || bs[0] != ys[1] {
            return Err(shape_err("dense bias", &w.shape(), &bs));
        }
        let b = b.reshape(&[1, bs[0]])?.broadcast_to(&ys)?;
        y.add(b)
    }

    /// Convolution plus per-channel bias of shape `[co]`.
    pub fn conv2d_bias(self, k: Var<'t, T>, bias: Var<'t, T>) -> Result<Var<'t, T>, TensorError> {
        let y = self.conv2d(k)?;
        let ys = y.shape();
        let bs = bias.shape();
        if bs.len() != 1 || bs[0] != ys[1] {
            return Err(shape_err("conv2d bias", &k.shape(), &bs));
        }
        y.add(bias.reshape(&[1, bs[0], 1, 1])?.broadcast_to(&ys)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::scalar(3.0));
        let loss = x.square().unwrap();
        let g = tape.grad(loss, &[x]).unwrap();
        assert_eq!(g[0].value().data(), &[6.0]);
    }

    #[test]
    fn dense_bias_gradient_counts_batch() {
        let tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::from_f64_slice(&[3, 2], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let w = tape.leaf(Tensor::from_f64_slice(&[2, 2], &[0.5, -1.0, 2.0, 0.0]).unwrap());
        let b = tape.leaf(Tensor::zeros(&[2]));
        let loss = x.dense(w, b).unwrap().sum().unwrap();
        let g = tape.grad(loss, &[b]).unwrap();
        assert_eq!(g[0].value().data(), &[3.0, 3.0]);
    }

    #[test]
    fn unreachable_parameters_get_zero_gradient() {
        let tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::scalar(2.0));
        let unused = tape.leaf(Tensor::ones(&[2, 2]));
        let loss = x.scale(3.0);
        let g = tape.grad(loss, &[x, unused]).unwrap();
        assert_eq!(g[0].value().data(), &[3.0]);
        assert_eq!(*g[1].value(), Tensor::zeros(&[2, 2]));
    }

    #[test]
    fn non_scalar_loss_is_contract_error() {
        let tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::ones(&[2]));
        assert!(matches!(tape.grad(x, &[x]), Err(TensorError::Contract(_))));
    }

    #[test]
    fn second_derivative_through_recorded_backward() {
        // f(x) = x^3 -> f'(x) = 3x^2 -> d/dx (f'(x))^2 = 2·3x^2·6x = 36 x^3
        let tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::scalar(2.0));
        let f = x.mul(x).unwrap().mul(x).unwrap();
        let g = tape.grad(f, &[x]).unwrap()[0];
        assert_eq!(g.value().data(), &[12.0]);
        let h = tape.grad(g.square().unwrap(), &[x]).unwrap()[0];
        assert_eq!(h.value().data(), &[36.0 * 8.0]);
    }

    #[test]
    fn replay_is_bit_identical() {
        let run = || {
            let tape = Tape::<f32>::new();
            let x = tape.leaf(Tensor::from_f64_slice(&[1, 2, 4, 4], &(0..32).map(|v| (v as f64).sin()).collect::<Vec<_>>()).unwrap());
            let k = tape.leaf(Tensor::from_f64_slice(&[3, 2, 3, 3], &(0..54).map(|v| (v as f64 * 0.37).cos()).collect::<Vec<_>>()).unwrap());
            let y = x.conv2d(k).unwrap().leaky_relu(0.2).upsample2x().unwrap();
            y.value().to_le_bytes()
        };
        assert_eq!(run(), run());
    }
}
