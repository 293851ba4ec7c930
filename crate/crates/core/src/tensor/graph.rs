//! Tape-based reverse-mode differentiation.
//!
//! Backward rules are themselves expressed as graph operations, so a gradient
//! can be differentiated again (needed for gradient-norm penalties).

use std::cell::RefCell;
use std::sync::Arc;

use super::array::{self as k, Tensor};
use super::scalar::Scalar;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    MulConst(usize, Arc<Tensor<T>>),
    Scale(usize, T),
    AddScalar(usize),
    Powf(usize, T),
    Tanh(usize),
    MatMul { a: usize, b: usize, ta: bool, tb: bool },
    Conv { x: usize, w: usize },
    ConvInputGrad { g: usize, w: usize },
    ConvKernelGrad { x: usize, g: usize },
    Upsample(usize),
    Downsample(usize),
    Reshape(usize),
    SumAxis(usize, usize),
    BroadcastAxis(usize, usize),
    ConcatLast(usize, usize),
    SliceLast { a: usize, start: usize },
    PadLast { a: usize, start: usize },
    AddBias(usize, usize),
    SumAll(usize),
    BroadcastScalar(usize),
    Softmax(usize),
    SoftmaxXent(usize, Arc<Vec<usize>>),
}

impl<T> Op<T> {
    fn parents(&self) -> Vec<usize> {
        use Op::*;
        match *self {
            Leaf => vec![],
            Add(a, b) | Sub(a, b) | Mul(a, b) | ConcatLast(a, b) | AddBias(a, b) => vec![a, b],
            MatMul { a, b, .. } => vec![a, b],
            Conv { x, w } => vec![x, w],
            ConvInputGrad { g, w } => vec![g, w],
            ConvKernelGrad { x, g } => vec![x, g],
            MulConst(a, _) | Scale(a, _) | AddScalar(a) | Powf(a, _) | Tanh(a) | Upsample(a) | Downsample(a)
            | Reshape(a) | SumAxis(a, _) | BroadcastAxis(a, _) | SumAll(a) | BroadcastScalar(a) | Softmax(a)
            | SoftmaxXent(a, _) => vec![a],
            SliceLast { a, .. } | PadLast { a, .. } => vec![a],
        }
    }
}

struct Node<T> {
    value: Arc<Tensor<T>>,
    op: Op<T>,
}

/// Records operations so they can be differentiated.
pub struct Graph<T> {
    nodes: RefCell<Vec<Node<T>>>,
}

/// Handle to a value recorded on a [`Graph`].
#[derive(Clone, Copy)]
pub struct Var<'g, T> {
    graph: &'g Graph<T>,
    id: usize,
}

impl<T> std::fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var({})", self.id)
    }
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: RefCell::new(Vec::new()) }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor<T>, op: Op<T>) -> Var<'_, T> {
        self.push_arc(Arc::new(value), op)
    }

    fn push_arc(&self, value: Arc<Tensor<T>>, op: Op<T>) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op });
        Var { graph: self, id: nodes.len() - 1 }
    }

    /// A leaf holding `t`.
    pub fn leaf(&self, t: Tensor<T>) -> Var<'_, T> {
        self.push(t, Op::Leaf)
    }

    /// A leaf sharing storage with `t`.
    pub fn shared(&self, t: Arc<Tensor<T>>) -> Var<'_, T> {
        self.push_arc(t, Op::Leaf)
    }

    fn value_of(&self, id: usize) -> Arc<Tensor<T>> {
        self.nodes.borrow()[id].value.clone()
    }

    fn var(&self, id: usize) -> Var<'_, T> {
        Var { graph: self, id }
    }

    /// Gradients of `out` (seeded with ones) with respect to each of `wrt`, as
    /// graph values. `None` marks inputs `out` does not depend on.
    pub fn grad<'g>(&'g self, out: Var<'g, T>, wrt: &[Var<'g, T>]) -> Result<Vec<Option<Var<'g, T>>>> {
        let seed = self.leaf(Tensor::ones(out.value().shape()));
        self.grad_with(out, seed, wrt)
    }

    /// Vector-Jacobian product of `out` against the cotangent `seed`.
    pub fn grad_with<'g>(&'g self, out: Var<'g, T>, seed: Var<'g, T>, wrt: &[Var<'g, T>]) -> Result<Vec<Option<Var<'g, T>>>> {
        if seed.value().shape() != out.value().shape() {
            return Err(Error::shape("grad", format!("seed {:?} for output {:?}", seed.value().shape(), out.value().shape())));
        }
        let Some(lo) = wrt.iter().map(|v| v.id).min() else {
            return Ok(Vec::new());
        };
        // Nodes between the inputs and the output.
        let mut live = vec![false; out.id + 1];
        {
            let nodes = self.nodes.borrow();
            for v in wrt {
                if v.id <= out.id {
                    live[v.id] = true;
                }
            }
            for i in lo..=out.id {
                if !live[i] && nodes[i].op.parents().iter().any(|&p| p >= lo && live[p]) {
                    live[i] = true;
                }
            }
        }
        let mut grads: Vec<Option<Var<'g, T>>> = vec![None; out.id + 1];
        if live[out.id] {
            grads[out.id] = Some(seed);
        }
        for i in (lo..=out.id).rev() {
            let Some(g) = grads[i] else { continue };
            let op = self.nodes.borrow()[i].op.clone();
            for (p, gp) in self.backward_rule(i, &op, g, |p| p >= lo && live[p])? {
                grads[p] = Some(match grads[p] {
                    Some(acc) => acc.add(gp)?,
                    None => gp,
                });
            }
        }
        Ok(wrt.iter().map(|v| if v.id <= out.id { grads[v.id] } else { None }).collect())
    }

    /// Concrete gradients of a scalar loss, zero-filled for inputs it does not depend on.
    pub fn backward(&self, loss: Var<'_, T>, wrt: &[Var<'_, T>]) -> Result<Vec<Tensor<T>>> {
        if loss.value().len() != 1 {
            return Err(Error::shape("backward", format!("loss must be scalar, got {:?}", loss.value().shape())));
        }
        let out = loss;
        let grads = self.grad(out, wrt)?;
        Ok(grads
            .iter()
            .zip(wrt)
            .map(|(g, v)| match g {
                Some(g) => g.value().as_ref().clone(),
                None => Tensor::zeros(v.value().shape()),
            })
            .collect())
    }

    /// Parent gradients of node `id` given its output gradient `g`, computed only for
    /// parents selected by `need`.
    fn backward_rule<'g>(
        &'g self,
        id: usize,
        op: &Op<T>,
        g: Var<'g, T>,
        need: impl Fn(usize) -> bool,
    ) -> Result<Vec<(usize, Var<'g, T>)>> {
        use Op::*;
        let v = |i| self.var(i);
        let shape_of = |i: usize| self.value_of(i).shape().to_vec();
        let mut out = Vec::with_capacity(2);
        macro_rules! emit {
            ($p:expr, $grad:expr) => {
                if need($p) {
                    out.push(($p, $grad));
                }
            };
        }
        match op {
            Leaf => {}
            Add(a, b) => {
                emit!(*a, g);
                emit!(*b, g);
            }
            Sub(a, b) => {
                emit!(*a, g);
                emit!(*b, g.scale(T::lit(-1.0)));
            }
            Mul(a, b) => {
                emit!(*a, g.mul(v(*b))?);
                emit!(*b, g.mul(v(*a))?);
            }
            MulConst(a, m) => emit!(*a, g.mul_const(m.clone())?),
            Scale(a, c) => emit!(*a, g.scale(*c)),
            AddScalar(a) => emit!(*a, g),
            Powf(a, p) => emit!(*a, g.mul(v(*a).powf(*p - T::one()).scale(*p))?),
            Tanh(a) => {
                let y = v(id);
                emit!(*a, g.mul(y.mul(y)?.scale(T::lit(-1.0)).add_scalar(T::one()))?);
            }
            MatMul { a, b, ta, tb } => {
                let (va, vb) = (v(*a), v(*b));
                emit!(*a, if *ta { vb.matmul_t(g, *tb, true)? } else { g.matmul_t(vb, false, !*tb)? });
                emit!(*b, if *tb { g.matmul_t(va, true, *ta)? } else { va.matmul_t(g, !*ta, false)? });
            }
            Conv { x, w } => {
                let kk = shape_of(*w)[0];
                emit!(*x, g.conv_input_grad(v(*w))?);
                emit!(*w, v(*x).conv_kernel_grad(g, kk)?);
            }
            ConvInputGrad { g: gi, w } => {
                let kk = shape_of(*w)[0];
                emit!(*gi, g.conv2d(v(*w))?);
                emit!(*w, g.conv_kernel_grad(v(*gi), kk)?);
            }
            ConvKernelGrad { x, g: gi, .. } => {
                emit!(*x, v(*gi).conv_input_grad(g)?);
                emit!(*gi, v(*x).conv2d(g)?);
            }
            Upsample(a) => emit!(*a, g.downsample2x()?.scale(T::lit(4.0))),
            Downsample(a) => emit!(*a, g.upsample2x()?.scale(T::lit(0.25))),
            Reshape(a) => emit!(*a, g.reshape(&shape_of(*a))?),
            SumAxis(a, axis) => {
                let n = shape_of(*a)[*axis];
                emit!(*a, g.broadcast_axis(*axis, n)?);
            }
            BroadcastAxis(a, axis) => emit!(*a, g.sum_axis(*axis)?),
            ConcatLast(a, b) => {
                let ca = *shape_of(*a).last().unwrap();
                let cb = *shape_of(*b).last().unwrap();
                emit!(*a, g.slice_last(0, ca)?);
                emit!(*b, g.slice_last(ca, cb)?);
            }
            SliceLast { a, start } => {
                let total = *shape_of(*a).last().unwrap();
                emit!(*a, g.pad_last(*start, total)?);
            }
            PadLast { a, start } => {
                let c = *shape_of(*a).last().unwrap();
                emit!(*a, g.slice_last(*start, c)?);
            }
            AddBias(x, b) => {
                let c = shape_of(*b)[0];
                let rows = g.value().len() / c.max(1);
                emit!(*x, g);
                emit!(*b, g.reshape(&[rows, c])?.sum_axis(0)?);
            }
            SumAll(a) => emit!(*a, g.broadcast_scalar(&shape_of(*a))?),
            BroadcastScalar(a) => emit!(*a, g.sum_all().reshape(&shape_of(*a))?),
            Softmax(a) => {
                let y = v(id);
                let last = y.value().rank() - 1;
                let c = y.value().shape()[last];
                let inner = g.mul(y)?.sum_axis(last)?.broadcast_axis(last, c)?;
                emit!(*a, g.sub(inner)?.mul(y)?);
            }
            SoftmaxXent(a, labels) => {
                let shape = shape_of(*a);
                let (n, c) = (shape[0], shape[1]);
                let mut onehot = Tensor::zeros(&shape);
                for (r, &l) in labels.iter().enumerate() {
                    onehot.data_mut()[r * c + l] = T::one();
                }
                let diff = v(*a).softmax()?.sub(self.leaf(onehot))?;
                let scale = g.broadcast_scalar(&shape)?.scale(T::one() / T::lit(n as f64));
                emit!(*a, diff.mul(scale)?);
            }
        }
        Ok(out)
    }
}

impl<'g, T: Scalar> Var<'g, T> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn graph(&self) -> &'g Graph<T> {
        self.graph
    }

    pub fn value(&self) -> Arc<Tensor<T>> {
        self.graph.value_of(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    fn unary(self, t: Tensor<T>, op: Op<T>) -> Var<'g, T> {
        self.graph.push(t, op)
    }

    fn same_graph(self, other: Var<'g, T>, op: &'static str) -> Result<()> {
        if !std::ptr::eq(self.graph, other.graph) {
            return Err(Error::Invalid(format!("{op}: operands recorded on different graphs")));
        }
        Ok(())
    }

    pub fn add(self, o: Var<'g, T>) -> Result<Var<'g, T>> {
        self.same_graph(o, "add")?;
        let t = k::zip_map("add", &self.value(), &o.value(), |a, b| a + b)?;
        Ok(self.unary(t, Op::Add(self.id, o.id)))
    }

    pub fn sub(self, o: Var<'g, T>) -> Result<Var<'g, T>> {
        self.same_graph(o, "sub")?;
        let t = k::zip_map("sub", &self.value(), &o.value(), |a, b| a - b)?;
        Ok(self.unary(t, Op::Sub(self.id, o.id)))
    }

    pub fn mul(self, o: Var<'g, T>) -> Result<Var<'g, T>> {
        self.same_graph(o, "mul")?;
        let t = k::zip_map("mul", &self.value(), &o.value(), |a, b| a * b)?;
        Ok(self.unary(t, Op::Mul(self.id, o.id)))
    }

    /// Elementwise product with a constant tensor.
    pub fn mul_const(self, m: Arc<Tensor<T>>) -> Result<Var<'g, T>> {
        let t = k::zip_map("mul_const", &self.value(), &m, |a, b| a * b)?;
        Ok(self.unary(t, Op::MulConst(self.id, m)))
    }

    pub fn scale(self, c: T) -> Var<'g, T> {
        let t = self.value().map(|a| a * c);
        self.unary(t, Op::Scale(self.id, c))
    }

    pub fn add_scalar(self, c: T) -> Var<'g, T> {
        let t = self.value().map(|a| a + c);
        self.unary(t, Op::AddScalar(self.id))
    }

    pub fn powf(self, p: T) -> Var<'g, T> {
        let t = self.value().map(|a| a.powf(p));
        self.unary(t, Op::Powf(self.id, p))
    }

    pub fn tanh(self) -> Var<'g, T> {
        let t = self.value().map(|a| a.tanh());
        self.unary(t, Op::Tanh(self.id))
    }

    pub fn leaky_relu(self, slope: T) -> Var<'g, T> {
        let mask = Arc::new(self.value().map(|a| if a > T::zero() { T::one() } else { slope }));
        self.mul_const(mask).expect("mask has the input's shape")
    }

    pub fn matmul(self, o: Var<'g, T>) -> Result<Var<'g, T>> {
        self.matmul_t(o, false, false)
    }

    /// `op(self)·op(o)` where `ta`/`tb` select transposition.
    pub fn matmul_t(self, o: Var<'g, T>, ta: bool, tb: bool) -> Result<Var<'g, T>> {
        self.same_graph(o, "matmul")?;
        let t = k::matmul(&self.value(), &o.value(), ta, tb)?;
        Ok(self.unary(t, Op::MatMul { a: self.id, b: o.id, ta, tb }))
    }

    /// Same-padded stride-1 convolution of NHWC input with a `[k,k,in,out]` kernel.
    pub fn conv2d(self, w: Var<'g, T>) -> Result<Var<'g, T>> {
        self.same_graph(w, "conv2d")?;
        let t = k::conv2d(&self.value(), &w.value())?;
        Ok(self.unary(t, Op::Conv { x: self.id, w: w.id }))
    }

    fn conv_input_grad(self, w: Var<'g, T>) -> Result<Var<'g, T>> {
        let t = k::conv2d_input_grad(&self.value(), &w.value())?;
        Ok(self.unary(t, Op::ConvInputGrad { g: self.id, w: w.id }))
    }

    fn conv_kernel_grad(self, g: Var<'g, T>, kk: usize) -> Result<Var<'g, T>> {
        let t = k::conv2d_kernel_grad(&self.value(), &g.value(), kk)?;
        Ok(self.unary(t, Op::ConvKernelGrad { x: self.id, g: g.id }))
    }

    pub fn upsample2x(self) -> Result<Var<'g, T>> {
        let t = k::upsample2x(&self.value())?;
        Ok(self.unary(t, Op::Upsample(self.id)))
    }

    pub fn downsample2x(self) -> Result<Var<'g, T>> {
        let t = k::downsample2x(&self.value())?;
        Ok(self.unary(t, Op::Downsample(self.id)))
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Var<'g, T>> {
        let t = self.value().reshape(shape)?;
        Ok(self.unary(t, Op::Reshape(self.id)))
    }

    pub fn sum_axis(self, axis: usize) -> Result<Var<'g, T>> {
        let t = k::sum_axis(&self.value(), axis)?;
        Ok(self.unary(t, Op::SumAxis(self.id, axis)))
    }

    pub fn broadcast_axis(self, axis: usize, n: usize) -> Result<Var<'g, T>> {
        let t = k::broadcast_axis(&self.value(), axis, n)?;
        Ok(self.unary(t, Op::BroadcastAxis(self.id, axis)))
    }

    pub fn concat_last(self, o: Var<'g, T>) -> Result<Var<'g, T>> {
        self.same_graph(o, "concat_last")?;
        let t = k::concat_last(&self.value(), &o.value())?;
        Ok(self.unary(t, Op::ConcatLast(self.id, o.id)))
    }

    pub fn slice_last(self, start: usize, len: usize) -> Result<Var<'g, T>> {
        let t = k::slice_last(&self.value(), start, len)?;
        Ok(self.unary(t, Op::SliceLast { a: self.id, start }))
    }

    pub fn pad_last(self, start: usize, total: usize) -> Result<Var<'g, T>> {
        let t = k::pad_last(&self.value(), start, total)?;
        Ok(self.unary(t, Op::PadLast { a: self.id, start }))
    }

    pub fn add_bias(self, b: Var<'g, T>) -> Result<Var<'g, T>> {
        self.same_graph(b, "add_bias")?;
        let t = k::add_bias(&self.value(), &b.value())?;
        Ok(self.unary(t, Op::AddBias(self.id, b.id)))
    }

    pub fn sum_all(self) -> Var<'g, T> {
        let t = Tensor::scalar(self.value().sum());
        self.unary(t, Op::SumAll(self.id))
    }

    pub fn mean_all(self) -> Var<'g, T> {
        let n = self.value().len();
        self.sum_all().scale(T::one() / T::lit(n as f64))
    }

    /// Repeat a one-element value to fill `shape`.
    pub fn broadcast_scalar(self, shape: &[usize]) -> Result<Var<'g, T>> {
        let v = self.value();
        if v.len() != 1 {
            return Err(Error::shape("broadcast_scalar", format!("{:?} is not a single value", v.shape())));
        }
        let t = Tensor::full(shape, v.data()[0]);
        Ok(self.unary(t, Op::BroadcastScalar(self.id)))
    }

    /// Softmax over the last axis.
    pub fn softmax(self) -> Result<Var<'g, T>> {
        let t = k::softmax_last(&self.value())?;
        Ok(self.unary(t, Op::Softmax(self.id)))
    }

    /// Mean cross-entropy of `[n, classes]` logits against integer labels.
    pub fn softmax_xent(self, labels: &[usize]) -> Result<Var<'g, T>> {
        let t = k::softmax_xent(&self.value(), labels)?;
        Ok(self.unary(t, Op::SoftmaxXent(self.id, Arc::new(labels.to_vec()))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares_gradient() {
        let g = Graph::<f64>::new();
        let x = g.leaf(Tensor::from_f64(&[3], &[1.0, -2.0, 0.5]).unwrap());
        let loss = x.mul(x).unwrap().sum_all().scale(0.5);
        let dx = g.backward(loss, &[x]).unwrap();
        assert_eq!(dx[0].data(), &[1.0, -2.0, 0.5]);
    }

    #[test]
    fn sum_gradient_is_ones() {
        let g = Graph::<f64>::new();
        let x = g.leaf(Tensor::from_fn(&[2, 3], |i| i as f64));
        let dx = g.backward(x.sum_all(), &[x]).unwrap();
        assert_eq!(dx[0], Tensor::ones(&[2, 3]));
    }

    #[test]
    fn unrelated_input_gets_zero() {
        let g = Graph::<f64>::new();
        let x = g.leaf(Tensor::ones(&[2]));
        let y = g.leaf(Tensor::ones(&[3]));
        let loss = x.sum_all();
        assert!(g.grad(loss, &[y]).unwrap()[0].is_none());
        assert_eq!(g.backward(loss, &[y]).unwrap()[0], Tensor::zeros(&[3]));
    }

    #[test]
    fn leaky_relu_values() {
        let g = Graph::<f64>::new();
        let x = g.leaf(Tensor::from_f64(&[3], &[-1.0, 0.0, 2.0]).unwrap());
        assert_eq!(x.leaky_relu(0.2).value().data(), &[-0.2, 0.0, 2.0]);
    }

    #[test]
    fn second_derivative_of_cube() {
        let g = Graph::<f64>::new();
        let x = g.leaf(Tensor::scalar(3.0));
        let y = x.mul(x).unwrap().mul(x).unwrap();
        let dy = g.grad(y, &[x]).unwrap()[0].unwrap();
        assert_eq!(dy.value().item(), 27.0);
        let d2 = g.grad(dy, &[x]).unwrap()[0].unwrap();
        assert_eq!(d2.value().item(), 18.0);
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let g = Graph::<f64>::new();
        let x = g.leaf(Tensor::ones(&[2]));
        assert!(g.backward(x.scale(2.0), &[x]).is_err());
    }

    #[test]
    fn mismatched_shapes_are_reported() {
        let g = Graph::<f32>::new();
        let a = g.leaf(Tensor::ones(&[2]));
        let b = g.leaf(Tensor::ones(&[3]));
        let err = a.add(b).unwrap_err().to_string();
        assert!(err.contains("add") && err.contains("[2]") && err.contains("[3]"), "{err}");
    }
}
