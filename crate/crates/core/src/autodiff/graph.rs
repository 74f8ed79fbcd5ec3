//! Tape-based reverse-mode differentiation.
//!
//! Every operation appends a node to the tape, so node order is already a
//! topological order. `backward` walks the tape once from the loss towards
//! the leaves, visiting each node exactly once.

use std::collections::BTreeMap;

use super::tensor::Tensor;
use crate::error::{contract, shape_err, Result};

/// Handle to a value recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    MulCol(Var, Var),
    DivCol(Var, Var),
    Scale(Var, f64),
    MulConst(Var, Vec<f64>),
    Relu(Var),
    Exp(Var),
    Sin(Var),
    Cos(Var),
    Square(Var),
    Concat {
        inputs: Vec<Var>,
        outer: usize,
        widths: Vec<usize>,
    },
    MaxReduce {
        input: Var,
        argmax: Vec<usize>,
    },
    SumReduce {
        input: Var,
        outer: usize,
        len: usize,
        inner: usize,
    },
    Cross3(Var, Var),
    L2Norm(Var),
    Normalize3(Var),
    Gather {
        input: Var,
        idx: Vec<usize>,
    },
    NeighborMax {
        a: Var,
        b: Var,
        /// Row of `b` that won each output entry.
        argmax: Vec<usize>,
    },
    Reshape(Var),
    SliceRows {
        input: Var,
        start: usize,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Gradients of a scalar with respect to every registered parameter.
pub type Gradients = BTreeMap<String, Tensor>;

/// Operation tape.
pub struct Graph {
    nodes: Vec<Node>,
    params: Vec<(String, Var)>,
    grad_enabled: bool,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

/// `c (+)= a * b` for strided row-major operands.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (isize, isize),
    b: &[f64],
    b_strides: (isize, isize),
    c: &mut [f64],
    accumulate: bool,
) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if !accumulate {
            c.iter_mut().for_each(|v| *v = 0.0);
        }
        return;
    }
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the callers pass slices whose lengths cover the strided views
    // (m x k, k x n and m x n respectively).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Graph {
    /// A tape that records operations for differentiation.
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: Vec::new(),
            grad_enabled: true,
        }
    }

    /// A tape that only evaluates values.
    pub fn inference() -> Self {
        Self {
            grad_enabled: false,
            ..Self::new()
        }
    }

    pub fn grad_enabled(&self) -> bool {
        self.grad_enabled
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let needs_grad = self.grad_enabled && inputs.iter().any(|&v| self.needs(v));
        let op = if needs_grad { op } else { Op::Leaf };
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Registers a named trainable leaf.
    pub fn param(&mut self, name: &str, t: Tensor) -> Var {
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
            needs_grad: self.grad_enabled,
        });
        let v = Var(self.nodes.len() - 1);
        self.params.push((name.to_string(), v));
        v
    }

    pub fn params(&self) -> &[(String, Var)] {
        &self.params
    }

    // ---- linear algebra ----

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return shape_err("matmul", format!("{:?} x {:?}", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            self.value(a).data(),
            (k as isize, 1),
            self.value(b).data(),
            (n as isize, 1),
            &mut out,
            false,
        );
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMul(a, b), &[a, b]))
    }

    /// Elementwise sum; `b` may also be a single row broadcast over the
    /// leading dimension of `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa == sb {
            let out = zip(self.value(a), self.value(b), |x, y| x + y);
            return Ok(self.push(out, Op::Add(a, b), &[a, b]));
        }
        if !sa.is_empty() && sa[1..] == sb[..] {
            let w = self.value(b).numel();
            let bd = self.value(b).data();
            let data = self
                .value(a)
                .data()
                .chunks_exact(w.max(1))
                .flat_map(|r| r.iter().zip(bd).map(|(x, y)| x + y))
                .collect();
            let out = Tensor::new(sa, data)?;
            return Ok(self.push(out, Op::AddRow(a, b), &[a, b]));
        }
        shape_err("add", format!("{:?} + {:?}", sa, sb))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return shape_err(op, format!("{:?} vs {:?}", self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = zip(self.value(a), self.value(b), |x, y| x - y);
        Ok(self.push(out, Op::Sub(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = zip(self.value(a), self.value(b), |x, y| x * y);
        Ok(self.push(out, Op::Mul(a, b), &[a, b]))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("div", a, b)?;
        let out = zip(self.value(a), self.value(b), |x, y| x / y);
        Ok(self.push(out, Op::Div(a, b), &[a, b]))
    }

    fn col_check(&self, op: &'static str, a: Var, s: Var) -> Result<usize> {
        let (sa, ss) = (self.shape(a), self.shape(s));
        if sa.is_empty() || ss.len() != 1 || ss[0] != sa[0] {
            return shape_err(op, format!("{:?} by {:?}", sa, ss));
        }
        Ok(self.value(a).row_len())
    }

    /// Scales row `i` of `a` by `s[i]`.
    pub fn mul_col(&mut self, a: Var, s: Var) -> Result<Var> {
        let w = self.col_check("mul_col", a, s)?;
        let out = row_scale(self.value(a), self.value(s), w, |x, y| x * y);
        Ok(self.push(out, Op::MulCol(a, s), &[a, s]))
    }

    /// Divides row `i` of `a` by `s[i]`.
    pub fn div_col(&mut self, a: Var, s: Var) -> Result<Var> {
        let w = self.col_check("div_col", a, s)?;
        let out = row_scale(self.value(a), self.value(s), w, |x, y| x / y);
        Ok(self.push(out, Op::DivCol(a, s), &[a, s]))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = map(self.value(a), |x| x * c);
        self.push(out, Op::Scale(a, c), &[a])
    }

    /// Elementwise product with a constant tensor (masks, signs).
    pub fn mul_const(&mut self, a: Var, c: &Tensor) -> Result<Var> {
        if self.shape(a) != c.shape() {
            return shape_err("mul_const", format!("{:?} vs {:?}", self.shape(a), c.shape()));
        }
        let out = zip(self.value(a), c, |x, y| x * y);
        Ok(self.push(out, Op::MulConst(a, c.data().to_vec()), &[a]))
    }

    // ---- elementwise nonlinearities ----

    pub fn relu(&mut self, a: Var) -> Var {
        let out = map(self.value(a), |x| if x > 0.0 { x } else { 0.0 });
        self.push(out, Op::Relu(a), &[a])
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = map(self.value(a), f64::exp);
        self.push(out, Op::Exp(a), &[a])
    }

    pub fn sin(&mut self, a: Var) -> Var {
        let out = map(self.value(a), f64::sin);
        self.push(out, Op::Sin(a), &[a])
    }

    pub fn cos(&mut self, a: Var) -> Var {
        let out = map(self.value(a), f64::cos);
        self.push(out, Op::Cos(a), &[a])
    }

    pub fn square(&mut self, a: Var) -> Var {
        let out = map(self.value(a), |x| x * x);
        self.push(out, Op::Square(a), &[a])
    }

    // ---- structural ----

    /// Concatenates along `axis`; all other dimensions must agree.
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let Some(&first) = inputs.first() else {
            return shape_err("concat", "no inputs");
        };
        let base = self.shape(first).to_vec();
        if axis >= base.len() {
            return shape_err("concat", format!("axis {} for {:?}", axis, base));
        }
        let mut widths = Vec::with_capacity(inputs.len());
        let mut total = 0;
        for &v in inputs {
            let s = self.shape(v);
            if s.len() != base.len()
                || s.iter()
                    .zip(&base)
                    .enumerate()
                    .any(|(d, (x, y))| d != axis && x != y)
            {
                return shape_err("concat", format!("{:?} vs {:?}", s, base));
            }
            total += s[axis];
            let (_, len, inner) = split_axis(s, axis);
            widths.push(len * inner);
        }
        let outer: usize = base[..axis].iter().product();
        let mut data = Vec::with_capacity(outer * widths.iter().sum::<usize>());
        for o in 0..outer {
            for (&v, &w) in inputs.iter().zip(&widths) {
                data.extend_from_slice(&self.value(v).data()[o * w..(o + 1) * w]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let out = Tensor::new(shape, data)?;
        Ok(self.push(
            out,
            Op::Concat {
                inputs: inputs.to_vec(),
                outer,
                widths,
            },
            inputs,
        ))
    }

    /// Maximum along `axis` (removed from the shape). Ties route the
    /// gradient to the first maximal element.
    pub fn max_reduce(&mut self, a: Var, axis: usize) -> Result<Var> {
        let s = self.shape(a).to_vec();
        if axis >= s.len() || s[axis] == 0 {
            return shape_err("max_reduce", format!("axis {} for {:?}", axis, s));
        }
        let (outer, len, inner) = split_axis(&s, axis);
        let src = self.value(a).data();
        let mut data = vec![f64::NEG_INFINITY; outer * inner];
        let mut argmax = vec![0; outer * inner];
        for o in 0..outer {
            for l in 0..len {
                let base = (o * len + l) * inner;
                for i in 0..inner {
                    let x = src[base + i];
                    let slot = o * inner + i;
                    if x > data[slot] || l == 0 {
                        data[slot] = x;
                        argmax[slot] = base + i;
                    }
                }
            }
        }
        let mut shape = s;
        shape.remove(axis);
        let out = Tensor::new(shape, data)?;
        Ok(self.push(out, Op::MaxReduce { input: a, argmax }, &[a]))
    }

    /// Sum along `axis` (removed from the shape).
    pub fn sum_reduce(&mut self, a: Var, axis: usize) -> Result<Var> {
        let s = self.shape(a).to_vec();
        if axis >= s.len() {
            return shape_err("sum_reduce", format!("axis {} for {:?}", axis, s));
        }
        let (outer, len, inner) = split_axis(&s, axis);
        let src = self.value(a).data();
        let mut data = vec![0.0; outer * inner];
        for o in 0..outer {
            for l in 0..len {
                let base = (o * len + l) * inner;
                let dst = &mut data[o * inner..(o + 1) * inner];
                for (d, x) in dst.iter_mut().zip(&src[base..base + inner]) {
                    *d += x;
                }
            }
        }
        let mut shape = s;
        shape.remove(axis);
        let out = Tensor::new(shape, data)?;
        Ok(self.push(
            out,
            Op::SumReduce {
                input: a,
                outer,
                len,
                inner,
            },
            &[a],
        ))
    }

    /// Sum of all elements as a rank-0 tensor.
    pub fn sum_all(&mut self, a: Var) -> Var {
        let n = self.value(a).numel();
        let total = self.value(a).data().iter().sum();
        self.push(
            Tensor::scalar(total),
            Op::SumReduce {
                input: a,
                outer: 1,
                len: n,
                inner: 1,
            },
            &[a],
        )
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let n = self.value(a).numel().max(1);
        let s = self.sum_all(a);
        self.scale(s, 1.0 / n as f64)
    }

    fn rows3(&self, op: &'static str, a: Var) -> Result<usize> {
        let s = self.shape(a);
        if s.len() != 2 || s[1] != 3 {
            return shape_err(op, format!("expected n x 3, got {:?}", s));
        }
        Ok(s[0])
    }

    /// Row-wise cross product of two `n x 3` tensors.
    pub fn cross3(&mut self, a: Var, b: Var) -> Result<Var> {
        self.rows3("cross3", a)?;
        self.same_shape("cross3", a, b)?;
        let data = self
            .value(a)
            .data()
            .chunks_exact(3)
            .zip(self.value(b).data().chunks_exact(3))
            .flat_map(|(x, y)| cross(x, y))
            .collect();
        let out = Tensor::new(self.shape(a).to_vec(), data)?;
        Ok(self.push(out, Op::Cross3(a, b), &[a, b]))
    }

    /// Row-wise Euclidean norm of an `n x 3` tensor.
    pub fn l2norm(&mut self, a: Var) -> Result<Var> {
        let n = self.rows3("l2norm", a)?;
        let data = self
            .value(a)
            .data()
            .chunks_exact(3)
            .map(|r| (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt())
            .collect();
        let out = Tensor::new(vec![n], data)?;
        Ok(self.push(out, Op::L2Norm(a), &[a]))
    }

    /// Row-wise unit vectors; zero rows stay zero.
    pub fn normalize3(&mut self, a: Var) -> Result<Var> {
        self.rows3("normalize3", a)?;
        let data = self
            .value(a)
            .data()
            .chunks_exact(3)
            .flat_map(|r| {
                let n = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
                if n > 0.0 {
                    [r[0] / n, r[1] / n, r[2] / n]
                } else {
                    [0.0; 3]
                }
            })
            .collect();
        let out = Tensor::new(self.shape(a).to_vec(), data)?;
        Ok(self.push(out, Op::Normalize3(a), &[a]))
    }

    /// Selects rows of `a` (leading dimension) by index.
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let t = self.value(a);
        let rows = t.rows();
        if t.shape().is_empty() {
            return shape_err("gather_rows", "rank-0 input");
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= rows) {
            return shape_err("gather_rows", format!("index {} out of {} rows", bad, rows));
        }
        let w = t.row_len();
        let mut data = Vec::with_capacity(idx.len() * w);
        for &i in idx {
            data.extend_from_slice(t.row(i));
        }
        let mut shape = t.shape().to_vec();
        shape[0] = idx.len();
        let out = Tensor::new(shape, data)?;
        Ok(self.push(
            out,
            Op::Gather {
                input: a,
                idx: idx.to_vec(),
            },
            &[a],
        ))
    }

    /// `out[i, c] = max_s a[i, c] + b[neighbors[i*k + s], c]`. Ties route
    /// the gradient to the first maximal neighbour.
    pub fn neighbor_max(&mut self, a: Var, b: Var, neighbors: &[usize], k: usize) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[1] {
            return shape_err("neighbor_max", format!("{:?} with {:?}", sa, sb));
        }
        let (n, w, rows_b) = (sa[0], sa[1], sb[0]);
        if k == 0 || neighbors.len() != n * k {
            return shape_err(
                "neighbor_max",
                format!("{} neighbours for {} rows and k={}", neighbors.len(), n, k),
            );
        }
        if let Some(&bad) = neighbors.iter().find(|&&j| j >= rows_b) {
            return shape_err("neighbor_max", format!("index {} out of {} rows", bad, rows_b));
        }
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        let mut data = vec![f64::NEG_INFINITY; n * w];
        let mut argmax = vec![0; n * w];
        for i in 0..n {
            let ar = &av[i * w..(i + 1) * w];
            let out = &mut data[i * w..(i + 1) * w];
            let arg = &mut argmax[i * w..(i + 1) * w];
            for (s, &j) in neighbors[i * k..(i + 1) * k].iter().enumerate() {
                let br = &bv[j * w..(j + 1) * w];
                for c in 0..w {
                    let x = ar[c] + br[c];
                    if s == 0 || x > out[c] {
                        out[c] = x;
                        arg[c] = j;
                    }
                }
            }
        }
        let out = Tensor::new(vec![n, w], data)?;
        Ok(self.push(out, Op::NeighborMax { a, b, argmax }, &[a, b]))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(a).clone().reshaped(shape)?;
        Ok(self.push(out, Op::Reshape(a), &[a]))
    }

    /// Rows `start..end` of `a`.
    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let t = self.value(a);
        if t.shape().is_empty() || start > end || end > t.rows() {
            return shape_err(
                "slice_rows",
                format!("{}..{} of {:?}", start, end, t.shape()),
            );
        }
        let w = t.row_len();
        let data = t.data()[start * w..end * w].to_vec();
        let mut shape = t.shape().to_vec();
        shape[0] = end - start;
        let out = Tensor::new(shape, data)?;
        Ok(self.push(out, Op::SliceRows { input: a, start }, &[a]))
    }

    // ---- reverse pass ----

    /// Gradients of the scalar `loss` for every registered parameter.
    /// Parameters that do not reach `loss` receive zeros.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            return contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            ));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        if self.needs(loss) {
            grads[loss.0] = Some(vec![1.0]);
        }
        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            if matches!(node.op, Op::Leaf) {
                grads[id] = Some(g);
                continue;
            }
            self.propagate(id, &g, &mut grads);
        }
        let mut out = Gradients::new();
        for (name, v) in &self.params {
            let t = match grads.get(v.0).and_then(|g| g.clone()) {
                Some(g) => Tensor::new(self.shape(*v).to_vec(), g)?,
                None => Tensor::zeros(self.shape(*v)),
            };
            match out.get_mut(name) {
                Some(prev) => {
                    for (p, x) in prev.data_mut().iter_mut().zip(t.data()) {
                        *p += x;
                    }
                }
                None => {
                    out.insert(name.clone(), t);
                }
            }
        }
        Ok(out)
    }

    fn propagate(&self, id: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[id];
        let out = node.value.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                if self.needs(*a) {
                    let ga = slot(grads, *a, m * k);
                    gemm(
                        m,
                        n,
                        k,
                        g,
                        (n as isize, 1),
                        self.value(*b).data(),
                        (1, n as isize),
                        ga,
                        true,
                    );
                }
                if self.needs(*b) {
                    let gb = slot(grads, *b, k * n);
                    gemm(
                        k,
                        m,
                        n,
                        self.value(*a).data(),
                        (1, k as isize),
                        g,
                        (n as isize, 1),
                        gb,
                        true,
                    );
                }
            }
            Op::Add(a, b) => {
                self.acc(grads, *a, g.iter().copied());
                self.acc(grads, *b, g.iter().copied());
            }
            Op::AddRow(a, b) => {
                self.acc(grads, *a, g.iter().copied());
                if self.needs(*b) {
                    let w = self.value(*b).numel();
                    let gb = slot(grads, *b, w);
                    for r in g.chunks_exact(w.max(1)) {
                        for (d, x) in gb.iter_mut().zip(r) {
                            *d += x;
                        }
                    }
                }
            }
            Op::Sub(a, b) => {
                self.acc(grads, *a, g.iter().copied());
                self.acc(grads, *b, g.iter().map(|x| -x));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                self.acc(grads, *a, g.iter().zip(vb).map(|(x, y)| x * y));
                self.acc(grads, *b, g.iter().zip(va).map(|(x, y)| x * y));
            }
            Op::Div(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                self.acc(grads, *a, g.iter().zip(vb).map(|(x, y)| x / y));
                self.acc(
                    grads,
                    *b,
                    g.iter()
                        .zip(va.iter().zip(vb))
                        .map(|(x, (p, q))| -x * p / (q * q)),
                );
            }
            Op::MulCol(a, s) => {
                let w = self.value(*a).row_len().max(1);
                let (va, vs) = (self.value(*a).data(), self.value(*s).data());
                self.acc(
                    grads,
                    *a,
                    g.iter().enumerate().map(|(i, x)| x * vs[i / w]),
                );
                self.acc(
                    grads,
                    *s,
                    g.chunks_exact(w)
                        .zip(va.chunks_exact(w))
                        .map(|(gr, ar)| gr.iter().zip(ar).map(|(x, y)| x * y).sum()),
                );
            }
            Op::DivCol(a, s) => {
                let w = self.value(*a).row_len().max(1);
                let (va, vs) = (self.value(*a).data(), self.value(*s).data());
                self.acc(
                    grads,
                    *a,
                    g.iter().enumerate().map(|(i, x)| x / vs[i / w]),
                );
                self.acc(
                    grads,
                    *s,
                    g.chunks_exact(w)
                        .zip(va.chunks_exact(w))
                        .zip(vs)
                        .map(|((gr, ar), q)| {
                            -gr.iter().zip(ar).map(|(x, y)| x * y).sum::<f64>() / (q * q)
                        }),
                );
            }
            Op::Scale(a, c) => self.acc(grads, *a, g.iter().map(|x| x * c)),
            Op::MulConst(a, c) => self.acc(grads, *a, g.iter().zip(c).map(|(x, y)| x * y)),
            Op::Relu(a) => {
                let va = self.value(*a).data();
                self.acc(
                    grads,
                    *a,
                    g.iter()
                        .zip(va)
                        .map(|(x, v)| if *v > 0.0 { *x } else { 0.0 }),
                );
            }
            Op::Exp(a) => self.acc(grads, *a, g.iter().zip(out).map(|(x, y)| x * y)),
            Op::Sin(a) => {
                let va = self.value(*a).data();
                self.acc(grads, *a, g.iter().zip(va).map(|(x, v)| x * v.cos()));
            }
            Op::Cos(a) => {
                let va = self.value(*a).data();
                self.acc(grads, *a, g.iter().zip(va).map(|(x, v)| -x * v.sin()));
            }
            Op::Square(a) => {
                let va = self.value(*a).data();
                self.acc(grads, *a, g.iter().zip(va).map(|(x, v)| 2.0 * x * v));
            }
            Op::Concat {
                inputs,
                outer,
                widths,
            } => {
                let total: usize = widths.iter().sum();
                let mut off = 0;
                for (&v, &w) in inputs.iter().zip(widths) {
                    if self.needs(v) {
                        let gv = slot(grads, v, outer * w);
                        for o in 0..*outer {
                            let src = &g[o * total + off..o * total + off + w];
                            for (d, x) in gv[o * w..(o + 1) * w].iter_mut().zip(src) {
                                *d += x;
                            }
                        }
                    }
                    off += w;
                }
            }
            Op::MaxReduce { input, argmax } => {
                if self.needs(*input) {
                    let n = self.value(*input).numel();
                    let gi = slot(grads, *input, n);
                    for (x, &src) in g.iter().zip(argmax) {
                        gi[src] += x;
                    }
                }
            }
            Op::SumReduce {
                input,
                outer,
                len,
                inner,
            } => {
                if self.needs(*input) {
                    let gi = slot(grads, *input, outer * len * inner);
                    for o in 0..*outer {
                        for l in 0..*len {
                            let base = (o * len + l) * inner;
                            for i in 0..*inner {
                                gi[base + i] += g[o * inner + i];
                            }
                        }
                    }
                }
            }
            Op::Cross3(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                if self.needs(*a) {
                    let ga = slot(grads, *a, va.len());
                    for ((d, gr), br) in ga
                        .chunks_exact_mut(3)
                        .zip(g.chunks_exact(3))
                        .zip(vb.chunks_exact(3))
                    {
                        let c = cross(br, gr);
                        d.iter_mut().zip(c).for_each(|(x, y)| *x += y);
                    }
                }
                if self.needs(*b) {
                    let gb = slot(grads, *b, vb.len());
                    for ((d, gr), ar) in gb
                        .chunks_exact_mut(3)
                        .zip(g.chunks_exact(3))
                        .zip(va.chunks_exact(3))
                    {
                        let c = cross(gr, ar);
                        d.iter_mut().zip(c).for_each(|(x, y)| *x += y);
                    }
                }
            }
            Op::L2Norm(a) => {
                if self.needs(*a) {
                    let va = self.value(*a).data();
                    let ga = slot(grads, *a, va.len());
                    for (i, (d, r)) in ga.chunks_exact_mut(3).zip(va.chunks_exact(3)).enumerate() {
                        let n = out[i];
                        if n > 0.0 {
                            for c in 0..3 {
                                d[c] += g[i] * r[c] / n;
                            }
                        }
                    }
                }
            }
            Op::Normalize3(a) => {
                if self.needs(*a) {
                    let va = self.value(*a).data();
                    let ga = slot(grads, *a, va.len());
                    for (((d, r), y), gr) in ga
                        .chunks_exact_mut(3)
                        .zip(va.chunks_exact(3))
                        .zip(out.chunks_exact(3))
                        .zip(g.chunks_exact(3))
                    {
                        let n = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
                        if n > 0.0 {
                            let yg = y[0] * gr[0] + y[1] * gr[1] + y[2] * gr[2];
                            for c in 0..3 {
                                d[c] += (gr[c] - y[c] * yg) / n;
                            }
                        }
                    }
                }
            }
            Op::NeighborMax { a, b, argmax } => {
                if self.needs(*a) {
                    self.acc(grads, *a, g.iter().copied());
                }
                if self.needs(*b) {
                    let t = self.value(*b);
                    let w = t.row_len();
                    let gb = slot(grads, *b, t.numel());
                    for (e, (&x, &j)) in g.iter().zip(argmax).enumerate() {
                        gb[j * w + e % w] += x;
                    }
                }
            }
            Op::Gather { input, idx } => {
                if self.needs(*input) {
                    let t = self.value(*input);
                    let w = t.row_len();
                    let gi = slot(grads, *input, t.numel());
                    for (k, &i) in idx.iter().enumerate() {
                        for (d, x) in gi[i * w..(i + 1) * w]
                            .iter_mut()
                            .zip(&g[k * w..(k + 1) * w])
                        {
                            *d += x;
                        }
                    }
                }
            }
            Op::Reshape(a) => self.acc(grads, *a, g.iter().copied()),
            Op::SliceRows { input, start } => {
                if self.needs(*input) {
                    let t = self.value(*input);
                    let w = t.row_len();
                    let gi = slot(grads, *input, t.numel());
                    for (d, x) in gi[start * w..start * w + g.len()].iter_mut().zip(g) {
                        *d += x;
                    }
                }
            }
        }
    }

    fn acc(&self, grads: &mut [Option<Vec<f64>>], v: Var, vals: impl Iterator<Item = f64>) {
        if !self.needs(v) {
            return;
        }
        let n = self.value(v).numel();
        let gv = slot(grads, v, n);
        for (d, x) in gv.iter_mut().zip(vals) {
            *d += x;
        }
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], v: Var, n: usize) -> &mut [f64] {
    grads[v.0].get_or_insert_with(|| vec![0.0; n])
}

fn map(a: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::new(a.shape().to_vec(), a.data().iter().map(|&x| f(x)).collect())
        .expect("same shape")
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor::new(
        a.shape().to_vec(),
        a.data()
            .iter()
            .zip(b.data())
            .map(|(&x, &y)| f(x, y))
            .collect(),
    )
    .expect("same shape")
}

fn row_scale(a: &Tensor, s: &Tensor, w: usize, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let w = w.max(1);
    let sd = s.data();
    Tensor::new(
        a.shape().to_vec(),
        a.data()
            .iter()
            .enumerate()
            .map(|(i, &x)| f(x, sd[i / w]))
            .collect(),
    )
    .expect("same shape")
}

fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Operation selector for [`Graph::forward_op`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    MatMul,
    Add,
    Sub,
    Mul,
    Div,
    Relu,
    Exp,
    Sin,
    Cos,
    Square,
    /// Concatenation along the last axis.
    Concat,
    /// Maximum along axis 0.
    MaxReduce,
    /// Sum of all elements.
    SumReduce,
    Cross3,
    L2Norm,
    Normalize3,
}

impl Graph {
    /// Applies `kind` to `inputs`, checking arity and shapes.
    pub fn forward_op(&mut self, kind: OpKind, inputs: &[Var]) -> Result<Var> {
        let arity = match kind {
            OpKind::MatMul
            | OpKind::Add
            | OpKind::Sub
            | OpKind::Mul
            | OpKind::Div
            | OpKind::Cross3 => Some(2),
            OpKind::Concat => None,
            _ => Some(1),
        };
        if let Some(n) = arity {
            if inputs.len() != n {
                return shape_err("forward_op", format!("{:?} takes {} inputs, got {}", kind, n, inputs.len()));
            }
        }
        match kind {
            OpKind::MatMul => self.matmul(inputs[0], inputs[1]),
            OpKind::Add => self.add(inputs[0], inputs[1]),
            OpKind::Sub => self.sub(inputs[0], inputs[1]),
            OpKind::Mul => self.mul(inputs[0], inputs[1]),
            OpKind::Div => self.div(inputs[0], inputs[1]),
            OpKind::Relu => Ok(self.relu(inputs[0])),
            OpKind::Exp => Ok(self.exp(inputs[0])),
            OpKind::Sin => Ok(self.sin(inputs[0])),
            OpKind::Cos => Ok(self.cos(inputs[0])),
            OpKind::Square => Ok(self.square(inputs[0])),
            OpKind::Concat => {
                let Some(&first) = inputs.first() else {
                    return shape_err("concat", "no inputs");
                };
                let axis = self.shape(first).len().saturating_sub(1);
                self.concat(inputs, axis)
            }
            OpKind::MaxReduce => self.max_reduce(inputs[0], 0),
            OpKind::SumReduce => Ok(self.sum_all(inputs[0])),
            OpKind::Cross3 => self.cross3(inputs[0], inputs[1]),
            OpKind::L2Norm => self.l2norm(inputs[0]),
            OpKind::Normalize3 => self.normalize3(inputs[0]),
        }
    }
}
