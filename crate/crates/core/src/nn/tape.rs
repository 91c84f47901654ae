//! Reverse-mode tape. Nodes are appended in evaluation order, so the tape is
//! already a topological order and backward is a single reverse sweep.

use super::kernels::{self, ConvShape};
use super::loss::{self, SupConSaved};
use super::scan::{self, ScanInputs, ScanShape};
use super::{NnError, Tensor};
use crate::scalar::Real;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T> {
    Leaf,
    Conv1d { x: Var, w: Var, b: Option<Var>, shape: ConvShape },
    MaxPool { x: Var, argmax: Vec<u32> },
    MeanLast { x: Var, len: usize },
    Linear { x: Var, w: Var, b: Option<Var>, rows: usize, d_in: usize, d_out: usize },
    Relu(Var),
    Silu(Var),
    Softplus(Var),
    Add(Var, Var),
    Mul(Var, Var),
    AddScaled(Var, Var, T),
    Sum(Var),
    Transpose { x: Var, batch: usize, p: usize, q: usize },
    DwCausal { x: Var, w: Var, b: Var, batch: usize, len: usize, ch: usize, k: usize },
    Scan { x: Var, delta: Var, a_log: Var, b: Var, c: Var, d: Var, shape: ScanShape, hs: Vec<f64> },
    CrossEntropy { logits: Var, labels: Vec<usize>, probs: Vec<f64> },
    SupCon { emb: Var, saved: SupConSaved },
}

impl<T> Op<T> {
    fn inputs(&self) -> Vec<Var> {
        use Op::*;
        match self {
            Leaf => vec![],
            Conv1d { x, w, b, .. } | Linear { x, w, b, .. } => [Some(*x), Some(*w), *b].into_iter().flatten().collect(),
            MaxPool { x, .. } | MeanLast { x, .. } | Transpose { x, .. } => vec![*x],
            Relu(x) | Silu(x) | Softplus(x) | Sum(x) => vec![*x],
            Add(a, b) | Mul(a, b) | AddScaled(a, b, _) => vec![*a, *b],
            DwCausal { x, w, b, .. } => vec![*x, *w, *b],
            Scan { x, delta, a_log, b, c, d, .. } => vec![*x, *delta, *a_log, *b, *c, *d],
            CrossEntropy { logits, .. } => vec![*logits],
            SupCon { emb, .. } => vec![*emb],
        }
    }
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Gradients indexed by [`Var`]; `None` for nodes that need none.
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn take(&mut self, v: Var) -> Option<Vec<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

#[derive(Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

fn shape_err(msg: String) -> NnError {
    NnError::ShapeMismatch(msg)
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn data(&self, v: Var) -> &[T] {
        self.nodes[v.0].value.data()
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<T>, op: Op<T>) -> Var {
        let requires_grad = op.inputs().iter().any(|v| self.nodes[v.0].requires_grad);
        let value = Tensor::new(shape, data).expect("kernel produced the declared shape");
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn expect_rank(&self, v: Var, rank: usize, what: &str) -> Result<(), NnError> {
        if self.shape(v).len() != rank {
            return Err(shape_err(format!("{what}: expected rank {rank}, got {:?}", self.shape(v))));
        }
        Ok(())
    }

    /// `x [B×C_in×L]`, `w [C_out×C_in×K]`, `b [C_out]`.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Result<Var, NnError> {
        self.expect_rank(x, 3, "conv1d input")?;
        self.expect_rank(w, 3, "conv1d weight")?;
        let (xs, ws) = (self.shape(x), self.shape(w));
        if xs[1] != ws[1] {
            return Err(shape_err(format!("conv1d: input {xs:?} vs weight {ws:?}")));
        }
        if let Some(b) = b {
            if self.shape(b) != [ws[0]] {
                return Err(shape_err(format!("conv1d bias {:?} for {} outputs", self.shape(b), ws[0])));
            }
        }
        let shape = ConvShape { batch: xs[0], c_in: xs[1], len: xs[2], c_out: ws[0], kernel: ws[2], stride, pad };
        let lout = shape
            .out_len()
            .ok_or_else(|| shape_err(format!("conv1d: kernel {} too long for {xs:?} with pad {pad}", ws[2])))?;
        let y = kernels::conv1d_forward(self.data(x), self.data(w), b.map(|b| self.data(b)), shape);
        Ok(self.push(vec![shape.batch, shape.c_out, lout], y, Op::Conv1d { x, w, b, shape }))
    }

    /// Max pool over the last axis of a rank-3 tensor.
    pub fn maxpool1d(&mut self, x: Var, window: usize, stride: usize) -> Result<Var, NnError> {
        self.expect_rank(x, 3, "maxpool input")?;
        let s = self.shape(x).to_vec();
        if window == 0 || stride == 0 || window > s[2] {
            return Err(shape_err(format!("maxpool window {window} stride {stride} on {s:?}")));
        }
        let (y, argmax) = kernels::maxpool_forward(self.data(x), s[0] * s[1], s[2], window, stride);
        let lout = (s[2] - window) / stride + 1;
        Ok(self.push(vec![s[0], s[1], lout], y, Op::MaxPool { x, argmax }))
    }

    /// `[B×C×L]` → `[B×C]`
    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var, NnError> {
        self.expect_rank(x, 3, "global_avg_pool input")?;
        let s = self.shape(x).to_vec();
        let y = kernels::mean_last_forward(self.data(x), s[0] * s[1], s[2]);
        Ok(self.push(vec![s[0], s[1]], y, Op::MeanLast { x, len: s[2] }))
    }

    /// Affine map over the last axis: `x · wᵀ + b`, `w [d_out×d_in]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var, NnError> {
        self.expect_rank(w, 2, "linear weight")?;
        let xs = self.shape(x).to_vec();
        let (d_out, d_in) = (self.shape(w)[0], self.shape(w)[1]);
        if xs.last() != Some(&d_in) {
            return Err(shape_err(format!("linear: input {xs:?} vs weight [{d_out}, {d_in}]")));
        }
        if let Some(b) = b {
            if self.shape(b) != [d_out] {
                return Err(shape_err(format!("linear bias {:?} for {d_out} outputs", self.shape(b))));
            }
        }
        let rows = xs.iter().product::<usize>() / d_in;
        let y = kernels::linear_forward(self.data(x), self.data(w), b.map(|b| self.data(b)), rows, d_in, d_out);
        let mut shape = xs;
        *shape.last_mut().expect("non-empty") = d_out;
        Ok(self.push(shape, y, Op::Linear { x, w, b, rows, d_in, d_out }))
    }

    fn unary(&mut self, x: Var, f: impl Fn(T) -> T, op: Op<T>) -> Var {
        let y = self.data(x).iter().map(|&v| f(v)).collect();
        self.push(self.shape(x).to_vec(), y, op)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, |v| v.max(T::zero()), Op::Relu(x))
    }

    pub fn silu(&mut self, x: Var) -> Var {
        self.unary(x, |v| v * kernels::sigmoid(v), Op::Silu(x))
    }

    pub fn softplus(&mut self, x: Var) -> Var {
        self.unary(x, kernels::softplus, Op::Softplus(x))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<(), NnError> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err(format!("{what}: {:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        Ok(())
    }

    fn binary(&mut self, a: Var, b: Var, f: impl Fn(T, T) -> T, op: Op<T>) -> Var {
        let y = self.data(a).iter().zip(self.data(b)).map(|(&x, &y)| f(x, y)).collect();
        self.push(self.shape(a).to_vec(), y, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.same_shape(a, b, "add")?;
        Ok(self.binary(a, b, |x, y| x + y, Op::Add(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.same_shape(a, b, "mul")?;
        Ok(self.binary(a, b, |x, y| x * y, Op::Mul(a, b)))
    }

    /// `a + beta · b`
    pub fn add_scaled(&mut self, a: Var, b: Var, beta: T) -> Result<Var, NnError> {
        self.same_shape(a, b, "add_scaled")?;
        Ok(self.binary(a, b, |x, y| x + beta * y, Op::AddScaled(a, b, beta)))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.data(x).iter().copied().sum::<T>();
        self.push(vec![1], vec![s], Op::Sum(x))
    }

    /// Swaps the last two axes of a rank-3 tensor.
    pub fn transpose12(&mut self, x: Var) -> Result<Var, NnError> {
        self.expect_rank(x, 3, "transpose input")?;
        let s = self.shape(x).to_vec();
        let y = kernels::transpose_last2(self.data(x), s[0], s[1], s[2]);
        Ok(self.push(vec![s[0], s[2], s[1]], y, Op::Transpose { x, batch: s[0], p: s[1], q: s[2] }))
    }

    /// Causal depthwise conv over time on `[B×L×C]`; `w [C×K]`, `b [C]`.
    pub fn dw_causal_conv(&mut self, x: Var, w: Var, b: Var) -> Result<Var, NnError> {
        self.expect_rank(x, 3, "depthwise conv input")?;
        self.expect_rank(w, 2, "depthwise conv weight")?;
        let s = self.shape(x).to_vec();
        let (ch, k) = (self.shape(w)[0], self.shape(w)[1]);
        if s[2] != ch || self.shape(b) != [ch] || k == 0 {
            return Err(shape_err(format!("depthwise conv: input {s:?}, weight [{ch}, {k}], bias {:?}", self.shape(b))));
        }
        let y = kernels::dw_causal_forward(self.data(x), self.data(w), self.data(b), s[0], s[1], ch, k);
        Ok(self.push(s.clone(), y, Op::DwCausal { x, w, b, batch: s[0], len: s[1], ch, k }))
    }

    /// Fused selective scan; see [`super::scan`]. `x`, `delta` `[B×L×D]`,
    /// `a_log` `[D×N]`, `b`, `c` `[B×L×N]`, `d` `[D]`.
    pub fn selective_scan(&mut self, x: Var, delta: Var, a_log: Var, b: Var, c: Var, d: Var) -> Result<Var, NnError> {
        self.expect_rank(x, 3, "scan input")?;
        self.same_shape(x, delta, "scan delta")?;
        self.same_shape(b, c, "scan B/C")?;
        let xs = self.shape(x).to_vec();
        let n = self.shape(a_log).get(1).copied().unwrap_or(0);
        let shape = ScanShape { batch: xs[0], len: xs[1], d_inner: xs[2], d_state: n };
        if self.shape(a_log) != [xs[2], n] || self.shape(b) != [xs[0], xs[1], n] || self.shape(d) != [xs[2]] {
            return Err(shape_err(format!(
                "scan: x {xs:?}, A_log {:?}, B {:?}, D {:?}",
                self.shape(a_log),
                self.shape(b),
                self.shape(d)
            )));
        }
        let inp = ScanInputs {
            x: self.data(x),
            delta: self.data(delta),
            a_log: self.data(a_log),
            b: self.data(b),
            c: self.data(c),
            d: self.data(d),
        };
        let (y, hs) = scan::scan_forward(&inp, shape);
        if !y.iter().all(|v| v.is_finite()) {
            return Err(NnError::NonFinite("selective scan output".into()));
        }
        Ok(self.push(xs, y, Op::Scan { x, delta, a_log, b, c, d, shape, hs }))
    }

    /// Mean cross-entropy of `logits [B×classes]` against class indices.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var, NnError> {
        self.expect_rank(logits, 2, "logits")?;
        let s = self.shape(logits).to_vec();
        if s[0] != labels.len() || s[0] == 0 || labels.iter().any(|&y| y >= s[1]) {
            return Err(shape_err(format!("cross_entropy: logits {s:?} with {} labels", labels.len())));
        }
        let (l, probs) = loss::cross_entropy_forward(self.data(logits), labels, s[1]);
        Ok(self.push(vec![1], vec![T::lit(l)], Op::CrossEntropy { logits, labels: labels.to_vec(), probs }))
    }

    /// Supervised contrastive loss of `emb [B×d]` at temperature `tau`.
    pub fn supcon(&mut self, emb: Var, labels: &[usize], tau: f64) -> Result<Var, NnError> {
        self.expect_rank(emb, 2, "embeddings")?;
        let s = self.shape(emb).to_vec();
        if s[0] != labels.len() {
            return Err(shape_err(format!("supcon: embeddings {s:?} with {} labels", labels.len())));
        }
        let (l, saved) = loss::supcon_forward(self.data(emb), labels, s[1], tau).ok_or(NnError::NoPositives)?;
        Ok(self.push(vec![1], vec![T::lit(l)], Op::SupCon { emb, saved }))
    }

    /// Reverse sweep from a scalar node.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>, NnError> {
        if self.shape(loss).iter().product::<usize>() != 1 {
            return Err(shape_err(format!("backward needs a scalar, got {:?}", self.shape(loss))));
        }
        if !self.data(loss)[0].is_finite() {
            return Err(NnError::NonFinite("loss".into()));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            if node.op.inputs().iter().any(|v| v.0 >= i) {
                return Err(NnError::GraphCycle);
            }
            self.backward_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn take_buf(&self, grads: &mut [Option<Vec<T>>], v: Var) -> Option<Vec<T>> {
        if !self.needs(v) {
            return None;
        }
        Some(grads[v.0].take().unwrap_or_else(|| vec![T::zero(); self.nodes[v.0].value.len()]))
    }

    fn accumulate(&self, grads: &mut [Option<Vec<T>>], v: Var, contrib: impl IntoIterator<Item = T>) {
        if let Some(mut buf) = self.take_buf(grads, v) {
            for (b, c) in buf.iter_mut().zip(contrib) {
                *b += c;
            }
            grads[v.0] = Some(buf);
        }
    }

    fn restore(grads: &mut [Option<Vec<T>>], v: Var, buf: Option<Vec<T>>) {
        if let Some(b) = buf {
            grads[v.0] = Some(b);
        }
    }

    fn backward_node(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::Conv1d { x, w, b, shape } => {
                let mut dx = self.take_buf(grads, *x);
                let mut dw = self.take_buf(grads, *w);
                let mut db = b.and_then(|b| self.take_buf(grads, b));
                kernels::conv1d_backward(
                    g,
                    self.data(*x),
                    self.data(*w),
                    *shape,
                    dx.as_deref_mut(),
                    dw.as_deref_mut(),
                    db.as_deref_mut(),
                );
                Self::restore(grads, *x, dx);
                Self::restore(grads, *w, dw);
                if let Some(b) = b {
                    Self::restore(grads, *b, db);
                }
            }
            Op::MaxPool { x, argmax } => {
                if let Some(mut dx) = self.take_buf(grads, *x) {
                    for (&a, &gv) in argmax.iter().zip(g) {
                        dx[a as usize] += gv;
                    }
                    grads[x.0] = Some(dx);
                }
            }
            Op::MeanLast { x, len } => {
                let inv = T::from_usize_exact(*len).recip();
                self.accumulate(grads, *x, g.iter().flat_map(|&gv| std::iter::repeat_n(gv * inv, *len)));
            }
            Op::Linear { x, w, b, rows, d_in, d_out } => {
                let mut dx = self.take_buf(grads, *x);
                let mut dw = self.take_buf(grads, *w);
                let mut db = b.and_then(|b| self.take_buf(grads, b));
                kernels::linear_backward(
                    g,
                    self.data(*x),
                    self.data(*w),
                    *rows,
                    *d_in,
                    *d_out,
                    dx.as_deref_mut(),
                    dw.as_deref_mut(),
                    db.as_deref_mut(),
                );
                Self::restore(grads, *x, dx);
                Self::restore(grads, *w, dw);
                if let Some(b) = b {
                    Self::restore(grads, *b, db);
                }
            }
            Op::Relu(x) => {
                let xv = self.data(*x);
                self.accumulate(grads, *x, xv.iter().zip(g).map(|(&v, &gv)| if v > T::zero() { gv } else { T::zero() }));
            }
            Op::Silu(x) => {
                let xv = self.data(*x);
                self.accumulate(
                    grads,
                    *x,
                    xv.iter().zip(g).map(|(&v, &gv)| {
                        let s = kernels::sigmoid(v);
                        gv * s * (T::one() + v * (T::one() - s))
                    }),
                );
            }
            Op::Softplus(x) => {
                let xv = self.data(*x);
                self.accumulate(grads, *x, xv.iter().zip(g).map(|(&v, &gv)| gv * kernels::sigmoid(v)));
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.iter().copied());
                self.accumulate(grads, *b, g.iter().copied());
            }
            Op::AddScaled(a, b, beta) => {
                self.accumulate(grads, *a, g.iter().copied());
                self.accumulate(grads, *b, g.iter().map(|&gv| gv * *beta));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.data(*a), self.data(*b));
                let da: Vec<T> = g.iter().zip(bv).map(|(&gv, &y)| gv * y).collect();
                let db: Vec<T> = g.iter().zip(av).map(|(&gv, &x)| gv * x).collect();
                self.accumulate(grads, *a, da);
                self.accumulate(grads, *b, db);
            }
            Op::Sum(x) => {
                let n = self.nodes[x.0].value.len();
                self.accumulate(grads, *x, std::iter::repeat_n(g[0], n));
            }
            Op::Transpose { x, batch, p, q } => {
                self.accumulate(grads, *x, kernels::transpose_last2(g, *batch, *q, *p));
            }
            Op::DwCausal { x, w, b, batch, len, ch, k } => {
                let mut dx = self.take_buf(grads, *x);
                let mut dw = self.take_buf(grads, *w);
                let mut db = self.take_buf(grads, *b);
                kernels::dw_causal_backward(
                    g,
                    self.data(*x),
                    self.data(*w),
                    *batch,
                    *len,
                    *ch,
                    *k,
                    dx.as_deref_mut(),
                    dw.as_deref_mut(),
                    db.as_deref_mut(),
                );
                Self::restore(grads, *x, dx);
                Self::restore(grads, *w, dw);
                Self::restore(grads, *b, db);
            }
            Op::Scan { x, delta, a_log, b, c, d, shape, hs } => {
                let inp = ScanInputs {
                    x: self.data(*x),
                    delta: self.data(*delta),
                    a_log: self.data(*a_log),
                    b: self.data(*b),
                    c: self.data(*c),
                    d: self.data(*d),
                };
                let sg = scan::scan_backward(g, &inp, hs, *shape);
                self.accumulate(grads, *x, sg.x);
                self.accumulate(grads, *delta, sg.delta);
                self.accumulate(grads, *a_log, sg.a_log);
                self.accumulate(grads, *b, sg.b);
                self.accumulate(grads, *c, sg.c);
                self.accumulate(grads, *d, sg.d);
            }
            Op::CrossEntropy { logits, labels, probs } => {
                let classes = self.shape(*logits)[1];
                let dl: Vec<T> = loss::cross_entropy_backward(g[0].as_f64(), probs, labels, classes);
                self.accumulate(grads, *logits, dl);
            }
            Op::SupCon { emb, saved } => {
                let de: Vec<T> = loss::supcon_backward(g[0].as_f64(), saved);
                self.accumulate(grads, *emb, de);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn t(shape: &[usize], data: Vec<f64>) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data).unwrap()
    }

    fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
        let n = shape.iter().product();
        t(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn activations_by_hand() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[3], vec![-1.0, 0.0, 2.0]), false);
        let r = tape.relu(x);
        let s = tape.silu(x);
        assert_eq!(tape.value(r).data(), &[0.0, 0.0, 2.0]);
        assert_eq!(tape.value(s).data()[1], 0.0);
    }

    #[test]
    fn identity_conv() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[1, 1, 4], vec![1.0, -2.0, 3.0, 0.5]), false);
        let w = tape.leaf(t(&[1, 1, 1], vec![1.0]), false);
        let b = tape.leaf(t(&[1], vec![0.0]), false);
        let y = tape.conv1d(x, w, Some(b), 1, 0).unwrap();
        assert_eq!(tape.value(y).data(), tape.value(x).data());
        let bad = tape.leaf(t(&[1, 2, 1], vec![1.0, 1.0]), false);
        assert!(matches!(tape.conv1d(x, bad, None, 1, 0), Err(NnError::ShapeMismatch(_))));
    }

    #[test]
    fn pools_by_hand() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[1, 2, 3], vec![1.0, 5.0, 2.0, -3.0, -1.0, -2.0]), false);
        let m = tape.maxpool1d(x, 3, 3).unwrap();
        assert_eq!(tape.value(m).data(), &[5.0, -1.0]);
        let c = tape.leaf(Tensor::full(&[2, 3, 7], 2.5), false);
        let g = tape.global_avg_pool(c).unwrap();
        assert_eq!(tape.value(g).shape(), &[2, 3]);
        assert!(tape.value(g).data().iter().all(|&v| (v - 2.5).abs() < 1e-15));
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), true);
        let s = tape.sum(x);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap(), &[1.0; 6]);
    }

    #[test]
    fn backward_needs_scalar() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[2], vec![1.0, 2.0]), true);
        let y = tape.relu(x);
        assert!(matches!(tape.backward(y), Err(NnError::ShapeMismatch(_))));
    }

    #[test]
    fn conv_and_linear_are_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (a, b) = (0.7, -1.3);
        let x1 = random(&mut rng, &[2, 3, 11]);
        let x2 = random(&mut rng, &[2, 3, 11]);
        let w = random(&mut rng, &[4, 3, 5]);
        let lw = random(&mut rng, &[6, 11]);
        let mix = t(&[2, 3, 11], x1.data().iter().zip(x2.data()).map(|(p, q)| a * p + b * q).collect());
        let run = |x: &Tensor<f64>| {
            let mut tape = Tape::new();
            let xv = tape.leaf(x.clone(), false);
            let wv = tape.leaf(w.clone(), false);
            let lv = tape.leaf(lw.clone(), false);
            let c = tape.conv1d(xv, wv, None, 2, 2).unwrap();
            let l = tape.linear(xv, lv, None).unwrap();
            (tape.value(c).data().to_vec(), tape.value(l).data().to_vec())
        };
        let ((c1, l1), (c2, l2), (cm, lm)) = (run(&x1), run(&x2), run(&mix));
        for (i, &v) in cm.iter().enumerate() {
            assert!((v - (a * c1[i] + b * c2[i])).abs() < 1e-5);
        }
        for (i, &v) in lm.iter().enumerate() {
            assert!((v - (a * l1[i] + b * l2[i])).abs() < 1e-5);
        }
    }

    struct Scan {
        x: Tensor<f64>,
        delta: Tensor<f64>,
        a_log: Tensor<f64>,
        b: Tensor<f64>,
        c: Tensor<f64>,
        d: Tensor<f64>,
    }

    impl Scan {
        fn random(rng: &mut ChaCha8Rng, batch: usize, len: usize, di: usize, n: usize) -> Self {
            let mut s = Self {
                x: random(rng, &[batch, len, di]),
                delta: random(rng, &[batch, len, di]),
                a_log: random(rng, &[di, n]),
                b: random(rng, &[batch, len, n]),
                c: random(rng, &[batch, len, n]),
                d: random(rng, &[di]),
            };
            s.delta = s.delta.map(|v| v.abs() + 0.05);
            s
        }

        fn run(&self) -> Vec<f64> {
            let mut tape = Tape::new();
            let v: Vec<Var> =
                [&self.x, &self.delta, &self.a_log, &self.b, &self.c, &self.d].map(|t| tape.leaf(t.clone(), false)).to_vec();
            let y = tape.selective_scan(v[0], v[1], v[2], v[3], v[4], v[5]).unwrap();
            tape.value(y).data().to_vec()
        }

        /// Keeps batch rows `rows` of every batched input.
        fn rows(&self, rows: &[usize]) -> Self {
            let pick = |t: &Tensor<f64>| {
                let per = t.len() / t.shape()[0];
                let mut shape = t.shape().to_vec();
                shape[0] = rows.len();
                Tensor::new(shape, rows.iter().flat_map(|&r| t.data()[r * per..(r + 1) * per].to_vec()).collect()).unwrap()
            };
            Self {
                x: pick(&self.x),
                delta: pick(&self.delta),
                a_log: self.a_log.clone(),
                b: pick(&self.b),
                c: pick(&self.c),
                d: self.d.clone(),
            }
        }
    }

    #[test]
    fn scan_without_step_is_skip_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = Scan::random(&mut rng, 2, 6, 3, 2);
        s.delta = s.delta.map(|_| super::super::softplus(-60.0));
        let y = s.run();
        for (i, v) in y.iter().enumerate() {
            let skip = s.d.data()[i % 3] * s.x.data()[i];
            assert!((v - skip).abs() < 1e-12);
        }
    }

    #[test]
    fn scan_has_no_batch_leakage() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = Scan::random(&mut rng, 4, 9, 3, 2);
        let y = s.run();
        let per = 9 * 3;
        let perm = [2, 0, 3, 1];
        let yp = s.rows(&perm).run();
        for (j, &r) in perm.iter().enumerate() {
            assert_eq!(&yp[j * per..(j + 1) * per], &y[r * per..(r + 1) * per]);
        }
        let mut halves = s.rows(&[0, 1]).run();
        halves.extend(s.rows(&[2, 3]).run());
        assert_eq!(halves, y);
    }

    #[test]
    fn scan_state_is_bounded() {
        use super::super::scan::{scan_forward, ScanInputs, ScanShape};
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let s = Scan::random(&mut rng, 2, 16, 3, 4);
            let shape = ScanShape { batch: 2, len: 16, d_inner: 3, d_state: 4 };
            let inp = ScanInputs {
                x: s.x.data(),
                delta: s.delta.data(),
                a_log: s.a_log.data(),
                b: s.b.data(),
                c: s.c.data(),
                d: s.d.data(),
            };
            let (_, hs) = scan_forward(&inp, shape);
            let a: Vec<f64> = s.a_log.data().iter().map(|v| -v.exp()).collect();
            let mut max_decay = 0.0f64;
            let mut max_in = 0.0f64;
            for i in 0..2 * 16 * 3 {
                let (dt, x, d) = (s.delta.data()[i], s.x.data()[i], i % 3);
                let row = i / 3;
                for k in 0..4 {
                    max_decay = max_decay.max((dt * a[d * 4 + k]).exp());
                    max_in = max_in.max((dt * s.b.data()[row * 4 + k] * x).abs());
                }
            }
            let bound = max_in / (1.0 - max_decay);
            assert!(hs.iter().all(|h| h.abs() <= bound * (1.0 + 1e-12)));
        }
    }
}
