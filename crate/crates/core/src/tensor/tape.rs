//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! A [`Tape`] is built fresh for every forward pass. Each op appends a node
//! holding its output and whatever it needs for the backward pass; the
//! append order is a topological order, so [`Tape::backward`] just walks the
//! nodes in reverse and visits each one exactly once. Gradients flowing into
//! a node from several consumers are summed.

use super::kernels::{self, ConvGeom};
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Classification targets for [`Tape::softmax_cross_entropy`].
#[derive(Clone, Copy, Debug)]
pub enum Targets<'a> {
    /// One class index per row.
    Classes(&'a [usize]),
    /// A `[rows, classes]` matrix of label mixtures; every row sums to 1.
    Mixture(&'a Tensor),
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    BiasAdd(Var, Var),
    Relu(Var),
    Conv2d {
        input: Var,
        kernel: Var,
        geom: ConvGeom,
        cols: Vec<f64>,
    },
    MaxPool2 {
        input: Var,
        argmax: Vec<usize>,
    },
    Reshape(Var),
    Sum(Var),
    Mean(Var),
    MeanAxis {
        input: Var,
        outer: usize,
        len: usize,
        inner: usize,
    },
    SoftmaxCe {
        logits: Var,
        residual: Vec<f64>,
    },
    TemporalShift {
        input: Var,
        frames: usize,
        channels: usize,
        inner: usize,
        fold: usize,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(|g| g.as_ref())
    }

    /// Takes ownership of a gradient, leaving `None` behind.
    pub fn take(&mut self, var: Var) -> Option<Tensor> {
        self.grads.get_mut(var.0).and_then(|g| g.take())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    fn needs(&self, var: Var) -> bool {
        self.nodes[var.0].needs_grad
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool, name: &str) -> Result<Var> {
        if !value.all_finite() {
            return Err(Error::NonFinite(format!("output of {name}")));
        }
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records an input. Gradients are tracked when `t.requires_grad()`.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        let needs_grad = t.requires_grad();
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records a trainable input (always tracked).
    pub fn param(&mut self, t: Tensor) -> Var {
        self.leaf(t.with_grad())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::dim(format!(
                "matmul: cannot multiply {sa:?} by {sb:?}"
            )));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        kernels::gemm_nn(m, k, n, self.value(a).data(), self.value(b).data(), &mut out);
        let needs = self.needs(a) || self.needs(b);
        self.push(Tensor::new(&[m, n], out)?, Op::MatMul(a, b), needs, "matmul")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y)?;
        let needs = self.needs(a) || self.needs(b);
        self.push(out, Op::Add(a, b), needs, "add")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        let needs = self.needs(a) || self.needs(b);
        self.push(out, Op::Mul(a, b), needs, "mul")
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let out = self.value(a).map(|x| x * factor);
        let needs = self.needs(a);
        self.push(out, Op::Scale(a, factor), needs, "scale")
    }

    /// Adds `bias[d]` along axis 1 of `input` (`[N, D, ...]`), broadcasting
    /// over the batch axis and any trailing spatial axes.
    pub fn bias_add(&mut self, input: Var, bias: Var) -> Result<Var> {
        let shape = self.value(input).shape().to_vec();
        let bshape = self.value(bias).shape();
        if shape.len() < 2 || bshape.len() != 1 || bshape[0] != shape[1] {
            return Err(Error::dim(format!(
                "bias_add: bias {bshape:?} does not match axis 1 of {shape:?}"
            )));
        }
        let inner: usize = shape[2..].iter().product();
        let b = self.value(bias).data().to_vec();
        let mut out = self.value(input).data().to_vec();
        for (i, chunk) in out.chunks_exact_mut(inner).enumerate() {
            let bv = b[i % shape[1]];
            chunk.iter_mut().for_each(|v| *v += bv);
        }
        let needs = self.needs(input) || self.needs(bias);
        self.push(Tensor::new(&shape, out)?, Op::BiasAdd(input, bias), needs, "bias_add")
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        let needs = self.needs(a);
        self.push(out, Op::Relu(a), needs, "relu")
    }

    /// Cross-correlation of `input` `[N,C,H,W]` with `kernel` `[F,C,k,k]`.
    pub fn conv2d(&mut self, input: Var, kernel: Var, stride: usize, padding: usize) -> Result<Var> {
        let si = self.value(input).shape().to_vec();
        let sk = self.value(kernel).shape().to_vec();
        if si.len() != 4 || sk.len() != 4 || sk[1] != si[1] || sk[2] != sk[3] {
            return Err(Error::dim(format!(
                "conv2d: input {si:?} incompatible with kernel {sk:?}"
            )));
        }
        if stride == 0 {
            return Err(Error::dim("conv2d: stride must be positive"));
        }
        let geom = ConvGeom {
            channels: si[1],
            height: si[2],
            width: si[3],
            kernel: sk[2],
            stride,
            padding,
        };
        if geom.kernel > geom.height + 2 * padding || geom.kernel > geom.width + 2 * padding {
            return Err(Error::dim(format!(
                "conv2d: kernel {}x{} larger than padded input {}x{}",
                geom.kernel,
                geom.kernel,
                geom.height + 2 * padding,
                geom.width + 2 * padding
            )));
        }
        let (batch, filters) = (si[0], sk[0]);
        let (plen, pix) = (geom.patch_len(), geom.out_pixels());
        let image_len = geom.channels * geom.height * geom.width;
        let mut cols = vec![0.0; batch * plen * pix];
        let mut out = vec![0.0; batch * filters * pix];
        {
            let x = self.value(input).data();
            let w = self.value(kernel).data();
            for b in 0..batch {
                let c = &mut cols[b * plen * pix..(b + 1) * plen * pix];
                kernels::im2col(&geom, &x[b * image_len..(b + 1) * image_len], c);
                kernels::gemm_nn(
                    filters,
                    plen,
                    pix,
                    w,
                    c,
                    &mut out[b * filters * pix..(b + 1) * filters * pix],
                );
            }
        }
        let shape = [batch, filters, geom.out_height(), geom.out_width()];
        let needs = self.needs(input) || self.needs(kernel);
        self.push(
            Tensor::new(&shape, out)?,
            Op::Conv2d {
                input,
                kernel,
                geom,
                cols,
            },
            needs,
            "conv2d",
        )
    }

    /// 2x2 max pooling with stride 2 over `[N,C,H,W]` (odd edges dropped).
    pub fn max_pool2(&mut self, input: Var) -> Result<Var> {
        let s = self.value(input).shape().to_vec();
        if s.len() != 4 || s[2] < 2 || s[3] < 2 {
            return Err(Error::dim(format!("max_pool2: needs [N,C,H>=2,W>=2], got {s:?}")));
        }
        let (h, w) = (s[2], s[3]);
        let (oh, ow) = (h / 2, w / 2);
        let planes = s[0] * s[1];
        let x = self.value(input).data();
        let mut out = Vec::with_capacity(planes * oh * ow);
        let mut argmax = Vec::with_capacity(planes * oh * ow);
        for p in 0..planes {
            let base = p * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = base + 2 * oy * w + 2 * ox;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = base + (2 * oy + dy) * w + 2 * ox + dx;
                        if x[idx] > x[best] {
                            best = idx;
                        }
                    }
                    out.push(x[best]);
                    argmax.push(best);
                }
            }
        }
        let needs = self.needs(input);
        self.push(
            Tensor::new(&[s[0], s[1], oh, ow], out)?,
            Op::MaxPool2 { input, argmax },
            needs,
            "max_pool2",
        )
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(a).reshape(shape)?;
        let needs = self.needs(a);
        self.push(out, Op::Reshape(a), needs, "reshape")
    }

    /// Collapses everything after axis 0: `[N, ...] -> [N, prod(...)]`.
    pub fn flatten(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).shape();
        let rows = s[0];
        let cols = s[1..].iter().product::<usize>().max(1);
        self.reshape(a, &[rows, cols])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let total = self.value(a).sum();
        let needs = self.needs(a);
        self.push(Tensor::scalar(total), Op::Sum(a), needs, "sum")
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a);
        let m = v.sum() / v.len() as f64;
        let needs = self.needs(a);
        self.push(Tensor::scalar(m), Op::Mean(a), needs, "mean")
    }

    /// Mean over one axis, which is removed from the shape. Values are summed
    /// in sorted order, so the result does not depend on their order along
    /// the axis.
    pub fn mean_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        let s = self.value(a).shape().to_vec();
        if axis >= s.len() {
            return Err(Error::dim(format!("mean_axis: axis {axis} out of range for {s:?}")));
        }
        let outer: usize = s[..axis].iter().product();
        let len = s[axis];
        let inner: usize = s[axis + 1..].iter().product();
        let x = self.value(a).data();
        let mut out = vec![0.0; outer * inner];
        let mut column = Vec::with_capacity(len);
        for o in 0..outer {
            for j in 0..inner {
                column.clear();
                column.extend((0..len).map(|l| x[(o * len + l) * inner + j]));
                column.sort_by(f64::total_cmp);
                out[o * inner + j] = column.iter().sum::<f64>() / len as f64;
            }
        }
        let mut shape: Vec<usize> = s.iter().enumerate().filter(|&(i, _)| i != axis).map(|(_, &d)| d).collect();
        if shape.is_empty() {
            shape.push(1);
        }
        let needs = self.needs(a);
        self.push(
            Tensor::new(&shape, out)?,
            Op::MeanAxis {
                input: a,
                outer,
                len,
                inner,
            },
            needs,
            "mean_axis",
        )
    }

    /// Mean over the batch of `-sum_k t_k log softmax(logits)_k`, computed
    /// with max subtraction.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: Targets<'_>) -> Result<Var> {
        let s = self.value(logits).shape().to_vec();
        if s.len() != 2 {
            return Err(Error::dim(format!("cross entropy: logits must be [N,K], got {s:?}")));
        }
        let (n, k) = (s[0], s[1]);
        if k < 2 {
            return Err(Error::InvalidTarget(format!("need at least 2 classes, got {k}")));
        }
        let dense = dense_targets(targets, n, k)?;
        let z = self.value(logits).data();
        let mut loss = 0.0;
        let mut residual = vec![0.0; n * k];
        for i in 0..n {
            let row = &z[i * k..(i + 1) * k];
            let t = &dense[i * k..(i + 1) * k];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
            for j in 0..k {
                let logp = row[j] - max - lse;
                if t[j] != 0.0 {
                    loss -= t[j] * logp;
                }
                residual[i * k + j] = (logp.exp() - t[j]) / n as f64;
            }
        }
        let needs = self.needs(logits);
        self.push(
            Tensor::scalar(loss / n as f64),
            Op::SoftmaxCe { logits, residual },
            needs,
            "softmax_cross_entropy",
        )
    }

    /// Temporal shift on `[N*T, C, ...]` activations laid out frame-major per
    /// clip. The first `floor(fraction*C)` channels move forward one frame,
    /// the next equally sized group moves back one frame, and the rest stay.
    pub fn temporal_shift(&mut self, a: Var, frames: usize, fraction: f64) -> Result<Var> {
        let s = self.value(a).shape().to_vec();
        let (channels, inner, fold) = shift_layout(&s, frames, fraction)?;
        let mut out = vec![0.0; self.value(a).len()];
        kernels::temporal_shift(self.value(a).data(), &mut out, frames, channels, inner, fold, false);
        let needs = self.needs(a);
        self.push(
            Tensor::new(&s, out)?,
            Op::TemporalShift {
                input: a,
                frames,
                channels,
                inner,
                fold,
            },
            needs,
            "temporal_shift",
        )
    }

    /// Propagates d(loss)/d(node) for every node that needs it.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::dim(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        let grads = grads
            .into_iter()
            .zip(&self.nodes)
            .map(|(g, node)| {
                g.filter(|_| node.needs_grad)
                    .map(|g| Tensor::new(node.value.shape(), g).expect("gradient shape"))
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn slot<'g>(&self, grads: &'g mut [Option<Vec<f64>>], var: Var) -> Option<&'g mut Vec<f64>> {
        if !self.nodes[var.0].needs_grad {
            return None;
        }
        let len = self.nodes[var.0].value.len();
        Some(grads[var.0].get_or_insert_with(|| vec![0.0; len]))
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (sa, sb) = (self.value(*a).shape(), self.value(*b).shape());
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                let bv = self.value(*b).data();
                let av = self.value(*a).data();
                if let Some(ga) = self.slot(grads, *a) {
                    kernels::gemm_nt(m, n, k, g, bv, ga);
                }
                if let Some(gb) = self.slot(grads, *b) {
                    kernels::gemm_tn(k, m, n, av, g, gb);
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if let Some(dst) = self.slot(grads, v) {
                        dst.iter_mut().zip(g).for_each(|(d, &x)| *d += x);
                    }
                }
            }
            Op::Mul(a, b) => {
                let av = self.value(*a).data().to_vec();
                let bv = self.value(*b).data().to_vec();
                if let Some(dst) = self.slot(grads, *a) {
                    for ((d, &x), &y) in dst.iter_mut().zip(g).zip(&bv) {
                        *d += x * y;
                    }
                }
                if let Some(dst) = self.slot(grads, *b) {
                    for ((d, &x), &y) in dst.iter_mut().zip(g).zip(&av) {
                        *d += x * y;
                    }
                }
            }
            Op::Scale(a, f) => {
                if let Some(dst) = self.slot(grads, *a) {
                    dst.iter_mut().zip(g).for_each(|(d, &x)| *d += f * x);
                }
            }
            Op::BiasAdd(input, bias) => {
                let s = self.value(*input).shape();
                let d = s[1];
                let inner: usize = s[2..].iter().product();
                if let Some(dst) = self.slot(grads, *input) {
                    dst.iter_mut().zip(g).for_each(|(o, &x)| *o += x);
                }
                if let Some(dst) = self.slot(grads, *bias) {
                    for (i, chunk) in g.chunks_exact(inner).enumerate() {
                        dst[i % d] += chunk.iter().sum::<f64>();
                    }
                }
            }
            Op::Relu(a) => {
                let x = self.value(*a).data();
                if let Some(dst) = self.slot(grads, *a) {
                    for ((d, &gv), &xv) in dst.iter_mut().zip(g).zip(x) {
                        if xv > 0.0 {
                            *d += gv;
                        }
                    }
                }
            }
            Op::Conv2d {
                input,
                kernel,
                geom,
                cols,
            } => {
                let batch = self.value(*input).shape()[0];
                let filters = self.value(*kernel).shape()[0];
                let (plen, pix) = (geom.patch_len(), geom.out_pixels());
                let image_len = geom.channels * geom.height * geom.width;
                if let Some(gk) = self.slot(grads, *kernel) {
                    for b in 0..batch {
                        kernels::gemm_nt(
                            filters,
                            pix,
                            plen,
                            &g[b * filters * pix..(b + 1) * filters * pix],
                            &cols[b * plen * pix..(b + 1) * plen * pix],
                            gk,
                        );
                    }
                }
                let w = self.value(*kernel).data();
                if let Some(gi) = self.slot(grads, *input) {
                    let mut dcols = vec![0.0; plen * pix];
                    for b in 0..batch {
                        dcols.fill(0.0);
                        kernels::gemm_tn(
                            plen,
                            filters,
                            pix,
                            w,
                            &g[b * filters * pix..(b + 1) * filters * pix],
                            &mut dcols,
                        );
                        kernels::col2im(geom, &dcols, &mut gi[b * image_len..(b + 1) * image_len]);
                    }
                }
            }
            Op::MaxPool2 { input, argmax } => {
                if let Some(dst) = self.slot(grads, *input) {
                    for (&src, &gv) in argmax.iter().zip(g) {
                        dst[src] += gv;
                    }
                }
            }
            Op::Reshape(a) => {
                if let Some(dst) = self.slot(grads, *a) {
                    dst.iter_mut().zip(g).for_each(|(d, &x)| *d += x);
                }
            }
            Op::Sum(a) => {
                if let Some(dst) = self.slot(grads, *a) {
                    dst.iter_mut().for_each(|d| *d += g[0]);
                }
            }
            Op::Mean(a) => {
                if let Some(dst) = self.slot(grads, *a) {
                    let share = g[0] / dst.len() as f64;
                    dst.iter_mut().for_each(|d| *d += share);
                }
            }
            Op::MeanAxis {
                input,
                outer,
                len,
                inner,
            } => {
                if let Some(dst) = self.slot(grads, *input) {
                    let scale = 1.0 / *len as f64;
                    for o in 0..*outer {
                        let src = &g[o * inner..(o + 1) * inner];
                        for l in 0..*len {
                            let d = &mut dst[(o * len + l) * inner..][..*inner];
                            d.iter_mut().zip(src).for_each(|(d, &x)| *d += x * scale);
                        }
                    }
                }
            }
            Op::SoftmaxCe { logits, residual } => {
                if let Some(dst) = self.slot(grads, *logits) {
                    dst.iter_mut().zip(residual).for_each(|(d, &r)| *d += g[0] * r);
                }
            }
            Op::TemporalShift {
                input,
                frames,
                channels,
                inner,
                fold,
            } => {
                if let Some(dst) = self.slot(grads, *input) {
                    let mut back = vec![0.0; g.len()];
                    kernels::temporal_shift(g, &mut back, *frames, *channels, *inner, *fold, true);
                    dst.iter_mut().zip(&back).for_each(|(d, &x)| *d += x);
                }
            }
        }
    }
}

/// Validates a temporal-shift request and returns `(channels, inner, fold)`.
pub(crate) fn shift_layout(shape: &[usize], frames: usize, fraction: f64) -> Result<(usize, usize, usize)> {
    if frames == 0 {
        return Err(Error::EmptyInput("temporal shift over zero frames".into()));
    }
    if !(fraction > 0.0 && fraction <= 0.5) {
        return Err(Error::Parameter(format!(
            "shift fraction must be in (0, 0.5], got {fraction}"
        )));
    }
    if shape.len() < 2 || shape[0] % frames != 0 {
        return Err(Error::dim(format!(
            "temporal shift: leading axis of {shape:?} is not a multiple of {frames} frames"
        )));
    }
    let channels = shape[1];
    let fold = (fraction * channels as f64).floor() as usize;
    if channels < 4 || fold == 0 {
        return Err(Error::dim(format!(
            "temporal shift: {channels} channels leave an empty shifted group at fraction {fraction}"
        )));
    }
    Ok((channels, shape[2..].iter().product(), fold))
}

fn dense_targets(targets: Targets<'_>, n: usize, k: usize) -> Result<Vec<f64>> {
    match targets {
        Targets::Classes(labels) => {
            if labels.len() != n {
                return Err(Error::InvalidTarget(format!(
                    "{} labels for {n} rows",
                    labels.len()
                )));
            }
            let mut dense = vec![0.0; n * k];
            for (i, &y) in labels.iter().enumerate() {
                if y >= k {
                    return Err(Error::InvalidTarget(format!("class {y} out of range for {k} classes")));
                }
                dense[i * k + y] = 1.0;
            }
            Ok(dense)
        }
        Targets::Mixture(t) => {
            if t.shape() != [n, k] {
                return Err(Error::InvalidTarget(format!(
                    "mixture shape {:?} does not match logits [{n}, {k}]",
                    t.shape()
                )));
            }
            for (i, row) in t.data().chunks_exact(k).enumerate() {
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > 1e-6 || row.iter().any(|&v| v < 0.0) {
                    return Err(Error::InvalidTarget(format!(
                        "mixture row {i} sums to {total}, expected 1"
                    )));
                }
            }
            Ok(t.data().to_vec())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_matmul() {
        let mut tape = Tape::new();
        let i = tape.leaf(Tensor::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]).unwrap());
        let b = tape.leaf(Tensor::from_rows(&[&[3.0, 4.0], &[5.0, 6.0]]).unwrap());
        let c = tape.matmul(i, b).unwrap();
        assert_eq!(tape.value(c).data(), &[3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn row_times_column() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::from_rows(&[&[1.0, 2.0]]).unwrap());
        let b = tape.leaf(Tensor::new(&[2, 1], vec![3.0, 4.0]).unwrap());
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[11.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::zeros(&[2, 3]).unwrap());
        let b = tape.leaf(Tensor::zeros(&[2, 3]).unwrap());
        let err = tape.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("[2, 3]"), "{err}");
    }

    #[test]
    fn matmul_gradient_of_sum() {
        // d/dA sum(A B) = 1 * B^T: every row is the row sums of B.
        let mut tape = Tape::new();
        let a = tape.param(Tensor::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]).unwrap());
        let b = tape.leaf(Tensor::from_rows(&[&[2.0, 3.0], &[4.0, 5.0]]).unwrap());
        let c = tape.matmul(a, b).unwrap();
        let s = tape.sum(c).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(a).unwrap().data(), &[5.0, 9.0, 5.0, 9.0]);
        assert!(g.get(b).is_none());
    }

    #[test]
    fn ones_conv_sums_window() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::full(&[1, 1, 3, 3], 1.0).unwrap());
        let k = tape.leaf(Tensor::full(&[1, 1, 3, 3], 1.0).unwrap());
        let y = tape.conv2d(x, k, 1, 0).unwrap();
        assert_eq!(tape.value(y).shape(), &[1, 1, 1, 1]);
        assert_eq!(tape.value(y).data(), &[9.0]);
    }

    #[test]
    fn identity_1x1_conv() {
        let mut tape = Tape::new();
        let data: Vec<f64> = (0..18).map(|i| i as f64 * 0.5).collect();
        let x = tape.leaf(Tensor::new(&[1, 2, 3, 3], data.clone()).unwrap());
        let k = tape.leaf(Tensor::new(&[2, 2, 1, 1], vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let y = tape.conv2d(x, k, 1, 0).unwrap();
        assert_eq!(tape.value(y).data(), data.as_slice());
    }

    #[test]
    fn conv_kernel_too_large() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(&[1, 1, 2, 2]).unwrap());
        let k = tape.leaf(Tensor::zeros(&[1, 1, 3, 3]).unwrap());
        assert!(matches!(tape.conv2d(x, k, 1, 0), Err(Error::Dimension(_))));
        assert!(tape.conv2d(x, k, 1, 1).is_ok());
    }

    #[test]
    fn uniform_logits_cost_ln_k() {
        let mut tape = Tape::new();
        let z = tape.leaf(Tensor::zeros(&[3, 4]).unwrap());
        let l = tape.softmax_cross_entropy(z, Targets::Classes(&[0, 3, 2])).unwrap();
        assert!((tape.value(l).item().unwrap() - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn two_class_closed_form() {
        let mut tape = Tape::new();
        let z = tape.leaf(Tensor::from_rows(&[&[2.0, 0.0]]).unwrap());
        let l = tape.softmax_cross_entropy(z, Targets::Classes(&[0])).unwrap();
        let expected = (1.0 + (-2.0f64).exp()).ln();
        assert!((tape.value(l).item().unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.1269).abs() < 1e-4);
    }

    #[test]
    fn loss_falls_as_margin_grows() {
        let mut last = f64::INFINITY;
        for margin in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0] {
            let mut tape = Tape::new();
            let z = tape.leaf(Tensor::from_rows(&[&[margin, 0.0, 0.0]]).unwrap());
            let l = tape.softmax_cross_entropy(z, Targets::Classes(&[0])).unwrap();
            let v = tape.value(l).item().unwrap();
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn mixture_rows_must_sum_to_one() {
        let mut tape = Tape::new();
        let z = tape.leaf(Tensor::zeros(&[1, 2]).unwrap());
        let bad = Tensor::from_rows(&[&[0.5, 0.4]]).unwrap();
        assert!(matches!(
            tape.softmax_cross_entropy(z, Targets::Mixture(&bad)),
            Err(Error::InvalidTarget(_))
        ));
        let ok = Tensor::from_rows(&[&[0.3, 0.7]]).unwrap();
        assert!(tape.softmax_cross_entropy(z, Targets::Mixture(&ok)).is_ok());
    }

    #[test]
    fn fan_out_accumulates() {
        // f(x) = sum(x*x); evaluating f + f doubles the gradient.
        let x0 = Tensor::new(&[3], vec![1.0, -2.0, 0.5]).unwrap();
        let mut tape = Tape::new();
        let x = tape.param(x0.clone());
        let sq = tape.mul(x, x).unwrap();
        let f = tape.sum(sq).unwrap();
        let single = tape.backward(f).unwrap().get(x).unwrap().clone();
        let ff = tape.add(f, f).unwrap();
        let double = tape.backward(ff).unwrap().get(x).unwrap().clone();
        for (s, d) in single.data().iter().zip(double.data()) {
            assert_eq!(2.0 * s, *d);
        }
        assert_eq!(single.data(), &[2.0, -4.0, 1.0]);
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::new(&[1], vec![f64::MAX]).unwrap());
        assert!(matches!(tape.scale(x, 10.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn shift_needs_frames() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(&[2, 8, 1]).unwrap());
        assert!(matches!(tape.temporal_shift(x, 0, 0.125), Err(Error::EmptyInput(_))));
        let small = tape.leaf(Tensor::zeros(&[2, 3, 1]).unwrap());
        assert!(tape.temporal_shift(small, 2, 0.25).is_err());
    }
}
