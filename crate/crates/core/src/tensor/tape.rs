//! Define-by-run reverse-mode differentiation.
//!
//! Every differentiable op appends one backward closure to the [`Tape`]. Node
//! ids are assigned in creation order, which is a valid topological order, so
//! [`Tape::backward`] just walks the tape in reverse. Values that do not depend
//! on any leaf carry no id and record nothing, so inference pays no tape cost.

use std::cell::RefCell;
use std::rc::Rc;

use super::fft::{check_pow2, fft2_plane};
use super::gemm::{gemm, Mat};
use super::Grid;
use crate::error::{Error, Result};

type BackwardFn = Box<dyn FnOnce(&[f64], &mut GradSink)>;

#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Option<BackwardFn>>>,
}

/// Accumulates gradients by node id during the reverse sweep.
pub struct GradSink {
    grads: Vec<Option<Vec<f64>>>,
}

impl GradSink {
    fn slot(&mut self, id: usize, len: usize) -> &mut [f64] {
        self.grads[id].get_or_insert_with(|| vec![0.0; len])
    }

    fn add(&mut self, id: Option<usize>, g: &[f64]) {
        if let Some(id) = id {
            self.slot(id, g.len())
                .iter_mut()
                .zip(g)
                .for_each(|(a, b)| *a += b);
        }
    }

    fn add_scaled(&mut self, id: Option<usize>, g: &[f64], k: f64) {
        if let Some(id) = id {
            self.slot(id, g.len())
                .iter_mut()
                .zip(g)
                .for_each(|(a, b)| *a += k * b);
        }
    }
}

/// Gradients left at the leaves after [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn wrt(&self, v: &Var<'_>) -> Option<&[f64]> {
        v.id.and_then(|id| self.grads.get(id)?.as_deref())
    }

    /// Gradient shaped like `v`; zeros when nothing reached it.
    pub fn wrt_grid(&self, v: &Var<'_>) -> Grid {
        match self.wrt(v) {
            Some(g) => Grid::from_parts(v.shape().to_vec(), g.to_vec()),
            None => Grid::zeros(v.shape()),
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A leaf that receives a gradient.
    pub fn leaf(&self, value: Grid) -> Var<'_> {
        let id = self.push(None);
        Var {
            tape: self,
            id: Some(id),
            value: Rc::new(value),
        }
    }

    /// A value the tape never differentiates through.
    pub fn constant(&self, value: Grid) -> Var<'_> {
        Var {
            tape: self,
            id: None,
            value: Rc::new(value),
        }
    }

    /// Leaf when `value.requires_grad()`, constant otherwise.
    pub fn var(&self, value: Grid) -> Var<'_> {
        if value.requires_grad() {
            self.leaf(value)
        } else {
            self.constant(value)
        }
    }

    fn push(&self, f: Option<BackwardFn>) -> usize {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(f);
        nodes.len() - 1
    }

    fn record<'t>(
        &'t self,
        value: Grid,
        inputs: &[Option<usize>],
        f: impl FnOnce(&[f64], &mut GradSink) + 'static,
    ) -> Var<'t> {
        debug_assert!(value.all_finite(), "non-finite value produced");
        let id = if inputs.iter().any(Option::is_some) {
            Some(self.push(Some(Box::new(f))))
        } else {
            None
        };
        Var {
            tape: self,
            id,
            value: Rc::new(value),
        }
    }

    /// Reverse sweep from a scalar loss. The recorded graph is released
    /// afterwards; gradients survive only at leaves.
    pub fn backward(&self, loss: &Var<'_>) -> Result<Gradients> {
        if loss.value.len() != 1 {
            return Err(Error::Size(format!(
                "backward needs a scalar loss, got shape {:?}",
                loss.shape()
            )));
        }
        let mut nodes = std::mem::take(&mut *self.nodes.borrow_mut());
        let mut sink = GradSink {
            grads: vec![None; nodes.len()],
        };
        let Some(root) = loss.id else {
            return Ok(Gradients { grads: sink.grads });
        };
        sink.grads[root] = Some(vec![1.0]);
        for id in (0..=root).rev() {
            if let Some(f) = nodes[id].take() {
                if let Some(g) = sink.grads[id].take() {
                    f(&g, &mut sink);
                }
            }
        }
        Ok(Gradients { grads: sink.grads })
    }
}

/// A value on a [`Tape`].
#[derive(Clone)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: Option<usize>,
    value: Rc<Grid>,
}

fn nchw(shape: &[usize]) -> Result<[usize; 4]> {
    match *shape {
        [n, c, h, w] => Ok([n, c, h, w]),
        _ => Err(Error::Size(format!("expected [N,C,H,W], got {shape:?}"))),
    }
}

fn same_shape(a: &Grid, b: &Grid) -> Result<()> {
    a.check_same_shape(b)
}

impl<'t> Var<'t> {
    pub fn value(&self) -> &Grid {
        &self.value
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }

    pub fn tracked(&self) -> bool {
        self.id.is_some()
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn to_grid(&self) -> Grid {
        (*self.value).clone()
    }

    fn vals(&self) -> Rc<Grid> {
        Rc::clone(&self.value)
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Var<'t>> {
        let out = self.value.reshape(shape)?;
        let a = self.id;
        Ok(self.tape.record(out, &[a], move |g, s| s.add(a, g)))
    }

    pub fn add(&self, other: &Var<'t>) -> Result<Var<'t>> {
        let out = self.value.add(&other.value)?;
        let (a, b) = (self.id, other.id);
        Ok(self.tape.record(out, &[a, b], move |g, s| {
            s.add(a, g);
            s.add(b, g);
        }))
    }

    pub fn sub(&self, other: &Var<'t>) -> Result<Var<'t>> {
        let out = self.value.sub(&other.value)?;
        let (a, b) = (self.id, other.id);
        Ok(self.tape.record(out, &[a, b], move |g, s| {
            s.add(a, g);
            s.add_scaled(b, g, -1.0);
        }))
    }

    pub fn mul(&self, other: &Var<'t>) -> Result<Var<'t>> {
        let out = self.value.mul(&other.value)?;
        let (a, b) = (self.id, other.id);
        let (va, vb) = (self.vals(), other.vals());
        Ok(self.tape.record(out, &[a, b], move |g, s| {
            if a.is_some() {
                let ga: Vec<f64> = g.iter().zip(vb.values()).map(|(g, y)| g * y).collect();
                s.add(a, &ga);
            }
            if b.is_some() {
                let gb: Vec<f64> = g.iter().zip(va.values()).map(|(g, x)| g * x).collect();
                s.add(b, &gb);
            }
        }))
    }

    pub fn scale(&self, k: f64) -> Var<'t> {
        let out = self.value.scale(k);
        let a = self.id;
        self.tape.record(out, &[a], move |g, s| s.add_scaled(a, g, k))
    }

    pub fn add_scalar(&self, k: f64) -> Var<'t> {
        let out = self.value.map(|v| v + k);
        let a = self.id;
        self.tape.record(out, &[a], move |g, s| s.add(a, g))
    }

    /// `x · sigmoid(x)`.
    pub fn silu(&self) -> Var<'t> {
        let out = self.value.map(|x| x / (1.0 + (-x).exp()));
        let a = self.id;
        let x = self.vals();
        self.tape.record(out, &[a], move |g, s| {
            let gx: Vec<f64> = g
                .iter()
                .zip(x.values())
                .map(|(g, &x)| {
                    let sig = 1.0 / (1.0 + (-x).exp());
                    g * sig * (1.0 + x * (1.0 - sig))
                })
                .collect();
            s.add(a, &gx);
        })
    }

    pub fn sum(&self) -> Var<'t> {
        let out = Grid::scalar(self.value.sum());
        let a = self.id;
        let n = self.value.len();
        self.tape.record(out, &[a], move |g, s| s.add(a, &vec![g[0]; n]))
    }

    pub fn mean(&self) -> Var<'t> {
        let n = self.value.len() as f64;
        self.sum().scale(1.0 / n)
    }

    /// Mean squared difference, a scalar.
    pub fn mse(&self, target: &Var<'t>) -> Result<Var<'t>> {
        same_shape(&self.value, &target.value)?;
        let n = self.value.len() as f64;
        let diff: Vec<f64> = self
            .value
            .values()
            .iter()
            .zip(target.value.values())
            .map(|(a, b)| a - b)
            .collect();
        let out = Grid::scalar(diff.iter().map(|d| d * d).sum::<f64>() / n);
        let (a, b) = (self.id, target.id);
        Ok(self.tape.record(out, &[a, b], move |g, s| {
            let k = 2.0 * g[0] / n;
            s.add_scaled(a, &diff, k);
            s.add_scaled(b, &diff, -k);
        }))
    }

    /// Adds a per-(sample, channel) value `[N, C]` across every spatial position.
    pub fn add_channelwise(&self, v: &Var<'t>) -> Result<Var<'t>> {
        let [n, c, h, w] = nchw(self.shape())?;
        if v.shape() != [n, c] {
            return Err(Error::Shape {
                axis: "channel",
                expected: n * c,
                got: v.value.len(),
            });
        }
        let hw = h * w;
        let mut out = self.value.values().to_vec();
        for (plane, &b) in out.chunks_mut(hw).zip(v.value.values()) {
            plane.iter_mut().for_each(|x| *x += b);
        }
        let (a, b) = (self.id, v.id);
        Ok(self.tape.record(
            Grid::from_parts(self.shape().to_vec(), out),
            &[a, b],
            move |g, s| {
                s.add(a, g);
                if b.is_some() {
                    let gb: Vec<f64> = g.chunks(hw).map(|p| p.iter().sum()).collect();
                    s.add(b, &gb);
                }
            },
        ))
    }

    /// Elementwise product with a constant mask broadcast over the sample
    /// and/or channel axis (mask dims of 1 broadcast).
    pub fn mul_mask(&self, mask: &Grid) -> Result<Var<'t>> {
        let [n, c, h, w] = nchw(self.shape())?;
        let [mn, mc, mh, mw] = nchw(mask.shape())?;
        if mh != h || mw != w {
            return Err(Error::Shape {
                axis: "mask spatial",
                expected: h * w,
                got: mh * mw,
            });
        }
        if !(mn == 1 || mn == n) || !(mc == 1 || mc == c) {
            return Err(Error::Shape {
                axis: "mask broadcast",
                expected: n * c,
                got: mn * mc,
            });
        }
        let hw = h * w;
        let full: Vec<f64> = (0..n * c)
            .flat_map(|nc| {
                let (ni, ci) = (nc / c, nc % c);
                let off = ((ni % mn) * mc + (ci % mc)) * hw;
                mask.values()[off..off + hw].iter().copied()
            })
            .collect();
        let out: Vec<f64> = self.value.values().iter().zip(&full).map(|(x, m)| x * m).collect();
        let a = self.id;
        Ok(self.tape.record(
            Grid::from_parts(self.shape().to_vec(), out),
            &[a],
            move |g, s| {
                let gx: Vec<f64> = g.iter().zip(&full).map(|(g, m)| g * m).collect();
                s.add(a, &gx);
            },
        ))
    }

    /// `x · wᵀ + b` with `x: [N, in]`, `w: [out, in]`, `b: [out]`.
    pub fn linear(&self, w: &Var<'t>, b: Option<&Var<'t>>) -> Result<Var<'t>> {
        let (n, din) = match *self.shape() {
            [n, d] => (n, d),
            _ => return Err(Error::Size(format!("linear input {:?}", self.shape()))),
        };
        let (dout, win) = match *w.shape() {
            [o, i] => (o, i),
            _ => return Err(Error::Size(format!("linear weight {:?}", w.shape()))),
        };
        if win != din {
            return Err(Error::Shape {
                axis: "linear in_features",
                expected: win,
                got: din,
            });
        }
        let mut out = vec![0.0; n * dout];
        gemm(
            Mat::new(self.value.values(), n, din),
            Mat::new(w.value.values(), dout, din).t(),
            &mut out,
            0.0,
        );
        if let Some(b) = b {
            if b.value.len() != dout {
                return Err(Error::Shape {
                    axis: "linear bias",
                    expected: dout,
                    got: b.value.len(),
                });
            }
            for row in out.chunks_mut(dout) {
                row.iter_mut().zip(b.value.values()).for_each(|(y, b)| *y += b);
            }
        }
        let (xi, wi, bi) = (self.id, w.id, b.and_then(|b| b.id));
        let (xv, wv) = (self.vals(), w.vals());
        Ok(self.tape.record(
            Grid::from_parts(vec![n, dout], out),
            &[xi, wi, bi],
            move |g, s| {
                if let Some(id) = xi {
                    let gx = s.slot(id, n * din);
                    gemm(Mat::new(g, n, dout), Mat::new(wv.values(), dout, din), gx, 1.0);
                }
                if let Some(id) = wi {
                    let gw = s.slot(id, dout * din);
                    gemm(Mat::new(g, n, dout).t(), Mat::new(xv.values(), n, din), gw, 1.0);
                }
                if bi.is_some() {
                    let mut gb = vec![0.0; dout];
                    for row in g.chunks(dout) {
                        gb.iter_mut().zip(row).for_each(|(a, b)| *a += b);
                    }
                    s.add(bi, &gb);
                }
            },
        ))
    }

    /// Cross-correlation of `[N, Cin, H, W]` with `[Cout, Cin, k, k]`.
    pub fn conv2d(
        &self,
        weight: &Var<'t>,
        bias: Option<&Var<'t>>,
        stride: usize,
        pad: usize,
    ) -> Result<Var<'t>> {
        let [n, ci, h, w] = nchw(self.shape())?;
        let [co, wci, k, k2] = nchw(weight.shape())?;
        if wci != ci {
            return Err(Error::Shape {
                axis: "conv in_channels",
                expected: wci,
                got: ci,
            });
        }
        if k != k2 || k % 2 == 0 {
            return Err(Error::Size(format!("conv kernel must be odd and square, got {k}x{k2}")));
        }
        if stride == 0 || h + 2 * pad < k || w + 2 * pad < k {
            return Err(Error::Size(format!(
                "conv geometry invalid: {h}x{w}, k={k}, stride={stride}, pad={pad}"
            )));
        }
        if let Some(b) = bias {
            if b.value.len() != co {
                return Err(Error::Shape {
                    axis: "conv bias",
                    expected: co,
                    got: b.value.len(),
                });
            }
        }
        let geo = ConvGeom {
            ci,
            h,
            w,
            k,
            stride,
            pad,
            ho: (h + 2 * pad - k) / stride + 1,
            wo: (w + 2 * pad - k) / stride + 1,
        };
        let (kk, p) = (ci * k * k, geo.ho * geo.wo);
        let direct = geo.is_pointwise();
        let mut out = vec![0.0; n * co * p];
        let mut cols = if direct { Vec::new() } else { vec![0.0; kk * p] };
        let xv = self.value.values();
        let wv = weight.value.values();
        for (ni, out_n) in out.chunks_mut(co * p).enumerate() {
            let x_n = &xv[ni * ci * h * w..(ni + 1) * ci * h * w];
            let src = if direct {
                x_n
            } else {
                geo.im2col(x_n, &mut cols);
                &cols
            };
            gemm(Mat::new(wv, co, kk), Mat::new(src, kk, p), out_n, 0.0);
            if let Some(b) = bias {
                for (plane, &bv) in out_n.chunks_mut(p).zip(b.value.values()) {
                    plane.iter_mut().for_each(|y| *y += bv);
                }
            }
        }
        let (xi, wi, bi) = (self.id, weight.id, bias.and_then(|b| b.id));
        let (xr, wr) = (self.vals(), weight.vals());
        Ok(self.tape.record(
            Grid::from_parts(vec![n, co, geo.ho, geo.wo], out),
            &[xi, wi, bi],
            move |g, s| {
                let xv = xr.values();
                let wv = wr.values();
                let mut cols = if direct { Vec::new() } else { vec![0.0; kk * p] };
                if let Some(id) = wi {
                    let mut gw = vec![0.0; co * kk];
                    for ni in 0..n {
                        let x_n = &xv[ni * ci * h * w..(ni + 1) * ci * h * w];
                        let src = if direct {
                            x_n
                        } else {
                            geo.im2col(x_n, &mut cols);
                            &cols
                        };
                        gemm(
                            Mat::new(&g[ni * co * p..(ni + 1) * co * p], co, p),
                            Mat::new(src, kk, p).t(),
                            &mut gw,
                            1.0,
                        );
                    }
                    s.add(Some(id), &gw);
                }
                if bi.is_some() {
                    let mut gb = vec![0.0; co];
                    for (i, plane) in g.chunks(p).enumerate() {
                        gb[i % co] += plane.iter().sum::<f64>();
                    }
                    s.add(bi, &gb);
                }
                if let Some(id) = xi {
                    let gx = s.slot(id, n * ci * h * w);
                    for ni in 0..n {
                        let g_n = &g[ni * co * p..(ni + 1) * co * p];
                        let gx_n = &mut gx[ni * ci * h * w..(ni + 1) * ci * h * w];
                        if direct {
                            gemm(Mat::new(wv, co, kk).t(), Mat::new(g_n, co, p), gx_n, 1.0);
                        } else {
                            gemm(Mat::new(wv, co, kk).t(), Mat::new(g_n, co, p), &mut cols, 0.0);
                            geo.col2im_add(&cols, gx_n);
                        }
                    }
                }
            },
        ))
    }

    /// Group normalization over `[N, C, H, W]` with per-channel affine.
    pub fn group_norm(
        &self,
        groups: usize,
        gamma: &Var<'t>,
        beta: &Var<'t>,
        eps: f64,
    ) -> Result<Var<'t>> {
        let [n, c, h, w] = nchw(self.shape())?;
        if groups == 0 || c % groups != 0 {
            return Err(Error::Size(format!("{c} channels not divisible into {groups} groups")));
        }
        if gamma.value.len() != c || beta.value.len() != c {
            return Err(Error::Shape {
                axis: "group_norm affine",
                expected: c,
                got: gamma.value.len(),
            });
        }
        let hw = h * w;
        let cpg = c / groups;
        let m = cpg * hw;
        let xv = self.value.values();
        let mut xhat = vec![0.0; xv.len()];
        let mut inv_std = vec![0.0; n * groups];
        for (gi, (xs, hs)) in xv.chunks(m).zip(xhat.chunks_mut(m)).enumerate() {
            let mean = xs.iter().sum::<f64>() / m as f64;
            let var = xs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m as f64;
            let inv = 1.0 / (var + eps).sqrt();
            inv_std[gi] = inv;
            hs.iter_mut().zip(xs).for_each(|(o, x)| *o = (x - mean) * inv);
        }
        let gv = gamma.value.values();
        let bv = beta.value.values();
        let mut out = vec![0.0; xv.len()];
        for (pi, (o, xh)) in out.chunks_mut(hw).zip(xhat.chunks(hw)).enumerate() {
            let ch = pi % c;
            o.iter_mut().zip(xh).for_each(|(o, x)| *o = x * gv[ch] + bv[ch]);
        }
        let (xi, gi, bi) = (self.id, gamma.id, beta.id);
        let gr = gamma.vals();
        Ok(self.tape.record(
            Grid::from_parts(self.shape().to_vec(), out),
            &[xi, gi, bi],
            move |g, s| {
                let gv = gr.values();
                if gi.is_some() || bi.is_some() {
                    let mut gg = vec![0.0; c];
                    let mut gb = vec![0.0; c];
                    for (pi, (gp, xh)) in g.chunks(hw).zip(xhat.chunks(hw)).enumerate() {
                        let ch = pi % c;
                        gg[ch] += gp.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>();
                        gb[ch] += gp.iter().sum::<f64>();
                    }
                    s.add(gi, &gg);
                    s.add(bi, &gb);
                }
                if xi.is_some() {
                    let mut gx = vec![0.0; g.len()];
                    for (grp, ((gp, xh), out)) in g
                        .chunks(m)
                        .zip(xhat.chunks(m))
                        .zip(gx.chunks_mut(m))
                        .enumerate()
                    {
                        let c0 = (grp % groups) * cpg;
                        let dxhat = |i: usize| gp[i] * gv[c0 + i / hw];
                        let mut mean_d = 0.0;
                        let mut mean_dx = 0.0;
                        for i in 0..m {
                            let d = dxhat(i);
                            mean_d += d;
                            mean_dx += d * xh[i];
                        }
                        mean_d /= m as f64;
                        mean_dx /= m as f64;
                        let inv = inv_std[grp];
                        for i in 0..m {
                            out[i] = inv * (dxhat(i) - mean_d - xh[i] * mean_dx);
                        }
                    }
                    s.add(xi, &gx);
                }
            },
        ))
    }

    /// Nearest-neighbour 2× spatial upsampling.
    pub fn upsample2x(&self) -> Result<Var<'t>> {
        let [n, c, h, w] = nchw(self.shape())?;
        let (h2, w2) = (2 * h, 2 * w);
        let xv = self.value.values();
        let mut out = vec![0.0; n * c * h2 * w2];
        for (src, dst) in xv.chunks(h * w).zip(out.chunks_mut(h2 * w2)) {
            for y in 0..h2 {
                for x in 0..w2 {
                    dst[y * w2 + x] = src[(y / 2) * w + x / 2];
                }
            }
        }
        let a = self.id;
        Ok(self.tape.record(
            Grid::from_parts(vec![n, c, h2, w2], out),
            &[a],
            move |g, s| {
                let mut gx = vec![0.0; n * c * h * w];
                for (src, dst) in g.chunks(h2 * w2).zip(gx.chunks_mut(h * w)) {
                    for y in 0..h2 {
                        for x in 0..w2 {
                            dst[(y / 2) * w + x / 2] += src[y * w2 + x];
                        }
                    }
                }
                s.add(a, &gx);
            },
        ))
    }

    /// Concatenates `[N, Ci, H, W]` inputs along the channel axis.
    pub fn concat_channels(parts: &[&Var<'t>]) -> Result<Var<'t>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("concat of zero tensors"))?;
        let [n, _, h, w] = nchw(first.shape())?;
        let mut chans = Vec::with_capacity(parts.len());
        for p in parts {
            let [pn, pc, ph, pw] = nchw(p.shape())?;
            if pn != n || ph != h || pw != w {
                return Err(Error::Shape {
                    axis: "concat spatial",
                    expected: n * h * w,
                    got: pn * ph * pw,
                });
            }
            chans.push(pc);
        }
        let hw = h * w;
        let ctot: usize = chans.iter().sum();
        let mut out = Vec::with_capacity(n * ctot * hw);
        for ni in 0..n {
            for (p, &pc) in parts.iter().zip(&chans) {
                out.extend_from_slice(&p.value.values()[ni * pc * hw..(ni + 1) * pc * hw]);
            }
        }
        let ids: Vec<Option<usize>> = parts.iter().map(|p| p.id).collect();
        Ok(first.tape.record(
            Grid::from_parts(vec![n, ctot, h, w], out),
            &ids.clone(),
            move |g, s| {
                for (pi, (&id, &pc)) in ids.iter().zip(&chans).enumerate() {
                    if id.is_none() {
                        continue;
                    }
                    let off: usize = chans[..pi].iter().sum();
                    let mut gp = Vec::with_capacity(n * pc * hw);
                    for ni in 0..n {
                        let base = (ni * ctot + off) * hw;
                        gp.extend_from_slice(&g[base..base + pc * hw]);
                    }
                    s.add(id, &gp);
                }
            },
        ))
    }

    /// Channels `[start, start + len)` of a `[N, C, H, W]` value.
    pub fn slice_channels(&self, start: usize, len: usize) -> Result<Var<'t>> {
        let [n, c, h, w] = nchw(self.shape())?;
        if start + len > c || len == 0 {
            return Err(Error::Shape {
                axis: "channel slice",
                expected: c,
                got: start + len,
            });
        }
        let hw = h * w;
        let mut out = Vec::with_capacity(n * len * hw);
        for ni in 0..n {
            let base = (ni * c + start) * hw;
            out.extend_from_slice(&self.value.values()[base..base + len * hw]);
        }
        let a = self.id;
        Ok(self.tape.record(
            Grid::from_parts(vec![n, len, h, w], out),
            &[a],
            move |g, s| {
                if let Some(id) = a {
                    let gx = s.slot(id, n * c * hw);
                    for ni in 0..n {
                        let base = (ni * c + start) * hw;
                        gx[base..base + len * hw]
                            .iter_mut()
                            .zip(&g[ni * len * hw..(ni + 1) * len * hw])
                            .for_each(|(a, b)| *a += b);
                    }
                }
            },
        ))
    }

    /// Unnormalized 2D DFT of every plane, returned as stacked real and
    /// imaginary channels: `[N, C, H, W] -> [N, 2C, H, W]`.
    pub fn fft2_stacked(&self) -> Result<Var<'t>> {
        let [n, c, h, w] = nchw(self.shape())?;
        check_pow2(h, w)?;
        let hw = h * w;
        let mut out = vec![0.0; n * 2 * c * hw];
        let mut im = vec![0.0; hw];
        for ni in 0..n {
            for ci in 0..c {
                let src = &self.value.values()[(ni * c + ci) * hw..(ni * c + ci + 1) * hw];
                let re_off = (ni * 2 * c + ci) * hw;
                let im_off = (ni * 2 * c + c + ci) * hw;
                let re = &mut out[re_off..re_off + hw];
                re.copy_from_slice(src);
                im.iter_mut().for_each(|v| *v = 0.0);
                fft2_plane(re, &mut im, h, w, false);
                out[im_off..im_off + hw].copy_from_slice(&im);
            }
        }
        let a = self.id;
        Ok(self.tape.record(
            Grid::from_parts(vec![n, 2 * c, h, w], out),
            &[a],
            move |g, s| {
                // adjoint of the forward DFT is the unnormalized inverse DFT
                let mut gx = vec![0.0; n * c * hw];
                let mut re = vec![0.0; hw];
                let mut im = vec![0.0; hw];
                for ni in 0..n {
                    for ci in 0..c {
                        re.copy_from_slice(&g[(ni * 2 * c + ci) * hw..][..hw]);
                        im.copy_from_slice(&g[(ni * 2 * c + c + ci) * hw..][..hw]);
                        fft2_plane(&mut re, &mut im, h, w, true);
                        gx[(ni * c + ci) * hw..][..hw].copy_from_slice(&re);
                    }
                }
                s.add(a, &gx);
            },
        ))
    }

    /// Real part of the normalized inverse DFT of stacked `[re, im]` channels:
    /// `[N, 2C, H, W] -> [N, C, H, W]`.
    pub fn ifft2_real(&self) -> Result<Var<'t>> {
        let [n, c2, h, w] = nchw(self.shape())?;
        if c2 % 2 != 0 {
            return Err(Error::Size(format!("ifft2_real needs an even channel count, got {c2}")));
        }
        check_pow2(h, w)?;
        let c = c2 / 2;
        let hw = h * w;
        let norm = 1.0 / hw as f64;
        let mut out = vec![0.0; n * c * hw];
        let mut re = vec![0.0; hw];
        let mut im = vec![0.0; hw];
        let v = self.value.values();
        for ni in 0..n {
            for ci in 0..c {
                re.copy_from_slice(&v[(ni * c2 + ci) * hw..][..hw]);
                im.copy_from_slice(&v[(ni * c2 + c + ci) * hw..][..hw]);
                fft2_plane(&mut re, &mut im, h, w, true);
                out[(ni * c + ci) * hw..][..hw]
                    .iter_mut()
                    .zip(&re)
                    .for_each(|(o, r)| *o = r * norm);
            }
        }
        let a = self.id;
        Ok(self.tape.record(
            Grid::from_parts(vec![n, c, h, w], out),
            &[a],
            move |g, s| {
                let mut gx = vec![0.0; n * c2 * hw];
                let mut re = vec![0.0; hw];
                let mut im = vec![0.0; hw];
                for ni in 0..n {
                    for ci in 0..c {
                        re.copy_from_slice(&g[(ni * c + ci) * hw..][..hw]);
                        im.iter_mut().for_each(|v| *v = 0.0);
                        fft2_plane(&mut re, &mut im, h, w, false);
                        gx[(ni * c2 + ci) * hw..][..hw]
                            .iter_mut()
                            .zip(&re)
                            .for_each(|(o, r)| *o = r * norm);
                        gx[(ni * c2 + c + ci) * hw..][..hw]
                            .iter_mut()
                            .zip(&im)
                            .for_each(|(o, i)| *o = i * norm);
                    }
                }
                s.add(a, &gx);
            },
        ))
    }
}

#[derive(Clone, Copy)]
struct ConvGeom {
    ci: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
}

impl ConvGeom {
    fn is_pointwise(&self) -> bool {
        self.k == 1 && self.stride == 1 && self.pad == 0
    }

    fn im2col(&self, x: &[f64], cols: &mut [f64]) {
        let p = self.ho * self.wo;
        for c in 0..self.ci {
            let plane = &x[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ky in 0..self.k {
                for kx in 0..self.k {
                    let row = &mut cols[((c * self.k + ky) * self.k + kx) * p..][..p];
                    for oy in 0..self.ho {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        let dst = &mut row[oy * self.wo..(oy + 1) * self.wo];
                        if iy < 0 || iy >= self.h as isize {
                            dst.iter_mut().for_each(|v| *v = 0.0);
                            continue;
                        }
                        let src = &plane[iy as usize * self.w..(iy as usize + 1) * self.w];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            *d = if ix < 0 || ix >= self.w as isize {
                                0.0
                            } else {
                                src[ix as usize]
                            };
                        }
                    }
                }
            }
        }
    }

    fn col2im_add(&self, cols: &[f64], x: &mut [f64]) {
        let p = self.ho * self.wo;
        for c in 0..self.ci {
            let plane = &mut x[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ky in 0..self.k {
                for kx in 0..self.k {
                    let row = &cols[((c * self.k + ky) * self.k + kx) * p..][..p];
                    for oy in 0..self.ho {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy >= self.h as isize {
                            continue;
                        }
                        let dst = &mut plane[iy as usize * self.w..(iy as usize + 1) * self.w];
                        for ox in 0..self.wo {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix >= 0 && ix < self.w as isize {
                                dst[ix as usize] += row[oy * self.wo + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}
