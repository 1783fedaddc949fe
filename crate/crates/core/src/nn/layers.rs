use rand::Rng;

use super::{Bound, ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::tensor::{Grid, Var};

fn he_normal<R: Rng + ?Sized>(shape: &[usize], fan_in: usize, gain: f64, rng: &mut R) -> Grid {
    Grid::randn(shape, rng).scale(gain / (fan_in as f64).sqrt())
}

/// How a layer's weights start.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    Normal(f64),
    Zero,
}

#[derive(Clone, Debug)]
pub struct Conv {
    pub weight: ParamId,
    pub bias: ParamId,
    pub stride: usize,
    pub pad: usize,
}

impl Conv {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
        stride: usize,
        init: Init,
        rng: &mut R,
    ) -> Self {
        let shape = [cout, cin, k, k];
        let w = match init {
            Init::Normal(gain) => he_normal(&shape, cin * k * k, gain, rng),
            Init::Zero => Grid::zeros(&shape),
        };
        Conv {
            weight: store.add(format!("{name}.w"), w),
            bias: store.add(format!("{name}.b"), Grid::zeros(&[cout])),
            stride,
            pad: k / 2,
        }
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, x: &Var<'t>) -> Result<Var<'t>> {
        x.conv2d(p.get(self.weight), Some(p.get(self.bias)), self.stride, self.pad)
    }
}

#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        din: usize,
        dout: usize,
        init: Init,
        rng: &mut R,
    ) -> Self {
        let w = match init {
            Init::Normal(gain) => he_normal(&[dout, din], din, gain, rng),
            Init::Zero => Grid::zeros(&[dout, din]),
        };
        Linear {
            weight: store.add(format!("{name}.w"), w),
            bias: store.add(format!("{name}.b"), Grid::zeros(&[dout])),
        }
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, x: &Var<'t>) -> Result<Var<'t>> {
        x.linear(p.get(self.weight), Some(p.get(self.bias)))
    }
}

#[derive(Clone, Debug)]
pub struct GroupNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub groups: usize,
}

impl GroupNorm {
    pub const EPS: f64 = 1e-5;

    pub fn new(store: &mut ParamStore, name: &str, channels: usize, groups: usize) -> Result<Self> {
        if groups == 0 || !channels.is_multiple_of(groups) {
            return Err(Error::invalid(format!("{channels} channels not divisible into {groups} norm groups")));
        }
        Ok(GroupNorm {
            gamma: store.add(format!("{name}.g"), Grid::ones(&[channels])),
            beta: store.add(format!("{name}.b"), Grid::zeros(&[channels])),
            groups,
        })
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, x: &Var<'t>) -> Result<Var<'t>> {
        x.group_norm(self.groups, p.get(self.gamma), p.get(self.beta), Self::EPS)
    }
}

/// Pre-activation residual block with an additive conditioning vector.
#[derive(Clone, Debug)]
pub struct ResBlock {
    norm1: GroupNorm,
    conv1: Conv,
    emb: Linear,
    norm2: GroupNorm,
    conv2: Conv,
    skip: Option<Conv>,
}

impl ResBlock {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        cin: usize,
        cout: usize,
        emb_dim: usize,
        groups: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(ResBlock {
            norm1: GroupNorm::new(store, &format!("{name}.n1"), cin, groups)?,
            conv1: Conv::new(store, &format!("{name}.c1"), cin, cout, 3, 1, Init::Normal(1.0), rng),
            emb: Linear::new(store, &format!("{name}.e"), emb_dim, cout, Init::Normal(1.0), rng),
            norm2: GroupNorm::new(store, &format!("{name}.n2"), cout, groups)?,
            conv2: Conv::new(store, &format!("{name}.c2"), cout, cout, 3, 1, Init::Normal(0.5), rng),
            skip: (cin != cout)
                .then(|| Conv::new(store, &format!("{name}.s"), cin, cout, 1, 1, Init::Normal(1.0), rng)),
        })
    }

    /// `emb` is the shared `[N, E]` conditioning vector, already activated.
    pub fn forward<'t>(&self, p: &Bound<'t>, x: &Var<'t>, emb: &Var<'t>) -> Result<Var<'t>> {
        let h = self.conv1.forward(p, &self.norm1.forward(p, x)?.silu())?;
        let h = h.add_channelwise(&self.emb.forward(p, emb)?)?;
        let h = self.conv2.forward(p, &self.norm2.forward(p, &h)?.silu())?;
        let shortcut = match &self.skip {
            Some(s) => s.forward(p, x)?,
            None => x.clone(),
        };
        h.add(&shortcut)
    }
}

/// Sinusoidal embedding of a diffusion timestep, `dim` even.
pub fn timestep_embed(t: usize, dim: usize) -> Result<Grid> {
    if t == 0 {
        return Err(Error::invalid("timesteps start at 1"));
    }
    if dim == 0 || !dim.is_multiple_of(2) {
        return Err(Error::invalid(format!("embedding dim must be even and positive, got {dim}")));
    }
    let half = dim / 2;
    let mut v = vec![0.0; dim];
    for i in 0..half {
        let freq = (-(10000f64.ln()) * i as f64 / half as f64).exp();
        let a = t as f64 * freq;
        v[i] = a.sin();
        v[half + i] = a.cos();
    }
    Grid::new(&[dim], v)
}
