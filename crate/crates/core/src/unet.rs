//! Pixel-space ε-prediction U-Net whose decoder layers take skip, control and
//! base features through explicit injection points.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freqbalance::{fuse_var, gamma_modulate_var, FreqEnhanceParams};
use crate::glyphdata::{font, MAX_LINES, MAX_LINE_CHARS};
use crate::nn::{timestep_embed, Bound, Conv, GroupNorm, Init, Linear, ParamStore, ResBlock};
use crate::tensor::{Grid, Tape, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UNetConfig {
    pub in_channels: usize,
    pub image_size: usize,
    pub base_channels: usize,
    /// Channel multiplier per level; its length is the level count.
    pub channel_mults: Vec<usize>,
    pub time_embed_dim: usize,
    pub cond_embed_dim: usize,
    pub norm_groups: usize,
    pub num_classes: usize,
}

impl Default for UNetConfig {
    fn default() -> Self {
        UNetConfig {
            in_channels: 1,
            image_size: 32,
            base_channels: 16,
            channel_mults: vec![1, 2, 2],
            time_embed_dim: 32,
            cond_embed_dim: 64,
            norm_groups: 4,
            num_classes: font::NUM_CLASSES,
        }
    }
}

impl UNetConfig {
    pub fn levels(&self) -> usize {
        self.channel_mults.len()
    }

    pub fn channels(&self, level: usize) -> usize {
        self.base_channels * self.channel_mults[level]
    }

    /// Spatial size at `level`.
    pub fn size_at(&self, level: usize) -> usize {
        self.image_size >> level
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels() < 2 {
            return Err(Error::invalid("U-Net needs at least two levels"));
        }
        if !crate::tensor::fft::is_pow2(self.image_size) || self.size_at(self.levels() - 1) < 2 {
            return Err(Error::invalid(format!(
                "image size {} must be a power of two that survives {} halvings",
                self.image_size,
                self.levels() - 1
            )));
        }
        if self.channel_mults.contains(&0) || self.in_channels == 0 || self.num_classes == 0 {
            return Err(Error::invalid("channel counts must be positive"));
        }
        if (0..self.levels()).any(|l| !self.channels(l).is_multiple_of(self.norm_groups)) {
            return Err(Error::invalid("every level width must divide into the norm groups"));
        }
        if !self.time_embed_dim.is_multiple_of(2) {
            return Err(Error::invalid("time embedding width must be even"));
        }
        Ok(())
    }
}

/// Glyph-class identity of the requested text, mean-pooled over characters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConditionEmbedding {
    pub class_sequences: Vec<Vec<usize>>,
}

impl ConditionEmbedding {
    pub fn new(class_sequences: Vec<Vec<usize>>) -> Result<Self> {
        if class_sequences.len() > MAX_LINES || class_sequences.iter().any(|s| s.len() > MAX_LINE_CHARS) {
            return Err(Error::invalid(format!(
                "condition allows at most {MAX_LINES} lines of {MAX_LINE_CHARS} classes"
            )));
        }
        Ok(ConditionEmbedding { class_sequences })
    }

    pub fn unconditional() -> Self {
        Self::default()
    }

    /// Pooling weights over `num_classes`; zero when empty.
    pub fn weights(&self, num_classes: usize) -> Result<Vec<f64>> {
        let mut w = vec![0.0; num_classes];
        let ids: Vec<usize> = self.class_sequences.iter().flatten().copied().collect();
        for &id in &ids {
            if id >= num_classes {
                return Err(Error::invalid(format!("class id {id} outside {num_classes} classes")));
            }
            w[id] += 1.0 / ids.len() as f64;
        }
        Ok(w)
    }

    /// `[N, K]` pooling matrix for a batch.
    pub fn batch(conds: &[ConditionEmbedding], num_classes: usize) -> Result<Grid> {
        let mut v = Vec::with_capacity(conds.len() * num_classes);
        for c in conds {
            v.extend(c.weights(num_classes)?);
        }
        Grid::new(&[conds.len(), num_classes], v)
    }
}

/// Time embedding MLP plus the class-embedding table, producing the
/// activated conditioning vector consumed by every residual block.
#[derive(Clone, Debug)]
pub struct Embedder {
    time1: Linear,
    time2: Linear,
    class: Linear,
    time_dim: usize,
}

impl Embedder {
    pub fn new(store: &mut ParamStore, prefix: &str, cfg: &UNetConfig, rng: &mut ChaCha8Rng) -> Self {
        let e = cfg.cond_embed_dim;
        Embedder {
            time1: Linear::new(store, &format!("{prefix}t1"), cfg.time_embed_dim, e, Init::Normal(1.0), rng),
            time2: Linear::new(store, &format!("{prefix}t2"), e, e, Init::Normal(1.0), rng),
            class: Linear::new(store, &format!("{prefix}cls"), cfg.num_classes, e, Init::Normal(1.0), rng),
            time_dim: cfg.time_embed_dim,
        }
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, tape: &'t Tape, ts: &[usize], cond: &Grid) -> Result<Var<'t>> {
        let rows = ts
            .iter()
            .map(|&t| timestep_embed(t, self.time_dim))
            .collect::<Result<Vec<_>>>()?;
        let mut flat = Vec::with_capacity(ts.len() * self.time_dim);
        rows.iter().for_each(|r| flat.extend_from_slice(r.values()));
        let temb = tape.constant(Grid::new(&[ts.len(), self.time_dim], flat)?);
        let h = self.time2.forward(p, &self.time1.forward(p, &temb)?.silu())?;
        let c = self.class.forward(p, &tape.constant(cond.clone()))?;
        Ok(h.add(&c)?.silu())
    }
}

/// Input convolution, one residual block per level and stride-2 downsampling
/// between levels. Shared by the U-Net and the control branches.
#[derive(Clone, Debug)]
pub struct Encoder {
    conv_in: Conv,
    blocks: Vec<ResBlock>,
    downs: Vec<Conv>,
}

impl Encoder {
    pub fn new(store: &mut ParamStore, prefix: &str, cfg: &UNetConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        let conv_in = Conv::new(store, &format!("{prefix}in"), cfg.in_channels, cfg.channels(0), 3, 1, Init::Normal(1.0), rng);
        let mut blocks = Vec::new();
        let mut downs = Vec::new();
        let mut ch = cfg.channels(0);
        for l in 0..cfg.levels() {
            let out = cfg.channels(l);
            blocks.push(ResBlock::new(store, &format!("{prefix}res{l}"), ch, out, cfg.cond_embed_dim, cfg.norm_groups, rng)?);
            ch = out;
            if l + 1 < cfg.levels() {
                downs.push(Conv::new(store, &format!("{prefix}down{l}"), ch, ch, 3, 2, Init::Normal(1.0), rng));
            }
        }
        Ok(Encoder { conv_in, blocks, downs })
    }

    /// Skip features by level, finest first. `hint` is added after the input conv.
    pub fn forward<'t>(&self, p: &Bound<'t>, x: &Var<'t>, emb: &Var<'t>, hint: Option<&Var<'t>>) -> Result<Vec<Var<'t>>> {
        let mut h = self.conv_in.forward(p, x)?;
        if let Some(hint) = hint {
            h = h.add(hint)?;
        }
        let mut skips = Vec::with_capacity(self.blocks.len());
        for (l, block) in self.blocks.iter().enumerate() {
            h = block.forward(p, &h, emb)?;
            skips.push(h.clone());
            if let Some(down) = self.downs.get(l) {
                h = down.forward(p, &h)?;
            }
        }
        Ok(skips)
    }
}

#[derive(Clone, Debug)]
struct DecoderLayer {
    block: ResBlock,
    up: Option<Conv>,
}

/// The three feature tensors entering one decoder layer.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderInputs {
    pub base: Grid,
    pub skip: Grid,
    pub control: Option<Grid>,
}

/// What [`UNet::encode`] hands to the decoder.
#[derive(Clone)]
pub struct Encoded<'t> {
    pub emb: Var<'t>,
    /// Skip features by level, finest first.
    pub skips: Vec<Var<'t>>,
    /// Output of the middle block: the first decoder layer's base feature.
    pub mid: Var<'t>,
}

#[derive(Clone, Debug)]
pub struct UNet {
    pub cfg: UNetConfig,
    pub params: ParamStore,
    embedder: Embedder,
    encoder: Encoder,
    mid: ResBlock,
    decoder: Vec<DecoderLayer>,
    out_norm: GroupNorm,
    out_conv: Conv,
}

impl UNet {
    pub fn new(cfg: UNetConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let embedder = Embedder::new(&mut store, "emb.", &cfg, &mut rng);
        let encoder = Encoder::new(&mut store, "enc.", &cfg, &mut rng)?;
        let top = cfg.levels() - 1;
        let mid = ResBlock::new(&mut store, "mid", cfg.channels(top), cfg.channels(top), cfg.cond_embed_dim, cfg.norm_groups, &mut rng)?;
        let mut decoder = Vec::new();
        for l in (0..cfg.levels()).rev() {
            let c = cfg.channels(l);
            let block = ResBlock::new(&mut store, &format!("dec{l}.res"), 2 * c, c, cfg.cond_embed_dim, cfg.norm_groups, &mut rng)?;
            let up = (l > 0).then(|| {
                Conv::new(&mut store, &format!("dec{l}.up"), c, cfg.channels(l - 1), 3, 1, Init::Normal(1.0), &mut rng)
            });
            decoder.push(DecoderLayer { block, up });
        }
        let out_norm = GroupNorm::new(&mut store, "out.n", cfg.channels(0), cfg.norm_groups)?;
        let out_conv = Conv::new(&mut store, "out.c", cfg.channels(0), cfg.in_channels, 3, 1, Init::Normal(1.0), &mut rng);
        Ok(UNet {
            cfg,
            params: store,
            embedder,
            encoder,
            mid,
            decoder,
            out_norm,
            out_conv,
        })
    }

    /// Decoder layer count, equal to the level count.
    pub fn decoder_layers(&self) -> usize {
        self.decoder.len()
    }

    /// Level feeding decoder layer `i` (deepest first).
    pub fn layer_level(&self, i: usize) -> usize {
        self.cfg.levels() - 1 - i
    }

    pub fn check_input(&self, x: &[usize], n: usize) -> Result<()> {
        let (c, s) = (self.cfg.in_channels, self.cfg.image_size);
        if x != [n, c, s, s] {
            return Err(Error::Size(format!("U-Net expects [{n}, {c}, {s}, {s}], got {x:?}")));
        }
        Ok(())
    }

    pub fn encode<'t>(&self, p: &Bound<'t>, x: &Var<'t>, ts: &[usize], cond: &Grid) -> Result<Encoded<'t>> {
        self.check_input(x.shape(), ts.len())?;
        let emb = self.embedder.forward(p, x.tape(), ts, cond)?;
        let skips = self.encoder.forward(p, x, &emb, None)?;
        let mid = self.mid.forward(p, skips.last().expect("levels >= 2"), &emb)?;
        Ok(Encoded { emb, skips, mid })
    }

    /// Runs the decoder. `controls` are ordered by decoder layer (deepest
    /// first). Without `enhance` each layer sees `[S + C, F]`; with it,
    /// `[S + α·γ(C), β·F]`.
    pub fn decode<'t>(
        &self,
        p: &Bound<'t>,
        enc: &Encoded<'t>,
        controls: Option<&[Var<'t>]>,
        enhance: Option<&FreqEnhanceParams>,
        mut capture: Option<&mut Vec<DecoderInputs>>,
    ) -> Result<Var<'t>> {
        if let Some(c) = controls {
            if c.len() != self.decoder.len() {
                return Err(Error::Shape {
                    axis: "decoder layers",
                    expected: self.decoder.len(),
                    got: c.len(),
                });
            }
        }
        let neutral = FreqEnhanceParams::neutral();
        let mut f = enc.mid.clone();
        for (i, layer) in self.decoder.iter().enumerate() {
            let s = &enc.skips[self.layer_level(i)];
            let c = controls.map(|c| &c[i]);
            if let Some(c) = c {
                s.value().check_same_shape(c.value())?;
            }
            if let Some(cap) = capture.as_deref_mut() {
                cap.push(DecoderInputs {
                    base: f.to_grid(),
                    skip: s.to_grid(),
                    control: c.map(Var::to_grid),
                });
            }
            let input = match enhance {
                Some(e) => {
                    let cp = c.map(|c| gamma_modulate_var(c, e)).transpose()?;
                    fuse_var(&f, s, cp.as_ref(), e)?
                }
                None => fuse_var(&f, s, c, &neutral)?,
            };
            f = layer.block.forward(p, &input, &enc.emb)?;
            if let Some(up) = &layer.up {
                f = up.forward(p, &f.upsample2x()?)?;
            }
        }
        self.out_conv.forward(p, &self.out_norm.forward(p, &f)?.silu())
    }

    pub fn forward<'t>(
        &self,
        p: &Bound<'t>,
        x: &Var<'t>,
        ts: &[usize],
        cond: &Grid,
        controls: Option<&[Var<'t>]>,
        enhance: Option<&FreqEnhanceParams>,
    ) -> Result<Var<'t>> {
        let enc = self.encode(p, x, ts, cond)?;
        self.decode(p, &enc, controls, enhance, None)
    }

    /// Inference on plain grids.
    pub fn predict(
        &self,
        x: &Grid,
        ts: &[usize],
        cond: &Grid,
        controls: Option<&[Grid]>,
        enhance: Option<&FreqEnhanceParams>,
    ) -> Result<Grid> {
        let tape = Tape::new();
        let p = self.params.bind(&tape, false);
        let c: Option<Vec<Var>> = controls.map(|c| c.iter().map(|g| tape.constant(g.clone())).collect());
        Ok(self
            .forward(&p, &tape.constant(x.clone()), ts, cond, c.as_deref(), enhance)?
            .to_grid())
    }

    /// Feature tensors entering each decoder layer, deepest first.
    pub fn capture_decoder_features(
        &self,
        x: &Grid,
        ts: &[usize],
        cond: &Grid,
        controls: Option<&[Grid]>,
    ) -> Result<(Vec<DecoderInputs>, Grid)> {
        let tape = Tape::new();
        let p = self.params.bind(&tape, false);
        let c: Option<Vec<Var>> = controls.map(|c| c.iter().map(|g| tape.constant(g.clone())).collect());
        let enc = self.encode(&p, &tape.constant(x.clone()), ts, cond)?;
        let mut snaps = Vec::new();
        let out = self.decode(&p, &enc, c.as_deref(), None, Some(&mut snaps))?;
        Ok((snaps, out.to_grid()))
    }

    /// Decoder output from externally supplied skips and base feature, as
    /// captured by [`capture_decoder_features`](Self::capture_decoder_features).
    pub fn replay_decoder(
        &self,
        skips_by_level: &[Grid],
        mid: &Grid,
        ts: &[usize],
        cond: &Grid,
        controls: Option<&[Grid]>,
        enhance: Option<&FreqEnhanceParams>,
    ) -> Result<Grid> {
        let tape = Tape::new();
        let p = self.params.bind(&tape, false);
        let enc = Encoded {
            emb: self.embedder.forward(&p, &tape, ts, cond)?,
            skips: skips_by_level.iter().map(|g| tape.constant(g.clone())).collect(),
            mid: tape.constant(mid.clone()),
        };
        let c: Option<Vec<Var>> = controls.map(|c| c.iter().map(|g| tape.constant(g.clone())).collect());
        Ok(self.decode(&p, &enc, c.as_deref(), enhance, None)?.to_grid())
    }

    /// Skip features by level and the middle-block output for an input.
    pub fn encode_grids(&self, x: &Grid, ts: &[usize], cond: &Grid) -> Result<(Vec<Grid>, Grid)> {
        let tape = Tape::new();
        let p = self.params.bind(&tape, false);
        let enc = self.encode(&p, &tape.constant(x.clone()), ts, cond)?;
        Ok((enc.skips.iter().map(Var::to_grid).collect(), enc.mid.to_grid()))
    }
}
