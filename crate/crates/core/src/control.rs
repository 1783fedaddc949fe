//! Control branches: position encoder (SC), glyph encoder with a Fourier
//! branch (FEC), masked-image encoder for the detail stage, and a trainable
//! copy of the U-Net encoder with zero-initialized per-level projections.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glyphdata::{render_glyph_map, render_position_map, TextLine};
use crate::nn::{Bound, Conv, Init, ParamStore};
use crate::tensor::{Grid, Tape, Var};
use crate::unet::{Embedder, Encoder, UNet, UNetConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlStageKind {
    Global,
    Detail,
}

impl ControlStageKind {
    pub fn name(&self) -> &'static str {
        match self {
            ControlStageKind::Global => "global",
            ControlStageKind::Detail => "detail",
        }
    }
}

/// Control images for one scene, each `[1, H, W]` in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlBundle {
    pub glyph: Grid,
    pub position: Grid,
    pub masked_image: Option<Grid>,
}

impl ControlBundle {
    pub fn new(glyph: Grid, position: Grid, masked_image: Option<Grid>) -> Result<Self> {
        let b = ControlBundle {
            glyph,
            position,
            masked_image,
        };
        b.validate()?;
        Ok(b)
    }

    /// Glyph and position images rendered from line annotations.
    pub fn from_lines(lines: &[TextLine], height: usize, width: usize) -> Self {
        ControlBundle {
            glyph: render_glyph_map(lines, height, width),
            position: render_position_map(lines, height, width),
            masked_image: None,
        }
    }

    /// Adds `original ⊙ (1 − position)` as the masked image.
    pub fn with_masked(mut self, original: &Grid) -> Result<Self> {
        self.masked_image = Some(original.zip_map(&self.position, |v, p| v * (1.0 - p))?);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.glyph.rank() != 3 || self.glyph.shape()[0] != 1 {
            return Err(Error::Size(format!("control images are [1, H, W], got {:?}", self.glyph.shape())));
        }
        self.glyph.check_same_shape(&self.position)?;
        if self.position.values().iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid("position image must be binary"));
        }
        if let Some(m) = &self.masked_image {
            m.check_same_shape(&self.position)?;
            if m.values().iter().zip(self.position.values()).any(|(m, p)| m * p != 0.0) {
                return Err(Error::invalid("masked image must be blank inside text regions"));
            }
        }
        Ok(())
    }

    pub fn height(&self) -> usize {
        self.glyph.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.glyph.shape()[2]
    }
}

/// Batched control inputs, `[N, 1, H, W]` each.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlInputs {
    pub glyph: Grid,
    pub position: Grid,
    pub masked_image: Option<Grid>,
}

impl ControlInputs {
    pub fn stack(bundles: &[&ControlBundle]) -> Result<Self> {
        let as4 = |g: &Grid| g.reshape(&[1, 1, g.shape()[1], g.shape()[2]]);
        let glyph = Grid::stack(&bundles.iter().map(|b| as4(&b.glyph)).collect::<Result<Vec<_>>>()?)?;
        let position = Grid::stack(&bundles.iter().map(|b| as4(&b.position)).collect::<Result<Vec<_>>>()?)?;
        let masked: Option<Vec<Grid>> = bundles
            .iter()
            .map(|b| b.masked_image.as_ref().map(as4))
            .collect::<Option<Result<Vec<_>>>>()
            .transpose()?;
        Ok(ControlInputs {
            glyph,
            position,
            masked_image: masked.map(|m| Grid::stack(&m)).transpose()?,
        })
    }

    pub fn batch(&self) -> usize {
        self.glyph.shape()[0]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlConfig {
    pub hint_channels: usize,
    /// Kernel of the first, global-perception convolution.
    pub global_kernel: usize,
    /// Fourier branch of the glyph encoder; off gives a spatial-only encoder.
    pub freq_branch: bool,
    /// SiLU inside the Fourier branch.
    pub freq_nonlinearity: bool,
    /// Concatenate the two glyph branches instead of summing them.
    pub concat_branches: bool,
    /// Control outputs at or above this spatial size are masked in the detail stage.
    pub min_masked_size: usize,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            hint_channels: 16,
            global_kernel: 9,
            freq_branch: true,
            freq_nonlinearity: true,
            concat_branches: false,
            min_masked_size: 16,
        }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hint_channels == 0 || self.global_kernel.is_multiple_of(2) || self.min_masked_size == 0 {
            return Err(Error::invalid("hint channels and min_masked_size must be positive, kernel odd"));
        }
        Ok(())
    }
}

/// Spatial block for the position image.
#[derive(Clone, Debug)]
pub struct ScBlock {
    input: Conv,
    convs: [Conv; 2],
}

impl ScBlock {
    fn new(store: &mut ParamStore, prefix: &str, cfg: &ControlConfig, rng: &mut ChaCha8Rng) -> Self {
        let c = cfg.hint_channels;
        ScBlock {
            input: Conv::new(store, &format!("{prefix}in"), 1, c, cfg.global_kernel, 1, Init::Normal(1.0), rng),
            convs: [
                Conv::new(store, &format!("{prefix}c1"), c, c, 3, 1, Init::Normal(1.0), rng),
                Conv::new(store, &format!("{prefix}c2"), c, c, 3, 1, Init::Normal(1.0), rng),
            ],
        }
    }

    fn spatial<'t>(convs: &[Conv; 2], p: &Bound<'t>, x: &Var<'t>) -> Result<Var<'t>> {
        let h = convs[0].forward(p, &x.silu())?;
        convs[1].forward(p, &h.silu())
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, position: &Var<'t>) -> Result<Var<'t>> {
        let x = self.input.forward(p, position)?;
        Self::spatial(&self.convs, p, &x)
    }
}

/// Glyph block: a spatial stack plus a frequency branch (1×1 convolution over
/// stacked real/imaginary planes), merged and fused by a 1×1 convolution.
#[derive(Clone, Debug)]
pub struct FecBlock {
    input: Conv,
    convs: [Conv; 2],
    freq: Option<Conv>,
    fuse: Conv,
    nonlinearity: bool,
    concat: bool,
}

impl FecBlock {
    fn new(store: &mut ParamStore, prefix: &str, cfg: &ControlConfig, rng: &mut ChaCha8Rng) -> Self {
        let c = cfg.hint_channels;
        let fuse_in = if cfg.concat_branches && cfg.freq_branch { 2 * c } else { c };
        FecBlock {
            input: Conv::new(store, &format!("{prefix}in"), 1, c, cfg.global_kernel, 1, Init::Normal(1.0), rng),
            convs: [
                Conv::new(store, &format!("{prefix}c1"), c, c, 3, 1, Init::Normal(1.0), rng),
                Conv::new(store, &format!("{prefix}c2"), c, c, 3, 1, Init::Normal(1.0), rng),
            ],
            freq: cfg
                .freq_branch
                .then(|| Conv::new(store, &format!("{prefix}freq"), 2 * c, 2 * c, 1, 1, Init::Normal(1.0), rng)),
            fuse: Conv::new(store, &format!("{prefix}fuse"), fuse_in, c, 1, 1, Init::Normal(1.0), rng),
            nonlinearity: cfg.freq_nonlinearity,
            concat: cfg.concat_branches,
        }
    }

    /// `IFFT(σ(W·[Re, Im](FFT(x))))`, real part.
    pub fn freq_branch<'t>(&self, p: &Bound<'t>, x: &Var<'t>) -> Result<Option<Var<'t>>> {
        let Some(conv) = &self.freq else { return Ok(None) };
        let mut h = conv.forward(p, &x.fft2_stacked()?)?;
        if self.nonlinearity {
            h = h.silu();
        }
        h.ifft2_real().map(Some)
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, glyph: &Var<'t>) -> Result<Var<'t>> {
        let x = self.input.forward(p, glyph)?;
        let spatial = ScBlock::spatial(&self.convs, p, &x)?;
        let merged = match self.freq_branch(p, &x)? {
            None => spatial,
            Some(f) if self.concat => Var::concat_channels(&[&spatial, &f])?,
            Some(f) => spatial.add(&f)?,
        };
        self.fuse.forward(p, &merged)
    }
}

/// Masked-image encoder; its last convolution starts at zero.
#[derive(Clone, Debug)]
struct MaskedEncoder {
    c1: Conv,
    c2: Conv,
}

impl MaskedEncoder {
    fn new(store: &mut ParamStore, prefix: &str, cfg: &ControlConfig, rng: &mut ChaCha8Rng) -> Self {
        let c = cfg.hint_channels;
        MaskedEncoder {
            c1: Conv::new(store, &format!("{prefix}c1"), 1, c, 3, 1, Init::Normal(1.0), rng),
            c2: Conv::new(store, &format!("{prefix}c2"), c, c, 3, 1, Init::Zero, rng),
        }
    }

    fn forward<'t>(&self, p: &Bound<'t>, m: &Var<'t>) -> Result<Var<'t>> {
        self.c2.forward(p, &self.c1.forward(p, m)?.silu())
    }
}

/// Zeroes `c` outside the position mask when its spatial size is at least
/// `min_masked_size` (the finest decoder layers); returns it unchanged
/// otherwise. `position` is `[N or 1, 1, H, W]` at any resolution.
pub fn apply_detail_mask_var<'t>(c: &Var<'t>, position: &Grid, min_masked_size: usize) -> Result<Var<'t>> {
    let [_, _, h, w] = c.value().nchw()?;
    if h.min(w) < min_masked_size {
        return Ok(c.clone());
    }
    c.mul_mask(&position.resize_nearest(h, w)?)
}

/// Grid form of [`apply_detail_mask_var`]. `layer_index` counts decoder
/// layers deepest first; the rule depends only on the size.
pub fn apply_detail_mask(c: &Grid, position: &Grid, layer_index: usize, total_layers: usize, min_masked_size: usize) -> Result<Grid> {
    if layer_index >= total_layers {
        return Err(Error::invalid(format!("layer {layer_index} outside {total_layers} decoder layers")));
    }
    let tape = Tape::new();
    let pos = if position.rank() == 3 { position.reshape(&[1, 1, position.shape()[1], position.shape()[2]])? } else { position.clone() };
    Ok(apply_detail_mask_var(&tape.constant(c.clone()), &pos, min_masked_size)?.to_grid())
}

/// One stage's control network.
#[derive(Clone, Debug)]
pub struct ControlBranch {
    pub kind: ControlStageKind,
    pub cfg: ControlConfig,
    pub unet_cfg: UNetConfig,
    pub params: ParamStore,
    sc: ScBlock,
    fec: FecBlock,
    masked: Option<MaskedEncoder>,
    hint_proj: Conv,
    embedder: Embedder,
    encoder: Encoder,
    /// Zero-initialized 1×1 projections per level, finest first.
    outs: Vec<Conv>,
}

impl ControlBranch {
    pub fn new(kind: ControlStageKind, cfg: ControlConfig, unet_cfg: &UNetConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        unet_cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let sc = ScBlock::new(&mut store, "sc.", &cfg, &mut rng);
        let fec = FecBlock::new(&mut store, "fec.", &cfg, &mut rng);
        let masked = (kind == ControlStageKind::Detail).then(|| MaskedEncoder::new(&mut store, "mask.", &cfg, &mut rng));
        let hint_proj = Conv::new(&mut store, "hint", cfg.hint_channels, unet_cfg.channels(0), 3, 1, Init::Normal(1.0), &mut rng);
        let embedder = Embedder::new(&mut store, "emb.", unet_cfg, &mut rng);
        let encoder = Encoder::new(&mut store, "enc.", unet_cfg, &mut rng)?;
        let outs = (0..unet_cfg.levels())
            .map(|l| {
                let c = unet_cfg.channels(l);
                Conv::new(&mut store, &format!("out{l}"), c, c, 1, 1, Init::Zero, &mut rng)
            })
            .collect();
        Ok(ControlBranch {
            kind,
            cfg,
            unet_cfg: unet_cfg.clone(),
            params: store,
            sc,
            fec,
            masked,
            hint_proj,
            embedder,
            encoder,
            outs,
        })
    }

    /// Fresh branch whose encoder and embedder start as copies of the base U-Net's.
    pub fn from_unet(kind: ControlStageKind, cfg: ControlConfig, base: &UNet, seed: u64) -> Result<Self> {
        let mut b = Self::new(kind, cfg, &base.cfg, seed)?;
        b.params.copy_prefix(&base.params, "enc.", "enc.")?;
        b.params.copy_prefix(&base.params, "emb.", "emb.")?;
        Ok(b)
    }

    /// Detail branch starting from a trained global branch; the masked-image
    /// encoder keeps its fresh (zero-output) initialization.
    pub fn warm_start_detail(global: &ControlBranch, seed: u64) -> Result<Self> {
        let mut d = Self::new(ControlStageKind::Detail, global.cfg.clone(), &global.unet_cfg, seed)?;
        for (name, v) in global.params.iter() {
            let id = d
                .params
                .id(name)
                .ok_or_else(|| Error::Missing(format!("parameter {name} in detail branch")))?;
            *d.params.get_mut(id) = v.clone();
        }
        Ok(d)
    }

    /// Rebuilds the structure for `kind` and loads values from a checkpoint store.
    pub fn with_params(kind: ControlStageKind, cfg: ControlConfig, unet_cfg: &UNetConfig, params: &ParamStore) -> Result<Self> {
        let mut b = Self::new(kind, cfg, unet_cfg, 0)?;
        b.params.assign_from(params)?;
        Ok(b)
    }

    /// Summed hint features `[N, hint_channels, H, W]`.
    pub fn hint<'t>(&self, p: &Bound<'t>, tape: &'t Tape, inputs: &ControlInputs) -> Result<Var<'t>> {
        let mut h = self
            .sc
            .forward(p, &tape.constant(inputs.position.clone()))?
            .add(&self.fec.forward(p, &tape.constant(inputs.glyph.clone()))?)?;
        if let Some(me) = &self.masked {
            let m = inputs
                .masked_image
                .as_ref()
                .ok_or_else(|| Error::invalid("detail stage requires a masked image"))?;
            h = h.add(&me.forward(p, &tape.constant(m.clone()))?)?;
        }
        Ok(h)
    }

    /// Per-decoder-layer control features, deepest first.
    pub fn forward<'t>(&self, p: &Bound<'t>, inputs: &ControlInputs, x_t: &Var<'t>, ts: &[usize], cond: &Grid) -> Result<Vec<Var<'t>>> {
        let tape = x_t.tape();
        if inputs.batch() != ts.len() {
            return Err(Error::Shape {
                axis: "control batch",
                expected: ts.len(),
                got: inputs.batch(),
            });
        }
        let hint = self.hint_proj.forward(p, &self.hint(p, tape, inputs)?)?;
        let emb = self.embedder.forward(p, tape, ts, cond)?;
        let skips = self.encoder.forward(p, x_t, &emb, Some(&hint))?;
        let mut out = Vec::with_capacity(skips.len());
        for (l, s) in skips.iter().enumerate().rev() {
            let mut c = self.outs[l].forward(p, s)?;
            if self.kind == ControlStageKind::Detail {
                c = apply_detail_mask_var(&c, &inputs.position, self.cfg.min_masked_size)?;
            }
            out.push(c);
        }
        Ok(out)
    }

    /// Inference on plain grids.
    pub fn predict(&self, inputs: &ControlInputs, x_t: &Grid, ts: &[usize], cond: &Grid) -> Result<Vec<Grid>> {
        let tape = Tape::new();
        let p = self.params.bind(&tape, false);
        Ok(self
            .forward(&p, inputs, &tape.constant(x_t.clone()), ts, cond)?
            .iter()
            .map(Var::to_grid)
            .collect())
    }

    pub fn sc(&self) -> &ScBlock {
        &self.sc
    }

    pub fn fec(&self) -> &FecBlock {
        &self.fec
    }
}

/// Glyph-block output on a single `[1, H, W]` image.
pub fn fec_forward(branch: &ControlBranch, glyph: &Grid) -> Result<Grid> {
    let tape = Tape::new();
    let p = branch.params.bind(&tape, false);
    let g = glyph.reshape(&[1, 1, glyph.shape()[glyph.rank() - 2], glyph.shape()[glyph.rank() - 1]])?;
    Ok(branch.fec.forward(&p, &tape.constant(g))?.to_grid())
}

/// Position-block output on a single `[1, H, W]` image.
pub fn sc_forward(branch: &ControlBranch, position: &Grid) -> Result<Grid> {
    if position.values().iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid("position image must be binary"));
    }
    let tape = Tape::new();
    let p = branch.params.bind(&tape, false);
    let g = position.reshape(&[1, 1, position.shape()[position.rank() - 2], position.shape()[position.rank() - 1]])?;
    Ok(branch.sc.forward(&p, &tape.constant(g))?.to_grid())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glyphdata::{BBox, Orientation};
    use crate::tensor::gradcheck;
    use crate::unet::ConditionEmbedding;

    fn small_unet() -> UNetConfig {
        UNetConfig {
            image_size: 16,
            base_channels: 4,
            channel_mults: vec![1, 2, 2],
            time_embed_dim: 8,
            cond_embed_dim: 8,
            norm_groups: 2,
            ..UNetConfig::default()
        }
    }

    fn small_ctl() -> ControlConfig {
        ControlConfig {
            hint_channels: 4,
            min_masked_size: 8,
            ..ControlConfig::default()
        }
    }

    fn bundle(h: usize) -> ControlBundle {
        let line = TextLine::layout("A", 2, 3, 1, Orientation::Horizontal).unwrap();
        ControlBundle::from_lines(&[line], h, h)
    }

    #[test]
    fn fresh_branch_outputs_zero() {
        let ucfg = small_unet();
        let base = UNet::new(ucfg.clone(), 0).unwrap();
        let g = ControlBranch::from_unet(ControlStageKind::Global, small_ctl(), &base, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Grid::randn(&[1, 1, 16, 16], &mut rng);
        let b = bundle(16);
        let cond = ConditionEmbedding::batch(&[ConditionEmbedding::default()], ucfg.num_classes).unwrap();
        let cs = g.predict(&ControlInputs::stack(&[&b]).unwrap(), &x, &[900], &cond).unwrap();
        assert_eq!(cs.len(), 3);
        assert_eq!(cs.iter().map(|c| c.shape()[2]).collect::<Vec<_>>(), vec![4, 8, 16]);
        assert!(cs.iter().all(|c| c.max_abs() == 0.0));

        let d = ControlBranch::warm_start_detail(&g, 3).unwrap();
        assert!(d.predict(&ControlInputs::stack(&[&b]).unwrap(), &x, &[10], &cond).is_err());
        let bm = b.clone().with_masked(&x.reshape(&[1, 16, 16]).unwrap().map(|v| v.abs())).unwrap();
        let cs = d.predict(&ControlInputs::stack(&[&bm]).unwrap(), &x, &[10], &cond).unwrap();
        assert!(cs.iter().all(|c| c.max_abs() == 0.0));
    }

    #[test]
    fn detail_mask_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ones = Grid::ones(&[1, 32, 32]);
        let zeros = Grid::zeros(&[1, 32, 32]);
        for (i, size) in [8usize, 16, 32].into_iter().enumerate() {
            let c = Grid::randn(&[1, 4, size, size], &mut rng);
            assert_eq!(apply_detail_mask(&c, &ones, i, 3, 16).unwrap(), c);
            let z = apply_detail_mask(&c, &zeros, i, 3, 16).unwrap();
            if size >= 16 {
                assert_eq!(z.max_abs(), 0.0);
            } else {
                assert_eq!(z, c);
            }
        }
    }

    #[test]
    fn position_block_contracts() {
        let b = ControlBranch::new(ControlStageKind::Global, small_ctl(), &small_unet(), 5).unwrap();
        let zero = sc_forward(&b, &Grid::zeros(&[1, 16, 16])).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
        assert_eq!(zero.shape(), &[1, 4, 16, 16]);
        assert!(sc_forward(&b, &Grid::full(&[1, 16, 16], 0.5)).is_err());

        let big = ControlBranch::new(ControlStageKind::Global, ControlConfig::default(), &UNetConfig::default(), 5).unwrap();
        let boxed = |x0: usize| {
            let line = TextLine { content: "A".into(), bbox: BBox::new(x0, 10, 8, 8), orientation: Orientation::Horizontal, recognition_score: 1.0 };
            render_position_map(&[line], 32, 32)
        };
        let a = sc_forward(&big, &boxed(6)).unwrap();
        let s = sc_forward(&big, &boxed(10)).unwrap();
        // receptive field radius is 4 + 1 + 1 = 6 pixels
        for c in 0..16 {
            for y in 7..25 {
                for x in 7..20 {
                    assert!((a.get(&[0, c, y, x]) - s.get(&[0, c, y, x + 4])).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn frequency_branch_identity_and_linearity() {
        let cfg = ControlConfig { freq_nonlinearity: false, ..small_ctl() };
        let mut b = ControlBranch::new(ControlStageKind::Global, cfg, &small_unet(), 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = Grid::randn(&[2, 4, 8, 8], &mut rng);
        let y = Grid::randn(&[2, 4, 8, 8], &mut rng);
        let run = |b: &ControlBranch, g: &Grid| {
            let tape = Tape::new();
            let p = b.params.bind(&tape, false);
            b.fec().freq_branch(&p, &tape.constant(g.clone())).unwrap().unwrap().to_grid()
        };
        let lhs = run(&b, &x.scale(2.0).add(&y.scale(-0.5)).unwrap());
        let rhs = run(&b, &x).scale(2.0).add(&run(&b, &y).scale(-0.5)).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-6);

        let w = b.params.id("fec.freq.w").unwrap();
        *b.params.get_mut(w) = Grid::from_fn(&[8, 8, 1, 1], |i| if i / 8 == i % 8 { 1.0 } else { 0.0 });
        assert!(run(&b, &x).max_abs_diff(&x) < 1e-12);
    }

    #[test]
    fn glyph_block_zero_and_gradients() {
        let b = ControlBranch::new(ControlStageKind::Global, small_ctl(), &small_unet(), 8).unwrap();
        assert_eq!(fec_forward(&b, &Grid::zeros(&[1, 8, 8])).unwrap().max_abs(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = Grid::uniform(&[1, 1, 8, 8], 0.0, 1.0, &mut rng);
        let mut inputs = vec![g];
        inputs.extend(b.params.iter().map(|(_, v)| v.clone()));
        let r = gradcheck::check(&inputs, Some(8), |_, v| {
            let p = Bound::from_vars(v[1..].to_vec());
            let y = b.fec().forward(&p, &v[0])?;
            Ok(y.mul(&y)?.sum())
        })
        .unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }

    #[test]
    fn bundle_invariants() {
        let b = bundle(16);
        assert!(ControlBundle::new(b.glyph.clone(), b.glyph.map(|v| v * 0.5), None).is_err());
        let img = Grid::full(&[1, 16, 16], 0.3);
        let m = b.clone().with_masked(&img).unwrap();
        let bad = Grid::full(&[1, 16, 16], 0.3);
        assert!(ControlBundle::new(b.glyph.clone(), b.position.clone(), Some(bad)).is_err());
        assert!(m.validate().is_ok());
    }
}
