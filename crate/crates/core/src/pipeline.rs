//! Trained model bundles on disk, end-to-end training, and single-glyph probes.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{ControlBranch, ControlBundle, ControlConfig, ControlInputs, ControlStageKind};
use crate::diffusion::{q_sample_batch, NoiseSchedule};
use crate::error::{Error, Result};
use crate::evalkit::{evaluate_images, relative_log_amplitude, EvalReport, SpectrumCurve, TemplateBank};
use crate::freqbalance::{gamma_modulate, FreqEnhanceParams};
use crate::glyphdata::{read_json, write_json, GlyphSample, Orientation, TextLine};
use crate::nn::ParamStore;
use crate::stager::{route, to_model_space, Request, Sampler, StageSchedule};
use crate::tensor::Grid;
use crate::train::{train_base, train_control, TrainConfig, TrainLog};
use crate::unet::{ConditionEmbedding, UNet, UNetConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ModelsManifest {
    unet: UNetConfig,
    control: ControlConfig,
}

/// Base U-Net plus both stage branches.
#[derive(Clone, Debug)]
pub struct Models {
    pub base: UNet,
    pub global: ControlBranch,
    pub detail: ControlBranch,
}

impl Models {
    /// Trains the base, then the global branch, then the detail branch
    /// (warm-started from the global one unless `cold_start_detail`).
    pub fn train(
        corpus: &[GlyphSample],
        unet_cfg: UNetConfig,
        control_cfg: ControlConfig,
        tcfg: &TrainConfig,
        noise: &NoiseSchedule,
        ss: &StageSchedule,
        log: &mut TrainLog,
    ) -> Result<Self> {
        let mut base = UNet::new(unet_cfg, tcfg.seed)?;
        train_base(&mut base, corpus, noise, tcfg, log)?;
        Self::train_controls(base, corpus, control_cfg, tcfg, noise, ss, log)
    }

    /// Freshly initialized models; the control branches start as no-ops.
    pub fn untrained(unet_cfg: UNetConfig, control_cfg: ControlConfig, seed: u64) -> Result<Self> {
        let base = UNet::new(unet_cfg, seed)?;
        let global = ControlBranch::from_unet(ControlStageKind::Global, control_cfg, &base, seed + 1)?;
        let detail = ControlBranch::warm_start_detail(&global, seed + 2)?;
        Ok(Models { base, global, detail })
    }

    /// Control-branch training on an already trained base.
    pub fn train_controls(
        base: UNet,
        corpus: &[GlyphSample],
        control_cfg: ControlConfig,
        tcfg: &TrainConfig,
        noise: &NoiseSchedule,
        ss: &StageSchedule,
        log: &mut TrainLog,
    ) -> Result<Self> {
        let mut global = ControlBranch::from_unet(ControlStageKind::Global, control_cfg.clone(), &base, tcfg.seed + 1)?;
        train_control(&mut global, &base, corpus, noise, ss, tcfg, log)?;
        let mut detail = if tcfg.cold_start_detail {
            ControlBranch::from_unet(ControlStageKind::Detail, control_cfg, &base, tcfg.seed + 2)?
        } else {
            ControlBranch::warm_start_detail(&global, tcfg.seed + 2)?
        };
        train_control(&mut detail, &base, corpus, noise, ss, tcfg, log)?;
        Ok(Models { base, global, detail })
    }

    pub fn sampler<'a>(&'a self, noise: &'a NoiseSchedule) -> Sampler<'a> {
        Sampler::new(&self.base, noise).with_controls(&self.global, &self.detail)
    }

    pub fn fingerprints(&self) -> [u64; 3] {
        [self.base.params.fingerprint(), self.global.params.fingerprint(), self.detail.params.fingerprint()]
    }

    /// Writes `base/`, `global/`, `detail/` and `models.json` under `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        write_manifest(dir, &self.base.cfg, &self.global.cfg)?;
        self.base.params.save(&dir.join("base"))?;
        save_branch(dir, &self.global)?;
        save_branch(dir, &self.detail)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let base = load_base(dir)?;
        Ok(Models {
            base,
            global: load_branch(dir, ControlStageKind::Global)?,
            detail: load_branch(dir, ControlStageKind::Detail)?,
        })
    }
}

/// Records the architecture of a checkpoint directory; written before any component.
pub fn write_manifest(dir: &Path, unet: &UNetConfig, control: &ControlConfig) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_json(
        &dir.join("models.json"),
        &ModelsManifest {
            unet: unet.clone(),
            control: control.clone(),
        },
    )
}

fn manifest(dir: &Path) -> Result<ModelsManifest> {
    let path = dir.join("models.json");
    if !path.exists() {
        return Err(Error::Missing(format!("model manifest {}", path.display())));
    }
    read_json(&path)
}

pub fn save_base(dir: &Path, base: &UNet) -> Result<()> {
    base.params.save(&dir.join("base"))
}

pub fn save_branch(dir: &Path, branch: &ControlBranch) -> Result<()> {
    branch.params.save(&dir.join(branch.kind.name()))
}

pub fn load_base(dir: &Path) -> Result<UNet> {
    let m = manifest(dir)?;
    let store = ParamStore::load(&dir.join("base")).map_err(|e| missing(e, "base checkpoint", dir))?;
    let mut base = UNet::new(m.unet, 0)?;
    base.params.assign_from(&store)?;
    Ok(base)
}

pub fn load_branch(dir: &Path, kind: ControlStageKind) -> Result<ControlBranch> {
    let m = manifest(dir)?;
    let store = ParamStore::load(&dir.join(kind.name()))
        .map_err(|e| missing(e, &format!("{} control checkpoint", kind.name()), dir))?;
    ControlBranch::with_params(kind, m.control, &m.unet, &store)
}

fn missing(e: Error, what: &str, dir: &Path) -> Error {
    match e {
        Error::Missing(_) => Error::Missing(format!("{what} under {}", dir.display())),
        other => other,
    }
}

/// A single glyph requested at a known box.
#[derive(Clone, Debug, PartialEq)]
pub struct GlyphProbe {
    pub ch: char,
    pub line: TextLine,
    pub request: Request,
}

/// `n` single-character requests at scale 2 and random positions, characters
/// cycling through `alphabet` so every class appears equally often.
pub fn single_glyph_probes(alphabet: &str, n: usize, canvas: usize, seed: u64) -> Result<Vec<GlyphProbe>> {
    let chars: Vec<char> = alphabet.chars().collect();
    if chars.is_empty() {
        return Err(Error::invalid("probe alphabet is empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let ch = chars[i % chars.len()];
            let mut line = TextLine::layout(&ch.to_string(), 0, 0, 2, Orientation::Horizontal)?;
            if line.bbox.w > canvas || line.bbox.h > canvas {
                return Err(Error::Size(format!("glyph {ch:?} does not fit a {canvas}px canvas")));
            }
            line.bbox.x = rng.random_range(0..=canvas - line.bbox.w);
            line.bbox.y = rng.random_range(0..=canvas - line.bbox.h);
            let request = Request {
                cond: ConditionEmbedding::new(vec![line.class_ids()])?,
                bundle: ControlBundle::from_lines(std::slice::from_ref(&line), canvas, canvas),
            };
            Ok(GlyphProbe { ch, line, request })
        })
        .collect()
}

/// Per-image sampling seeds derived from a base seed.
pub fn image_seeds(base: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| base.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i)).collect()
}

/// Reads each probe's box back out of its image.
pub fn probe_report(images: &[Grid], probes: &[GlyphProbe], bank: &TemplateBank) -> Result<EvalReport> {
    let requests: Vec<Vec<TextLine>> = probes.iter().map(|p| vec![p.line.clone()]).collect();
    evaluate_images(images, &requests, bank)
}

/// Fraction of probes whose box reads back as the requested glyph.
pub fn probe_accuracy(images: &[Grid], probes: &[GlyphProbe], bank: &TemplateBank) -> Result<f64> {
    Ok(probe_report(images, probes, bank)?.acc)
}

/// Samples every probe in chunks of `chunk` images and scores the results.
pub fn run_probes<F>(probes: &[GlyphProbe], seeds: &[u64], chunk: usize, bank: &TemplateBank, mut sample: F) -> Result<(EvalReport, Vec<Grid>)>
where
    F: FnMut(&[Request], &[u64]) -> Result<Vec<Grid>>,
{
    let mut images = Vec::with_capacity(probes.len());
    for (ps, ss) in probes.chunks(chunk.max(1)).zip(seeds.chunks(chunk.max(1))) {
        let reqs: Vec<Request> = ps.iter().map(|p| p.request.clone()).collect();
        images.extend(sample(&reqs, ss)?);
    }
    Ok((probe_report(&images, probes, bank)?, images))
}

/// Radial spectra of the base feature, skip feature and control feature
/// entering decoder layer `layer` at timestep `t`, over a batch of probes.
/// With `gamma`, the control feature is γ-modulated first.
pub fn capture_spectra(
    models: &Models,
    noise: &NoiseSchedule,
    ss: &StageSchedule,
    probes: &[GlyphProbe],
    layer: usize,
    t: usize,
    seed: u64,
    gamma: Option<&FreqEnhanceParams>,
) -> Result<[(&'static str, SpectrumCurve); 3]> {
    if probes.is_empty() {
        return Err(Error::invalid("spectrum needs at least one probe"));
    }
    if layer >= models.base.decoder_layers() {
        return Err(Error::invalid(format!("layer {layer} out of range 0..{}", models.base.decoder_layers())));
    }
    noise.check_t(t)?;
    let s = models.base.cfg.image_size;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0: Vec<Grid> = probes
        .iter()
        .map(|p| to_model_space(&p.request.bundle.glyph).reshape(&[1, 1, s, s]))
        .collect::<Result<_>>()?;
    let x0 = Grid::stack(&x0)?;
    let eps = Grid::randn(x0.shape(), &mut rng);
    let ts = vec![t; probes.len()];
    let x_t = q_sample_batch(noise, &x0, &ts, &eps)?;
    let conds: Vec<ConditionEmbedding> = probes.iter().map(|p| p.request.cond.clone()).collect();
    let cond = ConditionEmbedding::batch(&conds, models.base.cfg.num_classes)?;
    let kind = route(t, ss);
    let bundles: Vec<ControlBundle> = probes
        .iter()
        .map(|p| match kind {
            ControlStageKind::Global => Ok(p.request.bundle.clone()),
            ControlStageKind::Detail => p.request.bundle.clone().with_masked(&Grid::zeros(&[1, s, s])),
        })
        .collect::<Result<_>>()?;
    let inputs = ControlInputs::stack(&bundles.iter().collect::<Vec<_>>())?;
    let branch = match kind {
        ControlStageKind::Global => &models.global,
        ControlStageKind::Detail => &models.detail,
    };
    let controls = branch.predict(&inputs, &x_t, &ts, &cond)?;
    let (snaps, _) = models.base.capture_decoder_features(&x_t, &ts, &cond, Some(&controls))?;
    let snap = &snaps[layer];
    let control = snap.control.clone().expect("controls were supplied");
    let control = match gamma {
        Some(g) => gamma_modulate(&control, g)?,
        None => control,
    };
    Ok([
        ("base", relative_log_amplitude(&snap.base)?),
        ("skip", relative_log_amplitude(&snap.skip)?),
        ("control", relative_log_amplitude(&control)?),
    ])
}

pub fn spectra_csv(curves: &[(&str, SpectrumCurve)]) -> String {
    let mut s = String::from("source,bin,r_center,log_amp,rel_log_amp\n");
    for (label, c) in curves {
        for b in 0..c.len() {
            s.push_str(&format!("{label},{b},{:.6},{:.6},{:.6}\n", c.radial_bins[b], c.log_amp[b], c.rel_log_amp[b]));
        }
    }
    s
}
