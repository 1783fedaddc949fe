//! Timestep routing between the global and detail control stages, and the
//! generation, editing and control-window samplers built on it.

use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{ControlBranch, ControlBundle, ControlInputs, ControlStageKind};
use crate::diffusion::{q_sample, strided_step, strided_timesteps, NoiseSchedule};
use crate::error::{Error, Result};
use crate::freqbalance::FreqEnhanceParams;
use crate::tensor::Grid;
use crate::unet::{ConditionEmbedding, UNet};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSchedule {
    pub t_max: usize,
    /// Stage boundary as a fraction of `T`; larger timesteps are global.
    pub split_frac: f64,
    /// Noise level an edited image is pushed to, as a fraction of `T`.
    pub edit_noise_frac: f64,
}

impl StageSchedule {
    pub fn new(t_max: usize) -> Self {
        StageSchedule {
            t_max,
            split_frac: 0.5,
            edit_noise_frac: 0.8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_max < 2 || !(0.0 < self.split_frac && self.split_frac < self.edit_noise_frac && self.edit_noise_frac <= 1.0) {
            return Err(Error::invalid(format!(
                "stage schedule needs 0 < split_frac < edit_noise_frac <= 1, got {} / {}",
                self.split_frac, self.edit_noise_frac
            )));
        }
        Ok(())
    }

    /// Largest detail-stage timestep.
    pub fn split_t(&self) -> usize {
        (self.t_max as f64 * self.split_frac).floor() as usize
    }

    /// Timestep an edit starts from, `round(edit_noise_frac · T)`.
    pub fn edit_t(&self) -> usize {
        (self.t_max as f64 * self.edit_noise_frac).round() as usize
    }

    pub fn range(&self, stage: ControlStageKind) -> RangeInclusive<usize> {
        match stage {
            ControlStageKind::Global => self.split_t() + 1..=self.t_max,
            ControlStageKind::Detail => 1..=self.split_t(),
        }
    }
}

/// Global for `t > T · split_frac`, detail otherwise.
pub fn route(t: usize, ss: &StageSchedule) -> ControlStageKind {
    if t as f64 > ss.t_max as f64 * ss.split_frac {
        ControlStageKind::Global
    } else {
        ControlStageKind::Detail
    }
}

/// Uniform draw from the stage's timestep range.
pub fn sample_training_timestep<R: Rng + ?Sized>(stage: ControlStageKind, ss: &StageSchedule, rng: &mut R) -> usize {
    rng.random_range(ss.range(stage))
}

/// Maps `[0, 1]` intensities to the model's `[-1, 1]` range.
pub fn to_model_space(image: &Grid) -> Grid {
    image.map(|v| 2.0 * v - 1.0)
}

/// Inverse of [`to_model_space`], clamped to `[0, 1]`.
pub fn to_image_space(x: &Grid) -> Grid {
    x.map(|v| ((v + 1.0) / 2.0).clamp(0.0, 1.0))
}

/// One requested image.
#[derive(Clone, Debug, PartialEq)]
pub struct Request {
    pub cond: ConditionEmbedding,
    /// Glyph and position images; a masked image here is used by the detail stage.
    pub bundle: ControlBundle,
}

/// Which timesteps receive control features.
#[derive(Clone, Debug, PartialEq)]
pub enum ControlWindow {
    Always,
    Never,
    Only(RangeInclusive<usize>),
}

impl ControlWindow {
    pub fn active(&self, t: usize) -> bool {
        match self {
            ControlWindow::Always => true,
            ControlWindow::Never => false,
            ControlWindow::Only(r) => r.contains(&t),
        }
    }
}

/// Base model, optional stage branches and sampling settings.
#[derive(Clone, Debug)]
pub struct Sampler<'a> {
    pub base: &'a UNet,
    pub global: Option<&'a ControlBranch>,
    pub detail: Option<&'a ControlBranch>,
    pub noise: &'a NoiseSchedule,
    pub stages: StageSchedule,
    pub steps: usize,
    /// Applied on every step that receives control features.
    pub enhance: Option<FreqEnhanceParams>,
}

impl<'a> Sampler<'a> {
    pub fn new(base: &'a UNet, noise: &'a NoiseSchedule) -> Self {
        Sampler {
            base,
            global: None,
            detail: None,
            noise,
            stages: StageSchedule::new(noise.len()),
            steps: 50,
            enhance: None,
        }
    }

    pub fn with_controls(mut self, global: &'a ControlBranch, detail: &'a ControlBranch) -> Self {
        self.global = Some(global);
        self.detail = Some(detail);
        self
    }

    pub fn with_enhance(mut self, enhance: Option<FreqEnhanceParams>) -> Self {
        self.enhance = enhance;
        self
    }

    fn branch(&self, stage: ControlStageKind) -> Option<&'a ControlBranch> {
        match stage {
            ControlStageKind::Global => self.global,
            ControlStageKind::Detail => self.detail,
        }
    }

    /// Shared reverse loop. `start` holds model-space images at `t_start`.
    fn denoise(&self, mut x: Grid, t_start: usize, reqs: &[Request], rngs: &mut [ChaCha8Rng], window: &ControlWindow) -> Result<Vec<Grid>> {
        self.stages.validate()?;
        if self.stages.t_max != self.noise.len() {
            return Err(Error::invalid("stage schedule and noise schedule disagree on T"));
        }
        let n = reqs.len();
        let s = self.base.cfg.image_size;
        let k = self.base.cfg.num_classes;
        let conds: Vec<ConditionEmbedding> = reqs.iter().map(|r| r.cond.clone()).collect();
        let cond = ConditionEmbedding::batch(&conds, k)?;
        let global_bundles: Vec<ControlBundle> = reqs
            .iter()
            .map(|r| ControlBundle { masked_image: None, ..r.bundle.clone() })
            .collect();
        let global_in = ControlInputs::stack(&global_bundles.iter().collect::<Vec<_>>())?;
        let detail_bundles: Vec<ControlBundle> = reqs
            .iter()
            .map(|r| {
                let mut b = r.bundle.clone();
                b.masked_image.get_or_insert_with(|| Grid::zeros(b.position.shape()));
                b
            })
            .collect();
        let detail_in = ControlInputs::stack(&detail_bundles.iter().collect::<Vec<_>>())?;

        let ts: Vec<usize> = strided_timesteps(self.noise.len(), self.steps)?
            .into_iter()
            .filter(|&t| t <= t_start)
            .collect();
        for (i, &t) in ts.iter().enumerate() {
            let t_prev = ts.get(i + 1).copied().unwrap_or(0);
            let tv = vec![t; n];
            let stage = route(t, &self.stages);
            let controls = match self.branch(stage) {
                Some(b) if window.active(t) => {
                    let inputs = if stage == ControlStageKind::Global { &global_in } else { &detail_in };
                    Some(b.predict(inputs, &x, &tv, &cond)?)
                }
                _ => None,
            };
            let enhance = controls.as_ref().and(self.enhance.as_ref());
            let eps = self.base.predict(&x, &tv, &cond, controls.as_deref(), enhance)?;
            let z = (t_prev > 0).then(|| {
                let per: Vec<f64> = rngs
                    .iter_mut()
                    .flat_map(|r| Grid::randn(&[s * s], r).into_values())
                    .collect();
                Grid::from_parts(x.shape().to_vec(), per)
            });
            x = strided_step(self.noise, &x, &eps, t, t_prev, z.as_ref())?;
            if !x.all_finite() {
                return Err(Error::Numeric(format!("sampler diverged at t={t}")));
            }
        }
        Ok((0..n).map(|i| to_image_space(&x.sample(i).reshape(&[1, s, s]).expect("plane"))).collect())
    }

    fn rngs(seeds: &[u64]) -> Vec<ChaCha8Rng> {
        seeds.iter().map(|&s| ChaCha8Rng::seed_from_u64(s)).collect()
    }

    fn check_batch(&self, reqs: &[Request], seeds: &[u64]) -> Result<()> {
        if reqs.is_empty() || reqs.len() != seeds.len() {
            return Err(Error::invalid(format!("{} requests need as many seeds, got {}", reqs.len(), seeds.len())));
        }
        let s = self.base.cfg.image_size;
        for r in reqs {
            r.bundle.validate()?;
            if r.bundle.height() != s || r.bundle.width() != s {
                return Err(Error::Size(format!("control images must be {s}x{s}")));
            }
        }
        Ok(())
    }

    fn noise_start(&self, rngs: &mut [ChaCha8Rng]) -> Grid {
        let s = self.base.cfg.image_size;
        let v: Vec<f64> = rngs.iter_mut().flat_map(|r| Grid::randn(&[s * s], r).into_values()).collect();
        Grid::from_parts(vec![rngs.len(), 1, s, s], v)
    }

    /// Samples from pure noise at `T`, switching branches at the stage split.
    /// Each image draws from its own seed, so results do not depend on batching.
    pub fn generate(&self, reqs: &[Request], seeds: &[u64]) -> Result<Vec<Grid>> {
        self.ablate_control_window(reqs, seeds, ControlWindow::Always)
    }

    /// [`generate`](Self::generate) with control features zeroed outside `window`.
    pub fn ablate_control_window(&self, reqs: &[Request], seeds: &[u64], window: ControlWindow) -> Result<Vec<Grid>> {
        self.check_batch(reqs, seeds)?;
        let mut rngs = Self::rngs(seeds);
        let x = self.noise_start(&mut rngs);
        self.denoise(x, self.noise.len(), reqs, &mut rngs, &window)
    }

    /// Noises each original (`[1, H, W]` in `[0, 1]`) to `t* = round(edit_noise_frac · T)`
    /// and denoises from there. Detail-stage bundles receive the masked original.
    pub fn edit(&self, originals: &[Grid], reqs: &[Request], seeds: &[u64]) -> Result<Vec<Grid>> {
        self.check_batch(reqs, seeds)?;
        if originals.len() != reqs.len() {
            return Err(Error::invalid("one original image per edit request"));
        }
        let t_star = self.stages.edit_t();
        let mut rngs = Self::rngs(seeds);
        let mut starts = Vec::with_capacity(reqs.len());
        let mut edited = Vec::with_capacity(reqs.len());
        for ((orig, req), rng) in originals.iter().zip(reqs).zip(rngs.iter_mut()) {
            if req.bundle.position.max_abs() == 0.0 {
                return Err(Error::invalid("edit needs a non-empty position mask"));
            }
            let x0 = to_model_space(orig);
            let eps = Grid::randn(x0.shape(), rng);
            starts.push(q_sample(self.noise, &x0, t_star, &eps)?.reshape(&[1, 1, orig.shape()[1], orig.shape()[2]])?);
            edited.push(Request {
                cond: req.cond.clone(),
                bundle: req.bundle.clone().with_masked(orig)?,
            });
        }
        self.denoise(Grid::stack(&starts)?, t_star, &edited, &mut rngs, &ControlWindow::Always)
    }
}
