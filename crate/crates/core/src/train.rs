//! Base ε-prediction training and the per-stage control-branch training loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{ControlBranch, ControlBundle, ControlInputs, ControlStageKind};
use crate::diffusion::{train_loss, NoiseSchedule};
use crate::error::{Error, Result};
use crate::glyphdata::GlyphSample;
use crate::nn::Adam;
use crate::stager::{sample_training_timestep, to_model_space, StageSchedule};
use crate::tensor::{Grid, Tape};
use crate::unet::{ConditionEmbedding, UNet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch: usize,
    pub base_steps: usize,
    pub global_steps: usize,
    pub detail_steps: usize,
    pub base_lr: f64,
    pub control_lr: f64,
    /// Probability a detail-stage sample sees a blank masked image, as in generation.
    pub masked_dropout: f64,
    /// Detail branch starts fresh instead of from the trained global branch.
    pub cold_start_detail: bool,
    #[serde(default)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch: 16,
            base_steps: 1000,
            global_steps: 500,
            detail_steps: 500,
            base_lr: 2e-3,
            control_lr: 1e-3,
            masked_dropout: 0.5,
            cold_start_detail: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || !(self.base_lr > 0.0 && self.control_lr > 0.0) || !(0.0..=1.0).contains(&self.masked_dropout) {
            return Err(Error::invalid("training needs batch > 0, positive learning rates and masked_dropout in [0, 1]"));
        }
        Ok(())
    }
}

/// One logged optimizer step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub stage: String,
    pub step: usize,
    pub t_min: usize,
    pub t_max: usize,
    pub loss: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub rows: Vec<LossRow>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("stage,step,t_min,t_max,loss,grad_norm\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{},{:.6},{:.6}\n", r.stage, r.step, r.t_min, r.t_max, r.loss, r.grad_norm));
        }
        s
    }

    /// Mean loss over the last `n` steps of `stage`.
    pub fn tail_mean(&self, stage: &str, n: usize) -> Option<f64> {
        let v: Vec<f64> = self.rows.iter().filter(|r| r.stage == stage).map(|r| r.loss).collect();
        if v.is_empty() {
            return None;
        }
        let tail = &v[v.len().saturating_sub(n)..];
        Some(tail.iter().sum::<f64>() / tail.len() as f64)
    }
}

/// A minibatch drawn from the corpus.
pub struct Batch {
    pub x0: Grid,
    pub cond: Grid,
    pub controls: ControlInputs,
}

impl Batch {
    pub fn draw(corpus: &[GlyphSample], n: usize, num_classes: usize, masked_dropout: Option<f64>, rng: &mut ChaCha8Rng) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::invalid("training corpus is empty"));
        }
        let picks: Vec<&GlyphSample> = (0..n).map(|_| &corpus[rng.random_range(0..corpus.len())]).collect();
        Self::from_samples(&picks, num_classes, masked_dropout, rng)
    }

    pub fn from_samples(picks: &[&GlyphSample], num_classes: usize, masked_dropout: Option<f64>, rng: &mut ChaCha8Rng) -> Result<Self> {
        let (h, w) = (picks[0].height(), picks[0].width());
        let x0: Vec<Grid> = picks
            .iter()
            .map(|s| to_model_space(&s.image).reshape(&[1, 1, h, w]))
            .collect::<Result<_>>()?;
        let conds: Vec<ConditionEmbedding> = picks
            .iter()
            .map(|s| ConditionEmbedding::new(s.class_sequences.clone()))
            .collect::<Result<_>>()?;
        let bundles: Vec<ControlBundle> = picks
            .iter()
            .map(|s| {
                let b = ControlBundle::new(s.glyph_map.clone(), s.position_map.clone(), None)?;
                match masked_dropout {
                    Some(p) if rng.random_bool(p) => b.with_masked(&Grid::zeros(s.image.shape())),
                    Some(_) => b.with_masked(&s.image),
                    None => Ok(b),
                }
            })
            .collect::<Result<_>>()?;
        Ok(Batch {
            x0: Grid::stack(&x0)?,
            cond: ConditionEmbedding::batch(&conds, num_classes)?,
            controls: ControlInputs::stack(&bundles.iter().collect::<Vec<_>>())?,
        })
    }
}

fn check_step(stage: &str, step: usize, loss: f64) -> Result<()> {
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("{stage} loss became {loss} at step {step}")));
    }
    Ok(())
}

/// ε-MSE training of the base U-Net over all timesteps, conditioned on class
/// sequences only.
pub fn train_base(unet: &mut UNet, corpus: &[GlyphSample], noise: &NoiseSchedule, cfg: &TrainConfig, log: &mut TrainLog) -> Result<()> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xba5e);
    let mut opt = Adam::new(&unet.params, cfg.base_lr);
    let k = unet.cfg.num_classes;
    for step in 0..cfg.base_steps {
        let b = Batch::draw(corpus, cfg.batch, k, None, &mut rng)?;
        let ts: Vec<usize> = (0..cfg.batch).map(|_| rng.random_range(1..=noise.len())).collect();
        let eps = Grid::randn(b.x0.shape(), &mut rng);
        let tape = Tape::new();
        let p = unet.params.bind(&tape, true);
        let loss = train_loss(&tape, noise, &b.x0, &ts, &eps, None, |x, ts| unet.forward(&p, x, ts, &b.cond, None, None))?;
        let l = loss.value().values()[0];
        check_step("base", step, l)?;
        let grads = tape.backward(&loss)?;
        let grad_norm = opt.step(&mut unet.params, &p, &grads);
        log.rows.push(LossRow {
            stage: "base".into(),
            step,
            t_min: *ts.iter().min().unwrap(),
            t_max: *ts.iter().max().unwrap(),
            loss: l,
            grad_norm,
        });
    }
    unet.params.quantize_f32();
    Ok(())
}

/// Trains one control branch against a frozen base, drawing timesteps only
/// from the branch's stage range.
pub fn train_control(
    branch: &mut ControlBranch,
    base: &UNet,
    corpus: &[GlyphSample],
    noise: &NoiseSchedule,
    ss: &StageSchedule,
    cfg: &TrainConfig,
    log: &mut TrainLog,
) -> Result<()> {
    cfg.validate()?;
    ss.validate()?;
    let kind = branch.kind;
    let steps = match kind {
        ControlStageKind::Global => cfg.global_steps,
        ControlStageKind::Detail => cfg.detail_steps,
    };
    let salt = match kind {
        ControlStageKind::Global => 0x610b,
        ControlStageKind::Detail => 0xde7a,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ salt);
    let mut opt = Adam::new(&branch.params, cfg.control_lr);
    let k = base.cfg.num_classes;
    let dropout = (kind == ControlStageKind::Detail).then_some(cfg.masked_dropout);
    for step in 0..steps {
        let b = Batch::draw(corpus, cfg.batch, k, dropout, &mut rng)?;
        let ts: Vec<usize> = (0..cfg.batch).map(|_| sample_training_timestep(kind, ss, &mut rng)).collect();
        let eps = Grid::randn(b.x0.shape(), &mut rng);
        let tape = Tape::new();
        let bp = base.params.bind(&tape, false);
        let cp = branch.params.bind(&tape, true);
        let loss = train_loss(&tape, noise, &b.x0, &ts, &eps, Some((kind, ss)), |x, ts| {
            let c = branch.forward(&cp, &b.controls, x, ts, &b.cond)?;
            base.forward(&bp, x, ts, &b.cond, Some(&c), None)
        })?;
        let l = loss.value().values()[0];
        check_step(kind.name(), step, l)?;
        let grads = tape.backward(&loss)?;
        let grad_norm = opt.step(&mut branch.params, &cp, &grads);
        log.rows.push(LossRow {
            stage: kind.name().into(),
            step,
            t_min: *ts.iter().min().unwrap(),
            t_max: *ts.iter().max().unwrap(),
            loss: l,
            grad_norm,
        });
    }
    branch.params.quantize_f32();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ControlConfig;
    use crate::diffusion::default_schedule;
    use crate::glyphdata::{render_sample, RenderConfig};
    use crate::unet::UNetConfig;

    fn tiny_cfg() -> UNetConfig {
        UNetConfig {
            image_size: 16,
            base_channels: 4,
            channel_mults: vec![1, 2],
            time_embed_dim: 8,
            cond_embed_dim: 8,
            norm_groups: 2,
            ..UNetConfig::default()
        }
    }

    fn corpus() -> Vec<GlyphSample> {
        let rc = RenderConfig { canvas: 16, scales: vec![1], max_chars: 2, max_lines: 1, ..RenderConfig::toy16() };
        (0..8).map(|s| render_sample(s, &rc).unwrap()).collect()
    }

    #[test]
    fn stage_logs_respect_ranges_and_reruns_match() {
        let data = corpus();
        let noise = default_schedule();
        let ss = StageSchedule::new(1000);
        let cfg = TrainConfig { batch: 2, base_steps: 3, global_steps: 3, detail_steps: 3, ..TrainConfig::default() };
        let run = || {
            let mut log = TrainLog::default();
            let mut base = UNet::new(tiny_cfg(), 0).unwrap();
            train_base(&mut base, &data, &noise, &cfg, &mut log).unwrap();
            let ccfg = ControlConfig { hint_channels: 4, min_masked_size: 8, ..ControlConfig::default() };
            let mut g = ControlBranch::from_unet(ControlStageKind::Global, ccfg, &base, 1).unwrap();
            train_control(&mut g, &base, &data, &noise, &ss, &cfg, &mut log).unwrap();
            let mut d = ControlBranch::warm_start_detail(&g, 2).unwrap();
            train_control(&mut d, &base, &data, &noise, &ss, &cfg, &mut log).unwrap();
            (log, base.params.fingerprint(), g.params.fingerprint(), d.params.fingerprint())
        };
        let (log, a, b, c) = run();
        assert!(log.rows.iter().filter(|r| r.stage == "detail").all(|r| r.t_max <= 500));
        assert!(log.rows.iter().filter(|r| r.stage == "global").all(|r| r.t_min > 500));
        assert_eq!(log.rows.len(), 9);
        let (_, a2, b2, c2) = run();
        assert_eq!((a, b, c), (a2, b2, c2));
        assert_ne!(b, c);
    }

    #[test]
    fn overfits_a_fixed_batch() {
        let data = corpus();
        let noise = default_schedule();
        let mut base = UNet::new(tiny_cfg(), 3).unwrap();
        let mut opt = Adam::new(&base.params, 3e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let picks: Vec<&GlyphSample> = data.iter().take(4).collect();
        let b = Batch::from_samples(&picks, base.cfg.num_classes, None, &mut rng).unwrap();
        let ts = vec![100, 300, 600, 900];
        let eps = Grid::randn(b.x0.shape(), &mut rng);
        let mut losses = Vec::new();
        for _ in 0..200 {
            let tape = Tape::new();
            let p = base.params.bind(&tape, true);
            let loss = train_loss(&tape, &noise, &b.x0, &ts, &eps, None, |x, ts| base.forward(&p, x, ts, &b.cond, None, None)).unwrap();
            losses.push(loss.value().values()[0]);
            let g = tape.backward(&loss).unwrap();
            opt.step(&mut base.params, &p, &g);
        }
        assert!(losses[199] < 0.5 * losses[0], "{} -> {}", losses[0], losses[199]);
    }
}
