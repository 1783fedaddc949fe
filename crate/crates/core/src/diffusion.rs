//! DDPM noise schedule, forward corruption, ancestral sampling steps and the
//! ε-prediction loss.
//!
//! Timesteps run `1..=T`; large `t` is the noisy end.

use std::fmt::Write as _;

use crate::control::ControlStageKind;
use crate::error::{Error, Result};
use crate::stager::{route, StageSchedule};
use crate::tensor::{Grid, Tape, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() || betas.iter().any(|&b| !(b > 0.0 && b < 1.0)) {
            return Err(Error::invalid("betas must be non-empty and inside (0, 1)"));
        }
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let alpha_bars = alphas
            .iter()
            .scan(1.0, |acc, a| {
                *acc *= a;
                Some(*acc)
            })
            .collect();
        Ok(NoiseSchedule {
            betas,
            alphas,
            alpha_bars,
        })
    }

    /// Step count `T`.
    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub fn check_t(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.len() {
            return Err(Error::invalid(format!("timestep {t} outside 1..={}", self.len())));
        }
        Ok(())
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t - 1]
    }

    /// `ᾱ_t`, with `ᾱ_0 = 1`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.alpha_bars[t - 1]
        }
    }

    /// `t, beta, alpha_bar` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,beta,alpha_bar\n");
        for t in 1..=self.len() {
            let _ = writeln!(s, "{t},{:.10e},{:.10e}", self.beta(t), self.alpha_bar(t));
        }
        s
    }
}

pub fn make_linear_schedule(t_max: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if t_max < 2 || !(0.0 < beta_start && beta_start < beta_end && beta_end < 1.0) {
        return Err(Error::invalid(format!(
            "linear schedule needs T >= 2 and 0 < beta_start < beta_end < 1, got T={t_max} [{beta_start}, {beta_end}]"
        )));
    }
    let step = (beta_end - beta_start) / (t_max - 1) as f64;
    NoiseSchedule::from_betas((0..t_max).map(|i| beta_start + step * i as f64).collect())
}

/// The default 1000-step schedule.
pub fn default_schedule() -> NoiseSchedule {
    make_linear_schedule(1000, 1e-4, 0.02).expect("valid constants")
}

/// `√ᾱ_t·x0 + √(1−ᾱ_t)·eps`.
pub fn q_sample(sched: &NoiseSchedule, x0: &Grid, t: usize, eps: &Grid) -> Result<Grid> {
    sched.check_t(t)?;
    let ab = sched.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    x0.zip_map(eps, |x, e| a * x + b * e)
}

/// [`q_sample`] with one timestep per leading-axis sample.
pub fn q_sample_batch(sched: &NoiseSchedule, x0: &Grid, ts: &[usize], eps: &Grid) -> Result<Grid> {
    x0.check_same_shape(eps)?;
    let n = x0.shape()[0];
    if ts.len() != n {
        return Err(Error::Shape {
            axis: "batch timesteps",
            expected: n,
            got: ts.len(),
        });
    }
    let per = x0.len() / n;
    let mut out = Vec::with_capacity(x0.len());
    for (i, &t) in ts.iter().enumerate() {
        sched.check_t(t)?;
        let ab = sched.alpha_bar(t);
        let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
        let r = i * per..(i + 1) * per;
        out.extend(x0.values()[r.clone()].iter().zip(&eps.values()[r]).map(|(x, e)| a * x + b * e));
    }
    Grid::new(x0.shape(), out)
}

fn posterior_step(x_t: &Grid, eps_hat: &Grid, alpha: f64, abar_t: f64, noise: Option<&Grid>) -> Result<Grid> {
    let beta = 1.0 - alpha;
    let k = beta / (1.0 - abar_t).sqrt();
    let inv = 1.0 / alpha.sqrt();
    let mean = x_t.zip_map(eps_hat, |x, e| inv * (x - k * e))?;
    match noise {
        Some(z) => {
            let sigma = beta.sqrt();
            mean.zip_map(z, |m, z| m + sigma * z)
        }
        None => Ok(mean),
    }
}

/// One ancestral step `t → t−1`; `noise` is ignored at `t = 1`.
pub fn ddpm_step(sched: &NoiseSchedule, x_t: &Grid, eps_hat: &Grid, t: usize, noise: Option<&Grid>) -> Result<Grid> {
    sched.check_t(t)?;
    let noise = if t == 1 { None } else { noise };
    posterior_step(x_t, eps_hat, sched.alpha(t), sched.alpha_bar(t), noise)
}

/// Ancestral step `t → t_prev` of a strided sampler, using the effective
/// `α = ᾱ_t / ᾱ_prev`. Deterministic when `t_prev = 0`.
pub fn strided_step(
    sched: &NoiseSchedule,
    x_t: &Grid,
    eps_hat: &Grid,
    t: usize,
    t_prev: usize,
    noise: Option<&Grid>,
) -> Result<Grid> {
    sched.check_t(t)?;
    if t_prev >= t {
        return Err(Error::invalid(format!("strided step must descend, got {t} -> {t_prev}")));
    }
    let noise = if t_prev == 0 { None } else { noise };
    let alpha = sched.alpha_bar(t) / sched.alpha_bar(t_prev);
    posterior_step(x_t, eps_hat, alpha, sched.alpha_bar(t), noise)
}

/// Descending timesteps `T, T−s, …, s` of a uniform `steps`-step sampler.
pub fn strided_timesteps(t_max: usize, steps: usize) -> Result<Vec<usize>> {
    if steps == 0 || steps > t_max || !t_max.is_multiple_of(steps) {
        return Err(Error::invalid(format!("{steps} sampler steps must evenly divide T={t_max}")));
    }
    let stride = t_max / steps;
    Ok((1..=steps).rev().map(|k| k * stride).collect())
}

/// Mean squared error between `eps` and the model's prediction on
/// `q_sample(x0, t, eps)`. With a stage given, every `t` must route to it.
pub fn train_loss<'t, F>(
    tape: &'t Tape,
    sched: &NoiseSchedule,
    x0: &Grid,
    ts: &[usize],
    eps: &Grid,
    stage: Option<(ControlStageKind, &StageSchedule)>,
    model: F,
) -> Result<Var<'t>>
where
    F: FnOnce(&Var<'t>, &[usize]) -> Result<Var<'t>>,
{
    if let Some((kind, ss)) = stage {
        if let Some(&bad) = ts.iter().find(|&&t| route(t, ss) != kind) {
            return Err(Error::invalid(format!("timestep {bad} does not belong to the {kind:?} stage")));
        }
    }
    let x_t = tape.constant(q_sample_batch(sched, x0, ts, eps)?);
    let pred = model(&x_t, ts)?;
    pred.mse(&tape.constant(eps.clone()))
}
