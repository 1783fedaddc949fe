//! Inference-time Fourier enhancement of control features and the balanced
//! fusion of skip, control and base features at each decoder layer.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{fft2, ifft2, radial_frequency_map, Grid, Var};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreqEnhanceParams {
    /// Control-feature weight.
    pub alpha: f64,
    /// Base-feature weight.
    pub beta: f64,
    /// Gain applied to spectrum bins below `r_thresh`.
    pub s: f64,
    pub r_thresh: f64,
}

impl Default for FreqEnhanceParams {
    fn default() -> Self {
        FreqEnhanceParams {
            alpha: 1.4,
            beta: 1.2,
            s: 0.2,
            r_thresh: 0.25,
        }
    }
}

impl FreqEnhanceParams {
    /// `(1, 1, 1)`: fusion reduces to plain skip-plus-control.
    pub fn neutral() -> Self {
        FreqEnhanceParams {
            alpha: 1.0,
            beta: 1.0,
            s: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_thresh > 0.0 && self.r_thresh < 1.0) {
            return Err(Error::invalid(format!("r_thresh must lie in (0, 1), got {}", self.r_thresh)));
        }
        if !(0.0..=1.0).contains(&self.s) || !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(Error::invalid("s must lie in [0, 1] and alpha, beta must be finite"));
        }
        Ok(())
    }
}

/// Per-bin gain in FFT order: `s` below `r_thresh`, 1 elsewhere.
pub fn gamma_mask(h: usize, w: usize, params: &FreqEnhanceParams) -> Result<Vec<f64>> {
    params.validate()?;
    Ok(radial_frequency_map(h, w)?
        .bins()
        .into_iter()
        .map(|r| if r < params.r_thresh { params.s } else { 1.0 })
        .collect())
}

fn spatial(shape: &[usize]) -> Result<(usize, usize)> {
    match *shape {
        [.., h, w] if shape.len() >= 2 => Ok((h, w)),
        _ => Err(Error::Size(format!("expected a spatial grid, got {shape:?}"))),
    }
}

/// `IFFT(FFT(C) ⊙ γ)` on every plane. Exactly the identity when `s = 1`.
pub fn gamma_modulate(c: &Grid, params: &FreqEnhanceParams) -> Result<Grid> {
    params.validate()?;
    if params.s == 1.0 {
        return Ok(c.clone());
    }
    let (h, w) = spatial(c.shape())?;
    let mut spec = fft2(c)?;
    spec.scale_bins(&gamma_mask(h, w, params)?);
    ifft2(&spec)
}

/// Differentiable [`gamma_modulate`] for `[N, C, H, W]` vars.
pub fn gamma_modulate_var<'t>(c: &Var<'t>, params: &FreqEnhanceParams) -> Result<Var<'t>> {
    params.validate()?;
    if params.s == 1.0 {
        return Ok(c.clone());
    }
    let (h, w) = spatial(c.shape())?;
    let mask = Grid::new(&[1, 1, h, w], gamma_mask(h, w, params)?)?;
    c.fft2_stacked()?.mul_mask(&mask)?.ifft2_real()
}

/// `[S + α·C′, β·F]` along channels.
pub fn fuse(f: &Grid, s: &Grid, c_prime: &Grid, params: &FreqEnhanceParams) -> Result<Grid> {
    s.check_same_shape(c_prime)?;
    let [n, cs, h, w] = s.nchw()?;
    let [fnn, cf, fh, fw] = f.nchw()?;
    if (fnn, fh, fw) != (n, h, w) {
        return Err(Error::Shape {
            axis: "fuse base spatial",
            expected: n * h * w,
            got: fnn * fh * fw,
        });
    }
    let hw = h * w;
    let mut out = Vec::with_capacity(n * (cs + cf) * hw);
    for i in 0..n {
        let r = i * cs * hw..(i + 1) * cs * hw;
        out.extend(s.values()[r.clone()].iter().zip(&c_prime.values()[r]).map(|(s, c)| s + params.alpha * c));
        out.extend(f.values()[i * cf * hw..(i + 1) * cf * hw].iter().map(|v| params.beta * v));
    }
    Grid::new(&[n, cs + cf, h, w], out)
}

/// Differentiable [`fuse`]; with no control the first block is `S` itself.
pub fn fuse_var<'t>(f: &Var<'t>, s: &Var<'t>, c_prime: Option<&Var<'t>>, params: &FreqEnhanceParams) -> Result<Var<'t>> {
    let first = match c_prime {
        Some(c) => s.add(&c.scale(params.alpha))?,
        None => s.clone(),
    };
    Var::concat_channels(&[&first, &f.scale(params.beta)])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub params: FreqEnhanceParams,
    pub acc: f64,
    pub ned: f64,
}

/// Cartesian product of the given value lists at a fixed `r_thresh`.
pub fn sweep_grid(alphas: &[f64], betas: &[f64], ss: &[f64], r_thresh: f64) -> Vec<FreqEnhanceParams> {
    let mut out = Vec::new();
    for &alpha in alphas {
        for &beta in betas {
            for &s in ss {
                out.push(FreqEnhanceParams { alpha, beta, s, r_thresh });
            }
        }
    }
    out
}

/// Evaluates every grid point; `eval` returns `(acc, ned)`.
pub fn sweep_params<E>(grid: &[FreqEnhanceParams], mut eval: E) -> Result<Vec<SweepRow>>
where
    E: FnMut(&FreqEnhanceParams) -> Result<(f64, f64)>,
{
    grid.iter()
        .map(|p| {
            p.validate()?;
            let (acc, ned) = eval(p)?;
            Ok(SweepRow { params: *p, acc, ned })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("alpha,beta,s,r_thresh,acc,ned\n");
    for r in rows {
        let p = r.params;
        let _ = writeln!(s, "{},{},{},{},{:.6},{:.6}", p.alpha, p.beta, p.s, p.r_thresh, r.acc, r.ned);
    }
    s
}
