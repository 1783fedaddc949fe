//! Radix-2 2D FFT over the trailing `[H, W]` axes.
//!
//! Convention: forward transform is unnormalized, inverse carries `1/(H·W)`.

use std::f64::consts::PI;

use super::Grid;
use crate::error::{Error, Result};

/// Largest imaginary residue tolerated when an inverse transform is expected to be real.
pub const IMAG_RESIDUE_TOL: f64 = 1e-4;

/// Complex planes produced by [`fft2`]. Layout matches the source grid: the
/// leading dims are flattened into `channels`, each plane is `height × width`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexGrid {
    source_shape: Vec<usize>,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexGrid {
    pub fn source_shape(&self) -> &[usize] {
        &self.source_shape
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> (f64, f64) {
        let i = (c * self.height + y) * self.width + x;
        (self.re[i], self.im[i])
    }

    /// Sum of squared magnitudes over all bins.
    pub fn energy(&self) -> f64 {
        self.re.iter().zip(&self.im).map(|(a, b)| a * a + b * b).sum()
    }

    /// Multiplies every plane by a real per-bin factor laid out in FFT order.
    pub fn scale_bins(&mut self, factor: &[f64]) {
        let plane = self.height * self.width;
        assert_eq!(factor.len(), plane);
        for (re, im) in self.re.chunks_mut(plane).zip(self.im.chunks_mut(plane)) {
            for ((r, i), f) in re.iter_mut().zip(im.iter_mut()).zip(factor) {
                *r *= f;
                *i *= f;
            }
        }
    }
}

pub fn is_pow2(n: usize) -> bool {
    n >= 1 && n & (n - 1) == 0
}

pub(crate) fn check_pow2(h: usize, w: usize) -> Result<()> {
    if !is_pow2(h) || !is_pow2(w) {
        return Err(Error::Size(format!(
            "fft dimensions must be powers of two, got {h}x{w}"
        )));
    }
    Ok(())
}

fn spatial_dims(shape: &[usize]) -> Result<(usize, usize, usize)> {
    if shape.len() < 2 {
        return Err(Error::Size(format!("fft2 needs rank >= 2, got {shape:?}")));
    }
    let r = shape.len();
    let (h, w) = (shape[r - 2], shape[r - 1]);
    check_pow2(h, w)?;
    Ok((shape[..r - 2].iter().product(), h, w))
}

/// In-place iterative radix-2 transform of one complex sequence.
fn fft1d(re: &mut [f64], im: &mut [f64], inverse: bool) {
    let n = re.len();
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            re.swap(i, j);
            im.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = sign * 2.0 * PI / len as f64;
        for k in 0..half {
            let (s, c) = (step * k as f64).sin_cos();
            let mut start = 0;
            while start < n {
                let a = start + k;
                let b = a + half;
                let tr = re[b] * c - im[b] * s;
                let ti = re[b] * s + im[b] * c;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
                start += len;
            }
        }
        len *= 2;
    }
}

/// Unnormalized 2D transform of one `h × w` plane, in place.
pub(crate) fn fft2_plane(re: &mut [f64], im: &mut [f64], h: usize, w: usize, inverse: bool) {
    for y in 0..h {
        fft1d(&mut re[y * w..(y + 1) * w], &mut im[y * w..(y + 1) * w], inverse);
    }
    let mut col_re = vec![0.0; h];
    let mut col_im = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            col_re[y] = re[y * w + x];
            col_im[y] = im[y * w + x];
        }
        fft1d(&mut col_re, &mut col_im, inverse);
        for y in 0..h {
            re[y * w + x] = col_re[y];
            im[y * w + x] = col_im[y];
        }
    }
}

/// Forward 2D DFT of every trailing `[H, W]` plane.
pub fn fft2(x: &Grid) -> Result<ComplexGrid> {
    let (channels, h, w) = spatial_dims(x.shape())?;
    let mut re = x.values().to_vec();
    let mut im = vec![0.0; re.len()];
    for (r, i) in re.chunks_mut(h * w).zip(im.chunks_mut(h * w)) {
        fft2_plane(r, i, h, w, false);
    }
    Ok(ComplexGrid {
        source_shape: x.shape().to_vec(),
        height: h,
        width: w,
        channels,
        re,
        im,
    })
}

/// Normalized inverse transform keeping both parts.
pub fn ifft2_complex(x: &ComplexGrid) -> ComplexGrid {
    let (h, w) = (x.height, x.width);
    let norm = 1.0 / (h * w) as f64;
    let mut out = x.clone();
    for (r, i) in out.re.chunks_mut(h * w).zip(out.im.chunks_mut(h * w)) {
        fft2_plane(r, i, h, w, true);
        r.iter_mut().for_each(|v| *v *= norm);
        i.iter_mut().for_each(|v| *v *= norm);
    }
    out
}

/// Normalized inverse transform back to a real grid of the source shape.
///
/// Fails if the imaginary part left over is above [`IMAG_RESIDUE_TOL`]
/// (relative to the output scale when that exceeds one).
pub fn ifft2(x: &ComplexGrid) -> Result<Grid> {
    let out = ifft2_complex(x);
    let scale = out.re.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let residue = out.im.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if residue > IMAG_RESIDUE_TOL * scale {
        return Err(Error::Numeric(format!(
            "inverse transform has imaginary residue {residue:.3e}"
        )));
    }
    Grid::new(&x.source_shape, out.re)
}

/// Normalized radius of every spectrum position, stored in centered layout
/// (DC at `(H/2, W/2)`).
#[derive(Clone, Debug, PartialEq)]
pub struct RadialMap {
    pub height: usize,
    pub width: usize,
    r: Vec<f64>,
}

impl RadialMap {
    /// Radius at a centered position.
    pub fn centered(&self, y: usize, x: usize) -> f64 {
        self.r[y * self.width + x]
    }

    /// Radius of the unshifted FFT bin `(ky, kx)`.
    pub fn at_bin(&self, ky: usize, kx: usize) -> f64 {
        let cy = (ky + self.height / 2) % self.height;
        let cx = (kx + self.width / 2) % self.width;
        self.centered(cy, cx)
    }

    /// Radii laid out in unshifted FFT order, one per bin.
    pub fn bins(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.height * self.width);
        for ky in 0..self.height {
            for kx in 0..self.width {
                out.push(self.at_bin(ky, kx));
            }
        }
        out
    }

    pub fn centered_values(&self) -> &[f64] {
        &self.r
    }
}

/// `r = sqrt(u² + v²) / sqrt(u_max² + v_max²)` over centered integer frequencies.
pub fn radial_frequency_map(h: usize, w: usize) -> Result<RadialMap> {
    if h < 2 || w < 2 {
        return Err(Error::Size(format!("radial map needs H, W >= 2, got {h}x{w}")));
    }
    let (hh, hw) = ((h / 2) as f64, (w / 2) as f64);
    let r_max = (hh * hh + hw * hw).sqrt();
    let mut r = Vec::with_capacity(h * w);
    for y in 0..h {
        let u = y as f64 - hh;
        for x in 0..w {
            let v = x as f64 - hw;
            r.push((u * u + v * v).sqrt() / r_max);
        }
    }
    Ok(RadialMap {
        height: h,
        width: w,
        r,
    })
}
