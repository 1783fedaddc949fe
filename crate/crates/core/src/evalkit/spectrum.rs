//! Radially averaged log-amplitude spectra of feature maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{fft2, radial_frequency_map, Grid};

/// Amplitudes are clamped here before taking logs.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumCurve {
    /// Center of each normalized-radius bin.
    pub radial_bins: Vec<f64>,
    /// Channel-averaged log of the bin's mean amplitude.
    pub log_amp: Vec<f64>,
    /// `log_amp` shifted so the first bin is zero.
    pub rel_log_amp: Vec<f64>,
}

impl SpectrumCurve {
    pub fn len(&self) -> usize {
        self.radial_bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radial_bins.is_empty()
    }

    /// Upper radius edge of bin `b`.
    pub fn bin_upper(&self, b: usize) -> f64 {
        (b + 1) as f64 / self.len() as f64
    }
}

/// Index of the radius bin among `n` equal bins on `[0, 1]`.
fn bin_of(r: f64, n: usize) -> usize {
    ((r * n as f64) as usize).min(n - 1)
}

/// Spectrum of a `[C, H, W]` or `[N, C, H, W]` feature, averaged over every
/// plane. Bin count is `min(H, W) / 2`.
pub fn relative_log_amplitude(feature: &Grid) -> Result<SpectrumCurve> {
    let r = feature.rank();
    if r < 2 {
        return Err(Error::Size(format!("spectrum needs a spatial grid, got {:?}", feature.shape())));
    }
    let (h, w) = (feature.shape()[r - 2], feature.shape()[r - 1]);
    let spec = fft2(feature)?;
    let radii = radial_frequency_map(h, w)?.bins();
    let nb = (h.min(w) / 2).max(1);
    let mut counts = vec![0usize; nb];
    for &rad in &radii {
        counts[bin_of(rad, nb)] += 1;
    }
    let plane = h * w;
    let mut log_amp = vec![0.0; nb];
    for c in 0..spec.channels {
        let mut sums = vec![0.0; nb];
        for (i, &rad) in radii.iter().enumerate() {
            let (re, im) = (spec.re[c * plane + i], spec.im[c * plane + i]);
            sums[bin_of(rad, nb)] += (re * re + im * im).sqrt();
        }
        for b in 0..nb {
            log_amp[b] += (sums[b] / counts[b].max(1) as f64).max(LOG_FLOOR).ln();
        }
    }
    log_amp.iter_mut().for_each(|v| *v /= spec.channels as f64);
    let anchor = log_amp[0];
    Ok(SpectrumCurve {
        radial_bins: (0..nb).map(|b| (b as f64 + 0.5) / nb as f64).collect(),
        rel_log_amp: log_amp.iter().map(|v| v - anchor).collect(),
        log_amp,
    })
}
