//! Numeric substrate: dense grids, a reverse-mode tape, and the 2D FFT.

pub mod fft;
mod gemm;
pub mod gft;
pub mod gradcheck;
mod grid;
mod tape;

pub use fft::{fft2, ifft2, radial_frequency_map, ComplexGrid, RadialMap};
pub use grid::Grid;
pub use tape::{GradSink, Gradients, Tape, Var};

use crate::error::Result;

/// Non-differentiating convolution on plain grids, `[C, H, W]` or `[N, C, H, W]`.
pub fn conv2d(x: &Grid, kernel: &Grid, stride: usize, pad: usize) -> Result<Grid> {
    let tape = Tape::new();
    let rank3 = x.rank() == 3;
    let [n, c, h, w] = x.nchw()?;
    let xv = tape.constant(x.reshape(&[n, c, h, w])?);
    let kv = tape.constant(kernel.clone());
    let out = xv.conv2d(&kv, None, stride, pad)?.to_grid();
    if rank3 {
        let s = out.shape().to_vec();
        out.reshape(&s[1..])
    } else {
        Ok(out)
    }
}
