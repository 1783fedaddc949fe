//! 2-D FFT round trip, Parseval, and the radial spectrum of a rendered glyph.

use glyphforge::evalkit::relative_log_amplitude;
use glyphforge::glyphdata::{render_glyph_map, Orientation, TextLine};
use glyphforge::tensor::{fft2, ifft2};

fn main() -> glyphforge::Result<()> {
    let line = TextLine::layout("K7", 4, 8, 2, Orientation::Horizontal)?;
    let img = render_glyph_map(std::slice::from_ref(&line), 32, 32);

    let spec = fft2(&img)?;
    let back = ifft2(&spec)?;
    println!("round-trip error  {:.2e}", back.max_abs_diff(&img));
    println!("energy (pixels)   {:.6}", img.sum_sq());
    println!("energy (spectrum) {:.6}", spec.energy() / (32.0 * 32.0));

    let curve = relative_log_amplitude(&img)?;
    println!("\nbin  radius  rel_log_amp");
    for (b, (r, a)) in curve.radial_bins.iter().zip(&curve.rel_log_amp).enumerate() {
        println!("{b:>3}  {r:.3}   {a:+.3}");
    }
    Ok(())
}
