//! Template recognition of rendered lines, with and without pixel noise.

use glyphforge::evalkit::{ned, recognize_line, TemplateBank};
use glyphforge::glyphdata::{render_glyph_map, Orientation, TextLine};
use glyphforge::tensor::Grid;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> glyphforge::Result<()> {
    let bank = TemplateBank::full();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let lines = [
        TextLine::layout("GLYPH", 1, 1, 1, Orientation::Horizontal)?,
        TextLine::layout("K7", 3, 18, 2, Orientation::Horizontal)?,
        TextLine::layout("ab", 1, 10, 1, Orientation::Horizontal)?,
    ];
    let clean = render_glyph_map(&lines, 32, 32);
    for amp in [0.5, 1.0, 1.5, 2.0, 3.0] {
        let noisy = clean.add(&Grid::uniform(clean.shape(), -amp, amp, &mut rng))?;
        let reads: Vec<String> = lines.iter().map(|l| recognize_line(&noisy, l, &bank)).collect::<glyphforge::Result<_>>()?;
        let mean_ned = lines.iter().zip(&reads).map(|(l, r)| ned(&l.content, r)).sum::<f64>() / lines.len() as f64;
        println!("noise ±{amp:.1}: {reads:?}  mean NED {mean_ned:.3}");
    }
    Ok(())
}
