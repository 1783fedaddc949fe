//! Forward noising with the default linear schedule.

use glyphforge::diffusion::{default_schedule, q_sample};
use glyphforge::glyphdata::{render_glyph_map, Orientation, TextLine};
use glyphforge::stager::to_model_space;
use glyphforge::tensor::Grid;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> glyphforge::Result<()> {
    let sched = default_schedule();
    let line = TextLine::layout("S", 10, 9, 2, Orientation::Horizontal)?;
    let x0 = to_model_space(&render_glyph_map(std::slice::from_ref(&line), 32, 32));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let eps = Grid::randn(x0.shape(), &mut rng);

    println!("   t   alpha_bar   corr(x_t, x0)");
    for t in [1, 100, 250, 500, 750, 1000] {
        let xt = q_sample(&sched, &x0, t, &eps)?;
        println!("{t:>4}   {:.5}     {:+.3}", sched.alpha_bar(t), corr(&xt, &x0));
    }
    Ok(())
}

fn corr(a: &Grid, b: &Grid) -> f64 {
    let (ma, mb) = (a.mean(), b.mean());
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.values().iter().zip(b.values()) {
        ab += (x - ma) * (y - mb);
        aa += (x - ma) * (x - ma);
        bb += (y - mb) * (y - mb);
    }
    ab / (aa * bb).sqrt()
}
