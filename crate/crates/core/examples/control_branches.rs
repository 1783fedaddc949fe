//! Global and detail control branches: zero-init outputs and the detail-stage mask.

use glyphforge::control::{fec_forward, sc_forward, ControlBranch, ControlBundle, ControlConfig, ControlInputs, ControlStageKind};
use glyphforge::glyphdata::{render_sample, RenderConfig};
use glyphforge::tensor::Grid;
use glyphforge::unet::{ConditionEmbedding, UNet, UNetConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> glyphforge::Result<()> {
    let base = UNet::new(UNetConfig::default(), 0)?;
    let global = ControlBranch::from_unet(ControlStageKind::Global, ControlConfig::default(), &base, 1)?;
    let detail = ControlBranch::warm_start_detail(&global, 2)?;

    let sample = render_sample(7, &RenderConfig::toy16())?;
    let bundle = ControlBundle::from_lines(&sample.lines, 32, 32);
    println!("lines: {:?}", sample.lines.iter().map(|l| &l.content).collect::<Vec<_>>());

    let glyph = Grid::stack(std::slice::from_ref(&bundle.glyph))?;
    let pos = Grid::stack(std::slice::from_ref(&bundle.position))?;
    println!("glyph encoder out {:?}", fec_forward(&global, &glyph)?.shape());
    println!("position encoder out {:?}", sc_forward(&global, &pos)?.shape());

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = Grid::randn(&[1, 1, 32, 32], &mut rng);
    let cond = ConditionEmbedding::batch(&[ConditionEmbedding::new(sample.class_sequences.clone())?], base.cfg.num_classes)?;

    let g = global.predict(&ControlInputs::stack(&[&bundle])?, &x, &[800], &cond)?;
    println!("\nfresh global branch, max |feature| per layer: {:?}", g.iter().map(Grid::max_abs).collect::<Vec<_>>());

    let edit = bundle.with_masked(&sample.image)?;
    let d = detail.predict(&ControlInputs::stack(&[&edit])?, &x, &[200], &cond)?;
    println!("fresh detail branch, feature sizes: {:?}", d.iter().map(|c| c.shape()[2]).collect::<Vec<_>>());
    println!("layers at or above {}px are masked to the text region", detail.cfg.min_masked_size);
    Ok(())
}
