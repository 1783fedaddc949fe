//! Editing: re-noise an image to the edit timestep and redraw only the masked boxes.
//!
//! cargo run --release --example edit_image -- [checkpoint_dir]

use std::path::{Path, PathBuf};

use glyphforge::control::ControlBundle;
use glyphforge::diffusion::default_schedule;
use glyphforge::evalkit::{recognize_line, TemplateBank};
use glyphforge::freqbalance::FreqEnhanceParams;
use glyphforge::glyphdata::{render_sample, RenderConfig, TextLine};
use glyphforge::pipeline::{image_seeds, Models};
use glyphforge::stager::Request;
use glyphforge::unet::ConditionEmbedding;

fn load(dir: &Path) -> glyphforge::Result<Models> {
    Models::load(dir).or_else(|e| {
        eprintln!("{e}; falling back to untrained models (run the train_toy example first)");
        Models::untrained(Default::default(), Default::default(), 0)
    })
}

fn main() -> glyphforge::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/glyphforge-toy".into()));
    let models = load(&dir)?;
    let noise = default_schedule();
    let sampler = models.sampler(&noise).with_enhance(Some(FreqEnhanceParams::default()));
    let bank = TemplateBank::toy16();

    let rc = RenderConfig {
        max_lines: 1,
        max_chars: 1,
        scales: vec![2],
        vertical_prob: 0.0,
        ..RenderConfig::toy16()
    };
    let source = render_sample(11, &rc)?;
    let old = &source.lines[0];
    let new = TextLine { content: if old.content == "K" { "7".into() } else { "K".into() }, ..old.clone() };
    let req = Request {
        cond: ConditionEmbedding::new(vec![new.class_ids()])?,
        bundle: ControlBundle::from_lines(std::slice::from_ref(&new), 32, 32),
    };

    let edited = sampler.edit(std::slice::from_ref(&source.image), &[req], &image_seeds(3, 1))?.remove(0);
    let (mut inside, mut outside, mut n_in, mut n_out) = (0.0, 0.0, 0.0, 0.0);
    for ((a, b), m) in edited.values().iter().zip(source.image.values()).zip(source.position_map.values()) {
        let d = (a - b) * (a - b);
        if *m > 0.0 {
            inside += d;
            n_in += 1.0;
        } else {
            outside += d;
            n_out += 1.0;
        }
    }
    println!("edit {:?} -> {:?} at ({}, {})", old.content, new.content, old.bbox.x, old.bbox.y);
    println!("mean squared change inside box {:.4}, outside {:.4}", inside / n_in, outside / n_out);
    println!("edited box reads {:?}", recognize_line(&edited, &new, &bank)?);
    std::fs::create_dir_all("target/edited").ok();
    glyphforge::pgm::write(Path::new("target/edited/source.pgm"), &source.image)?;
    glyphforge::pgm::write(Path::new("target/edited/edited.pgm"), &edited)?;
    Ok(())
}
