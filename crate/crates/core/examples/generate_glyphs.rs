//! Controlled generation: requested glyphs at requested boxes.
//!
//! cargo run --release --example generate_glyphs -- [checkpoint_dir]
//!
//! Uses the models written by `train_toy`, or untrained ones if none exist.

use std::path::{Path, PathBuf};

use glyphforge::control::ControlBundle;
use glyphforge::diffusion::default_schedule;
use glyphforge::evalkit::{recognize_line, TemplateBank};
use glyphforge::freqbalance::FreqEnhanceParams;
use glyphforge::glyphdata::{Orientation, TextLine};
use glyphforge::pipeline::{image_seeds, Models};
use glyphforge::stager::{Request, Sampler};
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

    let lines: Vec<TextLine> = [("K", 3, 4), ("7", 18, 6), ("Q", 8, 17), ("S", 20, 16)]
        .iter()
        .map(|&(c, x, y)| TextLine::layout(c, x, y, 2, Orientation::Horizontal))
        .collect::<glyphforge::Result<_>>()?;
    let reqs: Vec<Request> = lines
        .iter()
        .map(|l| {
            Ok(Request {
                cond: ConditionEmbedding::new(vec![l.class_ids()])?,
                bundle: ControlBundle::from_lines(std::slice::from_ref(l), 32, 32),
            })
        })
        .collect::<glyphforge::Result<_>>()?;
    let seeds = image_seeds(42, reqs.len());

    let bank = TemplateBank::toy16();
    let controlled = models.sampler(&noise).with_enhance(Some(FreqEnhanceParams::default())).generate(&reqs, &seeds)?;
    let plain = Sampler::new(&models.base, &noise).generate(&reqs, &seeds)?;
    std::fs::create_dir_all("target/generated").ok();
    for (i, l) in lines.iter().enumerate() {
        glyphforge::pgm::write(&PathBuf::from(format!("target/generated/{i}_{}.pgm", l.content)), &controlled[i])?;
        println!(
            "asked {:?} at ({}, {}): controlled reads {:?}, uncontrolled reads {:?}",
            l.content,
            l.bbox.x,
            l.bbox.y,
            recognize_line(&controlled[i], l, &bank)?,
            recognize_line(&plain[i], l, &bank)?
        );
    }
    Ok(())
}
