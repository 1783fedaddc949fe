//! Trains the base model and both control branches on the toy corpus and saves them.
//!
//! cargo run --release --example train_toy -- [out_dir] [base_steps]
//!
//! Control branches get half as many steps as the base. The defaults take
//! roughly 15 minutes on one core.

use std::path::PathBuf;
use std::time::Instant;

use glyphforge::cli::corpus_seed;
use glyphforge::control::ControlConfig;
use glyphforge::diffusion::default_schedule;
use glyphforge::glyphdata::{render_sample, RenderConfig};
use glyphforge::pipeline::Models;
use glyphforge::stager::StageSchedule;
use glyphforge::train::{TrainConfig, TrainLog};
use glyphforge::unet::UNetConfig;

fn main() -> glyphforge::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "target/glyphforge-toy".into()));
    let mut cfg = TrainConfig::default();
    if let Some(n) = args.next().and_then(|s| s.parse().ok()) {
        cfg.base_steps = n;
        cfg.global_steps = n / 2;
        cfg.detail_steps = n / 2;
    }

    let corpus = (0..2000).map(|i| render_sample(corpus_seed(0, i), &RenderConfig::toy16())).collect::<glyphforge::Result<Vec<_>>>()?;
    let start = Instant::now();
    let mut log = TrainLog::default();
    let models = Models::train(&corpus, UNetConfig::default(), ControlConfig::default(), &cfg, &default_schedule(), &StageSchedule::new(1000), &mut log)?;
    for stage in ["base", "global", "detail"] {
        println!("{stage:<7} final loss {:.4}", log.tail_mean(stage, 50).unwrap_or(f64::NAN));
    }
    models.save(&out)?;
    println!("trained in {:.0}s, saved to {}", start.elapsed().as_secs_f64(), out.display());
    Ok(())
}
