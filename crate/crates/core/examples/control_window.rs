//! Probe accuracy when control is applied only during part of the reverse process.
//!
//! cargo run --release --example control_window -- [checkpoint_dir]

use std::path::{Path, PathBuf};

use glyphforge::diffusion::default_schedule;
use glyphforge::evalkit::TemplateBank;
use glyphforge::glyphdata::font::TOY16_ALPHABET;
use glyphforge::pipeline::{image_seeds, run_probes, single_glyph_probes, Models};
use glyphforge::stager::ControlWindow;

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
    let sampler = models.sampler(&noise);
    let bank = TemplateBank::toy16();
    let probes = single_glyph_probes(TOY16_ALPHABET, 32, 32, 7)?;
    let seeds = image_seeds(7, probes.len());

    let windows = [
        ("always", ControlWindow::Always),
        ("never", ControlWindow::Never),
        ("t > 500 only", ControlWindow::Only(501..=1000)),
        ("t <= 500 only", ControlWindow::Only(1..=500)),
        ("off for t <= 250", ControlWindow::Only(251..=1000)),
    ];
    for (name, w) in windows {
        let (report, _) = run_probes(&probes, &seeds, 32, &bank, |r, s| sampler.ablate_control_window(r, s, w.clone()))?;
        println!("{name:<18} ACC {:.3}  NED {:.3}", report.acc, report.ned);
    }
    Ok(())
}
