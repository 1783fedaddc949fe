//! Radial spectra of the base, skip and control features entering each decoder layer.
//!
//! cargo run --release --example decoder_spectrum -- [checkpoint_dir]

use std::path::{Path, PathBuf};

use glyphforge::diffusion::default_schedule;
use glyphforge::freqbalance::FreqEnhanceParams;
use glyphforge::glyphdata::font::TOY16_ALPHABET;
use glyphforge::pipeline::{capture_spectra, single_glyph_probes, Models};
use glyphforge::stager::StageSchedule;

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
    let ss = StageSchedule::new(1000);
    let probes = single_glyph_probes(TOY16_ALPHABET, 16, 32, 1)?;
    let gamma = FreqEnhanceParams::default();

    for layer in 0..models.base.decoder_layers() {
        let raw = capture_spectra(&models, &noise, &ss, &probes, layer, 200, 1, None)?;
        let modulated = capture_spectra(&models, &noise, &ss, &probes, layer, 200, 1, Some(&gamma))?;
        println!("decoder layer {layer} (t = 200), relative log amplitude by radius bin:");
        for (name, curve) in raw.iter().chain(std::iter::once(&("control+γ", modulated[2].1.clone()))) {
            let row: Vec<String> = curve.rel_log_amp.iter().map(|v| format!("{v:+.2}")).collect();
            println!("  {name:<10} {}", row.join(" "));
        }
    }
    Ok(())
}
