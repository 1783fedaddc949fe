//! Renders a small synthetic corpus and writes it to disk.
//!
//! cargo run --example render_corpus -- [out_dir]

use glyphforge::glyphdata::{dataset_stats, render_sample, write_dataset, RenderConfig};

fn main() -> glyphforge::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "target/example-corpus".into());
    let cfg = RenderConfig::toy16();
    let samples = (0..64).map(|i| render_sample(i, &cfg)).collect::<glyphforge::Result<Vec<_>>>()?;

    for s in samples.iter().take(4) {
        let texts: Vec<&str> = s.lines.iter().map(|l| l.content.as_str()).collect();
        println!("{:?}", texts);
    }
    write_dataset(std::path::Path::new(&out), &samples)?;
    let metas: Vec<_> = samples.iter().map(|s| s.meta()).collect();
    let stats = dataset_stats(&metas);
    println!("{} images, {} lines, {:.2} chars/line -> {out}", stats.image_count, stats.line_count, stats.mean_chars_per_line);
    Ok(())
}
