//! The filter cascade on the shipped fixtures and on a rendered batch.

use std::collections::BTreeMap;
use std::path::Path;

use glyphforge::glyphdata::{filter_sample, load_filter_fixtures, render_sample, FilterConfig, RenderConfig};

fn main() -> glyphforge::Result<()> {
    let fixtures = load_filter_fixtures(&Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data/filter_fixtures.json"))?;
    let full = FilterConfig::default();
    for f in &fixtures {
        let got = filter_sample(&f.meta, &full);
        let tag = if got == f.expected() { "ok  " } else { "DIFF" };
        println!("{tag} {:<26} accept={:<5} reason={:?}", f.name, got.accept, got.reason.map(|r| r.id()));
    }

    // toy canvas, pixel thresholds scaled down by 8
    let cfg = FilterConfig::scaled(8);
    let mut reasons: BTreeMap<&str, usize> = BTreeMap::new();
    for i in 0..500 {
        let d = filter_sample(&render_sample(i, &RenderConfig::toy16())?.meta(), &cfg);
        *reasons.entry(d.reason.map_or("accepted", |r| r.id())).or_default() += 1;
    }
    println!("\n500 rendered samples: {reasons:?}");
    Ok(())
}
