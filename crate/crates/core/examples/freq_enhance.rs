//! Low-frequency suppression of control features and the weighted fusion.

use glyphforge::evalkit::relative_log_amplitude;
use glyphforge::freqbalance::{fuse, gamma_mask, gamma_modulate, FreqEnhanceParams};
use glyphforge::tensor::Grid;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> glyphforge::Result<()> {
    let params = FreqEnhanceParams::default();
    println!("{params:?}");

    let mask = gamma_mask(8, 8, &params)?;
    println!("\nfrequency mask (8x8, unshifted):");
    for row in mask.chunks(8) {
        println!("  {}", row.iter().map(|v| format!("{v:.1}")).collect::<Vec<_>>().join(" "));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let c = Grid::randn(&[1, 8, 32, 32], &mut rng).map(|v| v + 0.5);
    let before = relative_log_amplitude(&c)?;
    let after = relative_log_amplitude(&gamma_modulate(&c, &params)?)?;
    println!("\nbin  log_amp before  after");
    for b in 0..before.len() {
        println!("{b:>3}  {:>+10.3}  {:>+8.3}", before.log_amp[b], after.log_amp[b]);
    }

    let base = Grid::randn(&[1, 8, 32, 32], &mut rng);
    let skip = Grid::randn(&[1, 8, 32, 32], &mut rng);
    let fused = fuse(&base, &skip, &c, &params)?;
    println!("\nfused decoder input {:?} (skip half, then base half)", fused.shape());
    Ok(())
}
