//! One noise prediction from a fresh UNet, and the features entering each decoder layer.

use glyphforge::tensor::Grid;
use glyphforge::unet::{ConditionEmbedding, UNet, UNetConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> glyphforge::Result<()> {
    let net = UNet::new(UNetConfig::default(), 0)?;
    println!("{} parameters, {} decoder layers", net.params.numel(), net.decoder_layers());

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = Grid::randn(&[2, 1, 32, 32], &mut rng);
    let conds = [ConditionEmbedding::new(vec![vec![12, 31]])?, ConditionEmbedding::unconditional()];
    let cond = ConditionEmbedding::batch(&conds, net.cfg.num_classes)?;

    let eps = net.predict(&x, &[700, 50], &cond, None, None)?;
    println!("eps_hat shape {:?}, std {:.4}", eps.shape(), (eps.sum_sq() / eps.len() as f64).sqrt());

    let (snaps, _) = net.capture_decoder_features(&x, &[700, 50], &cond, None)?;
    for (i, s) in snaps.iter().enumerate() {
        println!("decoder layer {i}: base {:?} skip {:?}", s.base.shape(), s.skip.shape());
    }
    Ok(())
}
