//! Reverse-mode gradients on the tape, checked against central differences.

use glyphforge::tensor::{gradcheck, Grid, Tape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> glyphforge::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = Grid::randn(&[1, 2, 6, 6], &mut rng);
    let k = Grid::randn(&[3, 2, 3, 3], &mut rng);

    let tape = Tape::new();
    let xv = tape.constant(x.clone());
    let kv = tape.leaf(k.clone());
    // conv -> silu -> mean of squares
    let y = xv.conv2d(&kv, None, 1, 1)?.silu();
    let loss = y.mul(&y)?.mean();
    let grads = tape.backward(&loss)?;
    println!("loss = {:.6}", loss.value().values()[0]);
    println!("|dL/dk| = {:.6}", grads.wrt_grid(&kv).sum_sq().sqrt());

    let report = gradcheck::check(&[x, k], None, |_, v| {
        let y = v[0].conv2d(&v[1], None, 1, 1)?.silu();
        Ok(y.mul(&y)?.mean())
    })?;
    println!("max relative error vs finite differences: {:.2e}", report.max_rel_error);
    Ok(())
}
