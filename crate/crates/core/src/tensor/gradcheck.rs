//! Central finite-difference oracle for checking tape gradients.
//!
//! Only forward evaluations on constant inputs are used here, so the oracle
//! stays independent of every backward closure it checks.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Grid, Tape, Var};
use crate::error::Result;

pub const DEFAULT_STEP: f64 = 1e-4;

/// Outcome of one gradient check: worst relative error across inputs.
#[derive(Clone, Debug)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub per_input: Vec<f64>,
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale < 1e-300 {
        0.0
    } else {
        diff / scale
    }
}

/// Compares tape gradients of the scalar `f(inputs)` against central
/// differences. At most `max_coords` coordinates per input are probed
/// (chosen by a fixed-seed draw) so large parameter sets stay cheap.
pub fn check<F>(inputs: &[Grid], max_coords: Option<usize>, f: F) -> Result<GradCheck>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    let tape = Tape::new();
    let vars: Vec<Var<'_>> = inputs.iter().map(|g| tape.leaf(g.clone())).collect();
    let loss = f(&tape, &vars)?;
    let grads = tape.backward(&loss)?;
    let analytic: Vec<Grid> = vars.iter().map(|v| grads.wrt_grid(v)).collect();

    let eval = |xs: &[Grid]| -> Result<f64> {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = xs.iter().map(|g| tape.constant(g.clone())).collect();
        Ok(f(&tape, &vars)?.value().values()[0])
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0x6772_6164);
    let mut per_input = Vec::with_capacity(inputs.len());
    let mut probe = inputs.to_vec();
    for (i, input) in inputs.iter().enumerate() {
        let n = input.len();
        let coords: Vec<usize> = match max_coords {
            Some(m) if m < n => sample(&mut rng, n, m).into_vec(),
            _ => (0..n).collect(),
        };
        let mut num = Vec::with_capacity(coords.len());
        let mut ana = Vec::with_capacity(coords.len());
        for &c in &coords {
            let orig = input.values()[c];
            probe[i].values_mut()[c] = orig + DEFAULT_STEP;
            let up = eval(&probe)?;
            probe[i].values_mut()[c] = orig - DEFAULT_STEP;
            let down = eval(&probe)?;
            probe[i].values_mut()[c] = orig;
            num.push((up - down) / (2.0 * DEFAULT_STEP));
            ana.push(analytic[i].values()[c]);
        }
        per_input.push(relative_error(&ana, &num));
    }
    Ok(GradCheck {
        max_rel_error: per_input.iter().cloned().fold(0.0, f64::max),
        per_input,
    })
}
