use super::{Bound, ParamStore};
use crate::tensor::Gradients;

/// Adam with optional global-norm gradient clipping.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub clip_norm: Option<f64>,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        let zeros: Vec<Vec<f64>> = store.iter().map(|(_, g)| vec![0.0; g.len()]).collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: Some(1.0),
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update from the gradients of `bound` (which must come from `store`).
    /// Returns the pre-clip gradient norm.
    pub fn step(&mut self, store: &mut ParamStore, bound: &Bound<'_>, grads: &Gradients) -> f64 {
        self.step += 1;
        let gs: Vec<Option<&[f64]>> = bound.vars().iter().map(|v| grads.wrt(v)).collect();
        let norm = gs
            .iter()
            .flatten()
            .flat_map(|g| g.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt();
        let k = match self.clip_norm {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (i, g) in gs.into_iter().enumerate() {
            let Some(g) = g else { continue };
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let p = store.get_mut(super::ParamId(i)).values_mut();
            for j in 0..g.len() {
                let gj = g[j] * k;
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gj;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gj * gj;
                p[j] -= self.lr * (m[j] / bc1) / ((v[j] / bc2).sqrt() + self.eps);
            }
        }
        norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{Grid, Tape};

    #[test]
    fn minimizes_a_quadratic() {
        let mut store = ParamStore::new();
        let id = store.add("x", Grid::new(&[3], vec![2.0, -1.0, 0.5]).unwrap());
        let mut opt = Adam::new(&store, 0.05);
        opt.clip_norm = None;
        for _ in 0..400 {
            let tape = Tape::new();
            let b = store.bind(&tape, true);
            let x = b.get(id);
            let loss = x.mul(x).unwrap().sum();
            let g = tape.backward(&loss).unwrap();
            opt.step(&mut store, &b, &g);
        }
        assert!(store.get(id).max_abs() < 1e-2, "{:?}", store.get(id));
    }
}
