//! Property tests for the FFT and the frequency-domain gain, against a direct DFT.

use glyphforge::freqbalance::{gamma_mask, gamma_modulate, FreqEnhanceParams};
use glyphforge::tensor::{fft2, ifft2, Grid};
use proptest::prelude::*;

fn grid(c: usize, h: usize, w: usize) -> impl Strategy<Value = Grid> {
    prop::collection::vec(-3.0f64..3.0, c * h * w).prop_map(move |v| Grid::new(&[c, h, w], v).unwrap())
}

fn sized_grid() -> impl Strategy<Value = Grid> {
    (1usize..3, 1u32..5, 1u32..5).prop_flat_map(|(c, a, b)| grid(c, 1 << a, 1 << b))
}

fn direct_dft(x: &[f64], h: usize, w: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(h * w);
    for ky in 0..h {
        for kx in 0..w {
            let (mut re, mut im) = (0.0, 0.0);
            for y in 0..h {
                for xx in 0..w {
                    let a = -2.0 * std::f64::consts::PI * ((ky * y) as f64 / h as f64 + (kx * xx) as f64 / w as f64);
                    re += x[y * w + xx] * a.cos();
                    im += x[y * w + xx] * a.sin();
                }
            }
            out.push((re, im));
        }
    }
    out
}

fn params() -> impl Strategy<Value = FreqEnhanceParams> {
    (0.0f64..=1.0, 0.05f64..1.0).prop_map(|(s, r)| FreqEnhanceParams { s, r_thresh: r, ..FreqEnhanceParams::default() })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fft_round_trip(x in sized_grid()) {
        prop_assert!(ifft2(&fft2(&x).unwrap()).unwrap().max_abs_diff(&x) < 1e-9);
    }

    #[test]
    fn parseval(x in sized_grid()) {
        let s = x.shape();
        let spec = fft2(&x).unwrap().energy() / (s[1] * s[2]) as f64;
        prop_assert!((spec - x.sum_sq()).abs() <= 1e-9 * (1.0 + x.sum_sq()));
    }

    #[test]
    fn fft_matches_direct_dft(x in grid(1, 4, 8)) {
        let spec = fft2(&x).unwrap();
        let oracle = direct_dft(x.values(), 4, 8);
        for (i, (re, im)) in oracle.iter().enumerate() {
            let (fr, fi) = spec.get(0, i / 8, i % 8);
            prop_assert!((fr - re).abs() < 1e-9 && (fi - im).abs() < 1e-9);
        }
    }

    #[test]
    fn fft_is_linear(x in grid(2, 8, 8), y in grid(2, 8, 8), a in -2.0f64..2.0) {
        let lhs = fft2(&x.scale(a).add(&y).unwrap()).unwrap();
        let (fx, fy) = (fft2(&x).unwrap(), fft2(&y).unwrap());
        for c in 0..2 {
            for k in 0..64 {
                let (l, p, q) = (lhs.get(c, k / 8, k % 8), fx.get(c, k / 8, k % 8), fy.get(c, k / 8, k % 8));
                prop_assert!((l.0 - (a * p.0 + q.0)).abs() < 1e-9 && (l.1 - (a * p.1 + q.1)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn gain_is_linear(x in grid(2, 8, 8), y in grid(2, 8, 8), a in -2.0f64..2.0, p in params()) {
        let lhs = gamma_modulate(&x.scale(a).add(&y).unwrap(), &p).unwrap();
        let rhs = gamma_modulate(&x, &p).unwrap().scale(a).add(&gamma_modulate(&y, &p).unwrap()).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-9);
    }

    #[test]
    fn gain_scales_each_bin(x in grid(1, 8, 8), p in params()) {
        let mask = gamma_mask(8, 8, &p).unwrap();
        let out = direct_dft(gamma_modulate(&x, &p).unwrap().values(), 8, 8);
        let inp = direct_dft(x.values(), 8, 8);
        for k in 0..64 {
            prop_assert!((out[k].0 - mask[k] * inp[k].0).abs() < 1e-8);
            prop_assert!((out[k].1 - mask[k] * inp[k].1).abs() < 1e-8);
        }
    }

    #[test]
    fn suppression_never_adds_energy(x in grid(3, 8, 8), s in 0.0f64..=1.0) {
        let p = FreqEnhanceParams { s, ..FreqEnhanceParams::default() };
        prop_assert!(gamma_modulate(&x, &p).unwrap().sum_sq() <= x.sum_sq() + 1e-9);
    }
}
