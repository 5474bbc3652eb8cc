//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sentiment_forecast::nn::{mse_with_grad, InputShape, Mode, ModelSpec, Network};

/// Largest relative error between backprop and central finite differences
/// of the MSE loss, over every parameter. Dropout masks are frozen by
/// reseeding the mask generator for every evaluation.
pub fn gradient_check(spec: &ModelSpec, window: usize, width: usize, batch: usize, seed: u64, h: f64) -> f64 {
    let mut data_rng = ChaCha8Rng::seed_from_u64(seed ^ 0xdead_beef);
    let x = Array3::from_shape_simple_fn((batch, window, width), || data_rng.sample::<f64, _>(StandardNormal));
    let y: Vec<f64> = (0..batch).map(|_| data_rng.sample(StandardNormal)).collect();
    let mut net = Network::init(spec.clone(), InputShape { window, width }, seed).unwrap();
    // non-zero biases exercise more of the backward pass
    for a in net.params_mut().arrays_mut() {
        if a.nrows() == 1 {
            a.mapv_inplace(|_| 0.1 * data_rng.sample::<f64, _>(StandardNormal));
        }
    }
    let mask_seed = seed.wrapping_mul(31).wrapping_add(7);

    let loss = |net: &Network| {
        let mut rng = ChaCha8Rng::seed_from_u64(mask_seed);
        let (p, _) = net.forward(&x, Mode::Train, &mut rng).unwrap();
        mse_with_grad(&p, &y).0
    };

    let mut rng = ChaCha8Rng::seed_from_u64(mask_seed);
    let (p, cache) = net.forward(&x, Mode::Train, &mut rng).unwrap();
    let (_, dp) = mse_with_grad(&p, &y);
    let grads = net.backward(&cache, &dp).unwrap();
    drop(cache);

    let mut worst: f64 = 0.0;
    for k in 0..net.params().len() {
        let orig = net.params().get(k);
        net.params_mut().set(k, orig + h);
        let up = loss(&net);
        net.params_mut().set(k, orig - h);
        let down = loss(&net);
        net.params_mut().set(k, orig);
        let numeric = (up - down) / (2.0 * h);
        let analytic = grads.get(k);
        let scale = analytic.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic - numeric).abs() / scale);
    }
    worst
}

/// Natural cubic spline via a dense solve of the full second-derivative
/// system, evaluated from explicit per-segment polynomial coefficients.
pub fn dense_spline(xs: &[f64], ys: &[f64], at: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    a[(0, 0)] = 1.0;
    a[(n - 1, n - 1)] = 1.0;
    for i in 1..n - 1 {
        let h0 = xs[i] - xs[i - 1];
        let h1 = xs[i + 1] - xs[i];
        a[(i, i - 1)] = h0 / 6.0;
        a[(i, i)] = (h0 + h1) / 3.0;
        a[(i, i + 1)] = h1 / 6.0;
        b[i] = (ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0;
    }
    let m = a.lu().solve(&b).expect("non-singular");
    at.iter()
        .map(|&x| {
            let i = (0..n - 1).find(|&i| x <= xs[i + 1]).unwrap_or(n - 2);
            let h = xs[i + 1] - xs[i];
            // S(x) = a0 + a1 d + a2 d^2 + a3 d^3 with d = x - x_i
            let a0 = ys[i];
            let a1 = (ys[i + 1] - ys[i]) / h - h * (2.0 * m[i] + m[i + 1]) / 6.0;
            let a2 = m[i] / 2.0;
            let a3 = (m[i + 1] - m[i]) / (6.0 * h);
            let d = x - xs[i];
            a0 + d * (a1 + d * (a2 + d * a3))
        })
        .collect()
}

/// Adjusted EWMA as the explicit weighted sum at every index.
pub fn ewma_brute(xs: &[f64], span: usize) -> Vec<f64> {
    let alpha = 2.0 / (span as f64 + 1.0);
    (0..xs.len())
        .map(|t| {
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..=t {
                let w = (1.0 - alpha).powi(i as i32);
                num += w * xs[t - i];
                den += w;
            }
            num / den
        })
        .collect()
}
