use super::network::{Gradients, Parameters};
use super::train::TrainConfig;
use crate::error::{contract, Error, Result};

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Parameters,
    pub v: Parameters,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &Parameters) -> Self {
        AdamState { m: params.zeros_like(), v: params.zeros_like(), t: 0 }
    }
}

/// One bias-corrected Adam update. Non-finite gradients abort before any
/// state is touched.
pub fn adam_step(params: &mut Parameters, grads: &Gradients, state: &mut AdamState, config: &TrainConfig) -> Result<()> {
    if params.shapes() != grads.shapes() || params.shapes() != state.m.shapes() {
        return Err(contract("gradient or optimiser state shapes differ from the parameters"));
    }
    if !grads.all_finite() {
        return Err(Error::Training(format!("non-finite gradient at step {}", state.t + 1)));
    }
    let (b1, b2) = (config.adam_beta1, config.adam_beta2);
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let lr = config.learning_rate;
    let eps = config.adam_epsilon;
    for (((p, g), m), v) in params
        .arrays_mut()
        .zip(grads.arrays())
        .zip(state.m.arrays_mut())
        .zip(state.v.arrays_mut())
    {
        ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        });
    }
    Ok(())
}
