//! Simple-recurrent, GRU and LSTM cells unrolled over a sequence, with
//! backpropagation through time.
//!
//! Kernels are fused across gates: the input kernel is `in x G*u`, the
//! recurrent kernel `u x G*u` and the bias `1 x G*u`, with gate blocks in the
//! order GRU `[update, reset, candidate]` and LSTM
//! `[input, forget, candidate, output]`. Gates use the logistic sigmoid.
//! The GRU applies its reset gate to the previous state before the recurrent
//! product and mixes states as `h = z * h_prev + (1 - z) * candidate`.

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};

use super::spec::{Activation, LayerKind};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Borrowed weights of one direction of a recurrent layer.
pub(crate) struct CellWeights<'a> {
    pub kernel: &'a Array2<f64>,
    pub recurrent: &'a Array2<f64>,
    pub bias: &'a Array2<f64>,
}

/// Gradient accumulators matching [`CellWeights`].
pub(crate) struct CellGrads {
    pub kernel: Array2<f64>,
    pub recurrent: Array2<f64>,
    pub bias: Array2<f64>,
}

enum Step {
    Rnn {
        h_prev: Array2<f64>,
        h: Array2<f64>,
    },
    Gru {
        h_prev: Array2<f64>,
        z: Array2<f64>,
        r: Array2<f64>,
        candidate: Array2<f64>,
    },
    Lstm {
        h_prev: Array2<f64>,
        c_prev: Array2<f64>,
        i: Array2<f64>,
        f: Array2<f64>,
        g: Array2<f64>,
        o: Array2<f64>,
        c_act: Array2<f64>,
    },
}

/// Intermediates of one unrolled pass.
pub(crate) struct SequenceCache {
    inputs: Vec<Array2<f64>>,
    steps: Vec<Step>,
}

fn gate(a: &Array2<f64>, k: usize, units: usize) -> ArrayView2<'_, f64> {
    a.slice(s![.., k * units..(k + 1) * units])
}

/// Runs the cell over `inputs` (each `batch x in`) from a zero state and
/// returns the hidden state at every step.
pub(crate) fn run_sequence(
    kind: LayerKind,
    act: Activation,
    w: &CellWeights<'_>,
    inputs: &[Array2<f64>],
) -> (Vec<Array2<f64>>, SequenceCache) {
    let batch = inputs[0].nrows();
    let units = w.recurrent.nrows();
    let mut h = Array2::<f64>::zeros((batch, units));
    let mut c = Array2::<f64>::zeros((batch, units));
    let mut outputs = Vec::with_capacity(inputs.len());
    let mut steps = Vec::with_capacity(inputs.len());

    for x in inputs {
        let gx = x.dot(w.kernel) + w.bias;
        match kind {
            LayerKind::SimpleRnn => {
                let a = gx + h.dot(w.recurrent);
                let h_new = a.mapv(|v| act.apply(v));
                steps.push(Step::Rnn { h_prev: h, h: h_new.clone() });
                h = h_new;
            }
            LayerKind::Gru => {
                let hu = h.dot(&w.recurrent.slice(s![.., ..2 * units]));
                let z = (&gate(&gx, 0, units) + &gate(&hu, 0, units)).mapv(sigmoid);
                let r = (&gate(&gx, 1, units) + &gate(&hu, 1, units)).mapv(sigmoid);
                let rh = &r * &h;
                let a = &gate(&gx, 2, units) + &rh.dot(&w.recurrent.slice(s![.., 2 * units..]));
                let candidate = a.mapv(|v| act.apply(v));
                let h_new = &z * &h + &(1.0 - &z) * &candidate;
                steps.push(Step::Gru { h_prev: h, z, r, candidate });
                h = h_new;
            }
            LayerKind::Lstm => {
                let a = gx + h.dot(w.recurrent);
                let i = gate(&a, 0, units).mapv(sigmoid);
                let f = gate(&a, 1, units).mapv(sigmoid);
                let g = gate(&a, 2, units).mapv(|v| act.apply(v));
                let o = gate(&a, 3, units).mapv(sigmoid);
                let c_new = &f * &c + &i * &g;
                let c_act = c_new.mapv(|v| act.apply(v));
                let h_new = &o * &c_act;
                steps.push(Step::Lstm { h_prev: h, c_prev: c, i, f, g, o, c_act });
                h = h_new;
                c = c_new;
            }
            _ => unreachable!("not a recurrent kind"),
        }
        outputs.push(h.clone());
    }
    (outputs, SequenceCache { inputs: inputs.to_vec(), steps })
}

/// Backpropagates `grad_outputs` (gradient w.r.t. the hidden state at each
/// step) through the unrolled pass. Returns input gradients and adds weight
/// gradients into `grads`.
pub(crate) fn backprop_sequence(
    act: Activation,
    w: &CellWeights<'_>,
    cache: &SequenceCache,
    grad_outputs: &[Array2<f64>],
    grads: &mut CellGrads,
) -> Vec<Array2<f64>> {
    let units = w.recurrent.nrows();
    let batch = cache.inputs[0].nrows();
    let mut dh_next = Array2::<f64>::zeros((batch, units));
    let mut dc_next = Array2::<f64>::zeros((batch, units));
    let mut grad_inputs = vec![Array2::<f64>::zeros((0, 0)); cache.inputs.len()];
    let d_act = |y: &Array2<f64>| y.mapv(|v| act.derivative_at_output(v));

    for t in (0..cache.steps.len()).rev() {
        let dh = &grad_outputs[t] + &dh_next;
        // `da` is the gradient w.r.t. the fused pre-activations x*K + b (+ h*U)
        let (da, dh_prev) = match &cache.steps[t] {
            Step::Rnn { h_prev, h } => {
                let da = dh * d_act(h);
                grads.recurrent.scaled_add(1.0, &h_prev.t().dot(&da));
                let dh_prev = da.dot(&w.recurrent.t());
                (da, dh_prev)
            }
            Step::Gru { h_prev, z, r, candidate } => {
                let u_zr = w.recurrent.slice(s![.., ..2 * units]);
                let u_h = w.recurrent.slice(s![.., 2 * units..]);
                let dz = &dh * &(h_prev - candidate);
                let mut dh_prev = &dh * z;
                let da_h = &dh * &(1.0 - z) * d_act(candidate);
                let rh = r * h_prev;
                grads.recurrent.slice_mut(s![.., 2 * units..]).scaled_add(1.0, &rh.t().dot(&da_h));
                let drh = da_h.dot(&u_h.t());
                dh_prev += &(&drh * r);
                let da_z = dz * z.mapv(|v| v * (1.0 - v));
                let da_r = &drh * h_prev * r.mapv(|v| v * (1.0 - v));
                let da_zr = concatenate![Axis(1), da_z, da_r];
                grads.recurrent.slice_mut(s![.., ..2 * units]).scaled_add(1.0, &h_prev.t().dot(&da_zr));
                dh_prev += &da_zr.dot(&u_zr.t());
                (concatenate![Axis(1), da_zr, da_h], dh_prev)
            }
            Step::Lstm { h_prev, c_prev, i, f, g, o, c_act } => {
                let sig_d = |s: &Array2<f64>| s.mapv(|v| v * (1.0 - v));
                let d_o = &dh * c_act;
                let dc = &dc_next + &(&dh * o * d_act(c_act));
                let da = concatenate![
                    Axis(1),
                    &dc * g * sig_d(i),
                    &dc * c_prev * sig_d(f),
                    &dc * i * d_act(g),
                    d_o * sig_d(o)
                ];
                dc_next = &dc * f;
                grads.recurrent.scaled_add(1.0, &h_prev.t().dot(&da));
                let dh_prev = da.dot(&w.recurrent.t());
                (da, dh_prev)
            }
        };
        grads.kernel.scaled_add(1.0, &cache.inputs[t].t().dot(&da));
        grads.bias.scaled_add(1.0, &da.sum_axis(Axis(0)).insert_axis(Axis(0)));
        grad_inputs[t] = da.dot(&w.kernel.t());
        dh_next = dh_prev;
    }
    grad_inputs
}
