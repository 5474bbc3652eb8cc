//! Layer stack evaluation: forward pass with an activation cache, and the
//! matching backward pass.

use ndarray::{concatenate, s, Array2, Array3, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::cell::{backprop_sequence, run_sequence, CellGrads, CellWeights, SequenceCache};
use super::spec::{InputShape, LayerKind, LayerSpec, ModelSpec};
use crate::error::{contract, Result};
use crate::seed::derive_seed;

/// Weight matrices of every layer, in layer order. Biases are `1 x n`
/// matrices. Recurrent layers hold `[kernel, recurrent, bias]`, twice
/// (forward then backward direction) when bidirectional; dense layers hold
/// `[kernel, bias]`; repeat and flatten layers hold nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub layers: Vec<Vec<Array2<f64>>>,
}

/// Gradients share the parameter layout.
pub type Gradients = Parameters;

impl Parameters {
    pub fn zeros_like(&self) -> Parameters {
        Parameters {
            layers: self
                .layers
                .iter()
                .map(|l| l.iter().map(|a| Array2::zeros(a.raw_dim())).collect())
                .collect(),
        }
    }

    pub fn arrays(&self) -> impl Iterator<Item = &Array2<f64>> {
        self.layers.iter().flatten()
    }

    pub fn arrays_mut(&mut self) -> impl Iterator<Item = &mut Array2<f64>> {
        self.layers.iter_mut().flatten()
    }

    /// Total scalar count.
    pub fn len(&self) -> usize {
        self.arrays().map(|a| a.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shapes(&self) -> Vec<Vec<(usize, usize)>> {
        self.layers.iter().map(|l| l.iter().map(|a| a.dim()).collect()).collect()
    }

    /// Scalar at flat position `k` (arrays in order, row-major within each).
    pub fn get(&self, k: usize) -> f64 {
        let (a, i) = self.locate(k);
        self.arrays().nth(a).expect("in range").as_slice().expect("standard layout")[i]
    }

    pub fn set(&mut self, k: usize, value: f64) {
        let (a, i) = self.locate(k);
        self.arrays_mut().nth(a).expect("in range").as_slice_mut().expect("standard layout")[i] = value;
    }

    fn locate(&self, mut k: usize) -> (usize, usize) {
        for (a, arr) in self.arrays().enumerate() {
            if k < arr.len() {
                return (a, k);
            }
            k -= arr.len();
        }
        panic!("parameter index out of range");
    }

    pub fn all_finite(&self) -> bool {
        self.arrays().all(|a| a.iter().all(|v| v.is_finite()))
    }
}

/// Glorot-normal kernels (std `sqrt(2 / (fan_in + fan_out))`), zero biases.
/// Layer `i` draws from its own generator seeded with
/// `derive_seed(seed, "layer<i>")`.
pub fn init_parameters(spec: &ModelSpec, input: InputShape, seed: u64) -> Result<Parameters> {
    let shapes = spec.infer_shapes(input)?;
    let mut layers = Vec::with_capacity(spec.layers.len());
    for (i, l) in spec.layers.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("layer{i}")));
        let in_width = shapes[i].width();
        let mut glorot = |rows: usize, cols: usize| {
            let std = (2.0 / (rows + cols) as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            Array2::from_shape_simple_fn((rows, cols), || normal.sample(&mut rng))
        };
        let arrays = match l.kind {
            LayerKind::Dense => vec![glorot(in_width, l.units), Array2::zeros((1, l.units))],
            k if k.is_recurrent() => {
                let g = k.gate_count() * l.units;
                let directions = if l.bidirectional { 2 } else { 1 };
                let mut v = Vec::with_capacity(3 * directions);
                for _ in 0..directions {
                    v.push(glorot(in_width, g));
                    v.push(glorot(l.units, g));
                    v.push(Array2::zeros((1, g)));
                }
                v
            }
            _ => Vec::new(),
        };
        layers.push(arrays);
    }
    Ok(Parameters { layers })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Inference,
}

/// Activations between layers: a sequence of `batch x width` steps, or a
/// single `batch x width` matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Signal {
    Sequence(Vec<Array2<f64>>),
    Vector(Array2<f64>),
}

impl Signal {
    fn map_steps(&self, mut f: impl FnMut(&Array2<f64>) -> Array2<f64>) -> Signal {
        match self {
            Signal::Sequence(s) => Signal::Sequence(s.iter().map(&mut f).collect()),
            Signal::Vector(v) => Signal::Vector(f(v)),
        }
    }

    fn zip_steps(&self, other: &Signal, f: impl Fn(&Array2<f64>, &Array2<f64>) -> Array2<f64>) -> Signal {
        match (self, other) {
            (Signal::Sequence(a), Signal::Sequence(b)) => {
                Signal::Sequence(a.iter().zip(b).map(|(x, y)| f(x, y)).collect())
            }
            (Signal::Vector(a), Signal::Vector(b)) => Signal::Vector(f(a, b)),
            _ => panic!("signal kinds differ"),
        }
    }

    fn into_steps(self) -> Vec<Array2<f64>> {
        match self {
            Signal::Sequence(s) => s,
            Signal::Vector(v) => vec![v],
        }
    }
}

enum LayerCache {
    Dense { input: Signal, output: Signal },
    Recurrent { len: usize, directions: Vec<SequenceCache> },
    Repeat,
    Flatten { len: usize, width: usize },
    Identity,
}

/// Intermediates of one forward pass, consumed by [`Network::backward`].
pub struct ForwardCache {
    layers: Vec<LayerCache>,
    masks: Vec<Option<Signal>>,
    output_is_sequence: bool,
    batch: usize,
    version: u64,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.batch
    }
}

/// A model specification bound to concrete parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: ModelSpec,
    input: InputShape,
    params: Parameters,
    version: u64,
}

impl Network {
    pub fn new(spec: ModelSpec, input: InputShape, params: Parameters) -> Result<Network> {
        let expected = init_parameters(&spec, input, 0)?.shapes();
        if expected != params.shapes() {
            return Err(contract("parameter shapes do not match the model spec"));
        }
        Ok(Network { spec, input, params, version: 0 })
    }

    pub fn init(spec: ModelSpec, input: InputShape, seed: u64) -> Result<Network> {
        let params = init_parameters(&spec, input, seed)?;
        Ok(Network { spec, input, params, version: 0 })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn input_shape(&self) -> InputShape {
        self.input
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    /// Mutable access; invalidates outstanding forward caches.
    pub fn params_mut(&mut self) -> &mut Parameters {
        self.version += 1;
        &mut self.params
    }

    pub fn into_params(self) -> Parameters {
        self.params
    }

    /// Runs the stack on `batch x window x width` samples. In `Train` mode
    /// every layer with a dropout rate masks its output with inverted
    /// dropout drawn from `rng`; `Inference` never touches `rng`.
    pub fn forward<R: Rng>(&self, batch: &Array3<f64>, mode: Mode, rng: &mut R) -> Result<(Vec<f64>, ForwardCache)> {
        let (b, len, width) = batch.dim();
        if len != self.input.window || width != self.input.width {
            return Err(contract(format!(
                "input is {len}x{width} per sample, network expects {}x{}",
                self.input.window, self.input.width
            )));
        }
        if b == 0 {
            return Err(contract("empty batch"));
        }
        let mut signal = Signal::Sequence((0..len).map(|t| batch.index_axis(Axis(1), t).to_owned()).collect());
        let mut layers = Vec::with_capacity(self.spec.layers.len());
        let mut masks = Vec::with_capacity(self.spec.layers.len());

        for (i, (l, p)) in self.spec.layers.iter().zip(&self.params.layers).enumerate() {
            let (out, cache) = forward_layer(l, p, signal, len).map_err(|e| contract(format!("layer {i}: {e}")))?;
            signal = out;
            let mask = if mode == Mode::Train && l.dropout_rate > 0.0 {
                let keep = 1.0 - l.dropout_rate;
                let mask = signal.map_steps(|a| {
                    Array2::from_shape_simple_fn(a.raw_dim(), || if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                });
                signal = signal.zip_steps(&mask, |a, m| a * m);
                Some(mask)
            } else {
                None
            };
            layers.push(cache);
            masks.push(mask);
        }

        let (output_is_sequence, out) = match signal {
            Signal::Sequence(mut s) => (true, s.pop().expect("non-empty sequence")),
            Signal::Vector(v) => (false, v),
        };
        let preds = out.column(0).to_vec();
        Ok((preds, ForwardCache { layers, masks, output_is_sequence, batch: b, version: self.version }))
    }

    /// Predictions only, in inference mode.
    pub fn predict_batch(&self, batch: &Array3<f64>) -> Result<Vec<f64>> {
        // inference draws nothing from the generator
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Ok(self.forward(batch, Mode::Inference, &mut rng)?.0)
    }

    /// Gradients of the loss given `d loss / d prediction` for each sample.
    pub fn backward(&self, cache: &ForwardCache, grad_predictions: &[f64]) -> Result<Gradients> {
        if cache.version != self.version || cache.layers.len() != self.spec.layers.len() {
            return Err(contract("forward cache is stale or belongs to another network"));
        }
        if grad_predictions.len() != cache.batch {
            return Err(contract(format!(
                "{} loss gradients for a batch of {}",
                grad_predictions.len(),
                cache.batch
            )));
        }
        let mut grads = self.params.zeros_like();
        let dout = Array2::from_shape_vec((cache.batch, 1), grad_predictions.to_vec()).expect("shape");
        let mut grad = if cache.output_is_sequence {
            let Some(LayerCache::Dense { output: Signal::Sequence(s), .. }) = cache.layers.last() else {
                return Err(contract("sequence output must come from a dense layer"));
            };
            let mut steps: Vec<Array2<f64>> = s.iter().map(|a| Array2::zeros(a.raw_dim())).collect();
            *steps.last_mut().expect("non-empty") = dout;
            Signal::Sequence(steps)
        } else {
            Signal::Vector(dout)
        };

        for i in (0..self.spec.layers.len()).rev() {
            if let Some(mask) = &cache.masks[i] {
                grad = grad.zip_steps(mask, |g, m| g * m);
            }
            grad = backward_layer(&self.spec.layers[i], &self.params.layers[i], &cache.layers[i], grad, &mut grads.layers[i]);
        }
        Ok(grads)
    }
}

fn dense_forward(l: &LayerSpec, p: &[Array2<f64>], x: &Array2<f64>) -> Array2<f64> {
    (x.dot(&p[0]) + &p[1]).mapv(|v| l.activation.apply(v))
}

fn forward_layer(l: &LayerSpec, p: &[Array2<f64>], input: Signal, window: usize) -> Result<(Signal, LayerCache)> {
    Ok(match l.kind {
        LayerKind::Dense => {
            let output = input.map_steps(|x| dense_forward(l, p, x));
            (output.clone(), LayerCache::Dense { input, output })
        }
        kind if kind.is_recurrent() => {
            let Signal::Sequence(xs) = input else {
                return Err(contract("recurrent layer needs a sequence input"));
            };
            let len = xs.len();
            let weights = |d: usize| CellWeights { kernel: &p[3 * d], recurrent: &p[3 * d + 1], bias: &p[3 * d + 2] };
            let (fwd, fwd_cache) = run_sequence(kind, l.activation, &weights(0), &xs);
            let mut directions = vec![fwd_cache];
            let out = if l.bidirectional {
                let reversed: Vec<Array2<f64>> = xs.iter().rev().cloned().collect();
                let (bwd, bwd_cache) = run_sequence(kind, l.activation, &weights(1), &reversed);
                directions.push(bwd_cache);
                if l.return_sequences {
                    // step t pairs the forward state at t with the backward state that has seen x[t..]
                    Signal::Sequence((0..len).map(|t| concatenate![Axis(1), fwd[t], bwd[len - 1 - t]]).collect())
                } else {
                    Signal::Vector(concatenate![Axis(1), fwd[len - 1], bwd[len - 1]])
                }
            } else if l.return_sequences {
                Signal::Sequence(fwd)
            } else {
                Signal::Vector(fwd.into_iter().next_back().expect("non-empty"))
            };
            (out, LayerCache::Recurrent { len, directions })
        }
        LayerKind::RepeatVector => {
            let Signal::Vector(v) = input else {
                return Err(contract("RepeatVector needs a vector input"));
            };
            let len = if l.units == 0 { window } else { l.units };
            (Signal::Sequence(vec![v; len]), LayerCache::Repeat)
        }
        LayerKind::Flatten => match input {
            Signal::Sequence(s) => {
                let (len, width) = (s.len(), s[0].ncols());
                let views: Vec<_> = s.iter().map(|a| a.view()).collect();
                let flat = concatenate(Axis(1), &views).expect("same batch");
                (Signal::Vector(flat), LayerCache::Flatten { len, width })
            }
            v @ Signal::Vector(_) => (v, LayerCache::Identity),
        },
        _ => unreachable!("all kinds covered"),
    })
}

fn backward_layer(
    l: &LayerSpec,
    p: &[Array2<f64>],
    cache: &LayerCache,
    grad: Signal,
    g: &mut [Array2<f64>],
) -> Signal {
    match cache {
        LayerCache::Dense { input, output } => {
            let d_act = |y: &Array2<f64>| y.mapv(|v| l.activation.derivative_at_output(v));
            let pre_grads: Vec<Array2<f64>> = match (&grad, output) {
                (Signal::Sequence(gs), Signal::Sequence(ys)) => gs.iter().zip(ys).map(|(gr, y)| gr * &d_act(y)).collect(),
                (Signal::Vector(gr), Signal::Vector(y)) => vec![gr * &d_act(y)],
                _ => unreachable!("shapes fixed by forward"),
            };
            let inputs: Vec<&Array2<f64>> = match input {
                Signal::Sequence(s) => s.iter().collect(),
                Signal::Vector(v) => vec![v],
            };
            let mut dx = Vec::with_capacity(inputs.len());
            for (x, da) in inputs.iter().zip(&pre_grads) {
                g[0].scaled_add(1.0, &x.t().dot(da));
                g[1].scaled_add(1.0, &da.sum_axis(Axis(0)).insert_axis(Axis(0)));
                dx.push(da.dot(&p[0].t()));
            }
            match input {
                Signal::Sequence(_) => Signal::Sequence(dx),
                Signal::Vector(_) => Signal::Vector(dx.pop().expect("one step")),
            }
        }
        LayerCache::Recurrent { len, directions } => {
            let len = *len;
            let u = l.units;
            let width = if l.bidirectional { 2 * u } else { u };
            // expand the output gradient to one matrix per step
            let steps: Vec<Array2<f64>> = match grad {
                Signal::Sequence(s) => s,
                Signal::Vector(v) => {
                    let mut s = vec![Array2::zeros((v.nrows(), width)); len];
                    if l.bidirectional {
                        s[len - 1].slice_mut(s![.., ..u]).assign(&v.slice(s![.., ..u]));
                        s[0].slice_mut(s![.., u..]).assign(&v.slice(s![.., u..]));
                    } else {
                        s[len - 1] = v;
                    }
                    s
                }
            };
            let weights = |d: usize| CellWeights { kernel: &p[3 * d], recurrent: &p[3 * d + 1], bias: &p[3 * d + 2] };
            let mut take_grads = |d: usize, dhs: &[Array2<f64>], cache: &SequenceCache| {
                let mut cg = CellGrads {
                    kernel: Array2::zeros(p[3 * d].raw_dim()),
                    recurrent: Array2::zeros(p[3 * d + 1].raw_dim()),
                    bias: Array2::zeros(p[3 * d + 2].raw_dim()),
                };
                let dx = backprop_sequence(l.activation, &weights(d), cache, dhs, &mut cg);
                g[3 * d] += &cg.kernel;
                g[3 * d + 1] += &cg.recurrent;
                g[3 * d + 2] += &cg.bias;
                dx
            };
            if l.bidirectional {
                let fwd: Vec<Array2<f64>> = steps.iter().map(|s| s.slice(s![.., ..u]).to_owned()).collect();
                // backward-direction step k saw x[len - 1 - k]
                let bwd: Vec<Array2<f64>> =
                    (0..len).map(|k| steps[len - 1 - k].slice(s![.., u..]).to_owned()).collect();
                let dx_f = take_grads(0, &fwd, &directions[0]);
                let dx_b = take_grads(1, &bwd, &directions[1]);
                Signal::Sequence((0..len).map(|t| &dx_f[t] + &dx_b[len - 1 - t]).collect())
            } else {
                Signal::Sequence(take_grads(0, &steps, &directions[0]))
            }
        }
        LayerCache::Repeat => {
            let steps = grad.into_steps();
            let mut sum = steps[0].clone();
            for s in &steps[1..] {
                sum += s;
            }
            Signal::Vector(sum)
        }
        LayerCache::Flatten { len, width } => {
            let Signal::Vector(v) = grad else { unreachable!("flatten emits a vector") };
            Signal::Sequence(
                (0..*len)
                    .map(|t| v.slice(s![.., t * width..(t + 1) * width]).to_owned())
                    .collect(),
            )
        }
        LayerCache::Identity => grad,
    }
}

/// Mean squared error and its gradient w.r.t. each prediction.
pub fn mse_with_grad(predictions: &[f64], targets: &[f64]) -> (f64, Vec<f64>) {
    let n = predictions.len() as f64;
    let mut loss = 0.0;
    let grad = predictions
        .iter()
        .zip(targets)
        .map(|(p, y)| {
            let e = p - y;
            loss += e * e;
            2.0 * e / n
        })
        .collect();
    (loss / n, grad)
}

pub fn mse(predictions: &[f64], targets: &[f64]) -> f64 {
    mse_with_grad(predictions, targets).0
}
