//! Assembles a custom layer stack (bidirectional LSTM into a dense head),
//! prints its signal shapes and checks one analytic gradient entry against
//! a central finite difference.
//!
//! ```text
//! cargo run --example custom_network
//! ```

use ndarray::Array3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sentiment_forecast::nn::{mse, mse_with_grad, Activation, InputShape, LayerKind, LayerSpec, Mode, ModelSpec, Network};

fn main() -> sentiment_forecast::Result<()> {
    let spec = ModelSpec::new(vec![
        LayerSpec::recurrent(LayerKind::Lstm, 6, true).bidirectional(),
        LayerSpec::recurrent(LayerKind::Gru, 4, false),
        LayerSpec::dense(3, Activation::Tanh),
        LayerSpec::dense(1, Activation::Linear),
    ])?;
    let input = InputShape { window: 5, width: 3 };
    for (i, shape) in spec.infer_shapes(input)?.iter().enumerate() {
        println!("signal {i}: {shape:?}");
    }

    let mut net = Network::init(spec, input, 7)?;
    println!("{} parameters", net.params().len());

    let batch = Array3::from_shape_fn((4, 5, 3), |(b, t, f)| ((b * 15 + t * 3 + f) as f64 * 0.37).sin());
    let targets = [0.1, -0.2, 0.3, 0.0];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (pred, cache) = net.forward(&batch, Mode::Train, &mut rng)?;
    let (loss, grad_pred) = mse_with_grad(&pred, &targets);
    let grads = net.backward(&cache, &grad_pred)?;

    let k = 11;
    let h = 1e-5;
    let original = net.params().get(k);
    let mut loss_at = |v: f64| -> sentiment_forecast::Result<f64> {
        net.params_mut().set(k, v);
        Ok(mse(&net.predict_batch(&batch)?, &targets))
    };
    let numeric = (loss_at(original + h)? - loss_at(original - h)?) / (2.0 * h);
    loss_at(original)?;
    println!("loss {loss:.6}; dL/dθ[{k}] analytic {:.8e}, numeric {numeric:.8e}", grads.get(k));
    Ok(())
}
