//! From-scratch recurrent regressors: dense, simple-recurrent, GRU and LSTM
//! layers (optionally bidirectional), repeat-vector and flatten layers and
//! inverted dropout, trained with Adam on mean squared error.

pub mod adam;
mod cell;
pub mod checkpoint;
pub mod network;
pub mod spec;
pub mod train;

pub use adam::{adam_step, AdamState};
pub use checkpoint::Checkpoint;
pub use network::{init_parameters, mse, mse_with_grad, ForwardCache, Gradients, Mode, Network, Parameters};
pub use spec::{
    build_preset, preset_spec, Activation, InputShape, LayerKind, LayerSpec, ModelSpec, Preset, SignalShape,
};
pub use train::{evaluate_mse, predict, train, train_network, validation_tail, EarlyStopping, TrainConfig, TrainHistory};
