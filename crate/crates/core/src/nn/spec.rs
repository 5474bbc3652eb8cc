//! Declarative network architectures and the preset model zoo.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{validation, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Dense,
    SimpleRnn,
    Gru,
    Lstm,
    RepeatVector,
    Flatten,
}

impl LayerKind {
    pub fn is_recurrent(self) -> bool {
        matches!(self, LayerKind::SimpleRnn | LayerKind::Gru | LayerKind::Lstm)
    }

    /// Number of stacked gate blocks in the fused kernels.
    pub(crate) fn gate_count(self) -> usize {
        match self {
            LayerKind::Gru => 3,
            LayerKind::Lstm => 4,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Linear,
}

impl Activation {
    pub(crate) fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Linear => x,
        }
    }

    /// Derivative expressed through the activation's output.
    pub(crate) fn derivative_at_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Linear => 1.0,
        }
    }
}

/// One layer of a [`ModelSpec`].
///
/// For `RepeatVector`, `units` is the repeat count; `0` repeats as many
/// times as the input window is long. `Flatten` ignores `units`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub kind: LayerKind,
    #[serde(default)]
    pub units: usize,
    #[serde(default)]
    pub bidirectional: bool,
    #[serde(default)]
    pub dropout_rate: f64,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default)]
    pub return_sequences: bool,
}

fn default_activation() -> Activation {
    Activation::Tanh
}

impl LayerSpec {
    pub fn dense(units: usize, activation: Activation) -> Self {
        LayerSpec { kind: LayerKind::Dense, units, bidirectional: false, dropout_rate: 0.0, activation, return_sequences: false }
    }

    pub fn recurrent(kind: LayerKind, units: usize, return_sequences: bool) -> Self {
        LayerSpec { kind, units, bidirectional: false, dropout_rate: 0.0, activation: Activation::Tanh, return_sequences }
    }

    pub fn repeat_vector(count: usize) -> Self {
        LayerSpec { kind: LayerKind::RepeatVector, units: count, ..Self::flatten() }
    }

    pub fn flatten() -> Self {
        LayerSpec {
            kind: LayerKind::Flatten,
            units: 0,
            bidirectional: false,
            dropout_rate: 0.0,
            activation: Activation::Linear,
            return_sequences: false,
        }
    }

    pub fn bidirectional(mut self) -> Self {
        self.bidirectional = true;
        self
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout_rate = rate;
        self
    }

    /// Output width for an input of `width` features.
    pub(crate) fn output_width(&self) -> usize {
        if self.kind.is_recurrent() && self.bidirectional {
            2 * self.units
        } else {
            self.units
        }
    }
}

/// Shape of the signal flowing between layers (batch dimension implied).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalShape {
    Sequence { len: usize, width: usize },
    Vector { width: usize },
}

impl SignalShape {
    pub fn width(self) -> usize {
        match self {
            SignalShape::Sequence { width, .. } | SignalShape::Vector { width } => width,
        }
    }
}

/// Input geometry of a network: lookback window and feature count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShape {
    pub window: usize,
    pub width: usize,
}

/// Ordered layer stack ending in a single linear output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub layers: Vec<LayerSpec>,
}

impl ModelSpec {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        let spec = ModelSpec { layers };
        spec.validate()?;
        Ok(spec)
    }

    /// Structural checks that do not depend on the input geometry.
    pub fn validate(&self) -> Result<()> {
        let last = self.layers.last().ok_or_else(|| validation("model has no layers"))?;
        if last.kind != LayerKind::Dense || last.units != 1 || last.activation != Activation::Linear {
            return Err(validation("final layer must be Dense(1) with linear activation"));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if !(0.0..1.0).contains(&l.dropout_rate) {
                return Err(validation(format!("layer {i}: dropout rate {} outside [0, 1)", l.dropout_rate)));
            }
            if (l.kind.is_recurrent() || l.kind == LayerKind::Dense) && l.units == 0 {
                return Err(validation(format!("layer {i}: units must be positive")));
            }
            if !l.kind.is_recurrent() && (l.bidirectional || l.return_sequences) {
                return Err(validation(format!(
                    "layer {i}: bidirectional/return_sequences only apply to recurrent layers"
                )));
            }
        }
        Ok(())
    }

    /// Input shape of every layer followed by the network output shape.
    pub fn infer_shapes(&self, input: InputShape) -> Result<Vec<SignalShape>> {
        self.validate()?;
        if input.window == 0 || input.width == 0 {
            return Err(validation("input window and width must be positive"));
        }
        let mut shape = SignalShape::Sequence { len: input.window, width: input.width };
        let mut shapes = vec![shape];
        for (i, l) in self.layers.iter().enumerate() {
            shape = match (l.kind, shape) {
                (LayerKind::Dense, SignalShape::Sequence { len, .. }) => SignalShape::Sequence { len, width: l.units },
                (LayerKind::Dense, SignalShape::Vector { .. }) => SignalShape::Vector { width: l.units },
                (k, SignalShape::Sequence { len, .. }) if k.is_recurrent() => {
                    if l.return_sequences {
                        SignalShape::Sequence { len, width: l.output_width() }
                    } else {
                        SignalShape::Vector { width: l.output_width() }
                    }
                }
                (k, SignalShape::Vector { .. }) if k.is_recurrent() => {
                    return Err(validation(format!("layer {i}: recurrent layer needs a sequence input")));
                }
                (LayerKind::RepeatVector, SignalShape::Vector { width }) => {
                    let len = if l.units == 0 { input.window } else { l.units };
                    SignalShape::Sequence { len, width }
                }
                (LayerKind::RepeatVector, SignalShape::Sequence { .. }) => {
                    return Err(validation(format!(
                        "layer {i}: RepeatVector must follow a layer emitting a single vector"
                    )));
                }
                (LayerKind::Flatten, SignalShape::Sequence { len, width }) => SignalShape::Vector { width: len * width },
                (LayerKind::Flatten, v @ SignalShape::Vector { .. }) => v,
                _ => unreachable!("all kinds covered"),
            };
            shapes.push(shape);
        }
        Ok(shapes)
    }

    /// Replaces the units of the recurrent layers, in order.
    pub fn with_recurrent_units(&self, units: &[usize]) -> Result<ModelSpec> {
        let count = self.layers.iter().filter(|l| l.kind.is_recurrent()).count();
        if units.len() != count {
            return Err(validation(format!("{count} recurrent layers but {} unit counts given", units.len())));
        }
        let mut spec = self.clone();
        let mut it = units.iter();
        for l in spec.layers.iter_mut().filter(|l| l.kind.is_recurrent()) {
            l.units = *it.next().expect("length checked");
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("spec serialises");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Architectures of the model zoo.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "rnn")]
    Rnn,
    #[serde(rename = "bi-rnn")]
    BiRnn,
    #[serde(rename = "gru")]
    Gru,
    #[serde(rename = "bi-gru")]
    BiGru,
    #[serde(rename = "lstm")]
    Lstm,
    #[serde(rename = "bi-lstm")]
    BiLstm,
    #[serde(rename = "ae")]
    Ae,
}

impl Preset {
    pub const ALL: [Preset; 7] =
        [Preset::Rnn, Preset::BiRnn, Preset::Gru, Preset::BiGru, Preset::Lstm, Preset::BiLstm, Preset::Ae];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Rnn => "rnn",
            Preset::BiRnn => "bi-rnn",
            Preset::Gru => "gru",
            Preset::BiGru => "bi-gru",
            Preset::Lstm => "lstm",
            Preset::BiLstm => "bi-lstm",
            Preset::Ae => "ae",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s.to_ascii_lowercase())
            .ok_or_else(|| validation(format!("unknown model preset {s:?}")))
    }
}

/// Recurrent stacks: 250/200/150 units, dropout 0.4 after each, the first
/// two returning sequences, then a single linear output unit.
fn stacked(kind: LayerKind, bidirectional: bool) -> ModelSpec {
    let mut layers: Vec<LayerSpec> = [(250, true), (200, true), (150, false)]
        .into_iter()
        .map(|(units, seq)| {
            let l = LayerSpec::recurrent(kind, units, seq).with_dropout(0.4);
            if bidirectional {
                l.bidirectional()
            } else {
                l
            }
        })
        .collect();
    layers.push(LayerSpec::dense(1, Activation::Linear));
    ModelSpec { layers }
}

/// Looks up a preset by name (`rnn`, `bi-rnn`, `gru`, `bi-gru`, `lstm`,
/// `bi-lstm`, `ae`).
pub fn build_preset(name: &str) -> Result<ModelSpec> {
    Ok(preset_spec(name.parse()?))
}

pub fn preset_spec(preset: Preset) -> ModelSpec {
    match preset {
        Preset::Rnn => stacked(LayerKind::SimpleRnn, false),
        Preset::BiRnn => stacked(LayerKind::SimpleRnn, true),
        Preset::Gru => stacked(LayerKind::Gru, false),
        Preset::BiGru => stacked(LayerKind::Gru, true),
        Preset::Lstm => stacked(LayerKind::Lstm, false),
        Preset::BiLstm => stacked(LayerKind::Lstm, true),
        Preset::Ae => ModelSpec {
            layers: vec![
                LayerSpec::recurrent(LayerKind::Lstm, 250, true).bidirectional().with_dropout(0.4),
                LayerSpec::recurrent(LayerKind::Lstm, 200, false),
                LayerSpec::repeat_vector(0),
                LayerSpec::recurrent(LayerKind::Lstm, 200, true).with_dropout(0.4),
                LayerSpec::recurrent(LayerKind::Lstm, 250, true).with_dropout(0.3),
                LayerSpec::flatten().with_dropout(0.4),
                LayerSpec::dense(1, Activation::Linear),
            ],
        },
    }
}
