use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{dropout_seed, Layer, Sequential};
use crate::error::{Error, Result};
use crate::layers::{Activation, Conv2D, Dense, Dropout, Flatten, MaxPool2D};
use crate::tensor::Scalar;

pub const NUM_CLASSES: usize = 4;
pub const DEFAULT_DROPOUT: f64 = 0.5;

/// Named architecture presets sharing one topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Full-size 350×350×3 classifier, 13,873,572 parameters.
    Paper,
    /// Same topology at 64×64×3 with narrow channels, for tests.
    Tiny,
}

struct Widths {
    input: usize,
    convs: [usize; 4],
    dense: usize,
}

impl Preset {
    fn widths(self) -> Widths {
        match self {
            Preset::Paper => Widths {
                input: 350,
                convs: [32, 32, 64, 128],
                dense: 64,
            },
            Preset::Tiny => Widths {
                input: 64,
                convs: [8, 8, 16, 32],
                dense: 16,
            },
        }
    }

    pub fn input_shape(self) -> [usize; 3] {
        let w = self.widths();
        [w.input, w.input, 3]
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Paper => "paper",
            Preset::Tiny => "tiny",
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
        match s {
            "paper" => Ok(Preset::Paper),
            "tiny" => Ok(Preset::Tiny),
            other => Err(Error::config(format!(
                "unknown architecture preset {other:?} (expected paper or tiny)"
            ))),
        }
    }
}

/// Builds a preset with Glorot-uniform weights and zero biases drawn from `seed`.
///
/// conv → conv → pool → conv → pool → conv → pool → dropout → flatten →
/// dense(relu) → dropout → dense(4). Every conv uses ReLU.
pub fn build_model<T: Scalar>(preset: Preset, seed: u64) -> Result<Sequential<T>> {
    let w = preset.widths();
    let [c1, c2, c3, c4] = w.convs;
    // conv, conv, pool, conv, pool, conv, pool
    let spatial = (((w.input - 4) / 2 - 2) / 2 - 2) / 2;

    let conv = |cin, cout| Conv2D::new(cin, cout, Activation::Relu).map(Layer::Conv2D);
    let mut layers: Vec<Layer<T>> = vec![
        conv(3, c1)?,
        conv(c1, c2)?,
        Layer::MaxPool2D(MaxPool2D::new()),
        conv(c2, c3)?,
        Layer::MaxPool2D(MaxPool2D::new()),
        conv(c3, c4)?,
        Layer::MaxPool2D(MaxPool2D::new()),
        Layer::Dropout(Dropout::new(DEFAULT_DROPOUT, 0)?),
        Layer::Flatten(Flatten::new()),
        Layer::Dense(Dense::new(spatial * spatial * c4, w.dense, Activation::Relu)?),
        Layer::Dropout(Dropout::new(DEFAULT_DROPOUT, 0)?),
        Layer::Dense(Dense::new(w.dense, NUM_CLASSES, Activation::Softmax)?),
    ];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (i, layer) in layers.iter_mut().enumerate() {
        match layer {
            Layer::Conv2D(l) => l.init_glorot(&mut rng),
            Layer::Dense(l) => l.init_glorot(&mut rng),
            Layer::Dropout(d) => d.reseed(dropout_seed(seed, i)),
            _ => {}
        }
    }
    Sequential::new(&preset.input_shape(), layers)
}
