//! A framework-free convolutional network toolkit for four-class chest CT
//! classification.
//!
//! The crate covers the whole path from image folders to a trained
//! checkpoint: dense tensors ([`tensor`]), layer math with hand-written
//! backward passes ([`layers`]), the architecture presets, checkpoints and
//! gradient checking ([`model`]), SGD and Adam ([`optim`]), data ingestion
//! ([`data`]), the training loop ([`train`]) and a command-line front end
//! ([`cli`]).
//!
//! ```no_run
//! use lungnet::model::{build_model, Preset};
//!
//! let model = build_model::<f32>(Preset::Paper, 42).unwrap();
//! assert_eq!(model.summary().total_params, 13_873_572);
//! ```

pub mod cli;
pub mod data;
pub mod error;
pub mod layers;
pub mod model;
pub mod optim;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{Scalar, Tensor};
