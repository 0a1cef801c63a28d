//! Turns programmer eye-tracking fixations over source code into learnable
//! attention labels (k-gram pattern ids and reading order), and trains a small
//! two-head sequence labeler with a reward-interleaved loss on them.
//!
//! Pipeline: [`code`] tokenizes and labels snippets, [`gaze`] maps fixations
//! to tokens, [`augment`] builds the augmented token set, [`reward`] scores
//! label alignment, [`model`] and [`train`] fit the labeler, and [`eval`]
//! runs the window and progress sweeps.

pub mod augment;
pub mod code;
pub mod error;
pub mod eval;
pub mod gaze;
pub mod model;
pub mod reward;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
