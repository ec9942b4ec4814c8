//! Desk-scale laboratory for static bias in video action recognition.
//!
//! The crate generates small procedural video worlds whose labels depend only
//! on motion while backgrounds and sprite appearance can be correlated with
//! the label, builds background-swapped (SCUB) and single-frame (SCUF) test
//! sets from them, and trains small networks with StillMix or one of several
//! baseline augmentations to measure how much each one relies on static cues.

pub mod augment;
pub mod bench;
pub mod error;
pub mod harness;
pub mod io;
pub mod nn;
pub mod pools;
pub mod rng;
pub mod tensor;
pub mod train;
pub mod video;
pub mod world;

pub use error::{Error, Result};
pub use tensor::Tensor;
pub use video::{MaskSequence, Video};
