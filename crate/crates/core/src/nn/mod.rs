//! Small convolutional classifiers built on the tape: a per-frame network and
//! a temporal network that shares its encoder shape.

pub mod checkpoint;
mod encoder;
pub mod frame_net;
pub mod temporal_net;

pub use encoder::{ConvSpec, EncoderSpec};
pub use frame_net::FrameNet;
pub use temporal_net::{temporal_shift, Aggregation, TemporalNet, TemporalNetSpec};

use rand::Rng as _;

use crate::error::Result;
use crate::rng::Rng;
use crate::tensor::{Tape, Tensor, Var};

/// A named trainable tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
}

impl Param {
    fn zeros(name: impl Into<String>, shape: &[usize]) -> Result<Self> {
        Ok(Param {
            name: name.into(),
            value: Tensor::zeros(shape)?,
        })
    }

    /// Uniform in `[-sqrt(6/fan_in), sqrt(6/fan_in)]`.
    fn he_uniform(name: impl Into<String>, shape: &[usize], fan_in: usize, rng: &mut Rng) -> Result<Self> {
        let bound = (6.0 / fan_in as f64).sqrt();
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
        Ok(Param {
            name: name.into(),
            value: Tensor::new(shape, data)?,
        })
    }
}

/// Anything that maps a batch to `[N, K]` logits through the tape.
pub trait Classifier {
    fn classes(&self) -> usize;

    fn params(&self) -> &[Param];

    fn params_mut(&mut self) -> &mut [Param];

    /// Records the network on `tape`. `batch` is whatever the network's
    /// natural input is (frames for [`FrameNet`], clips for [`TemporalNet`]).
    /// Returns the logits and the parameter vars in [`Classifier::params`] order.
    fn record(&self, tape: &mut Tape, batch: Tensor, track_grads: bool) -> Result<(Var, Vec<Var>)>;

    fn predict(&self, batch: Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let (logits, _) = self.record(&mut tape, batch, false)?;
        Ok(tape.value(logits).clone())
    }
}

fn register(tape: &mut Tape, params: &[Param], track: bool) -> Vec<Var> {
    params
        .iter()
        .map(|p| {
            if track {
                tape.param(p.value.clone())
            } else {
                tape.leaf(p.value.clone())
            }
        })
        .collect()
}

fn dense(tape: &mut Tape, x: Var, weight: Var, bias: Var) -> Result<Var> {
    let y = tape.matmul(x, weight)?;
    tape.bias_add(y, bias)
}

/// Pixels arrive in [0, 1]; the networks see them centered on zero.
pub(crate) fn center(pixels: Tensor) -> Tensor {
    pixels.map(|v| v - 0.5)
}
