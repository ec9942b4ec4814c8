use super::{dense, register, Classifier, ConvSpec, EncoderSpec, Param};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{softmax_rows, Tape, Tensor, Var};

/// 2D classifier over single `[C, H, W]` frames. Used as the reference
/// network for frame banks and as the static probe for domain gaps.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameNet {
    encoder: EncoderSpec,
    input: (usize, usize, usize),
    classes: usize,
    params: Vec<Param>,
}

impl FrameNet {
    /// Two conv/relu/pool blocks (8 and 16 filters) and a 32-wide hidden layer.
    pub fn default_encoder() -> EncoderSpec {
        EncoderSpec {
            convs: vec![ConvSpec::new(8, 3, 1, true), ConvSpec::new(16, 3, 1, true)],
            global_pool: false,
            hidden: 32,
        }
    }

    /// He-uniform initialisation from `seed`; the output layer starts at zero.
    pub fn new(encoder: EncoderSpec, input: (usize, usize, usize), classes: usize, seed: u64) -> Result<Self> {
        if classes < 2 {
            return Err(Error::config("a classifier needs at least 2 classes"));
        }
        let mut rng = rng::stream(seed, &[rng::tag("frame-net")]);
        let mut params = encoder.build(input, &mut rng)?;
        params.push(Param::zeros("head.weight", &[encoder.hidden, classes])?);
        params.push(Param::zeros("head.bias", &[classes])?);
        Ok(FrameNet {
            encoder,
            input,
            classes,
            params,
        })
    }

    pub fn encoder(&self) -> &EncoderSpec {
        &self.encoder
    }

    pub fn input_dims(&self) -> (usize, usize, usize) {
        self.input
    }

    /// Logits `[N, K]` for frames `[N, C, H, W]`.
    pub fn frame_forward(&self, frames: &Tensor) -> Result<Tensor> {
        self.predict(frames.clone())
    }

    /// Softmax class probabilities `[N, K]`.
    pub fn probabilities(&self, frames: &Tensor) -> Result<Tensor> {
        softmax_rows(&self.frame_forward(frames)?)
    }

    fn check_input(&self, batch: &Tensor) -> Result<()> {
        let s = batch.shape();
        let (c, h, w) = self.input;
        if s.len() != 4 || s[1] != c || s[2] != h || s[3] != w {
            return Err(Error::dim(format!(
                "frame net expects [N, {c}, {h}, {w}], got {s:?}"
            )));
        }
        Ok(())
    }
}

impl Classifier for FrameNet {
    fn classes(&self) -> usize {
        self.classes
    }

    fn params(&self) -> &[Param] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    fn record(&self, tape: &mut Tape, batch: Tensor, track_grads: bool) -> Result<(Var, Vec<Var>)> {
        self.check_input(&batch)?;
        let vars = register(tape, &self.params, track_grads);
        let x = tape.leaf(super::center(batch));
        let h = self.encoder.forward(tape, x, &vars, |_, _, v| Ok(v))?;
        let base = self.encoder.param_count();
        let logits = dense(tape, h, vars[base], vars[base + 1])?;
        Ok((logits, vars))
    }
}
