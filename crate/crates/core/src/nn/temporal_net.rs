use serde::{Deserialize, Serialize};

use super::{dense, register, Classifier, ConvSpec, EncoderSpec, Param};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{kernels, tape::shift_layout, Tape, Tensor, Var};

/// How per-frame features are combined over time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Temporal shift after every conv block, then mean over frames.
    Shift,
    /// Plain mean over independently encoded frames.
    Average,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemporalNetSpec {
    pub encoder: EncoderSpec,
    pub aggregation: Aggregation,
    /// Fraction of channels shifted in each direction.
    pub shift_fraction: f64,
}

impl Default for TemporalNetSpec {
    fn default() -> Self {
        TemporalNetSpec {
            encoder: EncoderSpec {
                convs: vec![ConvSpec::new(16, 3, 2, false), ConvSpec::new(32, 3, 2, true)],
                global_pool: false,
                hidden: 64,
            },
            aggregation: Aggregation::Shift,
            shift_fraction: 0.125,
        }
    }
}

/// Video classifier over `[N, C, T, H, W]` clips: a shared 2D encoder per
/// frame, temporal shifts between conv blocks, mean over time, linear head.
#[derive(Clone, Debug, PartialEq)]
pub struct TemporalNet {
    spec: TemporalNetSpec,
    input: (usize, usize, usize, usize),
    classes: usize,
    params: Vec<Param>,
}

impl TemporalNet {
    /// `input` is `(C, T, H, W)`.
    pub fn new(spec: TemporalNetSpec, input: (usize, usize, usize, usize), classes: usize, seed: u64) -> Result<Self> {
        if classes < 2 {
            return Err(Error::config("a classifier needs at least 2 classes"));
        }
        let (c, t, h, w) = input;
        if t == 0 {
            return Err(Error::EmptyInput("temporal net with zero frames".into()));
        }
        if spec.aggregation == Aggregation::Shift {
            for conv in &spec.encoder.convs {
                shift_layout(&[t, conv.filters, 1], t, spec.shift_fraction)?;
            }
        }
        let mut rng = rng::stream(seed, &[rng::tag("temporal-net")]);
        let mut params = spec.encoder.build((c, h, w), &mut rng)?;
        params.push(Param::zeros("head.weight", &[spec.encoder.hidden, classes])?);
        params.push(Param::zeros("head.bias", &[classes])?);
        Ok(TemporalNet {
            spec,
            input,
            classes,
            params,
        })
    }

    pub fn spec(&self) -> &TemporalNetSpec {
        &self.spec
    }

    pub fn input_dims(&self) -> (usize, usize, usize, usize) {
        self.input
    }

    /// Logits `[N, K]` for clips `[N, C, T, H, W]`.
    pub fn video_forward(&self, clips: &Tensor) -> Result<Tensor> {
        self.predict(clips.clone())
    }

    /// Records the network on frames already laid out as `[N*T, C, H, W]`.
    pub fn record_frames(&self, tape: &mut Tape, frames: Tensor, track_grads: bool) -> Result<(Var, Vec<Var>)> {
        let (c, t, h, w) = self.input;
        let s = frames.shape();
        if s.len() != 4 || s[0] % t != 0 || s[1] != c || s[2] != h || s[3] != w {
            return Err(Error::dim(format!(
                "temporal net expects [N*{t}, {c}, {h}, {w}] frames, got {s:?}"
            )));
        }
        let clips = s[0] / t;
        let vars = register(tape, &self.params, track_grads);
        let x = tape.leaf(super::center(frames));
        let shift = self.spec.aggregation == Aggregation::Shift;
        let fraction = self.spec.shift_fraction;
        let hidden = self.spec.encoder.forward(tape, x, &vars, |tape, _, v| {
            if shift {
                tape.temporal_shift(v, t, fraction)
            } else {
                Ok(v)
            }
        })?;
        let width = self.spec.encoder.hidden;
        let per_frame = tape.reshape(hidden, &[clips, t, width])?;
        let pooled = tape.mean_axis(per_frame, 1)?;
        let pooled = tape.reshape(pooled, &[clips, width])?;
        let base = self.spec.encoder.param_count();
        let logits = dense(tape, pooled, vars[base], vars[base + 1])?;
        Ok((logits, vars))
    }
}

/// Reorders `[N, C, T, H, W]` into frame-major `[N*T, C, H, W]`.
pub fn clips_to_frames(clips: &Tensor) -> Result<Tensor> {
    let s = clips.shape();
    if s.len() != 5 {
        return Err(Error::dim(format!("clips must be [N, C, T, H, W], got {s:?}")));
    }
    let (n, c, t, hw) = (s[0], s[1], s[2], s[3] * s[4]);
    let src = clips.data();
    let mut out = vec![0.0; src.len()];
    for ni in 0..n {
        for ci in 0..c {
            for ti in 0..t {
                let from = (((ni * c + ci) * t) + ti) * hw;
                let to = (((ni * t + ti) * c) + ci) * hw;
                out[to..to + hw].copy_from_slice(&src[from..from + hw]);
            }
        }
    }
    Tensor::new(&[n * t, c, s[3], s[4]], out)
}

impl Classifier for TemporalNet {
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
        let (c, t, h, w) = self.input;
        let s = batch.shape();
        if s.len() != 5 || s[1] != c || s[2] != t || s[3] != h || s[4] != w {
            return Err(Error::dim(format!(
                "temporal net expects [N, {c}, {t}, {h}, {w}] clips, got {s:?}"
            )));
        }
        let frames = clips_to_frames(&batch)?;
        self.record_frames(tape, frames, track_grads)
    }
}

/// Shifts channel groups of `[N, T, C, H, W]` features along time: the first
/// `floor(fraction*C)` channels move forward one frame, the next group of the
/// same size moves back one frame, vacated slots are zero.
pub fn temporal_shift(features: &Tensor, fraction: f64) -> Result<Tensor> {
    let s = features.shape();
    if s.len() != 5 {
        return Err(Error::dim(format!("features must be [N, T, C, H, W], got {s:?}")));
    }
    let frames = s[1];
    let flat = [s[0] * frames, s[2], s[3], s[4]];
    let (channels, inner, fold) = shift_layout(&flat, frames, fraction)?;
    let mut out = vec![0.0; features.len()];
    kernels::temporal_shift(features.data(), &mut out, frames, channels, inner, fold, false);
    Tensor::new(s, out)
}
