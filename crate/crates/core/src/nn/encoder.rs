use serde::{Deserialize, Serialize};

use super::{dense, Param};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Tape, Var};

/// One conv block: `conv(filters, kernel x kernel, stride, same padding)`,
/// ReLU, then optional 2x2 max pool.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvSpec {
    pub filters: usize,
    pub kernel: usize,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default = "yes")]
    pub pool: bool,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl ConvSpec {
    pub fn new(filters: usize, kernel: usize, stride: usize, pool: bool) -> Self {
        ConvSpec {
            filters,
            kernel,
            stride,
            pool,
        }
    }
}

/// Conv stack plus one hidden dense layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderSpec {
    pub convs: Vec<ConvSpec>,
    /// Average the last conv map over space instead of flattening it.
    #[serde(default)]
    pub global_pool: bool,
    pub hidden: usize,
}

impl EncoderSpec {
    /// Output `(channels, height, width)` of the conv stack for an input of
    /// `(c, h, w)`.
    pub fn conv_output(&self, c: usize, h: usize, w: usize) -> Result<(usize, usize, usize)> {
        let (mut c, mut h, mut w) = (c, h, w);
        for (i, conv) in self.convs.iter().enumerate() {
            if conv.filters == 0 || conv.kernel == 0 || conv.stride == 0 {
                return Err(Error::config(format!("conv layer {i} has a zero size")));
            }
            let pad = conv.kernel / 2;
            if conv.kernel > h + 2 * pad || conv.kernel > w + 2 * pad {
                return Err(Error::dim(format!("conv layer {i}: kernel larger than {h}x{w} input")));
            }
            h = (h + 2 * pad - conv.kernel) / conv.stride + 1;
            w = (w + 2 * pad - conv.kernel) / conv.stride + 1;
            c = conv.filters;
            if conv.pool {
                if h < 2 || w < 2 {
                    return Err(Error::dim(format!("conv layer {i}: {h}x{w} too small to pool")));
                }
                h /= 2;
                w /= 2;
            }
        }
        Ok((c, h, w))
    }

    pub(crate) fn build(&self, input: (usize, usize, usize), rng: &mut Rng) -> Result<Vec<Param>> {
        if self.hidden == 0 {
            return Err(Error::config("hidden width must be positive"));
        }
        let mut params = Vec::new();
        let mut channels = input.0;
        for (i, conv) in self.convs.iter().enumerate() {
            let fan_in = channels * conv.kernel * conv.kernel;
            params.push(Param::he_uniform(
                format!("conv{i}.weight"),
                &[conv.filters, channels, conv.kernel, conv.kernel],
                fan_in,
                rng,
            )?);
            params.push(Param::zeros(format!("conv{i}.bias"), &[conv.filters])?);
            channels = conv.filters;
        }
        let (c, h, w) = self.conv_output(input.0, input.1, input.2)?;
        let flat = if self.global_pool { c } else { c * h * w };
        params.push(Param::he_uniform("fc.weight", &[flat, self.hidden], flat, rng)?);
        params.push(Param::zeros("fc.bias", &[self.hidden])?);
        Ok(params)
    }

    pub(crate) fn param_count(&self) -> usize {
        2 * self.convs.len() + 2
    }

    /// Runs `[B, C, H, W]` frames through the conv stack and hidden layer.
    /// `after_block` is called on the output of every conv block, which is
    /// where temporal layers get spliced in.
    pub(crate) fn forward(
        &self,
        tape: &mut Tape,
        mut x: Var,
        vars: &[Var],
        mut after_block: impl FnMut(&mut Tape, usize, Var) -> Result<Var>,
    ) -> Result<Var> {
        for (i, conv) in self.convs.iter().enumerate() {
            x = tape.conv2d(x, vars[2 * i], conv.stride, conv.kernel / 2)?;
            x = tape.bias_add(x, vars[2 * i + 1])?;
            x = tape.relu(x)?;
            if conv.pool {
                x = tape.max_pool2(x)?;
            }
            x = after_block(tape, i, x)?;
        }
        let base = 2 * self.convs.len();
        let flat = if self.global_pool {
            let s = tape.value(x).shape().to_vec();
            let spatial = tape.reshape(x, &[s[0], s[1], s[2] * s[3]])?;
            tape.mean_axis(spatial, 2)?
        } else {
            tape.flatten(x)?
        };
        let h = dense(tape, flat, vars[base], vars[base + 1])?;
        tape.relu(h)
    }
}
