//! Mini-batch SGD and batched inference shared by every network.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Classifier, FrameNet};
use crate::rng;
use crate::tensor::{SgdState, Tape, Targets, Tensor};
use crate::video::Video;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            learning_rate: 0.05,
            momentum: 0.9,
            epochs: 40,
            batch_size: 16,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        SgdState::new(self.learning_rate, self.momentum)?;
        Ok(())
    }

    pub fn sgd(&self) -> Result<SgdState> {
        SgdState::new(self.learning_rate, self.momentum)
    }
}

/// One forward/backward pass and SGD update. Returns the batch loss; a
/// non-finite loss leaves the weights untouched and is an error.
pub fn sgd_step<C: Classifier>(net: &mut C, sgd: &mut SgdState, batch: Tensor, targets: Targets<'_>) -> Result<f64> {
    let mut tape = Tape::new();
    let (logits, vars) = net.record(&mut tape, batch, true)?;
    let loss_var = tape.softmax_cross_entropy(logits, targets)?;
    let loss = tape.value(loss_var).item()?;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("training loss is {loss}")));
    }
    let mut grads = tape.backward(loss_var)?;
    let grads: Vec<Tensor> = vars
        .iter()
        .zip(net.params())
        .map(|(&v, p)| match grads.take(v) {
            Some(g) => Ok(g),
            None => Tensor::zeros(p.value.shape()),
        })
        .collect::<Result<_>>()?;
    let grad_refs: Vec<&Tensor> = grads.iter().collect();
    let mut params: Vec<&mut Tensor> = net.params_mut().iter_mut().map(|p| &mut p.value).collect();
    sgd.step(&mut params, &grad_refs)?;
    Ok(loss)
}

/// Stacks clips into a `[N, C, T, H, W]` tensor.
pub fn stack_clips<'a>(clips: impl IntoIterator<Item = &'a Video>) -> Result<Tensor> {
    let mut dims = None;
    let mut data = Vec::new();
    let mut n = 0;
    for v in clips {
        match dims {
            None => dims = Some(v.dims()),
            Some(d) if d != v.dims() => {
                return Err(Error::dim(format!("cannot batch clips of dims {d:?} and {:?}", v.dims())))
            }
            _ => {}
        }
        data.extend(v.data().iter().map(|&x| f64::from(x)));
        n += 1;
    }
    let [c, t, h, w] = dims.ok_or_else(|| Error::EmptyInput("empty batch".into()))?;
    Tensor::new(&[n, c, t, h, w], data)
}

/// Stacks one-frame clips into a `[N, C, H, W]` tensor.
pub fn stack_frames<'a>(frames: impl IntoIterator<Item = &'a Video>) -> Result<Tensor> {
    let t = stack_clips(frames)?;
    let s = t.shape().to_vec();
    if s[2] != 1 {
        return Err(Error::dim(format!("expected single frames, got T = {}", s[2])));
    }
    t.reshape(&[s[0], s[1], s[3], s[4]])
}

/// Trains a frame classifier for `optim.epochs` epochs over `n` examples.
/// `example(epoch, i)` yields the one-frame clip and label used for example
/// `i` in that epoch; the visiting order is reshuffled from `seed` every
/// epoch. Returns the mean loss of each epoch.
pub fn train_frames(
    net: &mut FrameNet,
    n: usize,
    mut example: impl FnMut(usize, usize) -> Result<(Video, usize)>,
    optim: &OptimConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    optim.validate()?;
    if n == 0 {
        return Err(Error::EmptyInput("no training examples".into()));
    }
    let mut sgd = optim.sgd()?;
    let mut curve = Vec::with_capacity(optim.epochs);
    for epoch in 0..optim.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::stream(seed, &[rng::tag("epoch-order"), epoch as u64]));
        let mut total = 0.0;
        for chunk in order.chunks(optim.batch_size) {
            let mut frames = Vec::with_capacity(chunk.len());
            let mut labels = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let (f, y) = example(epoch, i)?;
                frames.push(f);
                labels.push(y);
            }
            let batch = stack_frames(&frames)?;
            total += chunk.len() as f64 * sgd_step(net, &mut sgd, batch, Targets::Classes(&labels))?;
        }
        curve.push(total / n as f64);
    }
    Ok(curve)
}

const EVAL_CHUNK: usize = 32;

/// Predicted class of every input, evaluated in parallel chunks. `batch`
/// turns a slice of inputs into the network's batch tensor.
pub fn predict_all<C, T, F>(net: &C, inputs: &[T], batch: F) -> Result<Vec<usize>>
where
    C: Classifier + Sync,
    T: Sync,
    F: Fn(&[T]) -> Result<Tensor> + Sync,
{
    let chunks: Vec<Vec<usize>> = inputs
        .par_chunks(EVAL_CHUNK)
        .map(|chunk| net.predict(batch(chunk)?)?.argmax_rows())
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Fraction of `predicted` equal to `labels`.
pub fn accuracy(predicted: &[usize], labels: &[usize]) -> Result<f64> {
    if predicted.len() != labels.len() {
        return Err(Error::dim("prediction and label counts differ"));
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput("accuracy of an empty set".into()));
    }
    let hits = predicted.iter().zip(labels).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{ConvSpec, EncoderSpec, FrameNet};

    #[test]
    fn step_reduces_loss_on_a_fixed_batch() {
        let enc = EncoderSpec {
            convs: vec![ConvSpec::new(4, 3, 1, true)],
            global_pool: false,
            hidden: 8,
        };
        let mut net = FrameNet::new(enc, (1, 4, 4), 2, 1).unwrap();
        let x = Tensor::new(&[2, 1, 4, 4], (0..32).map(|i| if i < 16 { 0.9 } else { 0.1 }).collect()).unwrap();
        let labels = [0, 1];
        let mut sgd = SgdState::new(0.1, 0.0).unwrap();
        let first = sgd_step(&mut net, &mut sgd, x.clone(), Targets::Classes(&labels)).unwrap();
        let mut last = first;
        for _ in 0..20 {
            last = sgd_step(&mut net, &mut sgd, x.clone(), Targets::Classes(&labels)).unwrap();
        }
        assert!((first - 2f64.ln()).abs() < 1e-12);
        assert!(last < first);
    }

    #[test]
    fn accuracy_counts() {
        assert_eq!(accuracy(&[1, 2, 3, 0], &[1, 2, 0, 0]).unwrap(), 0.75);
        assert!(accuracy(&[], &[]).is_err());
    }
}
