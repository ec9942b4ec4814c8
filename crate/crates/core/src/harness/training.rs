use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::augment::{Augmentor, Sample};
use crate::bench::BenchmarkSet;
use crate::error::{Error, Result};
use crate::nn::TemporalNet;
use crate::rng;
use crate::tensor::{Targets, Tensor};
use crate::train::{self, OptimConfig};
use crate::world::LabeledClip;

/// Trains the main network with per-sample augmentation. Sample `i` of
/// epoch `e` is augmented with its own stream derived from `(seed, e, i)`,
/// so the result does not depend on how many threads prepare batches.
/// Returns the mean loss of every epoch.
pub fn train_main(
    train_clips: &[LabeledClip],
    net: &mut TemporalNet,
    augmentor: &Augmentor,
    optim: &OptimConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    optim.validate()?;
    if train_clips.is_empty() {
        return Err(Error::EmptyInput("no training clips".into()));
    }
    let samples: Vec<Sample> = train_clips
        .iter()
        .map(|c| Sample {
            video: &c.video,
            label: c.label(),
            masks: Some(&c.masks),
        })
        .collect();
    augmentor.check_data(&samples)?;
    let classes = crate::nn::Classifier::classes(net);
    let mut sgd = optim.sgd()?;
    let mut curve = Vec::with_capacity(optim.epochs);
    for epoch in 0..optim.epochs {
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut rng::stream(seed, &[rng::tag("main-order"), epoch as u64]));
        let mut total = 0.0;
        for (b, chunk) in order.chunks(optim.batch_size).enumerate() {
            let augmented = chunk
                .par_iter()
                .map(|&i| {
                    let mut r = rng::stream(seed, &[rng::tag("augment"), epoch as u64, i as u64]);
                    augmentor.apply(&samples[i], &samples, &mut r)
                })
                .collect::<Result<Vec<_>>>()?;
            let batch = train::stack_clips(augmented.iter().map(|a| &a.video))?;
            let labels = Tensor::new(
                &[chunk.len(), classes],
                augmented.iter().flat_map(|a| a.label.iter().copied()).collect(),
            )?;
            let loss = train::sgd_step(net, &mut sgd, batch, Targets::Mixture(&labels)).map_err(|e| match e {
                Error::NonFinite(msg) => Error::NonFinite(format!(
                    "{msg} at epoch {epoch}, batch {b} (clips {:?}); weights left at the last finite step",
                    chunk.iter().map(|&i| &train_clips[i].meta.id).collect::<Vec<_>>()
                )),
                other => other,
            })?;
            total += loss * chunk.len() as f64;
        }
        let mean = total / samples.len() as f64;
        log::debug!("epoch {epoch}: loss {mean:.4}");
        curve.push(mean);
    }
    Ok(curve)
}

/// Top-1 accuracy of `net` on `set`; `None` (with a warning) for an empty set.
pub fn evaluate_set(net: &TemporalNet, set: &BenchmarkSet) -> Result<Option<f64>> {
    if set.is_empty() {
        log::warn!("benchmark set {} is empty; skipped", set.name);
        return Ok(None);
    }
    let videos = set.videos();
    let predicted = train::predict_all(net, &videos, |chunk| train::stack_clips(chunk.iter().copied()))?;
    train::accuracy(&predicted, &set.labels()).map(Some)
}
