//! Reference-network training and the bank of confidently classified frames.

use std::path::Path;

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_json, read_sbvd, write_json, write_sbvd};
use crate::nn::{Classifier, FrameNet};
use crate::rng;
use crate::tensor::softmax_rows;
use crate::train::{self, OptimConfig};
use crate::video::Video;
use crate::world::LabeledClip;

/// Trains `net` on single frames: every epoch, one uniformly chosen frame
/// of every training clip. Returns the mean loss per epoch.
pub fn train_reference(train_clips: &[LabeledClip], net: &mut FrameNet, optim: &OptimConfig, seed: u64) -> Result<Vec<f64>> {
    if train_clips.is_empty() {
        return Err(Error::EmptyInput("reference training needs clips".into()));
    }
    train::train_frames(
        net,
        train_clips.len(),
        |epoch, i| {
            let clip = &train_clips[i];
            let t = rng::stream(seed, &[rng::tag("reference-frame"), epoch as u64, i as u64])
                .random_range(0..clip.video.frames());
            Ok((clip.video.frame(t)?, clip.label()))
        },
        optim,
        seed,
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct BankEntry {
    pub frame: Video,
    pub source_clip: String,
    pub frame_index: usize,
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameBank {
    pub entries: Vec<BankEntry>,
    pub tau: f64,
    pub capacity: usize,
    pub seed: u64,
    /// Fewer than `capacity` frames passed the threshold.
    pub shortfall: bool,
}

impl FrameBank {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Highest softmax probability of every frame, per clip, in frame order.
pub fn frame_confidences(reference: &FrameNet, clips: &[LabeledClip]) -> Result<Vec<Vec<f64>>> {
    let frames: Vec<(usize, usize)> = clips
        .iter()
        .enumerate()
        .flat_map(|(i, c)| (0..c.video.frames()).map(move |t| (i, t)))
        .collect();
    let scores: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        frames
            .par_chunks(64)
            .map(|chunk| {
                let vids: Vec<Video> = chunk.iter().map(|&(i, t)| clips[i].video.frame(t)).collect::<Result<_>>()?;
                let probs = softmax_rows(&reference.predict(train::stack_frames(&vids)?)?)?;
                let k = probs.shape()[1];
                Ok(probs
                    .data()
                    .chunks(k)
                    .map(|row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
                    .collect())
            })
            .collect::<Result<_>>()?
    };
    let mut flat = scores.into_iter().flatten();
    Ok(clips
        .iter()
        .map(|c| (0..c.video.frames()).map(|_| flat.next().expect("one score per frame")).collect())
        .collect())
}

/// Keeps frames whose confidence exceeds `tau` and subsamples them to
/// `capacity` when there are more.
pub fn select_confident(confidences: &[f64], tau: f64, capacity: usize, seed: u64) -> Result<(Vec<usize>, bool)> {
    if capacity == 0 {
        return Err(Error::config("bank capacity must be at least 1"));
    }
    let passing: Vec<usize> = (0..confidences.len()).filter(|&i| confidences[i] > tau).collect();
    if passing.is_empty() {
        return Err(Error::EmptyBank { tau });
    }
    if passing.len() <= capacity {
        let shortfall = passing.len() < capacity;
        return Ok((passing, shortfall));
    }
    let mut r = rng::stream(seed, &[rng::tag("bank-subsample")]);
    let mut keep: Vec<usize> = index::sample(&mut r, passing.len(), capacity).into_iter().map(|k| passing[k]).collect();
    keep.sort_unstable();
    Ok((keep, false))
}

pub fn build_bank(reference: &FrameNet, train_clips: &[LabeledClip], tau: f64, capacity: usize, seed: u64) -> Result<FrameBank> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::config(format!("tau = {tau} is outside [0, 1]")));
    }
    let per_clip = frame_confidences(reference, train_clips)?;
    let index: Vec<(usize, usize)> = per_clip
        .iter()
        .enumerate()
        .flat_map(|(i, c)| (0..c.len()).map(move |t| (i, t)))
        .collect();
    let flat: Vec<f64> = per_clip.into_iter().flatten().collect();
    let (keep, shortfall) = select_confident(&flat, tau, capacity, seed)?;
    if shortfall {
        log::warn!("only {} frames exceed tau = {tau}; bank is below its capacity of {capacity}", keep.len());
    }
    let entries = keep
        .into_iter()
        .map(|k| {
            let (i, t) = index[k];
            Ok(BankEntry {
                frame: train_clips[i].video.frame(t)?,
                source_clip: train_clips[i].meta.id.clone(),
                frame_index: t,
                confidence: flat[k],
            })
        })
        .collect::<Result<_>>()?;
    Ok(FrameBank {
        entries,
        tau,
        capacity,
        seed,
        shortfall,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BankFile {
    tau: f64,
    capacity: usize,
    seed: u64,
    shortfall: bool,
    entries: Vec<BankFileEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BankFileEntry {
    source_clip: String,
    frame_index: usize,
    confidence: f64,
    file: String,
}

pub const BANK_FILE: &str = "bank.json";

pub fn save_bank(dir: &Path, bank: &FrameBank) -> Result<()> {
    let mut entries = Vec::with_capacity(bank.len());
    for (k, e) in bank.entries.iter().enumerate() {
        let file = format!("frames/{k:05}.sbvd");
        write_sbvd(&dir.join(&file), &e.frame)?;
        entries.push(BankFileEntry {
            source_clip: e.source_clip.clone(),
            frame_index: e.frame_index,
            confidence: e.confidence,
            file,
        });
    }
    write_json(
        &dir.join(BANK_FILE),
        &BankFile {
            tau: bank.tau,
            capacity: bank.capacity,
            seed: bank.seed,
            shortfall: bank.shortfall,
            entries,
        },
    )
}

pub fn load_bank(dir: &Path) -> Result<FrameBank> {
    let f: BankFile = read_json(&dir.join(BANK_FILE))?;
    let entries = f
        .entries
        .into_iter()
        .map(|e| {
            Ok(BankEntry {
                frame: read_sbvd(&dir.join(&e.file))?,
                source_clip: e.source_clip,
                frame_index: e.frame_index,
                confidence: e.confidence,
            })
        })
        .collect::<Result<_>>()?;
    Ok(FrameBank {
        entries,
        tau: f.tau,
        capacity: f.capacity,
        seed: f.seed,
        shortfall: f.shortfall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_force_filter() {
        let (keep, shortfall) = select_confident(&[0.9, 0.5, 0.95, 0.3], 0.8, 10, 0).unwrap();
        assert_eq!(keep, vec![0, 2]);
        assert!(shortfall);
    }

    #[test]
    fn thresholds_at_the_boundaries() {
        let conf = [0.2, 1.0, 0.7, 0.4];
        assert!(matches!(select_confident(&conf, 1.0, 4, 0), Err(Error::EmptyBank { .. })));
        assert_eq!(select_confident(&conf, 0.0, 10, 0).unwrap().0.len(), 4);
        let (keep, shortfall) = select_confident(&conf, 0.0, 3, 5).unwrap();
        assert_eq!(keep.len(), 3);
        assert!(!shortfall);
        assert_eq!(keep, select_confident(&conf, 0.0, 3, 5).unwrap().0);
    }
}
