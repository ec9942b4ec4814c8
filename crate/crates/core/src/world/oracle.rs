//! Nearest-centroid classifier on sprite trajectories read from masks alone.

use crate::error::{Error, Result};
use crate::video::MaskSequence;

/// Displacement of the mask centroid from frame 0 (in canvas fractions) and
/// relative area change, for every frame.
pub fn trajectory_features(masks: &MaskSequence) -> Result<Vec<f64>> {
    let v = masks.video();
    let (h, w) = (v.height() as f64, v.width() as f64);
    let (x0, y0) = masks
        .centroid(0)
        .ok_or_else(|| Error::Validation("first mask frame is empty".into()))?;
    let a0 = masks.area(0) as f64;
    let mut out = Vec::with_capacity(3 * masks.frames());
    for t in 0..masks.frames() {
        let (x, y) = masks
            .centroid(t)
            .ok_or_else(|| Error::Validation(format!("mask frame {t} is empty")))?;
        out.push((x - x0) / w);
        out.push((y - y0) / h);
        out.push(masks.area(t) as f64 / a0 - 1.0);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MotionOracle {
    centroids: Vec<Vec<f64>>,
}

impl MotionOracle {
    pub fn fit<'a>(examples: impl IntoIterator<Item = (&'a MaskSequence, usize)>, classes: usize) -> Result<Self> {
        let mut sums: Vec<Vec<f64>> = vec![Vec::new(); classes];
        let mut counts = vec![0usize; classes];
        for (masks, label) in examples {
            let f = trajectory_features(masks)?;
            let slot = sums
                .get_mut(label)
                .ok_or_else(|| Error::Validation(format!("label {label} out of range")))?;
            if slot.is_empty() {
                *slot = vec![0.0; f.len()];
            }
            if slot.len() != f.len() {
                return Err(Error::dim("trajectories of different lengths"));
            }
            slot.iter_mut().zip(&f).for_each(|(s, v)| *s += v);
            counts[label] += 1;
        }
        if let Some(k) = counts.iter().position(|&c| c == 0) {
            return Err(Error::EmptyInput(format!("no trajectories for class {k}")));
        }
        let centroids = sums
            .into_iter()
            .zip(counts)
            .map(|(s, n)| s.into_iter().map(|v| v / n as f64).collect())
            .collect();
        Ok(MotionOracle { centroids })
    }

    pub fn predict(&self, masks: &MaskSequence) -> Result<usize> {
        let f = trajectory_features(masks)?;
        let mut best = (f64::INFINITY, 0);
        for (k, c) in self.centroids.iter().enumerate() {
            if c.len() != f.len() {
                return Err(Error::dim("trajectory length differs from the fitted one"));
            }
            let d: f64 = c.iter().zip(&f).map(|(a, b)| (a - b).powi(2)).sum();
            if d < best.0 {
                best = (d, k);
            }
        }
        Ok(best.1)
    }

    pub fn accuracy<'a>(&self, examples: impl IntoIterator<Item = (&'a MaskSequence, usize)>) -> Result<f64> {
        let (mut hit, mut n) = (0usize, 0usize);
        for (masks, label) in examples {
            hit += (self.predict(masks)? == label) as usize;
            n += 1;
        }
        if n == 0 {
            return Err(Error::EmptyInput("no clips to score".into()));
        }
        Ok(hit as f64 / n as f64)
    }
}
