use serde::{Deserialize, Serialize};

use super::BenchmarkSet;
use crate::error::{Error, Result};
use crate::nn::{EncoderSpec, FrameNet};
use crate::train::{self, OptimConfig};
use crate::video::Video;
use crate::world::LabeledClip;

/// The static probe: a frame classifier trained on time-averaged frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSpec {
    pub encoder: EncoderSpec,
    pub optim: OptimConfig,
    pub seed: u64,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        ProbeSpec {
            encoder: FrameNet::default_encoder(),
            optim: OptimConfig {
                epochs: 15,
                ..OptimConfig::default()
            },
            seed: 0,
        }
    }
}

/// `ln(acc_old / acc_new)`; `+inf` when nothing in the new set is right.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainGapReport {
    pub set: String,
    pub acc_old: f64,
    pub acc_new: f64,
    #[serde(with = "crate::io::float_or_inf")]
    pub gap: f64,
    pub probe: ProbeSpec,
}

impl DomainGapReport {
    pub fn from_accuracies(set: impl Into<String>, acc_old: f64, acc_new: f64, probe: ProbeSpec) -> Self {
        let gap = if acc_new == 0.0 { f64::INFINITY } else { (acc_old / acc_new).ln() };
        DomainGapReport {
            set: set.into(),
            acc_old,
            acc_new,
            gap,
            probe,
        }
    }
}

/// Mean over time of a clip, as a one-frame clip.
pub fn time_average(video: &Video) -> Result<Video> {
    let [c, t, h, w] = video.dims();
    let mut out = Video::zeros([c, 1, h, w])?;
    for ch in 0..c {
        let mut acc = vec![0.0f64; h * w];
        for ti in 0..t {
            acc.iter_mut().zip(video.plane(ch, ti)).for_each(|(a, &v)| *a += f64::from(v));
        }
        for (o, a) in out.plane_mut(ch, 0).iter_mut().zip(acc) {
            *o = (a / t as f64) as f32;
        }
    }
    Ok(out)
}

/// Trains the probe on time-averaged training clips.
pub fn train_probe(train_clips: &[LabeledClip], spec: &ProbeSpec) -> Result<FrameNet> {
    let first = train_clips.first().ok_or_else(|| Error::EmptyInput("probe needs training clips".into()))?;
    let [c, _, h, w] = first.video.dims();
    let classes = train_clips.iter().map(|c| c.label()).max().unwrap_or(0) + 1;
    let frames: Vec<Video> = train_clips.iter().map(|c| time_average(&c.video)).collect::<Result<_>>()?;
    let mut net = FrameNet::new(spec.encoder.clone(), (c, h, w), classes.max(2), spec.seed)?;
    train::train_frames(
        &mut net,
        frames.len(),
        |_, i| Ok((frames[i].clone(), train_clips[i].label())),
        &spec.optim,
        spec.seed,
    )?;
    Ok(net)
}

/// Probe accuracy on the time-averaged clips of `set`.
pub fn probe_accuracy(probe: &FrameNet, set: &BenchmarkSet) -> Result<f64> {
    let frames: Vec<Video> = set.clips.iter().map(|c| time_average(&c.video)).collect::<Result<_>>()?;
    let predicted = train::predict_all(probe, &frames, |chunk| train::stack_frames(chunk))?;
    train::accuracy(&predicted, &set.labels())
}

/// Trains the probe and compares its accuracy on `test_iid` and each
/// synthesized set.
pub fn domain_gap(
    train_clips: &[LabeledClip],
    test_iid: &BenchmarkSet,
    synthesized: &[&BenchmarkSet],
    spec: &ProbeSpec,
) -> Result<Vec<DomainGapReport>> {
    let probe = train_probe(train_clips, spec)?;
    let acc_old = probe_accuracy(&probe, test_iid)?;
    synthesized
        .iter()
        .map(|set| {
            let acc_new = probe_accuracy(&probe, set)?;
            Ok(DomainGapReport::from_accuracies(set.name.clone(), acc_old, acc_new, spec.clone()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_gaps() {
        let r = DomainGapReport::from_accuracies("x", 0.8, 0.2, ProbeSpec::default());
        assert!((r.gap - 4f64.ln()).abs() < 1e-12);
        let same = DomainGapReport::from_accuracies("x", 0.55, 0.55, ProbeSpec::default());
        assert_eq!(same.gap, 0.0);
        let zero = DomainGapReport::from_accuracies("x", 0.5, 0.0, ProbeSpec::default());
        assert_eq!(zero.gap, f64::INFINITY);
        let json = serde_json::to_string(&zero).unwrap();
        let back: DomainGapReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, zero);
    }

    #[test]
    fn time_average_of_static_clip_is_its_frame() {
        let f = Video::new([1, 1, 1, 2], vec![0.25, 0.75]).unwrap();
        let clip = Video::tile(&f, 4).unwrap();
        assert_eq!(time_average(&clip).unwrap(), f);
    }
}
