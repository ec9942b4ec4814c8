//! StillMix and the baseline video augmentations behind one interface.

pub mod bank;
pub mod mix;

use rand::Rng as _;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

pub use bank::{build_bank, load_bank, save_bank, train_reference, BankEntry, FrameBank};
pub use mix::{one_hot, AugmentedSample, PixelBox};

use crate::error::{Error, Result};
use crate::pools::BackgroundPool;
use crate::rng::Rng;
use crate::video::{MaskSequence, Video};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    None,
    Stillmix,
    Mixup,
    Videomix,
    Be,
    Bgswap,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::None,
        Method::Stillmix,
        Method::Mixup,
        Method::Videomix,
        Method::Be,
        Method::Bgswap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Stillmix => "stillmix",
            Method::Mixup => "mixup",
            Method::Videomix => "videomix",
            Method::Be => "be",
            Method::Bgswap => "bgswap",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentorConfig {
    pub method: Method,
    /// Probability that a training sample is augmented.
    pub p_aug: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Bank confidence threshold.
    pub tau: f64,
    pub bank_capacity: usize,
    /// Range of the BE mixing weight.
    pub be_mu: (f64, f64),
    /// Range of the VideoMix box side, as a fraction of the frame side.
    pub videomix_side: (f64, f64),
}

impl Default for AugmentorConfig {
    fn default() -> Self {
        AugmentorConfig {
            method: Method::None,
            p_aug: 0.5,
            alpha: 2.0,
            beta: 2.0,
            tau: 0.8,
            bank_capacity: 256,
            be_mu: (0.0, 0.3),
            videomix_side: (0.25, 0.75),
        }
    }
}

fn unit_range(name: &str, (lo, hi): (f64, f64)) -> Result<()> {
    if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
        return Err(Error::config(format!("{name} range ({lo}, {hi}) must be ordered within [0, 1]")));
    }
    Ok(())
}

impl AugmentorConfig {
    pub fn with_method(method: Method) -> Self {
        AugmentorConfig {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_aug) {
            return Err(Error::config(format!("p_aug = {} is outside [0, 1]", self.p_aug)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite() && self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::config("Beta parameters alpha and beta must be positive"));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::config(format!("tau = {} is outside [0, 1]", self.tau)));
        }
        if self.bank_capacity == 0 {
            return Err(Error::config("bank_capacity must be at least 1"));
        }
        unit_range("be_mu", self.be_mu)?;
        unit_range("videomix_side", self.videomix_side)
    }

    fn beta_dist(&self) -> Result<Beta<f64>> {
        Beta::new(self.alpha, self.beta).map_err(|e| Error::config(format!("invalid Beta parameters: {e}")))
    }
}

/// A training clip as seen by the augmentations.
#[derive(Clone, Copy, Debug)]
pub struct Sample<'a> {
    pub video: &'a Video,
    pub label: usize,
    pub masks: Option<&'a MaskSequence>,
}

fn uniform(rng: &mut Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// StillMix: mixes the clip with a tiled bank frame drawn uniformly; the
/// label stays one-hot on the clip's own class.
pub fn stillmix(sample: &Sample, bank: &FrameBank, beta: &Beta<f64>, classes: usize, rng: &mut Rng) -> Result<AugmentedSample> {
    if bank.is_empty() {
        return Err(Error::EmptyBank { tau: bank.tau });
    }
    let lambda = beta.sample(rng);
    let entry = &bank.entries[rng.random_range(0..bank.len())];
    Ok(AugmentedSample {
        video: mix::stillmix_with(sample.video, &entry.frame, lambda)?,
        label: one_hot(sample.label, classes)?,
        applied: true,
    })
}

pub fn mixup(a: &Sample, b: &Sample, beta: &Beta<f64>, classes: usize, rng: &mut Rng) -> Result<AugmentedSample> {
    let lambda = beta.sample(rng);
    mix::mixup_with(a.video, a.label, b.video, b.label, classes, lambda)
}

/// Draws a box whose sides are uniform fractions of the frame sides and
/// whose position is uniform over the frame.
pub fn random_box(height: usize, width: usize, side: (f64, f64), rng: &mut Rng) -> PixelBox {
    let bh = ((uniform(rng, side) * height as f64).round() as usize).min(height);
    let bw = ((uniform(rng, side) * width as f64).round() as usize).min(width);
    let top = rng.random_range(0..=height - bh);
    let left = rng.random_range(0..=width - bw);
    (top, left, bh, bw)
}

pub fn videomix(a: &Sample, b: &Sample, side: (f64, f64), classes: usize, rng: &mut Rng) -> Result<AugmentedSample> {
    let region = random_box(a.video.height(), a.video.width(), side, rng);
    mix::videomix_with(a.video, a.label, b.video, b.label, classes, region)
}

/// BE: blends every frame with one frame of the same clip.
pub fn be(sample: &Sample, mu_range: (f64, f64), classes: usize, rng: &mut Rng) -> Result<AugmentedSample> {
    let label = one_hot(sample.label, classes)?;
    let frames = sample.video.frames();
    if frames < 2 {
        log::warn!("BE needs at least two frames; clip left unchanged");
        return Ok(AugmentedSample {
            video: sample.video.clone(),
            label,
            applied: false,
        });
    }
    let k = rng.random_range(0..frames);
    let mu = uniform(rng, mu_range);
    Ok(AugmentedSample {
        video: mix::be_with(sample.video, k, mu)?,
        label,
        applied: true,
    })
}

/// Picks a pool uniformly, then a background from it. Returns the pool
/// index and the background as a one-frame clip.
pub fn draw_background(pools: &[BackgroundPool], rng: &mut Rng) -> Result<(usize, Video)> {
    if pools.is_empty() {
        return Err(Error::config("background swap needs at least one background pool"));
    }
    let p = rng.random_range(0..pools.len());
    let index: u64 = rng.random();
    Ok((p, Video::from_image(&pools[p].sample(index))?))
}

pub fn bgswap(sample: &Sample, pools: &[BackgroundPool], classes: usize, rng: &mut Rng) -> Result<AugmentedSample> {
    let masks = sample
        .masks
        .ok_or_else(|| Error::config("background swap needs foreground masks"))?;
    let (_, bg) = draw_background(pools, rng)?;
    Ok(AugmentedSample {
        video: mix::bgswap_with(sample.video, masks, &bg)?,
        label: one_hot(sample.label, classes)?,
        applied: true,
    })
}

/// A configured augmentation with everything it needs already in hand.
#[derive(Clone, Debug)]
pub struct Augmentor {
    config: AugmentorConfig,
    classes: usize,
    bank: Option<FrameBank>,
    backgrounds: Vec<BackgroundPool>,
    beta: Beta<f64>,
}

impl Augmentor {
    /// Fails if the method's resources are missing: a non-empty bank for
    /// StillMix, background pools for background swap.
    pub fn new(config: AugmentorConfig, classes: usize, bank: Option<FrameBank>, backgrounds: Vec<BackgroundPool>) -> Result<Self> {
        config.validate()?;
        if classes < 2 {
            return Err(Error::config("augmentation needs at least two classes"));
        }
        match config.method {
            Method::Stillmix => match &bank {
                None => return Err(Error::config("stillmix needs a frame bank")),
                Some(b) if b.is_empty() => return Err(Error::EmptyBank { tau: b.tau }),
                _ => {}
            },
            Method::Bgswap if backgrounds.is_empty() => {
                return Err(Error::config("bgswap needs at least one background pool"))
            }
            _ => {}
        }
        let beta = config.beta_dist()?;
        Ok(Augmentor {
            config,
            classes,
            bank,
            backgrounds,
            beta,
        })
    }

    pub fn config(&self) -> &AugmentorConfig {
        &self.config
    }

    pub fn bank(&self) -> Option<&FrameBank> {
        self.bank.as_ref()
    }

    /// Checks the training data against the method before training starts:
    /// peers for Mixup/VideoMix, masks for background swap.
    pub fn check_data(&self, samples: &[Sample]) -> Result<()> {
        match self.config.method {
            Method::Mixup | Method::Videomix if samples.is_empty() => {
                Err(Error::config(format!("{} needs peer clips", self.config.method.name())))
            }
            Method::Bgswap if samples.iter().any(|s| s.masks.is_none()) => {
                Err(Error::config("bgswap needs masks for every training clip"))
            }
            _ => Ok(()),
        }
    }

    /// With probability `1 - p_aug` returns the sample unchanged with a
    /// one-hot label; otherwise applies the configured method. The Bernoulli
    /// draw always happens first so every method consumes `rng` alike.
    pub fn apply(&self, sample: &Sample, peers: &[Sample], rng: &mut Rng) -> Result<AugmentedSample> {
        let fire = rng.random_bool(self.config.p_aug);
        if !fire || self.config.method == Method::None {
            return Ok(AugmentedSample {
                video: sample.video.clone(),
                label: one_hot(sample.label, self.classes)?,
                applied: false,
            });
        }
        let k = self.classes;
        let peer = |rng: &mut Rng| -> Result<Sample> {
            if peers.is_empty() {
                return Err(Error::config("no peer clips to mix with"));
            }
            Ok(peers[rng.random_range(0..peers.len())])
        };
        match self.config.method {
            Method::None => unreachable!("handled above"),
            Method::Stillmix => {
                let bank = self.bank.as_ref().expect("checked at construction");
                stillmix(sample, bank, &self.beta, k, rng)
            }
            Method::Mixup => {
                let b = peer(rng)?;
                mixup(sample, &b, &self.beta, k, rng)
            }
            Method::Videomix => {
                let b = peer(rng)?;
                videomix(sample, &b, self.config.videomix_side, k, rng)
            }
            Method::Be => be(sample, self.config.be_mu, k, rng),
            Method::Bgswap => bgswap(sample, &self.backgrounds, k, rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn clip(v: f32, t: usize) -> Video {
        Video::new([3, t, 4, 4], vec![v; 3 * t * 16]).unwrap()
    }

    fn bank_of(frame: Video) -> FrameBank {
        FrameBank {
            entries: vec![BankEntry {
                frame,
                source_clip: "x".into(),
                frame_index: 0,
                confidence: 0.9,
            }],
            tau: 0.8,
            capacity: 1,
            seed: 0,
            shortfall: false,
        }
    }

    #[test]
    fn construction_requires_resources() {
        let cfg = AugmentorConfig::with_method(Method::Stillmix);
        assert!(matches!(Augmentor::new(cfg.clone(), 3, None, vec![]), Err(Error::Config(_))));
        let mut empty = bank_of(clip(0.1, 1));
        empty.entries.clear();
        assert!(matches!(Augmentor::new(cfg, 3, Some(empty), vec![]), Err(Error::EmptyBank { .. })));
        let swap = AugmentorConfig::with_method(Method::Bgswap);
        assert!(Augmentor::new(swap.clone(), 3, None, vec![]).is_err());
        let pool = BackgroundPool::smooth_noise(1, 2, 0, 4, 4).unwrap();
        let aug = Augmentor::new(swap, 3, None, vec![pool]).unwrap();
        let v = clip(0.5, 2);
        let unmasked = [Sample {
            video: &v,
            label: 0,
            masks: None,
        }];
        assert!(matches!(aug.check_data(&unmasked), Err(Error::Config(_))));
        let bad = AugmentorConfig {
            p_aug: 1.5,
            ..AugmentorConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_probability_and_none_are_identity() {
        let v = clip(0.3, 4);
        let s = Sample {
            video: &v,
            label: 1,
            masks: None,
        };
        let bank = bank_of(clip(0.9, 1));
        for method in [Method::None, Method::Stillmix, Method::Mixup, Method::Be] {
            for p_aug in [0.0, 1.0] {
                if method != Method::None && p_aug == 1.0 {
                    continue;
                }
                let cfg = AugmentorConfig {
                    method,
                    p_aug,
                    ..AugmentorConfig::default()
                };
                let aug = Augmentor::new(cfg, 3, Some(bank.clone()), vec![]).unwrap();
                let out = aug.apply(&s, &[s], &mut rng::stream(1, &[])).unwrap();
                assert_eq!(out.video, v);
                assert_eq!(out.label, vec![0.0, 1.0, 0.0]);
            }
        }
    }

    #[test]
    fn stillmix_keeps_label_and_range() {
        let v = clip(0.8, 4);
        let s = Sample {
            video: &v,
            label: 2,
            masks: None,
        };
        let cfg = AugmentorConfig {
            method: Method::Stillmix,
            p_aug: 1.0,
            ..AugmentorConfig::default()
        };
        let aug = Augmentor::new(cfg, 3, Some(bank_of(clip(0.4, 1))), vec![]).unwrap();
        let mut r = rng::stream(3, &[]);
        for _ in 0..50 {
            let out = aug.apply(&s, &[], &mut r).unwrap();
            assert!(out.applied);
            assert_eq!(out.label, vec![0.0, 0.0, 1.0]);
            assert!(out.video.data().iter().all(|&x| (0.4..=0.8).contains(&x)));
        }
    }

    #[test]
    fn be_on_single_frame_is_a_noop() {
        let v = clip(0.2, 1);
        let s = Sample {
            video: &v,
            label: 0,
            masks: None,
        };
        let out = be(&s, (0.0, 1.0), 2, &mut rng::stream(0, &[])).unwrap();
        assert!(!out.applied);
        assert_eq!(out.video, v);
    }

    #[test]
    fn random_boxes_fit() {
        let mut r = rng::stream(4, &[]);
        for _ in 0..200 {
            let (top, left, h, w) = random_box(32, 20, (0.25, 0.75), &mut r);
            assert!(top + h <= 32 && left + w <= 20);
            assert!((8..=24).contains(&h) && (5..=15).contains(&w));
        }
    }
}
