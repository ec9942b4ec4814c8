//! Background image sources: procedural stripes, smooth value noise, and
//! user-supplied image directories.

pub mod image_dir;
pub mod noise;
pub mod stripes;

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use noise::{smooth_noise, NoiseParams};
pub use stripes::{sinusoid_stripes, ColorRule, Rgb, StripeParams, StripeRanges};

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

fn default_octaves() -> usize {
    3
}

fn default_lattice() -> usize {
    3
}

/// Where a pool's images come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PoolSource {
    Sinusoid {
        #[serde(default)]
        stripes: StripeRanges,
    },
    SmoothNoise {
        #[serde(default = "default_octaves")]
        octaves: usize,
        #[serde(default = "default_lattice")]
        lattice: usize,
    },
    ImageDir {
        path: PathBuf,
        /// Seeded uniform draws instead of cycling through the files.
        #[serde(default)]
        randomized: bool,
    },
}

/// A named pool as written in experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub source: PoolSource,
}

#[derive(Clone, Debug)]
enum Kind {
    Sinusoid(StripeRanges),
    SmoothNoise { octaves: usize, lattice: usize },
    ImageDir { images: Arc<Vec<Tensor>>, randomized: bool },
}

/// An immutable, seed-deterministic source of `[3, H, W]` backgrounds.
#[derive(Clone, Debug)]
pub struct BackgroundPool {
    kind: Kind,
    seed: u64,
    height: usize,
    width: usize,
    skipped: Vec<PathBuf>,
}

impl BackgroundPool {
    pub fn sinusoid(ranges: StripeRanges, seed: u64, height: usize, width: usize) -> Result<Self> {
        ranges.validate()?;
        Ok(Self::with_kind(Kind::Sinusoid(ranges), seed, height, width))
    }

    pub fn smooth_noise(octaves: usize, lattice: usize, seed: u64, height: usize, width: usize) -> Result<Self> {
        if octaves == 0 || lattice == 0 {
            return Err(Error::Parameter("smooth noise needs octaves >= 1 and lattice >= 1".into()));
        }
        Ok(Self::with_kind(Kind::SmoothNoise { octaves, lattice }, seed, height, width))
    }

    /// Loads every decodable PNG/PPM in `path`. Undecodable files are skipped
    /// and listed in [`BackgroundPool::skipped`].
    pub fn image_dir(path: &std::path::Path, height: usize, width: usize) -> Result<Self> {
        let set = image_dir::load_dir(path, height, width)?;
        let mut pool = Self::with_kind(
            Kind::ImageDir {
                images: Arc::new(set.images),
                randomized: false,
            },
            0,
            height,
            width,
        );
        pool.skipped = set.skipped;
        Ok(pool)
    }

    /// Switches an image-directory pool to seeded uniform sampling.
    pub fn randomized(mut self, seed: u64) -> Self {
        if let Kind::ImageDir { randomized, .. } = &mut self.kind {
            *randomized = true;
        }
        self.seed = seed;
        self
    }

    pub fn from_config(config: &PoolConfig, height: usize, width: usize) -> Result<Self> {
        match &config.source {
            PoolSource::Sinusoid { stripes } => Self::sinusoid(stripes.clone(), config.seed, height, width),
            PoolSource::SmoothNoise { octaves, lattice } => {
                Self::smooth_noise(*octaves, *lattice, config.seed, height, width)
            }
            PoolSource::ImageDir { path, randomized } => {
                let pool = Self::image_dir(path, height, width)?;
                Ok(if *randomized { pool.randomized(config.seed) } else { pool })
            }
        }
    }

    fn with_kind(kind: Kind, seed: u64, height: usize, width: usize) -> Self {
        BackgroundPool {
            kind,
            seed,
            height,
            width,
            skipped: Vec::new(),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn skipped(&self) -> &[PathBuf] {
        &self.skipped
    }

    /// Number of distinct images, for finite pools.
    pub fn image_count(&self) -> Option<usize> {
        match &self.kind {
            Kind::ImageDir { images, .. } => Some(images.len()),
            _ => None,
        }
    }

    /// Background number `index`; a pure function of `(seed, index)`.
    pub fn sample(&self, index: u64) -> Tensor {
        let mut r = rng::stream(self.seed, &[rng::tag("background"), index]);
        match &self.kind {
            Kind::Sinusoid(ranges) => {
                let params = ranges.sample(&mut r);
                sinusoid_stripes(&params, self.height, self.width).expect("validated stripe ranges")
            }
            Kind::SmoothNoise { octaves, lattice } => {
                let palette = loop {
                    let a: Rgb = [r.random(), r.random(), r.random()];
                    let b: Rgb = [r.random(), r.random(), r.random()];
                    if a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() > 0.3 * 0.3 {
                        break [a, b];
                    }
                };
                let params = NoiseParams {
                    octaves: *octaves,
                    lattice: *lattice,
                    palette,
                };
                smooth_noise(r.random(), self.height, self.width, &params).expect("valid noise params")
            }
            Kind::ImageDir { images, randomized } => {
                let i = if *randomized {
                    r.random_range(0..images.len())
                } else {
                    (index % images.len() as u64) as usize
                };
                images[i].clone()
            }
        }
    }
}

pub(crate) fn hsv(h: f64, s: f64, v: f64) -> Rgb {
    let h6 = (h.rem_euclid(1.0)) * 6.0;
    let c = v * s;
    let x = c * (1.0 - (h6 % 2.0 - 1.0).abs());
    let (r, g, b) = match h6 as usize {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

/// Stripe ranges for background family `k` of `families`: a band of
/// orientations, narrow stripes with a gentle bend, and a family hue.
pub fn family_stripes(k: usize, families: usize) -> StripeRanges {
    let band = PI / families as f64;
    let margin = 0.1 * band;
    let hue = k as f64 / families as f64;
    StripeRanges {
        theta: (k as f64 * band + margin, (k + 1) as f64 * band - margin),
        width: (3.0, 6.0),
        amplitude: (0.0, 3.0),
        frequency: (0.5, 2.0),
        colors: ColorRule::Around {
            anchors: [hsv(hue, 0.6, 0.95), hsv(hue, 0.85, 0.35)],
            jitter: 0.06,
        },
    }
}

/// Stripe ranges disjoint from every [`family_stripes`] family: wide,
/// strongly bent stripes in arbitrary colors.
pub fn ood_stripes() -> StripeRanges {
    StripeRanges {
        theta: (0.0, PI),
        width: (6.5, 10.0),
        amplitude: (3.0, 6.0),
        frequency: (0.5, 2.0),
        colors: ColorRule::Uniform,
    }
}

/// Default out-of-distribution pools used for SCUB synthesis.
pub fn default_ood_pools(seed: u64) -> Vec<PoolConfig> {
    vec![
        PoolConfig {
            name: "stripes".into(),
            seed: rng::derive_seed(seed, &[1]),
            source: PoolSource::Sinusoid { stripes: ood_stripes() },
        },
        PoolConfig {
            name: "noise".into(),
            seed: rng::derive_seed(seed, &[2]),
            source: PoolSource::SmoothNoise { octaves: 3, lattice: 3 },
        },
    ]
}
