//! Procedural labeled video worlds: the class is defined by how a sprite
//! moves, while the background texture family and sprite appearance are
//! tied to the class only with probability `rho_bg` and `rho_fg`.

pub mod motion;
pub mod oracle;
pub mod sprite;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use motion::{motion_program, Jitter, Motion, Pose, MOTIONS};
pub use sprite::{rasterize, Appearance, Raster, Shape, SHAPES};

use crate::error::{Error, Result};
use crate::pools::{family_stripes, BackgroundPool};
use crate::rng;
use crate::video::{MaskSequence, Video};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldSpec {
    pub classes: usize,
    pub channels: usize,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub rho_bg: f64,
    pub rho_fg: f64,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub seed: u64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            classes: 6,
            channels: 3,
            frames: 8,
            height: 32,
            width: 32,
            rho_bg: 0.95,
            rho_fg: 0.0,
            train: 600,
            val: 120,
            test: 180,
            seed: 0,
        }
    }
}

/// Minimum fraction of frames at which two classes' sprite centers differ.
pub const MIN_SEPARATION: f64 = 0.25;

impl WorldSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes > MOTIONS.len() {
            return Err(Error::config(format!(
                "{} classes requested but only {} motion programs exist",
                self.classes,
                MOTIONS.len()
            )));
        }
        if self.classes < 2 {
            return Err(Error::config("a world needs at least two classes"));
        }
        if self.channels != 3 {
            return Err(Error::config("world clips are RGB; channels must be 3"));
        }
        if self.frames == 0 || self.height < 8 || self.width < 8 {
            return Err(Error::config("world clips need T >= 1 and H, W >= 8"));
        }
        for (name, rho) in [("rho_bg", self.rho_bg), ("rho_fg", self.rho_fg)] {
            if !(0.0..=1.0).contains(&rho) {
                return Err(Error::config(format!("{name} = {rho} is outside [0, 1]")));
            }
        }
        for (name, n) in [("train", self.train), ("val", self.val), ("test", self.test)] {
            if n < self.classes {
                return Err(Error::config(format!(
                    "{name} split has {n} clips, fewer than the {} classes",
                    self.classes
                )));
            }
        }
        for (i, &a) in MOTIONS[..self.classes].iter().enumerate() {
            for &b in &MOTIONS[i + 1..self.classes] {
                let s = motion::separation(a, b, self.frames, self.height, self.width);
                if self.frames > 1 && s < MIN_SEPARATION {
                    return Err(Error::config(format!(
                        "{} and {} differ in only {:.0}% of frames",
                        a.name(),
                        b.name(),
                        100.0 * s
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.channels, self.frames, self.height, self.width]
    }

    /// One stripe pool per texture family.
    pub fn family_pools(&self) -> Result<Vec<BackgroundPool>> {
        (0..self.classes)
            .map(|k| {
                let seed = rng::derive_seed(self.seed, &[rng::tag("family"), k as u64]);
                BackgroundPool::sinusoid(family_stripes(k, self.classes), seed, self.height, self.width)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Per-clip metadata, as stored in dataset manifests.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipMeta {
    pub id: String,
    pub label: usize,
    pub bg_family: usize,
    pub fg_appearance: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledClip {
    pub meta: ClipMeta,
    pub video: Video,
    pub masks: MaskSequence,
}

impl LabeledClip {
    pub fn label(&self) -> usize {
        self.meta.label
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct World {
    pub spec: WorldSpec,
    pub train: Vec<LabeledClip>,
    pub val: Vec<LabeledClip>,
    pub test: Vec<LabeledClip>,
}

impl World {
    pub fn split(&self, split: Split) -> &[LabeledClip] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

fn split_labels(spec: &WorldSpec, split: Split, n: usize) -> Vec<usize> {
    // balanced, then shuffled: each clip's label is uniform and the marginal
    // is exact
    let mut labels: Vec<usize> = (0..n).map(|i| i % spec.classes).collect();
    labels.shuffle(&mut rng::stream(spec.seed, &[rng::tag("labels"), split as u64]));
    labels
}

/// Renders one clip. Everything random comes from `seed`.
pub fn render_clip(spec: &WorldSpec, families: &[BackgroundPool], label: usize, id: String, seed: u64) -> Result<LabeledClip> {
    let k = spec.classes;
    let motion = Motion::for_class(label)?;
    let mut r = rng::stream(seed, &[rng::tag("clip")]);
    let bg_family = if r.random::<f64>() < spec.rho_bg { label } else { r.random_range(0..k) };
    let fg_appearance = if r.random::<f64>() < spec.rho_fg { label } else { r.random_range(0..k) };
    let jitter = Jitter::sample(&mut r);
    let background = families[bg_family].sample(seed);
    let appearance = Appearance::new(fg_appearance, k);

    let [c, t_len, h, w] = spec.dims();
    let hw = h * w;
    let mut video = Video::zeros([c, t_len, h, w])?;
    let mut masks = Video::zeros([1, t_len, h, w])?;
    for t in 0..t_len {
        let raster = rasterize(&motion::pose(motion, t, t_len, &jitter), &appearance, h, w);
        for ch in 0..c {
            let bg = &background.data()[ch * hw..(ch + 1) * hw];
            let plane = video.plane_mut(ch, t);
            for i in 0..hw {
                plane[i] = if raster.mask[i] == 1.0 { raster.rgb[ch * hw + i] } else { bg[i] as f32 };
            }
        }
        masks.plane_mut(0, t).copy_from_slice(&raster.mask);
    }
    Ok(LabeledClip {
        meta: ClipMeta {
            id,
            label,
            bg_family,
            fg_appearance,
            seed,
        },
        video,
        masks: MaskSequence::new(masks)?,
    })
}

fn generate_split(spec: &WorldSpec, families: &[BackgroundPool], split: Split, n: usize, parallel: bool) -> Result<Vec<LabeledClip>> {
    let labels = split_labels(spec, split, n);
    let make = |i: usize| {
        let seed = rng::derive_seed(spec.seed, &[rng::tag("clip"), split as u64, i as u64]);
        render_clip(spec, families, labels[i], format!("{}-{i:05}", split.name()), seed)
    };
    if parallel {
        (0..n).into_par_iter().map(make).collect()
    } else {
        (0..n).map(make).collect()
    }
}

/// Generates train, validation and IID test splits. The result depends only
/// on `spec`, not on thread count.
pub fn generate_world(spec: &WorldSpec) -> Result<World> {
    generate_world_with(spec, true)
}

pub fn generate_world_with(spec: &WorldSpec, parallel: bool) -> Result<World> {
    spec.validate()?;
    let families = spec.family_pools()?;
    Ok(World {
        spec: spec.clone(),
        train: generate_split(spec, &families, Split::Train, spec.train, parallel)?,
        val: generate_split(spec, &families, Split::Val, spec.val, parallel)?,
        test: generate_split(spec, &families, Split::Test, spec.test, parallel)?,
    })
}
