//! SCUB and SCUF benchmark synthesis and the static-probe domain gap.

mod gap;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use gap::{domain_gap, time_average, DomainGapReport, ProbeSpec};

use crate::error::{Error, Result};
use crate::pools::{default_ood_pools, BackgroundPool, PoolConfig};
use crate::rng;
use crate::video::{MaskSequence, Video};
use crate::world::LabeledClip;

/// Replaces the background of `video` with `bg` wherever the mask is 0:
/// `out_t = m_t * x_t + (1 - m_t) * bg`, evaluated as an exact select.
/// `bg` is a one-frame clip reused for every frame.
pub fn composite(video: &Video, masks: &MaskSequence, bg: &Video) -> Result<Video> {
    let [c, t, h, w] = video.dims();
    let mv = masks.video();
    if mv.dims() != [1, t, h, w] {
        return Err(Error::dim(format!(
            "masks {:?} do not match video {:?}",
            mv.dims(),
            video.dims()
        )));
    }
    if bg.dims() != [c, 1, h, w] {
        return Err(Error::dim(format!(
            "background {:?} does not match video {:?}",
            bg.dims(),
            video.dims()
        )));
    }
    if let Some(v) = mv.data().iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::Validation(format!("mask value {v} is not binary")));
    }
    let mut out = video.clone();
    for ch in 0..c {
        let back = bg.plane(ch, 0);
        for ti in 0..t {
            let m = masks.plane(ti);
            for ((o, &mi), &b) in out.plane_mut(ch, ti).iter_mut().zip(m).zip(back) {
                if mi == 0.0 {
                    *o = b;
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BenchKind {
    Scub,
    Scuf,
    /// Unmodified test clips, wrapped so they can be scored like the others.
    Iid,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchClip {
    pub video: Video,
    pub label: usize,
    pub source_clip: String,
    /// Index of the background drawn from the pool.
    pub background: Option<u64>,
    /// Frame repeated by SCUF.
    pub frame: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkSet {
    pub name: String,
    pub kind: BenchKind,
    pub pool: Option<String>,
    pub clips: Vec<BenchClip>,
}

impl BenchmarkSet {
    pub fn iid(name: impl Into<String>, clips: &[LabeledClip]) -> BenchmarkSet {
        BenchmarkSet {
            name: name.into(),
            kind: BenchKind::Iid,
            pool: None,
            clips: clips
                .iter()
                .map(|c| BenchClip {
                    video: c.video.clone(),
                    label: c.label(),
                    source_clip: c.meta.id.clone(),
                    background: None,
                    frame: None,
                })
                .collect(),
        }
    }

    pub fn labels(&self) -> Vec<usize> {
        self.clips.iter().map(|c| c.label).collect()
    }

    pub fn videos(&self) -> Vec<&Video> {
        self.clips.iter().map(|c| &c.video).collect()
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }
}

fn default_m() -> usize {
    5
}

/// How SCUB sets are drawn: `m` backgrounds per source clip from each pool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisSpec {
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_pools")]
    pub pools: Vec<PoolConfig>,
    #[serde(default)]
    pub seed: u64,
}

fn default_pools() -> Vec<PoolConfig> {
    default_ood_pools(0)
}

impl Default for SynthesisSpec {
    fn default() -> Self {
        SynthesisSpec {
            m: default_m(),
            pools: default_pools(),
            seed: 0,
        }
    }
}

/// A resolved pool with its configured name.
#[derive(Clone, Debug)]
pub struct NamedPool {
    pub name: String,
    pub pool: BackgroundPool,
}

impl SynthesisSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::config("m (backgrounds per clip) must be at least 1"));
        }
        if self.pools.is_empty() {
            return Err(Error::config("synthesis needs at least one background pool"));
        }
        let mut names: Vec<&str> = self.pools.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::config(format!("pool name `{}` is used twice", w[0])));
        }
        Ok(())
    }

    pub fn resolve(&self, height: usize, width: usize) -> Result<Vec<NamedPool>> {
        self.validate()?;
        self.pools
            .iter()
            .map(|p| {
                Ok(NamedPool {
                    name: p.name.clone(),
                    pool: BackgroundPool::from_config(p, height, width)?,
                })
            })
            .collect()
    }
}

/// Builds one SCUB set per pool in `spec`.
pub fn build_scub(clips: &[LabeledClip], spec: &SynthesisSpec) -> Result<Vec<BenchmarkSet>> {
    let first = clips.first().ok_or_else(|| Error::EmptyInput("no source clips".into()))?;
    let pools = spec.resolve(first.video.height(), first.video.width())?;
    build_scub_with(clips, spec.m, &pools, spec.seed)
}

/// SCUB with already resolved pools. Clip `i` paired with background `j`
/// of pool `p` uses background index `derive(seed, p, i, j)`.
pub fn build_scub_with(clips: &[LabeledClip], m: usize, pools: &[NamedPool], seed: u64) -> Result<Vec<BenchmarkSet>> {
    if m == 0 {
        return Err(Error::config("m (backgrounds per clip) must be at least 1"));
    }
    pools
        .iter()
        .map(|named| {
            let pool_tag = rng::tag(&named.name);
            let made: Vec<Vec<BenchClip>> = clips
                .par_iter()
                .enumerate()
                .map(|(i, clip)| {
                    (0..m)
                        .map(|j| {
                            let index = rng::derive_seed(seed, &[rng::tag("scub"), pool_tag, i as u64, j as u64]);
                            let bg = Video::from_image(&named.pool.sample(index))?;
                            Ok(BenchClip {
                                video: composite(&clip.video, &clip.masks, &bg)?,
                                label: clip.label(),
                                source_clip: clip.meta.id.clone(),
                                background: Some(index),
                                frame: None,
                            })
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<_>>()?;
            Ok(BenchmarkSet {
                name: format!("scub-{}", named.name),
                kind: BenchKind::Scub,
                pool: Some(named.name.clone()),
                clips: made.into_iter().flatten().collect(),
            })
        })
        .collect()
}

/// Picks one frame of every SCUB clip uniformly at random (independently
/// per clip) and repeats it over time.
pub fn build_scuf(scub: &BenchmarkSet, seed: u64) -> Result<BenchmarkSet> {
    if scub.kind != BenchKind::Scub {
        return Err(Error::config(format!("SCUF is built from a SCUB set, got {:?}", scub.kind)));
    }
    let set_tag = rng::tag(&scub.name);
    let clips = scub
        .clips
        .par_iter()
        .enumerate()
        .map(|(k, c)| {
            let frames = c.video.frames();
            let t = rng::stream(seed, &[rng::tag("scuf"), set_tag, k as u64]).random_range(0..frames);
            Ok(BenchClip {
                video: Video::tile(&c.video.frame(t)?, frames)?,
                frame: Some(t),
                ..c.clone()
            })
        })
        .collect::<Result<_>>()?;
    let name = match scub.name.strip_prefix("scub-") {
        Some(rest) => format!("scuf-{rest}"),
        None => format!("scuf-{}", scub.name),
    };
    Ok(BenchmarkSet {
        name,
        kind: BenchKind::Scuf,
        pool: scub.pool.clone(),
        clips,
    })
}
