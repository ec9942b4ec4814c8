//! Dataset directories: `manifest.json` plus one `.sbvd` per clip (and one
//! per mask sequence).

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{read_json, read_sbvd, write_json, write_sbvd};
use crate::bench::{BenchClip, BenchKind, BenchmarkSet};
use crate::error::{Error, Result};
use crate::video::MaskSequence;
use crate::world::{ClipMeta, LabeledClip, Split, World, WorldSpec};

pub const MANIFEST: &str = "manifest.json";
const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestClip {
    pub id: String,
    pub label: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bg_family: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fg_appearance: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Clip file, relative to the dataset directory.
    pub video: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_clip: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    /// `world`, `SCUB`, `SCUF` or `IID`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub world: Option<WorldSpec>,
    pub splits: BTreeMap<String, Vec<ManifestClip>>,
}

fn kind_name(kind: BenchKind) -> &'static str {
    match kind {
        BenchKind::Scub => "SCUB",
        BenchKind::Scuf => "SCUF",
        BenchKind::Iid => "IID",
    }
}

fn read_manifest(dir: &Path) -> Result<Manifest> {
    let m: Manifest = read_json(&dir.join(MANIFEST))?;
    if m.version != MANIFEST_VERSION {
        return Err(Error::format(dir.join(MANIFEST), format!("unsupported manifest version {}", m.version)));
    }
    Ok(m)
}

pub fn save_world(dir: &Path, world: &World) -> Result<()> {
    let mut splits = BTreeMap::new();
    for split in Split::ALL {
        let clips = world.split(split);
        clips.par_iter().try_for_each(|c| -> Result<()> {
            write_sbvd(&dir.join(split.name()).join(format!("{}.sbvd", c.meta.id)), &c.video)?;
            write_sbvd(&dir.join(split.name()).join(format!("{}.mask.sbvd", c.meta.id)), c.masks.video())
        })?;
        let entries = clips
            .iter()
            .map(|c| ManifestClip {
                id: c.meta.id.clone(),
                label: c.meta.label,
                bg_family: Some(c.meta.bg_family),
                fg_appearance: Some(c.meta.fg_appearance),
                seed: Some(c.meta.seed),
                video: format!("{}/{}.sbvd", split.name(), c.meta.id),
                mask: Some(format!("{}/{}.mask.sbvd", split.name(), c.meta.id)),
                source_clip: None,
                background: None,
                frame: None,
            })
            .collect();
        splits.insert(split.name().to_string(), entries);
    }
    write_json(
        &dir.join(MANIFEST),
        &Manifest {
            version: MANIFEST_VERSION,
            kind: "world".into(),
            name: None,
            pool: None,
            world: Some(world.spec.clone()),
            splits,
        },
    )
}

pub fn load_world(dir: &Path) -> Result<World> {
    let m = read_manifest(dir)?;
    let path = dir.join(MANIFEST);
    if m.kind != "world" {
        return Err(Error::format(&path, format!("expected a world dataset, found `{}`", m.kind)));
    }
    let spec = m.world.clone().ok_or_else(|| Error::format(&path, "world manifest lacks its spec"))?;
    let load_split = |split: Split| -> Result<Vec<LabeledClip>> {
        let entries = m.splits.get(split.name()).map(Vec::as_slice).unwrap_or(&[]);
        entries
            .par_iter()
            .map(|e| {
                let missing = |field: &str| Error::format(&path, format!("clip {} lacks `{field}`", e.id));
                let mask_file = e.mask.as_ref().ok_or_else(|| missing("mask"))?;
                Ok(LabeledClip {
                    meta: ClipMeta {
                        id: e.id.clone(),
                        label: e.label,
                        bg_family: e.bg_family.ok_or_else(|| missing("bg_family"))?,
                        fg_appearance: e.fg_appearance.ok_or_else(|| missing("fg_appearance"))?,
                        seed: e.seed.ok_or_else(|| missing("seed"))?,
                    },
                    video: read_sbvd(&dir.join(&e.video))?,
                    masks: MaskSequence::new(read_sbvd(&dir.join(mask_file))?)?,
                })
            })
            .collect()
    };
    Ok(World {
        train: load_split(Split::Train)?,
        val: load_split(Split::Val)?,
        test: load_split(Split::Test)?,
        spec,
    })
}

pub fn save_bench(dir: &Path, set: &BenchmarkSet) -> Result<()> {
    set.clips.par_iter().enumerate().try_for_each(|(k, c)| {
        write_sbvd(&dir.join("clips").join(format!("{k:06}.sbvd")), &c.video)
    })?;
    let entries = set
        .clips
        .iter()
        .enumerate()
        .map(|(k, c)| ManifestClip {
            id: format!("{}-{k:06}", set.name),
            label: c.label,
            bg_family: None,
            fg_appearance: None,
            seed: None,
            video: format!("clips/{k:06}.sbvd"),
            mask: None,
            source_clip: Some(c.source_clip.clone()),
            background: c.background,
            frame: c.frame,
        })
        .collect();
    write_json(
        &dir.join(MANIFEST),
        &Manifest {
            version: MANIFEST_VERSION,
            kind: kind_name(set.kind).into(),
            name: Some(set.name.clone()),
            pool: set.pool.clone(),
            world: None,
            splits: BTreeMap::from([("clips".to_string(), entries)]),
        },
    )
}

pub fn load_bench(dir: &Path) -> Result<BenchmarkSet> {
    let m = read_manifest(dir)?;
    let path = dir.join(MANIFEST);
    let kind = match m.kind.as_str() {
        "SCUB" => BenchKind::Scub,
        "SCUF" => BenchKind::Scuf,
        "IID" => BenchKind::Iid,
        other => return Err(Error::format(&path, format!("`{other}` is not a benchmark kind"))),
    };
    let entries = m.splits.get("clips").map(Vec::as_slice).unwrap_or(&[]);
    let clips = entries
        .par_iter()
        .map(|e| {
            Ok(BenchClip {
                video: read_sbvd(&dir.join(&e.video))?,
                label: e.label,
                source_clip: e.source_clip.clone().unwrap_or_else(|| e.id.clone()),
                background: e.background,
                frame: e.frame,
            })
        })
        .collect::<Result<_>>()?;
    Ok(BenchmarkSet {
        name: m.name.unwrap_or_else(|| m.kind.to_lowercase()),
        kind,
        pool: m.pool,
        clips,
    })
}
