use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::report::{emit_report, EvalReport, MethodReport, ReportFormat, RunMetadata, SeedAccuracy, SplitResult};
use super::training::{evaluate_set, train_main};
use crate::augment::{build_bank, load_bank, save_bank, train_reference, AugmentorConfig, Augmentor, FrameBank, Method};
use crate::bench::{build_scub, build_scuf, domain_gap, BenchKind, BenchmarkSet, DomainGapReport};
use crate::error::{Error, Result};
use crate::io::{load_bench, load_world, read_json, save_bench, save_world, write_json};
use crate::nn::{checkpoint, FrameNet, TemporalNet};
use crate::world::{generate_world, World};

const STAGE_FILE: &str = "stage.json";

/// Written last into a stage directory; its presence marks the stage complete.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageRecord {
    key: String,
    duration_secs: f64,
}

/// SHA-256 over the JSON encoding of `value`, hex encoded.
pub fn content_hash(value: &impl Serialize) -> Result<String> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(value)?)))
}

/// Hash of the config with the output directory left out, so moving a run
/// does not change its identity.
pub fn config_hash(config: &ExperimentConfig) -> Result<String> {
    content_hash(&ExperimentConfig {
        out: PathBuf::new(),
        ..config.clone()
    })
}

fn is_cached(dir: &Path, key: &str) -> bool {
    read_json::<StageRecord>(&dir.join(STAGE_FILE)).is_ok_and(|r| r.key == key)
}

/// A stage output together with its cache key.
pub struct Staged<T> {
    pub key: String,
    pub value: T,
}

/// Runs the experiment stage by stage. Every stage lives in its own
/// directory under `out` and is reused when its recorded key matches.
pub struct Pipeline {
    config: ExperimentConfig,
    out: PathBuf,
    durations: BTreeMap<String, f64>,
    reused: Vec<String>,
    allow_training: bool,
}

impl Pipeline {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let out = config.out.clone();
        Ok(Pipeline {
            config,
            out,
            durations: BTreeMap::new(),
            reused: Vec::new(),
            allow_training: true,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn out(&self) -> &Path {
        &self.out
    }

    /// With `false`, main networks must already be in the cache; used by
    /// evaluation-only commands.
    pub fn allow_training(&mut self, allow: bool) {
        self.allow_training = allow;
    }

    /// Stages that were loaded from the cache rather than computed.
    pub fn reused(&self) -> &[String] {
        &self.reused
    }

    fn stage<T>(
        &mut self,
        name: &str,
        dir: PathBuf,
        key: String,
        compute: impl FnOnce(&Path) -> Result<T>,
        load: impl FnOnce(&Path) -> Result<T>,
    ) -> Result<Staged<T>> {
        let record_path = dir.join(STAGE_FILE);
        if record_path.exists() {
            match read_json::<StageRecord>(&record_path) {
                Ok(record) if record.key == key => match load(&dir) {
                    Ok(value) => {
                        log::info!("{name}: reusing {}", dir.display());
                        self.durations.insert(name.to_string(), record.duration_secs);
                        self.reused.push(name.to_string());
                        return Ok(Staged { key, value });
                    }
                    Err(e) => log::warn!("{name}: cached artifacts unreadable ({e}); recomputing"),
                },
                Ok(_) => log::info!("{name}: inputs changed; recomputing"),
                Err(e) => log::warn!("{name}: bad stage record ({e}); recomputing"),
            }
        }
        let run = || -> Result<(T, f64)> {
            if dir.exists() {
                fs::remove_dir_all(&dir)?;
            }
            fs::create_dir_all(&dir)?;
            let start = Instant::now();
            let value = compute(&dir)?;
            Ok((value, start.elapsed().as_secs_f64()))
        };
        let (value, secs) = run().map_err(|e| e.in_stage(name))?;
        write_json(
            &record_path,
            &StageRecord {
                key: key.clone(),
                duration_secs: secs,
            },
        )
        .map_err(|e| e.in_stage(name))?;
        log::info!("{name}: done in {secs:.1}s");
        self.durations.insert(name.to_string(), secs);
        Ok(Staged { key, value })
    }

    pub fn world(&mut self) -> Result<Staged<World>> {
        let spec = self.config.world.clone();
        let key = content_hash(&("world", &spec))?;
        self.stage(
            "world",
            self.out.join("world"),
            key,
            |dir| {
                let world = generate_world(&spec)?;
                save_world(dir, &world)?;
                Ok(world)
            },
            load_world,
        )
    }

    /// SCUB sets (one per pool) followed by their SCUF counterparts.
    pub fn benches(&mut self, world: &Staged<World>) -> Result<Staged<Vec<BenchmarkSet>>> {
        let synthesis = self.config.synthesis.clone();
        let key = content_hash(&("bench", &world.key, &synthesis))?;
        self.stage(
            "bench",
            self.out.join("bench"),
            key,
            |dir| {
                let scub = build_scub(&world.value.test, &synthesis)?;
                let scuf = scub.iter().map(|s| build_scuf(s, synthesis.seed)).collect::<Result<Vec<_>>>()?;
                let sets: Vec<BenchmarkSet> = scub.into_iter().chain(scuf).collect();
                for s in &sets {
                    save_bench(&dir.join(&s.name), s)?;
                }
                write_json(&dir.join("sets.json"), &sets.iter().map(|s| &s.name).collect::<Vec<_>>())?;
                Ok(sets)
            },
            |dir| {
                let names: Vec<String> = read_json(&dir.join("sets.json"))?;
                names.iter().map(|n| load_bench(&dir.join(n))).collect()
            },
        )
    }

    pub fn reference(&mut self, world: &Staged<World>) -> Result<Staged<FrameNet>> {
        let cfg = self.config.reference.clone();
        let key = content_hash(&("reference", &world.key, &cfg))?;
        let [c, _, h, w] = world.value.spec.dims();
        let classes = world.value.spec.classes;
        let fresh = || FrameNet::new(cfg.encoder.clone(), (c, h, w), classes, cfg.seed);
        self.stage(
            "reference",
            self.out.join("reference"),
            key,
            |dir| {
                let mut net = fresh()?;
                let curve = train_reference(&world.value.train, &mut net, &cfg.optim, cfg.seed)?;
                write_json(&dir.join("loss.json"), &curve)?;
                checkpoint::save(&net, &dir.join("reference.sbck"))?;
                Ok(net)
            },
            |dir| {
                let mut net = fresh()?;
                checkpoint::load_into(&mut net, &dir.join("reference.sbck"))?;
                Ok(net)
            },
        )
    }

    /// The bank for the (single) StillMix entry of the config.
    pub fn bank(&mut self, world: &Staged<World>, reference: &Staged<FrameNet>) -> Result<Staged<FrameBank>> {
        let aug = self
            .config
            .methods
            .iter()
            .find(|m| m.method == Method::Stillmix)
            .cloned()
            .ok_or_else(|| Error::config("no stillmix method configured; a bank is not needed"))?;
        let seed = self.config.reference.seed;
        let key = content_hash(&("bank", &reference.key, aug.tau, aug.bank_capacity, seed))?;
        self.stage(
            "bank",
            self.out.join("bank"),
            key,
            |dir| {
                let bank = build_bank(&reference.value, &world.value.train, aug.tau, aug.bank_capacity, seed)?;
                save_bank(dir, &bank)?;
                Ok(bank)
            },
            load_bank,
        )
    }

    fn model_dir(&self, method: Method, seed: u64) -> PathBuf {
        self.out.join("models").join(method.name()).join(format!("seed-{seed}"))
    }

    pub fn train(
        &mut self,
        world: &Staged<World>,
        bank: Option<&Staged<FrameBank>>,
        aug: &AugmentorConfig,
        seed: u64,
    ) -> Result<Staged<TemporalNet>> {
        let spec = world.value.spec.clone();
        let model = self.config.model.clone();
        let optim = self.config.optim.clone();
        let bank_key = if aug.method == Method::Stillmix {
            Some(bank.ok_or_else(|| Error::config("stillmix training needs a bank"))?.key.clone())
        } else {
            None
        };
        let key = content_hash(&("train", &world.key, &bank_key, &model, aug, &optim, seed))?;
        let [c, t, h, w] = spec.dims();
        let fresh = || TemporalNet::new(model.clone(), (c, t, h, w), spec.classes, seed);
        let name = format!("train/{}/seed-{seed}", aug.method.name());
        let dir = self.model_dir(aug.method, seed);
        if !self.allow_training && !is_cached(&dir, &key) {
            return Err(Error::config(format!(
                "no trained model for {} seed {seed} in {}; train it first",
                aug.method.name(),
                dir.display()
            ))
            .in_stage(&name));
        }
        self.stage(
            &name,
            dir,
            key,
            |dir| {
                let backgrounds = if aug.method == Method::Bgswap { spec.family_pools()? } else { Vec::new() };
                let bank = bank.filter(|_| aug.method == Method::Stillmix).map(|b| b.value.clone());
                let augmentor = Augmentor::new(aug.clone(), spec.classes, bank, backgrounds)?;
                let mut net = fresh()?;
                let curve = train_main(&world.value.train, &mut net, &augmentor, &optim, seed)?;
                write_json(&dir.join("loss.json"), &curve)?;
                checkpoint::save(&net, &dir.join("model.sbck"))?;
                Ok(net)
            },
            |dir| {
                let mut net = fresh()?;
                checkpoint::load_into(&mut net, &dir.join("model.sbck"))?;
                Ok(net)
            },
        )
    }

    /// Accuracy on the IID test split and every benchmark set; empty sets
    /// are left out.
    pub fn evaluate(
        &mut self,
        net: &Staged<TemporalNet>,
        world: &Staged<World>,
        benches: &Staged<Vec<BenchmarkSet>>,
        method: Method,
        seed: u64,
    ) -> Result<Staged<Vec<SetAccuracy>>> {
        let key = content_hash(&("eval", &net.key, &benches.key))?;
        let name = format!("eval/{}/seed-{seed}", method.name());
        self.stage(
            &name,
            self.model_dir(method, seed).join("eval"),
            key,
            |dir| {
                let iid = BenchmarkSet::iid("iid", &world.value.test);
                let mut out = Vec::new();
                for set in std::iter::once(&iid).chain(&benches.value) {
                    if let Some(accuracy) = evaluate_set(&net.value, set)? {
                        out.push(SetAccuracy {
                            set: set.name.clone(),
                            kind: set.kind,
                            pool: set.pool.clone(),
                            accuracy,
                        });
                    }
                }
                write_json(&dir.join("accuracy.json"), &out)?;
                Ok(out)
            },
            |dir| read_json(&dir.join("accuracy.json")),
        )
    }

    pub fn domain_gaps(&mut self, world: &Staged<World>, benches: &Staged<Vec<BenchmarkSet>>) -> Result<Option<Vec<DomainGapReport>>> {
        let Some(probe) = self.config.probe.clone() else {
            return Ok(None);
        };
        let key = content_hash(&("probe", &world.key, &benches.key, &probe))?;
        let staged = self.stage(
            "probe",
            self.out.join("probe"),
            key,
            |dir| {
                let iid = BenchmarkSet::iid("iid", &world.value.test);
                let scub: Vec<&BenchmarkSet> = benches.value.iter().filter(|s| s.kind == BenchKind::Scub).collect();
                let gaps = domain_gap(&world.value.train, &iid, &scub, &probe)?;
                write_json(&dir.join("gaps.json"), &gaps)?;
                Ok(gaps)
            },
            |dir| read_json(&dir.join("gaps.json")),
        )?;
        Ok(Some(staged.value))
    }

    /// Trains every configured method for every seed.
    pub fn train_all(&mut self) -> Result<Vec<(Method, u64, Staged<TemporalNet>)>> {
        let world = self.world()?;
        let bank = self.bank_if_needed(&world)?;
        let mut out = Vec::new();
        for aug in self.config.methods.clone() {
            for seed in self.config.seeds.clone() {
                let net = self.train(&world, bank.as_ref(), &aug, seed)?;
                out.push((aug.method, seed, net));
            }
        }
        Ok(out)
    }

    fn bank_if_needed(&mut self, world: &Staged<World>) -> Result<Option<Staged<FrameBank>>> {
        if !self.config.needs_bank() {
            return Ok(None);
        }
        let reference = self.reference(world)?;
        Ok(Some(self.bank(world, &reference)?))
    }

    /// The whole pipeline; writes `report.json`, `report.csv` and
    /// `report.txt` into the output directory.
    pub fn run(&mut self) -> Result<EvalReport> {
        let world = self.world()?;
        let benches = self.benches(&world)?;
        let bank = self.bank_if_needed(&world)?;
        let methods = self.config.methods.clone();
        let seeds = self.config.seeds.clone();
        let mut rows = Vec::new();
        for aug in &methods {
            let mut per_set: Vec<(SetAccuracy, Vec<SeedAccuracy>)> = Vec::new();
            for &seed in &seeds {
                let net = self.train(&world, bank.as_ref(), aug, seed)?;
                let accs = self.evaluate(&net, &world, &benches, aug.method, seed)?;
                for a in accs.value {
                    let entry = SeedAccuracy { seed, accuracy: a.accuracy };
                    match per_set.iter_mut().find(|(s, _)| s.set == a.set) {
                        Some((_, v)) => v.push(entry),
                        None => per_set.push((a, vec![entry])),
                    }
                }
            }
            let splits = per_set
                .into_iter()
                .map(|(s, v)| SplitResult::new(s.set, s.kind, s.pool, v))
                .collect::<Result<_>>()?;
            rows.push(MethodReport {
                method: aug.method.name().to_string(),
                splits,
            });
        }
        let domain_gaps = self.domain_gaps(&world, &benches)?.unwrap_or_default();
        let report = EvalReport {
            methods: rows,
            domain_gaps,
            metadata: RunMetadata {
                config_hash: config_hash(&self.config)?,
                seeds,
                durations: self.durations.clone(),
            },
        };
        emit_report(&report, &self.out, &ReportFormat::ALL).map_err(|e| e.in_stage("report"))?;
        Ok(report)
    }
}

/// Accuracy of one network on one evaluation set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetAccuracy {
    pub set: String,
    pub kind: BenchKind,
    pub pool: Option<String>,
    pub accuracy: f64,
}

pub fn run_experiment(config: ExperimentConfig) -> Result<EvalReport> {
    Pipeline::new(config)?.run()
}
