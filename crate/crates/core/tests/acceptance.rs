//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. The experimental criteria train 25 networks on one core in about
//! an hour. Set STILLBENCH_ACCEPTANCE_DIR to keep (and reuse) the stage cache.


use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Beta;

use stillbench::augment::{self, build_bank, mix, AugmentorConfig, FrameBank, Method, Sample};
use stillbench::bench::{build_scuf, composite, domain_gap, BenchKind, BenchmarkSet, ProbeSpec};
use stillbench::harness::{EvalReport, ExperimentConfig, Pipeline, ReferenceConfig};
use stillbench::nn::FrameNet;
use stillbench::rng;
use stillbench::train::OptimConfig;
use stillbench::world::oracle::MotionOracle;
use stillbench::world::{generate_world_with, World, WorldSpec};
use stillbench::{Error, MaskSequence, Video};

type Verdict = std::result::Result<String, String>;

fn ensure(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn runs_dir() -> (PathBuf, Option<tempfile::TempDir>) {
    match std::env::var_os("STILLBENCH_ACCEPTANCE_DIR") {
        Some(dir) => (PathBuf::from(dir), None),
        None => {
            let tmp = tempfile::tempdir().expect("temporary directory");
            (tmp.path().to_path_buf(), Some(tmp))
        }
    }
}

// ---------------------------------------------------------------- exact suite

fn c1_composite() -> Verdict {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    for trial in 0..1000 {
        let (c, t, h, w) = (r.random_range(1..=3), r.random_range(1..=6), r.random_range(1..=9), r.random_range(1..=9));
        let video = Video::new([c, t, h, w], (0..c * t * h * w).map(|_| r.random()).collect()).map_err(err)?;
        let bg = Video::new([c, 1, h, w], (0..c * h * w).map(|_| r.random()).collect()).map_err(err)?;
        let bits: Vec<f32> = (0..t * h * w).map(|_| if r.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
        let masks = MaskSequence::new(Video::new([1, t, h, w], bits).map_err(err)?).map_err(err)?;
        let out = composite(&video, &masks, &bg).map_err(err)?;
        for ch in 0..c {
            for ti in 0..t {
                for y in 0..h {
                    for x in 0..w {
                        let inside = masks.video().at(0, ti, y, x) == 1.0;
                        let want = if inside { video.at(ch, ti, y, x) } else { bg.at(ch, 0, y, x) };
                        if out.at(ch, ti, y, x).to_bits() != want.to_bits() {
                            return Err(format!("triple {trial}: pixel ({ch},{ti},{y},{x}) differs"));
                        }
                    }
                }
            }
        }
    }
    Ok("1000 random triples bit-exact".into())
}

fn c2_scuf(benches: &[BenchmarkSet]) -> Verdict {
    let scub: Vec<&BenchmarkSet> = benches.iter().filter(|s| s.kind == BenchKind::Scub).collect();
    let scuf: Vec<&BenchmarkSet> = benches.iter().filter(|s| s.kind == BenchKind::Scuf).collect();
    ensure(!scuf.is_empty() && scuf.len() == scub.len(), format!("{} SCUB and {} SCUF sets", scub.len(), scuf.len()))?;
    let mut clips = 0;
    for set in &scuf {
        for c in &set.clips {
            if !c.video.frames_identical() {
                return Err(format!("{}: clip {} has motion", set.name, c.source_clip));
            }
            clips += 1;
        }
        let again = build_scuf(&BenchmarkSet { kind: BenchKind::Scub, ..(*set).clone() }, 99).map_err(err)?;
        if again.clips.iter().zip(&set.clips).any(|(a, b)| a.video != b.video) {
            return Err(format!("{}: a second SCUF pass changed a clip", set.name));
        }
    }
    Ok(format!("{clips} SCUF clips static, second pass identical"))
}

fn c3_stillmix(world: &World, bank: &FrameBank, reference: &FrameNet, capacity: usize) -> Verdict {
    let x = Video::new([1, 2, 1, 1], vec![0.8, 0.8]).map_err(err)?;
    let z = Video::new([1, 1, 1, 1], vec![0.4]).map_err(err)?;
    let hand = mix::stillmix_with(&x, &z, 0.25).map_err(err)?;
    ensure(hand.data().iter().all(|&v| (f64::from(v) - 0.5).abs() < 1e-12), format!("hand value {:?}", hand.data()))?;
    let clip = &world.train[0];
    let frame = &bank.entries[0].frame;
    ensure(mix::stillmix_with(&clip.video, frame, 1.0).map_err(err)? == clip.video, "lambda = 1 is not the identity".into())?;
    let tiled = Video::tile(frame, clip.video.frames()).map_err(err)?;
    ensure(mix::stillmix_with(&clip.video, frame, 0.0).map_err(err)? == tiled, "lambda = 0 is not the tiled frame".into())?;
    let beta = Beta::new(2.0, 2.0).map_err(err)?;
    let mut r = rng::stream(5, &[rng::tag("c3")]);
    for c in world.train.iter().take(50) {
        let s = Sample { video: &c.video, label: c.label(), masks: None };
        let out = augment::stillmix(&s, bank, &beta, world.spec.classes, &mut r).map_err(err)?;
        if out.label != augment::one_hot(c.label(), world.spec.classes).map_err(err)? {
            return Err(format!("label of {} changed", c.meta.id));
        }
    }
    let lowest = bank.entries.iter().map(|e| e.confidence).fold(f64::INFINITY, f64::min);
    ensure(lowest > bank.tau, format!("bank entry with p = {lowest} <= tau = {}", bank.tau))?;
    match build_bank(reference, &world.train, 1.0, capacity, 0) {
        Err(Error::EmptyBank { .. }) => {}
        other => return Err(format!("tau = 1 gave {:?} instead of an empty-bank error", other.map(|b| b.len()))),
    }
    Ok(format!(
        "identities hold, hand value 0.5, labels kept; {} bank frames all p > {} (min {lowest:.3}); tau = 1 empty",
        bank.len(),
        bank.tau
    ))
}

fn c4_baselines() -> Verdict {
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let dims = [3, 4, 32, 32];
    let n: usize = dims.iter().product();
    let a = Video::new(dims, (0..n).map(|_| r.random()).collect()).map_err(err)?;
    let b = Video::new(dims, (0..n).map(|_| r.random()).collect()).map_err(err)?;
    for _ in 0..200 {
        let (la, lb, lambda) = (r.random_range(0..6), r.random_range(0..6), r.random::<f64>());
        let m = mix::mixup_with(&a, la, &b, lb, 6, lambda).map_err(err)?;
        let s: f64 = m.label.iter().sum();
        ensure((s - 1.0).abs() < 1e-12, format!("mixup label sum {s}"))?;
        let (bh, bw) = (r.random_range(0..=32), r.random_range(0..=32));
        let region = (r.random_range(0..=32 - bh), r.random_range(0..=32 - bw), bh, bw);
        let v = mix::videomix_with(&a, la, &b, lb, 6, region).map_err(err)?;
        let s: f64 = v.label.iter().sum();
        ensure((s - 1.0).abs() < 1e-12, format!("videomix label sum {s}"))?;
    }
    let v = mix::videomix_with(&a, 0, &b, 1, 6, (8, 8, 16, 16)).map_err(err)?;
    ensure(v.label[0] == 0.75 && v.label[1] == 0.25, format!("16x16 box label {:?}", &v.label[..2]))?;
    for k in 0..4 {
        let flat = mix::be_with(&a, k, 1.0).map_err(err)?;
        let var = flat.temporal_variance();
        ensure(var == 0.0, format!("BE mu = 1 leaves temporal variance {var}"))?;
    }
    Ok("label sums 1 over 200 draws; 16x16 on 32x32 gives 0.75; BE mu = 1 variance 0".into())
}

fn c5_gradients() -> Verdict {
    let mut worst: f64 = 0.0;
    for (name, case) in gradcheck::CASES {
        worst = worst.max(case().map_err(|e| format!("{name}: {e}"))?);
    }
    Ok(format!("{} op groups, worst relative error {worst:.2e} (< {:.0e})", gradcheck::CASES.len(), gradcheck::TOLERANCE))
}

fn tiny_config(out: &Path) -> ExperimentConfig {
    let mut config = ExperimentConfig::default();
    config.world = WorldSpec { train: 48, val: 12, test: 24, height: 16, width: 16, ..WorldSpec::default() };
    config.synthesis.m = 2;
    // a two-epoch reference is rarely confident; admit every frame
    config.methods = vec![AugmentorConfig::with_method(Method::None), AugmentorConfig { tau: 0.0, ..AugmentorConfig::with_method(Method::Stillmix) }];
    config.seeds = vec![3];
    config.optim = OptimConfig { epochs: 2, ..config.optim };
    config.reference = ReferenceConfig { optim: OptimConfig { epochs: 2, ..config.reference.optim }, ..config.reference };
    if let Some(probe) = config.probe.as_mut() {
        probe.optim.epochs = 2;
    }
    config.out = out.to_path_buf();
    config
}

fn files_under(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).into_iter().flatten().flatten() {
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
                // stage records and the JSON report carry wall-clock durations
                if name != "stage.json" && name != "report.json" {
                    out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&path).unwrap_or_default());
                }
            }
        }
    }
    out
}

fn without_durations(mut report: EvalReport) -> EvalReport {
    report.metadata.durations.clear();
    report
}

fn c6_determinism(root: &Path) -> Verdict {
    let spec = WorldSpec { train: 60, val: 12, test: 30, rho_fg: 0.5, ..WorldSpec::default() };
    let serial = generate_world_with(&spec, false).map_err(err)?;
    ensure(serial == generate_world_with(&spec, true).map_err(err)?, "serial and parallel worlds differ".into())?;
    let mut reports = Vec::new();
    let mut trees = Vec::new();
    for threads in [1, 3] {
        let out = root.join(format!("determinism-{threads}"));
        if out.exists() {
            std::fs::remove_dir_all(&out).map_err(err)?;
        }
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(err)?;
        let report = pool.install(|| Pipeline::new(tiny_config(&out))?.run()).map_err(err)?;
        reports.push(without_durations(report));
        trees.push(files_under(&out));
    }
    ensure(reports[0] == reports[1], "reports differ between 1 and 3 threads".into())?;
    let (a, b) = (&trees[0], &trees[1]);
    ensure(a.keys().eq(b.keys()), "artifact lists differ".into())?;
    if let Some(path) = a.keys().find(|k| a[*k] != b[*k]) {
        return Err(format!("{} differs between 1 and 3 threads", path.display()));
    }
    let weights = a.keys().filter(|k| k.extension().is_some_and(|e| e == "sbck")).count();
    let bank = a.keys().filter(|k| k.starts_with("bank")).count();
    Ok(format!(
        "worlds equal serial/parallel; {} artifacts ({weights} checkpoints, {bank} bank files) and reports bit-identical at 1 and 3 threads",
        a.len()
    ))
}

// ---------------------------------------------------------- experimental suite

struct Experiment {
    report: EvalReport,
    world: World,
    benches: Vec<BenchmarkSet>,
    bank: FrameBank,
    reference: FrameNet,
    config: ExperimentConfig,
}

fn experiment(config: ExperimentConfig) -> std::result::Result<Experiment, String> {
    let start = Instant::now();
    let mut p = Pipeline::new(config.clone()).map_err(err)?;
    let report = p.run().map_err(err)?;
    let world = p.world().map_err(err)?;
    let benches = p.benches(&world).map_err(err)?.value;
    let reference = p.reference(&world).map_err(err)?;
    let bank = p.bank(&world, &reference).map_err(err)?.value;
    println!("  ({} finished in {:.0}s)", config.out.display(), start.elapsed().as_secs_f64());
    Ok(Experiment { report, world: world.value, benches, bank, reference: reference.value, config })
}

fn means(report: &EvalReport, method: &str) -> std::result::Result<(f64, f64, f64), String> {
    let m = report.method(method).ok_or_else(|| format!("no {method} row in the report"))?;
    let get = |kind| m.mean_over(kind).ok_or_else(|| format!("{method}: no {kind:?} sets"));
    Ok((get(BenchKind::Iid)?, get(BenchKind::Scub)?, get(BenchKind::Scuf)?))
}

fn c7_bias(e: &Experiment) -> Verdict {
    let (iid, scub, _) = means(&e.report, "none")?;
    let seeds = e.config.seeds.len();
    ensure(
        seeds >= 5 && iid >= 0.85 && iid - scub >= 0.25,
        format!("no-aug over {seeds} seeds: IID {:.1}%, SCUB {:.1}% (drop {:.1} points)", 100.0 * iid, 100.0 * scub, 100.0 * (iid - scub)),
    )
}

fn c8_stillmix_scub(e: &Experiment) -> Verdict {
    let (iid0, scub0, _) = means(&e.report, "none")?;
    let (iid1, scub1, _) = means(&e.report, "stillmix")?;
    let per_seed = |method: &str| -> String {
        let m = e.report.method(method).unwrap();
        let scub: Vec<_> = m.splits.iter().filter(|s| s.kind == BenchKind::Scub).collect();
        e.config
            .seeds
            .iter()
            .enumerate()
            .map(|(i, _)| format!("{:.1}", 100.0 * scub.iter().map(|s| s.per_seed[i].accuracy).sum::<f64>() / scub.len() as f64))
            .collect::<Vec<_>>()
            .join("/")
    };
    ensure(
        scub1 - scub0 >= 0.10 && (iid1 - iid0).abs() <= 0.03,
        format!(
            "SCUB {:.1}% vs {:.1}% (gain {:+.1} points; per seed {} vs {}); IID {:.1}% vs {:.1}% ({:+.1})",
            100.0 * scub1,
            100.0 * scub0,
            100.0 * (scub1 - scub0),
            per_seed("stillmix"),
            per_seed("none"),
            100.0 * iid1,
            100.0 * iid0,
            100.0 * (iid1 - iid0)
        ),
    )
}

fn c9_stillmix_scuf(e: &Experiment) -> Verdict {
    let (_, _, none) = means(&e.report, "none")?;
    let (_, _, still) = means(&e.report, "stillmix")?;
    let (_, _, swap) = means(&e.report, "bgswap")?;
    ensure(
        still < none && still < swap,
        format!(
            "rho_fg = rho_bg = 0.95: SCUF stillmix {:.1}%, none {:.1}%, bgswap {:.1}%",
            100.0 * still,
            100.0 * none,
            100.0 * swap
        ),
    )
}

fn c10_gap(e: &Experiment) -> Verdict {
    let scub: Vec<&BenchmarkSet> = e.benches.iter().filter(|s| s.kind == BenchKind::Scub).collect();
    let gaps: Vec<String> = e.report.domain_gaps.iter().map(|g| format!("{} {:.2}", g.set, g.gap)).collect();
    ensure(
        e.report.domain_gaps.len() == scub.len() && e.report.domain_gaps.iter().all(|g| g.gap > 1.0),
        format!("G_scene: {}", gaps.join(", ")),
    )?;
    let iid = BenchmarkSet::iid("iid", &e.world.test);
    let spec = e.config.probe.clone().unwrap_or_else(ProbeSpec::default);
    let same = domain_gap(&e.world.train, &iid, &[&iid], &spec).map_err(err)?;
    ensure(same[0].gap == 0.0, format!("IID against itself gives {}", same[0].gap))?;
    Ok(format!("G_scene: {}; IID against itself exactly 0", gaps.join(", ")))
}

fn c11_oracle(e: &Experiment) -> Verdict {
    let w = &e.world;
    let oracle = MotionOracle::fit(w.train.iter().map(|c| (&c.masks, c.label())), w.spec.classes).map_err(err)?;
    let iid = oracle.accuracy(w.test.iter().map(|c| (&c.masks, c.label()))).map_err(err)?;
    let by_id: BTreeMap<&str, &MaskSequence> = w.test.iter().map(|c| (c.meta.id.as_str(), &c.masks)).collect();
    let mut scub_pairs = Vec::new();
    for set in e.benches.iter().filter(|s| s.kind == BenchKind::Scub) {
        for c in &set.clips {
            let masks = by_id.get(c.source_clip.as_str()).ok_or_else(|| format!("unknown source clip {}", c.source_clip))?;
            scub_pairs.push((*masks, c.label));
        }
    }
    let scub = oracle.accuracy(scub_pairs.iter().copied()).map_err(err)?;
    ensure(iid == 1.0 && scub == 1.0, format!("IID {:.2}%, SCUB {:.2}% ({} clips)", 100.0 * iid, 100.0 * scub, scub_pairs.len()))
}

fn line(n: usize, name: &str, v: &Verdict) -> String {
    match v {
        Ok(d) => format!("criterion {n:>2} PASS  {name}: {d}"),
        Err(d) => format!("criterion {n:>2} FAIL  {name}: {d}"),
    }
}

fn main() -> ExitCode {
    let (root, _guard) = runs_dir();
    let mut results: BTreeMap<usize, (String, Verdict)> = BTreeMap::new();
    let mut report = |n: usize, name: &str, v: Verdict| {
        println!("{}", line(n, name, &v));
        results.insert(n, (name.to_string(), v));
    };
    report(1, "compositing bit-exactness", c1_composite());
    report(4, "baseline algebra", c4_baselines());
    report(5, "autodiff", c5_gradients());
    report(6, "determinism", c6_determinism(&root));

    let bias = ExperimentConfig { out: root.join("background"), ..ExperimentConfig::default() };
    match experiment(bias) {
        Ok(e) => {
            report(2, "SCUF zero motion", c2_scuf(&e.benches));
            report(3, "StillMix algebra and bank law", c3_stillmix(&e.world, &e.bank, &e.reference, e.config.methods.iter().find(|m| m.method == Method::Stillmix).map_or(256, |m| m.bank_capacity)));
            report(7, "bias emergence", c7_bias(&e));
            report(8, "StillMix SCUB gain", c8_stillmix_scub(&e));
            report(10, "domain gap", c10_gap(&e));
            report(11, "motion oracle", c11_oracle(&e));
            println!("{}", e.report.to_table());
        }
        Err(msg) => {
            for (n, name) in [(2, "SCUF zero motion"), (3, "StillMix algebra"), (7, "bias emergence"), (8, "StillMix SCUB gain"), (10, "domain gap"), (11, "motion oracle")] {
                report(n, name, Err(format!("experiment failed: {msg}")));
            }
        }
    }

    let mut fg = ExperimentConfig { out: root.join("foreground"), ..ExperimentConfig::default() };
    fg.world.rho_fg = 0.95;
    fg.methods = [Method::None, Method::Stillmix, Method::Bgswap].map(AugmentorConfig::with_method).to_vec();
    match experiment(fg) {
        Ok(e) => {
            report(9, "StillMix SCUF reduction", c9_stillmix_scuf(&e));
            println!("{}", e.report.to_table());
        }
        Err(msg) => report(9, "StillMix SCUF reduction", Err(format!("experiment failed: {msg}"))),
    }

    println!("\nsummary");
    for (n, (name, v)) in &results {
        println!("{}", line(*n, name, v));
    }
    let failed = results.values().filter(|(_, v)| v.is_err()).count();
    if failed == 0 {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria fail");
        ExitCode::FAILURE
    }
}
