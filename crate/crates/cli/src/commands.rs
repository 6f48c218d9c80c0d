use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use aes3d_core::ablation::PRESETS;
use aes3d_core::annotation::{build_label_file, read_annotation_csv, write_annotation_csv, AnnotationStats, LabelVariant};
use aes3d_core::evaluation::{
    aggregate_seed_runs, calibrated_evaluation, mae, rmse, trivial_predictor, Calibration, MeanStd, MetricsReport,
    TrivialKind,
};
use aes3d_core::ingest::camera::write_camera_manifest;
use aes3d_core::ingest::write_gaussian_ply;
use aes3d_core::model::SceneSample;
use aes3d_core::synth::{generate_dataset, synth_annotations, SynthConfig};
use aes3d_core::training::trainer::eval_seed;
use aes3d_core::training::{evaluate, make_split, train, Checkpoint, EpochLog, PreparedScene, TrainConfig};
use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::config::{require, Effective};
use crate::data::{self, write_json, IndexEntry, SceneIndex};
use crate::{Invalid, Meta};

fn meta(eff: &Effective, command: &str, seeds: &[u64]) -> Meta {
    Meta { command: command.into(), config_hash: eff.hash.clone(), seeds: seeds.to_vec() }
}

fn seed_dir(eff: &Effective, seed: u64) -> PathBuf {
    eff.output_dir().join(format!("seed_{seed}"))
}

pub fn ingest(eff: &Effective) -> anyhow::Result<()> {
    let dir = require(&eff.run.paths.scene_dir, "scene directory", "--scene-dir")?;
    let manifest = data::manifest(eff)?;
    let (ok, errors) = data::scan(dir, &manifest)?;
    let scenes: BTreeMap<String, IndexEntry> = ok
        .into_iter()
        .map(|(file, s)| (s.scene_id.clone(), IndexEntry { file, primitives: s.len(), cameras: s.cameras.len() }))
        .collect();
    let out = eff.output_dir().join("index.json");
    let n = scenes.len();
    write_json(&out, &SceneIndex { meta: meta(eff, "ingest", &eff.run.seeds), scenes, errors })?;
    eff.write("ingest")?;
    if n == 0 {
        return Err(Invalid(format!("no valid scenes in {}", dir.display())).into());
    }
    println!("indexed {n} scenes -> {}", out.display());
    Ok(())
}

#[derive(Serialize)]
struct RejectedRow {
    line: u64,
    message: String,
}

#[derive(Serialize)]
struct StatsReport {
    meta: Meta,
    rejected: Vec<RejectedRow>,
    stats: AnnotationStats,
}

fn annotation_report(eff: &Effective, command: &str) -> anyhow::Result<(StatsReport, aes3d_core::annotation::LabelFile)> {
    let path = require(&eff.run.paths.annotations, "annotation CSV", "--annotations")?;
    let (rows, rejected) = read_annotation_csv(path).map_err(|e| Invalid(format!("{}: {e}", path.display())))?;
    for r in &rejected {
        log::warn!("{}: {r}", path.display());
    }
    if rows.is_empty() {
        return Err(Invalid(format!("{}: no valid annotation rows", path.display())).into());
    }
    let stats = AnnotationStats::compute(&rows)?;
    let report = StatsReport {
        meta: meta(eff, command, &eff.run.seeds),
        rejected: rejected.into_iter().map(|r| RejectedRow { line: r.line, message: r.message }).collect(),
        stats,
    };
    Ok((report, build_label_file(&rows)))
}

pub fn annotate(eff: &Effective) -> anyhow::Result<()> {
    let (report, labels) = annotation_report(eff, "annotate")?;
    let out = eff.output_dir();
    write_json(&out.join("labels.json"), &labels)?;
    write_json(&out.join("annotation_stats.json"), &report)?;
    eff.write("annotate")?;
    println!(
        "{} scenes, {} views, {} rejected rows -> {}",
        labels.len(),
        report.stats.summary.views,
        report.rejected.len(),
        out.join("labels.json").display()
    );
    Ok(())
}

pub fn stats(eff: &Effective) -> anyhow::Result<()> {
    let (report, _) = annotation_report(eff, "stats")?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    std::io::stdout().write_all(text.as_bytes())?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFile {
    pub meta: Meta,
    pub test_fraction: f64,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Scene ids with labels, sorted, or an error naming the unlabeled ones.
fn labelled_ids(scenes: &[PreparedScene], labels: &BTreeMap<String, f64>) -> anyhow::Result<(Vec<String>, Vec<f64>)> {
    let missing: Vec<&str> =
        scenes.iter().filter(|s| !labels.contains_key(&s.scene_id)).map(|s| s.scene_id.as_str()).collect();
    if !missing.is_empty() {
        return Err(Invalid(format!("scenes without labels: {missing:?}")).into());
    }
    let ids: Vec<String> = scenes.iter().map(|s| s.scene_id.clone()).collect();
    let y = ids.iter().map(|id| labels[id]).collect();
    Ok((ids, y))
}

fn split_for(eff: &Effective, ids: &[String], y: &[f64], seed: u64) -> SplitFile {
    let (train, test) = make_split(ids, y, eff.run.test_fraction, seed);
    SplitFile { meta: meta(eff, "split", &[seed]), test_fraction: eff.run.test_fraction, train, test }
}

fn prepare(eff: &Effective) -> anyhow::Result<Vec<PreparedScene>> {
    let scenes = data::load_scenes(eff)?;
    let mut prepared: Vec<PreparedScene> = scenes
        .iter()
        .map(|s| PreparedScene::new(s, &eff.run.train.model))
        .collect::<Result<_, _>>()?;
    prepared.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));
    Ok(prepared)
}

pub fn split(eff: &Effective) -> anyhow::Result<()> {
    let scenes = prepare(eff)?;
    let labels = data::load_labels(eff)?;
    let (ids, y) = labelled_ids(&scenes, &labels)?;
    for &seed in &eff.run.seeds {
        let s = split_for(eff, &ids, &y, seed);
        let path = eff.output_dir().join(format!("split_seed_{seed}.json"));
        write_json(&path, &s)?;
        println!("seed {seed}: {} train / {} test -> {}", s.train.len(), s.test.len(), path.display());
    }
    eff.write("split")?;
    Ok(())
}

#[derive(Serialize)]
struct LogLine<'a> {
    config_hash: &'a str,
    seed: u64,
    #[serde(flatten)]
    epoch: &'a EpochLog,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SeedTraining {
    seed: u64,
    train_config_hash: String,
    final_train_loss: Option<f64>,
    best_epoch: Option<usize>,
    best_holdout_srcc: Option<f64>,
}

#[derive(Serialize)]
struct TrainSummary {
    meta: Meta,
    runs: Vec<SeedTraining>,
}

fn train_seed(
    eff: &Effective,
    scenes: &[PreparedScene],
    labels: &BTreeMap<String, f64>,
    ids: &[String],
    y: &[f64],
    seed: u64,
) -> anyhow::Result<SeedTraining> {
    let config = eff.train_for(seed);
    let split = split_for(eff, ids, y, seed);
    let out = train(scenes, labels, eff.run.label_variant, &split.train, &split.test, &config)?;
    let dir = seed_dir(eff, seed);
    std::fs::create_dir_all(&dir)?;
    write_json(&dir.join("split.json"), &split)?;
    out.last.save(&dir.join("checkpoint_last.json"))?;
    if let Some(best) = &out.best {
        best.save(&dir.join("checkpoint_best.json"))?;
    }
    let mut log = String::new();
    for e in &out.log {
        log.push_str(&serde_json::to_string(&LogLine { config_hash: &eff.hash, seed, epoch: e })?);
        log.push('\n');
    }
    std::fs::write(dir.join("train_log.ndjson"), log)?;
    Ok(SeedTraining {
        seed,
        train_config_hash: config.hash(),
        final_train_loss: out.log.last().map(|e| e.train_loss),
        best_epoch: out.best.as_ref().map(|c| c.epoch),
        best_holdout_srcc: out.log.iter().filter_map(|e| e.holdout_srcc).reduce(f64::max),
    })
}

pub fn train_cmd(eff: &Effective) -> anyhow::Result<()> {
    let scenes = prepare(eff)?;
    let labels = data::load_labels(eff)?;
    let (ids, y) = labelled_ids(&scenes, &labels)?;
    let seeds = &eff.run.seeds;
    let runs: Vec<SeedTraining> = if eff.run.parallel_seeds {
        let (scenes, labels, ids, y) = (&scenes, &labels, &ids, &y);
        std::thread::scope(|s| {
            let handles: Vec<_> =
                seeds.iter().map(|&seed| s.spawn(move || train_seed(eff, scenes, labels, ids, y, seed))).collect();
            handles.into_iter().map(|h| h.join().expect("seed thread panicked")).collect::<anyhow::Result<_>>()
        })?
    } else {
        seeds.iter().map(|&seed| train_seed(eff, &scenes, &labels, &ids, &y, seed)).collect::<anyhow::Result<_>>()?
    };
    for r in &runs {
        println!(
            "seed {}: final train loss {:.5}, best held-out srcc {}",
            r.seed,
            r.final_train_loss.unwrap_or(f64::NAN),
            r.best_holdout_srcc.map_or("n/a".into(), |v| format!("{v:.4}"))
        );
    }
    write_json(&eff.output_dir().join("train.json"), &TrainSummary { meta: meta(eff, "train", seeds), runs })?;
    eff.write("train")?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Which {
    Last,
    Best,
}

/// Loads a checkpoint and refuses it unless it was trained with `expected`.
pub fn checked_checkpoint(path: &Path, expected: &TrainConfig) -> anyhow::Result<Checkpoint> {
    let ckpt = Checkpoint::load(path).map_err(|e| Invalid(e.to_string()))?;
    let want = expected.hash();
    if ckpt.config_hash != want {
        return Err(Invalid(format!(
            "{}: checkpoint config hash {} does not match the effective config hash {want}",
            path.display(),
            ckpt.config_hash
        ))
        .into());
    }
    Ok(ckpt)
}

fn eval_samples(
    scenes: &BTreeMap<&str, &PreparedScene>,
    ids: &[String],
    labels: &BTreeMap<String, f64>,
    variant: LabelVariant,
    config: &TrainConfig,
) -> anyhow::Result<Vec<SceneSample>> {
    ids.iter()
        .map(|id| {
            let scene = scenes.get(id.as_str()).with_context(|| format!("split names unknown scene {id}"))?;
            Ok(scene.sample(labels[id], variant, &config.model, eval_seed(config))?)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
struct TrivialScore {
    value: f64,
    rmse: f64,
    mae: f64,
}

#[derive(Debug, Clone, Serialize)]
struct SeedEval {
    seed: u64,
    checkpoint: PathBuf,
    report: MetricsReport,
    calibration: Calibration,
    calibrated: MetricsReport,
    trivial_mean: TrivialScore,
    trivial_median: TrivialScore,
    beats_trivial_rmse: bool,
    predictions: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct EvalSummary {
    meta: Meta,
    runs: Vec<SeedEval>,
    aggregate: BTreeMap<String, MeanStd>,
    aggregate_calibrated: BTreeMap<String, MeanStd>,
    trivial_mean_rmse: MeanStd,
}

fn eval_seed_run(
    eff: &Effective,
    scenes: &BTreeMap<&str, &PreparedScene>,
    labels: &BTreeMap<String, f64>,
    ids: &[String],
    y: &[f64],
    seed: u64,
    which: Which,
) -> anyhow::Result<SeedEval> {
    let config = eff.train_for(seed);
    let name = match which {
        Which::Last => "checkpoint_last.json",
        Which::Best => "checkpoint_best.json",
    };
    let path = seed_dir(eff, seed).join(name);
    let net = checked_checkpoint(&path, &config)?.restore()?;
    let split = split_for(eff, ids, y, seed);
    let variant = eff.run.label_variant;
    let (test_preds, report) = evaluate(&net, &eval_samples(scenes, &split.test, labels, variant, &config)?)?;
    let (train_preds, _) = evaluate(&net, &eval_samples(scenes, &split.train, labels, variant, &config)?)?;
    let train_t: Vec<f64> = split.train.iter().map(|id| labels[id]).collect();
    let test_t: Vec<f64> = split.test.iter().map(|id| labels[id]).collect();
    let (calibration, calibrated) = calibrated_evaluation(&train_preds, &train_t, &test_preds, &test_t);
    let trivial = |kind| {
        let value = trivial_predictor(&train_t, kind);
        let p = vec![value; test_t.len()];
        TrivialScore { value, rmse: rmse(&p, &test_t), mae: mae(&p, &test_t) }
    };
    let trivial_mean = trivial(TrivialKind::Mean);
    Ok(SeedEval {
        seed,
        checkpoint: path,
        beats_trivial_rmse: report.rmse < trivial_mean.rmse,
        report,
        calibration,
        calibrated,
        trivial_median: trivial(TrivialKind::Median),
        trivial_mean,
        predictions: split.test.iter().cloned().zip(test_preds).collect(),
    })
}

pub fn eval(eff: &Effective, which: Which) -> anyhow::Result<()> {
    let scenes = prepare(eff)?;
    let labels = data::load_labels(eff)?;
    let (ids, y) = labelled_ids(&scenes, &labels)?;
    let by_id: BTreeMap<&str, &PreparedScene> = scenes.iter().map(|s| (s.scene_id.as_str(), s)).collect();
    let runs: Vec<SeedEval> = eff
        .run
        .seeds
        .iter()
        .map(|&seed| eval_seed_run(eff, &by_id, &labels, &ids, &y, seed, which))
        .collect::<anyhow::Result<_>>()?;
    let reports: Vec<MetricsReport> = runs.iter().map(|r| r.report.clone()).collect();
    let calibrated: Vec<MetricsReport> = runs.iter().map(|r| r.calibrated.clone()).collect();
    let summary = EvalSummary {
        meta: meta(eff, "eval", &eff.run.seeds),
        aggregate: aggregate_seed_runs(&reports)?,
        aggregate_calibrated: aggregate_seed_runs(&calibrated)?,
        trivial_mean_rmse: aes3d_core::evaluation::mean_std(&runs.iter().map(|r| r.trivial_mean.rmse).collect::<Vec<_>>()),
        runs,
    };
    for r in &summary.runs {
        println!(
            "seed {}: srcc {:.4} plcc {:.4} rmse {:.4} (mean predictor rmse {:.4})",
            r.seed, r.report.srcc, r.report.plcc, r.report.rmse, r.trivial_mean.rmse
        );
    }
    let a = &summary.aggregate;
    println!("plcc {} srcc {} krcc {} rmse {}", a["plcc"], a["srcc"], a["krcc"], a["rmse"]);
    write_json(&eff.output_dir().join("eval.json"), &summary)?;
    eff.write("eval")?;
    Ok(())
}

#[derive(Serialize)]
struct ScoreFile {
    meta: Meta,
    checkpoint: PathBuf,
    scores: BTreeMap<String, f64>,
}

pub fn score(eff: &Effective, checkpoint: Option<&Path>, seed: Option<u64>) -> anyhow::Result<()> {
    let seed = seed.unwrap_or(eff.run.seeds[0]);
    let config = eff.train_for(seed);
    let path = checkpoint.map_or_else(|| seed_dir(eff, seed).join("checkpoint_last.json"), Path::to_path_buf);
    let net = checked_checkpoint(&path, &config)?.restore()?;
    let scenes = prepare(eff)?;
    let mut scores = BTreeMap::new();
    for s in &scenes {
        // Unlabelled: the target only feeds the loss, never the forward pass.
        let sample = s.sample(0.0, eff.run.label_variant, &config.model, eval_seed(&config))?;
        let p = net.predict(&sample)?.prediction.clamp(0.0, 1.0);
        println!("{}\t{p:.6}", s.scene_id);
        scores.insert(s.scene_id.clone(), p);
    }
    write_json(
        &eff.output_dir().join(format!("scores_seed_{seed}.json")),
        &ScoreFile { meta: meta(eff, "score", &[seed]), checkpoint: path, scores },
    )?;
    eff.write("score")?;
    Ok(())
}

pub fn list_presets() {
    for p in PRESETS {
        println!("{:<26} {}", p.name, p.description);
    }
}

#[derive(Serialize)]
struct SynthManifest {
    config: SynthConfig,
    scores: BTreeMap<String, f64>,
}

/// Writes a procedural dataset: PLY scenes, a camera manifest and an annotation CSV.
pub fn synth(out: &Path, config: &SynthConfig) -> anyhow::Result<()> {
    if config.scenes == 0 || config.points == 0 || config.cameras == 0 {
        return Err(Invalid("scenes, points and cameras must all be positive".into()).into());
    }
    let data = generate_dataset(config);
    let scene_dir = out.join("scenes");
    std::fs::create_dir_all(&scene_dir)?;
    let mut cameras = BTreeMap::new();
    for s in &data {
        std::fs::write(scene_dir.join(format!("{}.ply", s.scene.scene_id)), write_gaussian_ply(&s.scene))?;
        cameras.insert(s.scene.scene_id.clone(), s.scene.cameras.clone());
    }
    write_camera_manifest(std::io::BufWriter::new(std::fs::File::create(out.join("cameras.jsonl"))?), &cameras)?;
    write_annotation_csv(std::fs::File::create(out.join("annotations.csv"))?, &synth_annotations(&data, config.seed))?;
    let scores = data.iter().map(|s| (s.scene.scene_id.clone(), s.score)).collect();
    write_json(&out.join("synth.json"), &SynthManifest { config: config.clone(), scores })?;
    println!("{} scenes -> {}", data.len(), out.display());
    Ok(())
}
