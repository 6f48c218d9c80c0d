use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{clip_grad_norm, cosine_multiplier, AdamW, Checkpoint, PreparedScene, TrainConfig, TrainError};
use crate::annotation::LabelVariant;
use crate::evaluation::MetricsReport;
use crate::model::{Aes3dNet, Ctx, Graph, ParamGrads, SceneSample};
use crate::objectives::{total_loss, total_loss_grad, LossConfig};
use crate::util::derive_seed;

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub holdout_plcc: Option<f64>,
    pub holdout_srcc: Option<f64>,
    pub holdout_krcc: Option<f64>,
    pub holdout_mae: Option<f64>,
    pub holdout_rmse: Option<f64>,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub last: Checkpoint,
    /// Snapshot at the best held-out SRCC, when there is a held-out set.
    pub best: Option<Checkpoint>,
    pub log: Vec<EpochLog>,
}

/// Mean loss of a batch and its gradient with respect to every parameter.
///
/// `dropout_seeds` switches on training mode with one seed per sample.
pub fn batch_loss_and_grads(
    net: &Aes3dNet,
    batch: &[SceneSample],
    loss: &LossConfig,
    dropout_seeds: Option<&[u64]>,
) -> Result<(f64, ParamGrads, Vec<f64>), TrainError> {
    let mut graphs = Vec::with_capacity(batch.len());
    let mut preds = Vec::with_capacity(batch.len());
    for (i, sample) in batch.iter().enumerate() {
        let mut g = Graph::new(&net.params);
        let mut rng = dropout_seeds.map(|s| ChaCha8Rng::seed_from_u64(s[i]));
        let mut ctx = match rng.as_mut() {
            Some(r) => Ctx::train(net.config.dropout, r),
            None => Ctx::eval(),
        };
        let (y, trace) = net.forward(&mut g, sample, &mut ctx)?;
        preds.push(trace.prediction);
        graphs.push((g, y));
    }
    let targets: Vec<f64> = batch.iter().map(|s| s.target).collect();
    let value = total_loss(&preds, &targets, loss);
    if !value.is_finite() || preds.iter().any(|p| !p.is_finite()) {
        return Err(TrainError::NonFinite(batch.iter().map(|s| s.scene_id.clone()).collect()));
    }
    let seeds = total_loss_grad(&preds, &targets, loss);
    let mut grads = net.params.zeros_like();
    for ((g, y), s) in graphs.iter().zip(seeds) {
        g.backward(*y, s, &mut grads);
    }
    Ok((value, grads, preds))
}

/// Evaluation-mode predictions and metrics over `samples`.
pub fn evaluate(net: &Aes3dNet, samples: &[SceneSample]) -> Result<(Vec<f64>, MetricsReport), TrainError> {
    let preds = net.predict_batch(samples)?;
    let targets: Vec<f64> = samples.iter().map(|s| s.target).collect();
    Ok((preds.clone(), MetricsReport::compute(&preds, &targets)))
}

fn build_samples(
    scenes: &[&PreparedScene],
    labels: &BTreeMap<String, f64>,
    variant: LabelVariant,
    config: &TrainConfig,
    epoch_seed: u64,
) -> Result<Vec<SceneSample>, TrainError> {
    let missing: Vec<String> = scenes.iter().filter(|s| !labels.contains_key(&s.scene_id)).map(|s| s.scene_id.clone()).collect();
    if !missing.is_empty() {
        return Err(TrainError::MissingLabel(missing));
    }
    scenes.iter().map(|s| s.sample(labels[&s.scene_id], variant, &config.model, epoch_seed)).collect()
}

/// Seed of the fixed view draw used for every evaluation.
pub fn eval_seed(config: &TrainConfig) -> u64 {
    derive_seed(config.seed, &["eval"])
}

/// Trains from scratch on `train_ids`, reporting held-out metrics on
/// `test_ids` after every epoch.
pub fn train(
    scenes: &[PreparedScene],
    labels: &BTreeMap<String, f64>,
    variant: LabelVariant,
    train_ids: &[String],
    test_ids: &[String],
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let by_id: BTreeMap<&str, &PreparedScene> = scenes.iter().map(|s| (s.scene_id.as_str(), s)).collect();
    let lookup = |ids: &[String]| -> Result<Vec<&PreparedScene>, TrainError> {
        let missing: Vec<String> = ids.iter().filter(|id| !by_id.contains_key(id.as_str())).cloned().collect();
        if !missing.is_empty() {
            return Err(TrainError::Assembly(format!("unknown scenes {missing:?}")));
        }
        Ok(ids.iter().map(|id| by_id[id.as_str()]).collect())
    };
    let train_scenes = lookup(train_ids)?;
    let test_scenes = lookup(test_ids)?;
    if train_scenes.is_empty() && config.epochs > 0 {
        return Err(TrainError::Config("no training scenes".into()));
    }

    let mut net = Aes3dNet::new(config.model.clone(), derive_seed(config.seed, &["init"]))?;
    let mut opt = AdamW::new(&net.params);
    let test_samples = build_samples(&test_scenes, labels, variant, config, eval_seed(config))?;
    let steps_per_epoch = train_scenes.len().div_ceil(config.batch_size);
    let total_steps = steps_per_epoch * config.epochs;
    let mut log = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, Checkpoint)> = None;
    let mut step = 0usize;

    for epoch in 0..config.epochs {
        let epoch_seed = derive_seed(config.seed, &["epoch", &epoch.to_string()]);
        let mut samples = build_samples(&train_scenes, labels, variant, config, epoch_seed)?;
        samples.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &["order", &epoch.to_string()])));
        let mut loss_sum = 0.0;
        let mut lr_now = config.learning_rate;
        for batch in samples.chunks(config.batch_size) {
            let dropout_seeds: Vec<u64> = (0..batch.len())
                .map(|i| derive_seed(config.seed, &["dropout", &step.to_string(), &i.to_string()]))
                .collect();
            let (loss, mut grads, _) = batch_loss_and_grads(&net, batch, &config.loss, Some(&dropout_seeds))?;
            clip_grad_norm(&mut grads, config.grad_clip_norm);
            let eta = cosine_multiplier(step, total_steps);
            opt.update(&mut net.params, &grads, config.learning_rate, config.weight_decay, eta);
            lr_now = config.learning_rate * eta;
            loss_sum += loss;
            step += 1;
        }
        let mut entry = EpochLog {
            epoch,
            train_loss: loss_sum / steps_per_epoch as f64,
            holdout_plcc: None,
            holdout_srcc: None,
            holdout_krcc: None,
            holdout_mae: None,
            holdout_rmse: None,
            lr: lr_now,
        };
        if !test_samples.is_empty() {
            let (_, m) = evaluate(&net, &test_samples)?;
            entry.holdout_plcc = Some(m.plcc);
            entry.holdout_srcc = Some(m.srcc);
            entry.holdout_krcc = Some(m.krcc);
            entry.holdout_mae = Some(m.mae);
            entry.holdout_rmse = Some(m.rmse);
            if best.as_ref().is_none_or(|(s, _)| m.srcc > *s) {
                best = Some((m.srcc, Checkpoint::capture(&net, &opt, config, epoch + 1)));
            }
        }
        log::info!(
            "epoch {epoch}: train loss {:.5}, held-out srcc {}",
            entry.train_loss,
            entry.holdout_srcc.map_or("n/a".to_string(), |s| format!("{s:.4}"))
        );
        log.push(entry);
    }
    Ok(TrainOutcome {
        last: Checkpoint::capture(&net, &opt, config, config.epochs),
        best: best.map(|(_, c)| c),
        log,
    })
}
