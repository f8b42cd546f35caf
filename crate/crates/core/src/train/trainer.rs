use std::path::{Path, PathBuf};
use std::time::Instant;

use super::adam::Adam;
use super::config::TrainConfig;
use super::record::{EvalRecord, RunRecord, StopReason};
use crate::autodiff::{Tape, Tensor};
use crate::data::split::batches_for;
use crate::data::{Dataset, Domain, Example, Splits};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::model::{
    loss_augmentation, loss_translation_total, loss_vanilla_total, narrow, widen, Checkpoint, ExtractorKind,
    LossBreakdown, ModelAssembly, Objective,
};
use crate::scalar::Scalar;

/// Best validation point seen so far and the parameters at that point.
#[derive(Debug, Clone, PartialEq)]
pub struct BestPoint<S> {
    pub val_auc: f64,
    pub step: u64,
    pub epoch: u64,
    pub params: Vec<Tensor<S>>,
}

/// Everything needed to continue a run from an epoch boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState<S> {
    /// Next epoch to run.
    pub epoch: u64,
    pub step: u64,
    pub adam: Adam<S>,
    pub best: Option<BestPoint<S>>,
    pub bad_evals: u64,
    pub history: Vec<EvalRecord>,
    pub loss_sum: LossBreakdown,
    pub loss_steps: u64,
}

impl<S: Scalar> TrainState<S> {
    pub fn new(model: &ModelAssembly<S>) -> Self {
        TrainState {
            epoch: 0,
            step: 0,
            adam: Adam::new(&model.params),
            best: None,
            bad_evals: 0,
            history: Vec::new(),
            loss_sum: LossBreakdown::default(),
            loss_steps: 0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct FitOptions {
    /// Written at the end of every epoch.
    pub checkpoint: Option<PathBuf>,
    /// Stop (resumably) once this many epochs have completed in total.
    pub stop_after_epochs: Option<u64>,
}

fn add_losses(acc: &mut LossBreakdown, b: &LossBreakdown) {
    acc.vani_s += b.vani_s;
    acc.vani_t += b.vani_t;
    acc.cross_s += b.cross_s;
    acc.cross_t += b.cross_t;
    acc.orth += b.orth;
    acc.aug += b.aug;
    acc.total += b.total;
}

fn mean_losses(acc: &LossBreakdown, n: u64) -> LossBreakdown {
    let n = n.max(1) as f64;
    LossBreakdown {
        vani_s: acc.vani_s / n,
        vani_t: acc.vani_t / n,
        cross_s: acc.cross_s / n,
        cross_t: acc.cross_t / n,
        orth: acc.orth / n,
        aug: acc.aug / n,
        total: acc.total / n,
    }
}

fn step_loss<S: Scalar>(
    t: &Tape<S>,
    m: &ModelAssembly<S>,
    objective: Objective,
    batches: [Option<&[&Example]>; 2],
    cfg: &TrainConfig,
) -> Result<(crate::autodiff::Var, LossBreakdown)> {
    let need = |d: Domain| batches[d.index()].ok_or_else(|| Error::Contract(format!("no {d} batch")));
    match objective {
        Objective::Translation => {
            loss_translation_total(t, m, need(Domain::Source)?, need(Domain::Target)?, cfg.alpha, cfg.beta)
        }
        Objective::JointVanilla | Objective::SingleDomain(_) => loss_vanilla_total(t, m, batches),
        Objective::Augmentation(d) => loss_augmentation(t, m, d, need(d)?, cfg.beta),
    }
}

/// Minibatch Adam on `objective` with validation-AUC early stopping. On
/// return the model holds the best validation parameters (unless the run
/// was interrupted).
///
/// Two-domain objectives draw one batch per domain per step; the smaller
/// domain restarts its shuffled order when exhausted and an epoch ends
/// when the larger domain has been seen once.
pub fn fit<S: Scalar>(
    model: &mut ModelAssembly<S>,
    objective: Objective,
    data: [Option<&Splits>; 2],
    cfg: &TrainConfig,
    resume: Option<TrainState<S>>,
    opts: &FitOptions,
) -> Result<RunRecord> {
    cfg.validate()?;
    model.configure_trainable(objective)?;
    let domains = objective.domains();
    for &d in &domains {
        if data[d.index()].is_none() {
            return Err(Error::Contract(format!("objective {} needs {d} data", objective.name())));
        }
    }
    let (eval_domain, eval_stage) = objective.eval_target();
    let val: &Dataset = &data[eval_domain.index()]
        .ok_or_else(|| Error::Contract(format!("no {eval_domain} validation split")))?
        .val;
    let train: Vec<(Domain, &Dataset)> = domains
        .iter()
        .map(|&d| (d, &data[d.index()].expect("checked above").train))
        .collect();
    for (d, ds) in &train {
        if ds.is_empty() {
            return Err(Error::Data(format!("{d} training split is empty")));
        }
    }
    let mut st = resume.unwrap_or_else(|| TrainState::new(model));
    if st.adam.m.len() != model.params.len() {
        return Err(Error::Contract("resume state does not match the model".into()));
    }
    let shuffle = cfg.shuffle_seed();
    let clock = Instant::now();
    let wall = |c: &Instant| if cfg.record_wall_clock { c.elapsed().as_millis() as u64 } else { 0 };

    let mut stop = StopReason::MaxEpochs;
    'epochs: while st.epoch < cfg.max_epochs {
        if opts.stop_after_epochs.is_some_and(|n| st.epoch >= n) {
            stop = StopReason::Interrupted;
            break;
        }
        let epoch = st.epoch;
        let counts: Vec<usize> = train.iter().map(|(_, ds)| ds.len().div_ceil(cfg.batch_size)).collect();
        let steps = *counts.iter().max().expect("at least one domain");
        let mut orders: Vec<(usize, Vec<Vec<usize>>)> = train
            .iter()
            .map(|(d, ds)| Ok((0, batches_for(ds.len(), cfg.batch_size, shuffle, &format!("{d}/{epoch}/0"))?)))
            .collect::<Result<_>>()?;
        for i in 0..steps {
            let mut picked: Vec<Vec<&Example>> = Vec::with_capacity(train.len());
            for (k, (d, ds)) in train.iter().enumerate() {
                let cycle = i / counts[k];
                if orders[k].0 != cycle {
                    orders[k] = (
                        cycle,
                        batches_for(ds.len(), cfg.batch_size, shuffle, &format!("{d}/{epoch}/{cycle}"))?,
                    );
                }
                picked.push(ds.select(&orders[k].1[i % counts[k]]));
            }
            let mut batches: [Option<&[&Example]>; 2] = [None, None];
            for (k, (d, _)) in train.iter().enumerate() {
                batches[d.index()] = Some(&picked[k]);
            }
            let tape = Tape::new();
            let (loss, br) = step_loss(&tape, model, objective, batches, cfg)?;
            if let Some((component, value)) = br.non_finite() {
                return Err(Error::Divergence {
                    component: component.to_string(),
                    step: st.step,
                    value,
                });
            }
            let grads = tape.backward(loss)?;
            drop(tape);
            model.params.accumulate(&grads);
            st.adam.step(&mut model.params, cfg.lr)?;
            st.step += 1;
            add_losses(&mut st.loss_sum, &br);
            st.loss_steps += 1;

            let due = match cfg.eval_every {
                Some(n) => st.step % n == 0,
                None => i + 1 == steps,
            };
            if due {
                let auc = evaluate(model, val, eval_domain, eval_stage)?.auc;
                st.history.push(EvalRecord {
                    step: st.step,
                    epoch,
                    losses: mean_losses(&st.loss_sum, st.loss_steps),
                    val_auc: auc,
                    wall_ms: wall(&clock),
                });
                st.loss_sum = LossBreakdown::default();
                st.loss_steps = 0;
                if st.best.as_ref().is_none_or(|b| auc > b.val_auc) {
                    st.best = Some(BestPoint {
                        val_auc: auc,
                        step: st.step,
                        epoch,
                        params: model.params.snapshot(),
                    });
                    st.bad_evals = 0;
                } else {
                    st.bad_evals += 1;
                    if st.bad_evals >= cfg.patience {
                        stop = StopReason::EarlyStop;
                        st.epoch += 1;
                        break 'epochs;
                    }
                }
            }
        }
        st.epoch += 1;
        if let Some(path) = &opts.checkpoint {
            save_training_checkpoint(model, &st, objective, path)?;
        }
    }

    if st.best.is_none() {
        // no validation happened yet (eval_every longer than the run)
        let auc = evaluate(model, val, eval_domain, eval_stage)?.auc;
        st.history.push(EvalRecord {
            step: st.step,
            epoch: st.epoch.saturating_sub(1),
            losses: mean_losses(&st.loss_sum, st.loss_steps),
            val_auc: auc,
            wall_ms: wall(&clock),
        });
        st.best = Some(BestPoint {
            val_auc: auc,
            step: st.step,
            epoch: st.epoch.saturating_sub(1),
            params: model.params.snapshot(),
        });
    }
    let best = st.best.as_ref().expect("set above");
    if stop != StopReason::Interrupted {
        model.params.restore(&best.params);
    }
    Ok(RunRecord {
        objective: objective.name(),
        optimizer: st.adam.describe(),
        lr: cfg.lr,
        history: st.history.clone(),
        best_val_auc: best.val_auc,
        best_step: best.step,
        best_epoch: best.epoch,
        stop_reason: stop,
    })
}

/// Writes model, optimizer moments, best snapshot and loop state.
pub fn save_training_checkpoint<S: Scalar>(
    model: &ModelAssembly<S>,
    st: &TrainState<S>,
    objective: Objective,
    path: &Path,
) -> Result<()> {
    let mut ck = model.to_checkpoint();
    let meta = &mut ck.meta;
    meta.push(("train.objective".into(), objective.name()));
    meta.push(("train.epoch".into(), st.epoch.to_string()));
    meta.push(("train.step".into(), st.step.to_string()));
    meta.push(("train.bad_evals".into(), st.bad_evals.to_string()));
    meta.push(("train.loss_steps".into(), st.loss_steps.to_string()));
    meta.push(("train.loss_sum".into(), serde_json::to_string(&st.loss_sum)?));
    meta.push(("train.history".into(), serde_json::to_string(&st.history)?));
    meta.push(("adam.step".into(), st.adam.step.to_string()));
    meta.push(("adam.beta1".into(), format!("{:?}", st.adam.beta1)));
    meta.push(("adam.beta2".into(), format!("{:?}", st.adam.beta2)));
    meta.push(("adam.eps".into(), format!("{:?}", st.adam.eps)));
    if let Some(b) = &st.best {
        meta.push(("train.best_val_auc".into(), format!("{:?}", b.val_auc)));
        meta.push(("train.best_step".into(), b.step.to_string()));
        meta.push(("train.best_epoch".into(), b.epoch.to_string()));
    }
    for (i, (_, p)) in model.params.iter().enumerate() {
        ck.records.push((format!("adam.m/{}", p.name), widen(&st.adam.m[i])));
        ck.records.push((format!("adam.v/{}", p.name), widen(&st.adam.v[i])));
        if let Some(b) = &st.best {
            ck.records.push((format!("best/{}", p.name), widen(&b.params[i])));
        }
    }
    ck.save(path)
}

/// Restores a model and its loop state from [`save_training_checkpoint`].
pub fn load_training_checkpoint<S: Scalar>(path: &Path) -> Result<(ModelAssembly<S>, TrainState<S>)> {
    let ck = Checkpoint::load(path)?;
    let model = ModelAssembly::<S>::from_checkpoint(&ck)?;
    let get = |k: &str| ck.meta_value(k).ok_or_else(|| Error::Checkpoint(format!("meta key `{k}` missing")));
    let int = |k: &str| -> Result<u64> {
        get(k)?
            .parse()
            .map_err(|_| Error::Checkpoint(format!("meta `{k}` is not an integer")))
    };
    let float = |k: &str| -> Result<f64> {
        get(k)?
            .parse()
            .map_err(|_| Error::Checkpoint(format!("meta `{k}` is not a number")))
    };
    let tensor = |name: String, like: &Tensor<S>| -> Result<Tensor<S>> {
        let r = ck
            .record(&name)
            .ok_or_else(|| Error::Checkpoint(format!("missing record `{name}`")))?;
        if r.shape() != like.shape() {
            return Err(Error::Checkpoint(format!(
                "record `{name}`: shape {:?}, expected {:?}",
                r.shape(),
                like.shape()
            )));
        }
        Ok(narrow(r))
    };
    let mut adam = Adam::with_hyper(&model.params, float("adam.beta1")?, float("adam.beta2")?, float("adam.eps")?);
    adam.step = int("adam.step")?;
    let mut best_params = Vec::new();
    let has_best = ck.meta_value("train.best_val_auc").is_some();
    for (i, (_, p)) in model.params.iter().enumerate() {
        adam.m[i] = tensor(format!("adam.m/{}", p.name), &p.value)?;
        adam.v[i] = tensor(format!("adam.v/{}", p.name), &p.value)?;
        if has_best {
            best_params.push(tensor(format!("best/{}", p.name), &p.value)?);
        }
    }
    let best = if has_best {
        Some(BestPoint {
            val_auc: float("train.best_val_auc")?,
            step: int("train.best_step")?,
            epoch: int("train.best_epoch")?,
            params: best_params,
        })
    } else {
        None
    };
    let st = TrainState {
        epoch: int("train.epoch")?,
        step: int("train.step")?,
        adam,
        best,
        bad_evals: int("train.bad_evals")?,
        history: serde_json::from_str(get("train.history")?)?,
        loss_sum: serde_json::from_str(get("train.loss_sum")?)?,
        loss_steps: int("train.loss_steps")?,
    };
    Ok((model, st))
}

/// Stage one: builds a fresh translation model and trains it on both
/// domains.
pub fn train_translation<S: Scalar>(
    source: &Splits,
    target: &Splits,
    cfg: &TrainConfig,
) -> Result<(ModelAssembly<S>, RunRecord)> {
    let mut m = ModelAssembly::translation(
        &cfg.model,
        source.train.schema().clone(),
        target.train.schema().clone(),
        cfg.init_seed(),
    )?;
    let rec = fit(&mut m, Objective::Translation, [Some(source), Some(target)], cfg, None, &FitOptions::default())?;
    Ok((m, rec))
}

/// Stage two: trains a transferred (or freshly built) augmentation model on
/// target data only.
pub fn train_augmentation<S: Scalar>(
    target: &Splits,
    mut model: ModelAssembly<S>,
    cfg: &TrainConfig,
) -> Result<(ModelAssembly<S>, RunRecord)> {
    let rec = fit(
        &mut model,
        Objective::Augmentation(Domain::Target),
        [None, Some(target)],
        cfg,
        None,
        &FitOptions::default(),
    )?;
    Ok((model, rec))
}

#[derive(Debug, Clone)]
pub struct TwoStageRun<S> {
    pub translation: ModelAssembly<S>,
    pub translation_record: RunRecord,
    pub augmentation: ModelAssembly<S>,
    pub augmentation_record: RunRecord,
}

/// Translation stage, parameter transfer, augmentation stage.
pub fn train_two_stage<S: Scalar>(source: &Splits, target: &Splits, cfg: &TrainConfig) -> Result<TwoStageRun<S>> {
    let (translation, translation_record) = train_translation(source, target, cfg)?;
    let transferred = translation.transfer_parameters(&[Domain::Target])?;
    let (augmentation, augmentation_record) = train_augmentation(target, transferred, cfg)?;
    Ok(TwoStageRun {
        translation,
        translation_record,
        augmentation,
        augmentation_record,
    })
}

/// Comparison methods that train with vanilla objectives only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Baseline {
    /// Target-domain data only, private MLP extractor.
    Mlp,
    /// Joint training with one shared extractor MLP.
    ShareBottom,
    Mmoe,
    Ple,
}

impl Baseline {
    pub const ALL: [Baseline; 4] = [Baseline::Mlp, Baseline::ShareBottom, Baseline::Mmoe, Baseline::Ple];

    pub fn as_str(self) -> &'static str {
        match self {
            Baseline::Mlp => "mlp",
            Baseline::ShareBottom => "sharebottom",
            Baseline::Mmoe => "mmoe",
            Baseline::Ple => "ple",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Baseline::ALL.into_iter().find(|b| b.as_str() == s)
    }

    pub fn extractor(self) -> ExtractorKind {
        match self {
            Baseline::Mlp => ExtractorKind::IndepMlp,
            Baseline::ShareBottom => ExtractorKind::SharedMlp,
            Baseline::Mmoe => ExtractorKind::Mmoe,
            Baseline::Ple => ExtractorKind::Ple,
        }
    }

    pub fn objective(self) -> Objective {
        match self {
            Baseline::Mlp => Objective::SingleDomain(Domain::Target),
            _ => Objective::JointVanilla,
        }
    }
}

/// Trains a baseline; the model config's extractor kind is overridden by
/// the baseline's.
pub fn train_baseline<S: Scalar>(
    baseline: Baseline,
    source: &Splits,
    target: &Splits,
    cfg: &TrainConfig,
) -> Result<(ModelAssembly<S>, RunRecord)> {
    let mut mc = cfg.model.clone();
    mc.extractor.kind = baseline.extractor();
    let mut m = ModelAssembly::translation(
        &mc,
        source.train.schema().clone(),
        target.train.schema().clone(),
        cfg.init_seed(),
    )?;
    let data = match baseline {
        Baseline::Mlp => [None, Some(target)],
        _ => [Some(source), Some(target)],
    };
    let rec = fit(&mut m, baseline.objective(), data, cfg, None, &FitOptions::default())?;
    Ok((m, rec))
}
