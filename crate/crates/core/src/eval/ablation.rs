use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::evaluate::evaluate;
use super::table::{elapsed_ms, run_jobs, CellResult, Job, ResultTable};
use crate::data::{Domain, Splits};
use crate::error::{Error, Result};
use crate::model::{ModelAssembly, Stage};
use crate::scalar::Scalar;
use crate::train::{train_augmentation, train_two_stage, TrainConfig};

pub const MIN_ABLATION_SEEDS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    /// `β = 0`
    WoOrth,
    /// `α = 0`
    WoCross,
    /// Augmentation network trained from random initialization.
    WoTranslationNetwork,
    /// The stage-one model, evaluated on its own target tower.
    WoAugmentationNetwork,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Full,
        Variant::WoOrth,
        Variant::WoCross,
        Variant::WoTranslationNetwork,
        Variant::WoAugmentationNetwork,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::WoOrth => "wo_orth",
            Variant::WoCross => "wo_cross",
            Variant::WoTranslationNetwork => "wo_translation_network",
            Variant::WoAugmentationNetwork => "wo_augmentation_network",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Variant::ALL.into_iter().find(|v| v.as_str() == s)
    }
}

/// Variants to train; `full` is always present and listed first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AblationPlan {
    variants: Vec<Variant>,
}

impl AblationPlan {
    pub fn new(variants: &[Variant]) -> Self {
        let mut v = vec![Variant::Full];
        for &x in variants {
            if !v.contains(&x) {
                v.push(x);
            }
        }
        AblationPlan { variants: v }
    }

    pub fn all() -> Self {
        Self::new(&Variant::ALL)
    }

    pub fn variants(&self) -> &[Variant] {
        &self.variants
    }

    pub fn contains(&self, v: Variant) -> bool {
        self.variants.contains(&v)
    }
}

fn with_seed(cfg: &TrainConfig, seed: u64) -> TrainConfig {
    TrainConfig { seed, ..cfg.clone() }
}

fn two_stage_cells<S: Scalar>(
    source: &Splits,
    target: &Splits,
    cfg: &TrainConfig,
    name: &str,
    with_stage_one: bool,
) -> Result<Vec<CellResult>> {
    let start = Instant::now();
    let run = train_two_stage::<S>(source, target, cfg)?;
    let m = evaluate(&run.augmentation, &target.test, Domain::Target, Stage::Augmentation)?;
    let mut out = vec![CellResult::new(name, cfg.seed, m, elapsed_ms(start, cfg.record_wall_clock))];
    if with_stage_one {
        let m = evaluate(&run.translation, &target.test, Domain::Target, Stage::Translation)?;
        out.push(CellResult::new(Variant::WoAugmentationNetwork.as_str(), cfg.seed, m, 0));
    }
    Ok(out)
}

/// Target-only augmentation model trained from scratch.
pub fn train_from_scratch<S: Scalar>(source: &Splits, target: &Splits, cfg: &TrainConfig) -> Result<ModelAssembly<S>> {
    let model = ModelAssembly::augmentation(
        &cfg.model,
        source.train.schema().clone(),
        target.train.schema().clone(),
        cfg.init_seed(),
        &[Domain::Target],
    )?;
    Ok(train_augmentation(target, model, cfg)?.0)
}

/// Trains every variant of `plan` for every seed and reports target test
/// metrics. The stage-one model of the `full` run doubles as the
/// `wo_augmentation_network` variant. Rows are ordered by seed, then by
/// plan order.
pub fn run_ablations<S: Scalar>(
    plan: &AblationPlan,
    source: &Splits,
    target: &Splits,
    cfg: &TrainConfig,
    seeds: &[u64],
    parallel: usize,
) -> Result<ResultTable> {
    if seeds.len() < MIN_ABLATION_SEEDS {
        return Err(Error::Precondition(format!(
            "ablations need at least {MIN_ABLATION_SEEDS} seeds, got {}",
            seeds.len()
        )));
    }
    cfg.validate()?;
    let mut jobs: Vec<Job> = Vec::new();
    for &seed in seeds {
        for &v in plan.variants() {
            let c = with_seed(cfg, seed);
            let job: Job = match v {
                Variant::Full => {
                    let keep = plan.contains(Variant::WoAugmentationNetwork);
                    Box::new(move || two_stage_cells::<S>(source, target, &c, v.as_str(), keep))
                }
                Variant::WoOrth => Box::new(move || {
                    let c = TrainConfig { beta: 0.0, ..c.clone() };
                    two_stage_cells::<S>(source, target, &c, v.as_str(), false)
                }),
                Variant::WoCross => Box::new(move || {
                    let c = TrainConfig { alpha: 0.0, ..c.clone() };
                    two_stage_cells::<S>(source, target, &c, v.as_str(), false)
                }),
                Variant::WoTranslationNetwork => Box::new(move || {
                    let start = Instant::now();
                    let m = train_from_scratch::<S>(source, target, &c)?;
                    let m = evaluate(&m, &target.test, Domain::Target, Stage::Augmentation)?;
                    Ok(vec![CellResult::new(v.as_str(), seed, m, elapsed_ms(start, c.record_wall_clock))])
                }),
                Variant::WoAugmentationNetwork => continue,
            };
            jobs.push(job);
        }
    }
    let mut table = run_jobs(jobs, parallel)?;
    let order = |r: &CellResult| {
        let v = Variant::parse(&r.cell).expect("ablation cells are variant names");
        plan.variants().iter().position(|&x| x == v)
    };
    let seed_pos = |r: &CellResult| seeds.iter().position(|&s| s == r.seed);
    table.rows.sort_by_key(|r| (seed_pos(r), order(r)));
    Ok(table)
}
