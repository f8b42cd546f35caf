use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::evaluate::evaluate;
use super::table::{elapsed_ms, run_jobs, CellResult, Job, ResultTable};
use crate::data::{subsample_train, Domain, Splits};
use crate::error::{Error, Result};
use crate::model::Stage;
use crate::rng;
use crate::scalar::Scalar;
use crate::train::{train_baseline, train_two_stage, Baseline, TrainConfig};

pub const DEFAULT_RATIOS: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];
pub const DEFAULT_ALPHAS: [f64; 5] = [0.001, 0.01, 0.03, 0.1, 1.0];
pub const DEFAULT_BETAS: [f64; 3] = [0.01, 0.1, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// The two-stage model, scored on its augmented path.
    Cdanet,
    /// Target-only MLP baseline.
    Mlp,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Cdanet => "cdanet",
            Method::Mlp => "mlp",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Method::Cdanet, Method::Mlp].into_iter().find(|m| m.as_str() == s)
    }
}

/// Trains `method` on the given splits and scores the target test split.
pub fn run_method<S: Scalar>(method: Method, source: &Splits, target: &Splits, cfg: &TrainConfig) -> Result<CellResult> {
    let start = Instant::now();
    let m = match method {
        Method::Cdanet => {
            let run = train_two_stage::<S>(source, target, cfg)?;
            evaluate(&run.augmentation, &target.test, Domain::Target, Stage::Augmentation)?
        }
        Method::Mlp => {
            let (model, _) = train_baseline::<S>(Baseline::Mlp, source, target, cfg)?;
            evaluate(&model, &target.test, Domain::Target, Stage::Translation)?
        }
    };
    Ok(CellResult::new(method.as_str(), cfg.seed, m, elapsed_ms(start, cfg.record_wall_clock)))
}

pub fn sparsity_cell(method: Method, ratio: f64) -> String {
    format!("{}@{ratio}", method.as_str())
}

pub fn hyper_cell(alpha: f64, beta: f64) -> String {
    format!("alpha={alpha};beta={beta}")
}

/// Target train split reduced to `ratio`; validation and test are kept.
pub fn sparse_target(target: &Splits, ratio: f64, seed: u64) -> Result<Splits> {
    Ok(Splits {
        train: subsample_train(&target.train, ratio, rng::derive_seed(seed, "sparsity"))?,
        val: target.val.clone(),
        test: target.test.clone(),
    })
}

/// One row per (ratio, method, seed), in that nesting order. Cells are
/// named `<method>@<ratio>`.
pub fn sweep_sparsity<S: Scalar>(
    ratios: &[f64],
    methods: &[Method],
    source: &Splits,
    target: &Splits,
    cfg: &TrainConfig,
    seeds: &[u64],
    parallel: usize,
) -> Result<ResultTable> {
    if ratios.is_empty() {
        return Err(Error::config("eval.ratios", "must not be empty"));
    }
    if let Some(r) = ratios.iter().find(|&&r| !(r > 0.0 && r <= 1.0)) {
        return Err(Error::config("eval.ratios", format!("{r} is outside (0, 1]")));
    }
    if methods.is_empty() {
        return Err(Error::config("eval.methods", "must not be empty"));
    }
    if seeds.is_empty() {
        return Err(Error::config("seeds", "must not be empty"));
    }
    cfg.validate()?;
    let mut jobs: Vec<Job> = Vec::new();
    for &ratio in ratios {
        for &method in methods {
            for &seed in seeds {
                let c = TrainConfig { seed, ..cfg.clone() };
                jobs.push(Box::new(move || {
                    let t = sparse_target(target, ratio, seed)?;
                    let mut r = run_method::<S>(method, source, &t, &c)?;
                    r.cell = sparsity_cell(method, ratio);
                    Ok(vec![r])
                }));
            }
        }
    }
    run_jobs(jobs, parallel)
}

/// Full two-stage run per (α, β, seed). Cells are named
/// `alpha=<α>;beta=<β>`.
pub fn sweep_hyper<S: Scalar>(
    alphas: &[f64],
    betas: &[f64],
    source: &Splits,
    target: &Splits,
    cfg: &TrainConfig,
    seeds: &[u64],
    parallel: usize,
) -> Result<ResultTable> {
    for (key, grid) in [("eval.alphas", alphas), ("eval.betas", betas)] {
        if grid.is_empty() {
            return Err(Error::config(key, "must not be empty"));
        }
        if let Some(x) = grid.iter().find(|&&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::config(key, format!("{x} is not a finite non-negative weight")));
        }
    }
    if seeds.is_empty() {
        return Err(Error::config("seeds", "must not be empty"));
    }
    cfg.validate()?;
    let mut jobs: Vec<Job> = Vec::new();
    for &alpha in alphas {
        for &beta in betas {
            for &seed in seeds {
                let c = TrainConfig { seed, alpha, beta, ..cfg.clone() };
                jobs.push(Box::new(move || {
                    let mut r = run_method::<S>(Method::Cdanet, source, target, &c)?;
                    r.cell = hyper_cell(alpha, beta);
                    Ok(vec![r])
                }));
            }
        }
    }
    run_jobs(jobs, parallel)
}
