use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::json;

use super::config::{DataSource, ExperimentConfig};
use super::{Cli, Command, PathArg, SplitArg, StageArg, SweepKind};
use crate::data::{
    chronological_split, generate_synthetic, load_csv, write_csv, Correspondence, CsvOptions, Dataset, Domain, Schema,
    Splits,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, knn_translation_analysis, run_ablations, sweep_hyper, sweep_sparsity, Metric};
use crate::model::{ModelAssembly, Stage};
use crate::train::{train_augmentation, train_baseline, train_translation, Baseline, RunRecord};

type Model = ModelAssembly<f64>;

#[derive(Debug, Clone)]
pub struct LoadedData {
    pub source: Splits,
    pub target: Splits,
    pub correspondence: Option<Correspondence>,
}

/// Generates or reads both domains and splits them chronologically.
pub fn load_data(cfg: &ExperimentConfig) -> Result<LoadedData> {
    let (source, target, correspondence) = match &cfg.data {
        None => return Err(Error::config("data", "no data section in config")),
        Some(DataSource::Synthetic(g)) => {
            let d = generate_synthetic(g)?;
            (d.source, d.target, Some(d.correspondence))
        }
        Some(DataSource::Csv(c)) => {
            let opts = CsvOptions {
                label_threshold: c.label_threshold,
            };
            let ss = Arc::new(Schema::load("source", &c.source_schema)?);
            let ts = Arc::new(Schema::load("target", &c.target_schema)?);
            ss.check_compatible(&ts)?;
            let corr = c.correspondence.as_deref().map(Correspondence::load).transpose()?;
            (load_csv(ss, &c.source, &opts)?, load_csv(ts, &c.target, &opts)?, corr)
        }
    };
    Ok(LoadedData {
        source: chronological_split(&source, cfg.split)?,
        target: chronological_split(&target, cfg.split)?,
        correspondence,
    })
}

fn split_of(s: &Splits, which: SplitArg) -> &Dataset {
    match which {
        SplitArg::Train => &s.train,
        SplitArg::Val => &s.val,
        SplitArg::Test => &s.test,
    }
}

/// Creates `dir`, refusing a non-empty one unless `force` is set.
fn prepare_out(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let non_empty = fs::read_dir(dir)?.next().is_some();
        if non_empty && !force {
            return Err(Error::Precondition(format!(
                "output directory `{}` is not empty (use --force to overwrite)",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write(path: PathBuf, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn save_record(out: &Path, name: &str, rec: &RunRecord) -> Result<()> {
    rec.write_jsonl(&out.join(format!("{name}.jsonl")))?;
    write(out.join(format!("{name}.json")), &rec.summary_json()?)
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.train.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

/// Executes one parsed command line; messages go to stdout.
pub fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let out = cfg.output_dir.clone();
    match &cli.command {
        Command::GenData => {
            let g = match &cfg.data {
                Some(DataSource::Synthetic(g)) => g,
                _ => return Err(Error::config("data.synthetic", "gen-data needs a [data.synthetic] section")),
            };
            let d = generate_synthetic(g)?;
            prepare_out(&out, cli.force)?;
            write_csv(&d.source, &out.join("source.csv"))?;
            write_csv(&d.target, &out.join("target.csv"))?;
            write(out.join("source.schema"), &d.source.schema().to_string())?;
            write(out.join("target.schema"), &d.target.schema().to_string())?;
            d.correspondence.write(&out.join("correspondence.csv"))?;
            write(out.join("resolved.cfg"), &cfg.resolved())?;
            println!("wrote {} + {} examples to {}", d.source.len(), d.target.len(), out.display());
        }
        Command::Train { stage, init, baseline } => {
            let data = load_data(&cfg)?;
            prepare_out(&out, cli.force)?;
            write(out.join("resolved.cfg"), &cfg.resolved())?;
            let (s, t, tc) = (&data.source, &data.target, &cfg.train);
            if let Some(name) = baseline {
                let b = Baseline::parse(name)
                    .ok_or_else(|| Error::config("baseline", format!("unknown baseline `{name}`")))?;
                let (m, rec): (Model, _) = train_baseline(b, s, t, tc)?;
                m.save(&out.join("baseline.ckpt"))?;
                m.save(&out.join("final.ckpt"))?;
                save_record(&out, "baseline", &rec)?;
                println!("{} best val AUC {}", b.as_str(), rec.best_val_auc);
                return Ok(());
            }
            let stage1: Option<Model> = match (stage, init) {
                (StageArg::Augmentation, Some(p)) => {
                    let m = Model::load(p)?;
                    match m.stage() {
                        Stage::Translation => Some(m),
                        Stage::Augmentation => {
                            let (m, rec) = train_augmentation(t, m, tc)?;
                            finish_stage_two(&out, &m, &rec)?;
                            return Ok(());
                        }
                    }
                }
                (StageArg::Augmentation, None) => {
                    return Err(Error::config("init", "--stage augmentation needs --init <checkpoint>"))
                }
                _ => {
                    let (m, rec) = train_translation(s, t, tc)?;
                    m.save(&out.join("stage1.ckpt"))?;
                    save_record(&out, "stage1", &rec)?;
                    println!("stage 1 best val AUC {}", rec.best_val_auc);
                    Some(m)
                }
            };
            if *stage == StageArg::Translation {
                return Ok(());
            }
            let transferred = stage1.expect("stage one model").transfer_parameters(&[Domain::Target])?;
            transferred.save(&out.join("stage2_init.ckpt"))?;
            let (m, rec) = train_augmentation(t, transferred, tc)?;
            finish_stage_two(&out, &m, &rec)?;
        }
        Command::Eval { checkpoint, split, stage } => {
            let data = load_data(&cfg)?;
            let m = Model::load(checkpoint)?;
            let stage = match stage {
                Some(PathArg::Translation) => Stage::Translation,
                Some(PathArg::Augmentation) => Stage::Augmentation,
                None => m.stage(),
            };
            let r = evaluate(&m, split_of(&data.target, *split), Domain::Target, stage)?;
            let v = json!({
                "checkpoint": checkpoint.display().to_string(),
                "split": split.as_str(),
                "stage": stage.as_str(),
                "auc": r.auc,
                "logloss": r.logloss,
                "n": r.n,
            });
            let text = serde_json::to_string_pretty(&v)? + "\n";
            fs::create_dir_all(&out)?;
            write(out.join(format!("metrics_{}.json", split.as_str())), &text)?;
            print!("{text}");
        }
        Command::Analyze {
            checkpoint,
            correspondence,
            k,
            metric,
            split,
        } => {
            let data = load_data(&cfg)?;
            let m = Model::load(checkpoint)?;
            let corr = match correspondence {
                Some(p) => Correspondence::load(p)?,
                None => data
                    .correspondence
                    .clone()
                    .ok_or_else(|| Error::config("data.correspondence", "no correspondence available"))?,
            };
            let metric = match metric {
                Some(s) => Metric::parse(s).ok_or_else(|| Error::config("metric", format!("unknown metric `{s}`")))?,
                None => cfg.eval.metric,
            };
            let k = k.unwrap_or(cfg.eval.k);
            let rep = knn_translation_analysis(
                &m,
                split_of(&data.source, *split),
                split_of(&data.target, *split),
                &corr,
                &cfg.eval.item_field,
                k,
                metric,
            )?;
            fs::create_dir_all(&out)?;
            rep.write_jsonl(&out.join("neighbors.jsonl"))?;
            let summary = rep.summary_json()?;
            write(out.join("neighbors_summary.json"), &summary)?;
            print!("{summary}");
        }
        Command::Ablate => {
            let data = load_data(&cfg)?;
            prepare_out(&out, cli.force)?;
            write(out.join("resolved.cfg"), &cfg.resolved())?;
            let t = run_ablations::<f64>(
                &cfg.eval.plan(),
                &data.source,
                &data.target,
                &cfg.train,
                &cfg.seeds,
                cli.parallel,
            )?;
            t.write_csv(&out.join("ablation.csv"))?;
            write(out.join("ablation_summary.txt"), &t.summary())?;
            print!("{}", t.summary());
        }
        Command::Sweep { kind } => {
            let data = load_data(&cfg)?;
            prepare_out(&out, cli.force)?;
            write(out.join("resolved.cfg"), &cfg.resolved())?;
            let (s, t, e) = (&data.source, &data.target, &cfg.eval);
            let (table, name) = match kind {
                SweepKind::Sparsity => (
                    sweep_sparsity::<f64>(&e.ratios, &e.methods, s, t, &cfg.train, &cfg.seeds, cli.parallel)?,
                    "sweep_sparsity",
                ),
                SweepKind::Hyper => (
                    sweep_hyper::<f64>(&e.alphas, &e.betas, s, t, &cfg.train, &cfg.seeds, cli.parallel)?,
                    "sweep_hyper",
                ),
            };
            table.write_csv(&out.join(format!("{name}.csv")))?;
            print!("{}", table.summary());
        }
    }
    Ok(())
}

fn finish_stage_two(out: &Path, m: &Model, rec: &RunRecord) -> Result<()> {
    m.save(&out.join("stage2.ckpt"))?;
    m.save(&out.join("final.ckpt"))?;
    save_record(out, "stage2", rec)?;
    println!("stage 2 best val AUC {}", rec.best_val_auc);
    Ok(())
}
