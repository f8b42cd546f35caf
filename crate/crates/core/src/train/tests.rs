use super::*;
use crate::autodiff::Tape;
use crate::data::{chronological_split, generate_synthetic, Domain, Splits, SyntheticConfig};
use crate::error::Error;
use crate::eval::evaluate;
use crate::model::{loss_translation_total, ExtractorKind, ModelAssembly, Objective, Stage};

fn data(seed: u64) -> (Splits, Splits) {
    let g = generate_synthetic(&SyntheticConfig {
        latent_dim: 4,
        n_users: 60,
        n_items_per_domain: 20,
        n_examples: 600,
        n_projections: Some(4),
        bucket_count: 4,
        seed,
        ..Default::default()
    })
    .unwrap();
    (
        chronological_split(&g.source, (0.8, 0.1, 0.1)).unwrap(),
        chronological_split(&g.target, (0.8, 0.1, 0.1)).unwrap(),
    )
}

fn cfg() -> TrainConfig {
    let mut c = TrainConfig {
        lr: 5e-3,
        batch_size: 64,
        max_epochs: 4,
        patience: 100,
        seed: 3,
        ..Default::default()
    };
    c.model.d = 8;
    c.model.emb_dim = 4;
    c
}

fn fresh(c: &TrainConfig, s: &Splits, t: &Splits) -> ModelAssembly<f64> {
    ModelAssembly::translation(&c.model, s.train.schema().clone(), t.train.schema().clone(), c.init_seed()).unwrap()
}

#[test]
fn same_seed_same_run() {
    let (s, t) = data(1);
    let a = train_two_stage::<f64>(&s, &t, &cfg()).unwrap();
    let b = train_two_stage::<f64>(&s, &t, &cfg()).unwrap();
    assert_eq!(a.translation_record, b.translation_record);
    assert_eq!(a.augmentation_record, b.augmentation_record);
    assert_eq!(a.augmentation.params.snapshot(), b.augmentation.params.snapshot());
}

#[test]
fn different_seed_different_run() {
    let (s, t) = data(1);
    let a = train_translation::<f64>(&s, &t, &cfg()).unwrap().1;
    let b = train_translation::<f64>(&s, &t, &TrainConfig { seed: 4, ..cfg() }).unwrap().1;
    assert_ne!(a.history, b.history);
}

#[test]
fn zero_weights_reduce_to_joint_vanilla_bitwise() {
    let (s, t) = data(2);
    let c = TrainConfig {
        alpha: 0.0,
        beta: 0.0,
        ..cfg()
    };
    let mut a = fresh(&c, &s, &t);
    let ra = fit(&mut a, Objective::Translation, [Some(&s), Some(&t)], &c, None, &FitOptions::default()).unwrap();
    let mut b = fresh(&c, &s, &t);
    let rb = fit(&mut b, Objective::JointVanilla, [Some(&s), Some(&t)], &c, None, &FitOptions::default()).unwrap();
    assert_eq!(a.params.snapshot(), b.params.snapshot());
    assert_eq!(ra.history.len(), rb.history.len());
    for (x, y) in ra.history.iter().zip(&rb.history) {
        assert_eq!(x.val_auc.to_bits(), y.val_auc.to_bits());
        assert_eq!(x.losses.total.to_bits(), y.losses.total.to_bits());
        assert_eq!(x.losses.vani_s.to_bits(), y.losses.vani_s.to_bits());
        assert!(x.losses.cross_t > 0.0);
    }
}

#[test]
fn returned_model_is_best_checkpoint() {
    let (s, t) = data(3);
    let c = TrainConfig {
        max_epochs: 6,
        eval_every: Some(3),
        patience: 2,
        ..cfg()
    };
    let (m, r) = train_translation::<f64>(&s, &t, &c).unwrap();
    let best = r.history.iter().map(|h| h.val_auc).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(r.best_val_auc, best);
    let v = evaluate(&m, &t.val, Domain::Target, Stage::Translation).unwrap().auc;
    assert_eq!(v, r.best_val_auc);
    if r.stop_reason == StopReason::EarlyStop {
        let last = r.history.last().unwrap();
        assert!(last.step > r.best_step);
    }
}

#[test]
fn early_stop_fires_after_patience() {
    let (s, t) = data(3);
    let c = TrainConfig {
        lr: 0.5,
        max_epochs: 50,
        eval_every: Some(1),
        patience: 1,
        ..cfg()
    };
    let (_, r) = train_translation::<f64>(&s, &t, &c).unwrap();
    assert_eq!(r.stop_reason, StopReason::EarlyStop);
    let n = r.history.len();
    assert!(r.history[n - 1].val_auc <= r.best_val_auc);
}

#[test]
fn resume_reproduces_uninterrupted_run() {
    let (s, t) = data(4);
    let c = TrainConfig { eval_every: Some(5), ..cfg() };
    let full = train_translation::<f64>(&s, &t, &c).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("latest.ckpt");
    let mut m = fresh(&c, &s, &t);
    let opts = FitOptions {
        checkpoint: Some(path.clone()),
        stop_after_epochs: Some(2),
    };
    let part = fit(&mut m, Objective::Translation, [Some(&s), Some(&t)], &c, None, &opts).unwrap();
    assert_eq!(part.stop_reason, StopReason::Interrupted);

    let (mut m2, st) = load_training_checkpoint::<f64>(&path).unwrap();
    assert_eq!(st.epoch, 2);
    let done = fit(&mut m2, Objective::Translation, [Some(&s), Some(&t)], &c, Some(st), &FitOptions::default()).unwrap();
    assert_eq!(done, full.1);
    assert_eq!(m2.params.snapshot(), full.0.params.snapshot());
}

#[test]
fn training_state_round_trips() {
    let (s, t) = data(5);
    let c = cfg();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.ckpt");
    let mut m = fresh(&c, &s, &t);
    let opts = FitOptions {
        checkpoint: Some(path.clone()),
        stop_after_epochs: Some(1),
    };
    fit(&mut m, Objective::Translation, [Some(&s), Some(&t)], &c, None, &opts).unwrap();
    let (m2, st) = load_training_checkpoint::<f64>(&path).unwrap();
    save_training_checkpoint(&m2, &st, Objective::Translation, &dir.path().join("again.ckpt")).unwrap();
    let a = std::fs::read(&path).unwrap();
    let b = std::fs::read(dir.path().join("again.ckpt")).unwrap();
    assert_eq!(a, b);
    assert_eq!(m2.params.snapshot(), m.params.snapshot());
    assert_eq!(st.adam.step, st.step);
}

#[test]
fn augmentation_stage_never_reads_source() {
    let (s, t) = data(6);
    let c = cfg();
    let (m, _) = train_translation::<f64>(&s, &t, &c).unwrap();
    let before = [s.train.access_count(), s.val.access_count(), s.test.access_count()];
    assert!(before[0] > 0);
    let target_before = t.train.access_count();
    let (m2, r) = train_augmentation(&t, m.transfer_parameters(&[Domain::Target]).unwrap(), &c).unwrap();
    assert_eq!([s.train.access_count(), s.val.access_count(), s.test.access_count()], before);
    assert!(t.train.access_count() > target_before);
    assert_eq!(r.objective, "augmentation/target");
    assert!(evaluate(&m2, &t.test, Domain::Target, Stage::Augmentation).unwrap().auc.is_finite());
}

#[test]
fn mlp_baseline_never_reads_source() {
    let (s, t) = data(6);
    let (m, r) = train_baseline::<f64>(Baseline::Mlp, &s, &t, &cfg()).unwrap();
    assert_eq!(s.train.access_count(), 0);
    assert_eq!(r.objective, "single_domain/target");
    assert!(matches!(m.extractor(), crate::model::Extractor::Indep { .. }));
}

#[test]
fn joint_baselines_use_their_extractors() {
    let (s, t) = data(7);
    let c = TrainConfig { max_epochs: 1, ..cfg() };
    for b in [Baseline::ShareBottom, Baseline::Mmoe, Baseline::Ple] {
        let (m, r) = train_baseline::<f64>(b, &s, &t, &c).unwrap();
        assert_eq!(m.config.extractor.kind, b.extractor());
        assert_eq!(r.objective, "joint_vanilla");
        assert!(s.train.access_count() > 0);
    }
}

#[test]
fn nan_parameter_aborts_naming_component() {
    let (s, t) = data(8);
    let c = cfg();
    let mut m = fresh(&c, &s, &t);
    let id = m.params.id("target.tower.1.w").unwrap();
    m.params.get_mut(id).value.data_mut()[0] = f64::NAN;
    match fit(&mut m, Objective::Translation, [Some(&s), Some(&t)], &c, None, &FitOptions::default()) {
        Err(Error::Divergence { component, step, .. }) => {
            assert_eq!(component, "vani_t");
            assert_eq!(step, 0);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn objective_without_its_data_is_rejected() {
    let (s, t) = data(8);
    let c = cfg();
    let mut m = fresh(&c, &s, &t);
    let r = fit(&mut m, Objective::Translation, [None, Some(&t)], &c, None, &FitOptions::default());
    assert!(matches!(r, Err(Error::Contract(_))));
    let r = fit(&mut m, Objective::Augmentation(Domain::Target), [Some(&s), Some(&t)], &c, None, &FitOptions::default());
    assert!(matches!(r, Err(Error::Contract(_))), "stage-one model has no augmented tower");
}

#[test]
fn invalid_config_is_rejected() {
    for (c, key) in [
        (TrainConfig { alpha: -1.0, ..cfg() }, "train.alpha"),
        (TrainConfig { beta: -0.5, ..cfg() }, "train.beta"),
        (TrainConfig { lr: 0.0, ..cfg() }, "train.lr"),
        (TrainConfig { max_epochs: 0, ..cfg() }, "train.max_epochs"),
        (TrainConfig { patience: 0, ..cfg() }, "train.patience"),
        (TrainConfig { batch_size: 0, ..cfg() }, "train.batch_size"),
    ] {
        match c.validate() {
            Err(Error::Config { key: k, .. }) => assert_eq!(k, key),
            other => panic!("{key}: {other:?}"),
        }
    }
    assert!(cfg().validate().is_ok());
}

#[test]
fn translation_loss_decreases_under_small_step_gradient_descent() {
    let (s, t) = data(9);
    let c = cfg();
    let m0 = fresh(&c, &s, &t);
    let bs: Vec<_> = s.train.examples()[..16].iter().collect();
    let bt: Vec<_> = t.train.examples()[..16].iter().collect();
    let mut m = m0.clone();
    let mut prev = f64::INFINITY;
    for _ in 0..50 {
        let tape = Tape::new();
        let (l, br) = loss_translation_total(&tape, &m, &bs, &bt, 0.01, 0.1).unwrap();
        assert!(br.total <= prev + 1e-12, "{} > {prev}", br.total);
        prev = br.total;
        let g = tape.backward(l).unwrap();
        m.params.accumulate(&g);
        for p in m.params.iter_mut() {
            if let Some(g) = p.grad.take() {
                for (v, g) in p.value.data_mut().iter_mut().zip(g.data()) {
                    *v -= 1e-3 * g;
                }
            }
        }
    }
    let first = {
        let tape = Tape::new();
        loss_translation_total(&tape, &m0, &bs, &bt, 0.01, 0.1).unwrap().1.total
    };
    assert!(prev < first);
}

#[test]
fn augmentation_stage_keeps_transferred_parameters_trainable() {
    let (s, t) = data(10);
    let c = TrainConfig { max_epochs: 1, ..cfg() };
    let (m, _) = train_translation::<f64>(&s, &t, &c).unwrap();
    let transferred = m.transfer_parameters(&[Domain::Target]).unwrap();
    let (m2, _) = train_augmentation(&t, transferred.clone(), &c).unwrap();
    let moved = |name: &str| m2.params.by_name(name).unwrap().value != transferred.params.by_name(name).unwrap().value;
    assert!(moved("target.translator.W"));
    assert!(moved("shared.emb.user_id"));
    assert!(moved("target.emb.item_id"));
    assert!(!moved("source.translator.W"));
    assert!(!moved("source.emb.item_id"));
}

#[test]
fn run_record_jsonl_has_one_line_per_eval() {
    let (s, t) = data(11);
    let (_, r) = train_translation::<f64>(&s, &t, &TrainConfig { eval_every: Some(4), ..cfg() }).unwrap();
    let text = r.to_jsonl().unwrap();
    assert_eq!(text.lines().count(), r.history.len());
    let v: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    for k in ["step", "epoch", "losses", "val_auc", "wall_ms"] {
        assert!(v.get(k).is_some(), "{k}");
    }
    assert_eq!(v["wall_ms"], 0);
    assert!(r.summary_json().unwrap().contains("\"stop_reason\""));
}

#[test]
fn f32_training_runs() {
    let (s, t) = data(12);
    let c = TrainConfig {
        max_epochs: 2,
        ..cfg()
    };
    let run = train_two_stage::<f32>(&s, &t, &c).unwrap();
    assert!(run.augmentation_record.best_val_auc.is_finite());
}

#[test]
fn indep_extractor_runs_two_stages() {
    let (s, t) = data(13);
    let mut c = TrainConfig { max_epochs: 2, ..cfg() };
    c.model.extractor.kind = ExtractorKind::IndepMlp;
    let run = train_two_stage::<f64>(&s, &t, &c).unwrap();
    assert_eq!(run.augmentation.aug_tower(Domain::Target).unwrap().input_width(), 16);
}
