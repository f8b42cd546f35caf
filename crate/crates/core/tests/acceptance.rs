//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Exits 0 regardless of outcome unless `ACCEPTANCE_STRICT=1`, so a
//! criterion that does not hold is reported without failing the build.
//! `ACCEPTANCE_SKIP_BENCH=1` skips the long synthetic benchmark runs.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use cdanet::autodiff::{grad_check, ParamStore, Tape, Tensor, Var};
use cdanet::data::{
    chronological_split, generate_synthetic, Domain, Example, FieldKind, FieldSpec, Schema, Splits,
    SyntheticConfig,
};
use cdanet::eval::{
    auc, knn_translation_analysis, run_ablations, run_method, sweep_sparsity, AblationPlan, Method, Metric,
    ResultTable,
};
use cdanet::model::{
    loss_augmentation, loss_orth, loss_translation_total, loss_vanilla, loss_cross, ModelAssembly,
    ModelConfig, Objective,
};
use cdanet::train::{fit, train_augmentation, train_translation, Adam, FitOptions, TrainConfig};
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Suite {
    passed: usize,
    failed: usize,
}

impl Suite {
    fn report(&mut self, id: &str, name: &str, pass: bool, detail: String, start: Instant) {
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("{tag} [{id}] {name}: {detail} ({:.1}s)", start.elapsed().as_secs_f64());
        if pass {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
    }
}

fn rand_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor<f64> {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
}

fn random_orthonormal(r: &mut ChaCha8Rng, d: usize) -> Tensor<f64> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    while rows.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
        for u in &rows {
            let p: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
        }
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-3 {
            rows.push(v.into_iter().map(|a| a / n).collect());
        }
    }
    Tensor::matrix(d, d, rows.concat()).unwrap()
}

fn small_data(seed: u64) -> (Splits, Splits) {
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

fn small_cfg() -> TrainConfig {
    let mut c = TrainConfig {
        lr: 5e-3,
        batch_size: 64,
        max_epochs: 3,
        patience: 100,
        seed: 3,
        ..Default::default()
    };
    c.model.d = 8;
    c.model.emb_dim = 4;
    c
}

fn mixed_schemas() -> (Arc<Schema>, Arc<Schema>) {
    let s = Schema::new(
        "source",
        vec![
            FieldSpec::new("user_id", FieldKind::Id, 5, true),
            FieldSpec::new("item_id", FieldKind::Id, 4, false),
            FieldSpec::new("tags", FieldKind::MultiHot, 3, false),
            FieldSpec::new("price", FieldKind::Dense, 2, false),
        ],
    )
    .unwrap();
    let t = Schema::new(
        "target",
        vec![
            FieldSpec::new("user_id", FieldKind::Id, 5, true),
            FieldSpec::new("item_id", FieldKind::Id, 6, false),
            FieldSpec::new("tags", FieldKind::MultiHot, 3, false),
        ],
    )
    .unwrap();
    (Arc::new(s), Arc::new(t))
}

fn random_examples(r: &mut ChaCha8Rng, schema: &Schema, n: usize) -> Vec<Example> {
    use cdanet::data::FieldValue;
    (0..n)
        .map(|i| Example {
            values: schema
                .fields
                .iter()
                .map(|f| match f.kind {
                    FieldKind::Id | FieldKind::OneHot => FieldValue::Index(r.random_range(0..f.size)),
                    FieldKind::MultiHot => {
                        let k = r.random_range(1..=f.size);
                        FieldValue::Set((0..k).map(|_| r.random_range(0..f.size)).collect())
                    }
                    FieldKind::Dense => FieldValue::Dense((0..f.size).map(|_| r.random_range(-1.0..1.0)).collect()),
                })
                .collect(),
            label: (i % 2) as u8,
            ts: i as i64,
        })
        .collect()
}

fn jitter(m: &mut ModelAssembly<f64>, r: &mut ChaCha8Rng) {
    for p in m.params.iter_mut().filter(|p| p.name.ends_with(".b")) {
        p.value.data_mut().iter_mut().for_each(|v| *v = r.random_range(-0.2..0.2));
    }
}

fn model_grad_err<F>(m: &ModelAssembly<f64>, f: F) -> f64
where
    F: Fn(&Tape<f64>, &ModelAssembly<f64>) -> cdanet::Result<Var>,
{
    let mut store = m.params.clone();
    grad_check(&mut store, 1e-5, |t, s| {
        let mut mm = m.clone();
        mm.params = s.clone();
        f(t, &mm)
    })
    .unwrap()
    .max_rel_err
}

type Op = fn(&Tape<f64>, &[Var]) -> cdanet::Result<Var>;

fn criterion_1(suite: &mut Suite) {
    let start = Instant::now();
    let ops: Vec<(&str, Vec<(usize, usize)>, Op)> = vec![
        ("matmul", vec![(5, 3), (3, 4)], |t, p| t.sum(t.matmul(p[0], p[1])?)),
        ("transpose", vec![(5, 3), (5, 3)], |t, p| t.sum(t.matmul(t.transpose(p[0])?, p[1])?)),
        ("concat", vec![(5, 3), (5, 2), (5, 5)], |t, p| t.frobenius_sq(t.sub(t.concat(&[p[0], p[1]])?, p[2])?)),
        ("add", vec![(5, 3), (5, 3)], |t, p| t.frobenius_sq(t.add(p[0], p[1])?)),
        ("sub", vec![(5, 3), (5, 3)], |t, p| t.frobenius_sq(t.sub(p[0], p[1])?)),
        ("add_row_bias", vec![(5, 3), (1, 3)], |t, p| t.frobenius_sq(t.add_row_bias(p[0], p[1])?)),
        ("scale", vec![(5, 3)], |t, p| t.frobenius_sq(t.scale(p[0], -1.7)?)),
        ("sigmoid", vec![(5, 3)], |t, p| t.frobenius_sq(t.sigmoid(p[0])?)),
        ("relu", vec![(5, 3)], |t, p| t.frobenius_sq(t.relu(p[0])?)),
        ("sum", vec![(5, 3)], |t, p| t.sum(t.sigmoid(p[0])?)),
        ("mean", vec![(5, 3)], |t, p| t.mean(t.sigmoid(p[0])?)),
        ("frobenius_sq", vec![(5, 3)], |t, p| t.frobenius_sq(p[0])),
        ("bce_with_logits", vec![(5, 1)], |t, p| t.bce_with_logits(p[0], &[1.0, 0.0, 0.0, 1.0, 1.0])),
        ("gather_rows", vec![(6, 3)], |t, p| t.frobenius_sq(t.gather_rows(p[0], &[0, 2, 2, 5, 1], "t")?)),
        ("gather_mean", vec![(6, 3)], |t, p| {
            t.frobenius_sq(t.gather_mean(p[0], &[0, 2, 3, 5, 6, 8], &[0, 1, 4, 3, 5, 2, 1, 0], "m")?)
        }),
        ("softmax_rows", vec![(5, 3), (5, 3)], |t, p| t.sum(t.mul_rows(p[1], t.select_col(t.softmax_rows(p[0])?, 1)?)?)),
        ("select_col", vec![(5, 3)], |t, p| t.frobenius_sq(t.select_col(p[0], 2)?)),
        ("mul_rows", vec![(5, 3), (5, 1)], |t, p| t.frobenius_sq(t.mul_rows(p[0], p[1])?)),
    ];
    let mut worst: (f64, String) = (0.0, String::new());
    for (name, shapes, op) in &ops {
        for point in 0..5u64 {
            let mut r = ChaCha8Rng::seed_from_u64(1000 * point + name.len() as u64);
            let mut store = ParamStore::new();
            let ids: Vec<_> = shapes
                .iter()
                .enumerate()
                .map(|(i, &(a, b))| store.add(format!("x{i}"), rand_matrix(&mut r, a, b)).unwrap())
                .collect();
            let rep = grad_check(&mut store, 1e-5, |t, s| {
                let p: Vec<Var> = ids.iter().map(|&i| t.param(s, i)).collect();
                op(t, &p)
            })
            .unwrap();
            if rep.max_rel_err > worst.0 || rep.max_rel_err.is_nan() {
                worst = (rep.max_rel_err, format!("{name}@{point}"));
            }
        }
    }
    let (ss, ts) = mixed_schemas();
    let mut loss_worst = 0.0f64;
    for point in 0..5u64 {
        let mut r = ChaCha8Rng::seed_from_u64(77 + point);
        let cfg = ModelConfig {
            d: 4,
            emb_dim: 3,
            tower_hidden: vec![5],
            emb_init_std: 0.5,
            ..Default::default()
        };
        let bs = random_examples(&mut r, &ss, 6);
        let bt = random_examples(&mut r, &ts, 5);
        let (rs, rt): (Vec<&Example>, Vec<&Example>) = (bs.iter().collect(), bt.iter().collect());
        let mut m = ModelAssembly::<f64>::translation(&cfg, ss.clone(), ts.clone(), point).unwrap();
        jitter(&mut m, &mut r);
        let w = random_orthonormal(&mut r, 4);
        let id = m.translator(Domain::Target);
        m.params.get_mut(id).value = Tensor::matrix(4, 4, w.data().iter().map(|x| x * 1.1).collect()).unwrap();
        m.configure_trainable(Objective::Translation).unwrap();
        let e7 = model_grad_err(&m, |t, m| Ok(loss_translation_total(t, m, &rs, &rt, 0.3, 0.2)?.0));
        let mut a = ModelAssembly::<f64>::augmentation(&cfg, ss.clone(), ts.clone(), point, &[Domain::Target]).unwrap();
        jitter(&mut a, &mut r);
        a.configure_trainable(Objective::Augmentation(Domain::Target)).unwrap();
        let e9 = model_grad_err(&a, |t, m| Ok(loss_augmentation(t, m, Domain::Target, &rt, 0.2)?.0));
        loss_worst = loss_worst.max(e7).max(e9);
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst.0 < 1e-4 && loss_worst < 1e-4 && secs < 30.0;
    suite.report(
        "1",
        "gradient correctness",
        pass,
        format!(
            "{} ops x 5 points worst {:.2e} at {}; translation/augmentation losses worst {:.2e}; tol 1e-4, <30s",
            ops.len(),
            worst.0,
            worst.1,
            loss_worst
        ),
        start,
    );
}

fn pairwise(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                den += 1.0;
                num += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / den
}

fn criterion_2(suite: &mut Suite) {
    let start = Instant::now();
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut min_tied = 1.0f64;
    let mut done = 0;
    while done < 200 {
        let n = r.random_range(2..=200);
        let levels = r.random_range(1..=(n / 5).max(1));
        let scores: Vec<f64> = (0..n).map(|_| r.random_range(0..levels) as f64 / levels as f64).collect();
        let labels: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
        if !labels.contains(&0) || !labels.contains(&1) {
            continue;
        }
        let mut counts: HashMap<u64, usize> = HashMap::new();
        for s in &scores {
            *counts.entry(s.to_bits()).or_default() += 1;
        }
        let tied = scores.iter().filter(|s| counts[&s.to_bits()] > 1).count() as f64 / n as f64;
        min_tied = min_tied.min(tied);
        worst = worst.max((auc(&scores, &labels).unwrap() - pairwise(&scores, &labels)).abs());
        done += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    suite.report(
        "2",
        "AUC oracle equivalence",
        worst <= 1e-12 && min_tied >= 0.2 && secs < 10.0,
        format!("200 instances, min tied fraction {min_tied:.2}, max |diff| {worst:.1e}; tol 1e-12, <10s"),
        start,
    );
}

fn copy_prefix(m: &mut ModelAssembly<f64>, from: &str, to: &str) {
    let names: Vec<String> = m.params.iter().map(|(_, p)| p.name.clone()).filter(|n| n.starts_with(from)).collect();
    for n in names {
        let v = m.params.by_name(&n).unwrap().value.clone();
        let id = m.params.id(&n.replacen(from, to, 1)).unwrap();
        m.params.get_mut(id).value = v;
    }
}

fn criterion_3(suite: &mut Suite) {
    let start = Instant::now();
    let (s, t) = small_data(1);
    let c = small_cfg();
    let mut m =
        ModelAssembly::<f64>::translation(&c.model, s.train.schema().clone(), t.train.schema().clone(), 5).unwrap();
    m.configure_trainable(Objective::Translation).unwrap();
    let mut adam = Adam::new(&m.params);
    let (alpha, beta) = (0.37, 0.21);
    let mut worst = 0.0f64;
    let mut batches = 0;
    for (cs, ct) in s.train.examples().chunks(32).zip(t.train.examples().chunks(32)) {
        let (bs, bt): (Vec<&Example>, Vec<&Example>) = (cs.iter().collect(), ct.iter().collect());
        let tape = Tape::new();
        let (total, br) = loss_translation_total(&tape, &m, &bs, &bt, alpha, beta).unwrap();
        let recomposed = br.vani_s + br.vani_t + alpha * (br.cross_s + br.cross_t) + beta * br.orth;
        worst = worst.max((tape.scalar_value(total) - recomposed).abs());
        m.params.accumulate(&tape.backward(total).unwrap());
        adam.step(&mut m.params, 1e-2).unwrap();
        batches += 1;
    }

    let zero = TrainConfig { alpha: 0.0, beta: 0.0, ..c.clone() };
    let fresh = || {
        ModelAssembly::<f64>::translation(&zero.model, s.train.schema().clone(), t.train.schema().clone(), 9).unwrap()
    };
    let (mut a, mut b) = (fresh(), fresh());
    let ra = fit(&mut a, Objective::Translation, [Some(&s), Some(&t)], &zero, None, &FitOptions::default()).unwrap();
    let rb = fit(&mut b, Objective::JointVanilla, [Some(&s), Some(&t)], &zero, None, &FitOptions::default()).unwrap();
    let bitwise = a.params.snapshot() == b.params.snapshot()
        && ra.history.iter().zip(&rb.history).all(|(x, y)| x.val_auc == y.val_auc)
        && ra.history.len() == rb.history.len();

    let mut w = fresh();
    copy_prefix(&mut w, "source.tower.", "target.tower.");
    let batch_s: Vec<&Example> = s.train.examples()[..40].iter().collect();
    let batch_t: Vec<&Example> = t.train.examples()[..40].iter().collect();
    let tape = Tape::new();
    let mut same = true;
    for (d, batch) in [(Domain::Source, &batch_s), (Domain::Target, &batch_t)] {
        let z = w.latent(&tape, d, batch).unwrap();
        let y: Vec<f64> = batch.iter().map(|e| f64::from(e.label)).collect();
        let v = tape.scalar_value(loss_vanilla(&tape, &w, d, z, &y).unwrap());
        let x = tape.scalar_value(loss_cross(&tape, &w, d, z, &y).unwrap());
        same &= v.to_bits() == x.to_bits();
    }
    suite.report(
        "3",
        "translation objective decomposition and reductions",
        worst <= 1e-10 && bitwise && same,
        format!(
            "max |total - recomposed| {worst:.1e} over {batches} training batches (tol 1e-10); \
             alpha=beta=0 equals joint vanilla bitwise: {bitwise}; W=I with copied towers gives cross == vanilla: {same}"
        ),
        start,
    );
}

fn criterion_4(suite: &mut Suite) {
    let start = Instant::now();
    let (ss, ts) = mixed_schemas();
    let cfg = ModelConfig {
        d: 6,
        emb_dim: 3,
        ..Default::default()
    };
    let mut m = ModelAssembly::<f64>::translation(&cfg, ss, ts, 0).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let orth_at = |m: &ModelAssembly<f64>, z: &Tensor<f64>| {
        let t = Tape::new();
        let (a, b) = (t.constant(z.clone()), t.constant(z.clone()));
        t.scalar_value(loss_orth(&t, m, a, b).unwrap())
    };
    let z = rand_matrix(&mut r, 10, 6);
    let identity = orth_at(&m, &z);
    let mut rot_worst = 0.0f64;
    let mut geo_worst = 0.0f64;
    for _ in 0..10 {
        for d in Domain::BOTH {
            let id = m.translator(d);
            m.params.get_mut(id).value = random_orthonormal(&mut r, 6);
        }
        rot_worst = rot_worst.max(orth_at(&m, &z));
        let t = Tape::new();
        let zt = t.value(m.translate(&t, Domain::Target, t.constant(z.clone())).unwrap());
        for i in 0..10 {
            let n = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            geo_worst = geo_worst.max((n(z.row(i)) - n(zt.row(i))).abs());
            for j in 0..10 {
                let cos = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (n(a) * n(b));
                geo_worst = geo_worst.max((cos(z.row(i), z.row(j)) - cos(zt.row(i), zt.row(j))).abs());
            }
        }
    }
    let mut u = vec![0.0; 6];
    u[2] = 1.0;
    let unit = Tensor::matrix(1, 6, u).unwrap();
    for d in Domain::BOTH {
        let id = m.translator(d);
        m.params.get_mut(id).value = Tensor::matrix(6, 6, Tensor::<f64>::identity(6).data().iter().map(|x| 2.0 * x).collect()).unwrap();
    }
    let t = Tape::new();
    let nine = t.scalar_value(cdanet::model::orth_term(&t, &m, Domain::Target, t.constant(unit)).unwrap());
    suite.report(
        "4",
        "orthogonality properties",
        identity < 1e-16 && rot_worst < 1e-16 && nine == 9.0 && geo_worst < 1e-9,
        format!(
            "identity {identity:.1e}, random rotations max {rot_worst:.1e} (tol 1e-16); 2I on a unit row = {nine}; \
             norm/cosine drift {geo_worst:.1e} (tol 1e-9)"
        ),
        start,
    );
}

fn criterion_5(suite: &mut Suite) {
    let start = Instant::now();
    let (s, t) = small_data(2);
    let c = small_cfg();
    let (stage1, _) = train_translation::<f64>(&s, &t, &c).unwrap();
    let mut transferred = stage1.transfer_parameters(&[Domain::Target]).unwrap();
    let names = stage1.transferable_names();
    let exact = names
        .iter()
        .all(|n| stage1.params.by_name(n).unwrap().value == transferred.params.by_name(n).unwrap().value);
    let has_core = ["emb", "extractor", "translator"]
        .iter()
        .all(|k| names.iter().any(|n| n.contains(k)));
    let width = transferred.aug_tower(Domain::Target).map(|m| m.input_width());
    let no_tower1 = transferred.tower(Domain::Target).is_none() && transferred.tower(Domain::Source).is_none();
    let n0 = &names[0];
    let id = transferred.params.id(n0).unwrap();
    transferred.params.get_mut(id).value.data_mut()[0] += 1.0;
    let no_alias = stage1.params.by_name(n0).unwrap().value != transferred.params.by_name(n0).unwrap().value;
    transferred.params.get_mut(id).value.data_mut()[0] -= 1.0;
    let before = [s.train.access_count(), s.val.access_count(), s.test.access_count()];
    let (_, _) = train_augmentation(&t, transferred, &c).unwrap();
    let after = [s.train.access_count(), s.val.access_count(), s.test.access_count()];
    let untouched = before == after;
    suite.report(
        "5",
        "two-stage contract",
        exact && has_core && width == Some(2 * c.model.d) && no_tower1 && no_alias && untouched,
        format!(
            "{} transferred tensors bit-exact: {exact}; augmented tower input {width:?} (2d = {}); \
             no stage-one towers: {no_tower1}; no aliasing: {no_alias}; source reads during stage two: {}",
            names.len(),
            2 * c.model.d,
            after.iter().zip(&before).map(|(a, b)| a - b).sum::<u64>()
        ),
        start,
    );
}

fn bench_cfg() -> TrainConfig {
    let mut c = TrainConfig {
        max_epochs: 30,
        ..Default::default()
    };
    c.model.d = 32;
    c.model.emb_dim = 8;
    c
}

fn bench_data(sigma: f64) -> (Splits, Splits, cdanet::data::SyntheticData) {
    let g = generate_synthetic(&SyntheticConfig {
        feature_noise_sigma: sigma,
        ..Default::default()
    })
    .unwrap();
    (
        chronological_split(&g.source, (0.8, 0.1, 0.1)).unwrap(),
        chronological_split(&g.target, (0.8, 0.1, 0.1)).unwrap(),
        g,
    )
}

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const RATIOS: [f64; 4] = [0.2, 0.4, 0.6, 0.8];

fn mean(t: &ResultTable, cell: &str) -> f64 {
    t.mean_auc(cell).unwrap_or(f64::NAN)
}

fn criteria_6_and_8(suite: &mut Suite) {
    let start = Instant::now();
    let (s, t, _) = bench_data(SyntheticConfig::default().feature_noise_sigma);
    let cfg = bench_cfg();
    eprintln!("benchmark: {} train examples per domain, ablations...", t.train.len());
    let abl = run_ablations::<f64>(&AblationPlan::all(), &s, &t, &cfg, &SEEDS, 1).unwrap();
    eprintln!("benchmark: mlp...");
    let mut mlp = ResultTable::default();
    for seed in SEEDS {
        let c = TrainConfig { seed, ..cfg.clone() };
        mlp.rows.push(run_method::<f64>(Method::Mlp, &s, &t, &c).unwrap());
    }
    let full = mean(&abl, "full");
    let base = mean(&mlp, "mlp");
    let others: Vec<(&str, f64)> = ["wo_orth", "wo_cross", "wo_translation_network", "wo_augmentation_network"]
        .iter()
        .map(|v| (*v, mean(&abl, v)))
        .collect();
    let lift_ok = full - base >= 0.005;
    let order_ok = others.iter().all(|&(_, m)| full >= m);
    let listed: Vec<String> = others.iter().map(|(v, m)| format!("{v} {m:.4}")).collect();
    suite.report(
        "6",
        "synthetic end-to-end lift",
        lift_ok && order_ok,
        format!(
            "mean test AUC over 5 seeds: full {full:.4}, mlp {base:.4} (lift {:+.4}, need >= 0.005); {}",
            full - base,
            listed.join(", ")
        ),
        start,
    );

    let start = Instant::now();
    eprintln!("benchmark: sparsity sweep...");
    let sw = sweep_sparsity::<f64>(&RATIOS, &[Method::Cdanet, Method::Mlp], &s, &t, &cfg, &SEEDS, 1).unwrap();
    let at = |m: Method, r: f64| -> f64 {
        if r == 1.0 {
            match m {
                Method::Cdanet => full,
                Method::Mlp => base,
            }
        } else {
            mean(&sw, &format!("{}@{r}", m.as_str()))
        }
    };
    let all: Vec<f64> = RATIOS.iter().copied().chain([1.0]).collect();
    let mono = [Method::Cdanet, Method::Mlp].iter().all(|&m| at(m, 1.0) >= at(m, 0.2));
    let dominates = all.iter().all(|&r| at(Method::Cdanet, r) >= at(Method::Mlp, r));
    let curve: Vec<String> = all
        .iter()
        .map(|&r| format!("{r}: {:.4}/{:.4}", at(Method::Cdanet, r), at(Method::Mlp, r)))
        .collect();
    suite.report(
        "8",
        "sparsity sweep shape",
        mono && dominates,
        format!(
            "cdanet/mlp mean AUC by ratio [{}]; 1.0 >= 0.2 for both: {mono}; cdanet >= mlp everywhere: {dominates}",
            curve.join(", ")
        ),
        start,
    );
}

fn criterion_7(suite: &mut Suite) {
    let start = Instant::now();
    let (s, t, g) = bench_data(0.0);
    let cfg = bench_cfg();
    let untrained =
        ModelAssembly::<f64>::translation(&cfg.model, s.train.schema().clone(), t.train.schema().clone(), cfg.init_seed())
            .unwrap();
    let (trained, _) = train_translation::<f64>(&s, &t, &cfg).unwrap();
    let run = |m: &ModelAssembly<f64>| {
        knn_translation_analysis(m, &s.test, &t.test, &g.correspondence, "item_id", 5, Metric::Cosine).unwrap()
    };
    let (a, b) = (run(&trained), run(&untrained));
    let ratio = a.hit_rate / a.chance_rate;
    suite.report(
        "7",
        "translated-feature content",
        ratio > 10.0 && b.z_score().abs() <= 3.0,
        format!(
            "zero-noise top-5: trained hit {:.4} vs chance {:.4} ({ratio:.2}x, need > 10x); \
             untrained hit {:.4}, {:+.2} standard errors from chance (need within 3); {} queries, {} candidates",
            a.hit_rate,
            a.chance_rate,
            b.hit_rate,
            b.z_score(),
            a.queries.len(),
            a.n_candidates
        ),
        start,
    );
}

const CLI_CFG: &str = "\
[run]
seed = 1
seeds = 0,1,2

[data.synthetic]
latent_dim = 4
n_users = 60
n_items_per_domain = 20
n_examples = 600
n_projections = 4
bucket_count = 4

[model]
d = 8
emb_dim = 4

[train]
lr = 0.005
batch_size = 64
max_epochs = 2

[eval]
variants = full,wo_orth
ratios = 0.5,1
alphas = 0,0.1
betas = 0.1
";

fn run_all_commands(cfg: &Path, out: &Path) -> Result<(), String> {
    let bin = env!("CARGO_BIN_EXE_cdanet");
    let go = |args: &[&str]| -> Result<(), String> {
        let o = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
        if o.status.success() {
            Ok(())
        } else {
            Err(format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr)))
        }
    };
    let p = |sub: &str| out.join(sub).to_str().unwrap().to_string();
    let c = cfg.to_str().unwrap();
    go(&["gen-data", "--config", c, "--out", &p("data")])?;
    go(&["train", "--config", c, "--out", &p("train")])?;
    let ck = p("train/final.ckpt");
    go(&["eval", "--config", c, "--out", &p("train"), "--checkpoint", &ck])?;
    go(&["analyze", "--config", c, "--out", &p("train"), "--checkpoint", &p("train/stage1.ckpt")])?;
    go(&["ablate", "--config", c, "--out", &p("ablate")])?;
    go(&["sweep", "--kind", "sparsity", "--config", c, "--out", &p("sparsity")])?;
    go(&["sweep", "--kind", "hyper", "--config", c, "--out", &p("hyper")])?;
    Ok(())
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().to_string();
                let mut bytes = fs::read(&path).unwrap();
                // output locations are the only thing allowed to differ
                if rel.ends_with(".cfg") || rel.ends_with(".json") {
                    let text = String::from_utf8(bytes).unwrap();
                    bytes = text.replace(dir.to_str().unwrap(), "<out>").into_bytes();
                }
                out.push((rel, bytes));
            }
        }
    }
    out.sort();
    out
}

fn criterion_9(suite: &mut Suite) {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    fs::write(&cfg, CLI_CFG).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let runs = run_all_commands(&cfg, &a).and_then(|_| run_all_commands(&cfg, &b));
    let (fa, fb) = (files(&a), files(&b));
    let identical = runs.is_ok() && !fa.is_empty() && fa == fb;

    let (s, t) = small_data(3);
    let (m, _) = train_translation::<f64>(&s, &t, &small_cfg()).unwrap();
    let ck = dir.path().join("m.ckpt");
    m.save(&ck).unwrap();
    let back = ModelAssembly::<f64>::load(&ck).unwrap();
    let ck2 = dir.path().join("m2.ckpt");
    back.save(&ck2).unwrap();
    let round_trip = back.params.snapshot() == m.params.snapshot() && fs::read(&ck).unwrap() == fs::read(&ck2).unwrap();
    let detail = match &runs {
        Ok(()) => format!(
            "{} metric/artifact files from 7 commands identical across reruns: {identical}; checkpoint round trip bitwise: {round_trip}",
            fa.len()
        ),
        Err(e) => format!("command failed: {e}"),
    };
    suite.report("9", "reproducibility", identical && round_trip, detail, start);
}

fn main() {
    let total = Instant::now();
    let mut suite = Suite { passed: 0, failed: 0 };
    criterion_1(&mut suite);
    criterion_2(&mut suite);
    criterion_3(&mut suite);
    criterion_4(&mut suite);
    criterion_5(&mut suite);
    criterion_9(&mut suite);
    if std::env::var("ACCEPTANCE_SKIP_BENCH").is_ok_and(|v| v == "1") {
        println!("SKIP [6] [7] [8] synthetic benchmark (ACCEPTANCE_SKIP_BENCH=1)");
    } else {
        criterion_7(&mut suite);
        criteria_6_and_8(&mut suite);
    }
    println!(
        "acceptance: {} passed, {} failed ({:.0}s)",
        suite.passed,
        suite.failed,
        total.elapsed().as_secs_f64()
    );
    if suite.failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
