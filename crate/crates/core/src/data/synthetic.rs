//! Two-domain click generator with known ground truth.
//!
//! Users and items carry latent vectors drawn from `N(0, I_k)`. Item `j` of
//! the target domain and item `pair[j]` of the source domain share one
//! latent, and the click probability of a (user, item) pair is
//! `σ(u·v + label_bias)` in both domains. Each domain observes an example
//! only through its own fixed random projection `A_d [u; v]` (rows of unit
//! norm) plus Gaussian noise: every projected coordinate is bucketed into
//! an equal-mass one-hot field, and the raw coordinates are also exposed as
//! one dense field. User ids are overlapped across domains, item ids are
//! not.

use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::erf::erfc;

use super::dataset::{Dataset, Domain, Example, FieldValue};
use super::schema::{FieldKind, FieldSpec, Schema};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub latent_dim: usize,
    pub n_users: usize,
    pub n_items_per_domain: usize,
    pub overlap_user_fraction: f64,
    pub feature_noise_sigma: f64,
    pub bucket_count: usize,
    pub label_bias: f64,
    /// Examples generated per domain (before splitting).
    pub n_examples: usize,
    /// Projected coordinates per domain; `None` means `2 · latent_dim`.
    pub n_projections: Option<usize>,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            latent_dim: 8,
            n_users: 1000,
            n_items_per_domain: 200,
            overlap_user_fraction: 0.5,
            feature_noise_sigma: 0.1,
            bucket_count: 8,
            label_bias: 0.0,
            n_examples: 25_000,
            n_projections: None,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn projections(&self) -> usize {
        self.n_projections.unwrap_or(2 * self.latent_dim)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |k: &str, m: &str| Err(Error::config(format!("data.synthetic.{k}"), m));
        if self.latent_dim == 0 {
            return bad("latent_dim", "must be >= 1");
        }
        if self.n_users < 2 {
            return bad("n_users", "must be >= 2");
        }
        if self.n_items_per_domain == 0 {
            return bad("n_items_per_domain", "must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.overlap_user_fraction) {
            return bad("overlap_user_fraction", "must be in [0, 1]");
        }
        if !(self.feature_noise_sigma >= 0.0) || !self.feature_noise_sigma.is_finite() {
            return bad("feature_noise_sigma", "must be >= 0");
        }
        if self.bucket_count == 0 {
            return bad("bucket_count", "must be >= 1");
        }
        if !self.label_bias.is_finite() {
            return bad("label_bias", "must be finite");
        }
        if self.n_examples == 0 {
            return bad("n_examples", "must be >= 1");
        }
        if self.projections() == 0 {
            return bad("n_projections", "must be >= 1");
        }
        Ok(())
    }

    pub fn schema(&self, domain: Domain) -> Schema {
        let m = self.projections();
        let mut fields = vec![
            FieldSpec::new("user_id", FieldKind::Id, self.n_users, true),
            FieldSpec::new("item_id", FieldKind::Id, self.n_items_per_domain, false),
        ];
        for j in 0..m {
            fields.push(FieldSpec::new(format!("p{j}"), FieldKind::OneHot, self.bucket_count, false));
        }
        fields.push(FieldSpec::new("proj", FieldKind::Dense, m, false));
        Schema::new(domain.as_str(), fields).expect("generated schema is valid")
    }
}

/// Ground-truth pairing: target item id → source item id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Correspondence {
    pub target_to_source: Vec<usize>,
}

impl Correspondence {
    pub fn source_of(&self, target_item: usize) -> Option<usize> {
        self.target_to_source.get(target_item).copied()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["target_item", "source_item"])?;
        for (t, s) in self.target_to_source.iter().enumerate() {
            w.write_record([t.to_string(), s.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the two-column CSV; rows must list target items `0..n` in order
    /// and the mapping must be injective.
    pub fn load(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut map = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let parse = |c: usize| -> Result<usize> {
                rec.get(c).and_then(|s| s.trim().parse().ok()).ok_or(Error::Parse {
                    line,
                    msg: "expected two non-negative integers".into(),
                })
            };
            let (t, s) = (parse(0)?, parse(1)?);
            if t != map.len() {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected target item {}, got {t}", map.len()),
                });
            }
            map.push(s);
        }
        let mut seen = map.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Data("correspondence is not injective".into()));
        }
        Ok(Correspondence { target_to_source: map })
    }
}

/// The latent state behind a generated benchmark.
#[derive(Debug, Clone)]
pub struct World {
    pub user_latents: Vec<Vec<f64>>,
    /// Indexed by target item id; source item `pair[j]` has the same latent.
    pub item_latents: Vec<Vec<f64>>,
    pub source_users: Vec<usize>,
    pub target_users: Vec<usize>,
    pub label_bias: f64,
}

impl World {
    /// Click probability of a user on a target item (identical for its
    /// paired source item).
    pub fn click_prob(&self, user: usize, target_item: usize) -> f64 {
        let a: f64 = self.user_latents[user]
            .iter()
            .zip(&self.item_latents[target_item])
            .map(|(x, y)| x * y)
            .sum();
        crate::scalar::sigmoid(a + self.label_bias)
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub source: Dataset,
    pub target: Dataset,
    pub correspondence: Correspondence,
    pub world: World,
}

fn normal_vec(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn projection(rng: &mut Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| {
            let mut r = normal_vec(rng, cols);
            let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            r.iter_mut().for_each(|x| *x /= norm);
            r
        })
        .collect()
}

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let k = cfg.latent_dim;
    let m = cfg.projections();

    let mut r = rng::stream(cfg.seed, "generator/users");
    let user_latents: Vec<Vec<f64>> = (0..cfg.n_users).map(|_| normal_vec(&mut r, k)).collect();
    let mut r = rng::stream(cfg.seed, "generator/items");
    let item_latents: Vec<Vec<f64>> = (0..cfg.n_items_per_domain).map(|_| normal_vec(&mut r, k)).collect();

    let mut pair: Vec<usize> = (0..cfg.n_items_per_domain).collect();
    pair.shuffle(&mut rng::stream(cfg.seed, "generator/pairing"));
    // inverse: source item id -> target item id (latent index)
    let mut source_latent_of = vec![0; pair.len()];
    for (t, &s) in pair.iter().enumerate() {
        source_latent_of[s] = t;
    }

    let mut users: Vec<usize> = (0..cfg.n_users).collect();
    users.shuffle(&mut rng::stream(cfg.seed, "generator/membership"));
    let n_shared = (cfg.overlap_user_fraction * cfg.n_users as f64).round() as usize;
    let (shared, rest) = users.split_at(n_shared);
    let mut source_users = shared.to_vec();
    let mut target_users = shared.to_vec();
    for (i, &u) in rest.iter().enumerate() {
        if i % 2 == 0 {
            source_users.push(u);
        } else {
            target_users.push(u);
        }
    }
    source_users.sort_unstable();
    target_users.sort_unstable();
    if source_users.is_empty() || target_users.is_empty() {
        return Err(Error::config("data.synthetic.n_users", "a domain ended up with no users"));
    }

    let world = World {
        user_latents,
        item_latents,
        source_users,
        target_users,
        label_bias: cfg.label_bias,
    };

    let scale = (1.0 + cfg.feature_noise_sigma * cfg.feature_noise_sigma).sqrt();
    let make = |domain: Domain| -> Dataset {
        let tag = domain.as_str();
        let a = projection(&mut rng::stream(cfg.seed, &format!("generator/projection/{tag}")), m, 2 * k);
        let mut r = rng::stream(cfg.seed, &format!("generator/examples/{tag}"));
        let pool = match domain {
            Domain::Source => &world.source_users,
            Domain::Target => &world.target_users,
        };
        let mut examples = Vec::with_capacity(cfg.n_examples);
        for i in 0..cfg.n_examples {
            let user = pool[r.random_range(0..pool.len())];
            let item = r.random_range(0..cfg.n_items_per_domain);
            let latent_item = match domain {
                Domain::Source => source_latent_of[item],
                Domain::Target => item,
            };
            let u = &world.user_latents[user];
            let v = &world.item_latents[latent_item];
            let p = world.click_prob(user, latent_item);
            let label = u8::from(r.random::<f64>() < p);
            let mut values = Vec::with_capacity(m + 3);
            values.push(FieldValue::Index(user));
            values.push(FieldValue::Index(item));
            let mut dense = Vec::with_capacity(m);
            for row in &a {
                let clean: f64 = row[..k].iter().zip(u).map(|(x, y)| x * y).sum::<f64>()
                    + row[k..].iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
                let noise: f64 = StandardNormal.sample(&mut r);
                let x = clean + cfg.feature_noise_sigma * noise;
                let b = ((std_normal_cdf(x / scale) * cfg.bucket_count as f64) as usize).min(cfg.bucket_count - 1);
                values.push(FieldValue::Index(b));
                dense.push(x);
            }
            values.push(FieldValue::Dense(dense));
            examples.push(Example {
                values,
                label,
                ts: i as i64,
            });
        }
        Dataset::new_unchecked(Arc::new(cfg.schema(domain)), examples)
    };

    Ok(SyntheticData {
        source: make(Domain::Source),
        target: make(Domain::Target),
        correspondence: Correspondence { target_to_source: pair },
        world,
    })
}
