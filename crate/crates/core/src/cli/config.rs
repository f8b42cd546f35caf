use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::SyntheticConfig;
use crate::error::{Error, Result};
use crate::eval::{AblationPlan, Method, Metric, Variant, DEFAULT_ALPHAS, DEFAULT_BETAS, DEFAULT_RATIOS};
use crate::model::ExtractorKind;
use crate::train::TrainConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct CsvSource {
    pub source: PathBuf,
    pub target: PathBuf,
    pub source_schema: PathBuf,
    pub target_schema: PathBuf,
    pub correspondence: Option<PathBuf>,
    pub label_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic(SyntheticConfig),
    Csv(CsvSource),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub k: usize,
    pub metric: Metric,
    pub item_field: String,
    pub ratios: Vec<f64>,
    pub methods: Vec<Method>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub variants: Vec<Variant>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            k: 5,
            metric: Metric::Cosine,
            item_field: "item_id".into(),
            ratios: DEFAULT_RATIOS.to_vec(),
            methods: vec![Method::Cdanet, Method::Mlp],
            alphas: DEFAULT_ALPHAS.to_vec(),
            betas: DEFAULT_BETAS.to_vec(),
            variants: Variant::ALL.to_vec(),
        }
    }
}

impl EvalConfig {
    pub fn plan(&self) -> AblationPlan {
        AblationPlan::new(&self.variants)
    }
}

/// Everything a command needs, with defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// `None` when the file has no data section.
    pub data: Option<DataSource>,
    pub split: (f64, f64, f64),
    /// `train.model` holds the model section; `train.seed` is `run.seed`.
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: None,
            split: (0.8, 0.1, 0.1),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            seeds: vec![0, 1, 2, 3, 4],
            output_dir: PathBuf::from("out"),
        }
    }
}

struct Entry {
    value: String,
    line: usize,
}

/// Key/value pairs of a sectioned file, keyed by `section.key`.
struct RawConfig {
    entries: BTreeMap<String, Entry>,
    sections: Vec<String>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut sections = Vec::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') || s.starts_with(';') {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or(Error::Parse {
                    line,
                    msg: format!("unterminated section header `{s}`"),
                })?;
                section = name.trim().to_string();
                if !SECTIONS.contains(&section.as_str()) {
                    return Err(Error::Config {
                        key: section,
                        line: Some(line),
                        msg: "unknown section".into(),
                    });
                }
                sections.push(section.clone());
                continue;
            }
            let (k, v) = s.split_once('=').ok_or(Error::Parse {
                line,
                msg: format!("expected `key = value`, got `{s}`"),
            })?;
            let k = k.trim();
            if section.is_empty() {
                return Err(Error::Config {
                    key: k.to_string(),
                    line: Some(line),
                    msg: "key outside any section".into(),
                });
            }
            let key = format!("{section}.{k}");
            if entries.contains_key(&key) {
                return Err(Error::Config {
                    key,
                    line: Some(line),
                    msg: "duplicate key".into(),
                });
            }
            entries.insert(
                key,
                Entry {
                    value: v.trim().to_string(),
                    line,
                },
            );
        }
        Ok(RawConfig { entries, sections })
    }

    fn has_section(&self, name: &str) -> bool {
        self.sections.iter().any(|s| s == name)
    }

    fn take_raw(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }

    fn take_with<T>(&mut self, key: &str, f: impl FnOnce(&str) -> std::result::Result<T, String>) -> Result<Option<T>> {
        match self.take_raw(key) {
            None => Ok(None),
            Some(e) => f(&e.value).map(Some).map_err(|msg| Error::Config {
                key: key.to_string(),
                line: Some(e.line),
                msg,
            }),
        }
    }

    fn take<T: FromStr>(&mut self, key: &str, into: &mut T) -> Result<()> {
        if let Some(v) = self.take_with(key, parse_one)? {
            *into = v;
        }
        Ok(())
    }

    fn take_list<T: FromStr>(&mut self, key: &str, into: &mut Vec<T>) -> Result<()> {
        if let Some(v) = self.take_with(key, parse_list)? {
            *into = v;
        }
        Ok(())
    }

    fn take_path(&mut self, key: &str, base: &Path) -> Result<Option<PathBuf>> {
        let Some(e) = self.take_raw(key) else {
            return Ok(None);
        };
        let p = resolve(base, Path::new(&e.value));
        if !p.exists() {
            return Err(Error::Config {
                key: key.to_string(),
                line: Some(e.line),
                msg: format!("file `{}` does not exist", p.display()),
            });
        }
        Ok(Some(p))
    }

    fn finish(self) -> Result<()> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((key, e)) => Err(Error::Config {
                key,
                line: Some(e.line),
                msg: "unknown key".into(),
            }),
        }
    }
}

const SECTIONS: [&str; 7] = ["run", "data", "data.synthetic", "model", "model.extractor", "train", "eval"];

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() || base.as_os_str().is_empty() || base == Path::new(".") {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn parse_one<T: FromStr>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|_| format!("cannot parse `{s}`"))
}

fn parse_list<T: FromStr>(s: &str) -> std::result::Result<Vec<T>, String> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|x| parse_one(x.trim())).collect()
}

fn parse_named<T>(s: &str, f: impl Fn(&str) -> Option<T>) -> std::result::Result<Vec<T>, String> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|x| f(x.trim()).ok_or_else(|| format!("unknown value `{}`", x.trim())))
        .collect()
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Parses config text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut raw = RawConfig::parse(text)?;
        let mut c = ExperimentConfig::default();

        raw.take("run.seed", &mut c.train.seed)?;
        raw.take_list("run.seeds", &mut c.seeds)?;
        if let Some(p) = raw.take_with("run.output_dir", |s| Ok(PathBuf::from(s)))? {
            c.output_dir = resolve(base, &p);
        }

        if let Some(v) = raw.take_with("data.split", parse_list::<f64>)? {
            match v[..] {
                [a, b, t] => c.split = (a, b, t),
                _ => return Err(Error::config("data.split", "expected three ratios")),
            }
        }
        let csv_keys = ["source_csv", "target_csv", "source_schema", "target_schema"];
        let has_csv = csv_keys.iter().any(|k| raw.entries.contains_key(&format!("data.{k}")));
        let has_syn = raw.has_section("data.synthetic") || raw.entries.keys().any(|k| k.starts_with("data.synthetic."));
        if has_csv && has_syn {
            return Err(Error::config("data", "give either [data.synthetic] or csv paths, not both"));
        }
        if has_syn {
            let mut g = SyntheticConfig::default();
            raw.take("data.synthetic.latent_dim", &mut g.latent_dim)?;
            raw.take("data.synthetic.n_users", &mut g.n_users)?;
            raw.take("data.synthetic.n_items_per_domain", &mut g.n_items_per_domain)?;
            raw.take("data.synthetic.overlap_user_fraction", &mut g.overlap_user_fraction)?;
            raw.take("data.synthetic.feature_noise_sigma", &mut g.feature_noise_sigma)?;
            raw.take("data.synthetic.bucket_count", &mut g.bucket_count)?;
            raw.take("data.synthetic.label_bias", &mut g.label_bias)?;
            raw.take("data.synthetic.n_examples", &mut g.n_examples)?;
            raw.take("data.synthetic.seed", &mut g.seed)?;
            if let Some(p) = raw.take_with("data.synthetic.n_projections", |s| match s {
                "auto" => Ok(None),
                _ => parse_one(s).map(Some),
            })? {
                g.n_projections = p;
            }
            g.validate()?;
            c.data = Some(DataSource::Synthetic(g));
        } else if has_csv {
            let mut get = |k: &str| -> Result<PathBuf> {
                let key = format!("data.{k}");
                raw.take_path(&key, base)?.ok_or_else(|| Error::config(key, "missing"))
            };
            let (source, target) = (get("source_csv")?, get("target_csv")?);
            let (source_schema, target_schema) = (get("source_schema")?, get("target_schema")?);
            let correspondence = raw.take_path("data.correspondence", base)?;
            let label_threshold = raw.take_with("data.label_threshold", parse_one::<f64>)?;
            c.data = Some(DataSource::Csv(CsvSource {
                source,
                target,
                source_schema,
                target_schema,
                correspondence,
                label_threshold,
            }));
        }

        let m = &mut c.train.model;
        raw.take("model.d", &mut m.d)?;
        raw.take("model.emb_dim", &mut m.emb_dim)?;
        raw.take_list("model.tower_hidden", &mut m.tower_hidden)?;
        raw.take("model.emb_init_std", &mut m.emb_init_std)?;
        if let Some(k) = raw.take_with("model.extractor.kind", |s| {
            ExtractorKind::parse(s).ok_or_else(|| format!("unknown extractor `{s}`"))
        })? {
            m.extractor.kind = k;
        }
        raw.take_list("model.extractor.layer_widths", &mut m.extractor.layer_widths)?;
        raw.take("model.extractor.n_experts", &mut m.extractor.n_experts)?;
        raw.take("model.extractor.n_private_experts", &mut m.extractor.n_private_experts)?;

        let t = &mut c.train;
        raw.take("train.alpha", &mut t.alpha)?;
        raw.take("train.beta", &mut t.beta)?;
        raw.take("train.lr", &mut t.lr)?;
        raw.take("train.batch_size", &mut t.batch_size)?;
        raw.take("train.max_epochs", &mut t.max_epochs)?;
        raw.take("train.patience", &mut t.patience)?;
        raw.take("train.record_wall_clock", &mut t.record_wall_clock)?;
        if let Some(v) = raw.take_with("train.eval_every", |s| match s {
            "epoch" => Ok(None),
            _ => parse_one(s).map(Some),
        })? {
            t.eval_every = v;
        }

        let e = &mut c.eval;
        raw.take("eval.k", &mut e.k)?;
        if let Some(v) = raw.take_with("eval.metric", |s| Metric::parse(s).ok_or_else(|| format!("unknown metric `{s}`")))? {
            e.metric = v;
        }
        if let Some(v) = raw.take_with("eval.item_field", |s| Ok(s.to_string()))? {
            e.item_field = v;
        }
        raw.take_list("eval.ratios", &mut e.ratios)?;
        raw.take_list("eval.alphas", &mut e.alphas)?;
        raw.take_list("eval.betas", &mut e.betas)?;
        if let Some(v) = raw.take_with("eval.methods", |s| parse_named(s, Method::parse))? {
            e.methods = v;
        }
        if let Some(v) = raw.take_with("eval.variants", |s| parse_named(s, Variant::parse))? {
            e.variants = v;
        }
        raw.finish()?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = std::path::absolute(path)?;
        Self::parse(&text, base.parent().unwrap_or(Path::new("/")))
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.train.model.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::config("run.seeds", "must not be empty"));
        }
        let (a, b, t) = self.split;
        if !(a > 0.0 && b > 0.0 && t > 0.0) || (a + b + t - 1.0).abs() > 1e-9 {
            return Err(Error::config("data.split", "ratios must be positive and sum to 1"));
        }
        if self.eval.k == 0 {
            return Err(Error::config("eval.k", "must be >= 1"));
        }
        Ok(())
    }

    /// Every setting, defaults included, in the input format. Parsing the
    /// dump gives back an equal config.
    pub fn resolved(&self) -> String {
        let mut s = String::new();
        let t = &self.train;
        let m = &t.model;
        let e = &self.eval;
        let _ = writeln!(s, "[run]");
        let _ = writeln!(s, "seed = {}", t.seed);
        let _ = writeln!(s, "seeds = {}", join(&self.seeds));
        let _ = writeln!(s, "output_dir = {}", self.output_dir.display());
        let _ = writeln!(s, "\n[data]");
        let (a, b, c) = self.split;
        let _ = writeln!(s, "split = {a},{b},{c}");
        match &self.data {
            Some(DataSource::Csv(p)) => {
                let _ = writeln!(s, "source_csv = {}", p.source.display());
                let _ = writeln!(s, "target_csv = {}", p.target.display());
                let _ = writeln!(s, "source_schema = {}", p.source_schema.display());
                let _ = writeln!(s, "target_schema = {}", p.target_schema.display());
                if let Some(c) = &p.correspondence {
                    let _ = writeln!(s, "correspondence = {}", c.display());
                }
                if let Some(th) = p.label_threshold {
                    let _ = writeln!(s, "label_threshold = {th}");
                }
            }
            Some(DataSource::Synthetic(g)) => {
                let _ = writeln!(s, "\n[data.synthetic]");
                let _ = writeln!(s, "latent_dim = {}", g.latent_dim);
                let _ = writeln!(s, "n_users = {}", g.n_users);
                let _ = writeln!(s, "n_items_per_domain = {}", g.n_items_per_domain);
                let _ = writeln!(s, "overlap_user_fraction = {}", g.overlap_user_fraction);
                let _ = writeln!(s, "feature_noise_sigma = {}", g.feature_noise_sigma);
                let _ = writeln!(s, "bucket_count = {}", g.bucket_count);
                let _ = writeln!(s, "label_bias = {}", g.label_bias);
                let _ = writeln!(s, "n_examples = {}", g.n_examples);
                match g.n_projections {
                    Some(n) => writeln!(s, "n_projections = {n}"),
                    None => writeln!(s, "n_projections = auto"),
                }
                .ok();
                let _ = writeln!(s, "seed = {}", g.seed);
            }
            None => {}
        }
        let _ = writeln!(s, "\n[model]");
        let _ = writeln!(s, "d = {}", m.d);
        let _ = writeln!(s, "emb_dim = {}", m.emb_dim);
        let _ = writeln!(s, "tower_hidden = {}", join(&m.tower_hidden));
        let _ = writeln!(s, "emb_init_std = {}", m.emb_init_std);
        let _ = writeln!(s, "\n[model.extractor]");
        let _ = writeln!(s, "kind = {}", m.extractor.kind.as_str());
        let _ = writeln!(s, "layer_widths = {}", join(&m.extractor.layer_widths));
        let _ = writeln!(s, "n_experts = {}", m.extractor.n_experts);
        let _ = writeln!(s, "n_private_experts = {}", m.extractor.n_private_experts);
        let _ = writeln!(s, "\n[train]");
        let _ = writeln!(s, "alpha = {}", t.alpha);
        let _ = writeln!(s, "beta = {}", t.beta);
        let _ = writeln!(s, "lr = {}", t.lr);
        let _ = writeln!(s, "batch_size = {}", t.batch_size);
        let _ = writeln!(s, "max_epochs = {}", t.max_epochs);
        let _ = writeln!(s, "patience = {}", t.patience);
        match t.eval_every {
            Some(n) => writeln!(s, "eval_every = {n}"),
            None => writeln!(s, "eval_every = epoch"),
        }
        .ok();
        let _ = writeln!(s, "record_wall_clock = {}", t.record_wall_clock);
        let _ = writeln!(s, "\n[eval]");
        let _ = writeln!(s, "k = {}", e.k);
        let _ = writeln!(s, "metric = {}", e.metric.as_str());
        let _ = writeln!(s, "item_field = {}", e.item_field);
        let _ = writeln!(s, "ratios = {}", join(&e.ratios));
        let _ = writeln!(s, "methods = {}", e.methods.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(","));
        let _ = writeln!(s, "alphas = {}", join(&e.alphas));
        let _ = writeln!(s, "betas = {}", join(&e.betas));
        let _ = writeln!(s, "variants = {}", e.variants.iter().map(|v| v.as_str()).collect::<Vec<_>>().join(","));
        s
    }
}
