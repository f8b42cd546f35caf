//! Binary checkpoint files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "CDA1"  u32 version  u64 fingerprint
//! u32 meta_len  meta (UTF-8 `key=value` lines)
//! u32 n_records
//! n_records × { u32 name_len  name  u32 ndim  ndim × u64  numel × f64 }
//! ```
//!
//! The fingerprint is the first eight bytes of SHA-256 over the meta text.

use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use super::assembly::ModelAssembly;
use super::config::{ExtractorKind, ModelConfig};
use crate::autodiff::Tensor;
use crate::data::{Domain, Schema};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"CDA1";
pub const VERSION: u32 = 1;

/// Decoded checkpoint contents, values widened to `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: Vec<(String, String)>,
    pub records: Vec<(String, Tensor<f64>)>,
}

impl Checkpoint {
    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn meta_values<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.meta.iter().filter(move |(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn record(&self, name: &str) -> Option<&Tensor<f64>> {
        self.records.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    fn meta_text(meta: &[(String, String)]) -> String {
        meta.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn fingerprint(&self) -> u64 {
        fingerprint(&Self::meta_text(&self.meta))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = Self::meta_text(&self.meta);
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&fingerprint(&meta).to_le_bytes());
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(meta.as_bytes());
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for (name, t) in &self.records {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != MAGIC {
            return Err(Error::Checkpoint("bad magic: not a checkpoint file".into()));
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {version} (expected {VERSION})")));
        }
        let fp = r.u64("fingerprint")?;
        let meta_len = r.u32("meta length")? as usize;
        let meta_text = std::str::from_utf8(r.take(meta_len, "meta")?)
            .map_err(|_| Error::Checkpoint("meta block is not UTF-8".into()))?;
        if fingerprint(meta_text) != fp {
            return Err(Error::Checkpoint("config fingerprint does not match meta block".into()));
        }
        let meta = meta_text
            .lines()
            .map(|l| {
                l.split_once('=')
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .ok_or_else(|| Error::Checkpoint(format!("malformed meta line `{l}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let n = r.u32("record count")? as usize;
        let mut records = Vec::with_capacity(n);
        for i in 0..n {
            let what = format!("record {i}");
            let len = r.u32(&what)? as usize;
            let name = String::from_utf8(r.take(len, &what)?.to_vec())
                .map_err(|_| Error::Checkpoint(format!("{what}: name is not UTF-8")))?;
            let ndim = r.u32(&name)? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(r.u64(&name)? as usize);
            }
            let numel: usize = shape.iter().product();
            let raw = r.take(numel.checked_mul(8).unwrap_or(usize::MAX), &name)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            records.push((name, Tensor::new(shape, data)?));
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes after last record", bytes.len() - r.pos)));
        }
        Ok(Checkpoint { meta, records })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn fingerprint(meta: &str) -> u64 {
    let h = Sha256::digest(meta.as_bytes());
    u64::from_le_bytes(h[..8].try_into().expect("digest has 32 bytes"))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Checkpoint(format!(
                "truncated or corrupt file: `{what}` needs {n} bytes at offset {}, {} left",
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn split_usizes(key: &str, s: &str) -> Result<Vec<usize>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|p| p.parse().map_err(|_| Error::Checkpoint(format!("meta `{key}`: bad integer `{p}`"))))
        .collect()
}

pub(crate) fn widen<S: Scalar>(t: &Tensor<S>) -> Tensor<f64> {
    Tensor::new(t.shape().to_vec(), t.data().iter().map(|v| v.as_f64()).collect()).expect("same shape")
}

pub(crate) fn narrow<S: Scalar>(t: &Tensor<f64>) -> Tensor<S> {
    Tensor::new(t.shape().to_vec(), t.data().iter().map(|&v| S::lit(v)).collect()).expect("same shape")
}

impl<S: Scalar> ModelAssembly<S> {
    /// Architecture description written to the checkpoint meta block.
    pub fn meta(&self) -> Vec<(String, String)> {
        let c = &self.config;
        let mut m: Vec<(String, String)> = vec![
            ("model.d".into(), c.d.to_string()),
            ("model.emb_dim".into(), c.emb_dim.to_string()),
            ("model.extractor.kind".into(), c.extractor.kind.as_str().into()),
            ("model.extractor.layer_widths".into(), join(&c.extractor.layer_widths)),
            ("model.extractor.n_experts".into(), c.extractor.n_experts.to_string()),
            ("model.extractor.n_private_experts".into(), c.extractor.n_private_experts.to_string()),
            ("model.tower_hidden".into(), join(&c.tower_hidden)),
            ("model.emb_init_std".into(), format!("{:?}", c.emb_init_std)),
            ("model.init_seed".into(), self.init_seed.to_string()),
            ("model.stage".into(), self.stage().as_str().into()),
            (
                "model.aug_domains".into(),
                self.aug_domains().iter().map(|d| d.as_str()).collect::<Vec<_>>().join(","),
            ),
            ("model.mask_translated".into(), self.mask_translated.to_string()),
            ("model.zero_init_logit".into(), self.zero_init_logit().to_string()),
        ];
        for d in Domain::BOTH {
            let s = self.schema(d);
            m.push((format!("schema.{d}.name"), s.domain.clone()));
            for f in &s.fields {
                m.push((
                    format!("schema.{d}.field"),
                    format!("{},{},{},{}", f.name, f.kind.as_str(), f.size, f.overlapped),
                ));
            }
        }
        m
    }

    /// Parameter records in store order.
    pub fn param_records(&self) -> Vec<(String, Tensor<f64>)> {
        self.params.iter().map(|(_, p)| (p.name.clone(), widen(&p.value))).collect()
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            meta: self.meta(),
            records: self.param_records(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    /// Copies every parameter from `ckpt`; names must all be present and
    /// shapes must agree. Records that are not parameters are ignored.
    pub fn load_params(&mut self, ckpt: &Checkpoint) -> Result<()> {
        let mut staged = Vec::new();
        for (id, p) in self.params.iter() {
            let rec = ckpt
                .record(&p.name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter record `{}`", p.name)))?;
            if rec.shape() != p.value.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter `{}`: checkpoint shape {:?}, model shape {:?}",
                    p.name,
                    rec.shape(),
                    p.value.shape()
                )));
            }
            staged.push((id, narrow::<S>(rec)));
        }
        for (id, v) in staged {
            self.params.get_mut(id).value = v;
        }
        Ok(())
    }

    /// Rebuilds the architecture from the meta block and loads parameters.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let get = |k: &str| {
            ckpt.meta_value(k)
                .ok_or_else(|| Error::Checkpoint(format!("meta key `{k}` missing")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::Checkpoint(format!("meta `{k}` is not an integer")))
        };
        let mut cfg = ModelConfig {
            d: num("model.d")?,
            emb_dim: num("model.emb_dim")?,
            tower_hidden: split_usizes("model.tower_hidden", get("model.tower_hidden")?)?,
            emb_init_std: get("model.emb_init_std")?
                .parse()
                .map_err(|_| Error::Checkpoint("meta `model.emb_init_std` is not a number".into()))?,
            ..ModelConfig::default()
        };
        cfg.extractor.kind = ExtractorKind::parse(get("model.extractor.kind")?)
            .ok_or_else(|| Error::Checkpoint("meta `model.extractor.kind` unknown".into()))?;
        cfg.extractor.layer_widths = split_usizes("model.extractor.layer_widths", get("model.extractor.layer_widths")?)?;
        cfg.extractor.n_experts = num("model.extractor.n_experts")?;
        cfg.extractor.n_private_experts = num("model.extractor.n_private_experts")?;
        let seed: u64 = get("model.init_seed")?
            .parse()
            .map_err(|_| Error::Checkpoint("meta `model.init_seed` is not an integer".into()))?;
        let mut schemas = Vec::new();
        for d in Domain::BOTH {
            let name = get(&format!("schema.{d}.name"))?;
            let key = format!("schema.{d}.field");
            let text: String = ckpt.meta_values(&key).map(|l| format!("{l}\n")).collect();
            schemas.push(Arc::new(Schema::parse(name, &text)?));
        }
        let target = schemas.pop().expect("two schemas");
        let source = schemas.pop().expect("two schemas");
        let aug: Vec<Domain> = get("model.aug_domains")?
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|s| match s {
                "source" => Ok(Domain::Source),
                "target" => Ok(Domain::Target),
                _ => Err(Error::Checkpoint(format!("meta `model.aug_domains`: unknown domain `{s}`"))),
            })
            .collect::<Result<_>>()?;
        let zero = get("model.zero_init_logit")? == "true";
        let mut m = match get("model.stage")? {
            "translation" => ModelAssembly::build_with(&cfg, [source, target], seed, true, &aug, zero)?,
            "augmentation" => ModelAssembly::build_with(&cfg, [source, target], seed, false, &aug, zero)?,
            other => return Err(Error::Checkpoint(format!("meta `model.stage`: unknown stage `{other}`"))),
        };
        m.mask_translated = get("model.mask_translated")? == "true";
        m.load_params(ckpt)?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}
