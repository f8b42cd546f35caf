use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Id,
    OneHot,
    MultiHot,
    Dense,
}

impl FieldKind {
    pub fn is_categorical(self) -> bool {
        !matches!(self, FieldKind::Dense)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FieldKind::Id => "id",
            FieldKind::OneHot => "one_hot",
            FieldKind::MultiHot => "multi_hot",
            FieldKind::Dense => "dense",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "id" => FieldKind::Id,
            "one_hot" => FieldKind::OneHot,
            "multi_hot" => FieldKind::MultiHot,
            "dense" => FieldKind::Dense,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSpec {
    pub name: String,
    pub kind: FieldKind,
    /// Vocabulary size for categorical kinds, vector width for `dense`.
    pub size: usize,
    /// Shared with the other domain (one embedding table for both).
    pub overlapped: bool,
}

impl FieldSpec {
    pub fn new(name: impl Into<String>, kind: FieldKind, size: usize, overlapped: bool) -> Self {
        FieldSpec {
            name: name.into(),
            kind,
            size,
            overlapped,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub domain: String,
    pub fields: Vec<FieldSpec>,
}

impl Schema {
    pub fn new(domain: impl Into<String>, fields: Vec<FieldSpec>) -> Result<Self> {
        let s = Schema {
            domain: domain.into(),
            fields,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for f in &self.fields {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Validation(format!("duplicate field `{}`", f.name)));
            }
            if f.size == 0 {
                return Err(Error::Validation(format!("field `{}` has zero size", f.name)));
            }
            if matches!(f.name.as_str(), "label" | "ts") {
                return Err(Error::Validation(format!("field name `{}` is reserved", f.name)));
            }
        }
        if self.fields.is_empty() {
            return Err(Error::Validation(format!("schema `{}` has no fields", self.domain)));
        }
        Ok(())
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }

    /// Total one-hot encoded width (categorical vocabularies plus dense widths).
    pub fn input_dim(&self) -> usize {
        self.fields.iter().map(|f| f.size).sum()
    }

    /// Overlapped fields must agree on kind and size in both domains.
    pub fn check_compatible(&self, other: &Schema) -> Result<()> {
        for f in self.fields.iter().filter(|f| f.overlapped) {
            match other.fields.iter().find(|g| g.name == f.name) {
                Some(g) if g.overlapped && g.kind == f.kind && g.size == f.size => {}
                Some(g) => {
                    return Err(Error::Validation(format!(
                        "overlapped field `{}` differs between domains: {}/{} vs {}/{}{}",
                        f.name,
                        f.kind.as_str(),
                        f.size,
                        g.kind.as_str(),
                        g.size,
                        if g.overlapped { "" } else { " (not overlapped)" }
                    )))
                }
                None => {
                    return Err(Error::Validation(format!(
                        "overlapped field `{}` missing from domain `{}`",
                        f.name, other.domain
                    )))
                }
            }
        }
        for g in other.fields.iter().filter(|g| g.overlapped) {
            if !self.fields.iter().any(|f| f.name == g.name && f.overlapped) {
                return Err(Error::Validation(format!(
                    "overlapped field `{}` missing from domain `{}`",
                    g.name, self.domain
                )));
            }
        }
        Ok(())
    }

    /// Parses the line format `name,kind,size,overlapped`. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn parse(domain: &str, text: &str) -> Result<Self> {
        let mut fields = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: String| Error::Parse { line: i + 1, msg };
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != 4 {
                return Err(bad(format!("expected 4 comma-separated values, got {}", parts.len())));
            }
            let kind = FieldKind::parse(parts[1]).ok_or_else(|| bad(format!("unknown kind `{}`", parts[1])))?;
            let size: usize = parts[2].parse().map_err(|_| bad(format!("invalid size `{}`", parts[2])))?;
            let overlapped = match parts[3] {
                "true" | "1" => true,
                "false" | "0" => false,
                other => return Err(bad(format!("invalid overlapped flag `{other}`"))),
            };
            fields.push(FieldSpec::new(parts[0], kind, size, overlapped));
        }
        Schema::new(domain, fields)
    }

    pub fn load(domain: &str, path: &Path) -> Result<Self> {
        Self::parse(domain, &std::fs::read_to_string(path)?)
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for fs in &self.fields {
            writeln!(f, "{},{},{},{}", fs.name, fs.kind.as_str(), fs.size, fs.overlapped)?;
        }
        Ok(())
    }
}
