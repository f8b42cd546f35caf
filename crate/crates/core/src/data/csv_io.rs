use std::path::Path;
use std::sync::Arc;

use super::dataset::{Dataset, Example, FieldValue};
use super::schema::{FieldKind, Schema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    /// When set, the label column holds a rating and `label = rating > threshold`.
    pub label_threshold: Option<f64>,
}

/// Reads a header-led CSV whose columns are the schema fields plus `label`
/// and `ts`, in any order. Multi-hot sets and dense vectors are
/// `|`-separated. Errors carry the 1-based file line.
pub fn load_csv(schema: Arc<Schema>, path: &Path, opts: &CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let mut col_of_field = vec![usize::MAX; schema.fields.len()];
    let (mut label_col, mut ts_col) = (None, None);
    for (c, h) in headers.iter().enumerate() {
        let h = h.trim();
        match h {
            "label" => label_col = Some(c),
            "ts" => ts_col = Some(c),
            _ => match schema.field_index(h) {
                Some(f) => col_of_field[f] = c,
                None => {
                    return Err(Error::Parse {
                        line: 1,
                        msg: format!("unknown field `{h}` in header"),
                    })
                }
            },
        }
    }
    if let Some(f) = col_of_field.iter().position(|&c| c == usize::MAX) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("header lacks field `{}`", schema.fields[f].name),
        });
    }
    let label_col = label_col.ok_or(Error::Parse {
        line: 1,
        msg: "header lacks `label`".into(),
    })?;
    let ts_col = ts_col.ok_or(Error::Parse {
        line: 1,
        msg: "header lacks `ts`".into(),
    })?;

    let mut examples = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let bad = |msg: String| Error::Parse { line, msg };
        let mut values = Vec::with_capacity(schema.fields.len());
        for (f, &c) in schema.fields.iter().zip(&col_of_field) {
            let cell = rec.get(c).ok_or_else(|| bad(format!("missing column for `{}`", f.name)))?.trim();
            let parse_idx = |s: &str| -> Result<usize> {
                let i: usize = s
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("field `{}`: invalid index `{s}`", f.name)))?;
                if i >= f.size {
                    return Err(bad(format!("field `{}`: index {i} >= vocab size {}", f.name, f.size)));
                }
                Ok(i)
            };
            let v = match f.kind {
                FieldKind::Id | FieldKind::OneHot => FieldValue::Index(parse_idx(cell)?),
                FieldKind::MultiHot => {
                    let set = cell.split('|').map(parse_idx).collect::<Result<Vec<_>>>()?;
                    FieldValue::Set(set)
                }
                FieldKind::Dense => {
                    let d = cell
                        .split('|')
                        .map(|s| s.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
                        .collect::<Option<Vec<_>>>()
                        .ok_or_else(|| bad(format!("field `{}`: invalid dense value `{cell}`", f.name)))?;
                    if d.len() != f.size {
                        return Err(bad(format!("field `{}`: expected {} values, got {}", f.name, f.size, d.len())));
                    }
                    FieldValue::Dense(d)
                }
            };
            values.push(v);
        }
        let raw = rec.get(label_col).unwrap_or("").trim();
        let label = match opts.label_threshold {
            Some(th) => {
                let r: f64 = raw.parse().map_err(|_| bad(format!("invalid rating `{raw}`")))?;
                u8::from(r > th)
            }
            None => match raw {
                "0" => 0,
                "1" => 1,
                _ => return Err(bad(format!("label `{raw}` is not 0 or 1"))),
            },
        };
        let ts_raw = rec.get(ts_col).unwrap_or("").trim();
        let ts = ts_raw.parse().map_err(|_| bad(format!("invalid timestamp `{ts_raw}`")))?;
        let ex = Example { values, label, ts };
        ex.validate(&schema).map_err(|e| bad(e.to_string()))?;
        examples.push(ex);
    }
    Ok(Dataset::new_unchecked(schema, examples))
}

/// Writes a dataset in the format [`load_csv`] reads. Dense values use the
/// shortest round-trip representation, so write then load is lossless.
pub fn write_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let schema = data.schema();
    let mut header: Vec<&str> = schema.fields.iter().map(|f| f.name.as_str()).collect();
    header.push("label");
    header.push("ts");
    w.write_record(&header)?;
    let join = |it: &mut dyn Iterator<Item = String>| it.collect::<Vec<_>>().join("|");
    for e in data.examples() {
        let mut row: Vec<String> = e
            .values
            .iter()
            .map(|v| match v {
                FieldValue::Index(i) => i.to_string(),
                FieldValue::Set(s) => join(&mut s.iter().map(|i| i.to_string())),
                FieldValue::Dense(d) => join(&mut d.iter().map(|x| format!("{x:?}"))),
            })
            .collect();
        row.push(e.label.to_string());
        row.push(e.ts.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
