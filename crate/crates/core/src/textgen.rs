//! Turn encoded rows back into one plain-language sentence each.
//!
//! Every feature contributes a chunk built from a template with a single
//! `{}` slot. Ordinal features fill the slot from a value → phrase table;
//! numeric features (no phrases) fill it with the value itself.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::{class_name, ColumnKind, Dataset, Schema, CONTENT, DISCONTENT};

const SLOT: &str = "{}";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingEntry {
    pub code: String,
    pub template: String,
    /// Encoded value (as an integer string) → phrase. Empty for numeric items.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub phrases: BTreeMap<String, String>,
}

impl MappingEntry {
    fn is_numeric(&self) -> bool {
        self.phrases.is_empty()
    }

    pub fn phrase(&self, value: f64) -> Result<String> {
        if self.is_numeric() {
            return Ok(format!("{value}"));
        }
        if value.fract() != 0.0 {
            return Err(Error::invalid(format!(
                "{}: value {value} is not an encoded category",
                self.code
            )));
        }
        let key = format!("{}", value as i64);
        self.phrases.get(&key).cloned().ok_or_else(|| {
            Error::invalid(format!("{}: no phrase for value {key}", self.code))
        })
    }

    /// Encoded value for a phrase, if exactly one value maps to it.
    pub fn reverse(&self, phrase: &str) -> Option<i64> {
        let mut hits = self.phrases.iter().filter(|(_, p)| p.as_str() == phrase);
        let (k, _) = hits.next()?;
        if hits.next().is_some() {
            return None;
        }
        k.parse().ok()
    }

    pub fn chunk(&self, value: f64) -> Result<String> {
        Ok(self.template.replacen(SLOT, &self.phrase(value)?, 1))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MappingTable {
    pub items: Vec<MappingEntry>,
}

impl MappingTable {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(format!("mapping table: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn get(&self, code: &str) -> Option<&MappingEntry> {
        self.items.iter().find(|e| e.code == code)
    }

    pub fn get_mut(&mut self, code: &str) -> Option<&mut MappingEntry> {
        self.items.iter_mut().find(|e| e.code == code)
    }

    pub fn remove(&mut self, code: &str) -> Option<MappingEntry> {
        let i = self.items.iter().position(|e| e.code == code)?;
        Some(self.items.remove(i))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MappingIssue {
    MissingCode(String),
    UncoveredValue { code: String, value: usize },
    DuplicateTemplate { first: String, second: String },
    BadSlot { code: String, slots: usize },
    DuplicateCode(String),
    PhrasesOnNumeric(String),
}

impl fmt::Display for MappingIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MappingIssue::MissingCode(c) => write!(f, "no template for {c}"),
            MappingIssue::UncoveredValue { code, value } => {
                write!(f, "no phrase for ({code}, {value})")
            }
            MappingIssue::DuplicateTemplate { first, second } => {
                write!(f, "{first} and {second} share a template")
            }
            MappingIssue::BadSlot { code, slots } => {
                write!(f, "template for {code} has {slots} slots, expected 1")
            }
            MappingIssue::DuplicateCode(c) => write!(f, "{c} is mapped twice"),
            MappingIssue::PhrasesOnNumeric(c) => {
                write!(f, "{c} is numeric but has phrases")
            }
        }
    }
}

/// Check a table against the feature columns of `schema`. An empty list
/// means the table can render every valid row.
pub fn validate_mapping(table: &MappingTable, schema: &Schema) -> Vec<MappingIssue> {
    let mut issues = Vec::new();
    let mut seen = HashSet::new();
    for e in &table.items {
        if !seen.insert(e.code.as_str()) {
            issues.push(MappingIssue::DuplicateCode(e.code.clone()));
        }
        let slots = e.template.matches(SLOT).count();
        if slots != 1 {
            issues.push(MappingIssue::BadSlot {
                code: e.code.clone(),
                slots,
            });
        }
    }
    let mut templates: BTreeMap<&str, &str> = BTreeMap::new();
    for e in &table.items {
        if let Some(first) = templates.get(e.template.as_str()) {
            if *first != e.code {
                issues.push(MappingIssue::DuplicateTemplate {
                    first: first.to_string(),
                    second: e.code.clone(),
                });
            }
        } else {
            templates.insert(&e.template, &e.code);
        }
    }
    for col in schema.features() {
        let Some(entry) = table.get(&col.code) else {
            issues.push(MappingIssue::MissingCode(col.code.clone()));
            continue;
        };
        match col.kind {
            ColumnKind::Ordinal => {
                for v in 0..col.categories.len() {
                    if !entry.phrases.contains_key(&v.to_string()) {
                        issues.push(MappingIssue::UncoveredValue {
                            code: col.code.clone(),
                            value: v,
                        });
                    }
                }
            }
            ColumnKind::Numeric => {
                if !entry.phrases.is_empty() {
                    issues.push(MappingIssue::PhrasesOnNumeric(col.code.clone()));
                }
            }
            ColumnKind::Label => {}
        }
    }
    issues
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextRecord {
    pub sentence: String,
    pub label: String,
    pub row_id: u64,
}

/// Render row `r` of `ds`. Chunks follow the dataset's column order.
pub fn render_sentence(ds: &Dataset, r: usize, table: &MappingTable) -> Result<TextRecord> {
    let labels = ds.require_labels()?;
    let mut chunks = Vec::with_capacity(ds.n_features());
    for (c, col) in ds.features().iter().enumerate() {
        if ds.is_missing(r, c) {
            return Err(Error::data(format!(
                "row {r}: {} is missing; impute before rendering",
                col.code
            )));
        }
        let entry = table
            .get(&col.code)
            .ok_or_else(|| Error::invalid(format!("no template for {}", col.code)))?;
        chunks.push(entry.chunk(ds.value(r, c))?);
    }
    Ok(TextRecord {
        sentence: chunks.join(" "),
        label: class_name(labels[r]).to_string(),
        row_id: ds.row_ids()[r],
    })
}

pub fn render_dataset(ds: &Dataset, table: &MappingTable) -> Result<Vec<TextRecord>> {
    (0..ds.n_rows())
        .into_par_iter()
        .map(|r| render_sentence(ds, r, table))
        .collect()
}

/// Write one JSON object per row. Returns the record count.
pub fn export_text(ds: &Dataset, table: &MappingTable, path: &Path) -> Result<usize> {
    let records = render_dataset(ds, table)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for rec in &records {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(records.len())
}

pub fn import_text(path: &Path) -> Result<Vec<TextRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TextRecord = serde_json::from_str(&line)
            .map_err(|e| Error::data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        if rec.label != class_name(CONTENT) && rec.label != class_name(DISCONTENT) {
            return Err(Error::data(format!("{}:{}: bad label", path.display(), i + 1)));
        }
        out.push(rec);
    }
    Ok(out)
}
