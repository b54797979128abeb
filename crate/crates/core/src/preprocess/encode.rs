use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::{ColumnKind, Schema};

/// Category name <-> integer code maps for every ordinal column.
///
/// The category at declared position `k` encodes to `k`, so the worst
/// category is 0 and better categories get larger codes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OrdinalEncoder {
    columns: BTreeMap<String, Vec<String>>,
}

pub fn fit_ordinal_encoder(schema: &Schema) -> OrdinalEncoder {
    OrdinalEncoder {
        columns: schema
            .columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Ordinal)
            .map(|c| (c.code.clone(), c.categories.clone()))
            .collect(),
    }
}

impl OrdinalEncoder {
    pub fn categories(&self, code: &str) -> Option<&[String]> {
        self.columns.get(code).map(Vec::as_slice)
    }

    fn cats(&self, code: &str) -> Result<&[String]> {
        self.categories(code)
            .ok_or_else(|| Error::invalid(format!("column {code} is not ordinal")))
    }

    pub fn encode(&self, code: &str, category: &str) -> Result<usize> {
        self.cats(code)?
            .iter()
            .position(|c| c == category)
            .ok_or_else(|| Error::UnseenCategory {
                column: code.to_string(),
                row: 0,
                value: category.to_string(),
            })
    }

    /// Encode one CSV cell. Category names are matched first; a number
    /// inside the code range is accepted as an already-encoded value.
    pub fn encode_cell(&self, code: &str, cell: &str, row: usize) -> Result<f64> {
        let cats = self.cats(code)?;
        if let Some(k) = cats.iter().position(|c| c == cell) {
            return Ok(k as f64);
        }
        match cell.parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 && v <= (cats.len() - 1) as f64 => Ok(v),
            _ => Err(Error::UnseenCategory {
                column: code.to_string(),
                row,
                value: cell.to_string(),
            }),
        }
    }

    pub fn decode(&self, code: &str, value: f64) -> Result<&str> {
        let cats = self.cats(code)?;
        if value.fract() != 0.0 || value < 0.0 || value as usize >= cats.len() {
            return Err(Error::data(format!("{value} is not a valid code for {code}")));
        }
        Ok(&cats[value as usize])
    }
}
