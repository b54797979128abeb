use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::preprocess::encode::{fit_ordinal_encoder, OrdinalEncoder};

use super::dataset::{class_name, Dataset, CONTENT, DISCONTENT};
use super::schema::{ColumnKind, Schema};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvOptions {
    /// Cell contents (after trimming) treated as missing.
    pub missing_markers: Vec<String>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            missing_markers: vec!["".into(), "NA".into(), "NaN".into()],
        }
    }
}

impl CsvOptions {
    fn is_missing(&self, cell: &str) -> bool {
        self.missing_markers.iter().any(|m| m == cell)
    }
}

/// Unparsed CSV contents.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Csv(e.to_string()))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect::<Vec<_>>();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(RawTable { headers, rows })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(std::io::BufReader::new(file))
    }
}

fn parse_label(cell: &str, threshold: Option<f64>, row: usize, code: &str) -> Result<u8> {
    if cell.eq_ignore_ascii_case("content") {
        return Ok(CONTENT);
    }
    if cell.eq_ignore_ascii_case("discontent") {
        return Ok(DISCONTENT);
    }
    let v: f64 = cell.parse().map_err(|_| Error::Cell {
        row,
        column: code.to_string(),
        message: format!("unparseable label {cell:?}"),
    })?;
    match threshold {
        Some(t) => Ok(u8::from(v >= t)),
        None if v == 0.0 => Ok(DISCONTENT),
        None if v == 1.0 => Ok(CONTENT),
        None => Err(Error::Cell {
            row,
            column: code.to_string(),
            message: format!("label {v} is not 0/1; set label_threshold in the schema"),
        }),
    }
}

/// Turn raw cells into a [`Dataset`], encoding ordinal categories.
///
/// Rows whose label cell is missing are skipped. Row ids are the 0-based
/// data-row positions in the raw table.
pub fn apply_encoding(
    raw: &RawTable,
    schema: &Schema,
    encoder: &OrdinalEncoder,
    opts: &CsvOptions,
) -> Result<Dataset> {
    schema.validate()?;
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, h) in raw.headers.iter().enumerate() {
        if index.insert(h.as_str(), i).is_some() {
            return Err(Error::Csv(format!("duplicate header code {h}")));
        }
    }
    let features: Vec<_> = schema.features().collect();
    let mut feature_pos = Vec::with_capacity(features.len());
    let mut absent = Vec::new();
    for f in &features {
        match index.get(f.code.as_str()) {
            Some(&i) => feature_pos.push(i),
            None => absent.push(f.code.clone()),
        }
    }
    if !absent.is_empty() {
        return Err(Error::Csv(format!(
            "header is missing schema columns: {}",
            absent.join(", ")
        )));
    }
    for h in &raw.headers {
        if schema.column(h).is_none() {
            warn!("ignoring column {h} not declared in schema");
        }
    }
    let target_pos = index.get(schema.target.as_str()).copied();

    let nf = features.len();
    let mut values = Vec::with_capacity(raw.rows.len() * nf);
    let mut missing = Vec::with_capacity(raw.rows.len() * nf);
    let mut labels = Vec::new();
    let mut row_ids = Vec::new();
    for (r, row) in raw.rows.iter().enumerate() {
        let label = match target_pos {
            Some(p) => {
                let cell = row[p].trim();
                if opts.is_missing(cell) {
                    warn!("row {} has no label; skipped", r + 1);
                    continue;
                }
                Some(parse_label(cell, schema.label_threshold, r + 1, &schema.target)?)
            }
            None => None,
        };
        for (meta, &p) in features.iter().zip(&feature_pos) {
            let cell = row[p].trim();
            if opts.is_missing(cell) {
                values.push(0.0);
                missing.push(true);
                continue;
            }
            let v = match meta.kind {
                ColumnKind::Ordinal => encoder.encode_cell(&meta.code, cell, r + 1)?,
                _ => {
                    let v: f64 = cell.parse().map_err(|_| Error::Cell {
                        row: r + 1,
                        column: meta.code.clone(),
                        message: format!("not a number: {cell:?}"),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::Cell {
                            row: r + 1,
                            column: meta.code.clone(),
                            message: "non-finite value".into(),
                        });
                    }
                    v
                }
            };
            values.push(v);
            missing.push(false);
        }
        if let Some(l) = label {
            labels.push(l);
        }
        row_ids.push(r as u64);
    }
    let n = row_ids.len();
    Dataset::from_parts(
        features.into_iter().cloned().collect(),
        schema.target_column().clone(),
        schema.label_threshold,
        Matrix::new(n, nf, values)?,
        missing,
        target_pos.map(|_| labels),
        row_ids,
    )
}

pub fn parse_csv_reader<R: Read>(reader: R, schema: &Schema, opts: &CsvOptions) -> Result<Dataset> {
    let raw = RawTable::from_reader(reader)?;
    let encoder = fit_ordinal_encoder(schema);
    apply_encoding(&raw, schema, &encoder, opts)
}

/// Read a CSV whose header row holds schema column codes.
pub fn parse_csv(path: impl AsRef<Path>, schema: &Schema, opts: &CsvOptions) -> Result<Dataset> {
    let raw = RawTable::from_path(path)?;
    let encoder = fit_ordinal_encoder(schema);
    apply_encoding(&raw, schema, &encoder, opts)
}

fn format_cell(ds: &Dataset, c: usize, v: f64) -> String {
    let meta = &ds.features()[c];
    if meta.kind == ColumnKind::Ordinal && v.fract() == 0.0 && v >= 0.0 {
        if let Some(name) = meta.categories.get(v as usize) {
            return name.clone();
        }
    }
    format!("{v}")
}

pub fn write_csv_writer<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = ds.feature_codes();
    if ds.labels().is_some() {
        header.push(ds.target().code.clone());
    }
    w.write_record(&header).map_err(|e| Error::Csv(e.to_string()))?;
    for r in 0..ds.n_rows() {
        let mut rec: Vec<String> = (0..ds.n_features())
            .map(|c| {
                if ds.is_missing(r, c) {
                    String::new()
                } else {
                    format_cell(ds, c, ds.value(r, c))
                }
            })
            .collect();
        if let Some(l) = ds.labels() {
            rec.push(class_name(l[r]).to_string());
        }
        w.write_record(&rec).map_err(|e| Error::Csv(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))
}

/// Write a dataset so that [`parse_csv`] with the dataset's own schema and
/// default options reproduces it.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_writer(ds, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::schema::ColumnMeta;

    fn schema() -> Schema {
        Schema::new(
            vec![
                ColumnMeta::ordinal(
                    "A2",
                    "How would you rate your health generally?",
                    ["Very poor", "Poor", "Well", "Very well"],
                ),
                ColumnMeta::numeric("age", "What is your age?"),
                ColumnMeta::label("y", "satisfied"),
            ],
            "y",
        )
        .unwrap()
    }

    fn parse(text: &str) -> Result<Dataset> {
        parse_csv_reader(text.as_bytes(), &schema(), &CsvOptions::default())
    }

    #[test]
    fn header_only_gives_empty_dataset() {
        let ds = parse("A2,age,y\n").unwrap();
        assert_eq!(ds.n_rows(), 0);
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.labels().unwrap().len(), 0);
    }

    #[test]
    fn empty_cell_sets_mask_exactly_there() {
        let ds = parse("A2,age,y\nWell,30,1\nVery poor,,0\nPoor,44,Content\n").unwrap();
        let expected = [false, false, false, true, false, false];
        assert_eq!(ds.missing_mask(), &expected);
        assert_eq!(ds.row(0), &[2.0, 30.0]);
        assert_eq!(ds.labels().unwrap(), &[1, 0, 1]);
    }

    #[test]
    fn column_bound_to_prompt() {
        let ds = parse("age,A2,y\n30,Well,1\n").unwrap();
        let idx = ds.feature_index("A2").unwrap();
        assert_eq!(ds.features()[idx].prompt, "How would you rate your health generally?");
    }

    #[test]
    fn header_mismatch_is_error() {
        assert!(matches!(parse("A2,y\nWell,1\n"), Err(Error::Csv(_))));
    }

    #[test]
    fn duplicate_header_is_error() {
        assert!(matches!(parse("A2,A2,age,y\nWell,Well,3,1\n"), Err(Error::Csv(_))));
    }

    #[test]
    fn bad_numeric_cell_reports_row_and_column() {
        match parse("A2,age,y\nWell,30,1\nWell,abc,1\n") {
            Err(Error::Cell { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "age");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unseen_category_names_column() {
        let err = parse("A2,age,y\nExcellent,30,1\n").unwrap_err();
        assert!(err.to_string().contains("A2"), "{err}");
    }

    #[test]
    fn extra_columns_ignored() {
        let ds = parse("A2,zzz,age,y\nWell,9,30,1\n").unwrap();
        assert_eq!(ds.feature_codes(), vec!["A2", "age"]);
    }

    #[test]
    fn threshold_binarizes_labels() {
        let mut s = schema();
        s.label_threshold = Some(7.0);
        let ds = parse_csv_reader(
            "A2,age,y\nWell,30,8\nWell,30,6.5\nWell,30,7\n".as_bytes(),
            &s,
            &CsvOptions::default(),
        )
        .unwrap();
        assert_eq!(ds.labels().unwrap(), &[1, 0, 1]);
    }

    #[test]
    fn non_binary_label_without_threshold_is_error() {
        assert!(parse("A2,age,y\nWell,30,8\n").is_err());
    }

    #[test]
    fn missing_target_column_gives_unlabeled() {
        let ds = parse("A2,age\nWell,30\n").unwrap();
        assert!(ds.labels().is_none());
    }
}
