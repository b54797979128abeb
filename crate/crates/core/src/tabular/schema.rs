use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Storage kind of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    /// Ordered categories encoded as 0..n_categories, worst first.
    Ordinal,
    Numeric,
    /// The binary target.
    Label,
}

/// Life domain a questionnaire item belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemGroup {
    Physical,
    Mental,
    Economic,
    Social,
    Cultural,
}

impl fmt::Display for ItemGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ItemGroup::Physical => "physical",
            ItemGroup::Mental => "mental",
            ItemGroup::Economic => "economic",
            ItemGroup::Social => "social",
            ItemGroup::Cultural => "cultural",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub code: String,
    #[serde(default)]
    pub prompt: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<ItemGroup>,
}

impl ColumnMeta {
    pub fn numeric(code: impl Into<String>, prompt: impl Into<String>) -> Self {
        ColumnMeta {
            code: code.into(),
            prompt: prompt.into(),
            kind: ColumnKind::Numeric,
            categories: Vec::new(),
            group: None,
        }
    }

    pub fn ordinal<S: Into<String>>(
        code: impl Into<String>,
        prompt: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Self {
        ColumnMeta {
            code: code.into(),
            prompt: prompt.into(),
            kind: ColumnKind::Ordinal,
            categories: categories.into_iter().map(Into::into).collect(),
            group: None,
        }
    }

    pub fn label(code: impl Into<String>, prompt: impl Into<String>) -> Self {
        ColumnMeta {
            code: code.into(),
            prompt: prompt.into(),
            kind: ColumnKind::Label,
            categories: Vec::new(),
            group: None,
        }
    }

    pub fn with_group(mut self, group: ItemGroup) -> Self {
        self.group = Some(group);
        self
    }

    /// Largest valid encoded value for ordinal columns.
    pub fn max_code(&self) -> Option<f64> {
        match self.kind {
            ColumnKind::Ordinal => Some((self.categories.len() - 1) as f64),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.code.trim().is_empty() {
            return Err(Error::Schema("column with empty code".into()));
        }
        match self.kind {
            ColumnKind::Ordinal if self.categories.len() < 2 => Err(Error::Schema(format!(
                "ordinal column {} needs at least 2 categories",
                self.code
            ))),
            ColumnKind::Numeric | ColumnKind::Label if !self.categories.is_empty() => {
                Err(Error::Schema(format!(
                    "column {} is not ordinal but declares categories",
                    self.code
                )))
            }
            _ => {
                let mut seen = HashSet::new();
                for c in &self.categories {
                    if !seen.insert(c.as_str()) {
                        return Err(Error::Schema(format!(
                            "column {} repeats category {c:?}",
                            self.code
                        )));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Ordered column metadata plus the identity of the binary target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub target: String,
    /// Raw target values `>= label_threshold` become Content. When unset the
    /// target column must already hold 0/1 or Content/Discontent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_threshold: Option<f64>,
    pub columns: Vec<ColumnMeta>,
}

impl Schema {
    pub fn new(columns: Vec<ColumnMeta>, target: impl Into<String>) -> Result<Self> {
        let s = Schema {
            target: target.into(),
            label_threshold: None,
            columns,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for c in &self.columns {
            c.validate()?;
            if !seen.insert(c.code.as_str()) {
                return Err(Error::Schema(format!("duplicate column code {}", c.code)));
            }
        }
        let target = self
            .column(&self.target)
            .ok_or_else(|| Error::Schema(format!("target {} not among columns", self.target)))?;
        if target.kind != ColumnKind::Label {
            return Err(Error::Schema(format!(
                "target {} must have kind label",
                self.target
            )));
        }
        if let Some(extra) = self
            .columns
            .iter()
            .find(|c| c.kind == ColumnKind::Label && c.code != self.target)
        {
            return Err(Error::Schema(format!(
                "only the target may have kind label, found {}",
                extra.code
            )));
        }
        if let Some(t) = self.label_threshold {
            if !t.is_finite() {
                return Err(Error::Schema("label_threshold must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn column(&self, code: &str) -> Option<&ColumnMeta> {
        self.columns.iter().find(|c| c.code == code)
    }

    pub fn target_column(&self) -> &ColumnMeta {
        self.column(&self.target).expect("validated schema has target")
    }

    /// Feature columns in declaration order (everything except the target).
    pub fn features(&self) -> impl Iterator<Item = &ColumnMeta> + '_ {
        self.columns.iter().filter(move |c| c.code != self.target)
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let schema: Schema = toml::from_str(s).map_err(|e| Error::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml_string()?).map_err(|e| Error::io(path, e))
    }
}
