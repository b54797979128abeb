use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tabular::{Dataset, SYNTHETIC_ROW_BIT};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub stage: String,
    pub n_rows: usize,
    pub n_synthetic: usize,
    /// Rows shared with the held-out test split.
    pub overlap: usize,
}

/// Row-id bookkeeping proving that test rows never reach a fit or
/// resampling step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditLog {
    /// SHA-256 over the sorted test row ids.
    pub test_hash: String,
    pub n_test: usize,
    pub entries: Vec<AuditEntry>,
    #[serde(skip)]
    test_ids: BTreeSet<u64>,
}

impl AuditLog {
    pub fn new(test: &Dataset) -> Self {
        let test_ids: BTreeSet<u64> = test.row_ids().iter().copied().collect();
        let mut h = Sha256::new();
        for id in &test_ids {
            h.update(id.to_le_bytes());
        }
        AuditLog {
            test_hash: hex::encode(h.finalize()),
            n_test: test_ids.len(),
            entries: Vec::new(),
            test_ids,
        }
    }

    /// Log `ds` as the input of `stage`; fails if it holds any test row.
    pub fn record(&mut self, stage: &str, ds: &Dataset) -> Result<()> {
        let ids = ds.row_ids();
        let overlap = ids.iter().filter(|id| self.test_ids.contains(id)).count();
        self.entries.push(AuditEntry {
            stage: stage.to_string(),
            n_rows: ids.len(),
            n_synthetic: ids.iter().filter(|&&id| id & SYNTHETIC_ROW_BIT != 0).count(),
            overlap,
        });
        debug_assert_eq!(overlap, 0, "test rows reached {stage}");
        if overlap > 0 {
            return Err(Error::data(format!("{overlap} test rows reached {stage}")));
        }
        Ok(())
    }

    pub fn is_clean(&self) -> bool {
        self.entries.iter().all(|e| e.overlap == 0)
    }

    pub fn test_ids(&self) -> &BTreeSet<u64> {
        &self.test_ids
    }
}
