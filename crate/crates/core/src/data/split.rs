use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::cohort::CohortTable;
use super::{DataError, Result};
use crate::seeding;

/// Three-way partition of a cohort, stored by patient id so a manifest stays
/// valid if the CSV is re-ordered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortSplit {
    pub seed: u64,
    pub basic_train: Vec<String>,
    pub advanced_train: Vec<String>,
    pub test: Vec<String>,
}

/// Row positions of a [`CohortSplit`] within one particular table, in
/// ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub basic_train: Vec<usize>,
    pub advanced_train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Draws `test_n` advanced-available rows uniformly without replacement.
/// Everything else is training data for Basic; the advanced-available
/// remainder is training data for Advanced and Triage.
pub fn split_cohort(cohort: &CohortTable, test_n: usize, seed: u64) -> Result<CohortSplit> {
    let available = cohort.advanced_available_indices();
    if test_n > available.len() {
        return Err(DataError::TestTooLarge {
            requested: test_n,
            available: available.len(),
        });
    }
    let mut rng = seeding::rng(seed);
    let mut test: Vec<usize> = rand::seq::index::sample(&mut rng, available.len(), test_n)
        .into_iter()
        .map(|i| available[i])
        .collect();
    test.sort_unstable();

    let in_test: HashSet<usize> = test.iter().copied().collect();
    let rows = cohort.rows();
    let id = |i: &usize| rows[*i].patient.id.clone();
    let basic_train: Vec<usize> = (0..rows.len()).filter(|i| !in_test.contains(i)).collect();
    let advanced_train: Vec<usize> = available.iter().copied().filter(|i| !in_test.contains(i)).collect();
    Ok(CohortSplit {
        seed,
        basic_train: basic_train.iter().map(id).collect(),
        advanced_train: advanced_train.iter().map(id).collect(),
        test: test.iter().map(id).collect(),
    })
}

impl CohortSplit {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("split serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Resolves ids against `cohort` and re-checks the partition invariants.
    pub fn indices(&self, cohort: &CohortTable) -> Result<SplitIndices> {
        let index = cohort.index_of();
        let resolve = |ids: &[String]| -> Result<Vec<usize>> {
            let mut out = ids
                .iter()
                .map(|id| index.get(id.as_str()).copied().ok_or_else(|| DataError::UnknownId(id.clone())))
                .collect::<Result<Vec<_>>>()?;
            out.sort_unstable();
            Ok(out)
        };
        let split = SplitIndices {
            basic_train: resolve(&self.basic_train)?,
            advanced_train: resolve(&self.advanced_train)?,
            test: resolve(&self.test)?,
        };

        let test: HashSet<usize> = split.test.iter().copied().collect();
        let rows = cohort.rows();
        let consistent = split.test.iter().all(|&i| rows[i].patient.has_advanced())
            && split.basic_train.len() + split.test.len() == rows.len()
            && split.basic_train.iter().all(|i| !test.contains(i))
            && split.advanced_train.iter().all(|&i| rows[i].patient.has_advanced() && !test.contains(&i))
            && split.advanced_train.len() + split.test.len() == cohort.advanced_available_indices().len();
        if !consistent {
            return Err(DataError::SchemaMismatch(
                "split manifest does not partition this cohort".into(),
            ));
        }
        Ok(split)
    }
}
