use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{arg_err, contract_err, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub test_subject: u32,
    pub train_subjects: Vec<u32>,
}

/// Leave-one-subject-out partition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub folds: Vec<Fold>,
}

impl SplitPlan {
    pub fn subjects(&self) -> Vec<u32> {
        self.folds.iter().map(|f| f.test_subject).collect()
    }

    /// Check that every subject is tested exactly once and that each fold
    /// trains on exactly the other subjects.
    pub fn validate(&self) -> Result<()> {
        let all: BTreeSet<u32> = self.subjects().into_iter().collect();
        if all.len() != self.folds.len() {
            return contract_err("a subject is tested in more than one fold");
        }
        for f in &self.folds {
            let train: BTreeSet<u32> = f.train_subjects.iter().copied().collect();
            if train.len() != f.train_subjects.len() || train.contains(&f.test_subject) {
                return contract_err(format!(
                    "fold for subject {} leaks or repeats subjects",
                    f.test_subject
                ));
            }
            let mut union = train;
            union.insert(f.test_subject);
            if union != all {
                return contract_err(format!(
                    "fold for subject {} is not exhaustive",
                    f.test_subject
                ));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("plain data serializes");
        Sha256::digest(json)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// One fold per subject, in the given order; each trains on all others.
pub fn loocv_split(subjects: &[u32]) -> Result<SplitPlan> {
    if subjects.len() < 2 {
        return arg_err(format!(
            "LOOCV needs at least 2 subjects, got {}",
            subjects.len()
        ));
    }
    let unique: BTreeSet<u32> = subjects.iter().copied().collect();
    if unique.len() != subjects.len() {
        return arg_err(format!("duplicate subject ids in {subjects:?}"));
    }
    let folds = subjects
        .iter()
        .map(|&test| Fold {
            test_subject: test,
            train_subjects: subjects.iter().copied().filter(|&s| s != test).collect(),
        })
        .collect();
    let plan = SplitPlan { folds };
    plan.validate()?;
    Ok(plan)
}
