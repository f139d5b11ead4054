use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::IlpError;
use crate::graph::GroundedConstraintSet;

/// Probabilities are clamped to this floor before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-9;

/// Tolerance on the per-row sum of a normalized score row.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Model output: `instance id -> label -> probability`. A key may be a bare
/// label or `label_set.label` when one instance carries several label sets
/// that share label names.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScoreTable {
    entries: BTreeMap<String, BTreeMap<String, f64>>,
}

impl ScoreTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, instance: &str, key: &str, prob: f64) {
        self.entries.entry(instance.to_string()).or_default().insert(key.to_string(), prob);
    }

    /// Inserts a full row for one label set, keyed with qualified names.
    pub fn set_row(&mut self, instance: &str, label_set: &str, row: &BTreeMap<String, f64>) {
        for (label, p) in row {
            self.set(instance, &format!("{label_set}.{label}"), *p);
        }
    }

    pub fn row(&self, instance: &str) -> Option<&BTreeMap<String, f64>> {
        self.entries.get(instance)
    }

    pub fn instances(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn merge(&mut self, other: ScoreTable) {
        for (instance, row) in other.entries {
            self.entries.entry(instance).or_default().extend(row);
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Raw probability for one atom. Qualified keys win over bare ones.
    pub fn lookup(&self, instance: &str, label_set: &str, label: &str) -> Option<f64> {
        let row = self.entries.get(instance)?;
        row.get(&format!("{label_set}.{label}")).or_else(|| row.get(label)).copied()
    }

    pub(crate) fn has_qualified(&self, instance: &str, label_set: &str, label: &str) -> bool {
        self.entries.get(instance).is_some_and(|r| r.contains_key(&format!("{label_set}.{label}")))
    }

    /// Checks that every slot's probabilities sum to one.
    pub fn check_normalized(&self, ground: &GroundedConstraintSet) -> Result<(), IlpError> {
        for slot in &ground.slots {
            let mut sum = 0.0;
            for label in &slot.labels {
                sum += self.lookup(&slot.instance, &slot.label_set, label).ok_or_else(|| IlpError::MissingScore {
                    instance: slot.instance.clone(),
                    label_set: slot.label_set.clone(),
                    label: label.clone(),
                })?;
            }
            if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                return Err(IlpError::NotNormalized {
                    instance: slot.instance.clone(),
                    label_set: slot.label_set.clone(),
                    sum,
                });
            }
        }
        Ok(())
    }
}

pub fn floored_log(p: f64) -> f64 {
    p.max(PROB_FLOOR).ln()
}
