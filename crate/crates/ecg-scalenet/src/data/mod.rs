//! Dataset types, ingestion, preprocessing, and the synthetic generator.
//!
//! Lead order convention everywhere in the crate:
//! `[I, II, III, aVR, aVL, aVF, V1, V2, V3, V4, V5, V6]`.
//! Reduced montages on ingestion are `[I, II]` (2 leads) and
//! `[I, II, V1..V6]` (8 leads); preprocessing reconstructs the four
//! derived limb leads from I and II and leaves absent precordials at zero,
//! so every record is exactly 12 leads afterwards.

mod io;
mod preprocess;
mod synth;

pub use io::{load_dataset, read_signal, write_dataset, write_signal};
pub use preprocess::{
    crop_for_analysis, derive_limb_leads, expand_to_twelve_leads, resample_linear, split_dataset,
    standardize,
};
pub use synth::{default_label_rules, generate_synthetic_dataset, LabelRule, RuleKind, SyntheticEcgParams};

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Label categories of the study taxonomy.
pub const CATEGORIES: [&str; 6] = [
    "Arrhythmia",
    "Conduction disorder",
    "Axis deviation",
    "Prolonged interval",
    "Wave abnormality",
    "Others",
];

/// One ECG record: multichannel signal plus labels and provenance.
#[derive(Debug, Clone)]
pub struct EcgRecord {
    pub record_id: String,
    /// `[leads, samples]`
    pub signal: Tensor,
    pub sampling_rate_hz: u32,
    /// Multi-hot over the manifest's label list.
    pub labels: Vec<bool>,
    /// Database of origin tag.
    pub source: String,
}

impl EcgRecord {
    pub fn new(
        record_id: String,
        signal: Tensor,
        sampling_rate_hz: u32,
        labels: Vec<bool>,
        source: String,
    ) -> Result<Self> {
        if signal.rank() != 2 {
            return Err(Error::InvalidInput("ECG signal must be [leads, samples]".into()));
        }
        let leads = signal.dim(0);
        if !matches!(leads, 2 | 8 | 12) {
            return Err(Error::InvalidInput(format!(
                "lead count must be 2, 8, or 12 on ingestion, got {leads}"
            )));
        }
        if signal.dim(1) == 0 {
            return Err(Error::InvalidInput("zero-length signal".into()));
        }
        if sampling_rate_hz == 0 {
            return Err(Error::InvalidInput("sampling rate must be positive".into()));
        }
        signal.check_finite(&format!("record {record_id}"))?;
        Ok(EcgRecord { record_id, signal, sampling_rate_hz, labels, source })
    }

    pub fn leads(&self) -> usize {
        self.signal.dim(0)
    }

    pub fn samples(&self) -> usize {
        self.signal.dim(1)
    }

    pub fn lead(&self, i: usize) -> &[f64] {
        &self.signal.data()[i * self.samples()..][..self.samples()]
    }
}

/// Which split a record belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Index entry for one record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordEntry {
    pub id: String,
    /// Signal file path, relative to the manifest location.
    pub path: String,
    pub source: String,
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

/// Label list, category taxonomy, record index, and split assignment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub labels: Vec<String>,
    /// label -> category (one of [`CATEGORIES`]).
    pub categories: BTreeMap<String, String>,
    pub records: Vec<RecordEntry>,
}

impl DatasetManifest {
    pub fn new(labels: Vec<String>, categories: BTreeMap<String, String>) -> Self {
        DatasetManifest { version: 1, labels, categories, records: Vec::new() }
    }

    /// Index of a label name in the label list.
    pub fn label_index(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == name)
    }

    /// Multi-hot vector for a record entry.
    pub fn multi_hot(&self, entry: &RecordEntry) -> Result<Vec<bool>> {
        let mut v = vec![false; self.labels.len()];
        for l in &entry.labels {
            match self.label_index(l) {
                Some(i) => v[i] = true,
                None => {
                    return Err(Error::Validation(format!(
                        "record {} carries unknown label `{l}`",
                        entry.id
                    )))
                }
            }
        }
        Ok(v)
    }

    /// Structural consistency: labels known, categories known, ids unique.
    pub fn validate(&self) -> Result<()> {
        for (label, cat) in &self.categories {
            if !self.labels.iter().any(|l| l == label) {
                return Err(Error::Validation(format!("category map names unknown label `{label}`")));
            }
            if !CATEGORIES.contains(&cat.as_str()) {
                return Err(Error::Validation(format!("unknown category `{cat}` for label `{label}`")));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for r in &self.records {
            if !seen.insert(&r.id) {
                return Err(Error::Validation(format!("duplicate record id `{}`", r.id)));
            }
            self.multi_hot(r)?;
        }
        Ok(())
    }

    pub fn records_in(&self, split: Split) -> Vec<&RecordEntry> {
        self.records.iter().filter(|r| r.split == Some(split)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_rejects_bad_lead_counts() {
        let sig = Tensor::zeros(&[3, 10]);
        assert!(EcgRecord::new("r".into(), sig, 250, vec![], "synth".into()).is_err());
        let sig = Tensor::zeros(&[12, 10]);
        assert!(EcgRecord::new("r".into(), sig, 250, vec![], "synth".into()).is_ok());
    }

    #[test]
    fn record_rejects_nan() {
        let mut sig = Tensor::zeros(&[2, 4]);
        sig.data_mut()[3] = f64::NAN;
        assert!(EcgRecord::new("r".into(), sig, 250, vec![], "synth".into()).is_err());
    }

    #[test]
    fn manifest_validates_labels_and_duplicates() {
        let mut categories = BTreeMap::new();
        categories.insert("a".to_string(), "Arrhythmia".to_string());
        let mut m = DatasetManifest::new(vec!["a".into()], categories);
        m.records.push(RecordEntry {
            id: "x".into(),
            path: "x.sig".into(),
            source: "s".into(),
            labels: vec!["a".into()],
            split: None,
        });
        assert!(m.validate().is_ok());
        m.records.push(RecordEntry {
            id: "x".into(),
            path: "y.sig".into(),
            source: "s".into(),
            labels: vec!["b".into()],
            split: None,
        });
        assert!(m.validate().is_err());
    }
}
