//! Case records, encounter filtering, and deterministic dataset splits.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Upper sanity bound for systolic blood pressure, mmHg.
pub const MAX_SYSTOLIC_BP: u16 = 400;

/// One ambulance incident: structured fields plus the free-text report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub incident_id: String,
    #[serde(default)]
    pub provider_id: String,
    #[serde(default = "default_true")]
    pub patient_encounter: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chief_complaint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub physical_findings: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub systolic_bp: Option<u16>,
    #[serde(default)]
    pub capillary_glucose_recorded: bool,
    #[serde(default)]
    pub bleeding_control_applied: bool,
    pub report_text: String,
    #[serde(default)]
    pub timestamp: String,
}

fn default_true() -> bool {
    true
}

/// Result of dropping non-encounters and text-less records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterOutcome {
    pub kept: Vec<CaseRecord>,
    pub excluded_no_encounter: usize,
    pub excluded_missing_text: usize,
}

/// True for records that enter the NER/audit pipeline: an actual patient
/// encounter with a non-empty report.
pub fn is_auditable(rec: &CaseRecord) -> bool {
    rec.patient_encounter && !rec.report_text.trim().is_empty()
}

/// Remove records that did not result in a patient encounter, and records
/// whose report text is empty. Both exclusion counts are reported.
pub fn filter_encounters(records: Vec<CaseRecord>) -> FilterOutcome {
    let mut kept = Vec::with_capacity(records.len());
    let mut excluded_no_encounter = 0;
    let mut excluded_missing_text = 0;
    for rec in records {
        if !rec.patient_encounter {
            excluded_no_encounter += 1;
        } else if rec.report_text.trim().is_empty() {
            excluded_missing_text += 1;
        } else {
            kept.push(rec);
        }
    }
    FilterOutcome {
        kept,
        excluded_no_encounter,
        excluded_missing_text,
    }
}

/// Train/dev/test partition of a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<CaseRecord>,
    pub dev: Vec<CaseRecord>,
    pub test: Vec<CaseRecord>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SplitError {
    /// Fractions must be non-negative and sum to 1 within 1e-9.
    InvalidFractions([f64; 3]),
    EmptyInput,
}

impl fmt::Display for SplitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitError::InvalidFractions(fr) => write!(
                f,
                "invalid split fractions ({}, {}, {}): must be non-negative and sum to 1",
                fr[0], fr[1], fr[2]
            ),
            SplitError::EmptyInput => f.write_str("cannot split an empty record set"),
        }
    }
}

/// Deterministic seeded partition of `0..n` into train/dev/test index sets.
///
/// Dev and test sizes are floor-allocated; the remainder goes to train.
/// Indices within each split are returned in ascending order.
pub fn split_indices(
    n: usize,
    fractions: [f64; 3],
    seed: u64,
) -> Result<[Vec<usize>; 3], SplitError> {
    if n == 0 {
        return Err(SplitError::EmptyInput);
    }
    let sum: f64 = fractions.iter().sum();
    if fractions.iter().any(|f| *f < 0.0) || libm::fabs(sum - 1.0) > 1e-9 {
        return Err(SplitError::InvalidFractions(fractions));
    }
    let n_dev = (n as f64 * fractions[1]) as usize;
    let n_test = (n as f64 * fractions[2]) as usize;
    let n_train = n - n_dev - n_test;

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut train: Vec<usize> = order[..n_train].to_vec();
    let mut dev: Vec<usize> = order[n_train..n_train + n_dev].to_vec();
    let mut test: Vec<usize> = order[n_train + n_dev..].to_vec();
    train.sort_unstable();
    dev.sort_unstable();
    test.sort_unstable();
    Ok([train, dev, test])
}

/// Partition records with [`split_indices`].
pub fn split_dataset(
    records: Vec<CaseRecord>,
    fractions: [f64; 3],
    seed: u64,
) -> Result<DatasetSplit, SplitError> {
    let [train_idx, dev_idx, test_idx] = split_indices(records.len(), fractions, seed)?;
    let pick = |idx: &[usize]| -> Vec<CaseRecord> {
        idx.iter().map(|&i| records[i].clone()).collect()
    };
    Ok(DatasetSplit {
        train: pick(&train_idx),
        dev: pick(&dev_idx),
        test: pick(&test_idx),
        seed,
    })
}
