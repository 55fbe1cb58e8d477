//! Patient-grouped train/validation/test/calibration split.
//!
//! Patients are shuffled with a `ChaCha8Rng` seeded from the split seed and
//! then assigned one at a time to the bucket whose case count is furthest
//! below its target (lowest bucket index on ties). Within a bucket, cases
//! keep their input order.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::ScoredCase;

pub const BUCKET_NAMES: [&str; 4] = ["train", "validation", "test", "calibration"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    /// Target case fractions for train, validation, test and calibration.
    pub ratios: [f64; 4],
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(ratios: [f64; 4], seed: u64) -> Result<Self> {
        if ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::input(format!(
                "split ratios must be non-negative: {ratios:?}"
            )));
        }
        let total: f64 = ratios.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::input(format!(
                "split ratios must sum to 1, got {total}"
            )));
        }
        Ok(Self { ratios, seed })
    }

    /// 70 / 10 / 10 / 10.
    pub fn standard(seed: u64) -> Self {
        Self {
            ratios: [0.7, 0.1, 0.1, 0.1],
            seed,
        }
    }

    /// Parses `"0.7,0.1,0.1,0.1"`.
    pub fn parse_ratios(text: &str) -> Result<[f64; 4]> {
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::input(format!(
                "expected four comma-separated ratios, got {text:?}"
            )));
        }
        let mut out = [0.0; 4];
        for (slot, part) in out.iter_mut().zip(parts) {
            *slot = part
                .parse()
                .map_err(|_| Error::input(format!("bad ratio {part:?}")))?;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SplitBuckets {
    pub train: Vec<ScoredCase>,
    pub validation: Vec<ScoredCase>,
    pub test: Vec<ScoredCase>,
    pub calibration: Vec<ScoredCase>,
}

impl SplitBuckets {
    pub fn buckets(&self) -> [&[ScoredCase]; 4] {
        [&self.train, &self.validation, &self.test, &self.calibration]
    }

    pub fn sizes(&self) -> [usize; 4] {
        self.buckets().map(<[ScoredCase]>::len)
    }
}

pub fn grouped_split(cases: &[ScoredCase], spec: &SplitSpec) -> Result<SplitBuckets> {
    if cases.is_empty() {
        return Err(Error::input("cannot split an empty case list"));
    }
    SplitSpec::new(spec.ratios, spec.seed)?;

    // patients in first-appearance order, each with its case indices
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut patients: Vec<Vec<usize>> = Vec::new();
    for (i, case) in cases.iter().enumerate() {
        let slot = *index.entry(case.group_key()).or_insert_with(|| {
            patients.push(Vec::new());
            patients.len() - 1
        });
        patients[slot].push(i);
    }

    let mut order: Vec<usize> = (0..patients.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);

    let total = cases.len() as f64;
    let targets = spec.ratios.map(|r| r * total);
    let mut filled = [0usize; 4];
    let mut assignment = vec![0usize; cases.len()];
    for p in order {
        let members = &patients[p];
        let bucket = (0..4)
            .map(|b| (b, targets[b] - filled[b] as f64))
            .fold((0, f64::NEG_INFINITY), |best, (b, deficit)| {
                if deficit > best.1 {
                    (b, deficit)
                } else {
                    best
                }
            })
            .0;
        filled[bucket] += members.len();
        for &i in members {
            assignment[i] = bucket;
        }
    }

    let mut out = SplitBuckets::default();
    for (case, &bucket) in cases.iter().zip(&assignment) {
        let target = match bucket {
            0 => &mut out.train,
            1 => &mut out.validation,
            2 => &mut out.test,
            _ => &mut out.calibration,
        };
        target.push(case.clone());
    }
    Ok(out)
}
