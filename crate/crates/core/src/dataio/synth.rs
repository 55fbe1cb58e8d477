//! Synthetic labeled cohorts with known ground truth.
//!
//! For every case and class a latent probability is drawn from
//! `Beta(prevalence * sharpness, (1 - prevalence) * sharpness)`, the label
//! from `Bernoulli(latent)`, and the reported score is the latent pushed
//! through a temperature on the logit scale:
//!
//! ```text
//! score = latent^(1/τ) / (latent^(1/τ) + (1 - latent)^(1/τ))
//! ```
//!
//! `τ = 1` reports the latent itself (calibrated); other values distort the
//! scores monotonically. Small sharpness gives U-shaped, informative
//! latents; large sharpness concentrates them near the prevalence.
//!
//! All randomness comes from one `ChaCha8Rng` stream seeded with
//! `SynthConfig::seed`, consumed patient by patient, case by case, class by
//! class, so a given config always yields the same cohort.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::Taxonomy;

use super::ScoredCase;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSynth {
    pub prevalence: f64,
    pub sharpness: f64,
    /// Miscalibration temperature; 1 means calibrated.
    pub temperature: f64,
}

impl Default for ClassSynth {
    fn default() -> Self {
        Self {
            prevalence: 0.1,
            sharpness: 1.0,
            temperature: 1.0,
        }
    }
}

impl ClassSynth {
    fn validate(&self, what: &str) -> Result<()> {
        if !(0.0..=1.0).contains(&self.prevalence) {
            return Err(Error::input(format!(
                "{what}: prevalence {} is outside [0, 1]",
                self.prevalence
            )));
        }
        if !(self.sharpness.is_finite() && self.sharpness > 0.0) {
            return Err(Error::input(format!(
                "{what}: sharpness must be positive, got {}",
                self.sharpness
            )));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::input(format!(
                "{what}: temperature must be positive, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Cases per synthetic patient, drawn uniformly from `min..=max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatientCases {
    pub min: usize,
    pub max: usize,
}

impl Default for PatientCases {
    fn default() -> Self {
        Self { min: 1, max: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub cohort_size: usize,
    #[serde(default)]
    pub cases_per_patient: PatientCases,
    /// Parameters for every class without an override.
    #[serde(default)]
    pub default_class: ClassSynth,
    /// Per-class overrides keyed by class id.
    #[serde(default)]
    pub classes: BTreeMap<String, ClassSynth>,
}

impl SynthConfig {
    pub fn new(seed: u64, cohort_size: usize, default_class: ClassSynth) -> Self {
        Self {
            seed,
            cohort_size,
            cases_per_patient: PatientCases::default(),
            default_class,
            classes: BTreeMap::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::input(format!("synth config: {e}")))
    }

    /// Resolves the parameters of every class, in taxonomy order.
    pub fn resolve(&self, taxonomy: &Taxonomy) -> Result<Vec<ClassSynth>> {
        if self.cohort_size == 0 {
            return Err(Error::input("synth config: cohort_size must be at least 1"));
        }
        let PatientCases { min, max } = self.cases_per_patient;
        if min == 0 || min > max {
            return Err(Error::input(format!(
                "synth config: cases_per_patient needs 1 <= min <= max, got {min}..={max}"
            )));
        }
        if let Some(id) = self
            .classes
            .keys()
            .find(|id| taxonomy.index_of(id).is_none())
        {
            return Err(Error::input(format!("synth config: unknown class {id:?}")));
        }
        self.default_class.validate("default_class")?;
        taxonomy
            .ids()
            .map(|id| {
                let params = self.classes.get(id).copied().unwrap_or(self.default_class);
                params.validate(id)?;
                Ok(params)
            })
            .collect()
    }
}

/// A generated cohort together with the latent probabilities behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCohort {
    pub cases: Vec<ScoredCase>,
    pub latents: Vec<Vec<f64>>,
}

enum LatentDraw {
    Fixed(f64),
    Beta(Beta<f64>),
}

fn distort(latent: f64, temperature: f64) -> f64 {
    if temperature == 1.0 {
        return latent;
    }
    let inv = 1.0 / temperature;
    let a = latent.powf(inv);
    let b = (1.0 - latent).powf(inv);
    (a / (a + b)).clamp(0.0, 1.0)
}

impl SynthCohort {
    pub fn generate(config: &SynthConfig, taxonomy: &Taxonomy) -> Result<Self> {
        let params = config.resolve(taxonomy)?;
        let draws = params
            .iter()
            .map(|c| {
                if c.prevalence == 0.0 || c.prevalence == 1.0 {
                    Ok(LatentDraw::Fixed(c.prevalence))
                } else {
                    Beta::new(
                        c.prevalence * c.sharpness,
                        (1.0 - c.prevalence) * c.sharpness,
                    )
                    .map(LatentDraw::Beta)
                    .map_err(|e| Error::input(format!("synth config: {e}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let PatientCases { min, max } = config.cases_per_patient;
        let mut cases = Vec::with_capacity(config.cohort_size);
        let mut latents = Vec::with_capacity(config.cohort_size);
        let mut patient = 0usize;
        while cases.len() < config.cohort_size {
            let n = if min == max {
                min
            } else {
                rng.random_range(min..=max)
            };
            let patient_id = format!("patient{patient:06}");
            for _ in 0..n.min(config.cohort_size - cases.len()) {
                let mut scores = Vec::with_capacity(params.len());
                let mut labels = Vec::with_capacity(params.len());
                let mut row = Vec::with_capacity(params.len());
                for (draw, class) in draws.iter().zip(&params) {
                    let latent = match draw {
                        LatentDraw::Fixed(p) => *p,
                        LatentDraw::Beta(beta) => beta.sample(&mut rng),
                    };
                    let u: f64 = rng.random();
                    labels.push(u < latent);
                    scores.push(distort(latent, class.temperature));
                    row.push(latent);
                }
                let case_id = format!("case{:06}", cases.len());
                cases.push(ScoredCase::new(
                    case_id,
                    Some(patient_id.clone()),
                    scores,
                    Some(labels),
                )?);
                latents.push(row);
            }
            patient += 1;
        }
        Ok(Self { cases, latents })
    }
}

pub fn synth_generate(config: &SynthConfig, taxonomy: &Taxonomy) -> Result<Vec<ScoredCase>> {
    SynthCohort::generate(config, taxonomy).map(|c| c.cases)
}
