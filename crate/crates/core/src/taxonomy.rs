//! Class registry, risk stratification and tube-category grouping.
//!
//! The order of [`Taxonomy::classes`] is the canonical column order for
//! every score, label and prediction-set vector in the crate.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Clinical significance of a class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskGroup {
    /// Misplaced or incompletely imaged tube states. Missing one is a
    /// high-risk error.
    Critical,
    /// Correctly positioned tube states.
    Normal,
    Other,
}

impl RiskGroup {
    pub fn token(self) -> &'static str {
        match self {
            RiskGroup::Critical => "critical",
            RiskGroup::Normal => "normal",
            RiskGroup::Other => "other",
        }
    }
}

/// Device family a class belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TubeCategory {
    #[serde(rename = "ett")]
    Ett,
    #[serde(rename = "ngt")]
    Ngt,
    #[serde(rename = "cvc")]
    Cvc,
    #[serde(rename = "swan_ganz")]
    SwanGanz,
}

impl TubeCategory {
    pub const ALL: [TubeCategory; 4] = [
        TubeCategory::Ett,
        TubeCategory::Ngt,
        TubeCategory::Cvc,
        TubeCategory::SwanGanz,
    ];

    pub fn token(self) -> &'static str {
        match self {
            TubeCategory::Ett => "ett",
            TubeCategory::Ngt => "ngt",
            TubeCategory::Cvc => "cvc",
            TubeCategory::SwanGanz => "swan_ganz",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TubeCategory::Ett => "ETT",
            TubeCategory::Ngt => "NGT",
            TubeCategory::Cvc => "CVC",
            TubeCategory::SwanGanz => "Swan Ganz",
        }
    }
}

impl fmt::Display for TubeCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDef {
    /// Machine id, used in CSV column headers.
    pub id: String,
    #[serde(rename = "name")]
    pub display_name: String,
    pub risk_group: RiskGroup,
    pub tube_category: TubeCategory,
}

impl ClassDef {
    pub fn new(
        id: impl Into<String>,
        display_name: impl Into<String>,
        risk_group: RiskGroup,
        tube_category: TubeCategory,
    ) -> Self {
        Self {
            id: id.into(),
            display_name: display_name.into(),
            risk_group,
            tube_category,
        }
    }

    pub fn is_critical(&self) -> bool {
        self.risk_group == RiskGroup::Critical
    }
}

/// An ordered, validated set of classes.
///
/// Construct through [`Taxonomy::new`], [`Taxonomy::default_ranzcr`] or
/// [`parse_taxonomy`]; all three enforce the registry invariants.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Taxonomy {
    version: String,
    classes: Vec<ClassDef>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TaxonomyFile {
    version: String,
    classes: Vec<ClassDef>,
}

impl Taxonomy {
    pub fn new(version: impl Into<String>, classes: Vec<ClassDef>) -> Result<Self> {
        let taxonomy = Self {
            version: version.into(),
            classes,
        };
        taxonomy.validate()?;
        Ok(taxonomy)
    }

    /// The 11-class catheter and line taxonomy, in dataset listing order.
    pub fn default_ranzcr() -> Self {
        use RiskGroup::*;
        use TubeCategory::*;
        let classes = vec![
            ClassDef::new("ett_abnormal", "ETT - Abnormal", Critical, Ett),
            ClassDef::new("ett_borderline", "ETT - Borderline", Critical, Ett),
            ClassDef::new("ett_normal", "ETT - Normal", Normal, Ett),
            ClassDef::new("ngt_abnormal", "NGT - Abnormal", Critical, Ngt),
            ClassDef::new("ngt_borderline", "NGT - Borderline", Critical, Ngt),
            ClassDef::new(
                "ngt_incompletely_imaged",
                "NGT - Incompletely Imaged",
                Critical,
                Ngt,
            ),
            ClassDef::new("ngt_normal", "NGT - Normal", Normal, Ngt),
            ClassDef::new("cvc_abnormal", "CVC - Abnormal", Critical, Cvc),
            ClassDef::new("cvc_borderline", "CVC - Borderline", Critical, Cvc),
            ClassDef::new("cvc_normal", "CVC - Normal", Normal, Cvc),
            ClassDef::new(
                "swan_ganz_present",
                "Swan Ganz Catheter Present",
                Other,
                SwanGanz,
            ),
        ];
        Self::new("ranzcr-clip-11", classes).expect("built-in taxonomy is valid")
    }

    fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::input("taxonomy has no classes"));
        }
        let mut seen = HashSet::new();
        for class in &self.classes {
            if class.id.is_empty() {
                return Err(Error::input("class id must be non-empty"));
            }
            if class.id.contains(',') || class.id.contains(':') {
                return Err(Error::input(format!(
                    "class id {:?} may not contain ',' or ':'",
                    class.id
                )));
            }
            if !seen.insert(class.id.as_str()) {
                return Err(Error::input(format!("duplicate class id {:?}", class.id)));
            }
        }
        for class in self
            .classes
            .iter()
            .filter(|c| c.risk_group == RiskGroup::Normal)
        {
            let has_critical = self
                .classes
                .iter()
                .any(|c| c.tube_category == class.tube_category && c.is_critical());
            if !has_critical {
                return Err(Error::validation(format!(
                    "normal class {:?} has no critical class in tube category {}",
                    class.id,
                    class.tube_category.token()
                )));
            }
        }
        Ok(())
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn classes(&self) -> &[ClassDef] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn class(&self, index: usize) -> &ClassDef {
        &self.classes[index]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.classes.iter().position(|c| c.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.classes.iter().map(|c| c.id.as_str())
    }

    pub fn indices_in(&self, group: RiskGroup) -> impl Iterator<Item = usize> + '_ {
        self.classes
            .iter()
            .enumerate()
            .filter(move |(_, c)| c.risk_group == group)
            .map(|(i, _)| i)
    }

    /// Class indices of one tube category, in canonical order.
    pub fn indices_of_category(&self, category: TubeCategory) -> impl Iterator<Item = usize> + '_ {
        self.classes
            .iter()
            .enumerate()
            .filter(move |(_, c)| c.tube_category == category)
            .map(|(i, _)| i)
    }

    /// Tube categories present in this taxonomy, in first-appearance order.
    pub fn categories(&self) -> Vec<TubeCategory> {
        let mut out = Vec::new();
        for class in &self.classes {
            if !out.contains(&class.tube_category) {
                out.push(class.tube_category);
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("taxonomy serializes");
        text.push('\n');
        text
    }

    /// Hex SHA-256 over the ordered `(id, risk_group, tube_category)` tuples.
    pub fn fingerprint(&self) -> String {
        fingerprint(self)
    }
}

/// Parses and validates a taxonomy JSON document.
pub fn parse_taxonomy(text: &str) -> Result<Taxonomy> {
    let file: TaxonomyFile = serde_json::from_str(text).map_err(|e| {
        if e.is_data() || e.is_syntax() || e.is_eof() {
            Error::input(format!("taxonomy file: {e}"))
        } else {
            Error::Json(e)
        }
    })?;
    Taxonomy::new(file.version, file.classes)
}

pub fn fingerprint(taxonomy: &Taxonomy) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"linecp-taxonomy-v1\n");
    for class in taxonomy.classes() {
        hasher.update(class.id.as_bytes());
        hasher.update([0x1f]);
        hasher.update(class.risk_group.token().as_bytes());
        hasher.update([0x1f]);
        hasher.update(class.tube_category.token().as_bytes());
        hasher.update([0x1e]);
    }
    hex::encode(hasher.finalize())
}
