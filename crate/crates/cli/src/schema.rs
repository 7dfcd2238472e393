//! TOML column schema.

use std::path::Path;

use dip_core::{ColumnKind, DiscreteSupport, MixedCeiling};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    #[serde(rename = "column")]
    pub columns: Vec<ColumnSchema>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    #[serde(flatten)]
    pub kind: KindSpec,
    /// `[lower, upper]`, used by the LRM mechanism.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KindSpec {
    Continuous,
    Discrete {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        support: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lattice: Option<LatticeSpec>,
    },
    Categorical {
        levels: Vec<String>,
    },
    Mixed {
        jumps: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub origin: f64,
    pub step: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,
}

impl ColumnSchema {
    pub fn column_kind(&self) -> Result<ColumnKind, CliError> {
        let bad = |msg: String| CliError::Data(format!("schema column `{}`: {msg}", self.name));
        Ok(match &self.kind {
            KindSpec::Continuous => ColumnKind::Continuous,
            KindSpec::Discrete { support, lattice } => match (support, lattice) {
                (Some(points), None) => {
                    ColumnKind::Discrete(DiscreteSupport::points(points.clone()).map_err(|e| bad(e.to_string()))?)
                }
                (None, Some(l)) => {
                    if !(l.step > 0.0 && l.step.is_finite() && l.origin.is_finite()) || l.count == Some(0) {
                        return Err(bad(
                            "lattice needs a finite origin, a positive step and a non-zero count".into(),
                        ));
                    }
                    ColumnKind::Discrete(DiscreteSupport::lattice(l.origin, l.step, l.count))
                }
                _ => return Err(bad("discrete columns need exactly one of `support` or `lattice`".into())),
            },
            KindSpec::Categorical { levels } => {
                if levels.len() < 2 {
                    return Err(bad("categorical columns need at least 2 levels".into()));
                }
                let mut seen = levels.clone();
                seen.sort();
                seen.dedup();
                if seen.len() != levels.len() {
                    return Err(bad("categorical levels must be distinct".into()));
                }
                ColumnKind::Categorical(levels.clone())
            }
            KindSpec::Mixed { jumps } => {
                ColumnKind::Mixed(MixedCeiling::new(jumps.clone()).map_err(|e| bad(e.to_string()))?)
            }
        })
    }
}

impl Schema {
    pub fn load(path: &Path) -> Result<Schema, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read schema {}: {e}", path.display())))?;
        Schema::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Schema, CliError> {
        let schema: Schema = toml::from_str(text).map_err(|e| CliError::Data(format!("schema: {e}")))?;
        if schema.columns.is_empty() {
            return Err(CliError::Data("schema declares no columns".into()));
        }
        let mut names: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(CliError::Data(format!("schema declares column `{}` twice", w[0])));
        }
        Ok(schema)
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSchema> {
        self.columns.iter().find(|c| c.name == name)
    }
}
