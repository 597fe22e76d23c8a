//! JSON chain file format.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "name": "bruin-todd",
//!   "domain": { "kind": "naturals", "min": 1 },
//!   "window": 9,
//!   "states": { "1": { "at_least": 1 } },
//!   "tail_rules": { "period": 1, "residues": [ { "at_least": -1 } ] }
//! }
//! ```
//!
//! A row in `states` is either an array of successor indices or an object
//! with `successors` and an optional `at_least` / `at_most` ray. Tail residue
//! `r` applies to every state `i` with `i mod period = r` that has no explicit row;
//! its `offsets`, `at_least` and `at_most` are relative to `i`, `fixed` is absolute.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ChainError, OffsetRule, Ray, RelativeRay, Row, TailRules, TransitionRuleSet};
use crate::state::{StateDomain, StateId};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error(transparent)]
    Chain(#[from] ChainError),
}

impl From<serde_json::Error> for SpecError {
    fn from(e: serde_json::Error) -> Self {
        SpecError::Parse { line: e.line(), column: e.column(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub domain: StateDomain,
    #[serde(default = "default_window")]
    pub window: i64,
    #[serde(default)]
    pub states: BTreeMap<String, RowSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_rules: Option<TailSpec>,
}

fn default_window() -> i64 {
    16
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum RowSpec {
    List(Vec<i64>),
    Object {
        #[serde(default)]
        successors: Vec<i64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at_least: Option<i64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at_most: Option<i64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TailSpec {
    pub period: i64,
    pub residues: Vec<ResidueSpec>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ResidueSpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub offsets: Vec<i64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fixed: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at_least: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at_most: Option<i64>,
}

fn one_ray<T>(at_least: Option<i64>, at_most: Option<i64>, lo: fn(i64) -> T, hi: fn(i64) -> T) -> Result<Option<T>, SpecError> {
    match (at_least, at_most) {
        (Some(_), Some(_)) => Err(SpecError::SchemaMismatch("a row may carry at most one ray".into())),
        (Some(k), None) => Ok(Some(lo(k))),
        (None, Some(k)) => Ok(Some(hi(k))),
        (None, None) => Ok(None),
    }
}

impl ChainSpec {
    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        let spec: ChainSpec = serde_json::from_str(text)?;
        if spec.schema_version != SCHEMA_VERSION {
            return Err(SpecError::SchemaMismatch(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                spec.schema_version
            )));
        }
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("chain spec serializes")
    }

    pub fn build(&self) -> Result<TransitionRuleSet, SpecError> {
        let mut explicit = BTreeMap::new();
        for (key, row) in &self.states {
            let i: i64 = key
                .trim()
                .parse()
                .map_err(|_| SpecError::SchemaMismatch(format!("states.{key}: key is not an integer")))?;
            let row = match row {
                RowSpec::List(v) => Row::finite(v.iter().copied().map(StateId).collect()),
                RowSpec::Object { successors, at_least, at_most } => {
                    let mut r = Row::finite(successors.iter().copied().map(StateId).collect());
                    r.ray = one_ray(*at_least, *at_most, Ray::AtLeast, Ray::AtMost)?;
                    if let Some(ray) = r.ray {
                        r.targets.retain(|t| !ray.contains(*t));
                    }
                    r
                }
            };
            explicit.insert(StateId(i), row);
        }
        let tail = match &self.tail_rules {
            None => None,
            Some(t) => Some(TailRules {
                period: t.period,
                residues: t
                    .residues
                    .iter()
                    .map(|r| {
                        Ok(OffsetRule {
                            offsets: r.offsets.clone(),
                            fixed: r.fixed.iter().copied().map(StateId).collect(),
                            ray: one_ray(r.at_least, r.at_most, RelativeRay::AtLeast, RelativeRay::AtMost)?,
                        })
                    })
                    .collect::<Result<_, SpecError>>()?,
            }),
        };
        Ok(TransitionRuleSet::new(self.name.clone(), self.domain, explicit, tail, self.window)?)
    }

    pub fn from_rules(m: &TransitionRuleSet) -> Self {
        let states = m
            .explicit_rows()
            .iter()
            .map(|(i, row)| {
                let successors = row.targets.iter().map(|s| s.0).collect();
                let spec = match row.ray {
                    None => RowSpec::List(successors),
                    Some(Ray::AtLeast(k)) => RowSpec::Object { successors, at_least: Some(k), at_most: None },
                    Some(Ray::AtMost(k)) => RowSpec::Object { successors, at_least: None, at_most: Some(k) },
                };
                (i.0.to_string(), spec)
            })
            .collect();
        let tail_rules = m.tail().map(|t| TailSpec {
            period: t.period,
            residues: t
                .residues
                .iter()
                .map(|r| ResidueSpec {
                    offsets: r.offsets.clone(),
                    fixed: r.fixed.iter().map(|s| s.0).collect(),
                    at_least: match r.ray {
                        Some(RelativeRay::AtLeast(o)) => Some(o),
                        _ => None,
                    },
                    at_most: match r.ray {
                        Some(RelativeRay::AtMost(o)) => Some(o),
                        _ => None,
                    },
                })
                .collect(),
        });
        ChainSpec {
            schema_version: SCHEMA_VERSION,
            name: m.name().to_string(),
            domain: m.domain(),
            window: m.declared_window(),
            states,
            tail_rules,
        }
    }
}
