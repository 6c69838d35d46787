//! JSON policy documents.
//!
//! A document is an object tagged by `"type"`. Numeric fields are `k`, `k0`,
//! `k1`, `gamma`, `p`, `l` and `max_iter`; NSTEP adds `boundaries` and
//! COMPOSITE adds `segments` (`{"start", "end", "policy"}` objects). Fields
//! that a type does not take are rejected.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};
use thiserror::Error;

use super::{CyclicKind, LrPolicy, Segment};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyParseError {
    #[error("malformed policy document: {0}")]
    Malformed(String),
    #[error("{}: expected a JSON object", show_path(.path))]
    NotAnObject { path: String },
    #[error("{}: missing \"type\"", show_path(.path))]
    MissingType { path: String },
    #[error("{}: unknown policy type {kind:?}", show_path(.path))]
    UnknownKind { path: String, kind: String },
    #[error("{}: {kind} is missing {}", show_path(.path), .fields.join(", "))]
    MissingFields {
        path: String,
        kind: String,
        fields: Vec<&'static str>,
    },
    #[error("{}: {kind} does not take {}", show_path(.path), .fields.join(", "))]
    UnknownFields {
        path: String,
        kind: String,
        fields: Vec<String>,
    },
    #[error("{}: field {field} must be {expected}", show_path(.path))]
    InvalidField {
        path: String,
        field: &'static str,
        expected: &'static str,
    },
}

fn show_path(path: &str) -> &str {
    if path.is_empty() {
        "policy"
    } else {
        path
    }
}

/// Parses a policy document. Only the schema is checked here; use
/// [`super::validate_policy`] for value invariants.
pub fn parse_policy(text: &str) -> Result<LrPolicy, PolicyParseError> {
    let value: Value = serde_json::from_str(text).map_err(|e| PolicyParseError::Malformed(e.to_string()))?;
    policy_from_value(&value)
}

/// Compact single-line JSON for a policy. Keys are emitted in sorted order so
/// the text is a stable identity for the policy.
pub fn serialize_policy(policy: &LrPolicy) -> String {
    policy_to_value(policy).to_string()
}

pub fn policy_to_value(policy: &LrPolicy) -> Value {
    let mut m = Map::new();
    m.insert("type".into(), Value::from(policy.type_name()));
    match policy {
        LrPolicy::Fix { k } => {
            m.insert("k".into(), Value::from(*k));
        }
        LrPolicy::Step { k, gamma, l } => {
            m.insert("k".into(), Value::from(*k));
            m.insert("gamma".into(), Value::from(*gamma));
            m.insert("l".into(), Value::from(*l));
        }
        LrPolicy::NStep { k, gamma, boundaries } => {
            m.insert("k".into(), Value::from(*k));
            m.insert("gamma".into(), Value::from(*gamma));
            m.insert("boundaries".into(), Value::from(boundaries.clone()));
        }
        LrPolicy::Exp { k, gamma } => {
            m.insert("k".into(), Value::from(*k));
            m.insert("gamma".into(), Value::from(*gamma));
        }
        LrPolicy::Inv { k, gamma, p } => {
            m.insert("k".into(), Value::from(*k));
            m.insert("gamma".into(), Value::from(*gamma));
            m.insert("p".into(), Value::from(*p));
        }
        LrPolicy::Poly { k, p, max_iter } => {
            m.insert("k".into(), Value::from(*k));
            m.insert("p".into(), Value::from(*p));
            if let Some(mi) = max_iter {
                m.insert("max_iter".into(), Value::from(*mi));
            }
        }
        LrPolicy::Cyclic { k0, k1, l, gamma, .. } => {
            m.insert("k0".into(), Value::from(*k0));
            m.insert("k1".into(), Value::from(*k1));
            m.insert("l".into(), Value::from(*l));
            if let Some(g) = gamma {
                m.insert("gamma".into(), Value::from(*g));
            }
        }
        LrPolicy::Composite { segments } => {
            let segs = segments
                .iter()
                .map(|s| {
                    let mut sm = Map::new();
                    sm.insert("start".into(), Value::from(s.start));
                    sm.insert("end".into(), Value::from(s.end));
                    sm.insert("policy".into(), policy_to_value(&s.policy));
                    Value::Object(sm)
                })
                .collect();
            m.insert("segments".into(), Value::Array(segs));
        }
    }
    Value::Object(m)
}

pub fn policy_from_value(value: &Value) -> Result<LrPolicy, PolicyParseError> {
    parse_at(value, "")
}

struct Fields<'a> {
    obj: &'a Map<String, Value>,
    path: &'a str,
    kind: &'a str,
}

impl<'a> Fields<'a> {
    /// Checks the exact key set before any value is read.
    fn expect(&self, required: &[&'static str], optional: &[&'static str]) -> Result<(), PolicyParseError> {
        let missing: Vec<&'static str> = required.iter().copied().filter(|f| !self.obj.contains_key(*f)).collect();
        if !missing.is_empty() {
            return Err(PolicyParseError::MissingFields {
                path: self.path.to_string(),
                kind: self.kind.to_string(),
                fields: missing,
            });
        }
        let mut extra: Vec<String> = self
            .obj
            .keys()
            .filter(|k| k.as_str() != "type" && !required.contains(&k.as_str()) && !optional.contains(&k.as_str()))
            .cloned()
            .collect();
        if !extra.is_empty() {
            extra.sort();
            return Err(PolicyParseError::UnknownFields {
                path: self.path.to_string(),
                kind: self.kind.to_string(),
                fields: extra,
            });
        }
        Ok(())
    }

    fn invalid(&self, field: &'static str, expected: &'static str) -> PolicyParseError {
        PolicyParseError::InvalidField {
            path: self.path.to_string(),
            field,
            expected,
        }
    }

    fn real(&self, name: &'static str) -> Result<f64, PolicyParseError> {
        self.obj
            .get(name)
            .and_then(Value::as_f64)
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.invalid(name, "a finite number"))
    }

    fn int(&self, name: &'static str) -> Result<u64, PolicyParseError> {
        self.obj
            .get(name)
            .and_then(Value::as_u64)
            .ok_or_else(|| self.invalid(name, "a non-negative integer"))
    }

    fn opt_int(&self, name: &'static str) -> Result<Option<u64>, PolicyParseError> {
        match self.obj.get(name) {
            None => Ok(None),
            Some(_) => self.int(name).map(Some),
        }
    }

    fn int_list(&self, name: &'static str) -> Result<Vec<u64>, PolicyParseError> {
        let arr = self
            .obj
            .get(name)
            .and_then(Value::as_array)
            .ok_or_else(|| self.invalid(name, "an array of non-negative integers"))?;
        arr.iter()
            .map(|v| v.as_u64().ok_or_else(|| self.invalid(name, "an array of non-negative integers")))
            .collect()
    }
}

fn parse_at(value: &Value, path: &str) -> Result<LrPolicy, PolicyParseError> {
    let obj = value.as_object().ok_or_else(|| PolicyParseError::NotAnObject { path: path.to_string() })?;
    let kind = match obj.get("type") {
        Some(Value::String(s)) => s.as_str(),
        Some(_) => {
            return Err(PolicyParseError::InvalidField {
                path: path.to_string(),
                field: "type",
                expected: "a string",
            })
        }
        None => return Err(PolicyParseError::MissingType { path: path.to_string() }),
    };
    let f = Fields { obj, path, kind };
    let policy = match kind {
        "FIX" => {
            f.expect(&["k"], &[])?;
            LrPolicy::Fix { k: f.real("k")? }
        }
        "STEP" => {
            f.expect(&["k", "gamma", "l"], &[])?;
            LrPolicy::Step {
                k: f.real("k")?,
                gamma: f.real("gamma")?,
                l: f.int("l")?,
            }
        }
        "NSTEP" => {
            f.expect(&["k", "gamma", "boundaries"], &[])?;
            LrPolicy::NStep {
                k: f.real("k")?,
                gamma: f.real("gamma")?,
                boundaries: f.int_list("boundaries")?,
            }
        }
        "EXP" => {
            f.expect(&["k", "gamma"], &[])?;
            LrPolicy::Exp {
                k: f.real("k")?,
                gamma: f.real("gamma")?,
            }
        }
        "INV" => {
            f.expect(&["k", "gamma", "p"], &[])?;
            LrPolicy::Inv {
                k: f.real("k")?,
                gamma: f.real("gamma")?,
                p: f.real("p")?,
            }
        }
        "POLY" => {
            f.expect(&["k", "p"], &["max_iter"])?;
            LrPolicy::Poly {
                k: f.real("k")?,
                p: f.real("p")?,
                max_iter: f.opt_int("max_iter")?,
            }
        }
        "COMPOSITE" => {
            f.expect(&["segments"], &[])?;
            let arr = obj
                .get("segments")
                .and_then(Value::as_array)
                .ok_or_else(|| f.invalid("segments", "an array of segment objects"))?;
            let mut segments = Vec::with_capacity(arr.len());
            for (i, sv) in arr.iter().enumerate() {
                let spath = if path.is_empty() {
                    format!("segments[{i}]")
                } else {
                    format!("{path}.segments[{i}]")
                };
                let so = sv.as_object().ok_or_else(|| PolicyParseError::NotAnObject { path: spath.clone() })?;
                let sf = Fields {
                    obj: so,
                    path: &spath,
                    kind: "segment",
                };
                // Segments have no "type" key, so reuse the key-set check by hand.
                let missing: Vec<&'static str> = ["start", "end", "policy"]
                    .into_iter()
                    .filter(|k| !so.contains_key(*k))
                    .collect();
                if !missing.is_empty() {
                    return Err(PolicyParseError::MissingFields {
                        path: spath,
                        kind: "segment".into(),
                        fields: missing,
                    });
                }
                let mut extra: Vec<String> = so
                    .keys()
                    .filter(|k| !matches!(k.as_str(), "start" | "end" | "policy"))
                    .cloned()
                    .collect();
                if !extra.is_empty() {
                    extra.sort();
                    return Err(PolicyParseError::UnknownFields {
                        path: spath,
                        kind: "segment".into(),
                        fields: extra,
                    });
                }
                let inner = parse_at(&so["policy"], &format!("{spath}.policy"))?;
                segments.push(Segment {
                    start: sf.int("start")?,
                    end: sf.int("end")?,
                    policy: inner,
                });
            }
            LrPolicy::Composite { segments }
        }
        other => {
            let kind = CyclicKind::from_name(other).ok_or_else(|| PolicyParseError::UnknownKind {
                path: path.to_string(),
                kind: other.to_string(),
            })?;
            if kind.needs_gamma() {
                f.expect(&["k0", "k1", "l", "gamma"], &[])?;
            } else {
                f.expect(&["k0", "k1", "l"], &[])?;
            }
            LrPolicy::Cyclic {
                kind,
                k0: f.real("k0")?,
                k1: f.real("k1")?,
                l: f.int("l")?,
                gamma: if kind.needs_gamma() { Some(f.real("gamma")?) } else { None },
            }
        }
    };
    Ok(policy)
}

impl Serialize for LrPolicy {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        policy_to_value(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LrPolicy {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        policy_from_value(&value).map_err(D::Error::custom)
    }
}
