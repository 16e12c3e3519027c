//! Immutable, depth-limited copies of runtime values.

use std::collections::BTreeMap;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Map, Value as Json};

use crate::lang::value::Value;

/// Maximum nesting depth of a snapshot tree (a scalar has depth 1).
pub const MAX_DEPTH: usize = 8;
/// Lists and records keep at most this many entries.
pub const MAX_ENTRIES: usize = 100;

/// A structural copy of a value taken at record time.
///
/// JSON form: scalars, arrays and objects map directly. Markers are
/// single-key objects: `{"$fn": label}`, `{"$truncated": true}`,
/// `{"$cycle": true}`. Record keys starting with `$` are escaped by
/// doubling the `$`.
#[derive(Debug, Clone, PartialEq)]
pub enum ValueSnapshot {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    List(Vec<ValueSnapshot>),
    Record(BTreeMap<String, ValueSnapshot>),
    /// A method id (`module.name`), `<lambda>@span`, or a builtin name.
    FunctionRef(String),
    Truncated,
    Cycle,
}

pub fn snapshot(value: &Value) -> ValueSnapshot {
    let mut ancestors = Vec::new();
    snap(value, 1, &mut ancestors)
}

fn snap(value: &Value, level: usize, ancestors: &mut Vec<*const ()>) -> ValueSnapshot {
    match value {
        Value::Nil => ValueSnapshot::Null,
        Value::Bool(b) => ValueSnapshot::Bool(*b),
        Value::Int(i) => ValueSnapshot::Int(*i),
        Value::Float(x) => ValueSnapshot::Float(*x),
        Value::Str(s) => ValueSnapshot::Str(s.to_string()),
        Value::Function(f) => ValueSnapshot::FunctionRef(f.label()),
        Value::List(items) => {
            let ptr = std::rc::Rc::as_ptr(items) as *const ();
            if ancestors.contains(&ptr) {
                return ValueSnapshot::Cycle;
            }
            if level >= MAX_DEPTH {
                return ValueSnapshot::Truncated;
            }
            ancestors.push(ptr);
            let items = items.borrow();
            let mut out: Vec<ValueSnapshot> = items
                .iter()
                .take(MAX_ENTRIES)
                .map(|v| snap(v, level + 1, ancestors))
                .collect();
            if items.len() > MAX_ENTRIES {
                out.push(ValueSnapshot::Truncated);
            }
            ancestors.pop();
            ValueSnapshot::List(out)
        }
        Value::Record(fields) => {
            let ptr = std::rc::Rc::as_ptr(fields) as *const ();
            if ancestors.contains(&ptr) {
                return ValueSnapshot::Cycle;
            }
            if level >= MAX_DEPTH {
                return ValueSnapshot::Truncated;
            }
            ancestors.push(ptr);
            let fields = fields.borrow();
            let mut out: BTreeMap<String, ValueSnapshot> = fields
                .iter()
                .take(MAX_ENTRIES)
                .map(|(k, v)| (k.clone(), snap(v, level + 1, ancestors)))
                .collect();
            if fields.len() > MAX_ENTRIES {
                out.insert(TRUNCATED_KEY.to_string(), ValueSnapshot::Truncated);
            }
            ancestors.pop();
            ValueSnapshot::Record(out)
        }
    }
}

// Sorts after every identifier key and cannot be produced by a record literal.
const TRUNCATED_KEY: &str = "~truncated";

impl ValueSnapshot {
    /// Nesting depth; scalars and markers count 1.
    pub fn depth(&self) -> usize {
        match self {
            ValueSnapshot::List(items) => 1 + items.iter().map(|i| i.depth()).max().unwrap_or(0),
            ValueSnapshot::Record(fields) => 1 + fields.values().map(|i| i.depth()).max().unwrap_or(0),
            _ => 1,
        }
    }

    pub fn to_json(&self) -> Json {
        match self {
            ValueSnapshot::Null => Json::Null,
            ValueSnapshot::Bool(b) => Json::Bool(*b),
            ValueSnapshot::Int(i) => Json::from(*i),
            ValueSnapshot::Float(x) => serde_json::Number::from_f64(*x)
                .map(Json::Number)
                .unwrap_or(Json::Null),
            ValueSnapshot::Str(s) => Json::String(s.clone()),
            ValueSnapshot::List(items) => Json::Array(items.iter().map(|i| i.to_json()).collect()),
            ValueSnapshot::Record(fields) => {
                let mut map = Map::new();
                for (k, v) in fields {
                    let key = if k.starts_with('$') { format!("${k}") } else { k.clone() };
                    map.insert(key, v.to_json());
                }
                Json::Object(map)
            }
            ValueSnapshot::FunctionRef(label) => json!({ "$fn": label }),
            ValueSnapshot::Truncated => json!({ "$truncated": true }),
            ValueSnapshot::Cycle => json!({ "$cycle": true }),
        }
    }

    pub fn from_json(json: &Json) -> Result<ValueSnapshot, String> {
        Ok(match json {
            Json::Null => ValueSnapshot::Null,
            Json::Bool(b) => ValueSnapshot::Bool(*b),
            Json::Number(n) => {
                if let Some(i) = n.as_i64() {
                    ValueSnapshot::Int(i)
                } else if n.is_f64() {
                    ValueSnapshot::Float(n.as_f64().unwrap_or_default())
                } else {
                    return Err(format!("integer {n} out of range"));
                }
            }
            Json::String(s) => ValueSnapshot::Str(s.clone()),
            Json::Array(items) => ValueSnapshot::List(
                items
                    .iter()
                    .map(ValueSnapshot::from_json)
                    .collect::<Result<_, _>>()?,
            ),
            Json::Object(map) => {
                if map.len() == 1 {
                    let (k, v) = map.iter().next().expect("one entry");
                    match (k.as_str(), v) {
                        ("$fn", Json::String(label)) => return Ok(ValueSnapshot::FunctionRef(label.clone())),
                        ("$truncated", Json::Bool(true)) => return Ok(ValueSnapshot::Truncated),
                        ("$cycle", Json::Bool(true)) => return Ok(ValueSnapshot::Cycle),
                        _ => {}
                    }
                }
                let mut fields = BTreeMap::new();
                for (k, v) in map {
                    let key = match k.strip_prefix('$') {
                        Some(rest) if rest.starts_with('$') => rest.to_string(),
                        Some(_) => return Err(format!("unknown snapshot marker `{k}`")),
                        None => k.clone(),
                    };
                    fields.insert(key, ValueSnapshot::from_json(v)?);
                }
                ValueSnapshot::Record(fields)
            }
        })
    }

    /// Short single-line rendering for trees and logs.
    pub fn render(&self) -> String {
        match self {
            ValueSnapshot::Null => "nil".to_string(),
            ValueSnapshot::Bool(b) => b.to_string(),
            ValueSnapshot::Int(i) => i.to_string(),
            ValueSnapshot::Float(x) => format!("{x:?}"),
            ValueSnapshot::Str(s) => format!("{s:?}"),
            ValueSnapshot::List(items) => {
                let parts: Vec<String> = items.iter().map(|i| i.render()).collect();
                format!("[{}]", parts.join(", "))
            }
            ValueSnapshot::Record(fields) => {
                let parts: Vec<String> = fields.iter().map(|(k, v)| format!("{k}: {}", v.render())).collect();
                format!("{{{}}}", parts.join(", "))
            }
            ValueSnapshot::FunctionRef(label) => format!("<fn {label}>"),
            ValueSnapshot::Truncated => "…".to_string(),
            ValueSnapshot::Cycle => "<cycle>".to_string(),
        }
    }
}

impl Serialize for ValueSnapshot {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ValueSnapshot {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let json = Json::deserialize(deserializer)?;
        ValueSnapshot::from_json(&json).map_err(D::Error::custom)
    }
}
