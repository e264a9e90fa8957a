//! Versioned JSON documents.
//!
//! Every document the tools read or write may carry a top-level
//! `schema_version`. Readers accept documents without one (taken as the
//! current version) and reject other versions; parse failures are reported
//! with the path of the offending field.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

/// Version written into, and accepted from, JSON documents.
pub const SCHEMA_VERSION: u32 = 1;

/// Parses a document, checking and removing `schema_version` first.
pub fn from_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Spec {
        field: None,
        message: format!("not valid JSON: {e}"),
    })?;
    from_value(value)
}

/// As [`from_str`], for an already parsed value.
pub fn from_value<T: DeserializeOwned>(mut value: Value) -> Result<T> {
    if let Value::Object(map) = &mut value {
        if let Some(v) = map.remove("schema_version") {
            match v.as_u64() {
                Some(v) if v == SCHEMA_VERSION as u64 => {}
                _ => {
                    return Err(Error::spec(
                        "schema_version",
                        format!("unsupported schema version {v}; this build reads version {SCHEMA_VERSION}"),
                    ))
                }
            }
        }
    }
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        Error::Spec {
            field: (path != ".").then_some(path),
            message: e.into_inner().to_string(),
        }
    })
}

/// Serializes a document with `schema_version` as its first key.
pub fn to_value<T: Serialize>(doc: &T) -> Value {
    let value = serde_json::to_value(doc).expect("documents serialize to JSON");
    match value {
        Value::Object(map) => {
            let mut out = serde_json::Map::with_capacity(map.len() + 1);
            out.insert("schema_version".into(), SCHEMA_VERSION.into());
            out.extend(map);
            Value::Object(out)
        }
        other => other,
    }
}

/// Pretty-printed [`to_value`] with a trailing newline.
pub fn to_string_pretty<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(&to_value(doc)).expect("documents serialize to JSON");
    s.push('\n');
    s
}
