//! JSON documents exchanged with files and the service. Every document
//! carries a top-level `"schema": 1`.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{AngleUnits, SkeletonConfig, ThreadingPattern};

pub const SCHEMA_VERSION: u32 = 1;

fn schema_v1() -> u32 {
    SCHEMA_VERSION
}

/// A payload wrapped with its schema version. A missing `schema` key is
/// read as the current version.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Document<T> {
    #[serde(default = "schema_v1")]
    pub schema: u32,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Document<T> {
    pub fn new(body: T) -> Self {
        Document {
            schema: SCHEMA_VERSION,
            body,
        }
    }

    pub fn into_body(self) -> Result<T> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        Ok(self.body)
    }
}

pub fn from_document_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str::<Document<T>>(text)?.into_body()
}

pub fn to_document_json<T: Serialize>(body: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Document::new(body))?)
}

pub fn config_from_json(text: &str) -> Result<SkeletonConfig> {
    let cfg: SkeletonConfig = from_document_json(text)?;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatternDocument {
    /// Hole offset per rib, mm.
    pub offsets: Vec<f64>,
}

pub fn pattern_from_json(cfg: &SkeletonConfig, text: &str) -> Result<ThreadingPattern> {
    let doc: PatternDocument = from_document_json(text)?;
    ThreadingPattern::new(cfg, doc.offsets)
}

pub fn pattern_to_json(pattern: &ThreadingPattern) -> Result<String> {
    to_document_json(&PatternDocument {
        offsets: pattern.offsets().to_vec(),
    })
}

/// An angle list with the units it was written in.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AngleListDocument {
    #[serde(default)]
    pub units: AngleUnits,
    pub angles: Vec<f64>,
}

impl AngleListDocument {
    pub fn radians(&self) -> Vec<f64> {
        self.angles.iter().map(|&a| self.units.to_radians(a)).collect()
    }
}

/// Reads an angle list document and returns the angles in radians.
pub fn angles_from_json(text: &str) -> Result<Vec<f64>> {
    let doc: AngleListDocument = from_document_json(text)?;
    Ok(doc.radians())
}

/// Parses `"0,0,10.5"` style lists and converts to radians.
pub fn parse_angle_list(text: &str, units: AngleUnits) -> Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map(|v| units.to_radians(v))
                .map_err(|_| Error::Format(format!("not a number: {t:?}")))
        })
        .collect()
}
