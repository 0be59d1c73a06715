//! JSON report documents with input fingerprints.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metric::{ConsistencyReport, SweepGrid};

pub const TOOL_NAME: &str = "tsed";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

impl InputFile {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
        Ok(InputFile {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "payload_type", rename_all = "snake_case")]
pub enum Payload {
    ConsistencyReport(ConsistencyReport),
    SweepGrid(SweepGrid),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub tool: String,
    pub version: String,
    pub created_unix: u64,
    pub inputs: Vec<InputFile>,
    /// Hash of the canonical JSON of `inputs` and the payload. Excludes `created_unix`, so
    /// reruns on identical inputs hash identically.
    pub payload_sha256: String,
    #[serde(flatten)]
    pub payload: Payload,
}

impl ReportDocument {
    pub fn new(inputs: Vec<InputFile>, payload: Payload) -> Result<Self> {
        let created_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let payload_sha256 = content_hash(&inputs, &payload)?;
        Ok(ReportDocument {
            tool: TOOL_NAME.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            created_unix,
            inputs,
            payload_sha256,
            payload,
        })
    }

    pub fn verify_hash(&self) -> Result<bool> {
        Ok(content_hash(&self.inputs, &self.payload)? == self.payload_sha256)
    }
}

fn content_hash(inputs: &[InputFile], payload: &Payload) -> Result<String> {
    let canonical = serde_json::to_vec(&(inputs, payload))?;
    Ok(sha256_hex(&canonical))
}

pub fn write_report(doc: &ReportDocument, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(doc)? + "\n";
    std::fs::write(path, text).map_err(|e| Error::file(path, e))
}

pub fn read_report(path: impl AsRef<Path>) -> Result<ReportDocument> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{ConsistencyReport, Thresholds};

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn document_round_trip_and_stable_hash() {
        let report = ConsistencyReport::from_verdicts(Vec::new(), Thresholds::default());
        let inputs = vec![InputFile {
            path: "poses.json".into(),
            sha256: sha256_hex(b"{}"),
        }];
        let a = ReportDocument::new(inputs.clone(), Payload::ConsistencyReport(report.clone()))
            .unwrap();
        let mut b = ReportDocument::new(inputs, Payload::ConsistencyReport(report)).unwrap();
        b.created_unix += 100;
        assert_eq!(a.payload_sha256, b.payload_sha256);

        let text = serde_json::to_string(&a).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["payload_type"], "consistency_report");
        assert_eq!(value["fraction"], 0.0);
        let back: ReportDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(back, a);
        assert!(back.verify_hash().unwrap());
    }
}
