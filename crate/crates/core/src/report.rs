//! JSON run reports.
//!
//! A report splits into a deterministic `payload` (resolved configuration,
//! seed, truncation metadata and results) and a wall-clock `generated_at`
//! stamp. Identical configuration and seed give a byte-identical payload.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    /// `None` for runs that compute without asserting anything.
    pub pass: Option<bool>,
    pub payload: Value,
    /// SHA-256 of the compact payload serialization.
    pub digest: String,
    /// Seconds since the Unix epoch; not part of the payload.
    pub generated_at: u64,
}

impl Report {
    pub fn new(
        command: &str,
        config: Value,
        result: impl Serialize,
        pass: Option<bool>,
    ) -> Result<Self> {
        let payload = json!({
            "command": command,
            "config": config,
            "pass": pass,
            "result": serde_json::to_value(result)?,
        });
        let digest = digest_hex(&serde_json::to_vec(&payload)?);
        let generated_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Ok(Self {
            command: command.to_string(),
            pass,
            payload,
            digest,
            generated_at,
        })
    }

    /// The bytes compared for reproducibility.
    pub fn payload_bytes(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec_pretty(&self.payload)?)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

pub fn digest_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
