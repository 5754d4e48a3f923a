//! JSON config files merged under command-line flags.

use std::fmt;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

/// Keys that name files rather than experiment parameters; left out of the hash.
const PATH_KEYS: [&str; 5] = ["config", "out", "report", "trials_csv", "sieve_cache"];

#[derive(Debug)]
pub enum CliError {
    /// Bad input: exit status 2.
    Validation(String),
    /// Budget, allocation or i/o failure: exit status 3.
    Resource(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Resource(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Resource(m) => write!(f, "resource error: {m}"),
        }
    }
}

impl From<nilmobius::Error> for CliError {
    fn from(e: nilmobius::Error) -> Self {
        use nilmobius::Error as E;
        match e {
            E::Budget { .. } | E::Allocation(_) | E::Overflow(_) | E::Io(_) | E::SieveTooSmall { .. } => {
                CliError::Resource(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Resource(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Overlays the non-empty flags on the config file and returns the merged
/// parameters together with the canonical JSON used for hashing.
pub fn merge<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&Path>) -> CliResult<(T, Value)> {
    let mut base = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Resource(format!("reading {}: {e}", path.display())))?;
            match serde_json::from_str::<Value>(&text) {
                Ok(Value::Object(m)) => m,
                Ok(_) => return Err(CliError::Validation("config file must hold a JSON object".into())),
                Err(e) => return Err(CliError::Validation(format!("config {}: {e}", path.display()))),
            }
        }
        None => Map::new(),
    };
    let overlay = serde_json::to_value(flags).map_err(|e| CliError::Validation(e.to_string()))?;
    if let Value::Object(m) = overlay {
        for (k, v) in m {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
    let merged = Value::Object(base);
    let params: T = serde_json::from_value(merged.clone()).map_err(|e| CliError::Validation(format!("config: {e}")))?;
    let mut canonical = serde_json::to_value(&params).map_err(|e| CliError::Validation(e.to_string()))?;
    if let Value::Object(m) = &mut canonical {
        for k in PATH_KEYS {
            m.remove(k);
        }
        m.retain(|_, v| !v.is_null());
    }
    Ok((params, canonical))
}

/// SHA-256 of the canonical JSON, hex encoded.
pub fn config_hash(canonical: &Value) -> String {
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}
