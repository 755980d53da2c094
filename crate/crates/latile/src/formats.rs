//! JSON documents and CSV plot data.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use latile_core::{CacheProfile, LatencyData, PatternKind, PatternResults, SweepConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{}: {message}", path.display())]
    Schema { path: PathBuf, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Both raw sweeps behind a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawResults {
    pub cyclic: PatternResults,
    pub sawtooth: PatternResults,
}

/// The persisted machine model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileDocument {
    pub schema_version: u32,
    pub profile: CacheProfile,
    pub raw: RawResults,
    pub sweep_config: SweepConfig,
}

impl ProfileDocument {
    pub fn new(
        profile: CacheProfile,
        cyclic: PatternResults,
        sawtooth: PatternResults,
        sweep_config: SweepConfig,
    ) -> Self {
        ProfileDocument {
            schema_version: SCHEMA_VERSION,
            profile,
            raw: RawResults { cyclic, sawtooth },
            sweep_config,
        }
    }

    fn check(&self) -> Result<(), String> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.raw.cyclic.pattern != PatternKind::Cyclic || self.raw.sawtooth.pattern != PatternKind::Sawtooth {
            return Err("raw results are filed under the wrong pattern".into());
        }
        Ok(())
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    let text = fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| FormatError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| FormatError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_profile(path: &Path) -> Result<ProfileDocument, FormatError> {
    let doc: ProfileDocument = read_json(path)?;
    doc.check().map_err(|message| FormatError::Schema {
        path: path.to_path_buf(),
        message,
    })?;
    Ok(doc)
}

/// Writes `size_bytes,avg_ns` rows.
pub fn write_latency_csv<W: Write>(out: W, data: &[LatencyData]) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["size_bytes", "avg_ns"])?;
    for d in data {
        w.write_record([d.size.to_string(), d.avg_time.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Writes both sweeps as `pattern,size_bytes,avg_ns,peak`. `peak` names the
/// cache level (`L1`..`L3`) whose boundary was detected at that size and is
/// empty elsewhere.
pub fn write_report_csv<W: Write>(out: W, doc: &ProfileDocument) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["pattern", "size_bytes", "avg_ns", "peak"])?;
    for r in [&doc.raw.cyclic, &doc.raw.sawtooth] {
        let peaks = [r.peaks.0, r.peaks.1, r.peaks.2];
        for d in &r.data {
            let marker = peaks
                .iter()
                .position(|&p| p == d.size)
                .map(|i| format!("L{}", i + 1))
                .unwrap_or_default();
            w.write_record([
                r.pattern.as_str().to_string(),
                d.size.to_string(),
                d.avg_time.to_string(),
                marker,
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
