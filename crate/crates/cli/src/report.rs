//! Run reports and atomic artifact writing.  Reruns with the same config and
//! seed are byte-identical except for the header, which isolates the
//! timestamp and wall-clock fields.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Pass => write!(f, "PASS"),
            Status::Fail => write!(f, "FAIL"),
            Status::Skipped => write!(f, "SKIPPED"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub status: Status,
    pub reason: String,
}

impl Assertion {
    pub fn pass(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Self { name: name.into(), status: Status::Pass, reason: reason.into() }
    }
    pub fn fail(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Self { name: name.into(), status: Status::Fail, reason: reason.into() }
    }
    pub fn skipped(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Self { name: name.into(), status: Status::Skipped, reason: reason.into() }
    }

    pub fn check(name: impl Into<String>, ok: bool, reason: impl Into<String>) -> Self {
        let status = if ok { Status::Pass } else { Status::Fail };
        Self { name: name.into(), status, reason: reason.into() }
    }
}

/// Nondeterministic run metadata, kept apart from the reproducible body.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportHeader {
    pub generated_at: String,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub header: ReportHeader,
    pub version: String,
    pub seed: u64,
    /// Config echo with resolved defaults.
    pub config: serde_json::Value,
    /// Per-pipeline result summaries.
    pub results: serde_json::Value,
    pub assertions: Vec<Assertion>,
}

impl RunReport {
    pub fn all_green(&self) -> bool {
        self.assertions.iter().all(|a| a.status != Status::Fail)
    }
}

/// Seconds since the Unix epoch, as a plain decimal string.
pub fn timestamp_now() -> String {
    match std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH) {
        Ok(d) => format!("{}.{:03}", d.as_secs(), d.subsec_millis()),
        Err(_) => "0".to_string(),
    }
}

/// Write through a temp file and rename, so failures never leave partial
/// artifacts behind.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp_path = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp_path, bytes)?;
    std::fs::rename(&tmp_path, path)?;
    Ok(())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())?;
    Ok(())
}
