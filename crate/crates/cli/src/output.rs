//! Output files: every file opens with a header block carrying the version,
//! the full config echo, the seed and the wall-clock time.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Unix seconds from `SOURCE_DATE_EPOCH` when set, else the system clock.
pub fn wall_clock() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0))
}

#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub program: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub wall_clock_unix: u64,
    pub config: ExperimentConfig,
}

impl Header {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            program: "treecp",
            version: VERSION,
            command: command.to_string(),
            seed: config.seed(),
            wall_clock_unix: wall_clock(),
            config: config.clone(),
        }
    }

    /// `#`-prefixed comment lines for CSV files.
    fn csv_block(&self) -> Result<String, CliError> {
        let config = serde_json::to_string(&self.config).map_err(|e| CliError::Io(e.to_string()))?;
        Ok(format!(
            "# {} {}\n# command: {}\n# seed: {}\n# wall_clock_unix: {}\n# config: {}\n",
            self.program, self.version, self.command, self.seed, self.wall_clock_unix, config
        ))
    }
}

/// Writes output files under one directory and remembers what it wrote.
pub struct Sink {
    dir: PathBuf,
    header: Header,
    pub written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(dir: &Path, header: Header) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), header, written: Vec::new() })
    }

    fn write(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    /// A CSV file: header block, then `body` (column header row included).
    pub fn csv(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let text = self.header.csv_block()? + body;
        self.write(name, &text)
    }

    /// A JSON object `{"header": ..., key: value}`.
    pub fn json(&mut self, name: &str, key: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut doc = serde_json::Map::new();
        let enc = |v: serde_json::Result<serde_json::Value>| v.map_err(|e| CliError::Io(e.to_string()));
        doc.insert("header".into(), enc(serde_json::to_value(&self.header))?);
        doc.insert(key.into(), enc(serde_json::to_value(value))?);
        let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))? + "\n";
        self.write(name, &text)
    }
}

/// Builds a CSV body with the `csv` writer.
pub fn csv_body<R: IntoIterator<Item = Vec<String>>>(header: &[&str], rows: R) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}
