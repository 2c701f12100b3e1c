//! Result files. Every file starts with the tool version, the command and
//! the fully resolved scenario, so a figure can be traced back to its inputs.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ScenarioFile;
use crate::CliError;

pub const TOOL: &str = concat!("feshbach-opt ", env!("CARGO_PKG_VERSION"));

pub struct Emitter {
    dir: PathBuf,
    command: &'static str,
    config_json: String,
    pub written: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'a str,
    command: &'a str,
    config: &'a ScenarioFile,
    result: &'a T,
}

impl Emitter {
    pub fn new(dir: &Path, command: &'static str, sc: &ScenarioFile) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        let config_json = serde_json::to_string(sc).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Emitter { dir: dir.to_path_buf(), command, config_json, written: Vec::new() })
    }

    /// CSV with two `#` provenance lines, then a header row.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut out = BufWriter::new(File::create(&path)?);
        writeln!(out, "# {TOOL} {}", self.command)?;
        writeln!(out, "# config: {}", self.config_json)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        self.written.push(path);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, sc: &ScenarioFile, result: &T) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let env = Envelope { tool: TOOL, command: self.command, config: sc, result };
        let text = serde_json::to_string_pretty(&env).map_err(|e| CliError::Config(e.to_string()))?;
        fs::write(&path, text + "\n")?;
        self.written.push(path);
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}

/// Shortest round-trip decimal form.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}
