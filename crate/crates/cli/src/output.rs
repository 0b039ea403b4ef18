use std::fs;
use std::io::{self, Write};
use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Parameters echoed into every JSON output. Fields that do not apply to a
/// subcommand are `null`; subcommand-specific flags go in `extra` under
/// their flag names, so the object can be fed back through `--json-config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub n: Option<u32>,
    pub psi: Option<String>,
    pub window: Option<[u64; 2]>,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
    pub format: Format,
    pub out: Option<String>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl RunConfig {
    pub fn new(subcommand: &str, format: Format, out: Option<&Path>) -> Self {
        Self {
            subcommand: subcommand.into(),
            n: None,
            psi: None,
            window: None,
            samples: None,
            seed: None,
            format,
            out: out.map(|p| p.display().to_string()),
            extra: Map::new(),
        }
    }

    pub fn set(&mut self, key: &str, v: impl Serialize) {
        self.extra.insert(key.into(), serde_json::to_value(v).expect("flag values serialize"));
    }
}

/// A finished command: JSON results plus the same data as CSV rows.
pub struct Report {
    pub params: RunConfig,
    pub results: Value,
    pub elapsed_s: f64,
    /// Extra `#` lines after the version line.
    pub notes: Vec<String>,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Report {
    pub fn render(&self) -> io::Result<Vec<u8>> {
        match self.params.format {
            Format::Json => {
                let doc = serde_json::json!({
                    "command": self.params.subcommand,
                    "params": self.params,
                    "results": self.results,
                    "seed": self.params.seed,
                    "elapsed_s": self.elapsed_s,
                    "version": VERSION,
                });
                let mut out = serde_json::to_vec_pretty(&doc)?;
                out.push(b'\n');
                Ok(out)
            }
            Format::Csv => {
                let mut out = format!("# kg-lab v{VERSION}\n").into_bytes();
                for note in &self.notes {
                    writeln!(out, "# {note}")?;
                }
                let mut w = csv::Writer::from_writer(out);
                w.write_record(&self.header)?;
                for row in &self.rows {
                    w.write_record(row)?;
                }
                w.into_inner().map_err(|e| e.into_error())
            }
        }
    }

    pub fn emit(&self) -> io::Result<()> {
        let bytes = self.render()?;
        match &self.params.out {
            Some(path) => fs::write(path, bytes),
            None => io::stdout().lock().write_all(&bytes),
        }
    }
}

/// Shortest round-trip form, always with a decimal point or exponent.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}
