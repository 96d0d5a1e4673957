//! Header blocks, number formatting and sinks.

use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::failure::Failure;

/// Provenance shared by every artifact.
#[derive(Clone, Debug, Serialize)]
pub struct Header {
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub config: Value,
    pub seed: Option<u64>,
    pub mode: String,
}

impl Header {
    /// `config` is the effective configuration after defaults were applied;
    /// its compact JSON form is what gets hashed.
    pub fn new(command: &str, config: Value, seed: Option<u64>, mode: &str) -> Self {
        let canonical = config.to_string();
        Header {
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_sha256: hex::encode(Sha256::digest(canonical.as_bytes())),
            config,
            seed,
            mode: mode.to_string(),
        }
    }

    pub fn csv_comment(&self) -> String {
        let seed = self.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        format!(
            "# ddbound {}\n# command: {}\n# config_sha256: {}\n# config: {}\n# seed: {}\n# mode: {}\n",
            self.version, self.command, self.config_sha256, self.config, seed, self.mode
        )
    }
}

/// Mode label with its rigor status.
pub fn mode_label(mode: ddbound::qdd_bounds::OrderMode) -> String {
    let rigor = if mode.is_rigorous() { "rigorous" } else { "non-rigorous" };
    format!("{} ({rigor})", mode.as_str())
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        // NaN marks a row whose value could not be computed.
        format!("{x}")
    }
}

/// CSV document: header block, column line, rows, then optional trailing
/// comments.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &Header, columns: &[&str]) -> Self {
        let mut text = header.csv_comment();
        text.push_str(&columns.join(","));
        text.push('\n');
        Csv { text }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn comment(&mut self, line: &str) {
        let _ = writeln!(self.text, "# {line}");
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

/// JSON document `{"header": ..., "<key>": ...}` with a trailing newline.
pub fn json_document(header: &Header, key: &str, body: &impl Serialize) -> Result<String, Failure> {
    let body = serde_json::to_value(body).map_err(|e| Failure::Invalid(format!("cannot serialize output: {e}")))?;
    let doc = serde_json::json!({ "header": header, key: body });
    let mut text =
        serde_json::to_string_pretty(&doc).map_err(|e| Failure::Invalid(format!("cannot serialize output: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Writes to `out`, or stdout when absent. `append` keeps earlier results.
pub fn emit(text: &str, out: Option<&Path>, append: bool) -> Result<(), Failure> {
    match out {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|e| Failure::Invalid(format!("cannot write to stdout: {e}")))
        }
        Some(path) => {
            let mut file = OpenOptions::new()
                .create(true)
                .write(true)
                .append(append)
                .truncate(!append)
                .open(path)
                .map_err(|e| Failure::Invalid(format!("--out {}: {e}", path.display())))?;
            file.write_all(text.as_bytes())
                .map_err(|e| Failure::Invalid(format!("--out {}: {e}", path.display())))
        }
    }
}
