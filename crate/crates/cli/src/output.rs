//! Output formatting: comment headers, fixed-width floats, file routing.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::config::RunConfig;

pub const VERSION: &str = concat!("optobind ", env!("CARGO_PKG_VERSION"));

/// 17 significant digits, enough to round-trip any double.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn header_lines(command: &str, config: &RunConfig) -> String {
    let mut out = format!("# {VERSION}\n# command = {command}\n");
    for (key, value) in config.entries() {
        out.push_str(&format!("# {key} = {value}\n"));
    }
    out
}

pub fn header_json(command: &str, config: &RunConfig) -> Value {
    let cfg: Map<String, Value> =
        config.entries().into_iter().map(|(k, v)| (k.to_string(), Value::String(v))).collect();
    json!({ "version": VERSION, "command": command, "config": cfg })
}

/// CSV document: comment header, optional extra comments, column row, data.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self { text: header_lines(command, config) }
    }

    pub fn comment(&mut self, line: &str) {
        self.text.push_str(&format!("# {line}\n"));
    }

    pub fn columns<S: AsRef<str>>(&mut self, names: &[S]) {
        let names: Vec<&str> = names.iter().map(AsRef::as_ref).collect();
        self.text.push_str(&names.join(","));
        self.text.push('\n');
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

pub fn json_document(command: &str, config: &RunConfig, mut body: Map<String, Value>) -> String {
    body.insert("header".into(), header_json(command, config));
    let mut text = serde_json::to_string_pretty(&Value::Object(body)).expect("JSON values always serialize");
    text.push('\n');
    text
}

/// A named output artifact.
pub struct Artifact {
    pub name: String,
    pub content: String,
    /// Printed to stdout when no output directory is configured.
    pub primary: bool,
}

impl Artifact {
    pub fn primary(name: impl Into<String>, content: String) -> Self {
        Self { name: name.into(), content, primary: true }
    }

    pub fn secondary(name: impl Into<String>, content: String) -> Self {
        Self { name: name.into(), content, primary: false }
    }
}

pub fn emit(artifacts: &[Artifact], dir: Option<&Path>) -> io::Result<()> {
    match dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            for a in artifacts {
                fs::write(dir.join(&a.name), &a.content)?;
            }
        }
        None => {
            let mut out = io::stdout().lock();
            for a in artifacts.iter().filter(|a| a.primary) {
                out.write_all(a.content.as_bytes())?;
            }
        }
    }
    Ok(())
}
