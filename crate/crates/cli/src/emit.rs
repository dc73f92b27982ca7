//! Output files: CSV with a `#` metadata header, JSON with a `metadata`
//! block. Every float is written with 17 significant digits.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter, Serializer};
use serde_json::{json, Value};
use tailhedge::{Error, Result};

/// Pretty JSON with `{:.16e}` floats.
struct Sig17<'a>(PrettyFormatter<'a>);

impl Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, Sig17(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("in-memory serialization");
    let mut s = String::from_utf8(buf).expect("serde_json writes utf-8");
    s.push('\n');
    s
}

/// Where a command writes, plus the metadata it stamps on every file.
pub struct Sink {
    dir: PathBuf,
    command: &'static str,
    config: BTreeMap<String, String>,
}

impl Sink {
    pub fn new(dir: &Path, command: &'static str, config: BTreeMap<String, String>) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        Ok(Sink { dir: dir.to_path_buf(), command, config })
    }

    pub fn metadata(&self) -> Value {
        json!({
            "tool": "tailhedge",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "config": self.config,
        })
    }

    fn write(&self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }

    /// Prepends `# key=value` lines to `csv`.
    pub fn csv(&self, name: &str, csv: &str) -> Result<PathBuf> {
        let mut text = format!("# tailhedge {} {}\n", self.command, env!("CARGO_PKG_VERSION"));
        for (k, v) in &self.config {
            text.push_str(&format!("# {k}={v}\n"));
        }
        text.push_str(csv);
        self.write(name, &text)
    }

    /// Writes `{"metadata": ..., <key>: <value>, ...}` and returns the text.
    pub fn json(&self, name: &str, body: Value) -> Result<String> {
        let mut obj = serde_json::Map::new();
        obj.insert("metadata".into(), self.metadata());
        if let Value::Object(fields) = body {
            obj.extend(fields);
        }
        let text = to_json(&Value::Object(obj));
        self.write(name, &text)?;
        Ok(text)
    }
}

/// Machine-readable error report.
pub fn error_json(err: &Error, exit_code: i32) -> String {
    let mut detail = serde_json::Map::new();
    detail.insert("kind".into(), kind(err).into());
    detail.insert("message".into(), err.to_string().into());
    detail.insert("exit_code".into(), exit_code.into());
    match err {
        Error::MissingKey(key) => {
            detail.insert("key".into(), key.clone().into());
        }
        Error::Parse { line, .. } => {
            detail.insert("line".into(), (*line).into());
        }
        Error::Instability { step, .. } => {
            detail.insert("step".into(), (*step).into());
        }
        _ => {}
    }
    to_json(&json!({ "error": detail }))
}

fn kind(err: &Error) -> &'static str {
    match err {
        Error::ParameterDomain { .. } => "parameter_domain",
        Error::FellerViolation { .. } => "feller_violation",
        Error::InsufficientData { .. } => "insufficient_data",
        Error::InvalidPath(_) => "invalid_path",
        Error::Coverage { .. } => "coverage",
        Error::Insolvency { .. } => "insolvency",
        Error::Degenerate(_) => "degenerate",
        Error::Grid(_) => "grid",
        Error::Config(_) => "config",
        Error::MissingKey(_) => "missing_key",
        Error::Parse { .. } => "parse",
        Error::Singular { .. } => "singular",
        Error::Residual { .. } => "residual",
        Error::Instability { .. } => "instability",
        Error::ImaginaryResidue { .. } => "imaginary_residue",
        Error::MassLoss { .. } => "mass_loss",
        Error::Alignment(_) => "alignment",
        Error::Io(_) => "io",
    }
}
