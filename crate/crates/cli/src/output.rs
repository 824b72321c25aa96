//! File writers. Floats are written with 17 significant digits and every
//! file carries the resolved configuration.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

use crate::CliError;

/// Formats an `f64` with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Wraps a JSON formatter so finite floats keep 17 significant digits.
struct Sci<F>(F);

impl<F: Formatter> Formatter for Sci<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt_f64(v).as_bytes())
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(v))
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn end_object_key<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_key(w)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

fn to_json<T: Serialize, F: Formatter>(value: &T, fmt: F) -> Vec<u8> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sci(fmt));
    value
        .serialize(&mut ser)
        .expect("output types serialize to JSON");
    buf
}

/// Single-line JSON, used for CSV headers.
pub fn compact_json<T: Serialize>(value: &T) -> String {
    String::from_utf8(to_json(value, CompactFormatter)).expect("JSON is UTF-8")
}

/// Output directory checked at startup.
#[derive(Debug, Clone)]
pub struct OutDir(PathBuf);

impl OutDir {
    pub fn open(path: &Path) -> Result<Self, CliError> {
        if !path.is_dir() {
            return Err(CliError::Config(format!(
                "output directory {} does not exist",
                path.display()
            )));
        }
        Ok(OutDir(path.to_path_buf()))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let mut bytes = to_json(value, PrettyFormatter::new());
        bytes.push(b'\n');
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    /// Writes `# config: <json>` followed by a CSV with `header` and the
    /// numeric rows.
    pub fn write_csv<C, R>(&self, name: &str, config: &C, header: &[&str], rows: R) -> Result<PathBuf, CliError>
    where
        C: Serialize,
        R: IntoIterator<Item = Vec<String>>,
    {
        let path = self.path(name);
        let wrap = |e: io::Error| CliError::io(&path, e);
        let file = File::create(&path).map_err(wrap)?;
        let mut out = BufWriter::new(file);
        writeln!(out, "# config: {}", compact_json(config)).map_err(wrap)?;
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| CliError::io(&path, e.into());
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(wrap)?;
        Ok(path)
    }
}

/// A row of floats in 17-digit form.
pub fn float_row(values: &[f64]) -> Vec<String> {
    values.iter().map(|&v| fmt_f64(v)).collect()
}
