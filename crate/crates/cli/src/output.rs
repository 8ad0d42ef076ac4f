//! CSV and JSON serialization: `#` metadata block, 17 significant digits and
//! `\n` line endings.

use std::io::Write;
use std::path::Path;

use crate::error::CliError;

/// Round-trip formatting of a double with 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// A CSV document assembled in memory.
pub struct CsvDoc {
    meta: Vec<(String, String)>,
    writer: csv::Writer<Vec<u8>>,
}

impl CsvDoc {
    /// Document with the given header; `command` opens the metadata block.
    pub fn new(command: &str, header: &[&str]) -> Result<Self, CliError> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(header).map_err(io_error)?;
        let meta = vec![
            ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("command".to_string(), command.to_string()),
        ];
        Ok(Self { meta, writer })
    }

    /// Append a `# key = value` metadata line.
    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    /// Append one data row.
    pub fn row(&mut self, fields: &[String]) -> Result<(), CliError> {
        self.writer.write_record(fields).map_err(io_error)
    }

    /// The full document.
    pub fn finish(self) -> Result<Vec<u8>, CliError> {
        let mut out = Vec::new();
        for (k, v) in &self.meta {
            out.extend_from_slice(format!("# {k} = {v}\n").as_bytes());
        }
        out.extend(self.writer.into_inner().map_err(|e| io_error(e.into_error()))?);
        Ok(out)
    }
}

fn io_error(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(format!("output: {e}"))
}

/// Write `bytes` to `path`, or to standard output without a path.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes).and_then(|_| out.flush()).map_err(io_error)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, std::f64::consts::PI, -1.0 / 3.0, 1e-300, 6.02e23] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(0.1), "1.0000000000000001e-1");
    }

    #[test]
    fn metadata_precedes_rows() {
        let mut doc = CsvDoc::new("rate", &["a", "b"]).unwrap();
        doc.meta("horizon", 2);
        doc.row(&["1".into(), "2".into()]).unwrap();
        let text = String::from_utf8(doc.finish().unwrap()).unwrap();
        assert_eq!(
            text,
            format!(
                "# version = {}\n# command = rate\n# horizon = 2\na,b\n1,2\n",
                env!("CARGO_PKG_VERSION")
            )
        );
    }
}
