use std::fs::File;
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, CliResult};

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Pretty JSON with a trailing newline. Map keys come out in a fixed order
/// because every map we serialize is a `BTreeMap`.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::format(path, e))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub struct CsvOut {
    path: std::path::PathBuf,
    writer: csv::Writer<File>,
}

impl CsvOut {
    pub fn create<S: AsRef<str>>(path: &Path, header: &[S]) -> CliResult<Self> {
        let writer = csv::WriterBuilder::new()
            .flexible(false)
            .from_path(path)
            .map_err(|e| CliError::format(path, e))?;
        let mut out = Self {
            path: path.to_path_buf(),
            writer,
        };
        out.row(header)?;
        Ok(out)
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) -> CliResult<()> {
        self.writer
            .write_record(fields.iter().map(|f| f.as_ref()))
            .map_err(|e| CliError::format(&self.path, e))
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.writer.flush().map_err(|e| CliError::io(&self.path, e))
    }
}
