use std::path::Path;

use super::{read, write, IoError};
use crate::model::{Dataset, Provenance, VariableSpec};

/// Reads a comma-separated dataset whose first row names the columns.
pub fn load_dataset(path: impl AsRef<Path>, specs: &[VariableSpec], provenance: Provenance) -> Result<Dataset, IoError> {
    let path = path.as_ref();
    parse_dataset(&read(path)?, specs, provenance, &path.display().to_string())
}

pub fn parse_dataset(text: &str, specs: &[VariableSpec], provenance: Provenance, origin: &str) -> Result<Dataset, IoError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let parse_error = |e: csv::Error| {
        let line = e.position().map_or(0, |p| p.line() as usize);
        IoError::Parse { path: origin.to_string(), line, column: 0, message: e.to_string() }
    };
    let columns: Vec<String> = reader.headers().map_err(parse_error)?.iter().map(str::to_string).collect();
    let records = reader
        .records()
        .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(parse_error)?;
    Dataset::from_records(&columns, specs, records, provenance)
        .map_err(|source| IoError::Validation { path: origin.to_string(), source })
}

/// CSV text with a header row and `\n` line endings.
pub fn render_dataset(data: &Dataset) -> String {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    writer.write_record(data.columns()).expect("in-memory write");
    for record in data.records() {
        writer.write_record(&record).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("labels are UTF-8")
}

pub fn save_dataset(path: impl AsRef<Path>, data: &Dataset) -> Result<(), IoError> {
    write(path.as_ref(), &render_dataset(data))
}
