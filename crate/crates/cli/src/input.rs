use std::fs::File;
use std::path::Path;

use covrank::{DataMatrix, SimulationConfig};

use crate::CliError;

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn parse_field(field: &str) -> Option<f64> {
    let v: f64 = field.trim().parse().ok()?;
    v.is_finite().then_some(v)
}

/// Reads comma-separated numbers, one observation per line. A first line
/// containing any non-numeric field is treated as a header.
pub fn read_data(path: &Path) -> Result<DataMatrix, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(open(path)?);

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Option<Vec<f64>> = record.iter().map(parse_field).collect();
        match parsed {
            Some(row) => rows.push(row),
            None if idx == 0 => continue,
            None => {
                return Err(CliError::Parse(format!(
                    "{}:{line}: expected finite comma-separated numbers",
                    path.display()
                )))
            }
        }
    }
    if rows.is_empty() {
        return Err(CliError::Parse(format!("{}: no numeric rows", path.display())));
    }
    let p = rows[0].len();
    if let Some(i) = rows.iter().position(|r| r.len() != p) {
        return Err(CliError::Parse(format!(
            "{}: row {} has {} fields, expected {p}",
            path.display(),
            i + 1,
            rows[i].len()
        )));
    }
    Ok(DataMatrix::from_rows(&rows)?)
}

pub fn read_config(path: &Path) -> Result<SimulationConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| {
        let msg = e.to_string().replace('\n', " ");
        CliError::Parse(format!("{}: {}", path.display(), msg.trim()))
    })
}
