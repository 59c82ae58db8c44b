use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Class, DataError, Dataset, Origin, LABEL_COLUMN};

const ORIGIN_COLUMN: &str = "origin";

fn csv_err(e: csv::Error) -> DataError {
    DataError::Csv(e.to_string())
}

/// Parses a CSV with a header row, numeric feature columns, a `Final_score`
/// label column and an optional `origin` column.
pub fn read_csv<R: Read>(reader: R) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let label_col = header
        .iter()
        .position(|h| h == LABEL_COLUMN)
        .ok_or_else(|| DataError::MissingColumn(LABEL_COLUMN.to_string()))?;
    let origin_col = header.iter().position(|h| h == ORIGIN_COLUMN);
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&c| c != label_col && Some(c) != origin_col)
        .collect();

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut origins = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != header.len() {
            return Err(DataError::Parse {
                line,
                column: record.len().min(header.len()) + 1,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let mut row = Vec::with_capacity(feature_cols.len());
        for &c in &feature_cols {
            let cell = &record[c];
            let v: f64 = cell.parse().map_err(|_| DataError::Parse {
                line,
                column: c + 1,
                message: format!("`{cell}` in column `{}` is not a number", header[c]),
            })?;
            if !v.is_finite() {
                return Err(DataError::Parse {
                    line,
                    column: c + 1,
                    message: format!("non-finite value in column `{}`", header[c]),
                });
            }
            row.push(v);
        }
        let token = &record[label_col];
        let class: Class = token.parse().map_err(|_| DataError::UnknownLabel {
            line,
            token: token.to_string(),
        })?;
        if let Some(c) = origin_col {
            let o: Origin = record[c].parse().map_err(|_| DataError::Parse {
                line,
                column: c + 1,
                message: format!("unknown origin `{}`", &record[c]),
            })?;
            origins.push(o);
        }
        rows.push(row);
        labels.push(class);
    }
    let names = feature_cols.iter().map(|&c| header[c].clone()).collect();
    let data = Dataset::new(names, rows, labels)?;
    if origin_col.is_some() {
        data.with_origin(origins)
    } else {
        Ok(data)
    }
}

pub fn load_csv(path: impl AsRef<Path>) -> crate::Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| crate::Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(read_csv(file)?)
}

/// Writes raw (unscaled) values, the label as High/Low, and the `origin`
/// column when the dataset carries one.
pub fn write_csv<W: Write>(data: &Dataset, writer: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = data.feature_names().iter().map(String::as_str).collect();
    header.push(LABEL_COLUMN);
    if data.origin().is_some() {
        header.push(ORIGIN_COLUMN);
    }
    w.write_record(&header).map_err(csv_err)?;
    for (i, (row, label)) in data.raw_rows().iter().zip(data.labels()).enumerate() {
        let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        fields.push(label.to_string());
        if let Some(o) = data.origin() {
            fields.push(o[i].as_str().to_string());
        }
        w.write_record(&fields).map_err(csv_err)?;
    }
    w.flush().map_err(|e| DataError::Csv(e.to_string()))
}

pub fn save_csv(data: &Dataset, path: impl AsRef<Path>) -> crate::Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| crate::Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(write_csv(data, std::io::BufWriter::new(file))?)
}
