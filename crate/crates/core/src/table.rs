//! Logit tables: per-image classifier outputs plus a sidecar class map.
//!
//! Logit file header: `image_id,specimen_id,true_class,logit_0,...,logit_{C-1}`.
//! Class map header: `index,taxon_id`, one row per logit column.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scoring::LogitVector;

const ID_COLUMNS: [&str; 3] = ["image_id", "specimen_id", "true_class"];

#[derive(Debug, Clone, PartialEq)]
pub struct LogitRow {
    pub image_id: String,
    pub specimen_id: String,
    pub true_class: String,
    pub logits: LogitVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogitTable {
    class_names: Vec<String>,
    rows: Vec<LogitRow>,
}

impl LogitTable {
    pub fn new(class_names: Vec<String>, rows: Vec<LogitRow>) -> Result<Self> {
        if class_names.len() < 2 {
            return Err(Error::TooFewClasses {
                found: class_names.len(),
            });
        }
        let mut names = HashSet::new();
        for c in &class_names {
            if !names.insert(c.as_str()) {
                return Err(Error::DuplicateTaxon { taxon: c.clone() });
            }
        }
        let mut ids = HashSet::with_capacity(rows.len());
        for row in &rows {
            if row.logits.len() != class_names.len() {
                return Err(Error::InvalidConfig(format!(
                    "image '{}' has {} logits for {} classes",
                    row.image_id,
                    row.logits.len(),
                    class_names.len()
                )));
            }
            if !ids.insert(row.image_id.as_str()) {
                return Err(Error::DuplicateImageId {
                    file: "<table>".to_string(),
                    image_id: row.image_id.clone(),
                });
            }
        }
        Ok(Self { class_names, rows })
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn rows(&self) -> &[LogitRow] {
        &self.rows
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_map_csv(&self) -> String {
        let mut out = String::from("index,taxon_id\n");
        for (i, c) in self.class_names.iter().enumerate() {
            let _ = writeln!(out, "{i},{c}");
        }
        out
    }

    pub fn logits_csv(&self) -> String {
        let mut out = ID_COLUMNS.join(",");
        for i in 0..self.num_classes() {
            let _ = write!(out, ",logit_{i}");
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.image_id);
            out.push(',');
            out.push_str(&row.specimen_id);
            out.push(',');
            out.push_str(&row.true_class);
            for v in row.logits.values() {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

/// Parses a class map; indices must cover `0..C` exactly once.
pub fn parse_class_map<R: Read>(input: R, file: &str) -> Result<Vec<String>> {
    let mut rdr = csv_reader(input);
    let csv_err = |source| Error::Csv {
        file: file.to_string(),
        source,
    };
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != ["index", "taxon_id"] {
        return Err(Error::MalformedHeader {
            file: file.to_string(),
            message: format!(
                "expected header 'index,taxon_id', found '{}'",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut entries: Vec<(usize, String, u64)> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let line = line_of(&record);
        if record.len() != 2 {
            return Err(Error::RowArity {
                file: file.to_string(),
                line,
                expected: 2,
                found: record.len(),
            });
        }
        let index: usize = record[0].parse().map_err(|_| Error::BadRecord {
            file: file.to_string(),
            line,
            message: format!("index {:?} is not a non-negative integer", &record[0]),
        })?;
        if record[1].is_empty() {
            return Err(Error::BadRecord {
                file: file.to_string(),
                line,
                message: "empty taxon_id".to_string(),
            });
        }
        entries.push((index, record[1].to_string(), line));
    }

    let n = entries.len();
    let mut slots: Vec<Option<String>> = vec![None; n];
    for (index, taxon, line) in entries {
        if index >= n {
            // some index below n is then necessarily missing
            let missing = (0..n).find(|i| slots[*i].is_none()).unwrap_or(n);
            return Err(Error::ClassMapGap {
                file: file.to_string(),
                index: missing,
            });
        }
        if slots[index].is_some() {
            return Err(Error::BadRecord {
                file: file.to_string(),
                line,
                message: format!("index {index} listed twice"),
            });
        }
        slots[index] = Some(taxon);
    }
    let names: Vec<String> = slots.into_iter().map(|s| s.expect("all slots filled")).collect();
    let mut seen = HashSet::new();
    if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
        return Err(Error::DuplicateTaxon { taxon: dup.clone() });
    }
    if names.len() < 2 {
        return Err(Error::TooFewClasses { found: names.len() });
    }
    Ok(names)
}

/// Parses a logit CSV against an already-loaded class map.
pub fn parse_logit_table<R: Read>(input: R, file: &str, class_names: Vec<String>) -> Result<LogitTable> {
    let c = class_names.len();
    if c < 2 {
        return Err(Error::TooFewClasses { found: c });
    }
    let mut rdr = csv_reader(input);
    let csv_err = |source| Error::Csv {
        file: file.to_string(),
        source,
    };
    let header = rdr.headers().map_err(csv_err)?.clone();
    let expected: Vec<String> = ID_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain((0..c).map(|i| format!("logit_{i}")))
        .collect();
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::MalformedHeader {
            file: file.to_string(),
            message: format!(
                "expected header '{}', found '{}'",
                expected.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut rows = Vec::new();
    let mut ids = HashSet::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let line = line_of(&record);
        if record.len() != c + 3 {
            return Err(Error::RowArity {
                file: file.to_string(),
                line,
                expected: c + 3,
                found: record.len(),
            });
        }
        let image_id = record[0].to_string();
        if image_id.is_empty() {
            return Err(Error::BadRecord {
                file: file.to_string(),
                line,
                message: "empty image_id".to_string(),
            });
        }
        if !ids.insert(image_id.clone()) {
            return Err(Error::DuplicateImageId {
                file: file.to_string(),
                image_id,
            });
        }
        let mut logits = Vec::with_capacity(c);
        for (k, field) in record.iter().skip(3).enumerate() {
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => logits.push(v),
                _ => {
                    return Err(Error::NonNumericLogit {
                        file: file.to_string(),
                        line,
                        column: format!("logit_{k}"),
                        value: field.to_string(),
                    })
                }
            }
        }
        rows.push(LogitRow {
            image_id,
            specimen_id: record[1].to_string(),
            true_class: record[2].to_string(),
            logits: LogitVector::new(logits)?,
        });
    }
    LogitTable::new(class_names, rows)
}

pub fn load_logit_table(path: impl AsRef<Path>, class_map_path: impl AsRef<Path>) -> Result<LogitTable> {
    let (path, map_path) = (path.as_ref(), class_map_path.as_ref());
    let map_file = std::fs::File::open(map_path).map_err(|e| Error::io(map_path, e))?;
    let classes = parse_class_map(map_file, &map_path.display().to_string())?;
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_logit_table(file, &path.display().to_string(), classes)
}
