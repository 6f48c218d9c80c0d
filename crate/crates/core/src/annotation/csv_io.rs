use std::io::{Read, Write};
use std::path::Path;

use super::{AnnotationError, ViewLevelAnnotation, ATTRIBUTES, RAW_SCALE};

pub const CSV_HEADER: [&str; 11] = [
    "scene_id",
    "view_id",
    "total",
    "composition",
    "visual_elements",
    "technical",
    "originality",
    "theme",
    "emotion",
    "gestalt",
    "comprehensive",
];

/// A rejected data row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    /// 1-based line in the file.
    pub line: u64,
    pub message: String,
}

impl std::fmt::Display for RowError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Parses an annotation CSV, rejecting malformed rows individually.
///
/// A header that does not match the expected columns is fatal.
pub fn parse_annotation_csv<R: Read>(reader: R) -> Result<(Vec<ViewLevelAnnotation>, Vec<RowError>), AnnotationError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| AnnotationError::Csv(e.to_string()))?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let has_text = match names.len() {
        11 => false,
        12 if names[11] == "text" => true,
        _ => return Err(AnnotationError::Header(format!("got columns {names:?}"))),
    };
    if names[..11] != CSV_HEADER {
        return Err(AnnotationError::Header(format!("got columns {names:?}")));
    }
    let width = names.len();

    let mut rows = Vec::new();
    let mut rejected = Vec::new();
    for record in rdr.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                rejected.push(RowError { line, message: e.to_string() });
                continue;
            }
        };
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != width {
            rejected.push(RowError { line, message: format!("expected {width} fields, found {}", record.len()) });
            continue;
        }
        match parse_row(&record, has_text) {
            Ok(row) => rows.push(row),
            Err(message) => rejected.push(RowError { line, message }),
        }
    }
    Ok((rows, rejected))
}

fn parse_row(record: &csv::StringRecord, has_text: bool) -> Result<ViewLevelAnnotation, String> {
    let scene_id = record[0].trim();
    let view_id = record[1].trim();
    if scene_id.is_empty() || view_id.is_empty() {
        return Err("empty scene_id or view_id".into());
    }
    let score = |col: usize| -> Result<f64, String> {
        let raw = record[col].trim();
        if raw.is_empty() {
            return Err(format!("missing value for {}", CSV_HEADER[col]));
        }
        let v: f64 = raw.parse().map_err(|_| format!("{} is not a number: {raw:?}", CSV_HEADER[col]))?;
        if !(0.0..=RAW_SCALE).contains(&v) {
            return Err(format!("{} = {v} outside [0, {RAW_SCALE}]", CSV_HEADER[col]));
        }
        Ok(v)
    };
    let total = score(2)?;
    let mut attributes = [0.0; 8];
    for (k, a) in attributes.iter_mut().enumerate() {
        *a = score(3 + k)?;
    }
    let text = if has_text { Some(record[11].to_string()).filter(|t| !t.is_empty()) } else { None };
    Ok(ViewLevelAnnotation { scene_id: scene_id.into(), view_id: view_id.into(), total, attributes, text })
}

pub fn read_annotation_csv(path: &Path) -> Result<(Vec<ViewLevelAnnotation>, Vec<RowError>), AnnotationError> {
    let file = std::fs::File::open(path).map_err(|e| AnnotationError::Csv(format!("{}: {e}", path.display())))?;
    parse_annotation_csv(std::io::BufReader::new(file))
}

pub fn write_annotation_csv<W: Write>(writer: W, rows: &[ViewLevelAnnotation]) -> Result<(), AnnotationError> {
    let with_text = rows.iter().any(|r| r.text.is_some());
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| AnnotationError::Csv(e.to_string());
    let mut header: Vec<&str> = CSV_HEADER.to_vec();
    if with_text {
        header.push("text");
    }
    w.write_record(&header).map_err(err)?;
    for r in rows {
        let mut rec = vec![r.scene_id.clone(), r.view_id.clone(), r.total.to_string()];
        rec.extend(r.attributes.iter().map(f64::to_string));
        if with_text {
            rec.push(r.text.clone().unwrap_or_default());
        }
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| AnnotationError::Csv(e.to_string()))?;
    debug_assert_eq!(ATTRIBUTES.len() + 3, CSV_HEADER.len());
    Ok(())
}
