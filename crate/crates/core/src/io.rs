//! Model files and CSV tables.
//!
//! A model file is TOML with a header and one `[[hysteron]]` table per row:
//!
//! ```toml
//! kind = "KNonlinear"
//! k = 1
//! offset = 0.0
//!
//! [[hysteron]]
//! mu = 2.5
//! bounds = { type = "linear", alpha = 3.0, beta = 9.0 }
//! truncation = { kind = "ramp", h = 1.0 }
//! ```
//!
//! Numbers in machine CSVs carry 17 significant digits so that they read back
//! exactly.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::model::{Hysteron, Model, ModelError, ModelKind};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("model file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("model file: {0}")]
    Write(#[from] toml::ser::Error),
    #[error("header says k = {header} but the file has {rows} hysterons")]
    Count { header: usize, rows: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv line {line}: {msg}")]
    Table { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    kind: ModelKind,
    k: usize,
    #[serde(default)]
    offset: f64,
    #[serde(default)]
    hysteron: Vec<Hysteron>,
}

pub fn model_to_toml(m: &Model) -> Result<String, IoError> {
    let file = ModelFile { kind: m.kind, k: m.len(), offset: m.offset, hysteron: m.hysterons.clone() };
    Ok(toml::to_string(&file)?)
}

pub fn model_from_toml(text: &str) -> Result<Model, IoError> {
    let f: ModelFile = toml::from_str(text)?;
    if f.k != f.hysteron.len() {
        return Err(IoError::Count { header: f.k, rows: f.hysteron.len() });
    }
    Ok(Model::new(f.kind, f.hysteron, f.offset)?)
}

/// `x` with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a header and numeric rows.
pub fn write_table<W: Write>(out: W, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|&x| fmt17(x)))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads numeric rows, skipping a header line if the first row does not
/// parse. Every row must have `columns` fields.
pub fn read_table<R: Read>(input: R, columns: usize) -> Result<Vec<Vec<f64>>, IoError> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).comment(Some(b'#')).from_reader(input);
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) if v.len() == columns => rows.push(v),
            Ok(v) => return Err(IoError::Table { line, msg: format!("expected {columns} fields, got {}", v.len()) }),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(IoError::Table { line, msg: e.to_string() }),
        }
    }
    Ok(rows)
}

/// Reads `(x, y)` pairs.
pub fn read_points<R: Read>(input: R) -> Result<Vec<(f64, f64)>, IoError> {
    Ok(read_table(input, 2)?.into_iter().map(|r| (r[0], r[1])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{convex_family, gamma_model, intro_model, methane, Family};

    #[test]
    fn round_trip_is_a_fixed_point() {
        let mut models = vec![intro_model(), gamma_model(&methane())];
        for f in Family::ALL {
            models.push(convex_family(f, 12, 0.1).unwrap());
        }
        for m in models {
            let text = model_to_toml(&m).unwrap();
            let back = model_from_toml(&text).unwrap();
            assert_eq!(back, m);
            assert_eq!(model_to_toml(&back).unwrap(), text);
        }
    }

    #[test]
    fn rejects_unknown_keys_and_bad_counts() {
        let ok = "kind = \"KLinear\"\nk = 1\n[[hysteron]]\nmu = 1.0\nbounds = { type = \"linear\", alpha = 0.0, beta = 1.0 }\ntruncation = { kind = \"identity\" }\n";
        assert!(model_from_toml(ok).is_ok());
        let extra = format!("colour = 3\n{ok}");
        let err = model_from_toml(&extra).unwrap_err().to_string();
        assert!(err.contains("colour"), "{err}");
        let count = ok.replace("k = 1", "k = 2");
        assert!(matches!(model_from_toml(&count), Err(IoError::Count { header: 2, rows: 1 })));
    }

    #[test]
    fn tables_round_trip_exactly() {
        let rows = vec![vec![0.1, 1.0 / 3.0], vec![-2.5e-300, std::f64::consts::PI]];
        let mut buf = Vec::new();
        write_table(&mut buf, &["u", "w"], rows.clone()).unwrap();
        let back = read_table(buf.as_slice(), 2).unwrap();
        assert_eq!(back, rows);
        assert!(read_points("1,2\n3\n".as_bytes()).is_err());
        assert_eq!(read_points("# isotherm\nu,w\n0,0\n1,2\n".as_bytes()).unwrap(), vec![(0.0, 0.0), (1.0, 2.0)]);
    }
}
