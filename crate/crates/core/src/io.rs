//! Headerless CSV distance matrices.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{MagError, Result};
use crate::metric::{validate_metric, FiniteMetricSpace, ValidationReport};

/// Parses an `n x n` matrix of decimal floats, one row per line.
pub fn parse_matrix<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .enumerate()
            .map(|(j, field)| {
                field.parse::<f64>().map_err(|_| {
                    MagError::InvalidParams(format!("row {i}, column {j}: cannot parse {field:?}"))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Loads and validates a matrix. A matrix failing the metric axioms is
/// refused unless `force` is set, in which case it is loaded as given (upper
/// triangle mirrored) together with the failing report.
pub fn read_matrix(path: &Path, force: bool) -> Result<(FiniteMetricSpace, ValidationReport)> {
    let file = std::fs::File::open(path)?;
    let rows = parse_matrix(file)?;
    let report = validate_metric(&rows)?;
    if !report.ok && !force {
        return Err(MagError::InvalidMetric(Box::new(report)));
    }
    let space = FiniteMetricSpace::from_rows_unvalidated(rows)?;
    Ok((space, report))
}

pub fn write_matrix<W: Write>(space: &FiniteMetricSpace, writer: W) -> Result<()> {
    let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for i in 0..space.len() {
        csv.write_record(space.row(i).iter().map(|d| format!("{d:?}")))?;
    }
    csv.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let x = FiniteMetricSpace::from_rows(vec![
            vec![0.0, 0.1, 0.3],
            vec![0.1, 0.0, 0.2],
            vec![0.3, 0.2, 0.0],
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_matrix(&x, &mut buf).unwrap();
        let rows = parse_matrix(buf.as_slice()).unwrap();
        assert_eq!(rows, x.rows());
    }

    #[test]
    fn ragged_and_garbage() {
        let rows = parse_matrix("0,1\n1\n".as_bytes()).unwrap();
        assert!(validate_metric(&rows).is_err());
        assert!(parse_matrix("0,x\nx,0\n".as_bytes()).is_err());
    }

    #[test]
    fn refuses_non_metric_without_force() {
        let dir = std::env::temp_dir().join(format!("maglab-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.csv");
        std::fs::write(&path, "0,1,5\n1,0,1\n5,1,0\n").unwrap();
        assert!(matches!(read_matrix(&path, false), Err(MagError::InvalidMetric(_))));
        let (space, report) = read_matrix(&path, true).unwrap();
        assert!(!report.ok);
        assert_eq!(space.dist(0, 2), 5.0);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
