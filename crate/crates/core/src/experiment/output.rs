use std::io::Write;

use serde::Serialize;

use crate::error::{EsrError, Result};

use super::config::OutputFormat;
use super::scenario::ResultRow;

pub fn write_rows<W: Write>(rows: &[ResultRow], format: OutputFormat, out: W) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            let io = |e: csv::Error| EsrError::Io(e.to_string());
            w.write_record(ResultRow::CSV_HEADER).map_err(io)?;
            for row in rows {
                w.write_record(row.csv_fields()).map_err(io)?;
            }
            w.flush()?;
            Ok(())
        }
        OutputFormat::Json => write_json(rows, out),
    }
}

pub fn write_json<T: Serialize + ?Sized, W: Write>(value: &T, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| EsrError::Io(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

/// Writes a table with an arbitrary header as CSV.
pub fn write_table<W: Write>(header: &[&str], rows: &[Vec<f64>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| EsrError::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row.iter().map(f64::to_string)).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_fixed_header_and_blank_mc_columns() {
        let row = ResultRow {
            sweep_value: 0.5,
            p_conditional: 0.25,
            p_overall: 0.125,
            p_quantum: 0.3,
            p_detect: 0.5,
            mc_frequency: None,
            mc_halfwidth: None,
        };
        let mut buf = Vec::new();
        write_rows(&[row], OutputFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "sweep_value,p_conditional,p_overall,p_quantum,p_detect,mc_frequency,mc_halfwidth"
        );
        assert_eq!(lines.next().unwrap(), "0.5,0.25,0.125,0.3,0.5,,");
    }

    #[test]
    fn json_uses_field_names() {
        let row = ResultRow {
            sweep_value: 0.0,
            p_conditional: 1.0,
            p_overall: 1.0,
            p_quantum: 1.0,
            p_detect: 1.0,
            mc_frequency: Some(0.99),
            mc_halfwidth: Some(0.01),
        };
        let mut buf = Vec::new();
        write_rows(std::slice::from_ref(&row), OutputFormat::Json, &mut buf).unwrap();
        let parsed: Vec<ResultRow> = serde_json::from_slice(&buf).unwrap();
        assert_eq!(parsed, vec![row]);
        let text = String::from_utf8(buf).unwrap();
        for field in ResultRow::CSV_HEADER {
            assert!(text.contains(&format!("\"{field}\"")));
        }
    }
}
