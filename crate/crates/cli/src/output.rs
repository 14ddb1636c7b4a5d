//! CSV and JSON writers.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chtorus::conservation::DiagnosticsRecord;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Creates `dir` and opens every named file for writing, so that an
/// unwritable destination fails before any computation.
pub fn prepare_outputs(dir: &Path, names: &[&str]) -> CliResult<Vec<(PathBuf, File)>> {
    fs::create_dir_all(dir).map_err(|e| {
        CliError::Config(format!(
            "cannot create output directory {}: {e}",
            dir.display()
        ))
    })?;
    names
        .iter()
        .map(|n| {
            let p = dir.join(n);
            File::create(&p)
                .map(|f| (p.clone(), f))
                .map_err(|e| CliError::Config(format!("cannot write {}: {e}", p.display())))
        })
        .collect()
}

/// `t,hs_energy,mu_u_1..mu_u_n,metric_norm,consv1_dev,rho_mass_dev`.
pub fn diagnostics_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string(), "hs_energy".to_string()];
    h.extend((1..=n).map(|i| format!("mu_u_{i}")));
    h.extend(["metric_norm", "consv1_dev", "rho_mass_dev"].map(String::from));
    h
}

pub fn diagnostics_values(r: &DiagnosticsRecord) -> Vec<f64> {
    let mut v = vec![r.t, r.hs_energy];
    v.extend(&r.mu_u);
    v.extend([r.metric_norm, r.consv1_dev, r.rho_mass_dev]);
    v
}

/// Streaming CSV writer.
pub struct CsvWriter<W: Write> {
    out: BufWriter<W>,
    columns: usize,
    rows: usize,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(out: W, header: &[String]) -> CliResult<Self> {
        let mut out = BufWriter::new(out);
        writeln!(out, "{}", header.join(","))?;
        Ok(Self {
            out,
            columns: header.len(),
            rows: 0,
        })
    }

    pub fn row(&mut self, values: &[f64]) -> CliResult<()> {
        debug_assert_eq!(values.len(), self.columns);
        let line: Vec<String> = values.iter().map(|&x| fmt_num(x)).collect();
        writeln!(self.out, "{}", line.join(","))?;
        self.rows += 1;
        Ok(())
    }

    /// Row of text cells written as given.
    pub fn text_row(&mut self, cells: &[String]) -> CliResult<()> {
        writeln!(self.out, "{}", cells.join(","))?;
        self.rows += 1;
        Ok(())
    }

    /// Comment line marking a run cut short at `t`.
    pub fn truncation_marker(&mut self, t: f64, reason: &str) -> CliResult<()> {
        writeln!(self.out, "# truncated at t={}: {reason}", fmt_num(t))?;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Writes every record to a diagnostics CSV.
pub fn write_outputs<W: Write>(out: W, n: usize, records: &[DiagnosticsRecord]) -> CliResult<()> {
    let mut w = CsvWriter::new(out, &diagnostics_header(n))?;
    for r in records {
        w.row(&diagnostics_values(r))?;
    }
    w.finish()
}

pub fn write_json<T: Serialize>(file: File, value: &T) -> CliResult<()> {
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value).map_err(std::io::Error::from)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(t: f64) -> DiagnosticsRecord {
        DiagnosticsRecord {
            t,
            hs_energy: 0.1,
            mu_u: vec![1.0 / 3.0, 0.0],
            metric_norm: 2.0,
            consv1_dev: 0.0,
            rho_mass_dev: 0.0,
        }
    }

    #[test]
    fn header_only_for_no_records() {
        let mut buf = Vec::new();
        write_outputs(&mut buf, 2, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,hs_energy,mu_u_1,mu_u_2,metric_norm,consv1_dev,rho_mass_dev\n"
        );
    }

    #[test]
    fn one_record_gives_two_lines() {
        let mut buf = Vec::new();
        write_outputs(&mut buf, 2, &[record(0.5)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let cells: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(cells.len(), 7);
        assert_eq!(cells[2], "3.3333333333333331e-1");
        for c in cells {
            let v: f64 = c.parse().unwrap();
            assert_eq!(fmt_num(v), c);
        }
    }

    #[test]
    fn unwritable_destination_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let e = prepare_outputs(&blocker.join("sub"), &["a.csv"]).unwrap_err();
        assert!(matches!(e, CliError::Config(_)));
    }
}
