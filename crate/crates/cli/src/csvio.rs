//! Scan CSV files.
//!
//! Written scans have the fixed header
//! `tau_s,expected_prob,expected_counts,sampled_counts`. Floats carry 17
//! significant digits so a read back is lossless.
//!
//! Fit input needs `tau_s` and `counts` (or `sampled_counts`); an optional
//! `sigma` column overrides the Poisson error bars. Other columns are ignored.

use std::io::{Read, Write};

use fockwise::{DipPoint, ScanPoint};

use crate::error::CliError;

pub const SCAN_HEADER: [&str; 4] = ["tau_s", "expected_prob", "expected_counts", "sampled_counts"];

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_scan<W: Write>(out: W, points: &[ScanPoint]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(SCAN_HEADER).map_err(io)?;
    for p in points {
        w.write_record([
            fmt_f64(p.delay_s),
            fmt_f64(p.expected_probability),
            fmt_f64(p.expected_counts),
            p.sampled_counts.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

/// Writes a table with a header row; cells are preformatted.
pub fn write_table<W: Write>(out: W, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub fn read_dip_points<R: Read>(input: R) -> Result<Vec<DipPoint>, CliError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = r.headers().map_err(|e| CliError::Data(e.to_string()))?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let tau = find("tau_s").ok_or_else(|| CliError::Data("missing column `tau_s`".into()))?;
    let counts = find("counts")
        .or_else(|| find("sampled_counts"))
        .ok_or_else(|| CliError::Data("missing column `counts` (or `sampled_counts`)".into()))?;
    let sigma = find("sigma");

    let mut points = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| CliError::Data(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |k: usize, name: &str| -> Result<f64, CliError> {
            let raw = record
                .get(k)
                .ok_or_else(|| CliError::Data(format!("line {line}: missing `{name}`")))?;
            let v: f64 = raw
                .parse()
                .map_err(|_| CliError::Data(format!("line {line}: `{name}` is not a number: {raw:?}")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::Data(format!("line {line}: `{name}` is not finite")))
            }
        };
        let t = field(tau, "tau_s")?;
        let n = field(counts, "counts")?;
        points.push(match sigma {
            Some(k) => DipPoint::new(t, n, field(k, "sigma")?),
            None => DipPoint::poisson(t, n),
        });
    }
    Ok(points)
}
