//! CSV reports.
//!
//! A report starts with `#` comment lines echoing the resolved configuration,
//! then a header with the columns of [`COLUMNS`] in that order. Floats are
//! written as `{:.16e}` (17 significant digits, exact round trip); flags as
//! `1`, `0` or empty when not evaluated; NaN marks a skipped quantity.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use hklab_core::{BootstrapStatus, Regime};

use crate::experiment::{Flags, ReportRow};
use crate::HarnessError;

pub const COLUMNS: [&str; 23] = [
    "t",
    "node",
    "x",
    "y",
    "d",
    "k",
    "g_spectral",
    "g_solve",
    "g_variational",
    "g_certified",
    "upper",
    "regime",
    "delta",
    "delta_star",
    "bootstrap_status",
    "bootstrap_lower",
    "lower_template",
    "pass_certified",
    "pass_routes",
    "pass_bootstrap",
    "pass_upper",
    "pass_lower",
    "status",
];

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn flag(f: Option<bool>) -> &'static str {
    match f {
        Some(true) => "1",
        Some(false) => "0",
        None => "",
    }
}

fn record(r: &ReportRow) -> Vec<String> {
    vec![
        num(r.t),
        r.node.to_string(),
        num(r.x),
        num(r.y),
        num(r.d),
        num(r.k),
        num(r.g_spectral),
        num(r.g_solve),
        num(r.g_variational),
        num(r.g_certified),
        num(r.upper),
        r.regime.map_or("", Regime::as_str).into(),
        num(r.delta),
        num(r.delta_star),
        r.bootstrap_status.map_or("", BootstrapStatus::as_str).into(),
        num(r.bootstrap_lower),
        num(r.lower_template),
        flag(r.flags.certified).into(),
        flag(r.flags.routes).into(),
        flag(r.flags.bootstrap).into(),
        flag(r.flags.upper).into(),
        flag(r.flags.lower).into(),
        r.status.clone(),
    ]
}

/// Writes `rows` after a comment block holding `echo` line by line.
pub fn emit_csv(rows: &[ReportRow], echo: &str, path: &Path) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "# hklab report, {} rows", rows.len()).map_err(io)?;
    for line in echo.lines() {
        writeln!(out, "# {line}").map_err(io)?;
    }
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    };
    w.write_record(COLUMNS).map_err(csv_err)?;
    for r in rows {
        w.write_record(record(r)).map_err(csv_err)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

/// Reads a report written by [`emit_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<ReportRow>, HarnessError> {
    let csv_err = |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(csv_err)?;
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().ne(COLUMNS) {
        return Err(HarnessError::Parse(format!("{}: unexpected header", path.display())));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        rows.push(parse_record(&rec).map_err(|e| HarnessError::Parse(format!("{}: row {}: {e}", path.display(), i + 1)))?);
    }
    Ok(rows)
}

fn parse_record(rec: &csv::StringRecord) -> Result<ReportRow, String> {
    if rec.len() != COLUMNS.len() {
        return Err(format!("{} fields, expected {}", rec.len(), COLUMNS.len()));
    }
    let f = |i: usize| rec[i].parse::<f64>().map_err(|e| format!("{}: {e}", COLUMNS[i]));
    let flag = |i: usize| match &rec[i] {
        "1" => Ok(Some(true)),
        "0" => Ok(Some(false)),
        "" => Ok(None),
        other => Err(format!("{}: bad flag `{other}`", COLUMNS[i])),
    };
    let regime = match &rec[11] {
        "" => None,
        "short" => Some(Regime::Short),
        "mid" => Some(Regime::Mid),
        "long" => Some(Regime::Long),
        other => return Err(format!("bad regime `{other}`")),
    };
    let bootstrap_status = match &rec[14] {
        "" => None,
        "bound" => Some(BootstrapStatus::Bound),
        "underflow" => Some(BootstrapStatus::Underflow),
        "vacuous" => Some(BootstrapStatus::Vacuous),
        other => return Err(format!("bad bootstrap status `{other}`")),
    };
    Ok(ReportRow {
        t: f(0)?,
        node: rec[1].parse().map_err(|e| format!("node: {e}"))?,
        x: f(2)?,
        y: f(3)?,
        d: f(4)?,
        k: f(5)?,
        g_spectral: f(6)?,
        g_solve: f(7)?,
        g_variational: f(8)?,
        g_certified: f(9)?,
        upper: f(10)?,
        regime,
        delta: f(12)?,
        delta_star: f(13)?,
        bootstrap_status,
        bootstrap_lower: f(15)?,
        lower_template: f(16)?,
        flags: Flags {
            certified: flag(17)?,
            routes: flag(18)?,
            bootstrap: flag(19)?,
            upper: flag(20)?,
            lower: flag(21)?,
        },
        status: rec[22].to_string(),
    })
}
