//! Trace CSV files.
//!
//! Every row starts with the schema version so that a reader can reject a
//! file written by an incompatible build. Floats are written in their
//! shortest round-trip form and absent values as empty fields.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::algorithms::{RunRecord, Trace};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub const TRACE_HEADER: [&str; 9] = [
    "schema_version",
    "iteration",
    "epoch",
    "objective_gap",
    "bregman_dist_to_xstar",
    "sigma_sq",
    "stepsize",
    "inner_iterations",
    "wallclock_seconds",
];

/// Shortest decimal string that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidConfig(format!("malformed trace csv: {other:?}")),
    }
}

pub fn write_records<W: Write>(out: W, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record([
            SCHEMA_VERSION.to_string(),
            r.iteration.to_string(),
            format_float(r.epoch),
            opt(r.objective_gap),
            opt(r.bregman_dist_to_xstar),
            opt(r.sigma_sq),
            format_float(r.stepsize),
            r.inner_iterations.to_string(),
            opt(r.wallclock_seconds),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_file(path: &Path, trace: &Trace) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = BufWriter::new(File::create(path)?);
    write_records(&mut out, &trace.records)?;
    out.flush()?;
    Ok(())
}

fn parse_opt(field: &str, name: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| Error::InvalidConfig(format!("column {name}: not a number: '{field}'")))
}

fn parse_req<T: std::str::FromStr>(field: &str, name: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("column {name}: cannot parse '{field}'")))
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<RunRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(Error::InvalidConfig(format!(
            "unexpected trace header: {}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row.map_err(csv_err)?;
        let version: u32 = parse_req(&row[0], "schema_version")?;
        if version != SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "trace schema version {version}, this build reads {SCHEMA_VERSION}"
            )));
        }
        out.push(RunRecord {
            iteration: parse_req(&row[1], "iteration")?,
            epoch: parse_req(&row[2], "epoch")?,
            objective_gap: parse_opt(&row[3], "objective_gap")?,
            bregman_dist_to_xstar: parse_opt(&row[4], "bregman_dist_to_xstar")?,
            sigma_sq: parse_opt(&row[5], "sigma_sq")?,
            stepsize: parse_req(&row[6], "stepsize")?,
            inner_iterations: parse_req(&row[7], "inner_iterations")?,
            wallclock_seconds: parse_opt(&row[8], "wallclock_seconds")?,
        });
    }
    Ok(out)
}

pub fn read_trace_file(path: &Path) -> Result<Vec<RunRecord>> {
    read_records(File::open(path)?)
}
