//! Comma-separated trace files.
//!
//! Columns: `t_s,node_id,x_m,y_m,v_mps,theta_rad,mode`. Floats carry nine
//! significant digits. `v_mps` and `theta_rad` are both empty or both set.
//! `mode` is empty, `free`, or `forced:<id>`. Rows are sorted by
//! `(t_s, node_id)`.

use std::io::{Read, Write};

use momo_core::group::NodeMode;
use momo_core::kinematics::{Metric, Position, SpeedVector};
use momo_core::metrics::{Trace, TraceRecord, TraceSink, TEXT_PRECISION};
use thiserror::Error;

pub const HEADER: [&str; 7] = ["t_s", "node_id", "x_m", "y_m", "v_mps", "theta_rad", "mode"];

#[derive(Debug, Error)]
pub enum TraceFileError {
    #[error("row {row}: {message}")]
    Row { row: u64, message: String },
    #[error("bad header, expected `{}`", HEADER.join(","))]
    Header,
    #[error("trace file has no records")]
    Empty,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Nine significant digits, scientific notation.
pub fn format_float(x: f64) -> String {
    format!("{x:.8e}")
}

fn format_mode(mode: &Option<NodeMode>) -> String {
    match mode {
        None => String::new(),
        Some(NodeMode::Free) => "free".into(),
        Some(NodeMode::Forced { target }) => format!("forced:{target}"),
    }
}

fn row_fields(r: &TraceRecord) -> [String; 7] {
    let (v, th) = match r.speed {
        Some(s) => (format_float(s.v), format_float(s.theta)),
        None => (String::new(), String::new()),
    };
    [
        format_float(r.t),
        r.node_id.to_string(),
        format_float(r.position.x),
        format_float(r.position.y),
        v,
        th,
        format_mode(&r.mode),
    ]
}

/// Streams records to a writer as the engine emits them.
pub struct TraceWriter<W: Write> {
    inner: csv::Writer<W>,
    rows: u64,
    error: Option<csv::Error>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(w: W) -> Result<Self, TraceFileError> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        inner.write_record(HEADER)?;
        Ok(Self {
            inner,
            rows: 0,
            error: None,
        })
    }

    pub fn rows(&self) -> u64 {
        self.rows
    }

    /// Flushes and returns the writer, or the first error seen.
    pub fn finish(mut self) -> Result<W, TraceFileError> {
        if let Some(e) = self.error.take() {
            return Err(e.into());
        }
        self.inner.flush()?;
        self.inner.into_inner().map_err(|e| TraceFileError::Io(e.into_error()))
    }
}

impl<W: Write> TraceSink for TraceWriter<W> {
    fn record(&mut self, rec: &TraceRecord) {
        if self.error.is_some() {
            return;
        }
        match self.inner.write_record(row_fields(rec)) {
            Ok(()) => self.rows += 1,
            Err(e) => self.error = Some(e),
        }
    }
}

pub fn write_trace<W: Write>(records: &[TraceRecord], w: W) -> Result<W, TraceFileError> {
    let mut tw = TraceWriter::new(w)?;
    for r in records {
        tw.record(r);
    }
    tw.finish()
}

fn parse_float(s: &str, column: &str, row: u64) -> Result<f64, TraceFileError> {
    let x: f64 = s.trim().parse().map_err(|_| TraceFileError::Row {
        row,
        message: format!("{column}: `{s}` is not a number"),
    })?;
    if !x.is_finite() {
        return Err(TraceFileError::Row {
            row,
            message: format!("{column}: `{s}` is not finite"),
        });
    }
    Ok(x)
}

fn parse_mode(s: &str, row: u64) -> Result<Option<NodeMode>, TraceFileError> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(None);
    }
    if s == "free" {
        return Ok(Some(NodeMode::Free));
    }
    if let Some(id) = s.strip_prefix("forced:") {
        if let Ok(target) = id.parse() {
            return Ok(Some(NodeMode::Forced { target }));
        }
    }
    Err(TraceFileError::Row {
        row,
        message: format!("mode: `{s}` is not empty, `free` or `forced:<id>`"),
    })
}

/// Parses a trace file. Row numbers in errors count the header as row 1.
pub fn read_records<R: Read>(r: R) -> Result<Vec<TraceRecord>, TraceFileError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(r);
    let mut rows = rdr.records();
    let header = match rows.next() {
        Some(h) => h?,
        None => return Err(TraceFileError::Empty),
    };
    if header.iter().map(str::trim).ne(HEADER) {
        return Err(TraceFileError::Header);
    }
    let mut out: Vec<TraceRecord> = Vec::new();
    for rec in rows {
        let rec = rec?;
        let row = rec.position().map_or(0, |p| p.line());
        if rec.len() != HEADER.len() {
            return Err(TraceFileError::Row {
                row,
                message: format!("expected {} fields, found {}", HEADER.len(), rec.len()),
            });
        }
        let t = parse_float(&rec[0], "t_s", row)?;
        let node_id: usize = rec[1].trim().parse().map_err(|_| TraceFileError::Row {
            row,
            message: format!("node_id: `{}` is not a non-negative integer", &rec[1]),
        })?;
        let x = parse_float(&rec[2], "x_m", row)?;
        let y = parse_float(&rec[3], "y_m", row)?;
        let speed = match (rec[4].trim().is_empty(), rec[5].trim().is_empty()) {
            (true, true) => None,
            (false, false) => Some(SpeedVector {
                v: parse_float(&rec[4], "v_mps", row)?,
                theta: parse_float(&rec[5], "theta_rad", row)?,
            }),
            _ => {
                return Err(TraceFileError::Row {
                    row,
                    message: "v_mps and theta_rad must both be empty or both set".into(),
                })
            }
        };
        let mode = parse_mode(&rec[6], row)?;
        if let Some(prev) = out.last() {
            if (t, node_id) <= (prev.t, prev.node_id) {
                return Err(TraceFileError::Row {
                    row,
                    message: format!("not sorted by (t_s, node_id) after t={} node={}", prev.t, prev.node_id),
                });
            }
        }
        out.push(TraceRecord {
            t,
            node_id,
            position: Position::new(x, y),
            speed,
            mode,
        });
    }
    if out.is_empty() {
        return Err(TraceFileError::Empty);
    }
    Ok(out)
}

/// Parses a trace and attaches the metric and text precision.
pub fn read_trace<R: Read>(r: R, metric: Metric) -> Result<Trace, TraceFileError> {
    Ok(Trace::new(read_records(r)?, metric).with_precision(TEXT_PRECISION))
}
