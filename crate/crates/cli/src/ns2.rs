//! Classic ns-2 movement files.
//!
//! Each node gets `$node_(i) set X_/Y_/Z_` for its first record, then one
//! `setdest` per run of collinear constant-speed updates. A node arrives at
//! each destination exactly at the time of the record it came from and
//! waits there, so idle stretches need no command. Torus wraps are emitted
//! as timed `set X_`/`set Y_` jumps. Numbers use the shortest decimal form
//! that reads back to the same f64.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use momo_core::kinematics::{Metric, Position};
use momo_core::metrics::TraceRecord;
use thiserror::Error;

/// Largest deviation, in metres, between a merged straight segment and any
/// record it absorbs.
pub const MERGE_TOLERANCE_M: f64 = 1e-7;

#[derive(Debug, Error, PartialEq)]
pub enum Ns2Error {
    #[error("trace has no position records")]
    NoPositions,
    #[error("node {node}: timestamps not strictly increasing at t={t}")]
    NonIncreasingTime { node: usize, t: f64 },
}

#[derive(Debug, Clone, PartialEq)]
enum Command {
    SetDest { t: f64, to: Position, speed: f64 },
    Jump { t: f64, to: Position },
}

fn node_commands(recs: &[&TraceRecord], metric: &Metric) -> Vec<Command> {
    let mut out = Vec::new();
    // Current straight run: start record index and its tentative end.
    let mut start = 0usize;
    let mut end = 0usize;
    let flush = |out: &mut Vec<Command>, s: usize, e: usize| {
        if e > s {
            let (a, b) = (recs[s], recs[e]);
            let d = a.position.distance(&b.position);
            if d > 0.0 {
                out.push(Command::SetDest {
                    t: a.t,
                    to: b.position,
                    speed: d / (b.t - a.t),
                });
            }
        }
    };
    for k in 1..recs.len() {
        let (a, b) = (recs[k - 1], recs[k]);
        let (dx, dy) = metric.displacement(&a.position, &b.position);
        let wrapped = (a.position.x + dx - b.position.x).abs() > MERGE_TOLERANCE_M
            || (a.position.y + dy - b.position.y).abs() > MERGE_TOLERANCE_M;
        if wrapped {
            flush(&mut out, start, end);
            out.push(Command::Jump { t: b.t, to: b.position });
            start = k;
            end = k;
            continue;
        }
        let still = a.position == b.position;
        let run_still = end > start && recs[start].position == recs[end].position;
        if end == start || (still && run_still) || (!still && !run_still && fits(recs, start, k)) {
            end = k;
        } else {
            flush(&mut out, start, end);
            start = k - 1;
            end = k;
        }
    }
    flush(&mut out, start, end);
    out
}

/// Whether every record in `(s, e)` lies on the constant-velocity line
/// from `s` to `e`.
fn fits(recs: &[&TraceRecord], s: usize, e: usize) -> bool {
    let (a, b) = (recs[s], recs[e]);
    let span = b.t - a.t;
    recs[s + 1..e].iter().all(|r| {
        let f = (r.t - a.t) / span;
        let x = a.position.x + f * (b.position.x - a.position.x);
        let y = a.position.y + f * (b.position.y - a.position.y);
        (x - r.position.x).hypot(y - r.position.y) <= MERGE_TOLERANCE_M
    })
}

/// Renders a movement file. `metric` identifies torus wraps.
pub fn export(records: &[TraceRecord], metric: &Metric) -> Result<String, Ns2Error> {
    if records.is_empty() {
        return Err(Ns2Error::NoPositions);
    }
    let mut by_node: BTreeMap<usize, Vec<&TraceRecord>> = BTreeMap::new();
    for r in records {
        by_node.entry(r.node_id).or_default().push(r);
    }
    let mut text = String::new();
    let mut timed: Vec<(f64, usize, String)> = Vec::new();
    for (&node, recs) in by_node.iter_mut() {
        recs.sort_by(|a, b| a.t.total_cmp(&b.t));
        if let Some(w) = recs.windows(2).find(|w| w[1].t <= w[0].t) {
            return Err(Ns2Error::NonIncreasingTime { node, t: w[1].t });
        }
        let p = recs[0].position;
        let _ = writeln!(text, "$node_({node}) set X_ {}", p.x);
        let _ = writeln!(text, "$node_({node}) set Y_ {}", p.y);
        let _ = writeln!(text, "$node_({node}) set Z_ 0");
        for c in node_commands(recs, metric) {
            match c {
                Command::SetDest { t, to, speed } => timed.push((
                    t,
                    node,
                    format!("$ns_ at {t} \"$node_({node}) setdest {} {} {speed}\"", to.x, to.y),
                )),
                Command::Jump { t, to } => {
                    timed.push((t, node, format!("$ns_ at {t} \"$node_({node}) set X_ {}\"", to.x)));
                    timed.push((t, node, format!("$ns_ at {t} \"$node_({node}) set Y_ {}\"", to.y)));
                }
            }
        }
    }
    timed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for (_, _, line) in timed {
        text.push_str(&line);
        text.push('\n');
    }
    Ok(text)
}
