//! Trace measurements: bound-violation rates, average speed, group
//! distances and spatial occupancy.
//!
//! Measured quantities are derived from consecutive recorded positions only;
//! stored speed vectors are never consulted, so nodes without one (RPGM
//! standard nodes) are measured the same way as every other node.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::group::{GroupSpec, NodeMode};
use crate::kinematics::{
    angular_difference, interpolate_position, KinematicLimits, Metric, NodeKinematicState, Position, SpeedVector,
};

/// Relative slack on the speed and rotation bounds.
pub const BOUND_RELATIVE_TOLERANCE: f64 = 1e-9;
/// Displacements shorter than this inherit the previous heading (m).
pub const MIN_HEADING_DISPLACEMENT: f64 = 1e-6;
/// Relative coordinate precision of traces kept in memory.
pub const IN_MEMORY_PRECISION: f64 = 4.0 * f64::EPSILON;
/// Relative coordinate precision of traces read back from 9-significant-digit
/// text.
pub const TEXT_PRECISION: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("trace has no node with two or more records")]
    NoPairs,
    #[error("node {node}: timestamps not strictly increasing at t={t}")]
    NonIncreasingTime { node: usize, t: f64 },
    #[error("no record at t={0}")]
    MissingTime(f64),
    #[error("invalid histogram window or resolution")]
    InvalidWindow,
    #[error("node {node} carries no speed vector; its position at t={t} is known only at updates")]
    NoSpeedVector { node: usize, t: f64 },
    #[error("node {node} has no record at or before t={t}")]
    BeforeFirstRecord { node: usize, t: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub node_id: usize,
    pub position: Position,
    /// Absent for nodes that carry no speed vector.
    pub speed: Option<SpeedVector>,
    pub mode: Option<NodeMode>,
}

/// Consumer of records as the engine emits them, in (t, node_id) order.
pub trait TraceSink {
    fn record(&mut self, rec: &TraceRecord);
}

impl TraceSink for Vec<TraceRecord> {
    fn record(&mut self, rec: &TraceRecord) {
        self.push(rec.clone());
    }
}

impl<A: TraceSink, B: TraceSink> TraceSink for (A, B) {
    fn record(&mut self, rec: &TraceRecord) {
        self.0.record(rec);
        self.1.record(rec);
    }
}

/// Records plus the geometry needed to measure them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    pub metric: Metric,
    /// Relative precision of the stored coordinates.
    pub position_precision: f64,
}

impl Trace {
    pub fn new(records: Vec<TraceRecord>, metric: Metric) -> Self {
        Self {
            records,
            metric,
            position_precision: IN_MEMORY_PRECISION,
        }
    }

    pub fn with_precision(mut self, precision: f64) -> Self {
        self.position_precision = precision;
        self
    }

    /// Records grouped per node, each list in time order.
    pub fn by_node(&self) -> BTreeMap<usize, Vec<&TraceRecord>> {
        let mut map: BTreeMap<usize, Vec<&TraceRecord>> = BTreeMap::new();
        for r in &self.records {
            map.entry(r.node_id).or_default().push(r);
        }
        for v in map.values_mut() {
            v.sort_by(|a, b| a.t.total_cmp(&b.t));
        }
        map
    }

    pub fn times(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self.records.iter().map(|r| r.t).collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }

    pub fn positions_at(&self, t: f64) -> BTreeMap<usize, Position> {
        let eps = 1e-9 * t.abs().max(1.0);
        self.records
            .iter()
            .filter(|r| (r.t - t).abs() <= eps)
            .map(|r| (r.node_id, r.position))
            .collect()
    }

    /// Position of `node` at `t`, extrapolated from its latest record at or
    /// before `t` with that record's speed vector. Between updates this is
    /// defined only for nodes carrying a speed vector. Torus coordinates are
    /// wrapped; reflecting boundaries are not applied.
    pub fn position_at(&self, node: usize, t: f64) -> Result<Position, MetricsError> {
        let eps = 1e-9 * t.abs().max(1.0);
        let last = self
            .records
            .iter()
            .filter(|r| r.node_id == node && r.t <= t + eps)
            .max_by(|a, b| a.t.total_cmp(&b.t))
            .ok_or(MetricsError::BeforeFirstRecord { node, t })?;
        let tau = t - last.t;
        if tau.abs() <= eps {
            return Ok(last.position);
        }
        let speed = last.speed.ok_or(MetricsError::NoSpeedVector { node, t })?;
        let state = NodeKinematicState {
            position: last.position,
            speed,
            t_lu: last.t,
        };
        let p = interpolate_position(&state, tau).map_err(|_| MetricsError::BeforeFirstRecord { node, t })?;
        Ok(match self.metric {
            Metric::Euclidean => p,
            Metric::Torus { width, height } => Position::new(p.x.rem_euclid(width), p.y.rem_euclid(height)),
        })
    }

    fn counter(&self, limits: &KinematicLimits) -> Result<ViolationCounter, MetricsError> {
        let mut c = ViolationCounter::new(*limits, self.metric, self.position_precision);
        for (_, recs) in self.by_node() {
            for r in recs {
                c.observe(r.node_id, r.t, r.position)?;
            }
        }
        if c.pairs == 0 {
            return Err(MetricsError::NoPairs);
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub speed_violation_pct: f64,
    pub rotation_violation_pct: f64,
    pub updates_counted: u64,
}

#[derive(Debug, Clone, Copy)]
struct NodeTrack {
    t: f64,
    pos: Position,
    /// Last established heading and the time it was measured at.
    heading: Option<(f64, f64, f64)>,
}

/// Streaming measurement over per-node position updates.
#[derive(Debug, Clone)]
pub struct ViolationCounter {
    limits: KinematicLimits,
    metric: Metric,
    precision: f64,
    nodes: Vec<Option<NodeTrack>>,
    pairs: u64,
    speed_violations: u64,
    rotation_violations: u64,
    speed_sum: f64,
}

impl ViolationCounter {
    pub fn new(limits: KinematicLimits, metric: Metric, precision: f64) -> Self {
        Self {
            limits,
            metric,
            precision,
            nodes: Vec::new(),
            pairs: 0,
            speed_violations: 0,
            rotation_violations: 0,
            speed_sum: 0.0,
        }
    }

    fn coord_uncertainty(&self, p: &Position) -> f64 {
        self.precision * p.x.abs().max(p.y.abs())
    }

    /// Feeds the next position of `node`; returns the measured speed of the
    /// update it closes, if any.
    pub fn observe(&mut self, node: usize, t: f64, pos: Position) -> Result<Option<f64>, MetricsError> {
        if self.nodes.len() <= node {
            self.nodes.resize(node + 1, None);
        }
        let Some(prev) = self.nodes[node] else {
            self.nodes[node] = Some(NodeTrack { t, pos, heading: None });
            return Ok(None);
        };
        let dt = t - prev.t;
        if !(dt > 0.0) {
            return Err(MetricsError::NonIncreasingTime { node, t });
        }
        let (dx, dy) = self.metric.displacement(&prev.pos, &pos);
        let d = dx.hypot(dy);
        let disp_unc = std::f64::consts::SQRT_2 * (self.coord_uncertainty(&prev.pos) + self.coord_uncertainty(&pos));
        let speed = d / dt;
        self.pairs += 1;
        self.speed_sum += speed;
        if speed > self.limits.v_max * (1.0 + BOUND_RELATIVE_TOLERANCE) + disp_unc / dt {
            self.speed_violations += 1;
        }
        let mut heading = prev.heading;
        if d >= MIN_HEADING_DISPLACEMENT.max(10.0 * disp_unc) {
            let h = dy.atan2(dx);
            let h_unc = disp_unc / d;
            if let Some((h_prev, unc_prev, t_prev)) = prev.heading {
                let span = t - t_prev;
                let rate = angular_difference(h_prev, h).abs() / span;
                if rate > self.limits.gamma_max * (1.0 + BOUND_RELATIVE_TOLERANCE) + (h_unc + unc_prev) / span {
                    self.rotation_violations += 1;
                }
            }
            heading = Some((h, h_unc, t));
        }
        self.nodes[node] = Some(NodeTrack { t, pos, heading });
        Ok(Some(speed))
    }

    pub fn updates(&self) -> u64 {
        self.pairs
    }

    pub fn report(&self) -> ViolationReport {
        let pct = |n: u64| {
            if self.pairs == 0 {
                0.0
            } else {
                100.0 * n as f64 / self.pairs as f64
            }
        };
        ViolationReport {
            speed_violation_pct: pct(self.speed_violations),
            rotation_violation_pct: pct(self.rotation_violations),
            updates_counted: self.pairs,
        }
    }

    pub fn average_speed(&self) -> Option<f64> {
        (self.pairs > 0).then(|| self.speed_sum / self.pairs as f64)
    }
}

impl TraceSink for ViolationCounter {
    fn record(&mut self, rec: &TraceRecord) {
        // engine emits strictly increasing times per node
        let _ = self.observe(rec.node_id, rec.t, rec.position);
    }
}

pub fn violation_report(trace: &Trace, limits: &KinematicLimits) -> Result<ViolationReport, MetricsError> {
    Ok(trace.counter(limits)?.report())
}

pub fn speed_violation_rate(trace: &Trace, limits: &KinematicLimits) -> Result<f64, MetricsError> {
    Ok(violation_report(trace, limits)?.speed_violation_pct)
}

pub fn rotation_violation_rate(trace: &Trace, limits: &KinematicLimits) -> Result<f64, MetricsError> {
    Ok(violation_report(trace, limits)?.rotation_violation_pct)
}

/// Mean measured speed over every consecutive update of every node.
pub fn average_speed(trace: &Trace) -> Result<f64, MetricsError> {
    let limits = KinematicLimits {
        v_max: f64::INFINITY,
        v_min: 0.0,
        a_max: f64::INFINITY,
        gamma_max: f64::INFINITY,
    };
    trace.counter(&limits)?.average_speed().ok_or(MetricsError::NoPairs)
}

/// Mean pairwise distance within groups and over all node pairs.
/// Nodes absent from `positions` are skipped.
pub fn group_distances_at(positions: &BTreeMap<usize, Position>, groups: &[GroupSpec], metric: &Metric) -> (f64, f64) {
    let mut intra = (0.0, 0u64);
    for g in groups {
        let members: Vec<&Position> = g.member_ids.iter().filter_map(|m| positions.get(m)).collect();
        for (i, a) in members.iter().enumerate() {
            for b in &members[i + 1..] {
                intra.0 += metric.distance(a, b);
                intra.1 += 1;
            }
        }
    }
    let all: Vec<&Position> = positions.values().collect();
    let mut overall = (0.0, 0u64);
    for (i, a) in all.iter().enumerate() {
        for b in &all[i + 1..] {
            overall.0 += metric.distance(a, b);
            overall.1 += 1;
        }
    }
    let mean = |(s, n): (f64, u64)| if n == 0 { 0.0 } else { s / n as f64 };
    (mean(intra), mean(overall))
}

pub fn group_distances(trace: &Trace, groups: &[GroupSpec], t: f64) -> Result<(f64, f64), MetricsError> {
    let positions = trace.positions_at(t);
    if positions.is_empty() {
        return Err(MetricsError::MissingTime(t));
    }
    Ok(group_distances_at(&positions, groups, &trace.metric))
}

/// Per-epoch mean of the speeds measured over the update ending at that
/// epoch. The first epoch has no incoming update and is omitted.
pub fn speed_series(trace: &Trace) -> Result<Vec<(f64, f64)>, MetricsError> {
    let mut acc: BTreeMap<u64, (f64, f64, u32)> = BTreeMap::new();
    let mut c = ViolationCounter::new(
        KinematicLimits::reference(),
        trace.metric,
        trace.position_precision,
    );
    for (_, recs) in trace.by_node() {
        for r in recs {
            if let Some(s) = c.observe(r.node_id, r.t, r.position)? {
                let e = acc.entry(r.t.to_bits()).or_insert((r.t, 0.0, 0));
                e.1 += s;
                e.2 += 1;
            }
        }
    }
    let mut out: Vec<(f64, f64)> = acc.into_values().map(|(t, s, n)| (t, s / n as f64)).collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// `(t, intra, overall)` at every recorded epoch.
pub fn distance_series(trace: &Trace, groups: &[GroupSpec]) -> Vec<(f64, f64, f64)> {
    let mut at: BTreeMap<u64, (f64, BTreeMap<usize, Position>)> = BTreeMap::new();
    for r in &trace.records {
        at.entry(r.t.to_bits()).or_insert_with(|| (r.t, BTreeMap::new())).1.insert(r.node_id, r.position);
    }
    let mut out: Vec<(f64, f64, f64)> = at
        .into_values()
        .map(|(t, pos)| {
            let (i, o) = group_distances_at(&pos, groups, &trace.metric);
            (t, i, o)
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Axis-aligned window `[x_min, x_max) × [y_min, y_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Window {
    pub fn centered(center: Position, side: f64) -> Self {
        Self {
            x_min: center.x - side / 2.0,
            y_min: center.y - side / 2.0,
            x_max: center.x + side / 2.0,
            y_max: center.y + side / 2.0,
        }
    }
}

/// Normalized occupancy grid; `mass[row * cols + col]` with rows along y.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub window: Window,
    pub resolution: f64,
    pub rows: usize,
    pub cols: usize,
    pub mass: Vec<f64>,
    /// Samples that fell inside the window.
    pub samples: u64,
}

impl DensityGrid {
    pub fn new(window: Window, resolution: f64) -> Result<Self, MetricsError> {
        let w = window.x_max - window.x_min;
        let h = window.y_max - window.y_min;
        if !(resolution > 0.0 && w > 0.0 && h > 0.0) {
            return Err(MetricsError::InvalidWindow);
        }
        let cols = (w / resolution).round() as usize;
        let rows = (h / resolution).round() as usize;
        if rows == 0 || cols == 0 {
            return Err(MetricsError::InvalidWindow);
        }
        Ok(Self {
            window,
            resolution,
            rows,
            cols,
            mass: vec![0.0; rows * cols],
            samples: 0,
        })
    }

    fn cell(&self, p: &Position) -> Option<usize> {
        let c = ((p.x - self.window.x_min) / self.resolution).floor();
        let r = ((p.y - self.window.y_min) / self.resolution).floor();
        (c >= 0.0 && r >= 0.0 && (c as usize) < self.cols && (r as usize) < self.rows)
            .then(|| r as usize * self.cols + c as usize)
    }

    /// Adds one raw count; call [`DensityGrid::normalize`] when done.
    pub fn add(&mut self, p: &Position) {
        if let Some(i) = self.cell(p) {
            self.mass[i] += 1.0;
            self.samples += 1;
        }
    }

    pub fn merge(&mut self, other: &DensityGrid) {
        for (a, b) in self.mass.iter_mut().zip(&other.mass) {
            *a += b;
        }
        self.samples += other.samples;
    }

    pub fn normalize(&mut self) {
        if self.samples > 0 {
            let n = self.samples as f64;
            self.mass.iter_mut().for_each(|m| *m /= n);
        }
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.mass[row * self.cols + col]
    }
}

pub fn spatial_histogram(trace: &Trace, window: Window, resolution: f64) -> Result<DensityGrid, MetricsError> {
    let mut g = DensityGrid::new(window, resolution)?;
    for r in &trace.records {
        g.add(&r.position);
    }
    g.normalize();
    Ok(g)
}
