//! Discrete-time simulation loop.
//!
//! Time advances in whole steps of `delta_t`; epoch `n` sits at exactly
//! `n * delta_t`. At each epoch the engine applies pending grouping
//! switches, lets the model settle the speed vectors for the coming step,
//! emits one record per node, then moves every node to the next epoch.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::group::{
    momo_check_and_set_mode, momo_forced_speed_vector, rpgm_step, rvgm_leader_reference, rvgm_node_velocity,
    uniform_in_disc, GroupDynamics, GroupRoles, GroupSpec, MoMoParams, NodeMode, RpgmParams, RvgmParams,
};
use crate::individual::{time_eps, IndividualMotion, ModelParams, RandomWalkTrigger};
use crate::kinematics::{
    advance_straight, apply_boundary, BoundaryPolicy, KinematicLimits, Metric, Playground, Position, SpeedVector,
};
use crate::metrics::{Trace, TraceRecord, TraceSink, ViolationCounter, IN_MEMORY_PRECISION};
use crate::parallel::{map_indexed, Execution};
use crate::rng::{derive_seed, RngStream, SimRng};

/// Stream-id offsets; node `i` draws from stream `i`.
pub const GROUP_STREAM_BASE: u64 = 1_000_000;
pub const SWITCH_STREAM: u64 = 2_000_000;
pub const PLACEMENT_STREAM: u64 = 3_000_000;

/// Upper bound on the number of steps in one run.
pub const MAX_STEPS: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoMoSettings {
    pub d_c: f64,
    pub rho_min: f64,
    /// Grouping-check period; the step length when unset.
    pub delta_u: Option<f64>,
    /// Update period of the free bounded-kinematics motion.
    pub period_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelChoice {
    /// Every node runs the same individual model; groups are ignored.
    Individual(ModelParams),
    MoMo(MoMoSettings),
    Rpgm { d_max: f64, leader: ModelParams },
    Rvgm(RvgmParams),
}

impl ModelChoice {
    pub fn name(&self) -> &'static str {
        match self {
            ModelChoice::Individual(p) => p.name(),
            ModelChoice::MoMo(_) => "momo",
            ModelChoice::Rpgm { .. } => "rpgm",
            ModelChoice::Rvgm(_) => "rvgm",
        }
    }

    /// The distance threshold swept by the robustness grid, if the model has
    /// one.
    pub fn distance_threshold(&self) -> Option<f64> {
        match self {
            ModelChoice::MoMo(m) => Some(m.d_c),
            ModelChoice::Rpgm { d_max, .. } => Some(*d_max),
            _ => None,
        }
    }

    pub fn with_distance_threshold(mut self, d: f64) -> Self {
        match &mut self {
            ModelChoice::MoMo(m) => m.d_c = d,
            ModelChoice::Rpgm { d_max, .. } => *d_max = d,
            _ => {}
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsSwitch {
    pub mean_period_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub playground: Playground,
    pub duration_s: f64,
    pub delta_t_s: f64,
    pub groups: Vec<GroupSpec>,
    pub limits: KinematicLimits,
    pub model: ModelChoice,
    pub seed: u64,
    pub dynamics_switch: Option<DynamicsSwitch>,
    /// Radius of the disc each group starts in. When unset: `d_c / 2` for
    /// MoMo, `d_max` for RPGM, and uniform over the playground for RVGM and
    /// individual models.
    pub initial_group_radius_m: Option<f64>,
    /// Bounded-kinematics speeds never drop below `v_min` instead of 0.
    pub speed_floor_at_v_min: bool,
}

impl ExperimentConfig {
    /// The reference MoMo scenario: 16 nodes in 4 groups on a 5000 m square
    /// for 10000 s.
    pub fn reference(model: ModelChoice) -> Self {
        Self {
            playground: Playground {
                width: 5000.0,
                height: 5000.0,
                boundary: BoundaryPolicy::Torus,
            },
            duration_s: 10_000.0,
            delta_t_s: 1.0,
            groups: crate::group::consecutive_groups(&[4, 4, 4, 4]),
            limits: KinematicLimits::reference(),
            model,
            seed: 1,
            dynamics_switch: None,
            initial_group_radius_m: None,
            speed_floor_at_v_min: true,
        }
    }

    pub fn reference_momo() -> ModelChoice {
        ModelChoice::MoMo(MoMoSettings {
            d_c: 30.0,
            rho_min: 0.5,
            delta_u: None,
            period_s: 5.0,
        })
    }

    pub fn reference_rpgm() -> ModelChoice {
        ModelChoice::Rpgm {
            d_max: 30.0,
            leader: ModelParams::RandomWalk(RandomWalkTrigger::Timer { period_s: 5.0 }),
        }
    }

    pub fn reference_rvgm() -> ModelChoice {
        ModelChoice::Rvgm(RvgmParams {
            sigma_v: 1.0,
            sigma_theta: 0.26,
            period_s: 5.0,
            leader_mean_speed: None,
        })
    }

    pub fn node_count(&self) -> usize {
        self.groups.iter().map(|g| g.member_ids.len()).sum()
    }

    /// Number of steps; epochs run from 0 to `steps()` inclusive.
    pub fn steps(&self) -> u64 {
        (self.duration_s / self.delta_t_s + 1e-9).floor() as u64
    }

    pub fn time_at(&self, step: u64) -> f64 {
        step as f64 * self.delta_t_s
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errs = ConfigError::default();
        if let Err(e) = self.playground.validate() {
            errs.push("playground", e.to_string());
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            errs.push("duration_s", format!("must be > 0, got {}", self.duration_s));
        }
        if !(self.delta_t_s > 0.0 && self.delta_t_s.is_finite()) {
            errs.push("delta_t_s", format!("must be > 0, got {}", self.delta_t_s));
        } else if self.duration_s > 0.0 && self.duration_s / self.delta_t_s > MAX_STEPS as f64 {
            errs.push("delta_t_s", format!("more than {MAX_STEPS} steps"));
        }
        if let Err(e) = self.limits.validate() {
            errs.push("limits", e.to_string());
        }
        if self.groups.is_empty() {
            errs.push("groups", "at least one group is required".into());
        }
        let n = self.node_count();
        let mut seen = vec![false; n];
        for g in &self.groups {
            if let Err(e) = g.validate() {
                errs.push("groups", e.to_string());
            }
            for &m in &g.member_ids {
                if m >= n {
                    errs.push("groups", format!("node id {m} out of range 0..{n}"));
                } else if std::mem::replace(&mut seen[m], true) {
                    errs.push("groups", format!("node id {m} listed twice"));
                }
            }
        }
        let positive = |errs: &mut ConfigError, field: &str, x: f64| {
            if !(x > 0.0 && x.is_finite()) {
                errs.push(field, format!("must be > 0, got {x}"));
            }
        };
        match &self.model {
            ModelChoice::Individual(p) => {
                if let Err(e) = p.validate() {
                    errs.push("model", e);
                }
            }
            ModelChoice::MoMo(m) => {
                positive(&mut errs, "model.d_c_m", m.d_c);
                positive(&mut errs, "model.update_period_s", m.period_s);
                if !(0.0..=1.0).contains(&m.rho_min) {
                    errs.push("model.rho_min", format!("must be in [0, 1], got {}", m.rho_min));
                }
                if let Some(u) = m.delta_u {
                    positive(&mut errs, "model.delta_u_s", u);
                }
            }
            ModelChoice::Rpgm { d_max, leader } => {
                positive(&mut errs, "model.d_max_m", *d_max);
                if let Err(e) = leader.validate() {
                    errs.push("model.leader", e);
                }
            }
            ModelChoice::Rvgm(p) => {
                if let Err(e) = p.validate() {
                    errs.push("model", e.to_string());
                }
            }
        }
        if let Some(s) = &self.dynamics_switch {
            positive(&mut errs, "dynamics_switch.mean_period_s", s.mean_period_s);
        }
        if let Some(r) = self.initial_group_radius_m {
            if !(r >= 0.0 && r.is_finite()) {
                errs.push("initial_group_radius_m", format!("must be >= 0, got {r}"));
            }
        }
        errs.into_result()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

/// Every offending field of a configuration.
#[derive(Debug, Clone, PartialEq, Eq, Default, Error)]
pub struct ConfigError {
    pub fields: Vec<FieldError>,
}

impl ConfigError {
    pub fn push(&mut self, field: &str, message: String) {
        self.fields.push(FieldError {
            field: field.to_string(),
            message,
        });
    }

    pub fn into_result(self) -> Result<(), ConfigError> {
        if self.fields.is_empty() {
            Ok(())
        } else {
            Err(self)
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration:")?;
        for e in &self.fields {
            write!(f, "\n  {}: {}", e.field, e.message)?;
        }
        Ok(())
    }
}

/// Epochs at which grouping is toggled network-wide.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SwitchSchedule {
    pub epochs: Vec<f64>,
}

/// Toggle epochs with exponential inter-arrival times of the given mean,
/// truncated at `duration_s`.
pub fn generate_switch_schedule<R: Rng + ?Sized>(mean_period_s: f64, duration_s: f64, rng: &mut R) -> SwitchSchedule {
    let exp = Exp::new(1.0 / mean_period_s).expect("mean period validated > 0");
    let mut epochs = Vec::new();
    let mut t = 0.0;
    loop {
        t += exp.sample(rng);
        if t > duration_s {
            break;
        }
        if epochs.last().is_none_or(|&last| t > last) {
            epochs.push(t);
        }
    }
    SwitchSchedule { epochs }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSummary {
    pub nodes: usize,
    pub steps: u64,
    pub records: u64,
}

#[derive(Debug, Clone)]
struct Node {
    pos: Position,
    speed: SpeedVector,
    motion: Option<IndividualMotion>,
    mode: Option<NodeMode>,
    rng: SimRng,
}

struct Simulation<'a> {
    cfg: &'a ExperimentConfig,
    metric: Metric,
    nodes: Vec<Node>,
    group_rngs: Vec<SimRng>,
    roles: GroupRoles,
    schedule: SwitchSchedule,
    next_switch: usize,
    floor: f64,
    /// Index of the next grouping check or reference re-draw.
    next_tick: u64,
}

impl<'a> Simulation<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Self {
        let n = cfg.node_count();
        let pg = &cfg.playground;
        let floor = if cfg.speed_floor_at_v_min { cfg.limits.v_min } else { 0.0 };
        let mut placement = RngStream::new(cfg.seed, PLACEMENT_STREAM).rng();
        let mut pos = vec![Position::new(0.0, 0.0); n];
        let radius = cfg.initial_group_radius_m.unwrap_or(match cfg.model {
            ModelChoice::MoMo(m) => m.d_c / 2.0,
            ModelChoice::Rpgm { d_max, .. } => d_max,
            ModelChoice::Rvgm(_) | ModelChoice::Individual(_) => f64::INFINITY,
        });
        for g in &cfg.groups {
            let center = pg.sample_uniform(&mut placement);
            for &m in &g.member_ids {
                pos[m] = if radius.is_finite() {
                    let p = uniform_in_disc(&center, radius, &mut placement);
                    apply_boundary(p, SpeedVector::default(), pg).0
                } else {
                    pg.sample_uniform(&mut placement)
                };
            }
        }
        let schedule = match cfg.dynamics_switch {
            Some(s) => generate_switch_schedule(
                s.mean_period_s,
                cfg.duration_s,
                &mut RngStream::new(cfg.seed, SWITCH_STREAM).rng(),
            ),
            None => SwitchSchedule::default(),
        };
        let nodes = pos
            .into_iter()
            .enumerate()
            .map(|(i, p)| Node {
                pos: p,
                speed: SpeedVector::default(),
                motion: None,
                mode: None,
                rng: RngStream::new(cfg.seed, i as u64).rng(),
            })
            .collect();
        let group_rngs = (0..cfg.groups.len())
            .map(|g| RngStream::new(cfg.seed, GROUP_STREAM_BASE + g as u64).rng())
            .collect();
        let mut sim = Self {
            cfg,
            metric: pg.metric(),
            nodes,
            group_rngs,
            roles: GroupRoles::new(&cfg.groups),
            schedule,
            next_switch: 0,
            floor,
            next_tick: 0,
        };
        sim.init_motion();
        sim
    }

    fn init_motion(&mut self) {
        let cfg = self.cfg;
        let (pg, limits) = (&cfg.playground, &cfg.limits);
        match cfg.model {
            ModelChoice::Individual(params) => {
                for nd in &mut self.nodes {
                    let m = IndividualMotion::new(&params, nd.pos, 0.0, pg, limits, self.floor, &mut nd.rng);
                    nd.speed = m.speed();
                    nd.motion = Some(m);
                }
            }
            ModelChoice::MoMo(m) => {
                for nd in &mut self.nodes {
                    let mp = ModelParams::Boundless { period_s: m.period_s };
                    let mo = IndividualMotion::new(&mp, nd.pos, 0.0, pg, limits, self.floor, &mut nd.rng);
                    nd.speed = mo.speed();
                    nd.motion = Some(mo);
                    nd.mode = Some(NodeMode::Free);
                }
            }
            ModelChoice::Rpgm { leader, .. } => {
                for i in 0..self.nodes.len() {
                    if self.roles.is_leader(i) {
                        self.start_leader(i, &leader, 0.0);
                    }
                }
            }
            // vectors are drawn at the first tick
            ModelChoice::Rvgm(_) => {}
        }
    }

    fn start_leader(&mut self, i: usize, params: &ModelParams, t: f64) {
        let cfg = self.cfg;
        let nd = &mut self.nodes[i];
        let m = IndividualMotion::new(params, nd.pos, t, &cfg.playground, &cfg.limits, self.floor, &mut nd.rng);
        nd.speed = m.speed();
        nd.motion = Some(m);
    }

    fn apply_switches(&mut self, t: f64) {
        let mut toggled = false;
        while self.next_switch < self.schedule.epochs.len() && self.schedule.epochs[self.next_switch] <= t + time_eps(t)
        {
            self.next_switch += 1;
            toggled = !toggled;
        }
        if !toggled {
            return;
        }
        let before = self.roles.clone();
        self.roles.set_group_dynamics(self.roles.dynamics().toggled());
        match self.cfg.model {
            ModelChoice::Rpgm { leader, .. } => {
                for i in 0..self.nodes.len() {
                    match (before.is_leader(i), self.roles.is_leader(i)) {
                        (false, true) => self.start_leader(i, &leader, t),
                        (true, false) => {
                            self.nodes[i].motion = None;
                        }
                        _ => {}
                    }
                }
            }
            ModelChoice::Rvgm(p)
                if self.roles.dynamics() == GroupDynamics::Grouped => {
                    for i in 0..self.nodes.len() {
                        if let Some(l) = self.roles.reference_of(i) {
                            let lead = self.nodes[l].speed;
                            let nd = &mut self.nodes[i];
                            nd.speed = rvgm_node_velocity(&lead, &p, &self.cfg.limits, &mut nd.rng);
                        }
                    }
                }
            // MoMo reads the effective threshold at its next check
            _ => {}
        }
    }

    /// Settles positions and speed vectors at epoch `t`.
    fn prepare(&mut self, t: f64) {
        self.apply_switches(t);
        let cfg = self.cfg;
        let (pg, limits) = (&cfg.playground, &cfg.limits);
        match cfg.model {
            ModelChoice::Individual(_) => {
                for nd in &mut self.nodes {
                    let m = nd.motion.as_mut().expect("individual nodes carry motion");
                    m.prepare(&nd.pos, t, pg, limits, &mut nd.rng);
                    nd.speed = m.speed();
                }
            }
            ModelChoice::MoMo(m) => self.prepare_momo(t, &m),
            ModelChoice::Rpgm { d_max, .. } => {
                let params = RpgmParams {
                    d_max,
                    delta_t: cfg.delta_t_s,
                };
                if self.roles.dynamics() == GroupDynamics::Grouped {
                    for (gi, g) in cfg.groups.iter().enumerate() {
                        let lp = self.nodes[g.leader()].pos;
                        for (n, p) in rpgm_step(g, &lp, &params, &mut self.group_rngs[gi]) {
                            self.nodes[n].pos = apply_boundary(p, SpeedVector::default(), pg).0;
                        }
                    }
                }
                for nd in &mut self.nodes {
                    if let Some(m) = nd.motion.as_mut() {
                        m.prepare(&nd.pos, t, pg, limits, &mut nd.rng);
                        nd.speed = m.speed();
                    }
                }
            }
            ModelChoice::Rvgm(p) => {
                while self.tick_time(p.period_s) <= t + time_eps(t) {
                    self.rvgm_redraw(&p);
                    self.next_tick += 1;
                }
            }
        }
    }

    fn tick_time(&self, period: f64) -> f64 {
        self.next_tick as f64 * period
    }

    fn prepare_momo(&mut self, t: f64, m: &MoMoSettings) {
        let cfg = self.cfg;
        let (pg, limits) = (&cfg.playground, &cfg.limits);
        let delta_u = m.delta_u.unwrap_or(cfg.delta_t_s);
        if self.tick_time(delta_u) <= t + time_eps(t) {
            let params = MoMoParams {
                d_c: m.d_c,
                rho_min: self.roles.rho_min(m.rho_min),
                delta_u,
            };
            let positions: Vec<Position> = self.nodes.iter().map(|n| n.pos).collect();
            for g in &cfg.groups {
                for &i in &g.member_ids {
                    let mode = momo_check_and_set_mode(i, g, &positions, &params, &self.metric)
                        .expect("a node below the threshold always has an unconnected mate");
                    self.nodes[i].mode = Some(mode);
                }
            }
            self.next_tick = ((t + time_eps(t)) / delta_u).floor() as u64 + 1;
        }
        let positions: Vec<Position> = self.nodes.iter().map(|n| n.pos).collect();
        for nd in &mut self.nodes {
            match nd.mode {
                Some(NodeMode::Forced { target }) => {
                    nd.motion = None;
                    nd.speed = momo_forced_speed_vector(
                        &nd.pos,
                        &nd.speed,
                        &positions[target],
                        limits,
                        cfg.delta_t_s,
                        &self.metric,
                    );
                }
                _ => {
                    let motion = nd.motion.get_or_insert_with(|| {
                        IndividualMotion::boundless_from(nd.speed, t, m.period_s, limits, self.floor, &mut nd.rng)
                    });
                    motion.prepare(&nd.pos, t, pg, limits, &mut nd.rng);
                    nd.speed = motion.speed();
                }
            }
        }
    }

    fn rvgm_redraw(&mut self, p: &RvgmParams) {
        let limits = &self.cfg.limits;
        match self.roles.dynamics() {
            GroupDynamics::Grouped => {
                for (gi, g) in self.cfg.groups.iter().enumerate() {
                    let reference = rvgm_leader_reference(p, limits, &mut self.group_rngs[gi]);
                    for &i in &g.member_ids {
                        let nd = &mut self.nodes[i];
                        nd.speed = if i == g.leader() {
                            reference
                        } else {
                            rvgm_node_velocity(&reference, p, limits, &mut nd.rng)
                        };
                    }
                }
            }
            GroupDynamics::Individual => {
                for nd in &mut self.nodes {
                    nd.speed = rvgm_leader_reference(p, limits, &mut nd.rng);
                }
            }
        }
    }

    fn emit<S: TraceSink + ?Sized>(&self, t: f64, sink: &mut S) {
        for (i, nd) in self.nodes.iter().enumerate() {
            let has_vector = !matches!(self.cfg.model, ModelChoice::Rpgm { .. }) || self.roles.is_leader(i);
            sink.record(&TraceRecord {
                t,
                node_id: i,
                position: nd.pos,
                speed: has_vector.then_some(nd.speed),
                mode: nd.mode,
            });
        }
    }

    fn straight(&mut self, i: usize, dt: f64) {
        let nd = &mut self.nodes[i];
        let raw = advance_straight(nd.pos, &nd.speed, dt);
        let (p, s) = apply_boundary(raw, nd.speed, &self.cfg.playground);
        nd.pos = p;
        nd.speed = s;
    }

    /// Moves every node from `t0` to `t1`.
    fn advance(&mut self, t0: f64, t1: f64) {
        let cfg = self.cfg;
        let (pg, limits) = (&cfg.playground, &cfg.limits);
        match cfg.model {
            ModelChoice::Rvgm(p) => {
                let mut clock = t0;
                loop {
                    let e = self.tick_time(p.period_s);
                    if e >= t1 - time_eps(t1) {
                        break;
                    }
                    for i in 0..self.nodes.len() {
                        self.straight(i, e - clock);
                    }
                    clock = e;
                    self.rvgm_redraw(&p);
                    self.next_tick += 1;
                }
                for i in 0..self.nodes.len() {
                    self.straight(i, t1 - clock);
                }
            }
            _ => {
                for i in 0..self.nodes.len() {
                    let nd = &mut self.nodes[i];
                    match nd.motion.as_mut() {
                        Some(m) => {
                            nd.pos = m.advance(nd.pos, t0, t1, pg, limits, &mut nd.rng);
                            nd.speed = m.speed();
                        }
                        // MoMo forced nodes move straight; RPGM standard
                        // nodes are re-placed at the next epoch
                        None if nd.mode.is_some() => self.straight(i, t1 - t0),
                        None => {}
                    }
                }
            }
        }
    }
}

/// Runs `config` and streams every record into `sink` in (t, node_id) order.
pub fn run_into<S: TraceSink + ?Sized>(config: &ExperimentConfig, sink: &mut S) -> Result<RunSummary, ConfigError> {
    config.validate()?;
    let mut sim = Simulation::new(config);
    let steps = config.steps();
    for n in 0..=steps {
        let t = config.time_at(n);
        sim.prepare(t);
        sim.emit(t, sink);
        if n < steps {
            sim.advance(t, config.time_at(n + 1));
        }
    }
    Ok(RunSummary {
        nodes: sim.nodes.len(),
        steps,
        records: (steps + 1) * sim.nodes.len() as u64,
    })
}

pub fn run(config: &ExperimentConfig) -> Result<Trace, ConfigError> {
    let mut records = Vec::with_capacity(((config.steps() + 1) as usize).saturating_mul(config.node_count()));
    run_into(config, &mut records)?;
    Ok(Trace {
        records,
        metric: config.playground.metric(),
        position_precision: IN_MEMORY_PRECISION,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub delta_t_s: Vec<f64>,
    pub distance_m: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            delta_t_s: vec![0.1, 0.5, 1.0, 2.0, 5.0],
            distance_m: vec![15.0, 30.0, 60.0, 120.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub model: String,
    pub delta_t_s: f64,
    /// `None` for models without a distance threshold.
    pub distance_m: Option<f64>,
    pub speed_violation_pct: f64,
    pub rotation_violation_pct: f64,
    pub avg_speed_mps: f64,
}

/// One configuration per grid point with its derived seed, in grid order.
/// The distance axis collapses for models without a distance threshold.
pub fn sweep_points(config: &ExperimentConfig, grid: &SweepGrid) -> Vec<ExperimentConfig> {
    let distances: Vec<Option<f64>> = if config.model.distance_threshold().is_some() {
        grid.distance_m.iter().copied().map(Some).collect()
    } else {
        vec![None]
    };
    let mut out = Vec::new();
    for (i, &dt) in grid.delta_t_s.iter().enumerate() {
        for (j, d) in distances.iter().enumerate() {
            let mut c = config.clone();
            c.delta_t_s = dt;
            if let Some(d) = d {
                c.model = c.model.with_distance_threshold(*d);
            }
            c.seed = derive_seed(config.seed, &[i as u64, j as u64]);
            out.push(c);
        }
    }
    out
}

/// Measures one run without materializing its trace.
pub fn measure(config: &ExperimentConfig) -> Result<SweepRow, ConfigError> {
    let mut counter = ViolationCounter::new(config.limits, config.playground.metric(), IN_MEMORY_PRECISION);
    run_into(config, &mut counter)?;
    let r = counter.report();
    Ok(SweepRow {
        model: config.model.name().to_string(),
        delta_t_s: config.delta_t_s,
        distance_m: config.model.distance_threshold(),
        speed_violation_pct: r.speed_violation_pct,
        rotation_violation_pct: r.rotation_violation_pct,
        avg_speed_mps: counter.average_speed().unwrap_or(0.0),
    })
}

pub fn sweep(config: &ExperimentConfig, grid: &SweepGrid, exec: Execution) -> Result<Vec<SweepRow>, ConfigError> {
    let points = sweep_points(config, grid);
    for p in &points {
        p.validate()?;
    }
    map_indexed(exec, points.len(), |i| measure(&points[i])).into_iter().collect()
}
