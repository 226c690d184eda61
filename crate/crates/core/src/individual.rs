//! Individual mobility models.
//!
//! Each model is exposed twice: as a pure update function producing the next
//! speed vector on the model's trigger, and through [`IndividualMotion`], a
//! per-node state machine that fires those triggers at their exact times
//! while moving the node between position updates.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::kinematics::{
    advance_straight, clamp_speed_with_floor, normalize_angle, reflect_heading, reflect_position, wrap_position,
    BoundaryPolicy, KinematicLimits, NodeKinematicState, Playground, Position, Reflection, SpeedVector,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RandomWalkTrigger {
    Timer { period_s: f64 },
    Distance { distance_m: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussMarkovParams {
    pub period_s: f64,
    /// Memory parameter in 1/s; `alpha = exp(-beta * period)`.
    pub beta: f64,
    pub mean_mps: [f64; 2],
    pub sigma_mps: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelParams {
    RandomWalk(RandomWalkTrigger),
    KoVaidya { mean_leg_m: f64 },
    RandomWaypoint { pause_s: f64 },
    RandomDirection { pause_s: f64 },
    Inertia { period_s: f64, rho: f64 },
    GaussMarkov(GaussMarkovParams),
    Boundless { period_s: f64 },
    Static,
}

impl ModelParams {
    pub fn name(&self) -> &'static str {
        match self {
            ModelParams::RandomWalk(_) => "random_walk",
            ModelParams::KoVaidya { .. } => "ko_vaidya",
            ModelParams::RandomWaypoint { .. } => "random_waypoint",
            ModelParams::RandomDirection { .. } => "random_direction",
            ModelParams::Inertia { .. } => "inertia",
            ModelParams::GaussMarkov(_) => "gauss_markov",
            ModelParams::Boundless { .. } => "boundless",
            ModelParams::Static => "static",
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be > 0, got {x}"))
            }
        };
        let non_negative = |name: &str, x: f64| {
            if x >= 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be >= 0, got {x}"))
            }
        };
        match *self {
            ModelParams::RandomWalk(RandomWalkTrigger::Timer { period_s }) => positive("update_period_s", period_s),
            ModelParams::RandomWalk(RandomWalkTrigger::Distance { distance_m }) => positive("distance_m", distance_m),
            ModelParams::KoVaidya { mean_leg_m } => positive("mean_leg_m", mean_leg_m),
            ModelParams::RandomWaypoint { pause_s } | ModelParams::RandomDirection { pause_s } => {
                non_negative("pause_s", pause_s)
            }
            ModelParams::Inertia { period_s, rho } => {
                positive("update_period_s", period_s)?;
                if (0.0..=1.0).contains(&rho) {
                    Ok(())
                } else {
                    Err(format!("rho must be in [0, 1], got {rho}"))
                }
            }
            ModelParams::GaussMarkov(p) => {
                positive("update_period_s", p.period_s)?;
                non_negative("beta_per_s", p.beta)?;
                non_negative("sigma_x_mps", p.sigma_mps[0])?;
                non_negative("sigma_y_mps", p.sigma_mps[1])
            }
            ModelParams::Boundless { period_s } => positive("update_period_s", period_s),
            ModelParams::Static => Ok(()),
        }
    }
}

fn uniform_heading<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    normalize_angle(TAU * rng.random::<f64>())
}

/// Fresh speed and direction, independent of the current vector.
pub fn random_walk_update<R: Rng + ?Sized>(limits: &KinematicLimits, rng: &mut R) -> SpeedVector {
    let v = limits.sample_speed(rng);
    SpeedVector::new(v, uniform_heading(rng))
}

/// New speed and exponential leg length; the direction is kept.
pub fn ko_vaidya_update<R: Rng + ?Sized>(
    state: &NodeKinematicState,
    limits: &KinematicLimits,
    mean_leg_m: f64,
    rng: &mut R,
) -> (SpeedVector, f64) {
    let v = limits.sample_speed(rng);
    let leg = Exp::new(1.0 / mean_leg_m).expect("mean leg must be positive").sample(rng);
    (SpeedVector::new(v, state.speed.theta), leg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub destination: Position,
    pub v: f64,
    pub pause_s: f64,
}

pub fn random_waypoint_update<R: Rng + ?Sized>(
    playground: &Playground,
    limits: &KinematicLimits,
    pause_s: f64,
    rng: &mut R,
) -> Waypoint {
    let destination = playground.sample_uniform(rng);
    let v = limits.sample_speed(rng);
    Waypoint { destination, v, pause_s }
}

/// Draws a direction pointing into the playground from a node resting on
/// its boundary. Away from every edge all directions are admissible.
pub fn random_direction_update<R: Rng + ?Sized>(
    position: &Position,
    v: f64,
    playground: &Playground,
    rng: &mut R,
) -> SpeedVector {
    let eps = 1e-9 * playground.width.max(playground.height);
    let left = position.x <= eps;
    let right = position.x >= playground.width - eps;
    let bottom = position.y <= eps;
    let top = position.y >= playground.height - eps;
    // rejection from the full circle; at a corner a quarter is accepted
    loop {
        let theta = uniform_heading(rng);
        let (s, c) = theta.sin_cos();
        let ok = (!left || c > 0.0) && (!right || c < 0.0) && (!bottom || s > 0.0) && (!top || s < 0.0);
        if ok {
            return SpeedVector::new(v, theta);
        }
    }
}

/// With probability `rho` a fresh random-walk vector, otherwise the current
/// one. The flag reports whether a new vector was drawn.
pub fn inertia_update<R: Rng + ?Sized>(
    current: &SpeedVector,
    limits: &KinematicLimits,
    rho: f64,
    rng: &mut R,
) -> (SpeedVector, bool) {
    if rng.random::<f64>() < rho {
        (random_walk_update(limits, rng), true)
    } else {
        (*current, false)
    }
}

/// Cartesian velocity components carried by a Gauss-Markov node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussMarkovState {
    pub vx: f64,
    pub vy: f64,
}

impl GaussMarkovState {
    /// Draws the components from the stationary distribution.
    pub fn stationary<R: Rng + ?Sized>(params: &GaussMarkovParams, rng: &mut R) -> Self {
        let wx: f64 = StandardNormal.sample(rng);
        let wy: f64 = StandardNormal.sample(rng);
        Self {
            vx: params.mean_mps[0] + params.sigma_mps[0] * wx,
            vy: params.mean_mps[1] + params.sigma_mps[1] * wy,
        }
    }

    /// Emitted vector: heading of the components, magnitude clamped into
    /// `[v_min, v_max]`.
    pub fn speed_vector(&self, limits: &KinematicLimits) -> SpeedVector {
        let v = self.vx.hypot(self.vy).clamp(limits.v_min, limits.v_max);
        let theta = if self.vx == 0.0 && self.vy == 0.0 {
            0.0
        } else {
            self.vy.atan2(self.vx)
        };
        SpeedVector::new(v, theta)
    }
}

/// One step of the exact discretization of the exponentially correlated
/// process: `v_i <- a v_i + (1 - a) mu_i + sigma_i sqrt(1 - a^2) w`.
pub fn gauss_markov_update<R: Rng + ?Sized>(
    state: &GaussMarkovState,
    params: &GaussMarkovParams,
    limits: &KinematicLimits,
    rng: &mut R,
) -> (GaussMarkovState, SpeedVector) {
    let alpha = (-params.beta * params.period_s).exp();
    let noise = (1.0 - alpha * alpha).max(0.0).sqrt();
    let mut step = |v: f64, mu: f64, sigma: f64| {
        let w: f64 = StandardNormal.sample(rng);
        alpha * v + (1.0 - alpha) * mu + sigma * noise * w
    };
    let vx = step(state.vx, params.mean_mps[0], params.sigma_mps[0]);
    let vy = step(state.vy, params.mean_mps[1], params.sigma_mps[1]);
    let next = GaussMarkovState { vx, vy };
    (next, next.speed_vector(limits))
}

/// Endpoint of one bounded-kinematics period. `dtheta` is kept unwrapped so
/// the heading can be swept continuously across the period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundlessDraw {
    pub v_end: f64,
    pub dtheta: f64,
}

pub fn boundless_draw<R: Rng + ?Sized>(
    v: f64,
    limits: &KinematicLimits,
    period_s: f64,
    floor: f64,
    rng: &mut R,
) -> BoundlessDraw {
    let dv_max = limits.a_max * period_s;
    let dth_max = limits.gamma_max * period_s;
    let dv = dv_max * (2.0 * rng.random::<f64>() - 1.0);
    let dtheta = dth_max * (2.0 * rng.random::<f64>() - 1.0);
    BoundlessDraw {
        v_end: clamp_speed_with_floor(v, dv, floor, limits.v_max),
        dtheta,
    }
}

/// `v' = min(max(v + dv, 0), v_max)`, `theta' = theta + dtheta` with
/// `dv ~ U[-a_max T, a_max T]`, `dtheta ~ U[-gamma_max T, gamma_max T]`.
pub fn boundless_update<R: Rng + ?Sized>(
    current: &SpeedVector,
    limits: &KinematicLimits,
    period_s: f64,
    rng: &mut R,
) -> SpeedVector {
    let d = boundless_draw(current.v, limits, period_s, 0.0, rng);
    SpeedVector::new(d.v_end, current.theta + d.dtheta)
}

/// Bounded-kinematics motion swept linearly across each update period.
///
/// Every `period` a new endpoint is drawn with [`boundless_draw`]; inside the
/// period the speed and heading move toward it at constant rate, so the
/// instantaneous acceleration and turn rate never exceed `a_max` and
/// `gamma_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundlessRamp {
    origin: f64,
    period: f64,
    index: u64,
    start_v: f64,
    start_theta: f64,
    end_v: f64,
    dtheta: f64,
    floor: f64,
}

impl BoundlessRamp {
    pub fn new<R: Rng + ?Sized>(
        t0: f64,
        initial: SpeedVector,
        period_s: f64,
        limits: &KinematicLimits,
        floor: f64,
        rng: &mut R,
    ) -> Self {
        let start_v = initial.v.max(floor).min(limits.v_max);
        let d = boundless_draw(start_v, limits, period_s, floor, rng);
        Self {
            origin: t0,
            period: period_s,
            index: 0,
            start_v,
            start_theta: initial.theta,
            end_v: d.v_end,
            dtheta: d.dtheta,
            floor,
        }
    }

    fn period_start(&self) -> f64 {
        self.origin + self.index as f64 * self.period
    }

    fn period_end(&self) -> f64 {
        self.origin + (self.index + 1) as f64 * self.period
    }

    /// Starts every period whose start time is not after `t`.
    pub fn roll_to<R: Rng + ?Sized>(&mut self, t: f64, limits: &KinematicLimits, rng: &mut R) {
        while self.period_end() <= t + time_eps(t) {
            self.start_v = self.end_v;
            self.start_theta = normalize_angle(self.start_theta + self.dtheta);
            self.index += 1;
            let d = boundless_draw(self.start_v, limits, self.period, self.floor, rng);
            self.end_v = d.v_end;
            self.dtheta = d.dtheta;
        }
    }

    pub fn at(&self, t: f64) -> SpeedVector {
        let f = ((t - self.period_start()) / self.period).clamp(0.0, 1.0);
        SpeedVector::new(
            self.start_v + (self.end_v - self.start_v) * f,
            self.start_theta + self.dtheta * f,
        )
    }

    /// Endpoint of the period in progress.
    pub fn target(&self) -> SpeedVector {
        SpeedVector::new(self.end_v, self.start_theta + self.dtheta)
    }

    pub(crate) fn mirror(&mut self, r: Reflection) {
        if r.flip_x != r.flip_y {
            self.dtheta = -self.dtheta;
        }
        self.start_theta = reflect_heading(self.start_theta, r);
    }
}

pub(crate) fn time_eps(t: f64) -> f64 {
    1e-9 * t.abs().max(1.0)
}

#[derive(Debug, Clone, PartialEq)]
enum MotionState {
    Timer {
        period: f64,
        origin: f64,
        index: u64,
        rule: TimerRule,
    },
    RandomWalkDistance {
        distance: f64,
        remaining: f64,
    },
    KoVaidya {
        mean_leg: f64,
        remaining: f64,
    },
    Waypoint {
        pause: f64,
        destination: Position,
        resume_at: Option<f64>,
    },
    Direction {
        pause: f64,
        cruise_v: f64,
        resume_at: Option<f64>,
    },
    Boundless(BoundlessRamp),
    Static,
}

#[derive(Debug, Clone, PartialEq)]
enum TimerRule {
    RandomWalk,
    Inertia { rho: f64 },
    GaussMarkov { params: GaussMarkovParams, comps: GaussMarkovState },
}

/// Per-node state machine for an individual model.
#[derive(Debug, Clone, PartialEq)]
pub struct IndividualMotion {
    state: MotionState,
    speed: SpeedVector,
    /// Time at which the node's position was last brought up to date.
    clock: f64,
}

impl IndividualMotion {
    /// Initializes the model at time `t0` with its first speed vector.
    /// `floor` is the lowest magnitude the bounded-kinematics model may reach.
    pub fn new<R: Rng + ?Sized>(
        params: &ModelParams,
        position: Position,
        t0: f64,
        playground: &Playground,
        limits: &KinematicLimits,
        floor: f64,
        rng: &mut R,
    ) -> Self {
        let (speed, state) = match *params {
            ModelParams::RandomWalk(RandomWalkTrigger::Timer { period_s }) => (
                random_walk_update(limits, rng),
                MotionState::Timer {
                    period: period_s,
                    origin: t0,
                    index: 1,
                    rule: TimerRule::RandomWalk,
                },
            ),
            ModelParams::RandomWalk(RandomWalkTrigger::Distance { distance_m }) => (
                random_walk_update(limits, rng),
                MotionState::RandomWalkDistance {
                    distance: distance_m,
                    remaining: distance_m,
                },
            ),
            ModelParams::KoVaidya { mean_leg_m } => {
                let s = NodeKinematicState {
                    position,
                    speed: SpeedVector::new(0.0, uniform_heading(rng)),
                    t_lu: t0,
                };
                let (speed, leg) = ko_vaidya_update(&s, limits, mean_leg_m, rng);
                (
                    speed,
                    MotionState::KoVaidya {
                        mean_leg: mean_leg_m,
                        remaining: leg,
                    },
                )
            }
            ModelParams::RandomWaypoint { pause_s } => {
                let wp = random_waypoint_update(playground, limits, pause_s, rng);
                (
                    heading_to(&position, &wp.destination, wp.v),
                    MotionState::Waypoint {
                        pause: pause_s,
                        destination: wp.destination,
                        resume_at: None,
                    },
                )
            }
            ModelParams::RandomDirection { pause_s } => {
                let v = limits.sample_speed(rng);
                (
                    SpeedVector::new(v, uniform_heading(rng)),
                    MotionState::Direction {
                        pause: pause_s,
                        cruise_v: v,
                        resume_at: None,
                    },
                )
            }
            ModelParams::Inertia { period_s, rho } => (
                random_walk_update(limits, rng),
                MotionState::Timer {
                    period: period_s,
                    origin: t0,
                    index: 1,
                    rule: TimerRule::Inertia { rho },
                },
            ),
            ModelParams::GaussMarkov(params) => {
                let comps = GaussMarkovState::stationary(&params, rng);
                (
                    comps.speed_vector(limits),
                    MotionState::Timer {
                        period: params.period_s,
                        origin: t0,
                        index: 1,
                        rule: TimerRule::GaussMarkov { params, comps },
                    },
                )
            }
            ModelParams::Boundless { period_s } => {
                let initial = random_walk_update(limits, rng);
                let ramp = BoundlessRamp::new(t0, initial, period_s, limits, floor, rng);
                (ramp.at(t0), MotionState::Boundless(ramp))
            }
            ModelParams::Static => (SpeedVector::default(), MotionState::Static),
        };
        Self {
            state,
            speed,
            clock: t0,
        }
    }

    /// Bounded-kinematics motion resuming from `initial` at `t0`.
    pub fn boundless_from<R: Rng + ?Sized>(
        initial: SpeedVector,
        t0: f64,
        period_s: f64,
        limits: &KinematicLimits,
        floor: f64,
        rng: &mut R,
    ) -> Self {
        let ramp = BoundlessRamp::new(t0, initial, period_s, limits, floor, rng);
        Self {
            speed: ramp.at(t0),
            state: MotionState::Boundless(ramp),
            clock: t0,
        }
    }

    pub fn speed(&self) -> SpeedVector {
        self.speed
    }

    /// Fires triggers due at epoch `t` and settles the speed vector used for
    /// the interval starting at `t`.
    pub fn prepare<R: Rng + ?Sized>(
        &mut self,
        position: &Position,
        t: f64,
        playground: &Playground,
        limits: &KinematicLimits,
        rng: &mut R,
    ) {
        self.clock = t;
        if let MotionState::Boundless(ramp) = &mut self.state {
            ramp.roll_to(t, limits, rng);
            self.speed = ramp.at(t);
            return;
        }
        for _ in 0..MAX_EVENTS_PER_STEP {
            match self.next_event(position, playground) {
                Some(e) if e <= t + time_eps(t) => self.fire(position, playground, limits, rng),
                _ => break,
            }
        }
    }

    /// Moves the node from `t0` to `t1`, firing triggers at their exact times.
    pub fn advance<R: Rng + ?Sized>(
        &mut self,
        mut pos: Position,
        t0: f64,
        t1: f64,
        playground: &Playground,
        limits: &KinematicLimits,
        rng: &mut R,
    ) -> Position {
        self.clock = t0;
        for _ in 0..MAX_EVENTS_PER_STEP {
            match self.next_event(&pos, playground) {
                Some(e) if e < t1 - time_eps(t1) => {
                    if e > self.clock {
                        pos = self.drift(pos, e - self.clock, playground);
                        self.clock = e;
                    }
                    self.fire(&pos, playground, limits, rng);
                }
                _ => break,
            }
        }
        if t1 > self.clock {
            pos = self.drift(pos, t1 - self.clock, playground);
        }
        self.clock = t1;
        pos
    }

    fn next_event(&self, pos: &Position, playground: &Playground) -> Option<f64> {
        match &self.state {
            MotionState::Timer {
                period, origin, index, ..
            } => Some(origin + *index as f64 * period),
            MotionState::RandomWalkDistance { remaining, .. } | MotionState::KoVaidya { remaining, .. } => {
                (self.speed.v > 0.0).then(|| self.clock + remaining / self.speed.v)
            }
            MotionState::Waypoint {
                destination, resume_at, ..
            } => match resume_at {
                Some(t) => Some(*t),
                None => (self.speed.v > 0.0).then(|| self.clock + pos.distance(destination) / self.speed.v),
            },
            MotionState::Direction { resume_at, .. } => match resume_at {
                Some(t) => Some(*t),
                None => time_to_wall(pos, &self.speed, playground).map(|dt| self.clock + dt),
            },
            MotionState::Boundless(_) | MotionState::Static => None,
        }
    }

    fn fire<R: Rng + ?Sized>(&mut self, pos: &Position, playground: &Playground, limits: &KinematicLimits, rng: &mut R) {
        let now = self.clock;
        let speed = self.speed;
        match &mut self.state {
            MotionState::Timer { index, rule, .. } => {
                *index += 1;
                self.speed = match rule {
                    TimerRule::RandomWalk => random_walk_update(limits, rng),
                    TimerRule::Inertia { rho } => inertia_update(&speed, limits, *rho, rng).0,
                    TimerRule::GaussMarkov { params, comps } => {
                        let (next, sv) = gauss_markov_update(comps, params, limits, rng);
                        *comps = next;
                        sv
                    }
                };
            }
            MotionState::RandomWalkDistance { distance, remaining } => {
                *remaining = *distance;
                self.speed = random_walk_update(limits, rng);
            }
            MotionState::KoVaidya { mean_leg, remaining } => {
                let s = NodeKinematicState {
                    position: *pos,
                    speed,
                    t_lu: now,
                };
                let (sv, leg) = ko_vaidya_update(&s, limits, *mean_leg, rng);
                *remaining = leg;
                self.speed = sv;
            }
            MotionState::Waypoint {
                pause,
                destination,
                resume_at,
            } => {
                if resume_at.is_none() && *pause > 0.0 {
                    // arrived; rest before drawing the next waypoint
                    *resume_at = Some(now + *pause);
                    self.speed = SpeedVector::new(0.0, speed.theta);
                } else {
                    *resume_at = None;
                    let wp = random_waypoint_update(playground, limits, *pause, rng);
                    *destination = wp.destination;
                    self.speed = heading_to(pos, destination, wp.v);
                }
            }
            MotionState::Direction {
                pause,
                cruise_v,
                resume_at,
            } => {
                if resume_at.is_none() && *pause > 0.0 {
                    *resume_at = Some(now + *pause);
                    self.speed = SpeedVector::new(0.0, speed.theta);
                } else {
                    *resume_at = None;
                    self.speed = random_direction_update(pos, *cruise_v, playground, rng);
                }
            }
            MotionState::Boundless(_) | MotionState::Static => {}
        }
    }

    fn drift(&mut self, pos: Position, dt: f64, playground: &Playground) -> Position {
        let travelled = self.speed.v * dt;
        if let MotionState::RandomWalkDistance { remaining, .. } | MotionState::KoVaidya { remaining, .. } =
            &mut self.state
        {
            *remaining = (*remaining - travelled).max(0.0);
        }
        let raw = advance_straight(pos, &self.speed, dt);
        let raw = match &self.state {
            // geometry-driven models stop exactly on their event point
            MotionState::Waypoint {
                destination,
                resume_at: None,
                ..
            } if pos.distance(destination) <= travelled * (1.0 + 1e-12) => *destination,
            MotionState::Direction { .. } => Position::new(
                raw.x.clamp(0.0, playground.width),
                raw.y.clamp(0.0, playground.height),
            ),
            _ => raw,
        };
        match playground.boundary {
            BoundaryPolicy::Torus => wrap_position(raw, playground),
            BoundaryPolicy::Reflect => {
                let (p, r) = reflect_position(raw, playground);
                if r != Reflection::default() {
                    self.speed.theta = reflect_heading(self.speed.theta, r);
                    match &mut self.state {
                        MotionState::Boundless(ramp) => ramp.mirror(r),
                        MotionState::Timer {
                            rule: TimerRule::GaussMarkov { comps, .. },
                            ..
                        } => {
                            if r.flip_x {
                                comps.vx = -comps.vx;
                            }
                            if r.flip_y {
                                comps.vy = -comps.vy;
                            }
                        }
                        _ => {}
                    }
                }
                p
            }
        }
    }
}

const MAX_EVENTS_PER_STEP: usize = 1_000_000;

fn time_to_wall(pos: &Position, speed: &SpeedVector, pg: &Playground) -> Option<f64> {
    if speed.v == 0.0 {
        return None;
    }
    let (vx, vy) = speed.components();
    let axis = |p: f64, v: f64, span: f64| {
        if v > 0.0 {
            (span - p) / v
        } else if v < 0.0 {
            -p / v
        } else {
            f64::INFINITY
        }
    };
    let t = axis(pos.x, vx, pg.width).min(axis(pos.y, vy, pg.height));
    t.is_finite().then_some(t.max(0.0))
}

fn heading_to(from: &Position, to: &Position, v: f64) -> SpeedVector {
    let dx = to.x - from.x;
    let dy = to.y - from.y;
    if dx == 0.0 && dy == 0.0 {
        SpeedVector::new(v, 0.0)
    } else {
        SpeedVector::new(v, dy.atan2(dx))
    }
}
