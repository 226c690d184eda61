//! Geometry and kinematics primitives shared by every mobility model.
//!
//! Angles are stored in the canonical range `[-π, π)`. Positions live in a
//! playground spanning `[0, width] x [0, height]`.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance applied when comparing a speed against a bound (m/s).
pub const SPEED_TOLERANCE: f64 = 1e-9;
/// Absolute tolerance applied when comparing a rotation rate against a bound (rad/s).
pub const ROTATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("negative interpolation interval tau = {0}")]
    NegativeInterval(f64),
    #[error("invalid kinematic limits: {0}")]
    InvalidLimits(String),
    #[error("invalid playground: {0}")]
    InvalidPlayground(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Wraps an angle into `[-π, π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    if (-PI..PI).contains(&theta) {
        return theta;
    }
    let r = (theta + PI).rem_euclid(TAU) - PI;
    // rem_euclid can round up to TAU for tiny negative inputs
    if r >= PI {
        -PI
    } else {
        r
    }
}

/// Polar speed vector: magnitude `v` and heading `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpeedVector {
    pub v: f64,
    pub theta: f64,
}

impl SpeedVector {
    /// Builds a vector with the heading normalized. Negative magnitudes are
    /// folded into the heading.
    pub fn new(v: f64, theta: f64) -> Self {
        if v < 0.0 {
            Self {
                v: -v,
                theta: normalize_angle(theta + PI),
            }
        } else {
            Self {
                v,
                theta: normalize_angle(theta),
            }
        }
    }

    pub fn from_components(vx: f64, vy: f64) -> Self {
        Self::new(vx.hypot(vy), vy.atan2(vx))
    }

    pub fn components(&self) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (self.v * c, self.v * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicLimits {
    pub v_max: f64,
    pub v_min: f64,
    pub a_max: f64,
    pub gamma_max: f64,
}

impl KinematicLimits {
    pub fn new(v_max: f64, v_min: f64, a_max: f64, gamma_max: f64) -> Result<Self, KinematicsError> {
        let limits = Self {
            v_max,
            v_min,
            a_max,
            gamma_max,
        };
        limits.validate()?;
        Ok(limits)
    }

    /// Bounds used throughout the model comparison: 5 m/s, 0.001 m/s,
    /// 5 m/s², π/2 rad/s.
    pub fn reference() -> Self {
        Self {
            v_max: 5.0,
            v_min: 0.001,
            a_max: 5.0,
            gamma_max: PI / 2.0,
        }
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        let all_finite = [self.v_max, self.v_min, self.a_max, self.gamma_max]
            .iter()
            .all(|x| x.is_finite());
        if !all_finite {
            return Err(KinematicsError::InvalidLimits("non-finite bound".into()));
        }
        if !(0.0 <= self.v_min && self.v_min < self.v_max) {
            return Err(KinematicsError::InvalidLimits(format!(
                "require 0 <= v_min < v_max, got v_min={} v_max={}",
                self.v_min, self.v_max
            )));
        }
        if self.a_max <= 0.0 {
            return Err(KinematicsError::InvalidLimits(format!("a_max must be > 0, got {}", self.a_max)));
        }
        if self.gamma_max <= 0.0 {
            return Err(KinematicsError::InvalidLimits(format!(
                "gamma_max must be > 0, got {}",
                self.gamma_max
            )));
        }
        Ok(())
    }

    /// Draws a magnitude uniformly from `[v_min, v_max]`.
    pub fn sample_speed<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.v_min + (self.v_max - self.v_min) * rng.random::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeKinematicState {
    pub position: Position,
    pub speed: SpeedVector,
    /// Time of the last speed-vector update.
    pub t_lu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    #[default]
    Reflect,
    Torus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Playground {
    pub width: f64,
    pub height: f64,
    pub boundary: BoundaryPolicy,
}

impl Playground {
    pub fn new(width: f64, height: f64, boundary: BoundaryPolicy) -> Result<Self, KinematicsError> {
        let pg = Self {
            width,
            height,
            boundary,
        };
        pg.validate()?;
        Ok(pg)
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        if !(self.width > 0.0 && self.width.is_finite() && self.height > 0.0 && self.height.is_finite()) {
            return Err(KinematicsError::InvalidPlayground(format!(
                "dimensions must be positive and finite, got {}x{}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn contains(&self, p: &Position) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Position {
        Position::new(self.width * rng.random::<f64>(), self.height * rng.random::<f64>())
    }

    pub fn metric(&self) -> Metric {
        match self.boundary {
            BoundaryPolicy::Reflect => Metric::Euclidean,
            BoundaryPolicy::Torus => Metric::Torus {
                width: self.width,
                height: self.height,
            },
        }
    }

    /// Vector from `a` to `b`; minimum-image on a torus.
    pub fn displacement(&self, a: &Position, b: &Position) -> (f64, f64) {
        self.metric().displacement(a, b)
    }

    pub fn distance(&self, a: &Position, b: &Position) -> f64 {
        self.metric().distance(a, b)
    }
}

/// Distance geometry of a space: plain Euclidean, or minimum-image on a torus.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Metric {
    #[default]
    Euclidean,
    Torus { width: f64, height: f64 },
}

impl Metric {
    pub fn displacement(&self, a: &Position, b: &Position) -> (f64, f64) {
        let dx = b.x - a.x;
        let dy = b.y - a.y;
        match *self {
            Metric::Euclidean => (dx, dy),
            Metric::Torus { width, height } => (min_image(dx, width), min_image(dy, height)),
        }
    }

    pub fn distance(&self, a: &Position, b: &Position) -> f64 {
        let (dx, dy) = self.displacement(a, b);
        dx.hypot(dy)
    }
}

impl From<&Playground> for Metric {
    fn from(pg: &Playground) -> Self {
        pg.metric()
    }
}

fn min_image(d: f64, span: f64) -> f64 {
    let half = 0.5 * span;
    if d > half || d < -half {
        d - span * (d / span).round()
    } else {
        d
    }
}

fn wrap(x: f64, span: f64) -> f64 {
    let r = x.rem_euclid(span);
    if r >= span {
        0.0
    } else {
        r
    }
}

/// Position at `t_lu + tau` assuming the speed vector is unchanged.
/// The boundary policy is not applied.
pub fn interpolate_position(state: &NodeKinematicState, tau: f64) -> Result<Position, KinematicsError> {
    if tau < 0.0 || tau.is_nan() {
        return Err(KinematicsError::NegativeInterval(tau));
    }
    Ok(advance_straight(state.position, &state.speed, tau))
}

pub(crate) fn advance_straight(p: Position, s: &SpeedVector, tau: f64) -> Position {
    let (vx, vy) = s.components();
    Position::new(p.x + vx * tau, p.y + vy * tau)
}

/// Signed smallest rotation in `(-π, π]` taking `from` to `to`.
pub fn angular_difference(from: f64, to: f64) -> f64 {
    let d = normalize_angle(to - from);
    if d == -PI {
        PI
    } else {
        d
    }
}

/// Which axes were mirrored while folding a position back into a reflecting
/// playground. An odd count along an axis flips that velocity component.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct Reflection {
    pub flip_x: bool,
    pub flip_y: bool,
}

fn fold(mut c: f64, span: f64) -> (f64, bool) {
    let mut flipped = false;
    // bounded: each pass removes at least one span of overshoot
    for _ in 0..64 {
        if c < 0.0 {
            c = -c;
            flipped = !flipped;
        } else if c > span {
            c = 2.0 * span - c;
            flipped = !flipped;
        } else {
            return (c, flipped);
        }
    }
    (c.clamp(0.0, span), flipped)
}

pub(crate) fn reflect_position(pos: Position, pg: &Playground) -> (Position, Reflection) {
    let (x, flip_x) = fold(pos.x, pg.width);
    let (y, flip_y) = fold(pos.y, pg.height);
    (Position::new(x, y), Reflection { flip_x, flip_y })
}

pub(crate) fn reflect_heading(theta: f64, r: Reflection) -> f64 {
    let mut t = theta;
    if r.flip_x {
        t = PI - t;
    }
    if r.flip_y {
        t = -t;
    }
    normalize_angle(t)
}

pub(crate) fn wrap_position(pos: Position, pg: &Playground) -> Position {
    Position::new(wrap(pos.x, pg.width), wrap(pos.y, pg.height))
}

/// Brings a position that may have left the playground back inside.
///
/// Reflect mirrors the offending coordinate about the violated edge and
/// negates the matching velocity component; torus wraps coordinates and
/// keeps the speed vector.
pub fn apply_boundary(pos: Position, speed: SpeedVector, pg: &Playground) -> (Position, SpeedVector) {
    match pg.boundary {
        BoundaryPolicy::Reflect => {
            let (p, r) = reflect_position(pos, pg);
            if r == Reflection::default() {
                (p, speed)
            } else {
                (
                    p,
                    SpeedVector {
                        v: speed.v,
                        theta: reflect_heading(speed.theta, r),
                    },
                )
            }
        }
        BoundaryPolicy::Torus => (wrap_position(pos, pg), speed),
    }
}

/// `min(max(v + dv, 0), v_max)`.
pub fn clamp_speed(v: f64, dv: f64, limits: &KinematicLimits) -> f64 {
    clamp_speed_with_floor(v, dv, 0.0, limits.v_max)
}

pub fn clamp_speed_with_floor(v: f64, dv: f64, floor: f64, v_max: f64) -> f64 {
    (v + dv).max(floor).min(v_max)
}
