//! Group mobility policies: MoMo, RPGM and RVGM.
//!
//! MoMo binds group mates through a distance threshold `D_c`. A node whose
//! fraction of connected mates drops below `rho_min` leaves the free
//! bounded-kinematics motion and pursues its nearest unconnected mate at full
//! speed, turning no faster than `gamma_max`.
//!
//! RPGM re-places standard nodes uniformly around their leader at every
//! position update; RVGM perturbs a shared reference speed vector per node.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{angular_difference, normalize_angle, KinematicLimits, Metric, Position, SpeedVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroupError {
    #[error("group {0} has no members")]
    EmptyGroup(usize),
    #[error("leader {leader} is not a member of group {group}")]
    LeaderNotMember { group: usize, leader: usize },
    #[error("node {node} is not a member of group {group}")]
    NotAMember { group: usize, node: usize },
    #[error("node {0} must be forced but every mate is connected")]
    NoForcedTarget(usize),
    #[error("invalid group parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub group_id: usize,
    pub member_ids: Vec<usize>,
    pub leader_id: Option<usize>,
}

impl GroupSpec {
    pub fn new(group_id: usize, member_ids: Vec<usize>, leader_id: Option<usize>) -> Result<Self, GroupError> {
        let g = Self {
            group_id,
            member_ids,
            leader_id,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), GroupError> {
        if self.member_ids.is_empty() {
            return Err(GroupError::EmptyGroup(self.group_id));
        }
        if let Some(l) = self.leader_id {
            if !self.member_ids.contains(&l) {
                return Err(GroupError::LeaderNotMember {
                    group: self.group_id,
                    leader: l,
                });
            }
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.member_ids.len()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.member_ids.contains(&node)
    }

    /// The designated leader, or the first member.
    pub fn leader(&self) -> usize {
        self.leader_id.unwrap_or(self.member_ids[0])
    }
}

/// Consecutive groups with the given sizes; node ids are assigned in order
/// and the first member of each group leads it.
pub fn consecutive_groups(sizes: &[usize]) -> Vec<GroupSpec> {
    let mut next = 0;
    sizes
        .iter()
        .enumerate()
        .map(|(gid, &n)| {
            let members: Vec<usize> = (next..next + n).collect();
            next += n;
            GroupSpec {
                group_id: gid,
                leader_id: members.first().copied(),
                member_ids: members,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoMoParams {
    /// Connection threshold (m).
    pub d_c: f64,
    /// Grouping threshold on the fraction of connected mates.
    pub rho_min: f64,
    /// Period of the grouping-condition check (s).
    pub delta_u: f64,
}

impl MoMoParams {
    pub fn validate(&self) -> Result<(), GroupError> {
        if !(self.d_c > 0.0) {
            return Err(GroupError::InvalidParams(format!("d_c must be > 0, got {}", self.d_c)));
        }
        if !(0.0..=1.0).contains(&self.rho_min) {
            return Err(GroupError::InvalidParams(format!(
                "rho_min must be in [0, 1], got {}",
                self.rho_min
            )));
        }
        if !(self.delta_u > 0.0) {
            return Err(GroupError::InvalidParams(format!(
                "delta_u must be > 0, got {}",
                self.delta_u
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeMode {
    Free,
    Forced { target: usize },
}

/// Mates of `node` within `d_c` (inclusive), in member order.
pub fn momo_connected_set(
    node: usize,
    group: &GroupSpec,
    positions: &[Position],
    d_c: f64,
    metric: &Metric,
) -> Vec<usize> {
    let p = positions[node];
    group
        .member_ids
        .iter()
        .copied()
        .filter(|&j| j != node && metric.distance(&p, &positions[j]) <= d_c)
        .collect()
}

/// `N_c / (N - 1)`; a lone node counts as fully grouped.
pub fn momo_grouping_factor(connected_count: usize, group_size: usize) -> f64 {
    if group_size <= 1 {
        1.0
    } else {
        connected_count as f64 / (group_size - 1) as f64
    }
}

/// Grouping-condition check: Free when the grouping factor reaches
/// `rho_min`, otherwise Forced toward the nearest mate outside the connected
/// set (ties to the lowest id).
pub fn momo_check_and_set_mode(
    node: usize,
    group: &GroupSpec,
    positions: &[Position],
    params: &MoMoParams,
    metric: &Metric,
) -> Result<NodeMode, GroupError> {
    if !group.contains(node) {
        return Err(GroupError::NotAMember {
            group: group.group_id,
            node,
        });
    }
    let connected = momo_connected_set(node, group, positions, params.d_c, metric);
    let rho = momo_grouping_factor(connected.len(), group.size());
    if rho >= params.rho_min {
        return Ok(NodeMode::Free);
    }
    let p = positions[node];
    group
        .member_ids
        .iter()
        .copied()
        .filter(|&j| j != node && !connected.contains(&j))
        .map(|j| (metric.distance(&p, &positions[j]), j))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, target)| NodeMode::Forced { target })
        .ok_or(GroupError::NoForcedTarget(node))
}

/// Forced-mode vector: full speed, heading rotated toward the bearing of the
/// target by at most `gamma_max * t_lu` along the shorter way round.
pub fn momo_forced_speed_vector(
    position: &Position,
    current: &SpeedVector,
    target: &Position,
    limits: &KinematicLimits,
    t_lu: f64,
    metric: &Metric,
) -> SpeedVector {
    let (dx, dy) = metric.displacement(position, target);
    if dx == 0.0 && dy == 0.0 {
        return SpeedVector::new(limits.v_max, current.theta);
    }
    let bearing = dy.atan2(dx);
    let max_turn = limits.gamma_max * t_lu;
    let diff = angular_difference(current.theta, bearing);
    let theta = if diff.abs() <= max_turn {
        bearing
    } else {
        current.theta + max_turn.copysign(diff)
    };
    SpeedVector {
        v: limits.v_max,
        theta: normalize_angle(theta),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RpgmParams {
    pub d_max: f64,
    /// Re-placement period (s).
    pub delta_t: f64,
}

/// Uniform point over the disc of radius `d_max` around `center`.
pub fn uniform_in_disc<R: Rng + ?Sized>(center: &Position, radius: f64, rng: &mut R) -> Position {
    let r = radius * rng.random::<f64>().sqrt();
    let a = TAU * rng.random::<f64>();
    Position::new(center.x + r * a.cos(), center.y + r * a.sin())
}

/// New positions of the standard nodes of `group` around the leader.
pub fn rpgm_step<R: Rng + ?Sized>(
    group: &GroupSpec,
    leader_position: &Position,
    params: &RpgmParams,
    rng: &mut R,
) -> Vec<(usize, Position)> {
    let leader = group.leader();
    group
        .member_ids
        .iter()
        .copied()
        .filter(|&n| n != leader)
        .map(|n| (n, uniform_in_disc(leader_position, params.d_max, rng)))
        .collect()
}

/// Largest speed a standard node can exhibit between two updates:
/// `2 d_max / dt + v_leader`.
pub fn rpgm_speed_bound(d_max: f64, delta_t: f64, v_leader: f64) -> f64 {
    2.0 * d_max / delta_t + v_leader
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RvgmParams {
    pub sigma_v: f64,
    pub sigma_theta: f64,
    /// Reference re-draw period (s).
    pub period_s: f64,
    /// Mean of the leader magnitude; midpoint of the speed range when unset.
    pub leader_mean_speed: Option<f64>,
}

impl RvgmParams {
    pub fn validate(&self) -> Result<(), GroupError> {
        if !(self.sigma_v >= 0.0 && self.sigma_theta >= 0.0) {
            return Err(GroupError::InvalidParams("sigma_v and sigma_theta must be >= 0".into()));
        }
        if !(self.period_s > 0.0) {
            return Err(GroupError::InvalidParams(format!(
                "update_period_s must be > 0, got {}",
                self.period_s
            )));
        }
        Ok(())
    }
}

/// Gaussian truncated to `[lo, hi]` by rejection.
pub fn sample_truncated_normal<R: Rng + ?Sized>(mean: f64, sigma: f64, lo: f64, hi: f64, rng: &mut R) -> f64 {
    if sigma == 0.0 {
        return mean.clamp(lo, hi);
    }
    for _ in 0..10_000 {
        let z: f64 = StandardNormal.sample(rng);
        let x = mean + sigma * z;
        if (lo..=hi).contains(&x) {
            return x;
        }
    }
    mean.clamp(lo, hi)
}

/// Group reference vector: truncated-Gaussian magnitude, uniform heading.
pub fn rvgm_leader_reference<R: Rng + ?Sized>(params: &RvgmParams, limits: &KinematicLimits, rng: &mut R) -> SpeedVector {
    let mean = params
        .leader_mean_speed
        .unwrap_or(0.5 * (limits.v_min + limits.v_max));
    let v = sample_truncated_normal(mean, params.sigma_v, limits.v_min, limits.v_max, rng);
    SpeedVector::new(v, TAU * rng.random::<f64>())
}

/// A member's vector: the reference magnitude plus a truncated Gaussian
/// deviation, the reference heading plus a Gaussian deviation.
pub fn rvgm_node_velocity<R: Rng + ?Sized>(
    leader: &SpeedVector,
    params: &RvgmParams,
    limits: &KinematicLimits,
    rng: &mut R,
) -> SpeedVector {
    let v = sample_truncated_normal(leader.v, params.sigma_v, limits.v_min, limits.v_max, rng);
    let z: f64 = StandardNormal.sample(rng);
    SpeedVector::new(v, leader.theta + params.sigma_theta * z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupDynamics {
    #[default]
    Grouped,
    Individual,
}

impl GroupDynamics {
    pub fn toggled(self) -> Self {
        match self {
            GroupDynamics::Grouped => GroupDynamics::Individual,
            GroupDynamics::Individual => GroupDynamics::Grouped,
        }
    }
}

/// Network-wide grouping switch. In the individual phase MoMo runs with
/// `rho_min = 0` and every RPGM/RVGM node acts as a leader.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupRoles {
    groups: Vec<GroupSpec>,
    leader_of: Vec<usize>,
    dynamics: GroupDynamics,
}

impl GroupRoles {
    pub fn new(groups: &[GroupSpec]) -> Self {
        let n = groups.iter().flat_map(|g| g.member_ids.iter()).max().map_or(0, |m| m + 1);
        let mut leader_of = vec![usize::MAX; n];
        for g in groups {
            for &m in &g.member_ids {
                leader_of[m] = g.leader();
            }
        }
        Self {
            groups: groups.to_vec(),
            leader_of,
            dynamics: GroupDynamics::Grouped,
        }
    }

    pub fn set_group_dynamics(&mut self, mode: GroupDynamics) {
        self.dynamics = mode;
    }

    pub fn dynamics(&self) -> GroupDynamics {
        self.dynamics
    }

    pub fn groups(&self) -> &[GroupSpec] {
        &self.groups
    }

    /// Effective MoMo grouping threshold.
    pub fn rho_min(&self, configured: f64) -> f64 {
        match self.dynamics {
            GroupDynamics::Grouped => configured,
            GroupDynamics::Individual => 0.0,
        }
    }

    pub fn is_leader(&self, node: usize) -> bool {
        self.dynamics == GroupDynamics::Individual || self.leader_of[node] == node
    }

    /// The node whose reference `node` follows, if it is currently a
    /// standard node.
    pub fn reference_of(&self, node: usize) -> Option<usize> {
        (!self.is_leader(node)).then(|| self.leader_of[node])
    }
}
