//! Distributed-MIMO relay selection under candidate mobility.
//!
//! `K` candidate relays move around a static transmitter at the origin. At
//! each selection epoch the `L` candidates with the largest summed channel
//! gain toward an `N`-node receive array are chosen; the experiment then
//! tracks how many of them remain among the best `L` as time elapses, and
//! the rate the stale selection still achieves.

use std::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::group::{momo_forced_speed_vector, uniform_in_disc};
use crate::individual::{random_walk_update, time_eps, IndividualMotion, ModelParams, RandomWalkTrigger};
use crate::kinematics::{advance_straight, BoundaryPolicy, KinematicLimits, Metric, Playground, Position, SpeedVector};
use crate::metrics::{DensityGrid, Window};
use crate::parallel::{map_indexed, Execution};
use crate::rng::{derive_seed, RngStream, SimRng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DmimoError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    /// Random walk inside the `s x s` square, reflecting at its edges.
    Rw,
    /// Uniform re-placement within `s/2` of a static reference at TX.
    Rpgm1,
    /// Uniform re-placement within `s/4` of a reference that random-walks
    /// inside the disc of radius `s/4` around TX.
    Rpgm2,
    /// Each candidate grouped with TX alone, `rho_min = 1`, `D_c = s/2`.
    MoMo,
}

impl Flavor {
    pub const ALL: [Flavor; 4] = [Flavor::Rw, Flavor::Rpgm1, Flavor::Rpgm2, Flavor::MoMo];

    pub fn name(&self) -> &'static str {
        match self {
            Flavor::Rw => "rw",
            Flavor::Rpgm1 => "rpgm1",
            Flavor::Rpgm2 => "rpgm2",
            Flavor::MoMo => "momo",
        }
    }

    fn index(&self) -> u64 {
        match self {
            Flavor::Rw => 0,
            Flavor::Rpgm1 => 1,
            Flavor::Rpgm2 => 2,
            Flavor::MoMo => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fading {
    #[default]
    None,
    /// Unit-mean exponential power gain, redrawn at every evaluation.
    Rayleigh,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    pub pathloss_exponent: f64,
    pub fading: Fading,
    /// Link SNR at 1 m (dB).
    pub snr_ref_db: f64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            pathloss_exponent: 2.0,
            fading: Fading::None,
            snr_ref_db: 40.0,
        }
    }
}

impl ChannelModel {
    pub fn snr_linear(&self) -> f64 {
        10f64.powf(self.snr_ref_db / 10.0)
    }
}

/// Gains are capped at this distance (m).
pub const MIN_GAIN_DISTANCE: f64 = 0.1;

/// Path-loss gain `max(d, 0.1)^-exponent`, times a unit-mean exponential
/// draw when fading is enabled.
pub fn channel_gain<R: Rng + ?Sized>(a: &Position, b: &Position, model: &ChannelModel, rng: &mut R) -> f64 {
    let g = a.distance(b).max(MIN_GAIN_DISTANCE).powf(-model.pathloss_exponent);
    match model.fading {
        Fading::None => g,
        Fading::Rayleigh => {
            let w: f64 = Exp1.sample(rng);
            g * w
        }
    }
}

/// `gains[j][i]`: candidate `j` toward receive node `i`.
pub fn gain_matrix<R: Rng + ?Sized>(
    candidates: &[Position],
    rx_array: &[Position],
    model: &ChannelModel,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    candidates
        .iter()
        .map(|c| rx_array.iter().map(|r| channel_gain(c, r, model, rng)).collect())
        .collect()
}

/// The `l` candidates with the largest summed gain, ties to the lowest id,
/// returned in ascending id order.
pub fn select_relays_from_gains(gains: &[Vec<f64>], l: usize) -> Vec<usize> {
    let scores: Vec<f64> = gains.iter().map(|row| row.iter().sum()).collect();
    let mut ids: Vec<usize> = (0..gains.len()).collect();
    ids.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    ids.truncate(l);
    ids.sort_unstable();
    ids
}

pub fn select_relays<R: Rng + ?Sized>(
    candidates: &[Position],
    rx_array: &[Position],
    l: usize,
    model: &ChannelModel,
    rng: &mut R,
) -> Vec<usize> {
    select_relays_from_gains(&gain_matrix(candidates, rx_array, model, rng), l)
}

/// Size of the intersection of two id sets.
pub fn surviving_relay_count(selected_at_0: &[usize], best_at_t: &[usize]) -> usize {
    selected_at_0.iter().filter(|i| best_at_t.contains(i)).count()
}

/// Mean overlap of two independent uniformly drawn `l`-subsets of `k`
/// items: `l^2 / k`.
pub fn expected_random_overlap(l: usize, k: usize) -> f64 {
    (l * l) as f64 / k as f64
}

/// `log2 det(I_N + snr/L * H H^T)` with `H[i][j] = sqrt(gain of relay j
/// toward receive node i)`, power split evenly over the `L` relays.
pub fn achievable_rate_from_gains(gains: &[Vec<f64>], selected: &[usize], snr: f64) -> f64 {
    let n = gains.first().map_or(0, Vec::len);
    let l = selected.len();
    if l == 0 || n == 0 || snr == 0.0 {
        return 0.0;
    }
    let h = DMatrix::from_fn(n, l, |i, j| gains[selected[j]][i].sqrt());
    let m = DMatrix::<f64>::identity(n, n) + (&h * h.transpose()) * (snr / l as f64);
    let chol = m.cholesky().expect("identity plus a Gram matrix is positive definite");
    2.0 * chol.l().diagonal().iter().map(|d| d.log2()).sum::<f64>()
}

pub fn achievable_rate<R: Rng + ?Sized>(
    candidates: &[Position],
    selected: &[usize],
    rx_array: &[Position],
    model: &ChannelModel,
    rng: &mut R,
) -> f64 {
    let gains = gain_matrix(candidates, rx_array, model, rng);
    achievable_rate_from_gains(&gains, selected, model.snr_linear())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmimoScenario {
    pub d_txrx_m: f64,
    pub k: usize,
    pub n_rx: usize,
    pub l: usize,
    pub s_m: f64,
    pub delta_t_s: f64,
    pub rx_radius_m: f64,
    /// Speeds compared by the experiment.
    pub v_max_mps: Vec<f64>,
    pub v_min_mps: f64,
    pub a_max_mps2: f64,
    pub gamma_max_radps: f64,
    /// Update period of the random-walk and bounded-kinematics motion.
    pub update_period_s: f64,
    pub channel: ChannelModel,
    pub warmup_s: f64,
    pub selection_spacing_s: f64,
    /// Total selections per curve, split over `replicas` independent runs.
    pub selections: usize,
    pub replicas: usize,
    /// Elapsed-time grid: `0, step, 2 step, ..., max`.
    pub t_el_max_s: f64,
    pub histogram_side_m: f64,
    pub histogram_resolution_m: f64,
    pub seed: u64,
}

impl Default for DmimoScenario {
    fn default() -> Self {
        Self {
            d_txrx_m: 30.0,
            k: 20,
            n_rx: 8,
            l: 12,
            s_m: 15.0,
            delta_t_s: 0.1,
            rx_radius_m: 1.0,
            v_max_mps: vec![1.0, 2.0],
            v_min_mps: 0.001,
            a_max_mps2: 5.0,
            gamma_max_radps: FRAC_PI_2,
            update_period_s: 5.0,
            channel: ChannelModel::default(),
            warmup_s: 20.0,
            selection_spacing_s: 10.0,
            selections: 1000,
            replicas: 8,
            t_el_max_s: 10.0,
            histogram_side_m: 20.0,
            histogram_resolution_m: 0.1,
            seed: 1,
        }
    }
}

impl DmimoScenario {
    pub fn validate(&self) -> Result<(), DmimoError> {
        let bad = |m: String| Err(DmimoError::InvalidScenario(m));
        if self.k == 0 || self.n_rx == 0 || self.l == 0 {
            return bad("k, n_rx and l must be positive".into());
        }
        if self.l >= self.k {
            return bad(format!("l ({}) must be smaller than k ({})", self.l, self.k));
        }
        for (name, x) in [
            ("s_m", self.s_m),
            ("delta_t_s", self.delta_t_s),
            ("d_txrx_m", self.d_txrx_m),
            ("a_max_mps2", self.a_max_mps2),
            ("gamma_max_radps", self.gamma_max_radps),
            ("update_period_s", self.update_period_s),
            ("selection_spacing_s", self.selection_spacing_s),
            ("histogram_side_m", self.histogram_side_m),
            ("histogram_resolution_m", self.histogram_resolution_m),
            ("pathloss_exponent", self.channel.pathloss_exponent),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                return bad(format!("{name} must be > 0, got {x}"));
            }
        }
        for (name, x) in [
            ("rx_radius_m", self.rx_radius_m),
            ("warmup_s", self.warmup_s),
            ("t_el_max_s", self.t_el_max_s),
        ] {
            if !(x >= 0.0 && x.is_finite()) {
                return bad(format!("{name} must be >= 0, got {x}"));
            }
        }
        if self.v_max_mps.is_empty() || self.v_max_mps.iter().any(|&v| !(v > self.v_min_mps) || !v.is_finite()) {
            return bad("every v_max_mps must exceed v_min_mps".into());
        }
        if !(self.v_min_mps >= 0.0) {
            return bad("v_min_mps must be >= 0".into());
        }
        if self.selections == 0 || self.replicas == 0 {
            return bad("selections and replicas must be positive".into());
        }
        if !self.channel.snr_ref_db.is_finite() {
            return bad("snr_ref_db must be finite".into());
        }
        Ok(())
    }

    pub fn limits(&self, v_max: f64) -> KinematicLimits {
        KinematicLimits {
            v_max,
            v_min: self.v_min_mps,
            a_max: self.a_max_mps2,
            gamma_max: self.gamma_max_radps,
        }
    }

    pub fn tx(&self) -> Position {
        Position::new(0.0, 0.0)
    }

    pub fn rx(&self) -> Position {
        Position::new(self.d_txrx_m, 0.0)
    }

    /// Steps spanned by `seconds` on the position-update grid.
    pub fn steps_for(&self, seconds: f64) -> u64 {
        (seconds / self.delta_t_s + 1e-9).floor() as u64
    }

    pub fn t_el_grid(&self) -> Vec<f64> {
        (0..=self.steps_for(self.t_el_max_s))
            .map(|k| k as f64 * self.delta_t_s)
            .collect()
    }

    /// Largest distance from TX a MoMo candidate can reach: the binding
    /// radius, one unchecked step outward, then a turn at the rotation limit
    /// that keeps moving outward for up to one turning radius plus a step.
    pub fn momo_excursion_bound(&self, v_max: f64) -> f64 {
        self.s_m / 2.0 + v_max / self.gamma_max_radps + 2.0 * self.delta_t_s * v_max
    }
}

/// Candidate receive array: `n` static nodes uniform in a disc around RX.
pub fn receive_array<R: Rng + ?Sized>(scenario: &DmimoScenario, rng: &mut R) -> Vec<Position> {
    (0..scenario.n_rx)
        .map(|_| uniform_in_disc(&scenario.rx(), scenario.rx_radius_m, rng))
        .collect()
}

/// Reflects a point that left the disc of radius `r` around the origin,
/// mirroring the heading about the normal at the crossing.
fn move_in_disc(mut pos: Position, mut speed: SpeedVector, mut dt: f64, r: f64) -> (Position, SpeedVector) {
    for _ in 0..64 {
        let next = advance_straight(pos, &speed, dt);
        if next.x.hypot(next.y) <= r || speed.v == 0.0 {
            return (next, speed);
        }
        // solve |pos + u t| = r for the exit time
        let (ux, uy) = speed.components();
        let a = ux * ux + uy * uy;
        let b = 2.0 * (pos.x * ux + pos.y * uy);
        let c = pos.x * pos.x + pos.y * pos.y - r * r;
        let disc = (b * b - 4.0 * a * c).max(0.0);
        let t_hit = ((-b + disc.sqrt()) / (2.0 * a)).clamp(0.0, dt);
        let hit = advance_straight(pos, &speed, t_hit);
        let scale = r / hit.x.hypot(hit.y);
        pos = Position::new(hit.x * scale, hit.y * scale);
        let normal = pos.y.atan2(pos.x);
        speed = SpeedVector::new(speed.v, 2.0 * normal + std::f64::consts::PI - speed.theta);
        dt -= t_hit;
    }
    (pos, speed)
}

#[derive(Debug, Clone)]
enum Movers {
    Rw {
        local: Playground,
        nodes: Vec<(Position, IndividualMotion)>,
    },
    Rpgm1,
    Rpgm2 {
        reference: Position,
        speed: SpeedVector,
        next_draw: u64,
    },
    MoMo {
        local: Playground,
        nodes: Vec<MoMoCandidate>,
    },
}

#[derive(Debug, Clone)]
struct MoMoCandidate {
    pos: Position,
    speed: SpeedVector,
    free: Option<IndividualMotion>,
}

/// Offset of the large playground the MoMo candidates roam in; never
/// reached by a bound candidate.
const MOMO_FRAME: f64 = 5000.0;

/// Candidate positions of one flavor advancing on the update grid.
#[derive(Debug, Clone)]
pub struct CandidateMotion {
    flavor: Flavor,
    scenario: DmimoScenario,
    limits: KinematicLimits,
    movers: Movers,
    positions: Vec<Position>,
    step: u64,
    rngs: Vec<SimRng>,
    shared: SimRng,
}

impl CandidateMotion {
    /// Initializes the flavor with candidates uniform over its constraint
    /// region.
    pub fn new(flavor: Flavor, scenario: &DmimoScenario, v_max: f64, seed: u64) -> Self {
        let limits = scenario.limits(v_max);
        let mut rngs: Vec<SimRng> = (0..scenario.k).map(|i| RngStream::new(seed, i as u64).rng()).collect();
        let mut shared = RngStream::new(seed, 1_000_000).rng();
        let s = scenario.s_m;
        let tx = scenario.tx();
        let floor = scenario.v_min_mps;
        let (movers, positions) = match flavor {
            Flavor::Rw => {
                let local = Playground {
                    width: s,
                    height: s,
                    boundary: BoundaryPolicy::Reflect,
                };
                let params = ModelParams::RandomWalk(RandomWalkTrigger::Timer {
                    period_s: scenario.update_period_s,
                });
                let nodes: Vec<(Position, IndividualMotion)> = rngs
                    .iter_mut()
                    .map(|rng| {
                        let p = local.sample_uniform(rng);
                        (p, IndividualMotion::new(&params, p, 0.0, &local, &limits, floor, rng))
                    })
                    .collect();
                let pos = nodes.iter().map(|(p, _)| Position::new(p.x - s / 2.0, p.y - s / 2.0)).collect();
                (Movers::Rw { local, nodes }, pos)
            }
            Flavor::Rpgm1 => {
                let pos = (0..scenario.k).map(|_| uniform_in_disc(&tx, s / 2.0, &mut shared)).collect();
                (Movers::Rpgm1, pos)
            }
            Flavor::Rpgm2 => {
                let reference = uniform_in_disc(&tx, s / 4.0, &mut shared);
                let speed = random_walk_update(&limits, &mut shared);
                let pos = (0..scenario.k)
                    .map(|_| uniform_in_disc(&reference, s / 4.0, &mut shared))
                    .collect();
                (
                    Movers::Rpgm2 {
                        reference,
                        speed,
                        next_draw: 1,
                    },
                    pos,
                )
            }
            Flavor::MoMo => {
                let local = Playground {
                    width: 2.0 * MOMO_FRAME,
                    height: 2.0 * MOMO_FRAME,
                    boundary: BoundaryPolicy::Reflect,
                };
                let params = ModelParams::Boundless {
                    period_s: scenario.update_period_s,
                };
                let nodes: Vec<MoMoCandidate> = rngs
                    .iter_mut()
                    .map(|rng| {
                        let p = uniform_in_disc(&tx, s / 2.0, rng);
                        let lp = Position::new(p.x + MOMO_FRAME, p.y + MOMO_FRAME);
                        let m = IndividualMotion::new(&params, lp, 0.0, &local, &limits, floor, rng);
                        MoMoCandidate {
                            pos: p,
                            speed: m.speed(),
                            free: Some(m),
                        }
                    })
                    .collect();
                let pos = nodes.iter().map(|n| n.pos).collect();
                (Movers::MoMo { local, nodes }, pos)
            }
        };
        let mut cm = Self {
            flavor,
            scenario: scenario.clone(),
            limits,
            movers,
            positions,
            step: 0,
            rngs,
            shared,
        };
        cm.settle();
        cm
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.scenario.delta_t_s
    }

    /// Settles speed vectors and modes at the current epoch.
    fn settle(&mut self) {
        let t = self.time();
        let sc = &self.scenario;
        let limits = &self.limits;
        match &mut self.movers {
            Movers::MoMo { local, nodes } => {
                let tx = sc.tx();
                for (i, nd) in nodes.iter_mut().enumerate() {
                    let rng = &mut self.rngs[i];
                    // N = 2, so the grouping factor is 1 when TX is within
                    // D_c and 0 otherwise; rho_min = 1 forces the latter
                    if nd.pos.distance(&tx) <= sc.s_m / 2.0 {
                        let lp = Position::new(nd.pos.x + MOMO_FRAME, nd.pos.y + MOMO_FRAME);
                        let m = nd.free.get_or_insert_with(|| {
                            IndividualMotion::boundless_from(nd.speed, t, sc.update_period_s, limits, sc.v_min_mps, rng)
                        });
                        m.prepare(&lp, t, local, limits, rng);
                        nd.speed = m.speed();
                    } else {
                        nd.free = None;
                        nd.speed = momo_forced_speed_vector(&nd.pos, &nd.speed, &tx, limits, sc.delta_t_s, &Metric::Euclidean);
                    }
                }
            }
            Movers::Rw { local, nodes } => {
                for (i, (p, m)) in nodes.iter_mut().enumerate() {
                    m.prepare(p, t, local, limits, &mut self.rngs[i]);
                }
            }
            Movers::Rpgm2 { speed, next_draw, .. } => {
                while *next_draw as f64 * sc.update_period_s <= t + time_eps(t) {
                    *speed = random_walk_update(limits, &mut self.shared);
                    *next_draw += 1;
                }
            }
            Movers::Rpgm1 => {}
        }
    }

    /// Advances one update period.
    pub fn step(&mut self) {
        let t0 = self.time();
        let t1 = (self.step + 1) as f64 * self.scenario.delta_t_s;
        let sc = &self.scenario;
        let s = sc.s_m;
        let limits = &self.limits;
        match &mut self.movers {
            Movers::Rw { local, nodes } => {
                for (i, (p, m)) in nodes.iter_mut().enumerate() {
                    *p = m.advance(*p, t0, t1, local, limits, &mut self.rngs[i]);
                    self.positions[i] = Position::new(p.x - s / 2.0, p.y - s / 2.0);
                }
            }
            Movers::Rpgm1 => {
                for p in &mut self.positions {
                    *p = uniform_in_disc(&sc.tx(), s / 2.0, &mut self.shared);
                }
            }
            Movers::Rpgm2 {
                reference, speed, next_draw,
            } => {
                let mut clock = t0;
                let r = s / 4.0;
                loop {
                    let e = *next_draw as f64 * sc.update_period_s;
                    if e >= t1 - time_eps(t1) {
                        break;
                    }
                    (*reference, *speed) = move_in_disc(*reference, *speed, e - clock, r);
                    *speed = SpeedVector::new(limits.sample_speed(&mut self.shared), TAU * self.shared.random::<f64>());
                    *next_draw += 1;
                    clock = e;
                }
                (*reference, *speed) = move_in_disc(*reference, *speed, t1 - clock, r);
                for p in &mut self.positions {
                    *p = uniform_in_disc(reference, r, &mut self.shared);
                }
            }
            Movers::MoMo { local, nodes } => {
                for (i, nd) in nodes.iter_mut().enumerate() {
                    nd.pos = match nd.free.as_mut() {
                        Some(m) => {
                            let lp = Position::new(nd.pos.x + MOMO_FRAME, nd.pos.y + MOMO_FRAME);
                            let np = m.advance(lp, t0, t1, local, limits, &mut self.rngs[i]);
                            nd.speed = m.speed();
                            Position::new(np.x - MOMO_FRAME, np.y - MOMO_FRAME)
                        }
                        None => advance_straight(nd.pos, &nd.speed, t1 - t0),
                    };
                    self.positions[i] = nd.pos;
                }
            }
        }
        self.step += 1;
        self.settle();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayCurves {
    pub flavor: Flavor,
    pub v_max_mps: f64,
    pub t_el_s: Vec<f64>,
    pub mean_surviving: Vec<f64>,
    pub mean_rate_bps_hz: Vec<f64>,
    pub selections: usize,
    /// Largest candidate distance from TX seen over the run.
    pub max_distance_from_tx_m: f64,
    /// Largest `max(|x|, |y|)` of any candidate relative to TX.
    pub max_abs_coordinate_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmimoResults {
    pub curves: Vec<DecayCurves>,
    /// Candidate occupancy at the first configured speed, per flavor.
    pub histograms: Vec<(Flavor, DensityGrid)>,
}

struct ReplicaOutput {
    surviving: Vec<f64>,
    rate: Vec<f64>,
    selections: usize,
    max_dist: f64,
    max_abs: f64,
    histogram: DensityGrid,
}

fn run_replica(
    sc: &DmimoScenario,
    flavor: Flavor,
    v_max: f64,
    replica: usize,
    selections: usize,
    window: Window,
) -> ReplicaOutput {
    let seed = derive_seed(sc.seed, &[flavor.index(), replica as u64]);
    let mut motion = CandidateMotion::new(flavor, sc, v_max, seed);
    let mut aux = RngStream::new(seed, 2_000_000).rng();
    let rx = receive_array(sc, &mut aux);
    let snr = sc.channel.snr_linear();
    let grid_len = sc.steps_for(sc.t_el_max_s) as usize + 1;
    let spacing = sc.steps_for(sc.selection_spacing_s).max(1);
    let warmup = sc.steps_for(sc.warmup_s);
    let last_selection = warmup + (selections as u64 - 1) * spacing;
    let end = last_selection + grid_len as u64 - 1;
    let mut out = ReplicaOutput {
        surviving: vec![0.0; grid_len],
        rate: vec![0.0; grid_len],
        selections,
        max_dist: 0.0,
        max_abs: 0.0,
        histogram: DensityGrid::new(window, sc.histogram_resolution_m).expect("validated window"),
    };
    // selections still inside their elapsed-time horizon: (start step, set)
    let mut open: Vec<(u64, Vec<usize>)> = Vec::new();
    let tx = sc.tx();
    for n in 0..=end {
        if n > 0 {
            motion.step();
        }
        let pos = motion.positions();
        for p in pos {
            out.max_dist = out.max_dist.max(p.distance(&tx));
            out.max_abs = out.max_abs.max(p.x.abs().max(p.y.abs()));
        }
        if n < warmup {
            continue;
        }
        for p in pos {
            out.histogram.add(p);
        }
        let gains = gain_matrix(pos, &rx, &sc.channel, &mut aux);
        let best = select_relays_from_gains(&gains, sc.l);
        if n <= last_selection && (n - warmup).is_multiple_of(spacing) {
            open.push((n, best.clone()));
        }
        open.retain(|(start, chosen)| {
            let k = (n - start) as usize;
            out.surviving[k] += surviving_relay_count(chosen, &best) as f64;
            out.rate[k] += achievable_rate_from_gains(&gains, chosen, snr);
            k + 1 < grid_len
        });
    }
    out
}

/// Runs every flavor at every configured speed; selections of one curve are
/// split over independent replicas executed with `exec`.
pub fn run_dmimo_experiment(sc: &DmimoScenario, exec: Execution) -> Result<DmimoResults, DmimoError> {
    sc.validate()?;
    let window = Window::centered(sc.tx(), sc.histogram_side_m);
    DensityGrid::new(window, sc.histogram_resolution_m)
        .map_err(|e| DmimoError::InvalidScenario(e.to_string()))?;
    let per_replica: Vec<usize> = (0..sc.replicas)
        .map(|r| sc.selections / sc.replicas + usize::from(r < sc.selections % sc.replicas))
        .filter(|&n| n > 0)
        .collect();
    let mut jobs = Vec::new();
    for &flavor in &Flavor::ALL {
        for (vi, &v) in sc.v_max_mps.iter().enumerate() {
            for (r, &n) in per_replica.iter().enumerate() {
                jobs.push((flavor, vi, v, r, n));
            }
        }
    }
    let outputs = map_indexed(exec, jobs.len(), |j| {
        let (flavor, _, v, r, n) = jobs[j];
        run_replica(sc, flavor, v, r, n, window)
    });
    let t_el = sc.t_el_grid();
    let mut curves = Vec::new();
    let mut histograms = Vec::new();
    for &flavor in &Flavor::ALL {
        for (vi, &v) in sc.v_max_mps.iter().enumerate() {
            let mine: Vec<&ReplicaOutput> = jobs
                .iter()
                .zip(&outputs)
                .filter(|((f, i, ..), _)| *f == flavor && *i == vi)
                .map(|(_, o)| o)
                .collect();
            let total: usize = mine.iter().map(|o| o.selections).sum();
            let mut surv = vec![0.0; t_el.len()];
            let mut rate = vec![0.0; t_el.len()];
            let mut max_dist: f64 = 0.0;
            let mut max_abs: f64 = 0.0;
            for o in &mine {
                for k in 0..t_el.len() {
                    surv[k] += o.surviving[k];
                    rate[k] += o.rate[k];
                }
                max_dist = max_dist.max(o.max_dist);
                max_abs = max_abs.max(o.max_abs);
            }
            surv.iter_mut().for_each(|x| *x /= total as f64);
            rate.iter_mut().for_each(|x| *x /= total as f64);
            if vi == 0 {
                let mut h = DensityGrid::new(window, sc.histogram_resolution_m).expect("validated window");
                for o in &mine {
                    h.merge(&o.histogram);
                }
                h.normalize();
                histograms.push((flavor, h));
            }
            curves.push(DecayCurves {
                flavor,
                v_max_mps: v,
                t_el_s: t_el.clone(),
                mean_surviving: surv,
                mean_rate_bps_hz: rate,
                selections: total,
                max_distance_from_tx_m: max_dist,
                max_abs_coordinate_m: max_abs,
            });
        }
    }
    Ok(DmimoResults { curves, histograms })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_examples() {
        let m = ChannelModel::default();
        let mut rng = RngStream::new(1, 0).rng();
        let o = Position::new(0.0, 0.0);
        assert_eq!(channel_gain(&o, &Position::new(2.0, 0.0), &m, &mut rng), 0.25);
        assert!((channel_gain(&o, &o, &m, &mut rng) - 100.0).abs() < 1e-9);
        let mut prev = f64::INFINITY;
        for k in 1..100 {
            let g = channel_gain(&o, &Position::new(k as f64 * 0.37, 0.0), &m, &mut rng);
            assert!(g < prev);
            prev = g;
        }
    }

    #[test]
    fn fading_has_unit_mean() {
        let m = ChannelModel {
            fading: Fading::Rayleigh,
            ..ChannelModel::default()
        };
        let mut rng = RngStream::new(2, 0).rng();
        let (a, b) = (Position::new(0.0, 0.0), Position::new(3.0, 4.0));
        let n = 100_000;
        let mean = (0..n).map(|_| channel_gain(&a, &b, &m, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean / 0.04 - 1.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn overlap_formula() {
        assert_eq!(expected_random_overlap(12, 20), 7.2);
        assert_eq!(expected_random_overlap(5, 5), 5.0);
        assert!((expected_random_overlap(1, 10) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn overlap_matches_independent_subsets() {
        use rand::seq::index::sample;
        let mut rng = RngStream::new(3, 0).rng();
        let trials = 20_000;
        let counts: Vec<f64> = (0..trials)
            .map(|_| {
                let a = sample(&mut rng, 20, 12).into_vec();
                let b = sample(&mut rng, 20, 12).into_vec();
                surviving_relay_count(&a, &b) as f64
            })
            .collect();
        let mean = counts.iter().sum::<f64>() / trials as f64;
        // hypergeometric variance L (L/K)(1-L/K)(K-L)/(K-1)
        let var = 12.0 * 0.6 * 0.4 * 8.0 / 19.0;
        let se = (var / trials as f64).sqrt();
        assert!((mean - 7.2).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn selection_examples() {
        let m = ChannelModel::default();
        let mut rng = RngStream::new(4, 0).rng();
        let rx = vec![Position::new(30.0, 0.0), Position::new(30.5, 0.5)];
        let cands: Vec<Position> = (0..6).map(|i| Position::new(i as f64, 0.0)).collect();
        assert_eq!(select_relays(&cands, &rx, 6, &m, &mut rng), vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(select_relays(&cands, &rx, 2, &m, &mut rng), vec![4, 5]);
        // equal scores fall to the lowest ids
        let same = vec![Position::new(1.0, 1.0); 5];
        assert_eq!(select_relays(&same, &rx, 3, &m, &mut rng), vec![0, 1, 2]);
    }

    #[test]
    fn rate_examples() {
        let gains = vec![vec![0.01, 0.02], vec![0.03, 0.01], vec![0.005, 0.001]];
        assert_eq!(achievable_rate_from_gains(&gains, &[0, 1], 0.0), 0.0);
        let mut prev = 0.0;
        for db in [0.0, 10.0, 20.0, 30.0, 40.0] {
            let r = achievable_rate_from_gains(&gains, &[0, 1], 10f64.powf(db / 10.0));
            assert!(r > prev);
            prev = r;
        }
        // single relay, single receiver: log2(1 + snr g)
        let r = achievable_rate_from_gains(&[vec![0.5]], &[0], 6.0);
        assert!((r - 2.0).abs() < 1e-12);
    }

    /// Determinant by cofactor expansion, independent of the factorization.
    fn det(m: &[Vec<f64>]) -> f64 {
        if m.len() == 1 {
            return m[0][0];
        }
        (0..m.len())
            .map(|c| {
                let minor: Vec<Vec<f64>> = m[1..]
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|&(j, _)| j != c).map(|(_, &x)| x).collect())
                    .collect();
                let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[0][c] * det(&minor)
            })
            .sum()
    }

    #[test]
    fn rate_matches_cofactor_determinant() {
        let mut rng = RngStream::new(5, 0).rng();
        for _ in 0..50 {
            let n = rng.random_range(1..5);
            let k = rng.random_range(1..6);
            let gains: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect();
            let sel: Vec<usize> = (0..k).filter(|_| rng.random::<bool>()).collect();
            if sel.is_empty() {
                continue;
            }
            let snr = 3.7;
            let mut m = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    let hh: f64 = sel.iter().map(|&s| (gains[s][i] * gains[s][j]).sqrt()).sum();
                    m[i][j] = f64::from(u8::from(i == j)) + snr / sel.len() as f64 * hh;
                }
            }
            let want = det(&m).log2();
            let got = achievable_rate_from_gains(&gains, &sel, snr);
            assert!((got - want).abs() < 1e-9 * want.abs().max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn disc_reflection_keeps_the_reference_inside() {
        let mut p = Position::new(0.0, 0.0);
        let mut s = SpeedVector::new(2.0, 0.3);
        for _ in 0..10_000 {
            (p, s) = move_in_disc(p, s, 0.1, 3.75);
            assert!(p.x.hypot(p.y) <= 3.75 + 1e-9);
            assert!((s.v - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn flavor_constraints_hold() {
        let sc = DmimoScenario::default();
        let half = sc.s_m / 2.0;
        for flavor in Flavor::ALL {
            for v in [1.0, 2.0] {
                let mut m = CandidateMotion::new(flavor, &sc, v, 7);
                for _ in 0..5000 {
                    m.step();
                    for p in m.positions() {
                        let d = p.x.hypot(p.y);
                        match flavor {
                            Flavor::Rw => assert!(p.x.abs() <= half + 1e-9 && p.y.abs() <= half + 1e-9),
                            Flavor::Rpgm1 => assert!(d <= half + 1e-9),
                            Flavor::Rpgm2 => assert!(d <= half + 1e-9),
                            Flavor::MoMo => assert!(d <= sc.momo_excursion_bound(v) + 1e-9, "{d}"),
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn survivors_at_zero_elapsed_time_equal_l() {
        let sc = DmimoScenario {
            selections: 16,
            replicas: 2,
            t_el_max_s: 1.0,
            warmup_s: 1.0,
            ..DmimoScenario::default()
        };
        let res = run_dmimo_experiment(&sc, Execution::Sequential).unwrap();
        assert_eq!(res.curves.len(), 8);
        assert_eq!(res.histograms.len(), 4);
        for c in &res.curves {
            assert_eq!(c.mean_surviving[0], 12.0);
            assert_eq!(c.selections, 16);
        }
        let (_, h) = &res.histograms[0];
        assert_eq!((h.rows, h.cols), (200, 200));
    }
}
