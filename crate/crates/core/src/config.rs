//! TOML documents for experiment and D-MIMO scenario configuration.
//!
//! Every key carries its unit as a suffix (`delta_t_s`, `v_max_mps`).
//! Unknown keys are rejected.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dmimo::{ChannelModel, DmimoScenario, Fading};
use crate::engine::{ConfigError, DynamicsSwitch, ExperimentConfig, ModelChoice, MoMoSettings};
use crate::group::{GroupSpec, RvgmParams};
use crate::individual::{GaussMarkovParams, ModelParams, RandomWalkTrigger};
use crate::kinematics::{BoundaryPolicy, KinematicLimits, Playground};

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error(transparent)]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Serialize(#[from] toml::ser::Error),
    #[error(transparent)]
    Invalid(#[from] ConfigError),
    #[error(transparent)]
    Scenario(#[from] crate::dmimo::DmimoError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaygroundDoc {
    pub width_m: f64,
    pub height_m: f64,
    #[serde(default)]
    pub boundary: BoundaryPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsDoc {
    pub v_max_mps: f64,
    pub v_min_mps: f64,
    pub a_max_mps2: f64,
    pub gamma_max_radps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupDoc {
    pub members: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leader: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MotionDoc {
    RandomWalk(RandomWalkDoc),
    KoVaidya(KoVaidyaDoc),
    RandomWaypoint(PauseDoc),
    RandomDirection(PauseDoc),
    Inertia(InertiaDoc),
    GaussMarkov(GaussMarkovDoc),
    Boundless(PeriodDoc),
    Static(EmptyDoc),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomWalkDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub update_period_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KoVaidyaDoc {
    pub mean_leg_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PauseDoc {
    #[serde(default)]
    pub pause_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InertiaDoc {
    pub update_period_s: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussMarkovDoc {
    pub update_period_s: f64,
    pub beta_per_s: f64,
    pub mean_x_mps: f64,
    pub mean_y_mps: f64,
    pub sigma_x_mps: f64,
    pub sigma_y_mps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodDoc {
    pub update_period_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmptyDoc {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelDoc {
    Individual(IndividualDoc),
    Momo(MomoDoc),
    Rpgm(RpgmDoc),
    Rvgm(RvgmDoc),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndividualDoc {
    pub motion: MotionDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomoDoc {
    pub d_c_m: f64,
    pub rho_min: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_u_s: Option<f64>,
    pub update_period_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RpgmDoc {
    pub d_max_m: f64,
    pub leader: MotionDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RvgmDoc {
    pub sigma_v_mps: f64,
    pub sigma_theta_rad: f64,
    pub update_period_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leader_mean_speed_mps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchDoc {
    pub mean_period_s: f64,
}

/// Document form of [`ExperimentConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentDocument {
    pub seed: u64,
    pub duration_s: f64,
    pub delta_t_s: f64,
    #[serde(default)]
    pub speed_floor_at_v_min: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_group_radius_m: Option<f64>,
    pub playground: PlaygroundDoc,
    pub limits: LimitsDoc,
    pub model: ModelDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamics_switch: Option<SwitchDoc>,
    pub groups: Vec<GroupDoc>,
}

fn motion_params(doc: &MotionDoc, errs: &mut ConfigError, field: &str) -> ModelParams {
    match doc {
        MotionDoc::RandomWalk(d) => match (d.update_period_s, d.distance_m) {
            (Some(p), None) => ModelParams::RandomWalk(RandomWalkTrigger::Timer { period_s: p }),
            (None, Some(dist)) => ModelParams::RandomWalk(RandomWalkTrigger::Distance { distance_m: dist }),
            _ => {
                errs.push(field, "set exactly one of update_period_s and distance_m".into());
                ModelParams::Static
            }
        },
        MotionDoc::KoVaidya(d) => ModelParams::KoVaidya {
            mean_leg_m: d.mean_leg_m,
        },
        MotionDoc::RandomWaypoint(d) => ModelParams::RandomWaypoint { pause_s: d.pause_s },
        MotionDoc::RandomDirection(d) => ModelParams::RandomDirection { pause_s: d.pause_s },
        MotionDoc::Inertia(d) => ModelParams::Inertia {
            period_s: d.update_period_s,
            rho: d.rho,
        },
        MotionDoc::GaussMarkov(d) => ModelParams::GaussMarkov(GaussMarkovParams {
            period_s: d.update_period_s,
            beta: d.beta_per_s,
            mean_mps: [d.mean_x_mps, d.mean_y_mps],
            sigma_mps: [d.sigma_x_mps, d.sigma_y_mps],
        }),
        MotionDoc::Boundless(d) => ModelParams::Boundless {
            period_s: d.update_period_s,
        },
        MotionDoc::Static(_) => ModelParams::Static,
    }
}

fn motion_doc(p: &ModelParams) -> MotionDoc {
    match *p {
        ModelParams::RandomWalk(RandomWalkTrigger::Timer { period_s }) => MotionDoc::RandomWalk(RandomWalkDoc {
            update_period_s: Some(period_s),
            distance_m: None,
        }),
        ModelParams::RandomWalk(RandomWalkTrigger::Distance { distance_m }) => MotionDoc::RandomWalk(RandomWalkDoc {
            update_period_s: None,
            distance_m: Some(distance_m),
        }),
        ModelParams::KoVaidya { mean_leg_m } => MotionDoc::KoVaidya(KoVaidyaDoc { mean_leg_m }),
        ModelParams::RandomWaypoint { pause_s } => MotionDoc::RandomWaypoint(PauseDoc { pause_s }),
        ModelParams::RandomDirection { pause_s } => MotionDoc::RandomDirection(PauseDoc { pause_s }),
        ModelParams::Inertia { period_s, rho } => MotionDoc::Inertia(InertiaDoc {
            update_period_s: period_s,
            rho,
        }),
        ModelParams::GaussMarkov(g) => MotionDoc::GaussMarkov(GaussMarkovDoc {
            update_period_s: g.period_s,
            beta_per_s: g.beta,
            mean_x_mps: g.mean_mps[0],
            mean_y_mps: g.mean_mps[1],
            sigma_x_mps: g.sigma_mps[0],
            sigma_y_mps: g.sigma_mps[1],
        }),
        ModelParams::Boundless { period_s } => MotionDoc::Boundless(PeriodDoc {
            update_period_s: period_s,
        }),
        ModelParams::Static => MotionDoc::Static(EmptyDoc {}),
    }
}

impl ExperimentDocument {
    pub fn parse(text: &str) -> Result<Self, DocumentError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String, DocumentError> {
        Ok(toml::to_string(self)?)
    }

    /// Converts and validates.
    pub fn to_config(&self) -> Result<ExperimentConfig, ConfigError> {
        let mut errs = ConfigError::default();
        let model = match &self.model {
            ModelDoc::Individual(d) => ModelChoice::Individual(motion_params(&d.motion, &mut errs, "model.motion")),
            ModelDoc::Momo(d) => ModelChoice::MoMo(MoMoSettings {
                d_c: d.d_c_m,
                rho_min: d.rho_min,
                delta_u: d.delta_u_s,
                period_s: d.update_period_s,
            }),
            ModelDoc::Rpgm(d) => ModelChoice::Rpgm {
                d_max: d.d_max_m,
                leader: motion_params(&d.leader, &mut errs, "model.leader"),
            },
            ModelDoc::Rvgm(d) => ModelChoice::Rvgm(RvgmParams {
                sigma_v: d.sigma_v_mps,
                sigma_theta: d.sigma_theta_rad,
                period_s: d.update_period_s,
                leader_mean_speed: d.leader_mean_speed_mps,
            }),
        };
        let config = ExperimentConfig {
            playground: Playground {
                width: self.playground.width_m,
                height: self.playground.height_m,
                boundary: self.playground.boundary,
            },
            duration_s: self.duration_s,
            delta_t_s: self.delta_t_s,
            groups: self
                .groups
                .iter()
                .enumerate()
                .map(|(i, g)| GroupSpec {
                    group_id: i,
                    member_ids: g.members.clone(),
                    leader_id: g.leader,
                })
                .collect(),
            limits: KinematicLimits {
                v_max: self.limits.v_max_mps,
                v_min: self.limits.v_min_mps,
                a_max: self.limits.a_max_mps2,
                gamma_max: self.limits.gamma_max_radps,
            },
            model,
            seed: self.seed,
            dynamics_switch: self.dynamics_switch.as_ref().map(|s| DynamicsSwitch {
                mean_period_s: s.mean_period_s,
            }),
            initial_group_radius_m: self.initial_group_radius_m,
            speed_floor_at_v_min: self.speed_floor_at_v_min,
        };
        if let Err(e) = config.validate() {
            errs.fields.extend(e.fields);
        }
        errs.into_result().map(|_| config)
    }

    pub fn from_config(c: &ExperimentConfig) -> Self {
        let model = match &c.model {
            ModelChoice::Individual(p) => ModelDoc::Individual(IndividualDoc { motion: motion_doc(p) }),
            ModelChoice::MoMo(m) => ModelDoc::Momo(MomoDoc {
                d_c_m: m.d_c,
                rho_min: m.rho_min,
                delta_u_s: m.delta_u,
                update_period_s: m.period_s,
            }),
            ModelChoice::Rpgm { d_max, leader } => ModelDoc::Rpgm(RpgmDoc {
                d_max_m: *d_max,
                leader: motion_doc(leader),
            }),
            ModelChoice::Rvgm(p) => ModelDoc::Rvgm(RvgmDoc {
                sigma_v_mps: p.sigma_v,
                sigma_theta_rad: p.sigma_theta,
                update_period_s: p.period_s,
                leader_mean_speed_mps: p.leader_mean_speed,
            }),
        };
        Self {
            seed: c.seed,
            duration_s: c.duration_s,
            delta_t_s: c.delta_t_s,
            speed_floor_at_v_min: c.speed_floor_at_v_min,
            initial_group_radius_m: c.initial_group_radius_m,
            playground: PlaygroundDoc {
                width_m: c.playground.width,
                height_m: c.playground.height,
                boundary: c.playground.boundary,
            },
            limits: LimitsDoc {
                v_max_mps: c.limits.v_max,
                v_min_mps: c.limits.v_min,
                a_max_mps2: c.limits.a_max,
                gamma_max_radps: c.limits.gamma_max,
            },
            model,
            dynamics_switch: c.dynamics_switch.map(|s| SwitchDoc {
                mean_period_s: s.mean_period_s,
            }),
            groups: c
                .groups
                .iter()
                .map(|g| GroupDoc {
                    members: g.member_ids.clone(),
                    leader: g.leader_id,
                })
                .collect(),
        }
    }
}

pub fn load_experiment(text: &str) -> Result<ExperimentConfig, DocumentError> {
    Ok(ExperimentDocument::parse(text)?.to_config()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDoc {
    pub pathloss_exponent: f64,
    pub fading: Fading,
    pub snr_ref_db: f64,
}

/// Document form of [`DmimoScenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DmimoDocument {
    pub seed: u64,
    pub d_txrx_m: f64,
    pub k: usize,
    pub n_rx: usize,
    pub l: usize,
    pub s_m: f64,
    pub delta_t_s: f64,
    pub rx_radius_m: f64,
    pub v_max_mps: Vec<f64>,
    pub v_min_mps: f64,
    pub a_max_mps2: f64,
    pub gamma_max_radps: f64,
    pub update_period_s: f64,
    pub warmup_s: f64,
    pub selection_spacing_s: f64,
    pub selections: usize,
    pub replicas: usize,
    pub t_el_max_s: f64,
    pub histogram_side_m: f64,
    pub histogram_resolution_m: f64,
    pub channel: ChannelDoc,
}

impl DmimoDocument {
    pub fn parse(text: &str) -> Result<Self, DocumentError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String, DocumentError> {
        Ok(toml::to_string(self)?)
    }

    pub fn to_scenario(&self) -> Result<DmimoScenario, DocumentError> {
        let s = DmimoScenario {
            d_txrx_m: self.d_txrx_m,
            k: self.k,
            n_rx: self.n_rx,
            l: self.l,
            s_m: self.s_m,
            delta_t_s: self.delta_t_s,
            rx_radius_m: self.rx_radius_m,
            v_max_mps: self.v_max_mps.clone(),
            v_min_mps: self.v_min_mps,
            a_max_mps2: self.a_max_mps2,
            gamma_max_radps: self.gamma_max_radps,
            update_period_s: self.update_period_s,
            channel: ChannelModel {
                pathloss_exponent: self.channel.pathloss_exponent,
                fading: self.channel.fading,
                snr_ref_db: self.channel.snr_ref_db,
            },
            warmup_s: self.warmup_s,
            selection_spacing_s: self.selection_spacing_s,
            selections: self.selections,
            replicas: self.replicas,
            t_el_max_s: self.t_el_max_s,
            histogram_side_m: self.histogram_side_m,
            histogram_resolution_m: self.histogram_resolution_m,
            seed: self.seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn from_scenario(s: &DmimoScenario) -> Self {
        Self {
            seed: s.seed,
            d_txrx_m: s.d_txrx_m,
            k: s.k,
            n_rx: s.n_rx,
            l: s.l,
            s_m: s.s_m,
            delta_t_s: s.delta_t_s,
            rx_radius_m: s.rx_radius_m,
            v_max_mps: s.v_max_mps.clone(),
            v_min_mps: s.v_min_mps,
            a_max_mps2: s.a_max_mps2,
            gamma_max_radps: s.gamma_max_radps,
            update_period_s: s.update_period_s,
            warmup_s: s.warmup_s,
            selection_spacing_s: s.selection_spacing_s,
            selections: s.selections,
            replicas: s.replicas,
            t_el_max_s: s.t_el_max_s,
            histogram_side_m: s.histogram_side_m,
            histogram_resolution_m: s.histogram_resolution_m,
            channel: ChannelDoc {
                pathloss_exponent: s.channel.pathloss_exponent,
                fading: s.channel.fading,
                snr_ref_db: s.channel.snr_ref_db,
            },
        }
    }
}

pub fn load_dmimo(text: &str) -> Result<DmimoScenario, DocumentError> {
    DmimoDocument::parse(text)?.to_scenario()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MOMO: &str = r#"
seed = 7
duration_s = 100.0
delta_t_s = 1.0
speed_floor_at_v_min = true

[playground]
width_m = 5000.0
height_m = 5000.0
boundary = "torus"

[limits]
v_max_mps = 5.0
v_min_mps = 0.001
a_max_mps2 = 5.0
gamma_max_radps = 1.5707963267948966

[model]
kind = "momo"
d_c_m = 30.0
rho_min = 0.5
update_period_s = 5.0

[[groups]]
members = [0, 1]

[[groups]]
members = [2, 3]
leader = 3
"#;

    #[test]
    fn parses_a_momo_document() {
        let c = load_experiment(MOMO).unwrap();
        assert_eq!(c.node_count(), 4);
        assert_eq!(c.groups[1].leader(), 3);
        assert_eq!(c.playground.boundary, BoundaryPolicy::Torus);
        assert!(matches!(c.model, ModelChoice::MoMo(m) if m.d_c == 30.0 && m.delta_u.is_none()));
    }

    #[test]
    fn missing_key_is_named() {
        let text = MOMO.replace("v_max_mps = 5.0\n", "");
        let e = load_experiment(&text).unwrap_err().to_string();
        assert!(e.contains("v_max_mps"), "{e}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = MOMO.replace("rho_min = 0.5", "rho_min = 0.5\nrho_max = 1.0");
        let e = load_experiment(&text).unwrap_err().to_string();
        assert!(e.contains("rho_max"), "{e}");
        let text = MOMO.replace("seed = 7", "seed = 7\nspeed = 3");
        assert!(load_experiment(&text).is_err());
    }

    #[test]
    fn invalid_values_list_their_fields() {
        let text = MOMO.replace("d_c_m = 30.0", "d_c_m = -1.0").replace("duration_s = 100.0", "duration_s = 0.0");
        let e = load_experiment(&text).unwrap_err().to_string();
        assert!(e.contains("model.d_c_m") && e.contains("duration_s"), "{e}");
    }

    #[test]
    fn experiment_round_trip_is_identity() {
        for model in [
            ExperimentConfig::reference_momo(),
            ExperimentConfig::reference_rpgm(),
            ExperimentConfig::reference_rvgm(),
            ModelChoice::Individual(ModelParams::GaussMarkov(GaussMarkovParams {
                period_s: 1.0,
                beta: 0.3,
                mean_mps: [1.0, -0.5],
                sigma_mps: [0.7, 0.2],
            })),
            ModelChoice::Individual(ModelParams::RandomWalk(RandomWalkTrigger::Distance { distance_m: 12.5 })),
            ModelChoice::Individual(ModelParams::Static),
        ] {
            let mut c = ExperimentConfig::reference(model);
            c.dynamics_switch = Some(DynamicsSwitch { mean_period_s: 100.0 });
            let doc = ExperimentDocument::from_config(&c);
            let text = doc.to_toml().unwrap();
            let back = ExperimentDocument::parse(&text).unwrap();
            assert_eq!(back, doc);
            assert_eq!(back.to_config().unwrap(), c);
        }
    }

    #[test]
    fn dmimo_round_trip_is_identity() {
        let s = DmimoScenario::default();
        let doc = DmimoDocument::from_scenario(&s);
        let text = doc.to_toml().unwrap();
        assert_eq!(load_dmimo(&text).unwrap(), s);
        let bad = text.replace("l = 12", "l = 25");
        assert!(load_dmimo(&bad).is_err());
    }
}
