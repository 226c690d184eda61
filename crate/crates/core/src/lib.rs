//! Group mobility simulation: bounded-kinematics individual models, group
//! policies (MoMo, RPGM, RVGM), accuracy metrics and a D-MIMO test case.

// Negated comparisons in validation reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dmimo;
pub mod engine;
pub mod group;
pub mod individual;
pub mod kinematics;
pub mod metrics;
pub mod parallel;
pub mod rng;
