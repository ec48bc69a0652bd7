//! GHZ encoding and state transfer on lattices with power-law interactions.
//!
//! - [`geometry`]: lattices, regions and their partitions.
//! - [`scheduler`]: recursive time schedules and their time bounds.
//! - [`simulator`]: exact statevector simulation of the protocol primitives.
//! - [`protocol`]: the recursive encoder/decoder with per-step verification.
//! - [`analysis`]: scaling sweeps, fits and comparisons with known bounds.
//! - [`bounds`]: closed-form time and gate-count bounds.

// `!(x >= y)` is used on purpose so that NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bounds;
pub mod error;
pub mod geometry;
pub mod protocol;
pub mod sampling;
pub mod scheduler;
pub mod simulator;

pub use error::{Error, Result};
pub use geometry::{site_mask, LatticeSpec, Region};
pub use protocol::{
    decode, encode, state_transfer, verify_step, Direction, EncodeRequest, FourierGate, ProtocolOptions,
    ProtocolTrace, StepRecord,
};
pub use scheduler::{
    bound_t, choose_m, plan, plan_continuous, plan_depth, PlanMode, Regime, RegimeParams, ScheduleNode,
    ScheduleOptions, SchedulePlan,
};
pub use simulator::{expected_ghz, fidelity, Gate, PhaseCoupling, StateVector};
