//! Semi-active quarter-car suspension toolkit.
//!
//! A two-mass quarter-car plant driven through a Bouc-Wen magnetorheological
//! damper, with on-off Skyhook, Groundhook and Skygroundhook laws and a
//! PD-Skygroundhook law that adds acceleration feedback. The crate also
//! provides road generators, a fixed-step closed-loop simulator, stepped-sine
//! frequency response, and a gain tuner.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod damper;
pub mod error;
pub mod integrate;
pub mod model;
pub mod road;
pub mod sim;
pub mod tune;

pub use control::{Actuation, ControlCommand, ControllerKind, ControllerSpec};
pub use damper::BoucWenParams;
pub use error::{Error, Result};
pub use model::{Accel, PdGains, SimState, VehicleParams};
pub use road::RoadProfile;
pub use sim::{Metrics, PlantMode, SimConfig, Trajectory};
