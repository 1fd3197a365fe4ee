//! Tracking toolkit for a rigid camera stick carrying two tracked controllers:
//! SE(3) utilities, rig simulation, lighthouse pose solving, hand-eye
//! calibration, UKF fusion and evaluation metrics.

pub mod error;
pub mod handeye;
pub mod io;
pub mod lighthouse;
pub mod metrics;
pub mod optim;
pub mod pipeline;
pub mod rig;
pub mod se3;
pub mod ukf;

pub use error::{Error, Result};
pub use se3::{compose, delta, interpolate, inverse, mean_pose, Pose, PoseDelta, StampedPose, Trajectory};
