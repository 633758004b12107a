//! Neural-network inverse kinematics for a three-link articulated arm, with
//! Lipschitz-based error bounds that relate approximation accuracy to the
//! number of grid training samples.
//!
//! - [`kinematics`]: analytic forward/inverse position kinematics.
//! - [`sampler`]: Cartesian training grids, input scaling, grid spacing.
//! - [`neuralnet`]: the shallow ReLU network, backprop, Adam and training loop.
//! - [`bound`]: Jacobian and Lipschitz bounds, sample-count error estimate.
//! - [`trajectory`]: reference paths and tracking-error evaluation.
//! - [`harness`]: single runs, sweeps over grid sizes, reports.

pub mod bound;
pub mod error;
pub mod harness;
pub mod kinematics;
pub mod neuralnet;
pub mod numfmt;
pub mod sampler;
pub mod trajectory;

pub use error::{Error, Result};
pub use kinematics::{CartesianPoint, ElbowBranch, JointAngles, RobotGeometry};
pub use neuralnet::{NetworkParams, TrainingConfig};
pub use sampler::{TrainingSet, WorkspaceBox};
