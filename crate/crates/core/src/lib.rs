//! Extrinsic calibration of camera networks and moving multi-camera rigs
//! from time-tagged observations of rigidly attached planar patterns.
//!
//! Every observation of pattern `p` by camera `c` at time `t` yields the
//! rigidity constraint `C = A·P·T`, where `C` maps world to camera, `P` maps
//! the pattern rig to pattern `p`, `T` maps world to rig at time `t`, and `A`
//! is the measured pattern→camera transform. The pipeline checks that the
//! interaction graph is connected, pins a reference pattern and time to
//! identity, initializes the remaining transforms in closed form and
//! refines all of them by minimizing reprojection error.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;

pub mod connectivity;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod init;
pub mod metrics;
pub mod pipeline;
pub mod refine;
pub mod sim;

#[cfg(test)]
mod testutil;

pub use connectivity::{Reference, VariableId, VariableKind};
pub use dataset::{Corner, Dataset, Detection, FoundationalRelationship, PatternGeometry};
pub use error::{Error, ObsKey, Result};
pub use geometry::{AxisAngleParam, CameraIntrinsics, Pose};
pub use init::VariablePool;
