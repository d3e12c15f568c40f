//! Point-line visual-inertial bundle adjustment built around a two-parameter
//! inverse-depth line representation, with the classical Plucker/orthonormal
//! forms as conversion targets and optimizer baselines.
//!
//! The crate is organized along the processing pipeline:
//! - [`line_geometry`]: line representations, conversions, rigid transforms.
//! - [`residuals`]: reprojection residuals and their analytic Jacobians.
//! - [`jacobian_check`]: finite-difference verification of every Jacobian block.
//! - [`initialization`]: plane-based inverse-depth triangulation and the
//!   Plucker-matrix baseline.
//! - [`solver`]: sliding-window factor-graph optimizer (joint LM and the
//!   two-step line/pose alternation), marginalization, window policy.
//! - [`synthetic_world`]: ground-truth scenes, trajectories, and noisy
//!   observations standing in for a camera/IMU front end.
//! - [`harness`]: trajectory metrics (ATE/RPE), benchmark matrix, config
//!   ingestion, and result export.

pub mod harness;
pub mod initialization;
pub mod jacobian_check;
pub mod line_geometry;
pub mod residuals;
pub mod rotation;
pub mod solver;
pub mod synthetic_world;

pub use line_geometry::{CameraPose, InverseDepthLine, OrthonormalLine, PluckerLine};
pub use residuals::{CameraIntrinsics, LineObservation, OdometryFactor, ProjectedLine};
pub use solver::{SlidingWindowState, SolverConfig};
