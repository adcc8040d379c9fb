//! Deterministic 2D navigation toolkit.
//!
//! Building blocks for a desk-scale navigation pipeline: a differential-drive
//! robot in a grid world with scripted dynamic obstacles, simulated planar
//! range sensing, occupancy-grid mapping with known poses, Monte Carlo
//! localization, Dijkstra/A* global planning on inflated costmaps, and a
//! reactive controller that modulates speed by collision probability and
//! steers from scaled steering commands. The `harness` module wires these
//! into reproducible scenario runs driven by YAML documents.
//!
//! Every stochastic component draws from a caller-supplied seeded stream, so
//! a (config, seed) pair fully determines a run.

pub mod control;
pub mod error;
pub mod harness;
pub mod kinematics;
pub mod localization;
pub mod mapping;
pub mod perception;
pub mod planning;
pub mod world;

pub use error::{Error, Result};
pub use kinematics::{Pose2D, RobotParams, Twist2D, WheelRates};
