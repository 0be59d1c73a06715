//! Geometric consistency of novel-view image sequences.
//!
//! Neighbouring views are matched, each correspondence is scored by its symmetric epipolar
//! distance under the fundamental matrix implied by the conditioning poses, and a pair is
//! consistent when it has enough matches and their median distance is under a pixel
//! threshold. The crate also carries the camera-ray conditioning machinery, synthetic
//! trajectories, and an exact point-scene harness used to check all of the above.

pub mod camera;
pub mod cli;
pub mod epipolar;
pub mod error;
pub mod image;
pub mod io;
pub mod matching;
pub mod metric;
pub mod synthetic;
pub mod trajectory;

pub use error::{Error, Result};
