//! Camera-based proprioception for a soft pneumatic actuator.
//!
//! A camera at the base of a bellows actuator watches a printed pattern on
//! the inner wall. Each frame runs through a small filter bank, is pooled
//! into a coarse grid and fed to three RBF support vector regressors that
//! predict the tip position. A synthetic renderer and plant model stand in
//! for hardware, and a cascaded PI loop closes the loop on the estimate.

pub mod control;
pub mod datastore;
pub mod error;
pub mod features;
pub mod harness;
pub mod imaging;
pub mod par;
pub mod plantsim;
pub mod pose;
pub mod regression;

pub use error::{Error, Result};
pub use pose::{Axis, Pose};
