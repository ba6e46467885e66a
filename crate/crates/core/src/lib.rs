//! Upper-body compliance cascade and leading-signal simulator for a
//! humanoid robot that leads a partner dance.
//!
//! The control path per hand is admittance + Cartesian impedance + an
//! applied wrench, projected through Jᵀ and blended with joint impedance
//! into clamped position commands. [`harness`] runs it against a simulated
//! partner on a fixed timestep; [`analysis`] scores questionnaire data and
//! summarizes trial logs.

pub mod analysis;
pub mod choreography;
pub mod config;
pub mod controller;
pub mod error;
pub mod harness;
pub mod jointspace;
pub mod model;
pub mod partner;
pub mod taskspace;

pub use error::{Error, Result};
