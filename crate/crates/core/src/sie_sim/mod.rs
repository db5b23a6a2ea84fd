//! Truncated lattice SIE: left-point stochastic Volterra scheme, Picard
//! iteration, deterministic parts and moment diagnostics.

pub mod config;
mod conv;
pub mod deterministic;
pub mod diagnostics;
pub mod noise;
pub mod picard;
pub mod solver;

pub use config::{Diffusion, InitialCondition, SIEConfig};
pub use deterministic::{deterministic_grid, deterministic_part};
pub use diagnostics::{MomentSummary, MomentTracker, VarianceCheck, VarianceProbe};
pub use noise::{gen_noise, NoiseField};
pub use picard::{picard_solve, PicardReport};
pub use solver::{solve_truncated_sie, FieldSample, Simulator};
