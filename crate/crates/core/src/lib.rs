//! N-particle classical and relativistic Langevin dynamics with singular pair
//! interactions and multiplicative noise.

pub mod diffusion;
pub mod config;
pub mod error;
pub mod experiments;
pub mod generator;
pub mod integrators;
pub mod lemmas;
pub mod linalg;
pub mod lyapunov;
pub mod measures;
pub mod noise;
pub mod potentials;
pub mod scalar;
pub mod state;
pub mod truncation;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type State = state::PhaseState<f64>;
pub type Potentials = potentials::PotentialSpec<f64>;
pub type Diffusion = diffusion::DiffusionSpec<f64>;
pub type Vector = linalg::SVec<f64>;
pub type Matrix = linalg::SMat<f64>;
