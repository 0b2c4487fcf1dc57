//! Generalized play hysteresis.
//!
//! This crate provides discrete hysteresis operators built from play
//! hysterons, calibration routines that fit them to a pair of primary
//! curves, and implicit time stepping for an ODE and a scalar transport PDE
//! whose storage term carries hysteresis.

pub mod calibration;
pub mod curves;
pub mod io;
pub mod model;
pub mod ode;
pub mod pde;
pub mod play;
pub mod presets;
pub mod solver;

pub use curves::MonotoneCurve;
pub use model::{InitMode, Model, ModelKind, ModelState};
pub use play::Truncation;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction_chapter {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/hysterons.md")]
mod hysterons_chapter {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/models.md")]
mod models_chapter {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/calibration.md")]
mod calibration_chapter {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/ode.md")]
mod ode_chapter {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/pde.md")]
mod pde_chapter {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod cli_chapter {}
