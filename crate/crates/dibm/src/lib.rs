//! A two-timescale energy balance model with a moving iceline.
//!
//! The fast variable is a latitudinal temperature profile relaxing under
//! absorbed shortwave, linear re-emission, and relaxation transport toward
//! the global mean; the slow variable is the iceline position, driven by the
//! temperature excess over a critical value at the ice boundary. The crate
//! provides:
//!
//! - the discretized profile space with interpolation, sup-norm, and Simpson
//!   quadrature ([`grid`]);
//! - the forcing fields and the coupled Euler step ([`physics`]);
//! - closed-form local equilibria and the reduced scalar map with its roots
//!   ([`equilibria`]);
//! - a graph-transform computation of the one-dimensional attracting
//!   invariant manifold, with a contraction certificate ([`manifold`]);
//! - trajectory simulation with steady-state detection and basin
//!   classification ([`dynamics`]);
//! - a solar-constant bifurcation sweep with fold refinement
//!   ([`bifurcation`]);
//! - configuration, CSV/JSON/SVG emission, and an executable verification
//!   suite ([`config`], [`output`], [`emit`], [`svg`], [`verify`]).

pub mod bifurcation;
pub mod config;
pub mod dynamics;
pub mod emit;
pub mod equilibria;
pub mod error;
pub mod grid;
pub mod manifold;
pub mod output;
pub mod physics;
pub mod svg;
pub mod verify;

pub use error::{ConfigError, ModelError};
pub use grid::{GridSpec, Profile};
pub use physics::{Params, ParamValues, State};
