//! Constrained Canham-Helfrich gradient flow on normal graphs over analytic
//! reference surfaces, with verification tooling for its variational
//! formulas.
//!
//! Every numerical module is generic over [`Real`] (`f32` or `f64`); the
//! `f64` aliases below are what the binary and most tests use.

pub mod cli;
pub mod config;
pub mod constraints;
pub mod energy;
pub mod error;
pub mod flow;
pub mod graphgeom;
pub mod hessian;
pub mod io;
pub mod linalg;
pub mod refsurf;
pub mod scalar;
pub mod spectra;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::{Real, Sym2};

pub type Grid64 = refsurf::Grid<f64>;
pub type Surface64 = refsurf::ReferenceSurface<f64>;
pub type Geometry64<'g> = graphgeom::GeometryState<'g, f64>;
pub type Physics64 = energy::PhysicsParams<f64>;
pub type Target64 = energy::ComponentTarget<f64>;
pub type FlowState64 = flow::FlowState<f64>;
pub type Trajectory64 = flow::Trajectory<f64>;
pub type Checkpoint64 = io::Checkpoint<f64>;
