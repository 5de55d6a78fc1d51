//! Numerical experiments on the Hofer length of Hamiltonian paths of
//! Lagrangian submanifolds.
//!
//! The core types are generic over a [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the common double-precision case.

pub mod crit;
pub mod error;
pub mod extend;
pub mod flow;
pub mod geom;
pub mod hofer;
pub mod lagr;
pub mod scalar;
pub mod scenarios;

pub use error::{Error, Result};
pub use geom::{ManifoldKind, Point, TangentVector};
pub use scalar::Scalar;

pub type Point64 = geom::Point<f64>;
pub type TangentVector64 = geom::TangentVector<f64>;
pub type LagrangianMesh64 = lagr::LagrangianMesh<f64>;
pub type PathLift64 = lagr::PathLift<f64>;
pub type AssociatedFunction64 = lagr::AssociatedFunction<f64>;
pub type HamiltonianSpec64 = flow::HamiltonianSpec<f64>;
pub type ScenarioReport = scenarios::ScenarioReport;
pub type CriticalityReport = crit::CriticalityReport;
