//! Discrete conformal maps of triangulated surfaces.
//!
//! Metrics are stored as edge lengths with their logarithmic lengths
//! `lambda`. Scale factors `u` on vertices act by `lambda_ij + u_i + u_j`.
//! Conformal maps are found by minimizing convex energies in `u` (and in some
//! problems also in `lambda`) with a damped Newton method.

pub mod kernel;
pub mod mesh;
pub mod energy;
mod flow;
pub mod solver;
pub mod mapping;
pub mod hypgeom;
