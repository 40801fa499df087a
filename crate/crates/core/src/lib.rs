//! Billiard dynamics in smooth strictly convex tables: ray tracing, focusing of
//! reflected line families, billiard-path solvers, local table perturbations and
//! a pipeline building families of billiard paths in general position.
// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]


pub mod beams;
pub mod curve;
pub mod error;
pub mod geom;
pub mod paths;
pub mod perturb;
pub mod ray;
pub mod security;

pub use curve::{NormalBump, Table, TubularCoords};
pub use error::{Error, Result};
pub use geom::Vec2;
pub use ray::{PolygonalPath, RayState};
