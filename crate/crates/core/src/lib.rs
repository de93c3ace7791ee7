//! Numerical geometry of real diagonal Heintze groups `ℝ ⋉_A ℝ^d`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod atlas;
pub mod coarse;
pub mod connection;
pub mod convexity;
pub mod distance;
pub mod error;
pub mod experiments;
pub mod geodesic;
pub mod group;
pub mod growth;
pub mod horosphere;
pub mod mesh;
pub mod par;
pub mod projection;
pub mod quadrature;
pub mod rays;
pub mod shortest;

pub use error::{Error, Result};
pub use group::{HeintzeGroup, Point, Tangent, TangentVector};
