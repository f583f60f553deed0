//! Barrier oracles for sum-of-squares polynomial cones and a generic
//! non-symmetric conic interior-point solver.
//!
//! The cones are the duals of the weighted SOS cone and of its matrix,
//! second-order and l1-norm generalizations, all parameterized by polynomial
//! values at unisolvent interpolation points ([`polybasis`]). [`lifting`]
//! holds the linear lifting operators, [`barriers`] the barrier oracles,
//! [`ipm`] the homogeneous self-dual solver and [`envelope`] the polynomial
//! envelope benchmark built on top of them.

pub mod barriers;
pub mod envelope;
pub mod error;
pub mod exec;
pub mod ipm;
pub mod linalg;
pub mod lifting;
pub mod polybasis;
pub mod selfcheck;

pub use error::{Error, Result};
pub use exec::Exec;
