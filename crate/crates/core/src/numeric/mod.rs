//! Shared numeric building blocks: special functions, quadrature, and small
//! dense linear algebra. Everything is generic over [`crate::num::Real`] and
//! kept dependency free so the estimation modules stay self contained.

pub mod linalg;
pub mod quadrature;
pub mod special;
