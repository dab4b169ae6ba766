//! Zeroth-order nonconvex optimization with negative-curvature finding.
//!
//! Everything an algorithm learns about an objective comes from metered
//! single-component function evaluations. The crate provides finite-sum
//! black-box problems with exact query accounting ([`oracle`]), gradient and
//! Hessian-vector estimators built purely from function values
//! ([`estimators`]), negative-curvature-finding subroutines ([`ncf`]), full
//! solvers that combine descent with curvature escapes ([`solvers`]), and
//! reference first-order-free baselines ([`baselines`]).

pub mod baselines;
pub mod error;
pub mod estimators;
pub mod ncf;
pub mod oracle;
pub mod solvers;
pub mod spectral;

pub use error::{Error, Result};
