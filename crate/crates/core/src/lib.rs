//! Change-point detection for functional time series.
//!
//! Curves are represented by their coefficients in an orthonormal basis of
//! `L^2[0,1]`, so every Hilbert-space computation reduces to linear algebra on
//! coefficient vectors. The crate provides:
//!
//! * [`hilbert`]: bases, samples, inner products, tensor operators.
//! * [`covariance`]: lagged covariance operators and kernel (Bartlett-type)
//!   long-run covariance estimates.
//! * [`spectral`]: a Jacobi eigensolver and truncated inverse square roots.
//! * [`cusum`]: projected CUSUM statistics, including the change-aligned
//!   first principal component.
//! * [`critval`]: quantiles of the supremum of the norm of Brownian bridges.
//! * [`datagen`]: Brownian-motion functional noise and trend scenarios A-F.
//! * [`oracle`]: deterministic limit quantities used to test the asymptotics.
//! * [`study`]: rejection-rate studies and component tables.

pub mod covariance;
pub mod critval;
pub mod cusum;
pub mod datagen;
pub mod error;
pub mod hilbert;
pub mod io;
pub mod oracle;
pub mod spectral;
pub mod study;

pub use error::{Error, Result};
