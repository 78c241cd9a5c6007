//! Exponential-moment (B(phi)) and Grand Lebesgue norms of random variables,
//! generalized Khintchine constants for weighted sums of independent
//! variables, and executable checks of the inequalities that relate them.
//!
//! Module map:
//!
//! | module | contents |
//! |--------|----------|
//! | [`genfun`] | generating functions phi, conjugates, Conv_r, kappa, psi |
//! | [`dist`] | catalog laws with exact MGFs, moments, samplers |
//! | [`norms`] | B(phi), L_p and GLS norms with several engines |
//! | [`khinch`] | Khintchine sup/inf search and verification suites |
//! | [`entropy`] | covering numbers, Dudley integral, field simulator |

// `!(x >= lo)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coeffs;
pub mod dist;
pub mod entropy;
pub mod error;
pub mod genfun;
pub mod khinch;
pub mod norms;
pub mod numeric;
pub mod search;

pub use coeffs::CoefficientVector;
pub use dist::Distribution;
pub use error::{Error, Result};
pub use genfun::{GeneratingFunction, PsiFunction};
pub use norms::NormEstimate;
