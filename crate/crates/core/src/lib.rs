//! Dimension reduction for multivariate regression with principal
//! components and principal fitted components.
//!
//! The crate covers the growth-curve form `Y = Jμ' + XΓZ' + e` of the
//! inverse regression model: the three covariance estimators built from
//! a centered design, maximum likelihood estimation of `C(Z)` under
//! isotropic and structured error covariances (with exhaustive or
//! sequential eigenvector-subset selection), moment-based estimates, and a
//! Monte Carlo harness for checking the closed-form expectations.
//!
//! ```
//! use pfcreduce::matalg::{sym_eig, SymMat};
//!
//! let e = sym_eig(&SymMat::diag(&[3.0, 1.0, 2.0])).unwrap();
//! assert_eq!(e.values, vec![3.0, 2.0, 1.0]);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod estimators;
pub mod matalg;
pub mod models;
pub mod simulate;

pub use error::{Error, ErrorClass, Result};
