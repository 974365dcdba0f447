//! Zeroth-order gradient estimation with generalized parameter-shift rules.
//!
//! The estimate `r [f(x + ε) - f(x - ε)]` covers the central difference
//! (`r = 1/(2ε)`), the quantum two-term rule (`r = Ω / (2 sin Ωε)`) and any
//! calibrated pair in between. The crate provides:
//!
//! - [`oracle`]: query-counted black-box functions,
//! - [`estimators`]: shift-rule, PSR and finite-difference estimators,
//! - [`calibration`]: grid search over `(r, ε)` and closed-form `r = h(ε)`,
//! - [`testbed`]: benchmark functions and perceptrons with exact gradients,
//! - [`quantum`]: a 1–2 qubit statevector engine for PSR validation,
//! - [`experiment`]: seeded sampling, distance errors and CSV/JSON reports.

pub mod calibration;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod oracle;
pub mod quantum;
pub mod testbed;

pub use error::{Error, Result};
pub use oracle::{BlackBoxFunction, GradientEstimate, Method};
