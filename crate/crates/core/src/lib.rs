//! Bregman stochastic proximal point methods for finite-sum convex problems.
//!
//! The crate is organised around a single outer loop that, at every step,
//! samples a component `f_i` and solves the perturbed Bregman proximal
//! subproblem
//!
//! ```text
//! x_{k+1} = argmin_x { f_i(x) - <e_k, x - x_k> + (1/alpha_k) D_h(x, x_k) }
//! ```
//!
//! where `e_k` is a zero-mean variance-reduction term. Choosing `e_k` gives
//! the vanilla method (`e_k = 0`), a SAGA-style table, a loopless SVRG-style
//! anchor or a double-loop SVRG-style anchor. An explicit (mirror-SGD)
//! update mode shares the same estimators.
//!
//! Modules:
//! - [`kernels`]: Bregman kernels, mirror maps and divergences.
//! - [`problems`]: finite-sum objectives (Poisson inverse problems, separable quadratics).
//! - [`prox`]: closed-form and inexact solvers for the proximal subproblem.
//! - [`algorithms`]: estimators and the unified run loop.
//! - [`theory`]: rate constants, step-size caps, contraction factors and diagnostics.
//! - [`harness`]: configuration, CSV traces, sweeps and the property verification suite.

pub mod algorithms;
pub mod error;
pub mod harness;
pub mod kernels;
pub mod linalg;
pub mod problems;
pub mod prox;
pub mod theory;

pub use error::{Error, Result};
