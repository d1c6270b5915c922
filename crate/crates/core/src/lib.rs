//! Special-function construction, numerical certification and extremal
//! witnesses for the sharp maximal inequalities
//!
//! ```text
//! ||g*||_p <= p ||f||_p              (f, g martingales, |dg| <= |df|)
//! ||g*||_p <= (alpha+1) p ||f||_p    (f >= 0 submartingale, g alpha-strongly subordinate)
//! ```
//!
//! for `p >= 2`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gamma;
pub mod ode;
pub mod roots;
pub mod sharpness;
pub mod special;
pub mod sum;
pub mod tree_sim;
pub mod verify;

pub use error::{Error, Result};
pub use gamma::{gamma_linear, solve_gamma, GammaSolution, Params};
pub use special::{big_u_eval, big_u_grad, classify, u_eval, Point3, Region};
