//! Quantized state feedback of nonlinear systems over a channel subject to
//! time-constrained Denial-of-Service.
//!
//! * [`dynamics`]: plant, control law, certificate, RK4 and estimators.
//! * [`dos`]: attack budgets, sequences, validation and generation.
//! * [`codec`]: the synchronized encoder/decoder with zooming range.
//! * [`bounds`]: the derived parameter chain and rate bounds.
//! * [`sim`]: closed-loop simulation, audits and sweeps.
//! * [`cli`]: the `dosq` command line.

// `!(x > 0.0)` is used deliberately so NaN takes the rejecting branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod codec;
pub mod dos;
pub mod dynamics;
pub mod scaled;
pub mod sim;
