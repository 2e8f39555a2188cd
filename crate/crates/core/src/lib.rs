//! Health-focused optimal power flow.
//!
//! Equipment health indices derate generator, battery and voltage limits
//! ([`health`]); the resulting AC-OPF is relaxed to a semidefinite program
//! ([`formulation`]), solved by [`hfopf_conic`], and mapped back to a
//! dispatch ([`recovery`]). [`oracle`] is an independent power-flow grid
//! search used to check the relaxation, and [`harness`] drives single
//! solves and sweeps.

// `!(x > 0.0)` is used on purpose so NaN fails validation too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod formulation;
pub mod harness;
pub mod health;
pub mod network;
pub mod oracle;
pub mod recovery;

pub use error::{CaseError, HealthError, HfopfError, RecoveryError};
