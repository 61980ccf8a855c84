//! Physics-informed estimation of muscle forces from enveloped sEMG.
//!
//! A small fully connected network maps EMG (and normalized time) to the
//! joint angle and one force per muscle. Training combines the angle error
//! with two physics terms: the residual of the joint equation of motion,
//! with torques from a Hill-type muscle model, and the gap between the
//! network forces and the Hill forces. The Hill model's maximum isometric
//! forces, optimal fiber lengths and activation shape factor are identified
//! alongside the network weights, each kept inside a bound by a sigmoid.
//!
//! Modules, bottom up: [`autodiff`] (tape-based reverse mode), [`hill`],
//! [`dynamics`] (joint model, RK4 simulator, synthetic data), [`signal`]
//! (EMG envelopes, trial CSV), [`network`], [`loss`], [`train`], [`plot`],
//! [`config`] and [`cli`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod hill;
pub mod loss;
pub mod network;
pub mod plot;
pub mod signal;
pub mod train;

pub use error::{Error, Result};
