//! Online calibration of set predictors with long-term and localized risk control.
//!
//! Given a pretrained model that scores candidate outputs, a set predictor keeps
//! every candidate whose nonconformity score falls at or below a threshold. This
//! crate adapts that threshold online, from loss feedback only, using three
//! related controllers:
//!
//! - **ARC** (adaptive risk control): a single scalar threshold updated as
//!   `λ_{t+1} = λ_t + η_t (L_t − α)`, which drives the cumulative loss to the
//!   target `α` on *any* data sequence.
//! - **Mondrian ARC**: one independent ARC instance per cell of a user-supplied
//!   covariate partition.
//! - **L-ARC** (localized ARC): the threshold becomes a *function*
//!   `g_t(·) = f_t(·) + c_t` with `f_t` living in the RKHS of a stationary
//!   kernel. Kernel-weighted updates raise the threshold near covariates that
//!   recently incurred high loss, which equalizes risk across subpopulations
//!   while keeping the worst-case long-term guarantee of ARC.
//!
//! The crate also ships the bound machinery that makes those guarantees
//! checkable at runtime: RKHS-norm bounds on `f_t`, uniform box bounds on
//! `g_t`, the deterministic trajectory bound on `|L̄(T) − α|`, and the
//! localized-risk gap for kernel weighting functions. See [`metrics`] and
//! [`monitor`].
//!
//! The core is `no_std`-compatible (requires `alloc`; enable the `libm`
//! feature for float math without `std`). IO, streams and the experiment CLI
//! live in the companion `larc-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod controllers;
pub mod error;
pub mod event;
pub mod kernels;
pub mod losses;
pub mod metrics;
pub mod monitor;
pub mod threshold;

mod math;

pub use error::{Error, Result};
pub use kernels::{KernelFamily, KernelSpec};
pub use threshold::{LarcConfig, LarcState};
