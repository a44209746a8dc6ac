//! Removal of observed-confounder bias from categorical study data.
//!
//! A study is a three-way contingency table over an outcome `Y`, independent
//! (intervention) variables `X` and confounders `S`. The PR-projection is the
//! distribution closest to the empirical table in I-divergence that
//!
//! * distributes confounder profiles identically in every group
//!   (`p_{X,S} = f_X * f_S`, structural parity), and
//! * keeps the observed outcome-confounder association
//!   (`p_{Y,S} = f_{Y,S}`, confounder realism).
//!
//! Effect sizes computed on it answer how the intervention would look in a
//! study without structural imbalance. The crate also ships the comparators
//! (logit projection, parity-only projection, Mantel-Haenszel pooling),
//! significance tests for the observed data, and a multinomial replicate
//! harness.
//!
//! The crate is `no_std` and needs only `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod effects;
pub mod error;
pub mod fixtures;
pub mod projection;
pub mod simulate;
pub mod stats;
pub mod table;

pub use effects::{EffectReport, Estimate, Event, Provenance, StratumTable2x2, Undefined};
pub use error::{Error, Result};
pub use projection::{
    hypothetical_conditional, ipf_fit, kl_divergence, logit_projection, parity_only_projection,
    pr_projection, MarginalConstraint, ProjectionKind, ProjectionResult, ProjectionSpec, Settings,
    StudyLayout,
};
pub use simulate::{FluctuationSummary, Metric, ReplicateConfig};
pub use table::{Assignment, JointTable, Role, Schema, Support, TableKind, VarSet, Variable};
