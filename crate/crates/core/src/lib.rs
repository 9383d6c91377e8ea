//! Verification of systems built from several interdependent stochastic
//! models.
//!
//! Models are written in a subset of the PRISM language ([`prism`]) and
//! queried with PCTL/CSL properties ([`props`]). A [`worldmodel::WorldModel`]
//! ties models together: some constants of one model are results of
//! properties checked on another, others are inferred from observations
//! ([`infer`]). [`worldmodel::verify`] resolves them in dependency order and
//! solves circular dependencies with [`solve`].

pub mod expr;
pub mod num;
pub mod prism;
pub mod syntax;
pub mod props;
pub mod graph;
pub mod linalg;
pub mod engines;
pub mod parametric;
pub mod solve;
pub mod infer;
pub mod worldmodel;
pub mod cli;
