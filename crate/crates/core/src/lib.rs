//! Computation-tree analysis and discrete-event simulation of asynchronous,
//! local and hybrid SGD methods.
//!
//! Every method is a [`sim::Policy`] driving simulated workers; each run
//! yields a [`tree::ComputationTree`] whose main branch can be audited with
//! [`tree::verify_conditions`].

pub mod algorithms;
pub mod experiments;
pub mod problems;
pub mod sim;
pub mod timing;
pub mod tree;
