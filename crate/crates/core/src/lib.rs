//! Transition-weight estimation for stochastic workflow nets.
//!
//! A workflow net with positive transition weights induces a distribution over
//! traces. This crate builds the reachability graph of a net, unfolds it into
//! exact trace probabilities, compares the result with an event log under
//! several divergences and searches for weights that minimise them.


pub mod distances;
pub mod eventlog;
pub mod fixtures;
pub mod generate;
pub mod net;
pub mod optimizer;

pub mod semantics;
pub mod simulation;
pub mod unfolding;

pub use eventlog::{EventLog, StochasticLanguage, Trace};
pub use net::{LabeledPetriNet, StochasticWorkflowNet, WeightVector, WorkflowNet};
