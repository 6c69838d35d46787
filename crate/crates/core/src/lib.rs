//! Learning-rate policy engine.
//!
//! * [`schedule`]: fixed, decaying, cyclic and composite learning-rate policies.
//! * [`optim`]: SGD, Momentum and Adam updates.
//! * [`harness`]: synthetic tasks and the training loop producing [`harness::TrialRecord`]s.
//! * [`tuner`]: range test, grid/random search, plateau-driven composition and ranking.
//! * [`verifier`]: three-phase policy verification and the M-opt estimate.
//! * [`db`]: JSON-lines store of trial records.

pub mod db;
pub mod harness;
pub mod optim;
pub mod schedule;
pub mod tuner;
pub mod verifier;
