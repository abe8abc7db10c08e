//! MAP inference in higher-order CRFs by learned sequential labeling.
//!
//! An instance ([`crf::CrfInstance`]) defines an energy over labelings with
//! unary, gated Potts pairwise and two kinds of higher-order clique terms.
//! Labeling is cast as an episode of `N` steps ([`env`]), each assigning one
//! label to one free node. A graph embedding network ([`policy`]) scores all
//! actions; it is trained with Q-learning ([`dqn`]) or distilled from Monte
//! Carlo tree search ([`mcts`]) and compared against classical solvers
//! ([`baselines`]).

pub mod baselines;
pub mod crf;
pub mod dqn;
pub mod env;
pub mod error;
pub mod explore;
pub mod harness;
pub mod instances;
pub mod mcts;
pub mod policy;
pub mod replay;
pub mod training;

pub use error::{Error, Result};
