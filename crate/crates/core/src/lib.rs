//! Guaranteed-safe exploration in finite MDPs under Bayesian model uncertainty.
//!
//! The crate is organised bottom-up:
//!
//! * [`mdp`]: sparse, possibly sub-stochastic MDPs with policy evaluation and
//!   value iteration.
//! * [`lp`]: linear programs in sparse triplet form plus two revised-simplex
//!   solvers (a dense reference implementation and a sparse LU-based one).
//! * [`cmdp`]: the occupation-measure LP for a single-constraint MDP.
//! * [`belief`]: beliefs over MDP dynamics, the pessimistic reward correction
//!   and exploration bonuses.
//! * [`explorer`]: the two-step planner (return policy, then constrained
//!   exploration) and the Monte-Carlo safety check.
//! * [`env`]: grid and terrain simulators plus the counter-example fixtures.
//! * [`harness`]: scenario configuration, benchmark sweeps and metrics output.

pub mod belief;
pub mod cmdp;
pub mod env;
pub mod error;
pub mod explorer;
pub mod harness;
pub mod linalg;
pub mod lattice;
pub mod lp;
pub mod mdp;
pub mod par;
pub mod rng;

pub use error::{Error, Result};
pub use mdp::{Mdp, StochasticPolicy, ValueFunction};
