//! Exact planning, simulation and auditing of fiduciary exploration mechanisms for
//! bandits with once-realized deterministic rewards.
//!
//! The crate is organized bottom-up: [`instance`] models priors, [`gmdp`] plans the optimal
//! individually rational exploration policy, [`mechanism`] runs recommendation mechanisms
//! round by round, [`audit`] checks their constraints exactly and [`sim`] estimates welfare by
//! Monte Carlo. [`tree`] prints a planned policy as text, and [`cli`] wires everything into
//! batch commands.

pub mod audit;
pub mod cli;
pub mod error;
pub mod gmdp;
pub mod instance;
pub mod mechanism;
pub mod rational;
pub mod sim;
pub mod tree;

pub use error::{Error, Result};
pub use gmdp::{plan, ActionPair, GmdpState, Policy, Portfolio};
pub use instance::{Instance, RewardPmf};
pub use rational::Rat;
