//! Temporal action-graph games: compact dynamic games on shared action nodes,
//! compiled into Bayesian networks for exact expected-utility computation.
//!
//! A game is played over discrete time steps on a set of action nodes whose
//! counts accumulate as decisions are made. Together with a behavior strategy
//! profile, a game compiles into a network of conditional distributions
//! ([`net::InducedNet`]). Expected utilities can then be computed three ways:
//!
//! * variable elimination directly on the induced network,
//! * variable elimination on a rewritten network that exposes the counting
//!   structure and the one-step (Markov) property ([`transform`]),
//! * a forward filtering pass over per-step interface distributions, with
//!   per-action decomposition of the payoff multiplexer ([`inference`]).
//!
//! All three agree to within numerical tolerance; the filtering pass is the
//! one that scales with game duration.

pub mod bench;
pub mod error;
pub mod factor;
pub mod generators;
pub mod inference;
pub mod io;
pub mod model;
pub mod net;
pub mod ops;
pub mod oracle;
pub mod transform;

pub use error::{Error, Result};
