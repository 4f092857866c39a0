//! Exact inference over induced networks: variable elimination with a
//! greedy fill-minimizing ordering, and the forward interface filter that
//! exploits counting, one-step and per-action payoff structure.

mod filter;
mod ve;

pub use filter::{
    csi_decompose, csi_expected_payoff, interface_filter, interface_filter_with_stats,
    step_chance, step_decisions_counts, CsiComponent, CsiOutcome, FilterOutcome, FilterState,
};
pub use ve::{
    elimination_width, expected_real_value, min_fill_ordering, posterior, variable_elimination,
    CellTracker, VeOutcome,
};
