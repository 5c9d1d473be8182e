//! Tabular toolkit for target-assisted model-based planning on gridworlds.
//!
//! Exact MDP factories (`gridworld`), DP ground truths (`dp`), C51-style
//! histograms (`distributional`), hindsight relabeling (`replay`),
//! goal-conditioned distributional estimators (`estimators`), a tabular
//! checkpoint generator (`generator`), proxy-problem planning (`proxy`),
//! prioritized tree-search MPC (`search`), agent loops (`agents`) and the
//! experiment layer (`experiments`, `cli`).
//!
//! Runnable walkthroughs live in `examples/`:
//!
//! ```text
//! cargo run --example gridworld_tour
//! cargo run --example dp_oracle
//! cargo run --example histograms
//! cargo run --example hindsight_relabel
//! cargo run --example feasibility_evaluator
//! cargo run --example proxy_planning
//! cargo run --example tree_search_mpc
//! cargo run --example skipper_agent
//! cargo run --example dyna_plus
//! cargo run --example bound_check
//! ```

pub mod agents;
pub mod cli;
pub mod distributional;
pub mod dp;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod generator;
pub mod gridworld;
pub mod mdp;
pub mod proxy;
pub mod replay;
pub mod search;

pub use error::{Error, Result};

/// RNG used everywhere; seeded explicitly so every run is reproducible.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Seeded RNG constructor.
pub fn rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}

/// Encoded target / state identifier (see [`gridworld::StateCodec`]).
pub type Code = u32;
