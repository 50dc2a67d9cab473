//! Pilot assignment for cell-free massive MIMO networks.
//!
//! * [`hungarian`]: maximum-reward square assignment and its brute-force oracle.
//! * [`network`]: random drops, path loss, correlated shadowing, serving sets.
//! * [`rates`]: channel-estimate statistics, power control, DL/UL rate bounds.
//! * [`incremental`]: cheap re-evaluation of rates after single-user pilot moves.
//! * [`pilot`]: the iterative Hungarian pilot assignment and its baselines.
//! * [`campaign`]: paired Monte Carlo campaigns and their outputs.

pub mod campaign;
pub mod config;
pub mod error;
pub mod hungarian;
pub mod incremental;
pub mod network;
pub mod pilot;
pub mod rates;
pub mod stats;

pub use campaign::{
    emit_outputs, parse_algorithms, read_records, run_campaign, AlgoRun, Algorithm, CampaignConfig,
    CampaignResult, Metric, Record,
};
pub use config::SystemConfig;
pub use error::{Error, Result};
pub use hungarian::{solve_brute_force, solve_max, Assignment, RewardMatrix};
pub use incremental::RateState;
pub use network::{Drop, Position};
pub use pilot::{
    greedy_step, neighbor_set, random_assignment, reward_matrix, run_greedy_baseline,
    run_hungarian_pa, run_rpa, GreedyStep, NeighborSets, PaResult, PaRunConfig, PilotAssignment,
    RewardMode,
};
pub use rates::{DlBound, DlPowerMode, RateModel, RateSettings, RateVector, SinrTerms};
pub use stats::{empirical_cdf, percentile};
