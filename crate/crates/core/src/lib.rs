//! Simulation of uplink power control in cell-free massive MIMO, where each UE
//! picks its transmit power by playing an exact potential game.
//!
//! Modules follow the processing chain:
//! [`propagation`] (layout, gains, correlation) -> [`association`] (pilots and
//! serving clusters) -> [`channel`] (MMSE estimation and realizations) ->
//! [`receiver`] (combiners and Monte-Carlo SINR) -> [`game`] (best-response
//! power control) -> [`harness`] (experiments and reports).
//!
//! Numerical code is generic over [`Real`] (`f32`, `f64`); payoff and potential
//! only need [`Field`] and also run over exact rationals.

// `!(x > 0)` style checks are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod association;
pub mod channel;
pub mod error;
pub mod game;
pub mod harness;
pub mod linalg;
pub mod propagation;
pub mod receiver;
pub mod rng;
pub mod scalar;

pub use association::{assign_pilots_and_clusters, ClusterAssignment, ScenarioId};
pub use channel::{ChannelEnsemble, EstimationStats, FrameConfig, PilotPowerMode};
pub use error::{Error, Result};
pub use game::{
    best_response, certify_epsilon_nash, payoff, payoff_gain, potential, run_game, run_game_with_gains, GameConfig,
    GameOutcome, GameState, InitialPowerRule, NashCertificate, Schedule, Termination,
};
pub use harness::{run_experiment, sweep_alpha, ExperimentConfig, MetricsReport};
pub use propagation::{CorrelationModel, LargeScaleState, Layout, LayoutConfig, PropagationConfig};
pub use receiver::{monte_carlo_sinr, CombinerId, SinrReport};
pub use scalar::{Field, Real};

pub type Layout64 = Layout<f64>;
pub type Layout32 = Layout<f32>;
pub type LargeScaleState64 = LargeScaleState<f64>;
pub type LargeScaleState32 = LargeScaleState<f32>;
pub type ChannelEnsemble64 = ChannelEnsemble<f64>;
pub type ChannelEnsemble32 = ChannelEnsemble<f32>;
pub type GameState64 = GameState<f64>;
pub type GameState32 = GameState<f32>;
pub type GameOutcome64 = GameOutcome<f64>;
pub type GameOutcome32 = GameOutcome<f32>;
