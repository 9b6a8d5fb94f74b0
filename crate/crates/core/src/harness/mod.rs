//! Experiment orchestration: drops, Game-PAS versus full power, metrics and
//! report tables.
//!
//! A drop is one layout realization. For every drop the pipeline is
//! layout -> large-scale gains -> pilots and clusters -> Game-PAS for each
//! `alpha` in the grid plus the full-power baseline -> Monte-Carlo SINR with
//! the final powers -> SE and EE. Drops run in parallel and are reassembled in
//! index order, so outputs only depend on the configuration and seed.

pub mod config;
pub mod report;

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::ExperimentConfig;
pub use report::{emit_json, emit_report, format_float, Cell, ReportFormat, Table};

use crate::association::{assign_pilots_and_clusters, AssignmentSnapshot, ClusterAssignment};
use crate::channel::{ChannelEnsemble, PilotPowerMode};
use crate::error::{Error, Result};
use crate::game::{run_game, GameConfig, GameOutcome, NashCertificate, Termination};
use crate::propagation::{generate_large_scale, seeded_layout, LargeScaleState, Layout, LayoutSnapshot};
use crate::receiver::{monte_carlo_sinr_many, SinrReport};
use crate::rng;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    GamePas,
    GreedyPas,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::GamePas => "game_pas",
            Strategy::GreedyPas => "greedy_pas",
        })
    }
}

/// Full-power baseline: `rho_k = P_max` for every UE.
pub fn greedy_pas<T: Real>(config: &ExperimentConfig) -> Vec<T> {
    vec![T::of(config.game.p_max); config.layout.num_ues]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeMetrics {
    pub ue_id: usize,
    pub rho_mw: f64,
    pub sinr: f64,
    /// bit/s/Hz.
    pub se: f64,
    /// bit/J.
    pub ee: f64,
}

/// Metrics of one power profile in one drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyMetrics {
    pub strategy: Strategy,
    pub alpha: Option<f64>,
    pub total_se: f64,
    pub min_se: f64,
    pub total_ee: f64,
    pub total_power_mw: f64,
    pub ues: Vec<UeMetrics>,
}

impl StrategyMetrics {
    /// `EE_k = B SE_k / rho_k`; totals are plain sums over UEs.
    pub fn new(strategy: Strategy, alpha: Option<f64>, powers_w: &[f64], sinr: &SinrReport, bandwidth: f64) -> Self {
        let ues: Vec<UeMetrics> = sinr
            .ues
            .iter()
            .zip(powers_w)
            .map(|(u, &p)| UeMetrics { ue_id: u.ue_id, rho_mw: p * 1e3, sinr: u.sinr, se: u.se, ee: bandwidth * u.se / p })
            .collect();
        Self {
            strategy,
            alpha,
            total_se: ues.iter().map(|u| u.se).sum(),
            min_se: ues.iter().map(|u| u.se).fold(f64::INFINITY, f64::min),
            total_ee: ues.iter().map(|u| u.ee).sum(),
            total_power_mw: ues.iter().map(|u| u.rho_mw).sum(),
            ues,
        }
    }
}

/// Convergence facts of one Game-PAS run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSummary {
    pub alpha: f64,
    pub termination: Termination,
    pub rounds: usize,
    pub accepted_updates: usize,
    pub messages: usize,
    pub certificate: NashCertificate,
}

impl GameSummary {
    pub fn new<T: Real>(alpha: f64, outcome: &GameOutcome<T>) -> Self {
        Self {
            alpha,
            termination: outcome.termination,
            rounds: outcome.state.iteration,
            accepted_updates: outcome.state.updates.len(),
            messages: outcome.state.trace.iter().map(|t| t.messages).sum(),
            certificate: outcome.certificate.clone(),
        }
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

/// Layout, gains and clusters of one drop.
#[derive(Debug, Clone)]
pub struct DropSetup<T: Real> {
    pub drop: usize,
    pub seed: u64,
    pub layout: Layout<T>,
    pub large: LargeScaleState<T>,
    pub assignment: ClusterAssignment,
}

impl<T: Real> DropSetup<T> {
    pub fn new(config: &ExperimentConfig, drop: usize) -> Result<Self> {
        let seed = rng::drop_seed(config.seed, drop as u64);
        let antennas = config.layout.antennas_per_ap;
        let layout = seeded_layout(&config.layout, seed)?;
        let large = generate_large_scale(&layout, antennas, &config.propagation, seed)?;
        let assignment = assign_pilots_and_clusters(&large.beta, antennas, config.frame.tau_p, config.scenario)?;
        Ok(Self { drop, seed, layout, large, assignment })
    }

    /// Game-PAS for every `alpha` of the grid, in grid order.
    pub fn run_games(&self, config: &ExperimentConfig) -> Result<Vec<(f64, GameOutcome<T>)>> {
        config
            .alpha_grid
            .iter()
            .map(|&alpha| {
                let game = GameConfig { alpha, ..config.game.clone() };
                Ok((alpha, run_game(&self.large, &self.assignment, &game)?))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropResult {
    pub drop: usize,
    pub seed: u64,
    pub num_ues: usize,
    pub layout: LayoutSnapshot,
    pub assignment: AssignmentSnapshot,
    /// One entry per grid `alpha`, in grid order.
    pub games: Vec<GameSummary>,
    pub game_pas: Vec<StrategyMetrics>,
    pub greedy_pas: StrategyMetrics,
}

fn to_f64<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64_lossy()).collect()
}

/// SINR of several profiles over one drop's channel realizations.
fn evaluate_profiles<T: Real>(
    config: &ExperimentConfig,
    setup: &DropSetup<T>,
    profiles: &[Vec<T>],
) -> Result<Vec<SinrReport>> {
    let p_max = T::of(config.game.p_max);
    let build = |pilots: Vec<T>| {
        ChannelEnsemble::new(&setup.large, &setup.assignment, &config.frame, pilots, config.ensemble_size, setup.seed)
    };
    match config.frame.pilot_power_mode {
        PilotPowerMode::FixedPmax => {
            let ensemble = build(ChannelEnsemble::pilot_powers_for(&config.frame, &profiles[0], p_max))?;
            monte_carlo_sinr_many(&ensemble, config.combiner, profiles)
        }
        // estimates depend on the profile; every profile sees the same channel draws
        PilotPowerMode::TrackDataPower => profiles
            .iter()
            .map(|p| {
                let ensemble = build(ChannelEnsemble::pilot_powers_for(&config.frame, p, p_max))?;
                Ok(monte_carlo_sinr_many(&ensemble, config.combiner, std::slice::from_ref(p))?.remove(0))
            })
            .collect(),
    }
}

/// Runs one drop end to end.
pub fn evaluate_drop<T: Real>(config: &ExperimentConfig, drop: usize) -> Result<DropResult> {
    let setup = DropSetup::<T>::new(config, drop)?;
    let outcomes = setup.run_games(config)?;
    let mut profiles: Vec<Vec<T>> = outcomes.iter().map(|(_, o)| o.state.rho.clone()).collect();
    profiles.push(greedy_pas(config));
    let mut sinr = evaluate_profiles(config, &setup, &profiles)?;
    let greedy_sinr = sinr.pop().expect("baseline profile evaluated");
    let greedy_powers = to_f64(profiles.last().expect("baseline profile present"));
    let game_pas = outcomes
        .iter()
        .zip(&sinr)
        .map(|((alpha, o), s)| StrategyMetrics::new(Strategy::GamePas, Some(*alpha), &to_f64(&o.state.rho), s, config.bandwidth))
        .collect();
    Ok(DropResult {
        drop,
        seed: setup.seed,
        num_ues: config.layout.num_ues,
        layout: LayoutSnapshot::new(&setup.layout, &setup.large),
        assignment: AssignmentSnapshot::from(&setup.assignment),
        games: outcomes.iter().map(|(a, o)| GameSummary::new(*a, o)).collect(),
        game_pas,
        greedy_pas: StrategyMetrics::new(Strategy::GreedyPas, None, &greedy_powers, &greedy_sinr, config.bandwidth),
    })
}

/// Means over drops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub strategy: Strategy,
    pub alpha: Option<f64>,
    pub total_se: f64,
    pub min_se: f64,
    pub total_ee: f64,
    pub total_power_mw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    TotalSe,
    MinSe,
    TotalEe,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::TotalSe, Metric::MinSe, Metric::TotalEe];

    pub fn of(self, m: &AggregateMetrics) -> f64 {
        match self {
            Metric::TotalSe => m.total_se,
            Metric::MinSe => m.min_se,
            Metric::TotalEe => m.total_ee,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::TotalSe => "total_se",
            Metric::MinSe => "min_se",
            Metric::TotalEe => "total_ee",
        })
    }
}

/// Grid point maximizing the drop-averaged metric, against the baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestAlpha {
    pub metric: Metric,
    pub alpha: f64,
    pub game_pas: f64,
    pub greedy_pas: f64,
}

impl BestAlpha {
    /// `game_pas / greedy_pas - 1`.
    pub fn relative_gain(&self) -> f64 {
        self.game_pas / self.greedy_pas - 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub num_ues: usize,
    pub drops: Vec<DropResult>,
    /// Game-PAS rows in grid order, then the baseline.
    pub aggregates: Vec<AggregateMetrics>,
    pub best: Vec<BestAlpha>,
}

impl MetricsReport {
    pub fn game_pas(&self) -> impl Iterator<Item = &AggregateMetrics> {
        self.aggregates.iter().filter(|a| a.strategy == Strategy::GamePas)
    }

    pub fn greedy_pas(&self) -> &AggregateMetrics {
        self.aggregates.iter().find(|a| a.strategy == Strategy::GreedyPas).expect("baseline aggregate present")
    }

    pub fn best(&self, metric: Metric) -> &BestAlpha {
        self.best.iter().find(|b| b.metric == metric).expect("every metric has a best alpha")
    }

    pub fn nonconverged_runs(&self) -> usize {
        self.drops.iter().flat_map(|d| &d.games).filter(|g| !g.converged()).count()
    }
}

fn mean_of(rows: &[&StrategyMetrics]) -> AggregateMetrics {
    let n = rows.len() as f64;
    let avg = |f: fn(&StrategyMetrics) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
    AggregateMetrics {
        strategy: rows[0].strategy,
        alpha: rows[0].alpha,
        total_se: avg(|r| r.total_se),
        min_se: avg(|r| r.min_se),
        total_ee: avg(|r| r.total_ee),
        total_power_mw: avg(|r| r.total_power_mw),
    }
}

fn aggregate(config: &ExperimentConfig, drops: &[DropResult]) -> (Vec<AggregateMetrics>, Vec<BestAlpha>) {
    let mut aggregates: Vec<AggregateMetrics> = (0..config.alpha_grid.len())
        .map(|j| mean_of(&drops.iter().map(|d| &d.game_pas[j]).collect::<Vec<_>>()))
        .collect();
    let greedy = mean_of(&drops.iter().map(|d| &d.greedy_pas).collect::<Vec<_>>());
    let best = Metric::ALL
        .iter()
        .map(|&metric| {
            // first grid point wins ties
            let top = aggregates.iter().fold(&aggregates[0], |b, a| if metric.of(a) > metric.of(b) { a } else { b });
            BestAlpha {
                metric,
                alpha: top.alpha.expect("game rows carry alpha"),
                game_pas: metric.of(top),
                greedy_pas: metric.of(&greedy),
            }
        })
        .collect();
    aggregates.push(greedy);
    (aggregates, best)
}

/// Runs every drop of `config` and aggregates the results.
pub fn run_experiment<T: Real>(config: &ExperimentConfig) -> Result<MetricsReport> {
    config.validate()?;
    let drops = (0..config.num_drops)
        .into_par_iter()
        .map(|d| {
            evaluate_drop::<T>(config, d).map_err(|e| Error::Drop {
                drop: d,
                seed: rng::drop_seed(config.seed, d as u64),
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (aggregates, best) = aggregate(config, &drops);
    Ok(MetricsReport { num_ues: config.layout.num_ues, drops, aggregates, best })
}

/// One experiment per entry of [`ExperimentConfig::ue_sweep`].
pub fn metrics_vs_k<T: Real>(config: &ExperimentConfig) -> Result<Vec<MetricsReport>> {
    config.ue_sweep().into_iter().map(|k| run_experiment::<T>(&config.with_num_ues(k))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub alpha: f64,
    pub total_se: f64,
    pub total_ee: f64,
    pub min_se: f64,
    pub total_power_mw: f64,
}

/// Trade-off rows of `report`, one per grid `alpha`, ascending.
pub fn tradeoff_rows(report: &MetricsReport) -> Vec<TradeoffRow> {
    let mut rows: Vec<TradeoffRow> = report
        .game_pas()
        .map(|a| TradeoffRow {
            alpha: a.alpha.expect("game rows carry alpha"),
            total_se: a.total_se,
            total_ee: a.total_ee,
            min_se: a.min_se,
            total_power_mw: a.total_power_mw,
        })
        .collect();
    rows.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    rows
}

/// Drop-averaged SE and EE of Game-PAS for each distinct grid `alpha`, ascending.
pub fn sweep_alpha<T: Real>(config: &ExperimentConfig) -> Result<(MetricsReport, Vec<TradeoffRow>)> {
    let mut grid = config.alpha_grid.clone();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    if grid.len() < 3 {
        return Err(Error::InvalidConfig(format!("the trade-off sweep needs at least 3 distinct alphas, got {}", grid.len())));
    }
    let report = run_experiment::<T>(&ExperimentConfig { alpha_grid: grid, ..config.clone() })?;
    let rows = tradeoff_rows(&report);
    Ok((report, rows))
}

/// Game-PAS runs on the first drop, for convergence traces.
#[derive(Debug, Clone)]
pub struct ConvergenceRun<T: Real> {
    pub setup: DropSetup<T>,
    pub outcomes: Vec<(f64, GameOutcome<T>)>,
}

impl<T: Real> ConvergenceRun<T> {
    pub fn nonconverged_runs(&self) -> usize {
        self.outcomes.iter().filter(|(_, o)| !o.converged()).count()
    }

    pub fn summaries(&self) -> Vec<GameSummary> {
        self.outcomes.iter().map(|(a, o)| GameSummary::new(*a, o)).collect()
    }
}

pub fn run_convergence<T: Real>(config: &ExperimentConfig) -> Result<ConvergenceRun<T>> {
    config.validate()?;
    let setup = DropSetup::new(config, 0)?;
    let outcomes = setup.run_games(config)?;
    Ok(ConvergenceRun { setup, outcomes })
}

/// `alpha, iteration, total_power_mW, u, accepted_updates, messages`.
pub fn convergence_table<T: Real>(run: &ConvergenceRun<T>) -> Table {
    let mut t = Table::new("convergence", &["alpha", "iteration", "total_power_mW", "u", "accepted_updates", "messages"]);
    for (alpha, o) in &run.outcomes {
        for r in &o.state.trace {
            t.push(vec![
                (*alpha).into(),
                r.iteration.into(),
                r.total_power_mw.to_f64_lossy().into(),
                r.potential.to_f64_lossy().into(),
                r.accepted.into(),
                r.messages.into(),
            ]);
        }
    }
    t
}

/// One row per UE per recorded iteration.
pub fn game_trace_table<T: Real>(run: &ConvergenceRun<T>) -> Table {
    let mut t = Table::new(
        "game_trace",
        &["alpha", "iteration", "ue_id", "rho", "xi", "mu", "u", "total_power_mW", "messages"],
    );
    for (alpha, o) in &run.outcomes {
        for r in &o.state.trace {
            for k in 0..r.rho.len() {
                t.push(vec![
                    (*alpha).into(),
                    r.iteration.into(),
                    k.into(),
                    r.rho[k].to_f64_lossy().into(),
                    r.xi[k].to_f64_lossy().into(),
                    r.mu[k].to_f64_lossy().into(),
                    r.potential.to_f64_lossy().into(),
                    r.total_power_mw.to_f64_lossy().into(),
                    r.messages.into(),
                ]);
            }
        }
    }
    t
}

const METRIC_COLUMNS: [&str; 4] = ["total_se", "min_se", "total_ee", "total_power_mW"];

fn with_metrics(mut head: Vec<Cell>, m: &AggregateMetrics) -> Vec<Cell> {
    head.extend([m.total_se.into(), m.min_se.into(), m.total_ee.into(), m.total_power_mw.into()]);
    head
}

fn columns<'a>(head: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter().chain(tail).copied().collect()
}

/// Drop-averaged metrics for every UE count, strategy and grid point.
pub fn metrics_vs_k_table(reports: &[MetricsReport]) -> Table {
    let mut t = Table::new("metrics_vs_k", &columns(&["num_ues", "strategy", "alpha", "num_drops"], &METRIC_COLUMNS));
    for r in reports {
        for a in &r.aggregates {
            t.push(with_metrics(vec![r.num_ues.into(), a.strategy.to_string().into(), a.alpha.into(), r.drops.len().into()], a));
        }
    }
    t
}

/// Best grid point per metric and its gain over full power.
pub fn best_alpha_table(reports: &[MetricsReport]) -> Table {
    let mut t = Table::new("best_alpha", &["num_ues", "metric", "alpha", "game_pas", "greedy_pas", "relative_gain"]);
    for r in reports {
        for b in &r.best {
            t.push(vec![
                r.num_ues.into(),
                b.metric.to_string().into(),
                b.alpha.into(),
                b.game_pas.into(),
                b.greedy_pas.into(),
                b.relative_gain().into(),
            ]);
        }
    }
    t
}

/// Per-drop metrics, with convergence facts for Game-PAS rows.
pub fn per_drop_table(reports: &[MetricsReport]) -> Table {
    let mut t = Table::new(
        "per_drop",
        &columns(&["num_ues", "drop", "seed", "strategy", "alpha"], &["total_se", "min_se", "total_ee", "total_power_mW", "converged", "rounds"]),
    );
    for r in reports {
        for d in &r.drops {
            let rows = d.game_pas.iter().zip(d.games.iter().map(Some)).chain(std::iter::once((&d.greedy_pas, None)));
            for (m, g) in rows {
                t.push(vec![
                    d.num_ues.into(),
                    d.drop.into(),
                    d.seed.into(),
                    m.strategy.to_string().into(),
                    m.alpha.into(),
                    m.total_se.into(),
                    m.min_se.into(),
                    m.total_ee.into(),
                    m.total_power_mw.into(),
                    g.is_none_or(|g| g.converged()).into(),
                    g.map_or(0, |g| g.rounds).into(),
                ]);
            }
        }
    }
    t
}

/// Per-UE rows of every drop and strategy.
pub fn per_ue_table(reports: &[MetricsReport]) -> Table {
    let mut t = Table::new(
        "per_ue",
        &["num_ues", "drop", "strategy", "alpha", "ue_id", "rho_mW", "sinr", "se", "ee"],
    );
    for r in reports {
        for d in &r.drops {
            for m in d.game_pas.iter().chain(std::iter::once(&d.greedy_pas)) {
                for u in &m.ues {
                    t.push(vec![
                        d.num_ues.into(),
                        d.drop.into(),
                        m.strategy.to_string().into(),
                        m.alpha.into(),
                        u.ue_id.into(),
                        u.rho_mw.into(),
                        u.sinr.into(),
                        u.se.into(),
                        u.ee.into(),
                    ]);
                }
            }
        }
    }
    t
}

/// `alpha, total_se, total_ee, min_se, total_power_mW`, ascending in `alpha`.
pub fn tradeoff_table(rows: &[TradeoffRow]) -> Table {
    let mut t = Table::new("tradeoff", &["alpha", "total_se", "total_ee", "min_se", "total_power_mW"]);
    for r in rows {
        t.push(vec![r.alpha.into(), r.total_se.into(), r.total_ee.into(), r.min_se.into(), r.total_power_mw.into()]);
    }
    t
}
