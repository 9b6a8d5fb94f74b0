//! Game-PAS: uplink power control as a potential game.
//!
//! Each UE `k` picks a data power `rho_k` in `[rho_min, rho_max]`. With cluster
//! gain `Lambda_k = sum_{l in M_k} beta_kl` and effective gain
//! `xi_k = rho_k Lambda_k^alpha`, UE `k` minimizes
//!
//! ```text
//! mu_k(xi) = (sum_{i != k} xi_i) / xi_k + xi_k sum_{i != k} 1 / xi_i
//! ```
//!
//! and `u(xi) = 1/2 sum_k mu_k(xi)` is an exact potential: any unilateral
//! change of `rho_k` moves `u` by exactly the change in `mu_k`. The unique
//! unconstrained minimizer of `mu_k` is
//! `xi_k* = sqrt(sum_{i != k} xi_i / sum_{i != k} 1 / xi_i)`.
//!
//! Payoff and potential are generic over [`Field`] so tests can evaluate them
//! exactly over rationals; everything else works on [`Real`].

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::association::{cluster_gains, ClusterAssignment};
use crate::error::{Error, Result};
use crate::propagation::LargeScaleState;
use crate::scalar::{rel_diff, Field, Real};

/// Order in which UEs revise their powers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Round-robin: each UE responds to the latest powers, in index order.
    #[default]
    Sequential,
    /// All UEs respond to the same snapshot, then update together.
    Simultaneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialPowerRule {
    /// `rho_k = P_max`.
    #[default]
    FullPower,
    /// `rho_k = P_max / n`.
    Fraction(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameConfig {
    pub alpha: f64,
    /// Minimum payoff improvement for an update to be accepted.
    pub epsilon: f64,
    /// Watts.
    pub rho_min: f64,
    pub rho_max: f64,
    pub p_max: f64,
    pub schedule: Schedule,
    /// Maximum number of rounds.
    pub max_iterations: usize,
    pub initial_power_rule: InitialPowerRule,
    /// Grid points per UE used to certify the final profile.
    pub probe_grid_size: usize,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            epsilon: 1e-18,
            rho_min: 1e-6,
            rho_max: 0.1,
            p_max: 0.1,
            schedule: Schedule::Sequential,
            max_iterations: 500,
            initial_power_rule: InitialPowerRule::FullPower,
            probe_grid_size: 1000,
        }
    }
}

impl GameConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::InvalidConfig(format!("alpha must be finite and non-negative, got {}", self.alpha)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(0.0 < self.rho_min && self.rho_min <= self.rho_max && self.rho_max <= self.p_max) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < rho_min <= rho_max <= p_max, got {} / {} / {}",
                self.rho_min, self.rho_max, self.p_max
            )));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if let InitialPowerRule::Fraction(n) = self.initial_power_rule {
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::InvalidConfig(format!("initial power fraction must be positive, got {n}")));
            }
        }
        Ok(())
    }

    /// `rho^(0)` clamped to the strategy set.
    pub fn initial_power(&self) -> f64 {
        let p = match self.initial_power_rule {
            InitialPowerRule::FullPower => self.p_max,
            InitialPowerRule::Fraction(n) => self.p_max / n,
        };
        p.clamp(self.rho_min, self.rho_max)
    }
}

fn check_profile<T: Field>(xi: &[T], k: usize) -> Result<()> {
    if xi.len() < 2 {
        return Err(Error::InvalidInput(format!("the game needs at least 2 UEs, got {}", xi.len())));
    }
    if k >= xi.len() {
        return Err(Error::InvalidInput(format!("UE index {k} out of range")));
    }
    if let Some(x) = xi.iter().find(|x| !(**x > T::zero())) {
        return Err(Error::InvalidInput(format!("effective gains must be positive, found {x:?}")));
    }
    Ok(())
}

/// `mu_k(xi)`.
pub fn payoff<T: Field>(xi: &[T], k: usize) -> Result<T> {
    check_profile(xi, k)?;
    let xk = xi[k].clone();
    let mut others = T::zero();
    let mut inv_others = T::zero();
    for (i, x) in xi.iter().enumerate() {
        if i != k {
            others = others + x.clone();
            inv_others = inv_others + T::one() / x.clone();
        }
    }
    Ok(others / xk.clone() + xk * inv_others)
}

/// `u(xi) = 1/2 sum_k mu_k(xi)`.
pub fn potential<T: Field>(xi: &[T]) -> Result<T> {
    check_profile(xi, 0)?;
    let mut sum = T::zero();
    for k in 0..xi.len() {
        sum = sum + payoff(xi, k)?;
    }
    Ok(sum / (T::one() + T::one()))
}

/// `xi_k = rho_k Lambda_k^alpha`.
pub fn effective_gains<T: Real>(rho: &[T], lambda: &[T], alpha: T) -> Vec<T> {
    rho.iter().zip(lambda).map(|(&r, &g)| r * Float::powf(g, alpha)).collect()
}

fn others_sums<T: Real>(xi: &[T], k: usize) -> (T, T) {
    xi.iter()
        .enumerate()
        .filter(|&(i, _)| i != k)
        .fold((T::zero(), T::zero()), |(s, q), (_, &x)| (s + x, q + T::one() / x))
}

fn check_candidate<T: Field>(candidate: &T) -> Result<()> {
    if !(*candidate > T::zero()) {
        return Err(Error::InvalidInput(format!("candidate gain must be positive, got {candidate:?}")));
    }
    Ok(())
}

/// `mu_k(xi) - mu_k(xi with xi_k replaced by candidate)`.
///
/// Evaluated as `(a - b)(Q a b - S) / (a b)` with `S`, `Q` the sums of the
/// other UEs' gains and inverse gains, which keeps full relative accuracy
/// when the two payoffs are nearly equal.
pub fn payoff_gain<T: Field>(xi: &[T], k: usize, candidate: T) -> Result<T> {
    check_profile(xi, k)?;
    check_candidate(&candidate)?;
    let mut s = T::zero();
    let mut q = T::zero();
    for (i, x) in xi.iter().enumerate() {
        if i != k {
            s = s + x.clone();
            q = q + T::one() / x.clone();
        }
    }
    let a = xi[k].clone();
    let b = candidate;
    let ab = a.clone() * b.clone();
    Ok((a - b) * (q * ab.clone() - s) / ab)
}

/// `u(xi with xi_k replaced by candidate) - u(xi)`, summed pair by pair as
/// `sum_{i != k} (b - a)(a b - xi_i^2) / (a b xi_i)`; pairs without `k` cancel.
pub fn potential_change<T: Field>(xi: &[T], k: usize, candidate: T) -> Result<T> {
    check_profile(xi, k)?;
    check_candidate(&candidate)?;
    let a = xi[k].clone();
    let b = candidate;
    let ab = a.clone() * b.clone();
    let mut sum = T::zero();
    for (i, x) in xi.iter().enumerate() {
        if i != k {
            sum = sum + (ab.clone() - x.clone() * x.clone()) / (ab.clone() * x.clone());
        }
    }
    Ok((b - a) * sum)
}

/// Best response of one UE, before and after projection onto the strategy set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponse<T> {
    pub unclamped: T,
    pub clamped: T,
}

/// Closed-form minimizer of `mu_k` over `rho_k` given the other UEs' powers.
///
/// `rho_k* = sqrt( sum_{i != k} rho_i Lambda_i^alpha
///                / sum_{i != k} Lambda_k^{2 alpha} / (rho_i Lambda_i^alpha) )`,
/// evaluated as `sqrt(S / Q) / Lambda_k^alpha` to avoid forming `Lambda_k^{2 alpha}`.
pub fn best_response<T: Real>(
    k: usize,
    rho: &[T],
    lambda: &[T],
    alpha: T,
    bounds: (T, T),
) -> Result<BestResponse<T>> {
    if rho.len() != lambda.len() {
        return Err(Error::InvalidInput("power and gain vectors differ in length".into()));
    }
    let others = rho.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, x)| x);
    if let Some(x) = others.chain(lambda).find(|x| !(**x > T::zero())) {
        return Err(Error::InvalidInput(format!("powers and cluster gains must be positive, found {x}")));
    }
    let mut xi = effective_gains(rho, lambda, alpha);
    // UE k's own power does not enter its best response
    xi[k] = T::one();
    check_profile(&xi, k)?;
    let (s, q) = others_sums(&xi, k);
    let unclamped = Float::sqrt(s / q) / Float::powf(lambda[k], alpha);
    let clamped = Float::min(Float::max(unclamped, bounds.0), bounds.1);
    Ok(BestResponse { unclamped, clamped })
}

/// Outcome of a worst-case deviation search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashCertificate {
    pub is_epsilon_nash: bool,
    /// Largest payoff reduction any UE can obtain by deviating alone.
    pub worst_gain: f64,
    pub worst_ue: usize,
    pub probe_count: usize,
}

/// Per-round snapshot of the game.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord<T> {
    /// 0 is the initial profile.
    pub iteration: usize,
    pub rho: Vec<T>,
    pub xi: Vec<T>,
    pub mu: Vec<T>,
    pub potential: T,
    /// `sum_k 1000 rho_k`.
    pub total_power_mw: T,
    pub accepted: usize,
    /// Messages exchanged with the master APs during this round.
    pub messages: usize,
}

/// An accepted power change.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateRecord<T> {
    pub iteration: usize,
    pub ue: usize,
    /// Effective gains the UE responded to.
    pub xi_before: Vec<T>,
    pub old_rho: T,
    pub new_rho: T,
    /// Payoff reduction; exceeds epsilon for every accepted update.
    pub payoff_gain: T,
    /// Change of the potential caused by this deviation alone.
    pub potential_change: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameState<T> {
    pub alpha: T,
    pub lambda: Vec<T>,
    pub rho: Vec<T>,
    pub xi: Vec<T>,
    /// Rounds executed.
    pub iteration: usize,
    pub trace: Vec<TraceRecord<T>>,
    pub updates: Vec<UpdateRecord<T>>,
}

impl<T: Real> GameState<T> {
    fn new(lambda: &[T], alpha: T, rho: Vec<T>) -> Result<Self> {
        let xi = effective_gains(&rho, lambda, alpha);
        let mut state = Self {
            alpha,
            lambda: lambda.to_vec(),
            rho,
            xi,
            iteration: 0,
            trace: Vec::new(),
            updates: Vec::new(),
        };
        state.record(0, 0)?;
        Ok(state)
    }

    fn record(&mut self, accepted: usize, messages: usize) -> Result<()> {
        let mu = (0..self.xi.len()).map(|k| payoff(&self.xi, k)).collect::<Result<Vec<_>>>()?;
        let potential = potential(&self.xi)?;
        let total_power_mw = self.total_power_mw();
        self.trace.push(TraceRecord {
            iteration: self.iteration,
            rho: self.rho.clone(),
            xi: self.xi.clone(),
            mu,
            potential,
            total_power_mw,
            accepted,
            messages,
        });
        Ok(())
    }

    fn set_power(&mut self, k: usize, rho: T) {
        self.rho[k] = rho;
        self.xi[k] = rho * Float::powf(self.lambda[k], self.alpha);
    }

    /// Total transmit power in mW, summed per UE after unit conversion.
    pub fn total_power_mw(&self) -> T {
        let mw = T::of(1e3);
        self.rho.iter().fold(T::zero(), |a, &b| a + b * mw)
    }

    pub fn num_ues(&self) -> usize {
        self.rho.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum Termination {
    /// A full round passed without accepted updates.
    Converged,
    /// `max_iterations` reached; `cycle_period` is set when the last profiles repeat.
    NotConverged { cycle_period: Option<usize> },
}

#[derive(Debug, Clone)]
pub struct GameOutcome<T> {
    pub state: GameState<T>,
    pub termination: Termination,
    pub certificate: NashCertificate,
}

impl<T> GameOutcome<T> {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

/// Runs Game-PAS over the clusters of `assignment`.
pub fn run_game<T: Real>(
    large: &LargeScaleState<T>,
    assignment: &ClusterAssignment,
    config: &GameConfig,
) -> Result<GameOutcome<T>> {
    let lambda = cluster_gains(&large.beta, assignment)?;
    run_game_with_gains(&lambda, config)
}

/// Runs Game-PAS for explicit cluster gains `Lambda_k`.
pub fn run_game_with_gains<T: Real>(lambda: &[T], config: &GameConfig) -> Result<GameOutcome<T>> {
    config.validate()?;
    let k_count = lambda.len();
    if k_count < 2 {
        return Err(Error::InvalidInput(format!("the game needs at least 2 UEs, got {k_count}")));
    }
    if let Some(g) = lambda.iter().find(|g| !(**g > T::zero())) {
        return Err(Error::InvalidInput(format!("cluster gains must be positive, found {g}")));
    }
    let alpha = T::of(config.alpha);
    let epsilon = T::of(config.epsilon);
    let bounds = (T::of(config.rho_min), T::of(config.rho_max));
    let mut state = GameState::new(lambda, alpha, vec![T::of(config.initial_power()); k_count])?;
    let messages = 2 * k_count;
    let mut termination = None;

    for round in 1..=config.max_iterations {
        state.iteration = round;
        let mut accepted = 0;
        match config.schedule {
            Schedule::Sequential => {
                for k in 0..k_count {
                    let br = best_response(k, &state.rho, lambda, alpha, bounds)?.clamped;
                    let candidate = br * Float::powf(lambda[k], alpha);
                    let gain = payoff_gain(&state.xi, k, candidate)?;
                    if gain > epsilon {
                        state.updates.push(UpdateRecord {
                            iteration: round,
                            ue: k,
                            xi_before: state.xi.clone(),
                            old_rho: state.rho[k],
                            new_rho: br,
                            payoff_gain: gain,
                            potential_change: potential_change(&state.xi, k, candidate)?,
                        });
                        state.set_power(k, br);
                        accepted += 1;
                    }
                }
            }
            Schedule::Simultaneous => {
                let snapshot = state.clone();
                for k in 0..k_count {
                    let br = best_response(k, &snapshot.rho, lambda, alpha, bounds)?.clamped;
                    let candidate = br * Float::powf(lambda[k], alpha);
                    let gain = payoff_gain(&snapshot.xi, k, candidate)?;
                    if gain > epsilon {
                        state.updates.push(UpdateRecord {
                            iteration: round,
                            ue: k,
                            xi_before: snapshot.xi.clone(),
                            old_rho: snapshot.rho[k],
                            new_rho: br,
                            payoff_gain: gain,
                            potential_change: potential_change(&snapshot.xi, k, candidate)?,
                        });
                        state.set_power(k, br);
                        accepted += 1;
                    }
                }
            }
        }
        state.record(accepted, messages)?;
        if accepted == 0 {
            termination = Some(Termination::Converged);
            break;
        }
    }

    let termination = termination.unwrap_or_else(|| Termination::NotConverged { cycle_period: detect_cycle(&state.trace) });
    let certificate = certify_epsilon_nash(&state, config, config.probe_grid_size)?;
    Ok(GameOutcome { state, termination, certificate })
}

/// Smallest `p <= 4` with `rho^(last) == rho^(last - p)` (relative 1e-9).
fn detect_cycle<T: Real>(trace: &[TraceRecord<T>]) -> Option<usize> {
    let last = trace.last()?;
    let tol = T::of(1e-9);
    (1..=4).find(|&p| {
        trace.len() > p
            && trace[trace.len() - 1 - p].rho.iter().zip(&last.rho).all(|(&a, &b)| rel_diff(a, b) <= tol)
    })
}

/// Checks the epsilon-Nash condition of `state` by probing, for every UE, a
/// uniform grid of `probe_grid_size` powers on `[rho_min, rho_max]` plus its
/// clamped closed-form best response.
pub fn certify_epsilon_nash<T: Real>(
    state: &GameState<T>,
    config: &GameConfig,
    probe_grid_size: usize,
) -> Result<NashCertificate> {
    let k_count = state.num_ues();
    let (lo, hi) = (T::of(config.rho_min), T::of(config.rho_max));
    let mut worst_gain = T::neg_infinity();
    let mut worst_ue = 0;
    let mut probe_count = 0;
    for k in 0..k_count {
        let scale = Float::powf(state.lambda[k], state.alpha);
        let mut probe = |rho: T| -> Result<()> {
            let gain = payoff_gain(&state.xi, k, rho * scale)?;
            probe_count += 1;
            if gain > worst_gain {
                worst_gain = gain;
                worst_ue = k;
            }
            Ok(())
        };
        for j in 0..probe_grid_size {
            let t = if probe_grid_size > 1 { T::of(j as f64 / (probe_grid_size - 1) as f64) } else { T::zero() };
            probe(lo + (hi - lo) * t)?;
        }
        probe(best_response(k, &state.rho, &state.lambda, state.alpha, (lo, hi))?.clamped)?;
    }
    let worst = worst_gain.to_f64_lossy();
    Ok(NashCertificate { is_epsilon_nash: worst <= config.epsilon, worst_gain: worst, worst_ue, probe_count })
}
