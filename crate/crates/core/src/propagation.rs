//! Network layout on a wrap-around square and large-scale channel statistics.
//!
//! APs and UEs are dropped uniformly on a torus of side `area_side`. For every
//! (UE, AP) link the large-scale gain follows a log-distance law with log-normal
//! shadowing, and the spatial correlation matrix is scaled so that its
//! normalized trace equals that gain.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_traits::{Float, Zero};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Domain};
use crate::scalar::{Cplx, Real};

/// Geometry and dimensions of a drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    /// Side of the square area in meters.
    #[serde(default = "default_area_side")]
    pub area_side: f64,
    pub num_aps: usize,
    pub antennas_per_ap: usize,
    pub num_ues: usize,
}

fn default_area_side() -> f64 {
    2000.0
}

impl LayoutConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.area_side.is_finite() && self.area_side > 0.0) {
            return Err(Error::InvalidConfig(format!("area_side must be positive, got {}", self.area_side)));
        }
        if self.num_aps < 1 {
            return Err(Error::InvalidConfig("num_aps must be at least 1".into()));
        }
        if self.antennas_per_ap < 1 {
            return Err(Error::InvalidConfig("antennas_per_ap must be at least 1".into()));
        }
        if self.num_ues < 2 {
            return Err(Error::InvalidConfig(format!(
                "num_ues must be at least 2 (the game needs two players), got {}",
                self.num_ues
            )));
        }
        Ok(())
    }
}

/// Spatial correlation model of the per-AP channel.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CorrelationModel {
    /// `R = beta * I`.
    #[default]
    Uncorrelated,
    /// `R[i][j] = beta * r^|i-j|` with `0 <= r < 1`.
    Exponential { coefficient: f64 },
}


impl FromStr for CorrelationModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "uncorrelated" {
            return Ok(CorrelationModel::Uncorrelated);
        }
        if let Some(r) = s.strip_prefix("exponential:") {
            let coefficient: f64 = r.parse().map_err(|_| Error::UnknownCorrelationModel(s.to_string()))?;
            if !(0.0..1.0).contains(&coefficient) {
                return Err(Error::InvalidConfig(format!(
                    "exponential correlation coefficient must lie in [0, 1), got {coefficient}"
                )));
            }
            return Ok(CorrelationModel::Exponential { coefficient });
        }
        Err(Error::UnknownCorrelationModel(s.to_string()))
    }
}

impl TryFrom<String> for CorrelationModel {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<CorrelationModel> for String {
    fn from(m: CorrelationModel) -> String {
        m.to_string()
    }
}

impl fmt::Display for CorrelationModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorrelationModel::Uncorrelated => write!(f, "uncorrelated"),
            CorrelationModel::Exponential { coefficient } => write!(f, "exponential:{coefficient}"),
        }
    }
}

/// Log-distance path loss with shadowing:
/// `beta_dB = intercept_db - slope_db * log10(max(d, min_distance)) + z`,
/// `z ~ N(0, shadowing_std_db^2)` drawn independently per link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationConfig {
    pub intercept_db: f64,
    pub slope_db: f64,
    pub shadowing_std_db: f64,
    pub min_distance: f64,
    pub correlation: CorrelationModel,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            intercept_db: -30.5,
            slope_db: 36.7,
            shadowing_std_db: 4.0,
            min_distance: 10.0,
            correlation: CorrelationModel::Uncorrelated,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_distance > 0.0) {
            return Err(Error::InvalidConfig("min_distance must be positive".into()));
        }
        if !(self.shadowing_std_db >= 0.0) {
            return Err(Error::InvalidConfig("shadowing_std_db must be non-negative".into()));
        }
        Ok(())
    }

    /// Gain in dB for a given distance and shadowing realization (in dB).
    pub fn gain_db(&self, distance: f64, shadowing_db: f64) -> f64 {
        self.intercept_db - self.slope_db * distance.max(self.min_distance).log10() + shadowing_db
    }
}

pub type Point<T> = [T; 2];

/// Positions of APs and UEs in meters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Layout<T> {
    pub area_side: T,
    pub ap_positions: Vec<Point<T>>,
    pub ue_positions: Vec<Point<T>>,
}

fn uniform_coord<T: Real, R: Rng + ?Sized>(side: T, rng: &mut R) -> T {
    let u: f64 = rng.random();
    let x = T::of(u) * side;
    // rounding to a narrower type may land exactly on `side`
    if x >= side {
        side - side * T::epsilon()
    } else {
        x
    }
}

/// Draws i.i.d. uniform AP and UE positions on `[0, side)^2`.
pub fn generate_layout<T: Real, R: Rng + ?Sized>(config: &LayoutConfig, rng: &mut R) -> Result<Layout<T>> {
    config.validate()?;
    let side = T::of(config.area_side);
    let point = |rng: &mut R| [uniform_coord(side, rng), uniform_coord(side, rng)];
    let ap_positions = (0..config.num_aps).map(|_| point(rng)).collect();
    let ue_positions = (0..config.num_ues).map(|_| point(rng)).collect();
    Ok(Layout { area_side: side, ap_positions, ue_positions })
}

/// Layout for `config` drawn from the layout stream of `seed`.
pub fn seeded_layout<T: Real>(config: &LayoutConfig, seed: u64) -> Result<Layout<T>> {
    generate_layout(config, &mut rng::stream(seed, Domain::Layout, 0))
}

/// Torus distance: the shortest Euclidean distance from `p` to any of the nine
/// translated images of `q`.
pub fn wrap_distance<T: Real>(p: Point<T>, q: Point<T>, side: T) -> T {
    let shifts = [-side, T::zero(), side];
    let mut best = T::infinity();
    for sx in shifts {
        for sy in shifts {
            let dx = p[0] - (q[0] + sx);
            let dy = p[1] - (q[1] + sy);
            best = Float::min(best, Float::hypot(dx, dy));
        }
    }
    best
}

/// Linear large-scale gain at `distance`, drawing shadowing from `rng`.
pub fn large_scale_gain<T: Real, R: Rng + ?Sized>(distance: T, config: &PropagationConfig, rng: &mut R) -> T {
    let z: f64 = rng.sample(StandardNormal);
    let db = config.gain_db(distance.to_f64_lossy(), config.shadowing_std_db * z);
    T::of(10f64.powf(db / 10.0))
}

/// `N x N` Hermitian PSD correlation matrix with `tr(R) / N = beta`.
pub fn spatial_correlation<T: Real>(beta: T, model: CorrelationModel, n: usize) -> Result<DMatrix<Cplx<T>>> {
    if !(beta > T::zero()) {
        return Err(Error::InvalidInput(format!("beta must be positive, got {beta}")));
    }
    match model {
        CorrelationModel::Uncorrelated => Ok(DMatrix::from_diagonal_element(n, n, Cplx::new(beta, T::zero()))),
        CorrelationModel::Exponential { coefficient } => {
            let r = T::of(coefficient);
            Ok(DMatrix::from_fn(n, n, |i, j| {
                let lag = i.abs_diff(j) as i32;
                Cplx::new(beta * Float::powi(r, lag), T::zero())
            }))
        }
    }
}

/// Large-scale statistics of every (UE, AP) link.
#[derive(Debug, Clone)]
pub struct LargeScaleState<T: Real> {
    /// `K x L` linear gains.
    pub beta: DMatrix<T>,
    /// Row-major over `(k, l)`: `corr[k * L + l]` is `R_kl`.
    pub corr: Vec<DMatrix<Cplx<T>>>,
    pub antennas: usize,
}

impl<T: Real> LargeScaleState<T> {
    /// Builds the state from explicit gains under `model`.
    pub fn from_gains(beta: DMatrix<T>, antennas: usize, model: CorrelationModel) -> Result<Self> {
        let mut corr = Vec::with_capacity(beta.len());
        for k in 0..beta.nrows() {
            for l in 0..beta.ncols() {
                corr.push(spatial_correlation(beta[(k, l)], model, antennas)?);
            }
        }
        Ok(Self { beta, corr, antennas })
    }

    pub fn num_ues(&self) -> usize {
        self.beta.nrows()
    }

    pub fn num_aps(&self) -> usize {
        self.beta.ncols()
    }

    pub fn beta(&self, k: usize, l: usize) -> T {
        self.beta[(k, l)]
    }

    pub fn corr(&self, k: usize, l: usize) -> &DMatrix<Cplx<T>> {
        &self.corr[k * self.num_aps() + l]
    }

    /// Block-diagonal collective correlation `diag(R_k1, ..., R_kL)`.
    pub fn collective_corr(&self, k: usize) -> DMatrix<Cplx<T>> {
        let n = self.antennas;
        let l_count = self.num_aps();
        let mut out = DMatrix::from_element(n * l_count, n * l_count, Cplx::zero());
        for l in 0..l_count {
            out.view_mut((l * n, l * n), (n, n)).copy_from(self.corr(k, l));
        }
        out
    }
}

/// Gains and correlation matrices for a layout. Shadowing for link `(k, l)` is
/// drawn from its own stream, so the result depends only on `(seed, layout)`.
pub fn generate_large_scale<T: Real>(
    layout: &Layout<T>,
    antennas: usize,
    config: &PropagationConfig,
    seed: u64,
) -> Result<LargeScaleState<T>> {
    config.validate()?;
    let k_count = layout.ue_positions.len();
    let l_count = layout.ap_positions.len();
    let beta = DMatrix::from_fn(k_count, l_count, |k, l| {
        let d = wrap_distance(layout.ue_positions[k], layout.ap_positions[l], layout.area_side);
        let mut link_rng = rng::stream(seed, Domain::Shadowing, (k * l_count + l) as u64);
        large_scale_gain(d, config, &mut link_rng)
    });
    LargeScaleState::from_gains(beta, antennas, config.correlation)
}

/// Serializable snapshot of a layout and its gain matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutSnapshot {
    pub area_side: f64,
    pub ap_positions: Vec<[f64; 2]>,
    pub ue_positions: Vec<[f64; 2]>,
    /// `beta[k][l]`, linear.
    pub beta: Vec<Vec<f64>>,
}

impl LayoutSnapshot {
    pub fn new<T: Real>(layout: &Layout<T>, state: &LargeScaleState<T>) -> Self {
        let pts = |v: &[Point<T>]| v.iter().map(|p| [p[0].to_f64_lossy(), p[1].to_f64_lossy()]).collect();
        Self {
            area_side: layout.area_side.to_f64_lossy(),
            ap_positions: pts(&layout.ap_positions),
            ue_positions: pts(&layout.ue_positions),
            beta: (0..state.num_ues())
                .map(|k| (0..state.num_aps()).map(|l| state.beta(k, l).to_f64_lossy()).collect())
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cfg(l: usize, k: usize) -> LayoutConfig {
        LayoutConfig { area_side: 2000.0, num_aps: l, antennas_per_ap: 4, num_ues: k }
    }

    #[test]
    fn layout_is_deterministic_and_in_bounds() {
        let a: Layout<f64> = seeded_layout(&cfg(1, 2), 11).unwrap();
        let b: Layout<f64> = seeded_layout(&cfg(1, 2), 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.ap_positions.len(), 1);
        assert_eq!(a.ue_positions.len(), 2);
        for p in a.ap_positions.iter().chain(&a.ue_positions) {
            assert!(p.iter().all(|&c| (0.0..2000.0).contains(&c)));
        }
        let c: Layout<f64> = seeded_layout(&cfg(1, 2), 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_layouts_are_rejected() {
        let mut c = cfg(1, 1);
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
        c.num_ues = 2;
        c.num_aps = 0;
        assert!(c.validate().is_err());
        c.num_aps = 1;
        c.area_side = 0.0;
        assert!(c.validate().is_err());
        c.area_side = 10.0;
        c.antennas_per_ap = 0;
        assert!(seeded_layout::<f64>(&c, 0).is_err());
    }

    #[test]
    fn uniform_coordinate_mean() {
        // mean of U[0, 2000) is 1000 with std 2000/sqrt(12) per draw
        let n = 10_000;
        let layout: Layout<f64> = seeded_layout(&cfg(1, n), 5).unwrap();
        let mean = layout.ue_positions.iter().map(|p| p[0]).sum::<f64>() / n as f64;
        let sigma = 2000.0 / 12f64.sqrt() / (n as f64).sqrt();
        assert!((mean - 1000.0).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn wrap_distance_examples() {
        assert_relative_eq!(wrap_distance([1900.0, 0.0], [100.0, 0.0], 2000.0), 200.0, epsilon = 1e-9);
        assert_eq!(wrap_distance([3.0, 4.0], [3.0, 4.0], 2000.0), 0.0);
        assert_relative_eq!(
            wrap_distance([0.0, 0.0], [1000.0, 1000.0], 2000.0),
            1000.0 * 2f64.sqrt(),
            epsilon = 1e-9
        );
        assert_relative_eq!(wrap_distance([10.0f32, 1990.0], [1990.0, 10.0], 2000.0), 20.0 * 2f32.sqrt(), epsilon = 1e-3);
    }

    #[test]
    fn path_loss_examples() {
        let p = PropagationConfig::default();
        assert_relative_eq!(p.gain_db(100.0, 0.0), -103.9, epsilon = 1e-12);
        assert_relative_eq!(p.gain_db(1000.0, 0.0), -140.6, epsilon = 1e-12);
        // clamped below d_min
        assert_eq!(p.gain_db(0.0, 0.0), p.gain_db(10.0, 0.0));

        let flat = PropagationConfig { shadowing_std_db: 0.0, ..p };
        let mut rng = rng::stream(0, Domain::Test, 0);
        let gains: Vec<f64> =
            [10.0, 50.0, 100.0, 500.0, 1414.0].iter().map(|&d| large_scale_gain(d, &flat, &mut rng)).collect();
        assert!(gains.windows(2).all(|w| w[0] > w[1]));
        assert_relative_eq!(10.0 * gains[2].log10(), -103.9, epsilon = 1e-9);
    }

    #[test]
    fn correlation_models() {
        let r = spatial_correlation(1e-10, CorrelationModel::Uncorrelated, 4).unwrap();
        assert_eq!(r, DMatrix::from_diagonal_element(4, 4, Cplx::new(1e-10, 0.0)));
        assert!(spatial_correlation(0.0, CorrelationModel::Uncorrelated, 4).is_err());
        assert!(matches!("laplacian".parse::<CorrelationModel>(), Err(Error::UnknownCorrelationModel(_))));
        assert!("exponential:1.5".parse::<CorrelationModel>().is_err());
        let m: CorrelationModel = "exponential:0.7".parse().unwrap();
        assert_eq!(m.to_string().parse::<CorrelationModel>().unwrap(), m);
    }

    fn min_eigenvalue(r: &DMatrix<Cplx<f64>>) -> f64 {
        r.clone().symmetric_eigen().eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    proptest! {
        #[test]
        fn correlation_trace_and_psd(beta_db in -150.0..-60.0f64, n in 1usize..9, coef in 0.0..0.99f64, exp in any::<bool>()) {
            let beta = 10f64.powf(beta_db / 10.0);
            let model = if exp { CorrelationModel::Exponential { coefficient: coef } } else { CorrelationModel::Uncorrelated };
            let r = spatial_correlation(beta, model, n).unwrap();
            let tr: f64 = r.diagonal().iter().map(|z| z.re).sum();
            prop_assert!((tr / n as f64 - beta).abs() <= 1e-12 * beta);
            prop_assert_eq!(&r, &r.adjoint());
            prop_assert!(min_eigenvalue(&r) >= -1e-12 * beta);
        }

        #[test]
        fn wrap_distance_is_a_metric(
            p in prop::array::uniform2(0.0..2000.0f64),
            q in prop::array::uniform2(0.0..2000.0f64),
            s in prop::array::uniform2(0.0..2000.0f64),
        ) {
            let side = 2000.0;
            let d = |a, b| wrap_distance(a, b, side);
            prop_assert!((d(p, q) - d(q, p)).abs() < 1e-9);
            prop_assert!(d(p, p) == 0.0);
            prop_assert!(d(p, s) <= d(p, q) + d(q, s) + 1e-9);
            prop_assert!(d(p, q) <= side * 2f64.sqrt() / 2.0 + 1e-9);
            // per-axis torus formula
            let ax = |a: f64, b: f64| { let t = (a - b).abs(); t.min(side - t) };
            prop_assert!((d(p, q) - ax(p[0], q[0]).hypot(ax(p[1], q[1]))).abs() < 1e-9);
        }
    }

    #[test]
    fn large_scale_state_is_reproducible() {
        let c = cfg(6, 5);
        let layout: Layout<f64> = seeded_layout(&c, 3).unwrap();
        let p = PropagationConfig { correlation: CorrelationModel::Exponential { coefficient: 0.5 }, ..Default::default() };
        let a = generate_large_scale(&layout, 4, &p, 9).unwrap();
        let b = generate_large_scale(&layout, 4, &p, 9).unwrap();
        assert_eq!(a.beta, b.beta);
        for k in 0..5 {
            for l in 0..6 {
                assert!(a.beta(k, l) > 0.0);
                let tr: f64 = a.corr(k, l).diagonal().iter().map(|z| z.re).sum();
                assert!((tr / 4.0 - a.beta(k, l)).abs() <= 1e-12 * a.beta(k, l));
            }
            let big = a.collective_corr(k);
            assert_eq!(big.nrows(), 24);
            for l in 0..6 {
                for m in 0..6 {
                    let block = big.view((l * 4, m * 4), (4, 4)).into_owned();
                    if l == m {
                        assert_eq!(&block, a.corr(k, l));
                    } else {
                        assert!(block.iter().all(|z| *z == Cplx::new(0.0, 0.0)));
                    }
                }
            }
        }
        let snap = LayoutSnapshot::new(&layout, &a);
        let json = serde_json::to_string(&snap).unwrap();
        assert_eq!(serde_json::from_str::<LayoutSnapshot>(&json).unwrap(), snap);
    }
}
