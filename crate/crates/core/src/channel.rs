//! Small-scale fading, uplink pilot reception and MMSE channel estimation.
//!
//! Realizations are never stored in bulk. A [`ChannelEnsemble`] keeps the
//! second-order statistics and regenerates sample `s` on demand from its own
//! random stream, so an ensemble of any size costs O(K L N^2) memory and every
//! consumer sees bit-identical samples.

use nalgebra::DVector;
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::association::ClusterAssignment;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_part, hermitian_solve, psd_sqrt, CMatrix, CVector, LinOp};
use crate::propagation::LargeScaleState;
use crate::rng::{self, Domain};
use crate::scalar::{Cplx, Real};

/// Which power UEs use for their pilots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PilotPowerMode {
    /// Every UE sends its pilot at `P_max`, independent of the data power.
    #[default]
    FixedPmax,
    /// Pilot power equals the data power being evaluated.
    TrackDataPower,
}

/// Thermal noise power in watts for a bandwidth and receiver noise figure.
pub fn thermal_noise_power(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    let dbm = -174.0 + 10.0 * bandwidth_hz.log10() + noise_figure_db;
    10f64.powf(dbm / 10.0) / 1000.0
}

/// Coherence-block structure and receiver noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameConfig {
    pub tau_c: usize,
    pub tau_p: usize,
    pub tau_u: usize,
    pub tau_d: usize,
    /// `sigma^2` in watts.
    pub noise_power: f64,
    pub pilot_power_mode: PilotPowerMode,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            tau_c: 200,
            tau_p: 10,
            tau_u: 190,
            tau_d: 0,
            noise_power: thermal_noise_power(20e6, 7.0),
            pilot_power_mode: PilotPowerMode::FixedPmax,
        }
    }
}

impl FrameConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau_c != self.tau_p + self.tau_u + self.tau_d {
            return Err(Error::InvalidConfig(format!(
                "tau_c ({}) must equal tau_p + tau_u + tau_d ({} + {} + {})",
                self.tau_c, self.tau_p, self.tau_u, self.tau_d
            )));
        }
        if self.tau_p < 1 {
            return Err(Error::InvalidConfig("tau_p must be at least 1".into()));
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return Err(Error::InvalidConfig(format!("noise_power must be positive, got {}", self.noise_power)));
        }
        Ok(())
    }

    /// Fraction of the coherence block used for uplink data.
    pub fn prelog(&self) -> f64 {
        self.tau_u as f64 / self.tau_c as f64
    }
}

/// Second-order statistics of the pilot phase.
#[derive(Debug, Clone)]
pub struct EstimationStats<T: Real> {
    pub num_aps: usize,
    /// `Psi_tl`, row-major over `(t, l)`.
    pub psi: Vec<CMatrix<T>>,
    /// `B_kl`, row-major over `(k, l)`.
    pub est_cov: Vec<CMatrix<T>>,
    /// `C_kl = R_kl - B_kl`.
    pub err_cov: Vec<CMatrix<T>>,
    /// `sqrt(tau_p rho_k) R_kl Psi_tl^{-1}`, the linear MMSE estimator.
    pub estimator: Vec<LinOp<T>>,
}

impl<T: Real> EstimationStats<T> {
    pub fn psi(&self, t: usize, l: usize) -> &CMatrix<T> {
        &self.psi[t * self.num_aps + l]
    }

    pub fn est_cov(&self, k: usize, l: usize) -> &CMatrix<T> {
        &self.est_cov[k * self.num_aps + l]
    }

    pub fn err_cov(&self, k: usize, l: usize) -> &CMatrix<T> {
        &self.err_cov[k * self.num_aps + l]
    }
}

fn check_powers<T: Real>(powers: &[T], k_count: usize, what: &str) -> Result<()> {
    if powers.len() != k_count {
        return Err(Error::InvalidInput(format!("{what}: expected {k_count} powers, got {}", powers.len())));
    }
    if let Some(p) = powers.iter().find(|p| !(**p >= T::zero())) {
        return Err(Error::InvalidInput(format!("{what}: powers must be non-negative, found {p}")));
    }
    Ok(())
}

/// Computes `Psi_tl`, `B_kl` and `C_kl` for every pilot, UE and AP.
pub fn estimation_covariances<T: Real>(
    large: &LargeScaleState<T>,
    pilot_powers: &[T],
    assignment: &ClusterAssignment,
    frame: &FrameConfig,
) -> Result<EstimationStats<T>> {
    frame.validate()?;
    let k_count = large.num_ues();
    let l_count = large.num_aps();
    let n = large.antennas;
    check_powers(pilot_powers, k_count, "pilot powers")?;
    if assignment.num_ues() != k_count || assignment.num_aps() != l_count {
        return Err(Error::InvalidInput("assignment does not match the large-scale state".into()));
    }
    if assignment.num_pilots != frame.tau_p {
        return Err(Error::InvalidInput(format!(
            "assignment uses {} pilots but tau_p = {}",
            assignment.num_pilots, frame.tau_p
        )));
    }
    let tau_p = T::of(frame.tau_p as f64);
    let sigma2 = Cplx::new(T::of(frame.noise_power), T::zero());

    let mut psi = Vec::with_capacity(frame.tau_p * l_count);
    for t in 0..frame.tau_p {
        let users = assignment.co_pilot_set(t);
        for l in 0..l_count {
            let mut m = CMatrix::<T>::identity(n, n) * sigma2;
            for &i in &users {
                m += large.corr(i, l) * Cplx::new(tau_p * pilot_powers[i], T::zero());
            }
            psi.push(hermitian_part(&m));
        }
    }

    let mut est_cov = Vec::with_capacity(k_count * l_count);
    let mut err_cov = Vec::with_capacity(k_count * l_count);
    let mut estimator = Vec::with_capacity(k_count * l_count);
    for k in 0..k_count {
        let t = assignment.pilot_of[k];
        let gain = tau_p * pilot_powers[k];
        for l in 0..l_count {
            let r = large.corr(k, l);
            // X = Psi^{-1} R, so R Psi^{-1} = X^H
            let x = hermitian_solve(&psi[t * l_count + l], r, "Psi^{-1} R")?;
            let b = hermitian_part(&((r * &x) * Cplx::new(gain, T::zero())));
            let c = hermitian_part(&(r - &b));
            estimator.push(LinOp::new(x.adjoint() * Cplx::new(Float::sqrt(gain), T::zero())));
            est_cov.push(b);
            err_cov.push(c);
        }
    }
    Ok(EstimationStats { num_aps: l_count, psi, est_cov, err_cov, estimator })
}

/// Standard circularly-symmetric complex Gaussian vector.
pub fn complex_gaussian<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector<T> {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    DVector::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Cplx::new(T::of(re * scale), T::of(im * scale))
    })
}

/// `R_kl^{1/2}` for every link.
pub fn correlation_roots<T: Real>(large: &LargeScaleState<T>) -> Result<Vec<LinOp<T>>> {
    large.corr.iter().map(|r| psd_sqrt(r).map(LinOp::new)).collect()
}

fn draw_one<T: Real, R: Rng + ?Sized>(roots: &[LinOp<T>], n: usize, rng: &mut R) -> Vec<CVector<T>> {
    roots.iter().map(|s| s.apply(&complex_gaussian(n, rng))).collect()
}

/// Draws `sample_count` realizations of every `h_kl ~ CN(0, R_kl)`.
/// Each realization is row-major over `(k, l)`.
pub fn draw_channels<T: Real, R: Rng + ?Sized>(
    large: &LargeScaleState<T>,
    sample_count: usize,
    rng: &mut R,
) -> Result<Vec<Vec<CVector<T>>>> {
    let roots = correlation_roots(large)?;
    Ok((0..sample_count).map(|_| draw_one(&roots, large.antennas, rng)).collect())
}

/// Received pilot signal for given noise vectors (row-major over `(t, l)`).
pub fn pilot_observation_with_noise<T: Real>(
    channels: &[CVector<T>],
    pilot_powers: &[T],
    assignment: &ClusterAssignment,
    tau_p: usize,
    noise: Vec<CVector<T>>,
) -> Vec<CVector<T>> {
    let l_count = assignment.num_aps();
    let tau = T::of(tau_p as f64);
    let mut y = noise;
    for (k, &t) in assignment.pilot_of.iter().enumerate() {
        let amp = Cplx::new(Float::sqrt(tau * pilot_powers[k]), T::zero());
        for l in 0..l_count {
            y[t * l_count + l].axpy(amp, &channels[k * l_count + l], Cplx::new(T::one(), T::zero()));
        }
    }
    y
}

/// `y_tl = sum_{i in S_t} sqrt(tau_p rho_i) h_il + n_tl` with fresh noise from `rng`.
pub fn pilot_observation<T: Real, R: Rng + ?Sized>(
    channels: &[CVector<T>],
    pilot_powers: &[T],
    assignment: &ClusterAssignment,
    frame: &FrameConfig,
    rng: &mut R,
) -> Result<Vec<CVector<T>>> {
    check_powers(pilot_powers, assignment.num_ues(), "pilot powers")?;
    let n = assignment.antennas;
    let sigma = Cplx::new(T::of(frame.noise_power.sqrt()), T::zero());
    let noise = (0..frame.tau_p * assignment.num_aps()).map(|_| complex_gaussian::<T, R>(n, rng) * sigma).collect();
    Ok(pilot_observation_with_noise(channels, pilot_powers, assignment, frame.tau_p, noise))
}

/// MMSE estimates `h_hat_kl` for the served pairs (zero vectors elsewhere).
pub fn mmse_estimate<T: Real>(
    y_pilot: &[CVector<T>],
    stats: &EstimationStats<T>,
    assignment: &ClusterAssignment,
) -> Result<Vec<CVector<T>>> {
    let l_count = assignment.num_aps();
    let n = assignment.antennas;
    if y_pilot.len() != assignment.num_pilots * l_count || y_pilot.iter().any(|y| y.len() != n) {
        return Err(Error::InvalidInput("pilot observation has the wrong shape".into()));
    }
    let mut out = Vec::with_capacity(assignment.num_ues() * l_count);
    for k in 0..assignment.num_ues() {
        let t = assignment.pilot_of[k];
        for l in 0..l_count {
            if assignment.is_served(k, l) {
                out.push(stats.estimator[k * l_count + l].apply(&y_pilot[t * l_count + l]));
            } else {
                out.push(CVector::zeros(n));
            }
        }
    }
    Ok(out)
}

/// One Monte-Carlo realization: true channels and their estimates, both
/// row-major over `(k, l)`.
#[derive(Debug, Clone)]
pub struct ChannelSample<T: Real> {
    pub channels: Vec<CVector<T>>,
    pub estimates: Vec<CVector<T>>,
}

/// Flat storage for one realization, reused across samples. Channel and
/// estimate of link `(k, l)` occupy `[(k * L + l) * N, (k * L + l + 1) * N)`.
#[derive(Debug, Clone)]
pub struct SampleBuffers<T: Real> {
    pub channels: Vec<Cplx<T>>,
    /// The channels again, AP-major: antenna `a` of AP `l` for UE `k` is at
    /// `(l * N + a) * K + k`.
    pub channels_by_ap: Vec<Cplx<T>>,
    pub estimates: Vec<Cplx<T>>,
    pilots: Vec<Cplx<T>>,
    draw: Vec<Cplx<T>>,
}

fn fill_complex_gaussian<T: Real, R: Rng + ?Sized>(out: &mut [Cplx<T>], scale: f64, rng: &mut R) {
    let scale = scale * std::f64::consts::FRAC_1_SQRT_2;
    for z in out {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *z = Cplx::new(T::of(re * scale), T::of(im * scale));
    }
}

/// A reproducible Monte-Carlo ensemble over one drop.
#[derive(Debug, Clone)]
pub struct ChannelEnsemble<T: Real> {
    pub stats: EstimationStats<T>,
    pub assignment: ClusterAssignment,
    pub pilot_powers: Vec<T>,
    pub frame: FrameConfig,
    pub sample_count: usize,
    pub seed: u64,
    roots: Vec<LinOp<T>>,
}

impl<T: Real> ChannelEnsemble<T> {
    /// Prepares an ensemble whose pilots are sent at `pilot_powers`.
    pub fn new(
        large: &LargeScaleState<T>,
        assignment: &ClusterAssignment,
        frame: &FrameConfig,
        pilot_powers: Vec<T>,
        sample_count: usize,
        seed: u64,
    ) -> Result<Self> {
        if sample_count == 0 {
            return Err(Error::EmptyEnsemble);
        }
        let stats = estimation_covariances(large, &pilot_powers, assignment, frame)?;
        Ok(Self {
            stats,
            assignment: assignment.clone(),
            pilot_powers,
            frame: frame.clone(),
            sample_count,
            seed,
            roots: correlation_roots(large)?,
        })
    }

    /// Pilot powers implied by the frame's pilot-power mode.
    pub fn pilot_powers_for(frame: &FrameConfig, data_powers: &[T], p_max: T) -> Vec<T> {
        match frame.pilot_power_mode {
            PilotPowerMode::FixedPmax => vec![p_max; data_powers.len()],
            PilotPowerMode::TrackDataPower => data_powers.to_vec(),
        }
    }

    pub fn antennas(&self) -> usize {
        self.assignment.antennas
    }

    /// Realization `s`, regenerated from its own stream.
    pub fn sample(&self, s: usize) -> ChannelSample<T> {
        let mut rng = rng::stream(self.seed, Domain::Channel, s as u64);
        let channels = draw_one(&self.roots, self.antennas(), &mut rng);
        let sigma = Cplx::new(T::of(self.frame.noise_power.sqrt()), T::zero());
        let noise = (0..self.frame.tau_p * self.assignment.num_aps())
            .map(|_| complex_gaussian::<T, _>(self.antennas(), &mut rng) * sigma)
            .collect();
        let y = pilot_observation_with_noise(&channels, &self.pilot_powers, &self.assignment, self.frame.tau_p, noise);
        let estimates = mmse_estimate(&y, &self.stats, &self.assignment).expect("shapes fixed at construction");
        ChannelSample { channels, estimates }
    }

    pub fn samples(&self) -> impl Iterator<Item = ChannelSample<T>> + '_ {
        (0..self.sample_count).map(move |s| self.sample(s))
    }

    pub fn buffers(&self) -> SampleBuffers<T> {
        let n = self.antennas();
        let links = self.assignment.num_ues() * self.assignment.num_aps();
        let zero = Cplx::new(T::zero(), T::zero());
        SampleBuffers {
            channels: vec![zero; links * n],
            channels_by_ap: vec![zero; links * n],
            estimates: vec![zero; links * n],
            pilots: vec![zero; self.frame.tau_p * self.assignment.num_aps() * n],
            draw: vec![zero; n],
        }
    }

    /// Same realization as [`sample`](Self::sample), written into flat buffers
    /// without allocating. Estimates of unserved links are left untouched.
    pub fn sample_into(&self, s: usize, buf: &mut SampleBuffers<T>) {
        let n = self.antennas();
        let l_count = self.assignment.num_aps();
        let mut rng = rng::stream(self.seed, Domain::Channel, s as u64);
        for (root, h) in self.roots.iter().zip(buf.channels.chunks_exact_mut(n)) {
            fill_complex_gaussian(&mut buf.draw, 1.0, &mut rng);
            root.apply_into(&buf.draw, h);
        }
        let k_count = self.assignment.num_ues();
        for (kl, h) in buf.channels.chunks_exact(n).enumerate() {
            let (k, l) = (kl / l_count, kl % l_count);
            for (a, x) in h.iter().enumerate() {
                buf.channels_by_ap[(l * n + a) * k_count + k] = *x;
            }
        }
        fill_complex_gaussian(&mut buf.pilots, 1.0, &mut rng);
        let sigma = T::of(self.frame.noise_power.sqrt());
        for y in buf.pilots.iter_mut() {
            *y *= sigma;
        }
        let tau = T::of(self.frame.tau_p as f64);
        for (k, &t) in self.assignment.pilot_of.iter().enumerate() {
            let amp = Float::sqrt(tau * self.pilot_powers[k]);
            for l in 0..l_count {
                let h = &buf.channels[(k * l_count + l) * n..][..n];
                let y = &mut buf.pilots[(t * l_count + l) * n..][..n];
                for (yi, hi) in y.iter_mut().zip(h) {
                    *yi += *hi * amp;
                }
            }
        }
        for k in 0..self.assignment.num_ues() {
            let t = self.assignment.pilot_of[k];
            for &l in &self.assignment.serving_aps[k] {
                let y = &buf.pilots[(t * l_count + l) * n..][..n];
                let out = &mut buf.estimates[(k * l_count + l) * n..][..n];
                self.stats.estimator[k * l_count + l].apply_into(y, out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius;
    use crate::propagation::CorrelationModel;
    use nalgebra::DMatrix;
    use num_traits::Zero;

    fn c(x: f64) -> Cplx<f64> {
        Cplx::new(x, 0.0)
    }

    fn frame(noise: f64) -> FrameConfig {
        FrameConfig { noise_power: noise, ..Default::default() }
    }

    fn two_users_one_pilot(beta: [[f64; 1]; 2], n: usize) -> (LargeScaleState<f64>, ClusterAssignment) {
        let b = DMatrix::from_row_slice(2, 1, &[beta[0][0], beta[1][0]]);
        let large = LargeScaleState::from_gains(b, n, CorrelationModel::Uncorrelated).unwrap();
        let a = ClusterAssignment::from_clusters(10, n, 1, vec![3, 3], vec![vec![0], vec![0]]).unwrap();
        (large, a)
    }

    #[test]
    fn frame_defaults_and_validation() {
        let f = FrameConfig::default();
        f.validate().unwrap();
        assert_eq!(f.prelog(), 0.95);
        assert!((10.0 * (f.noise_power * 1000.0).log10() + 93.99).abs() < 0.01);
        assert!(FrameConfig { tau_d: 1, ..f.clone() }.validate().is_err());
        assert!(FrameConfig { noise_power: 0.0, ..f }.validate().is_err());
    }

    #[test]
    fn zero_pilot_power_gives_no_estimate() {
        let (large, a) = two_users_one_pilot([[1e-10], [2e-10]], 3);
        let st = estimation_covariances(&large, &[0.0, 0.1], &a, &frame(1e-13)).unwrap();
        assert!(st.est_cov(0, 0).iter().all(|z| z.is_zero()));
        assert_eq!(st.err_cov(0, 0), large.corr(0, 0));
    }

    #[test]
    fn noiseless_limit_estimates_perfectly() {
        let (large, _) = two_users_one_pilot([[1e-10], [2e-10]], 2);
        let a = ClusterAssignment::from_clusters(10, 2, 1, vec![0, 1], vec![vec![0], vec![0]]).unwrap();
        let st = estimation_covariances(&large, &[0.1, 0.1], &a, &frame(1e-30)).unwrap();
        let r = large.corr(0, 0);
        assert!(frobenius(&(st.est_cov(0, 0) - r)) <= 1e-12 * frobenius(r));
        assert!(frobenius(st.err_cov(0, 0)) <= 1e-12 * frobenius(r));
    }

    #[test]
    fn co_pilot_scalar_closed_form() {
        let (b1, b2, p1, p2, s2, tau) = (1e-10, 3e-11, 0.1, 0.05, 4e-13, 10.0);
        let (large, a) = two_users_one_pilot([[b1], [b2]], 4);
        let st = estimation_covariances(&large, &[p1, p2], &a, &frame(s2)).unwrap();
        let denom = tau * p1 * b1 + tau * p2 * b2 + s2;
        for (k, (b, p)) in [(b1, p1), (b2, p2)].into_iter().enumerate() {
            let expected = DMatrix::from_diagonal_element(4, 4, c(tau * p * b * b / denom));
            assert!(frobenius(&(st.est_cov(k, 0) - &expected)) <= 1e-12 * frobenius(&expected));
            let sum = st.est_cov(k, 0) + st.err_cov(k, 0);
            assert!(frobenius(&(sum - large.corr(k, 0))) <= 1e-12 * frobenius(large.corr(k, 0)));
        }
        let psi = st.psi(3, 0);
        assert!((psi[(0, 0)].re - denom).abs() <= 1e-12 * denom);
    }

    #[test]
    fn zero_covariance_gives_zero_channel() {
        let large = LargeScaleState {
            beta: DMatrix::from_element(1, 1, 1.0),
            corr: vec![CMatrix::zeros(3, 3)],
            antennas: 3,
        };
        let draws = draw_channels(&large, 5, &mut rng::stream(0, Domain::Test, 0)).unwrap();
        assert!(draws.iter().all(|d| d[0].iter().all(|z| z.is_zero())));
    }

    #[test]
    fn non_psd_correlation_is_reported() {
        let bad = CMatrix::from_row_slice(2, 2, &[c(1.0), c(3.0), c(3.0), c(1.0)]);
        let large = LargeScaleState { beta: DMatrix::from_element(1, 1, 1.0), corr: vec![bad], antennas: 2 };
        assert!(matches!(draw_channels(&large, 1, &mut rng::stream(0, Domain::Test, 0)), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn channel_sample_covariance() {
        let beta = 2.5e-11;
        let large = LargeScaleState::from_gains(DMatrix::from_element(1, 1, beta), 4, CorrelationModel::Uncorrelated)
            .unwrap();
        let n_samples = 100_000;
        let draws = draw_channels(&large, n_samples, &mut rng::stream(1, Domain::Test, 0)).unwrap();
        let mut cov = CMatrix::<f64>::zeros(4, 4);
        for d in &draws {
            cov += &d[0] * d[0].adjoint();
        }
        cov /= c(n_samples as f64);
        let r = large.corr(0, 0);
        assert!(frobenius(&(cov - r)) <= 0.05 * frobenius(r));
    }

    #[test]
    fn pilot_observation_cases() {
        let (large, a) = two_users_one_pilot([[1e-10], [2e-10]], 2);
        let h = draw_channels(&large, 1, &mut rng::stream(2, Domain::Test, 0)).unwrap().remove(0);
        let noise: Vec<CVector<f64>> =
            (0..10).map(|_| complex_gaussian(2, &mut rng::stream(3, Domain::Test, 0)) * c(1e-6)).collect();
        let y = pilot_observation_with_noise(&h, &[0.1, 0.2], &a, 10, noise.clone());
        // unused pilot: noise only
        assert_eq!(y[0], noise[0]);
        // removing both scaled channels leaves the noise
        let rest = &y[3] - &h[0] * c((10.0f64 * 0.1).sqrt()) - &h[1] * c((10.0f64 * 0.2).sqrt());
        assert!((rest - &noise[3]).norm() <= 1e-12 * noise[3].norm());

        let single = ClusterAssignment::from_clusters(10, 2, 1, vec![0, 1], vec![vec![0], vec![0]]).unwrap();
        let f = frame(1e-13);
        let zero_noise = vec![CVector::zeros(2); 10];
        let y = pilot_observation_with_noise(&h, &[0.1, 0.2], &single, 10, zero_noise);
        assert_eq!(y[0], &h[0] * c((10.0f64 * 0.1).sqrt()));

        let st = estimation_covariances(&large, &[0.1, 0.2], &single, &f).unwrap();
        let zeros = vec![CVector::<f64>::zeros(2); 10];
        assert!(mmse_estimate(&zeros, &st, &single).unwrap().iter().all(|v| v.iter().all(|z| z.is_zero())));
        assert!(mmse_estimate(&zeros[..3], &st, &single).is_err());
        let mut rng = rng::stream(4, Domain::Test, 0);
        assert_eq!(pilot_observation(&h, &[0.1, 0.2], &single, &f, &mut rng).unwrap().len(), 10);
    }

    #[test]
    fn noiseless_single_user_estimate_recovers_channel() {
        let large = LargeScaleState::from_gains(
            DMatrix::from_element(2, 1, 1e-10),
            3,
            CorrelationModel::Exponential { coefficient: 0.6 },
        )
        .unwrap();
        let a = ClusterAssignment::from_clusters(10, 3, 1, vec![0, 1], vec![vec![0], vec![0]]).unwrap();
        let f = frame(1e-30);
        let st = estimation_covariances(&large, &[0.1, 0.1], &a, &f).unwrap();
        let h = draw_channels(&large, 1, &mut rng::stream(5, Domain::Test, 0)).unwrap().remove(0);
        let y = pilot_observation(&h, &[0.1, 0.1], &a, &f, &mut rng::stream(6, Domain::Test, 0)).unwrap();
        let est = mmse_estimate(&y, &st, &a).unwrap();
        assert!((&est[0] - &h[0]).norm() <= 1e-8 * h[0].norm());
    }

    #[test]
    fn ensemble_is_reproducible() {
        let (large, a) = two_users_one_pilot([[1e-10], [2e-10]], 2);
        let e1 = ChannelEnsemble::new(&large, &a, &frame(1e-13), vec![0.1, 0.1], 8, 42).unwrap();
        let e2 = ChannelEnsemble::new(&large, &a, &frame(1e-13), vec![0.1, 0.1], 8, 42).unwrap();
        for (s1, s2) in e1.samples().zip(e2.samples()) {
            assert_eq!(s1.channels, s2.channels);
            assert_eq!(s1.estimates, s2.estimates);
        }
        assert_ne!(e1.sample(0).channels, e1.sample(1).channels);
        assert!(matches!(ChannelEnsemble::new(&large, &a, &frame(1e-13), vec![0.1, 0.1], 0, 1), Err(Error::EmptyEnsemble)));
        assert_eq!(
            ChannelEnsemble::<f64>::pilot_powers_for(&frame(1.0), &[0.01, 0.02], 0.1),
            vec![0.1, 0.1]
        );
        let track = FrameConfig { pilot_power_mode: PilotPowerMode::TrackDataPower, ..frame(1.0) };
        assert_eq!(ChannelEnsemble::<f64>::pilot_powers_for(&track, &[0.01, 0.02], 0.1), vec![0.01, 0.02]);
    }
}
