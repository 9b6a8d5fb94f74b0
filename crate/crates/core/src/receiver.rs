//! Receive combining and Monte-Carlo evaluation of the use-and-then-forget SINR.
//!
//! For UE `k` with collective combiner `v_k` and effective gains
//! `g_ki = v_k^H D_k h_i`, the achievable SINR is
//!
//! ```text
//!              rho_k |E{g_kk}|^2
//! ---------------------------------------------------------------
//! sum_i rho_i E{|g_ki|^2} - rho_k |E{g_kk}|^2 + sigma^2 E{||D_k v_k||^2}
//! ```
//!
//! Every expectation is replaced by an average over the same ensemble.

use std::fmt::Write as _;

use num_traits::{Float, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::association::ClusterAssignment;
use crate::channel::{ChannelEnsemble, EstimationStats, FrameConfig};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_in_place, cholesky_solve_in_place, hermitian_part, CMatrix, CVector};
use crate::scalar::{Cplx, Real};

/// Samples per work unit; fixed so the reduction order never depends on threads.
const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombinerId {
    /// `v_kl = h_hat_kl`.
    Mrc,
    /// Local partial MMSE built from the estimates of the UEs each AP serves.
    #[default]
    LpMmse,
}

/// Per-profile data reused across samples.
#[derive(Debug, Clone)]
pub struct CombinerContext<T: Real> {
    pub id: CombinerId,
    pub powers: Vec<T>,
    /// `sum_{i in D_l} rho_i C_il + sigma^2 I` per AP (LP-MMSE only).
    base: Vec<CMatrix<T>>,
}

impl<T: Real> CombinerContext<T> {
    pub fn new(
        id: CombinerId,
        stats: &EstimationStats<T>,
        powers: &[T],
        assignment: &ClusterAssignment,
        noise_power: T,
    ) -> Result<Self> {
        if powers.len() != assignment.num_ues() {
            return Err(Error::InvalidInput(format!(
                "expected {} data powers, got {}",
                assignment.num_ues(),
                powers.len()
            )));
        }
        if let Some(p) = powers.iter().find(|p| !(**p >= T::zero())) {
            return Err(Error::InvalidInput(format!("data powers must be non-negative, found {p}")));
        }
        let n = assignment.antennas;
        let base = match id {
            CombinerId::Mrc => Vec::new(),
            CombinerId::LpMmse => (0..assignment.num_aps())
                .map(|l| {
                    let mut z = CMatrix::<T>::identity(n, n) * Cplx::new(noise_power, T::zero());
                    for &i in &assignment.served_ues[l] {
                        z += stats.err_cov(i, l) * Cplx::new(powers[i], T::zero());
                    }
                    z
                })
                .collect(),
        };
        Ok(Self { id, powers: powers.to_vec(), base })
    }

    /// Combining vectors `v_kl` for one sample, row-major over `(k, l)`;
    /// zero for pairs outside the serving clusters.
    pub fn build(&self, estimates: &[CVector<T>], assignment: &ClusterAssignment) -> Result<Vec<CVector<T>>> {
        let l_count = assignment.num_aps();
        let n = assignment.antennas;
        match self.id {
            CombinerId::Mrc => Ok(estimates.to_vec()),
            CombinerId::LpMmse => {
                let mut out = vec![CVector::<T>::zeros(n); estimates.len()];
                for l in 0..l_count {
                    let served = &assignment.served_ues[l];
                    if served.is_empty() {
                        continue;
                    }
                    let mut z = self.base[l].clone();
                    for &i in served {
                        let h = &estimates[i * l_count + l];
                        z.gerc(Cplx::new(self.powers[i], T::zero()), h, h, Cplx::new(T::one(), T::zero()));
                    }
                    let z = hermitian_part(&z);
                    let chol = z.cholesky().ok_or(Error::Singular("LP-MMSE combiner"))?;
                    let mut rhs = CMatrix::<T>::zeros(n, served.len());
                    for (c, &k) in served.iter().enumerate() {
                        rhs.set_column(c, &estimates[k * l_count + l]);
                    }
                    let sol = chol.solve(&rhs);
                    for (c, &k) in served.iter().enumerate() {
                        out[k * l_count + l] = sol.column(c) * Cplx::new(self.powers[k], T::zero());
                    }
                }
                Ok(out)
            }
        }
    }
}

impl<T: Real> CombinerContext<T> {
    /// Flat counterpart of [`build`](Self::build): writes `v_kl` of every served
    /// link into `out` (layout of [`crate::channel::SampleBuffers`]). `work` holds `N * N` entries.
    pub fn build_into(
        &self,
        estimates: &[Cplx<T>],
        assignment: &ClusterAssignment,
        work: &mut [Cplx<T>],
        out: &mut [Cplx<T>],
    ) -> Result<()> {
        let l_count = assignment.num_aps();
        let n = assignment.antennas;
        let link = |k: usize, l: usize| (k * l_count + l) * n..(k * l_count + l + 1) * n;
        match self.id {
            CombinerId::Mrc => {
                for (k, aps) in assignment.serving_aps.iter().enumerate() {
                    for &l in aps {
                        out[link(k, l)].copy_from_slice(&estimates[link(k, l)]);
                    }
                }
            }
            CombinerId::LpMmse => {
                for (l, served) in assignment.served_ues.iter().enumerate() {
                    if served.is_empty() {
                        continue;
                    }
                    work.copy_from_slice(self.base[l].as_slice());
                    // lower triangle of sum_i rho_i h_il h_il^H
                    for &i in served {
                        let h = &estimates[link(i, l)];
                        for j in 0..n {
                            let hj = h[j].conj() * self.powers[i];
                            for r in j..n {
                                work[r + j * n] += h[r] * hj;
                            }
                        }
                    }
                    cholesky_in_place(work, n).map_err(|_| Error::Singular("LP-MMSE combiner"))?;
                    for &k in served {
                        let v = &mut out[link(k, l)];
                        v.copy_from_slice(&estimates[link(k, l)]);
                        cholesky_solve_in_place(work, n, v);
                        for x in v.iter_mut() {
                            *x *= self.powers[k];
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Builds the combining vectors of one sample.
pub fn build_combiner<T: Real>(
    id: CombinerId,
    estimates: &[CVector<T>],
    powers: &[T],
    assignment: &ClusterAssignment,
    stats: &EstimationStats<T>,
    noise_power: T,
) -> Result<Vec<CVector<T>>> {
    CombinerContext::new(id, stats, powers, assignment, noise_power)?.build(estimates, assignment)
}

/// Running sums of the expectations in the SINR expression.
#[derive(Debug, Clone)]
pub struct SinrAccumulator<T: Real> {
    num_ues: usize,
    /// `sum g_kk`.
    gain: Vec<Cplx<T>>,
    /// `sum |g_ki|^2`, row-major over `(k, i)`.
    gain_abs2: Vec<T>,
    /// `sum ||D_k v_k||^2`.
    combiner_norm2: Vec<T>,
    count: usize,
}

impl<T: Real> SinrAccumulator<T> {
    pub fn new(num_ues: usize) -> Self {
        Self {
            num_ues,
            gain: vec![Cplx::zero(); num_ues],
            gain_abs2: vec![T::zero(); num_ues * num_ues],
            combiner_norm2: vec![T::zero(); num_ues],
            count: 0,
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Adds one realization given its combiners and true channels.
    pub fn add_sample(&mut self, combiners: &[CVector<T>], channels: &[CVector<T>], assignment: &ClusterAssignment) {
        let k_count = self.num_ues;
        let l_count = assignment.num_aps();
        for k in 0..k_count {
            let mut norm2 = T::zero();
            let mut g = vec![Cplx::<T>::zero(); k_count];
            for &l in &assignment.serving_aps[k] {
                let v = &combiners[k * l_count + l];
                let mask = assignment.antenna_mask(k, l);
                for (n, &on) in mask.iter().enumerate() {
                    if !on {
                        continue;
                    }
                    let vc = v[n].conj();
                    norm2 += v[n].norm_sqr();
                    for (i, gi) in g.iter_mut().enumerate() {
                        *gi += vc * channels[i * l_count + l][n];
                    }
                }
            }
            self.gain[k] += g[k];
            for (i, gi) in g.iter().enumerate() {
                self.gain_abs2[k * k_count + i] += gi.norm_sqr();
            }
            self.combiner_norm2[k] += norm2;
        }
        self.count += 1;
    }

    /// Flat counterpart of [`add_sample`](Self::add_sample), taking the
    /// AP-major channel copy of [`crate::channel::SampleBuffers`]; `g` is
    /// scratch of length K.
    pub fn add_sample_flat(
        &mut self,
        combiners: &[Cplx<T>],
        channels_by_ap: &[Cplx<T>],
        assignment: &ClusterAssignment,
        g: &mut [Cplx<T>],
    ) {
        let k_count = self.num_ues;
        let l_count = assignment.num_aps();
        let n = assignment.antennas;
        for k in 0..k_count {
            let mut norm2 = T::zero();
            g.fill(Cplx::zero());
            for &l in &assignment.serving_aps[k] {
                let v = &combiners[(k * l_count + l) * n..][..n];
                let mask = assignment.antenna_mask(k, l);
                for a in 0..n {
                    if !mask[a] {
                        continue;
                    }
                    let vc = v[a].conj();
                    norm2 += v[a].norm_sqr();
                    let h = &channels_by_ap[(l * n + a) * k_count..][..k_count];
                    for (gi, hi) in g.iter_mut().zip(h) {
                        *gi += vc * hi;
                    }
                }
            }
            self.gain[k] += g[k];
            for (acc, gi) in self.gain_abs2[k * k_count..(k + 1) * k_count].iter_mut().zip(g.iter()) {
                *acc += gi.norm_sqr();
            }
            self.combiner_norm2[k] += norm2;
        }
        self.count += 1;
    }

    pub fn merge(&mut self, other: &Self) {
        for (a, b) in self.gain.iter_mut().zip(&other.gain) {
            *a += *b;
        }
        for (a, b) in self.gain_abs2.iter_mut().zip(&other.gain_abs2) {
            *a += *b;
        }
        for (a, b) in self.combiner_norm2.iter_mut().zip(&other.combiner_norm2) {
            *a += *b;
        }
        self.count += other.count;
    }

    /// Assembles the SINR of every UE for data powers `powers`.
    pub fn finish(&self, powers: &[T], noise_power: T, frame: &FrameConfig) -> Result<SinrReport> {
        if self.count == 0 {
            return Err(Error::EmptyEnsemble);
        }
        let k_count = self.num_ues;
        let inv = T::one() / T::of(self.count as f64);
        let mut clamped = 0;
        let mut ues = Vec::with_capacity(k_count);
        for k in 0..k_count {
            let mean_gain = self.gain[k] * inv;
            let coherent = mean_gain.norm_sqr();
            let mut self_var = self.gain_abs2[k * k_count + k] * inv - coherent;
            if self_var < T::zero() {
                self_var = T::zero();
                clamped += 1;
            }
            let signal = powers[k] * coherent;
            let mut interference = powers[k] * self_var;
            for i in (0..k_count).filter(|&i| i != k) {
                interference += powers[i] * self.gain_abs2[k * k_count + i] * inv;
            }
            let noise = noise_power * self.combiner_norm2[k] * inv;
            let denom = interference + noise;
            let sinr = if signal.is_zero() {
                T::zero()
            } else if denom > T::zero() {
                signal / denom
            } else {
                T::infinity()
            };
            ues.push(UeSinr {
                ue_id: k,
                signal_power: signal.to_f64_lossy(),
                interference_power: interference.to_f64_lossy(),
                noise_power: noise.to_f64_lossy(),
                sinr: sinr.to_f64_lossy(),
                se: spectral_efficiency(sinr, frame).to_f64_lossy(),
            });
        }
        Ok(SinrReport { ues, ensemble_size: self.count, clamped_variances: clamped })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeSinr {
    pub ue_id: usize,
    /// `rho_k |E{g_kk}|^2`.
    pub signal_power: f64,
    /// Interference from other UEs plus the self-interference (beamforming gain uncertainty).
    pub interference_power: f64,
    /// `sigma^2 E{||D_k v_k||^2}`.
    pub noise_power: f64,
    pub sinr: f64,
    /// bit/s/Hz.
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinrReport {
    pub ues: Vec<UeSinr>,
    pub ensemble_size: usize,
    /// Number of negative self-variance estimates that were clamped to zero.
    pub clamped_variances: usize,
}

impl SinrReport {
    pub fn se(&self) -> Vec<f64> {
        self.ues.iter().map(|u| u.se).collect()
    }

    /// CSV rows `ue_id,sinr,se,signal_power,interference_power,noise_power,ensemble_size`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("ue_id,sinr,se,signal_power,interference_power,noise_power,ensemble_size\n");
        for u in &self.ues {
            let _ = writeln!(
                s,
                "{},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{}",
                u.ue_id, u.sinr, u.se, u.signal_power, u.interference_power, u.noise_power, self.ensemble_size
            );
        }
        s
    }
}

/// `SE = (tau_u / tau_c) log2(1 + SINR)` for a non-negative SINR.
pub fn spectral_efficiency<T: Real>(sinr: T, frame: &FrameConfig) -> T {
    debug_assert!(!(sinr < T::zero()), "negative SINR {sinr}");
    T::of(frame.prelog()) * Float::log2(T::one() + sinr)
}

/// Monte-Carlo SINR for several power profiles over the same realizations.
/// Identical profiles are evaluated once.
pub fn monte_carlo_sinr_many<T: Real>(
    ensemble: &ChannelEnsemble<T>,
    id: CombinerId,
    profiles: &[Vec<T>],
) -> Result<Vec<SinrReport>> {
    if ensemble.sample_count == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let mut unique: Vec<&Vec<T>> = Vec::new();
    let slot: Vec<usize> = profiles
        .iter()
        .map(|p| {
            unique.iter().position(|u| *u == p).unwrap_or_else(|| {
                unique.push(p);
                unique.len() - 1
            })
        })
        .collect();
    let assignment = &ensemble.assignment;
    let noise = T::of(ensemble.frame.noise_power);
    let contexts = unique
        .iter()
        .map(|p| CombinerContext::new(id, &ensemble.stats, p, assignment, noise))
        .collect::<Result<Vec<_>>>()?;
    let k_count = assignment.num_ues();
    let n = assignment.antennas;
    let chunks = ensemble.sample_count.div_ceil(CHUNK);
    let partial: Vec<Vec<SinrAccumulator<T>>> = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<Vec<SinrAccumulator<T>>> {
            let mut accs = vec![SinrAccumulator::new(k_count); contexts.len()];
            let mut buf = ensemble.buffers();
            let mut v = buf.estimates.clone();
            let mut work = vec![Cplx::zero(); n * n];
            let mut g = vec![Cplx::zero(); k_count];
            for s in c * CHUNK..((c + 1) * CHUNK).min(ensemble.sample_count) {
                ensemble.sample_into(s, &mut buf);
                for (ctx, acc) in contexts.iter().zip(accs.iter_mut()) {
                    ctx.build_into(&buf.estimates, assignment, &mut work, &mut v)?;
                    acc.add_sample_flat(&v, &buf.channels_by_ap, assignment, &mut g);
                }
            }
            Ok(accs)
        })
        .collect::<Result<_>>()?;
    let mut total = vec![SinrAccumulator::new(k_count); contexts.len()];
    for accs in &partial {
        for (t, a) in total.iter_mut().zip(accs) {
            t.merge(a);
        }
    }
    let reports = total.iter().zip(&unique).map(|(acc, p)| acc.finish(p, noise, &ensemble.frame)).collect::<Result<Vec<_>>>()?;
    Ok(slot.into_iter().map(|j| reports[j].clone()).collect())
}

/// Monte-Carlo SINR for one power profile.
pub fn monte_carlo_sinr<T: Real>(ensemble: &ChannelEnsemble<T>, id: CombinerId, powers: &[T]) -> Result<SinrReport> {
    Ok(monte_carlo_sinr_many(ensemble, id, &[powers.to_vec()])?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::estimation_covariances;
    use crate::propagation::{CorrelationModel, LargeScaleState};
    use crate::rng::{self, Domain};
    use nalgebra::DMatrix;

    fn c(x: f64) -> Cplx<f64> {
        Cplx::new(x, 0.0)
    }

    fn one_ap(k: usize, n: usize) -> ClusterAssignment {
        ClusterAssignment::from_clusters(10, n, 1, (0..k).collect(), vec![vec![0]; k]).unwrap()
    }

    #[test]
    fn hand_evaluated_toy_sinr() {
        let a = one_ap(2, 1);
        let v = vec![CVector::from_element(1, c(1.0)), CVector::from_element(1, c(1.0))];
        let h = v.clone();
        let mut acc = SinrAccumulator::new(2);
        acc.add_sample(&v, &h, &a);
        let r = acc.finish(&[4.0, 1.0], 1.0, &FrameConfig::default()).unwrap();
        assert_eq!(r.ues[0].sinr, 2.0);
        assert_eq!(r.ues[0].signal_power, 4.0);
        assert_eq!(r.ues[0].interference_power, 1.0);
        assert_eq!(r.ues[0].noise_power, 1.0);
        assert_eq!(r.clamped_variances, 0);

        // f32 path gives the same exact value
        let v32 = vec![CVector::from_element(1, Cplx::new(1.0f32, 0.0)); 2];
        let mut acc = SinrAccumulator::new(2);
        acc.add_sample(&v32, &v32, &a);
        assert_eq!(acc.finish(&[4.0f32, 1.0], 1.0, &FrameConfig::default()).unwrap().ues[0].sinr, 2.0);
    }

    #[test]
    fn empty_accumulator_is_rejected() {
        let acc = SinrAccumulator::<f64>::new(2);
        assert!(matches!(acc.finish(&[1.0, 1.0], 1.0, &FrameConfig::default()), Err(Error::EmptyEnsemble)));
    }

    #[test]
    fn zero_interferers_leave_self_variance_and_noise() {
        let a = one_ap(3, 2);
        let mut rng = rng::stream(9, Domain::Test, 0);
        let mut acc = SinrAccumulator::new(3);
        let mut sum_g = c(0.0);
        let mut sum_g2 = 0.0;
        let mut sum_v2 = 0.0;
        let samples = 50;
        for _ in 0..samples {
            let h: Vec<CVector<f64>> = (0..3).map(|_| crate::channel::complex_gaussian(2, &mut rng)).collect();
            let v: Vec<CVector<f64>> = h.iter().map(|x| x * c(2.0)).collect();
            let g = v[0].dotc(&h[0]);
            sum_g += g;
            sum_g2 += g.norm_sqr();
            sum_v2 += v[0].norm_squared();
            acc.add_sample(&v, &h, &a);
        }
        let m = samples as f64;
        let r = acc.finish(&[0.5, 0.0, 0.0], 0.1, &FrameConfig::default()).unwrap();
        let coherent = (sum_g / m).norm_sqr();
        assert!((r.ues[0].signal_power - 0.5 * coherent).abs() <= 1e-12 * r.ues[0].signal_power);
        assert!((r.ues[0].interference_power - 0.5 * (sum_g2 / m - coherent)).abs() <= 1e-12 * sum_g2);
        assert!((r.ues[0].noise_power - 0.1 * sum_v2 / m).abs() <= 1e-12 * sum_v2);
    }

    #[test]
    fn se_examples() {
        let f = FrameConfig::default();
        assert_eq!(spectral_efficiency(0.0, &f), 0.0);
        assert!((spectral_efficiency(3.0, &f) - 1.9).abs() < 1e-12);
        assert!((spectral_efficiency(1.0, &f) - 0.95).abs() < 1e-12);
        let mut prev = -1.0;
        for s in [0.0, 0.1, 1.0, 10.0, 1e3, 1e6] {
            let se = spectral_efficiency(s, &f);
            assert!(se > prev);
            prev = se;
        }
    }

    fn estimates_and_stats(
        n: usize,
        k: usize,
        seed: u64,
    ) -> (ClusterAssignment, EstimationStats<f64>, Vec<CVector<f64>>, Vec<f64>) {
        let beta = DMatrix::from_fn(k, 1, |i, _| 1e-10 * (1.0 + i as f64));
        let large = LargeScaleState::from_gains(beta, n, CorrelationModel::Exponential { coefficient: 0.4 }).unwrap();
        let a = ClusterAssignment::from_clusters(10, n, 1, vec![0, 0, 1], vec![vec![0]; k]).unwrap();
        let frame = FrameConfig { noise_power: 1e-12, ..Default::default() };
        let powers = vec![0.1, 0.05, 0.02];
        let st = estimation_covariances(&large, &[0.1; 3], &a, &frame).unwrap();
        let mut rng = rng::stream(seed, Domain::Test, 0);
        let est = (0..k).map(|_| crate::channel::complex_gaussian::<f64, _>(n, &mut rng) * c(1e-5)).collect();
        (a, st, est, powers)
    }

    #[test]
    fn lp_mmse_matches_direct_inverse() {
        let (a, st, est, powers) = estimates_and_stats(4, 3, 1);
        let sigma2 = 1e-12;
        let v = build_combiner(CombinerId::LpMmse, &est, &powers, &a, &st, sigma2).unwrap();
        let mut z = CMatrix::<f64>::identity(4, 4) * c(sigma2);
        for i in 0..3 {
            z += (&est[i] * est[i].adjoint() + st.err_cov(i, 0)) * c(powers[i]);
        }
        let zinv = z.try_inverse().unwrap();
        for k in 0..3 {
            let direct = &zinv * &est[k] * c(powers[k]);
            let err = (&v[k] - &direct).iter().map(|d| d.norm()).fold(0.0, f64::max);
            let scale = direct.iter().map(|d| d.norm()).fold(0.0, f64::max);
            assert!(err <= 1e-10 * scale, "err {err} scale {scale}");
        }
        let mrc = build_combiner(CombinerId::Mrc, &est, &powers, &a, &st, sigma2).unwrap();
        assert_eq!(mrc, est);
    }

    #[test]
    fn lp_mmse_rank_one_example() {
        // D_l = {k}, C = 0, h_hat = e1, rho = 1, sigma^2 = 1 -> v = e1 / 2
        let a = one_ap(1, 3);
        let st = EstimationStats {
            num_aps: 1,
            psi: vec![],
            est_cov: vec![CMatrix::zeros(3, 3)],
            err_cov: vec![CMatrix::zeros(3, 3)],
            estimator: vec![],
        };
        let e1 = CVector::from_vec(vec![c(1.0), c(0.0), c(0.0)]);
        let v = build_combiner(CombinerId::LpMmse, &[e1], &[1.0], &a, &st, 1.0).unwrap();
        assert!((&v[0] - CVector::from_vec(vec![c(0.5), c(0.0), c(0.0)])).norm() < 1e-15);
    }

    #[test]
    fn sinr_invariant_to_combiner_scaling() {
        let a = one_ap(3, 2);
        let mut rng = rng::stream(10, Domain::Test, 0);
        let mut plain = SinrAccumulator::new(3);
        let mut scaled = SinrAccumulator::new(3);
        let factor = Cplx::new(-3.7, 1.2);
        for _ in 0..20 {
            let h: Vec<CVector<f64>> = (0..3).map(|_| crate::channel::complex_gaussian(2, &mut rng)).collect();
            let v: Vec<CVector<f64>> = (0..3).map(|_| crate::channel::complex_gaussian(2, &mut rng)).collect();
            let vs: Vec<CVector<f64>> = v.iter().map(|x| x * factor).collect();
            plain.add_sample(&v, &h, &a);
            scaled.add_sample(&vs, &h, &a);
        }
        let p = [0.1, 0.2, 0.3];
        let r1 = plain.finish(&p, 0.5, &FrameConfig::default()).unwrap();
        let r2 = scaled.finish(&p, 0.5, &FrameConfig::default()).unwrap();
        for (u1, u2) in r1.ues.iter().zip(&r2.ues) {
            assert!((u1.sinr - u2.sinr).abs() <= 1e-12 * u1.sinr);
        }
    }

    #[test]
    fn report_csv_has_stable_columns() {
        let a = one_ap(2, 1);
        let v = vec![CVector::from_element(1, c(1.0)); 2];
        let mut acc = SinrAccumulator::new(2);
        acc.add_sample(&v, &v, &a);
        let r = acc.finish(&[4.0, 1.0], 1.0, &FrameConfig::default()).unwrap();
        let csv = r.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "ue_id,sinr,se,signal_power,interference_power,noise_power,ensemble_size");
        assert!(lines.next().unwrap().starts_with("0,2.00000000000e0,"));
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<SinrReport>(&json).unwrap(), r);
    }

    fn drop_ensemble(correlation: CorrelationModel) -> (ChannelEnsemble<f64>, Vec<f64>) {
        use crate::association::{assign_pilots_and_clusters, ScenarioId};
        use crate::propagation::{generate_large_scale, seeded_layout, LayoutConfig, PropagationConfig};
        let layout_cfg = LayoutConfig { area_side: 1000.0, num_aps: 9, antennas_per_ap: 3, num_ues: 7 };
        let layout = seeded_layout::<f64>(&layout_cfg, 21).unwrap();
        let prop = PropagationConfig { correlation, ..Default::default() };
        let large = generate_large_scale(&layout, 3, &prop, 21).unwrap();
        let frame = FrameConfig { tau_p: 3, tau_u: 197, ..Default::default() };
        let a = assign_pilots_and_clusters(&large.beta, 3, 3, ScenarioId::CellFree).unwrap();
        let powers: Vec<f64> = (0..7).map(|k| 0.01 + 0.013 * k as f64).collect();
        (ChannelEnsemble::new(&large, &a, &frame, vec![0.1; 7], 200, 5).unwrap(), powers)
    }

    #[test]
    fn flat_path_matches_reference() {
        for corr in [CorrelationModel::Uncorrelated, CorrelationModel::Exponential { coefficient: 0.6 }] {
            let (ens, powers) = drop_ensemble(corr);
            let a = &ens.assignment;
            let n = a.antennas;
            let l_count = a.num_aps();
            let mut buf = ens.buffers();
            for s in [0, 17, 199] {
                let reference = ens.sample(s);
                ens.sample_into(s, &mut buf);
                for k in 0..a.num_ues() {
                    for l in 0..l_count {
                        let flat = &buf.channels[(k * l_count + l) * n..][..n];
                        assert_eq!(flat, reference.channels[k * l_count + l].as_slice());
                        if a.is_served(k, l) {
                            let flat = &buf.estimates[(k * l_count + l) * n..][..n];
                            let r = &reference.estimates[k * l_count + l];
                            for (x, y) in flat.iter().zip(r.iter()) {
                                assert!((x - y).norm() <= 1e-12 * r.norm());
                            }
                        }
                    }
                }
            }
            for id in [CombinerId::Mrc, CombinerId::LpMmse] {
                let noise = ens.frame.noise_power;
                let ctx = CombinerContext::new(id, &ens.stats, &powers, a, noise).unwrap();
                let mut reference = SinrAccumulator::new(7);
                for x in ens.samples() {
                    let v = ctx.build(&x.estimates, a).unwrap();
                    reference.add_sample(&v, &x.channels, a);
                }
                let expected = reference.finish(&powers, noise, &ens.frame).unwrap();
                let got = monte_carlo_sinr(&ens, id, &powers).unwrap();
                for (e, g) in expected.ues.iter().zip(&got.ues) {
                    assert!((e.sinr - g.sinr).abs() <= 1e-9 * e.sinr, "{id:?}: {} vs {}", e.sinr, g.sinr);
                }
            }
        }
    }

    #[test]
    fn duplicate_profiles_share_results() {
        let (ens, powers) = drop_ensemble(CorrelationModel::Uncorrelated);
        let full = vec![0.1; 7];
        let many = monte_carlo_sinr_many(&ens, CombinerId::LpMmse, &[full.clone(), powers.clone(), full.clone()]).unwrap();
        assert_eq!(many[0], many[2]);
        assert_eq!(many[1], monte_carlo_sinr(&ens, CombinerId::LpMmse, &powers).unwrap());
    }
}
