//! Uplink pilots and MMSE channel estimation.
//!
//! Two routes produce `(ĥ, h)` pairs with the same joint distribution:
//! synthesizing the received pilot block and filtering it, or drawing
//! `ĥ ~ CN(0, Γ)` and an independent error `e ~ CN(0, R − Γ)` directly.
//! The second one skips the pilot block entirely and is what the Monte Carlo
//! engine uses by default.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::DualPolChannel;
use crate::correlation::CorrelationSet;
use crate::error::{Error, Result};
use crate::numerics::{
    psd_spectrum, real_trace, sample_standard_complex_gaussian, CMatrix,
    CVector, HermitianFactor, PsdSpectrum,
};
use crate::units::PolPair;

/// Orthogonal pilot codebook. UE `k` owns columns `2k` (V port) and `2k + 1`
/// (H port) of `V`, which is `τ_p × 2K` with `Vᴴ V = τ_p I`.
#[derive(Debug, Clone)]
pub struct PilotBook {
    tau_p: usize,
    v: CMatrix,
    powers: Vec<PolPair>,
}

/// Build the DFT pilot book with `τ_p = 2K`.
pub fn build_pilot_book(powers: &[PolPair], tau_c: usize) -> Result<PilotBook> {
    let k = powers.len();
    if k == 0 {
        return Err(Error::InvalidParameter("pilot book needs at least one UE".into()));
    }
    let tau_p = 2 * k;
    if tau_p > tau_c {
        return Err(Error::PilotBudgetExceeded { pilots: tau_p, tau_c });
    }
    if powers.iter().any(|p| !(p.v >= 0.0 && p.h >= 0.0)) {
        return Err(Error::InvalidParameter("pilot powers must be nonnegative".into()));
    }
    let n = tau_p as f64;
    let v = CMatrix::from_fn(tau_p, tau_p, |t, j| {
        Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * (t * j) as f64 / n)
    });
    Ok(PilotBook { tau_p, v, powers: powers.to_vec() })
}

impl PilotBook {
    pub fn tau_p(&self) -> usize {
        self.tau_p
    }

    pub fn num_ues(&self) -> usize {
        self.powers.len()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.v
    }

    pub fn powers(&self, k: usize) -> PolPair {
        self.powers[k]
    }

    /// `V_k`, the `τ_p × 2` column pair of UE `k`.
    pub fn ue_columns(&self, k: usize) -> CMatrix {
        self.v.columns(2 * k, 2).into_owned()
    }

    /// Transmitted pilot `Φ_k = L_k^{1/2} V_kᵀ` (`2 × τ_p`).
    pub fn pilot_signal(&self, k: usize) -> CMatrix {
        let p = self.powers[k];
        let mut phi = self.ue_columns(k).transpose();
        phi.row_mut(0).scale_mut(p.v.sqrt());
        phi.row_mut(1).scale_mut(p.h.sqrt());
        phi
    }

    /// Average transmit power `tr(Φ_k Φ_kᴴ) / τ_p`.
    pub fn average_power(&self, k: usize) -> f64 {
        let phi = self.pilot_signal(k);
        real_trace(&(&phi * phi.adjoint())) / self.tau_p as f64
    }
}

/// Processed pilot `Y V_k^*` split into its V and H columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedPilot {
    pub y_v: CVector,
    pub y_h: CVector,
}

/// Synthesize `Y = Σ_l H_lᴴ Φ_l + N` and correlate it with every UE's pilot.
pub fn process_pilots<R: Rng + ?Sized>(
    channels: &[DualPolChannel],
    book: &PilotBook,
    noise_var: f64,
    rng: &mut R,
) -> Result<Vec<ProcessedPilot>> {
    if channels.len() != book.num_ues() {
        return Err(Error::DimensionMismatch(format!(
            "{} channels for a pilot book of {} UEs",
            channels.len(),
            book.num_ues()
        )));
    }
    let m = channels[0].ports();
    if channels.iter().any(|c| c.ports() != m || c.h_h.len() != m) {
        return Err(Error::DimensionMismatch("channels disagree on the port count".into()));
    }
    let tau_p = book.tau_p();
    let noise = sample_standard_complex_gaussian(m * tau_p, rng) * Complex64::new(noise_var.sqrt(), 0.0);
    let mut y = CMatrix::from_iterator(m, tau_p, noise.iter().cloned());
    for (l, ch) in channels.iter().enumerate() {
        let mut hh = CMatrix::zeros(m, 2);
        hh.set_column(0, &ch.h_v);
        hh.set_column(1, &ch.h_h);
        y += hh * book.pilot_signal(l);
    }
    Ok((0..book.num_ues())
        .map(|k| {
            let yp = &y * book.ue_columns(k).map(|z| z.conj());
            ProcessedPilot { y_v: yp.column(0).into_owned(), y_h: yp.column(1).into_owned() }
        })
        .collect())
}

/// MMSE statistics of one polarization stream with covariance `R`:
/// `Ψ = (p τ_p R + σ² I)⁻¹`, `Γ = p τ_p R Ψ R`, `C = R − Γ = σ² R Ψ`.
///
/// All three are evaluated on the eigenbasis of `R`, which keeps `Γ` and `C`
/// PSD even when `C` is many orders of magnitude below `R`.
#[derive(Debug, Clone)]
pub struct StreamEstimator {
    pilot_power: f64,
    tau_p: usize,
    noise_var: f64,
    covariance: CMatrix,
    spectrum: PsdSpectrum,
    gamma: CMatrix,
    error_cov: CMatrix,
    /// `√p R Ψ`, applied to the processed pilot.
    filter: CMatrix,
    trace_gamma: f64,
}

impl StreamEstimator {
    pub fn new(covariance: &CMatrix, pilot_power: f64, tau_p: usize, noise_var: f64) -> Result<Self> {
        if !(noise_var > 0.0) {
            return Err(Error::InvalidParameter(format!("noise variance {noise_var} must be positive")));
        }
        if !(pilot_power >= 0.0) || tau_p == 0 {
            return Err(Error::InvalidParameter("pilot power must be nonnegative and τ_p positive".into()));
        }
        let spectrum = psd_spectrum(covariance)?;
        let gain = pilot_power * tau_p as f64;
        let gamma_of = move |l: f64| gain * l * l / (gain * l + noise_var);
        let gamma = spectrum.map(gamma_of);
        let error_cov = spectrum.map(|l| noise_var * l / (gain * l + noise_var));
        let filter = spectrum.map(|l| pilot_power.sqrt() * l / (gain * l + noise_var));
        let trace_gamma = spectrum.values().iter().map(|&l| gamma_of(l)).sum();
        Ok(StreamEstimator {
            pilot_power,
            tau_p,
            noise_var,
            covariance: covariance.clone(),
            spectrum,
            gamma,
            error_cov,
            filter,
            trace_gamma,
        })
    }

    pub fn estimate(&self, processed: &CVector) -> CVector {
        &self.filter * processed
    }

    pub fn covariance(&self) -> &CMatrix {
        &self.covariance
    }

    pub fn gamma(&self) -> &CMatrix {
        &self.gamma
    }

    pub fn error_covariance(&self) -> &CMatrix {
        &self.error_cov
    }

    pub fn filter(&self) -> &CMatrix {
        &self.filter
    }

    pub fn trace_gamma(&self) -> f64 {
        self.trace_gamma
    }

    pub fn pilot_power(&self) -> f64 {
        self.pilot_power
    }

    pub fn tau_p(&self) -> usize {
        self.tau_p
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn sampler(&self) -> Result<StreamSampler> {
        let gain = self.pilot_power * self.tau_p as f64;
        let noise = self.noise_var;
        Ok(StreamSampler {
            gamma: self.spectrum.factor(|l| gain * l * l / (gain * l + noise)),
            error: self.spectrum.factor(|l| noise * l / (gain * l + noise)),
        })
    }

    /// Copy with `Γ` scaled by `factor`; `C` and the sampler are left alone.
    /// Only for fault injection in validation runs.
    pub fn with_scaled_gamma(&self, factor: f64) -> StreamEstimator {
        let mut out = self.clone();
        out.gamma *= Complex64::new(factor, 0.0);
        out.trace_gamma *= factor;
        out
    }
}

/// Square-root factors for direct sampling of `(ĥ, e)`.
#[derive(Debug, Clone)]
pub struct StreamSampler {
    gamma: HermitianFactor,
    error: HermitianFactor,
}

impl StreamSampler {
    /// Returns `(ĥ, h)` with `h = ĥ + e`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (CVector, CVector) {
        let hhat = self.gamma.sample(rng);
        let err = self.error.sample(rng);
        let h = &hhat + err;
        (hhat, h)
    }
}

/// MMSE estimator of a dual-polarized UE. The V and H streams decouple
/// because the block covariance `blockdiag(R_v, R_h)` does.
#[derive(Debug, Clone)]
pub struct DualEstimator {
    pub v: StreamEstimator,
    pub h: StreamEstimator,
}

impl DualEstimator {
    pub fn new(corr: &CorrelationSet, pilot: PolPair, tau_p: usize, noise_var: f64) -> Result<Self> {
        Ok(DualEstimator {
            v: StreamEstimator::new(corr.r_v(), pilot.v, tau_p, noise_var)?,
            h: StreamEstimator::new(corr.r_h(), pilot.h, tau_p, noise_var)?,
        })
    }

    pub fn traces(&self) -> PolPair {
        PolPair::new(self.v.trace_gamma(), self.h.trace_gamma())
    }
}

/// MMSE estimate of one UE's channel together with the statistics it was
/// formed with.
#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    pub hhat_v: CVector,
    pub hhat_h: CVector,
    pub stats: Arc<DualEstimator>,
}

impl ChannelEstimate {
    pub fn gamma_v(&self) -> &CMatrix {
        self.stats.v.gamma()
    }

    pub fn gamma_h(&self) -> &CMatrix {
        self.stats.h.gamma()
    }

    pub fn error_v(&self) -> &CMatrix {
        self.stats.v.error_covariance()
    }

    pub fn error_h(&self) -> &CMatrix {
        self.stats.h.error_covariance()
    }

    /// `Ĥ_k`, rows `ĥ_vᴴ` and `ĥ_hᴴ`.
    pub fn matrix(&self) -> CMatrix {
        crate::channel::stack_rows(&[&self.hhat_v, &self.hhat_h])
    }
}

/// Apply shared estimator statistics to a processed pilot.
pub fn estimate_with(stats: &Arc<DualEstimator>, pilot: &ProcessedPilot) -> ChannelEstimate {
    ChannelEstimate { hhat_v: stats.v.estimate(&pilot.y_v), hhat_h: stats.h.estimate(&pilot.y_h), stats: stats.clone() }
}

/// One-shot MMSE estimate from a processed pilot.
pub fn mmse_estimate(
    pilot: &ProcessedPilot,
    corr: &CorrelationSet,
    powers: PolPair,
    tau_p: usize,
    noise_var: f64,
) -> Result<ChannelEstimate> {
    let stats = Arc::new(DualEstimator::new(corr, powers, tau_p, noise_var)?);
    Ok(estimate_with(&stats, pilot))
}

#[derive(Debug, Clone)]
pub struct DualSampler {
    stats: Arc<DualEstimator>,
    v: StreamSampler,
    h: StreamSampler,
}

impl DualSampler {
    pub fn new(stats: Arc<DualEstimator>) -> Result<Self> {
        let v = stats.v.sampler()?;
        let h = stats.h.sampler()?;
        Ok(DualSampler { stats, v, h })
    }

    pub fn stats(&self) -> &Arc<DualEstimator> {
        &self.stats
    }
}

/// Draw `ĥ ~ CN(0, Γ)` and an independent error per polarization; the true
/// channel is `ĥ + e`.
pub fn sample_estimate_directly<R: Rng + ?Sized>(sampler: &DualSampler, rng: &mut R) -> (ChannelEstimate, DualPolChannel) {
    let (hhat_v, h_v) = sampler.v.draw(rng);
    let (hhat_h, h_h) = sampler.h.draw(rng);
    (ChannelEstimate { hhat_v, hhat_h, stats: sampler.stats.clone() }, DualPolChannel { h_v, h_h })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_cross_covariance, sample_dual_channel};
    use crate::correlation::{build_correlation_set, local_scattering_cov, xpd_from_db};
    use crate::numerics::{frobenius, hermitian_eigenvalues, kron};
    use crate::rng::stream;
    use nalgebra::SymmetricEigen;

    fn max_abs(a: &CMatrix) -> f64 {
        a.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn scenario_corr(half_m: usize, q: f64, beta: f64, seed: u64) -> CorrelationSet {
        let mut rng = stream(seed, &[]);
        let angles = crate::scenario::draw_cluster_angles(0.5, 6, &mut rng);
        let r_bs = local_scattering_cov(beta, &angles, 5f64.to_radians(), half_m).unwrap();
        build_correlation_set(&r_bs, q).unwrap()
    }

    #[test]
    fn pilot_book_gram() {
        let book = build_pilot_book(&[PolPair::both(1.0)], 200).unwrap();
        assert_eq!(book.tau_p(), 2);
        let g = book.matrix().adjoint() * book.matrix();
        assert!(max_abs(&(g - CMatrix::identity(2, 2) * Complex64::new(2.0, 0.0))) < 1e-12);

        let book = build_pilot_book(&vec![PolPair::both(100.0); 10], 200).unwrap();
        assert_eq!(book.tau_p(), 20);
        let g = book.matrix().adjoint() * book.matrix();
        assert!(max_abs(&(g - CMatrix::identity(20, 20) * Complex64::new(20.0, 0.0))) <= 1e-10 * 20.0);
        for k in 0..10 {
            let vk = book.ue_columns(k);
            let gk = vk.adjoint() * &vk;
            assert!(max_abs(&(gk - CMatrix::identity(2, 2) * Complex64::new(20.0, 0.0))) < 1e-10);
            for l in 0..10 {
                let prod = book.pilot_signal(k) * book.ue_columns(l).map(|z| z.conj());
                if l != k {
                    assert!(max_abs(&prod) <= 1e-10);
                } else {
                    assert!((prod[(0, 0)] - Complex64::new(20.0 * 10.0, 0.0)).norm() < 1e-9);
                }
            }
            assert!((book.average_power(k) - 200.0).abs() < 1e-9);
        }
    }

    #[test]
    fn pilot_budget() {
        let r = build_pilot_book(&vec![PolPair::both(1.0); 101], 200);
        assert_eq!(r.unwrap_err(), Error::PilotBudgetExceeded { pilots: 202, tau_c: 200 });
    }

    #[test]
    fn noiseless_single_ue_pilot() {
        let corr = scenario_corr(3, 0.2, 1.0, 1);
        let mut rng = stream(2, &[]);
        let ch = sample_dual_channel(&corr, &mut rng);
        let book = build_pilot_book(&[PolPair::both(1.0)], 200).unwrap();
        let y = process_pilots(std::slice::from_ref(&ch), &book, 0.0, &mut rng).unwrap();
        let scale = frobenius(&ch.matrix());
        assert!((&y[0].y_v - &ch.h_v * Complex64::new(2.0, 0.0)).norm() <= 1e-12 * scale);
        assert!((&y[0].y_h - &ch.h_h * Complex64::new(2.0, 0.0)).norm() <= 1e-12 * scale);
    }

    #[test]
    fn orthogonal_pilots_separate_ues() {
        let mut rng = stream(3, &[]);
        let c1 = scenario_corr(4, 0.3, 1.0, 4);
        let c2 = scenario_corr(4, 0.3, 5.0, 5);
        let chans = vec![sample_dual_channel(&c1, &mut rng), sample_dual_channel(&c2, &mut rng)];
        let powers = [PolPair::new(2.0, 3.0), PolPair::new(1.0, 4.0)];
        let book = build_pilot_book(&powers, 200).unwrap();
        let y = process_pilots(&chans, &book, 0.0, &mut rng).unwrap();
        let tau = 4.0;
        for (k, ch) in chans.iter().enumerate() {
            let want_v = &ch.h_v * Complex64::new(tau * powers[k].v.sqrt(), 0.0);
            let want_h = &ch.h_h * Complex64::new(tau * powers[k].h.sqrt(), 0.0);
            let other = &chans[1 - k];
            let residual_v = &y[k].y_v - want_v;
            let residual_h = &y[k].y_h - want_h;
            // no leftover aligned with the other UE's channel
            let proj = residual_v.dotc(&other.h_v).norm() + residual_h.dotc(&other.h_h).norm();
            assert!(proj <= 1e-10 * other.matrix().norm_squared(), "{proj}");
        }
    }

    #[test]
    fn processed_pilot_covariance() {
        let corr = scenario_corr(2, 0.2, 1.0, 6);
        let noise = 0.3;
        let p = PolPair::new(1.5, 0.5);
        let book = build_pilot_book(&[p, PolPair::both(1.0)], 200).unwrap();
        let other = scenario_corr(2, 0.1, 2.0, 7);
        let mut rng = stream(8, &[]);
        let n = 10_000;
        let mut pilots = Vec::with_capacity(n);
        for _ in 0..n {
            let chans = vec![sample_dual_channel(&corr, &mut rng), sample_dual_channel(&other, &mut rng)];
            pilots.push(process_pilots(&chans, &book, noise, &mut rng).unwrap().swap_remove(0));
        }
        let tau = 4.0;
        let want = (corr.r_v() * Complex64::new(p.v * tau, 0.0) + CMatrix::identity(4, 4) * Complex64::new(noise, 0.0))
            * Complex64::new(tau, 0.0);
        let cov = sample_cross_covariance(pilots.iter().map(|y| (&y.y_v, &y.y_v)), 4);
        assert!(max_abs(&(&cov - &want)) <= 5.0 * frobenius(&want) / (n as f64).sqrt());
    }

    #[test]
    fn no_information_limit() {
        let corr = scenario_corr(3, 0.2, 1e-12, 9);
        let est = DualEstimator::new(&corr, PolPair::both(100.0), 2, 1.0).unwrap();
        let r_norm = frobenius(corr.r_v());
        assert!(frobenius(est.v.gamma()) <= 1e-6 * r_norm);
        let y = CVector::from_element(6, Complex64::new(1.0, 0.0));
        assert!(est.v.estimate(&y).norm() <= 1e-9);
    }

    #[test]
    fn uncorrelated_trace_formula() {
        let (half_m, beta, p, tau, s2) = (5usize, 2.0, 3.0, 4usize, 0.7);
        let r_bs = CMatrix::identity(half_m, half_m) * Complex64::new(beta, 0.0);
        let corr = build_correlation_set(&r_bs, 0.0).unwrap();
        let est = DualEstimator::new(&corr, PolPair::both(p), tau, s2).unwrap();
        // per diagonal entry: p τ β² / (p τ β + σ²)
        let g = p * tau as f64 * beta * beta / (p * tau as f64 * beta + s2);
        let want = half_m as f64 * g;
        assert!((est.v.trace_gamma() - want).abs() <= 1e-12 * want);
        assert!((est.h.trace_gamma() - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn gamma_matches_spectral_oracle() {
        let (half_m, q, p, tau, s2) = (4usize, 0.3, 2.0, 6usize, 0.05);
        let corr = scenario_corr(half_m, q, 1.0, 10);
        let est = DualEstimator::new(&corr, PolPair::new(p, 0.5 * p), tau, s2).unwrap();
        let eig = SymmetricEigen::new(corr.r_bs().clone());
        let u = kron(&eig.eigenvectors, &CMatrix::identity(2, 2));
        for (weights, pw, got) in [([1.0 - q, q], p, est.v.gamma()), ([q, 1.0 - q], 0.5 * p, est.h.gamma())] {
            let d = CVector::from_fn(2 * half_m, |i, _| {
                let lam = eig.eigenvalues[i / 2].max(0.0) * weights[i % 2];
                let g = pw * tau as f64;
                Complex64::new(g * lam * lam / (g * lam + s2), 0.0)
            });
            let want = &u * CMatrix::from_diagonal(&d) * u.adjoint();
            assert!(frobenius(&(got - &want)) <= 1e-10 * frobenius(&want));
        }
    }

    #[test]
    fn estimate_matches_vectorized_form() {
        // vec(Ĥᴴ) = R_b Aᴴ (A R_b Aᴴ + σ² τ I)⁻¹ vec(Yᵖ), A = τ L^{1/2} ⊗ I
        let corr = scenario_corr(3, 0.25, 1.0, 11);
        let m = corr.ports();
        let (pw, tau, s2) = (PolPair::new(1.3, 0.7), 2usize, 0.2);
        let mut rng = stream(12, &[]);
        let ch = sample_dual_channel(&corr, &mut rng);
        let book = build_pilot_book(&[pw], 200).unwrap();
        let y = process_pilots(std::slice::from_ref(&ch), &book, s2, &mut rng).unwrap().swap_remove(0);
        let est = mmse_estimate(&y, &corr, pw, tau, s2).unwrap();

        let rb = corr.block_covariance();
        let l = CMatrix::from_diagonal(&CVector::from_vec(vec![
            Complex64::new(tau as f64 * pw.v.sqrt(), 0.0),
            Complex64::new(tau as f64 * pw.h.sqrt(), 0.0),
        ]));
        let a = kron(&l, &CMatrix::identity(m, m));
        let inner = &a * &rb * a.adjoint() + CMatrix::identity(2 * m, 2 * m) * Complex64::new(s2 * tau as f64, 0.0);
        let vecy = CVector::from_iterator(2 * m, y.y_v.iter().chain(y.y_h.iter()).cloned());
        let want = &rb * a.adjoint() * inner.try_inverse().unwrap() * vecy;
        let got = CVector::from_iterator(2 * m, est.hhat_v.iter().chain(est.hhat_h.iter()).cloned());
        assert!((got - &want).norm() <= 1e-9 * want.norm());
    }

    #[test]
    fn covariance_identities_and_ordering() {
        let corr = scenario_corr(6, xpd_from_db(7.0).q, 3e-11, 13);
        let s2 = crate::units::dbm_to_mw(-94.0);
        let est = DualEstimator::new(&corr, PolPair::both(100.0), 20, s2).unwrap();
        let norm = frobenius(corr.r());
        assert!(frobenius(&(est.v.gamma() + est.v.error_covariance() - corr.r_v())) <= 1e-10 * norm);
        assert!(frobenius(&(est.h.gamma() + est.h.error_covariance() - corr.r_h())) <= 1e-10 * norm);
        let (tv, th) = (est.v.trace_gamma(), est.h.trace_gamma());
        assert!((tv - th).abs() <= 1e-10 * tv);
        let spectral = hermitian_eigenvalues(corr.r_v()).into_iter().fold(0.0, f64::max);
        for m in [est.v.gamma(), est.v.error_covariance()] {
            let min = hermitian_eigenvalues(m).into_iter().fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-10 * spectral);
        }
    }

    #[test]
    fn gamma_trace_grows_with_pilot_power() {
        let corr = scenario_corr(5, 0.2, 1e-11, 14);
        let s2 = crate::units::dbm_to_mw(-94.0);
        let mut last = -1.0;
        for p in [0.0, 1.0, 10.0, 100.0, 1000.0] {
            let t = StreamEstimator::new(corr.r_v(), p, 20, s2).unwrap().trace_gamma();
            assert!(t >= last);
            last = t;
        }
    }

    #[test]
    fn end_to_end_statistics() {
        let corr = scenario_corr(2, 0.2, 1.0, 15);
        let m = corr.ports();
        let (pw, s2) = (PolPair::new(1.0, 2.0), 0.5);
        let book = build_pilot_book(&[pw], 200).unwrap();
        let stats = Arc::new(DualEstimator::new(&corr, pw, book.tau_p(), s2).unwrap());
        let mut rng = stream(16, &[]);
        let n = 10_000;
        let mut draws = Vec::with_capacity(n);
        for _ in 0..n {
            let ch = sample_dual_channel(&corr, &mut rng);
            let y = process_pilots(std::slice::from_ref(&ch), &book, s2, &mut rng).unwrap().swap_remove(0);
            let est = estimate_with(&stats, &y);
            draws.push((est, ch));
        }
        let tol = |x: &CMatrix| 5.0 * frobenius(x) / (n as f64).sqrt();
        let cov = sample_cross_covariance(draws.iter().map(|(e, _)| (&e.hhat_v, &e.hhat_v)), m);
        assert!(max_abs(&(cov - stats.v.gamma())) <= tol(stats.v.gamma()));
        // MMSE orthogonality
        let errors: Vec<CVector> = draws.iter().map(|(e, c)| &c.h_v - &e.hhat_v).collect();
        let orth = sample_cross_covariance(draws.iter().zip(&errors).map(|((e, _), err)| (&e.hhat_v, err)), m);
        assert!(max_abs(&orth) <= tol(corr.r_v()));
        let cross = sample_cross_covariance(draws.iter().map(|(e, _)| (&e.hhat_v, &e.hhat_h)), m);
        assert!(max_abs(&cross) <= tol(corr.r_v()));
    }

    #[test]
    fn direct_sampling_statistics() {
        let corr = scenario_corr(2, 0.3, 1.0, 17);
        let m = corr.ports();
        let stats = Arc::new(DualEstimator::new(&corr, PolPair::both(1.0), 2, 0.4).unwrap());
        let sampler = DualSampler::new(stats.clone()).unwrap();
        let mut rng = stream(18, &[]);
        let n = 10_000;
        let draws: Vec<_> = (0..n).map(|_| sample_estimate_directly(&sampler, &mut rng)).collect();
        let tol = |x: &CMatrix| 5.0 * frobenius(x) / (n as f64).sqrt();
        let cov_h = sample_cross_covariance(draws.iter().map(|(_, c)| (&c.h_v, &c.h_v)), m);
        assert!(max_abs(&(cov_h - corr.r_v())) <= tol(corr.r_v()));
        let errors: Vec<CVector> = draws.iter().map(|(e, c)| &c.h_v - &e.hhat_v).collect();
        let cross = sample_cross_covariance(draws.iter().zip(&errors).map(|((e, _), err)| (&e.hhat_v, err)), m);
        assert!(max_abs(&cross) <= tol(corr.r_v()));
    }

    #[test]
    fn rejects_nonpositive_noise() {
        let corr = scenario_corr(2, 0.3, 1.0, 19);
        assert!(DualEstimator::new(&corr, PolPair::both(1.0), 2, 0.0).is_err());
    }
}
