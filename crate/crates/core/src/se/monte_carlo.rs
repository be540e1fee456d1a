//! Monte Carlo evaluation of the use-and-then-forget SE bound.
//!
//! Trials are grouped into fixed batches. Each batch draws from its own
//! seeded stream and batches are reduced in index order, so the result does
//! not depend on the worker count.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{check_noise, check_prelog, SeMethod, SeReport};
use crate::channel::{sample_dual_channel, stack_rows};
use crate::correlation::CorrelationSet;
use crate::error::{Error, Result};
use crate::estimation::{
    estimate_with, process_pilots, sample_estimate_directly, DualEstimator, DualSampler, PilotBook, StreamEstimator,
    StreamSampler,
};
use crate::numerics::CMatrix;
use crate::precoding::PrecoderFactory;
use crate::rng::{stream, SimRng};

const DEFAULT_BATCHES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarloSpec {
    pub trials: usize,
    pub seed: u64,
    pub batch: usize,
}

impl MonteCarloSpec {
    /// Splits the trials into about 32 batches.
    pub fn new(trials: usize, seed: u64) -> Result<Self> {
        Self::with_batch(trials, seed, trials.div_ceil(DEFAULT_BATCHES).max(1))
    }

    pub fn with_batch(trials: usize, seed: u64, batch: usize) -> Result<Self> {
        if trials < 100 {
            return Err(Error::InsufficientSamples { required: 100, got: trials });
        }
        if batch == 0 {
            return Err(Error::InvalidParameter("batch size must be positive".into()));
        }
        Ok(MonteCarloSpec { trials, seed, batch })
    }

    fn batches(&self) -> usize {
        self.trials.div_ceil(self.batch)
    }
}

/// One joint realization: true channels `H_k` and estimates `Ĥ_k`, both as
/// stacked conjugated rows.
#[derive(Debug, Clone)]
pub struct Trial {
    pub channels: Vec<CMatrix>,
    pub estimates: Vec<CMatrix>,
}

pub trait TrialSource: Sync {
    fn num_ues(&self) -> usize;
    fn draw(&self, rng: &mut SimRng) -> Result<Trial>;
}

/// Wraps a closure as a trial source.
pub struct FnSource<F> {
    ues: usize,
    f: F,
}

impl<F> FnSource<F>
where
    F: Fn(&mut SimRng) -> Result<Trial> + Sync,
{
    pub fn new(ues: usize, f: F) -> Self {
        FnSource { ues, f }
    }
}

impl<F> TrialSource for FnSource<F>
where
    F: Fn(&mut SimRng) -> Result<Trial> + Sync,
{
    fn num_ues(&self) -> usize {
        self.ues
    }

    fn draw(&self, rng: &mut SimRng) -> Result<Trial> {
        (self.f)(rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimationPath {
    /// Draw `ĥ` and the estimation error straight from their distributions.
    Direct,
    /// Synthesize pilots and noise, then apply the MMSE estimator.
    EndToEnd,
}

enum DualMode {
    Direct(Vec<DualSampler>),
    EndToEnd { corrs: Vec<CorrelationSet>, book: PilotBook, noise_var: f64 },
}

pub struct DualPolSource {
    stats: Vec<Arc<DualEstimator>>,
    mode: DualMode,
}

impl DualPolSource {
    pub fn direct(stats: Vec<Arc<DualEstimator>>) -> Result<Self> {
        let samplers = stats.iter().cloned().map(DualSampler::new).collect::<Result<Vec<_>>>()?;
        Ok(DualPolSource { stats, mode: DualMode::Direct(samplers) })
    }

    pub fn end_to_end(
        stats: Vec<Arc<DualEstimator>>,
        corrs: Vec<CorrelationSet>,
        book: PilotBook,
        noise_var: f64,
    ) -> Result<Self> {
        if corrs.len() != stats.len() || book.num_ues() != stats.len() {
            return Err(Error::DimensionMismatch("one correlation set and pilot per UE".into()));
        }
        Ok(DualPolSource { stats, mode: DualMode::EndToEnd { corrs, book, noise_var } })
    }

    pub fn path(&self) -> EstimationPath {
        match self.mode {
            DualMode::Direct(_) => EstimationPath::Direct,
            DualMode::EndToEnd { .. } => EstimationPath::EndToEnd,
        }
    }
}

impl TrialSource for DualPolSource {
    fn num_ues(&self) -> usize {
        self.stats.len()
    }

    fn draw(&self, rng: &mut SimRng) -> Result<Trial> {
        match &self.mode {
            DualMode::Direct(samplers) => {
                let mut channels = Vec::with_capacity(samplers.len());
                let mut estimates = Vec::with_capacity(samplers.len());
                for s in samplers {
                    let (est, ch) = sample_estimate_directly(s, rng);
                    channels.push(ch.matrix());
                    estimates.push(est.matrix());
                }
                Ok(Trial { channels, estimates })
            }
            DualMode::EndToEnd { corrs, book, noise_var } => {
                let chans: Vec<_> = corrs.iter().map(|c| sample_dual_channel(c, rng)).collect();
                let pilots = process_pilots(&chans, book, *noise_var, rng)?;
                let estimates = self.stats.iter().zip(&pilots).map(|(s, y)| estimate_with(s, y).matrix()).collect();
                Ok(Trial { channels: chans.iter().map(|c| c.matrix()).collect(), estimates })
            }
        }
    }
}

/// Uni-polarized UEs, sampled through the direct path.
pub struct UniPolSource {
    samplers: Vec<StreamSampler>,
}

impl UniPolSource {
    pub fn direct(stats: &[StreamEstimator]) -> Result<Self> {
        Ok(UniPolSource { samplers: stats.iter().map(|s| s.sampler()).collect::<Result<Vec<_>>>()? })
    }
}

impl TrialSource for UniPolSource {
    fn num_ues(&self) -> usize {
        self.samplers.len()
    }

    fn draw(&self, rng: &mut SimRng) -> Result<Trial> {
        let mut channels = Vec::with_capacity(self.samplers.len());
        let mut estimates = Vec::with_capacity(self.samplers.len());
        for s in &self.samplers {
            let (hhat, h) = s.draw(rng);
            channels.push(stack_rows(&[&h]));
            estimates.push(stack_rows(&[&hhat]));
        }
        Ok(Trial { channels, estimates })
    }
}

/// Running sums of `H_k W_k` and `Σ_l (H_k W_l)(H_k W_l)ᴴ`.
#[derive(Debug, Clone)]
struct Moments {
    count: usize,
    signal: Vec<CMatrix>,
    power: Vec<CMatrix>,
}

impl Moments {
    fn new() -> Self {
        Moments { count: 0, signal: Vec::new(), power: Vec::new() }
    }

    fn add(&mut self, channels: &[CMatrix], precoders: &[CMatrix]) -> Result<()> {
        if self.signal.is_empty() {
            self.signal = channels.iter().zip(precoders).map(|(h, w)| CMatrix::zeros(h.nrows(), w.ncols())).collect();
            self.power = channels.iter().map(|h| CMatrix::zeros(h.nrows(), h.nrows())).collect();
        }
        if channels.len() != self.signal.len() || precoders.len() != channels.len() {
            return Err(Error::DimensionMismatch("UE count changed between trials".into()));
        }
        for (k, h) in channels.iter().enumerate() {
            for (l, w) in precoders.iter().enumerate() {
                if h.ncols() != w.nrows() {
                    return Err(Error::DimensionMismatch("channel and precoder antenna counts differ".into()));
                }
                let g = h * w;
                self.power[k].gemm(Complex64::new(1.0, 0.0), &g, &g.adjoint(), Complex64::new(1.0, 0.0));
                if l == k {
                    self.signal[k] += &g;
                }
            }
        }
        self.count += 1;
        Ok(())
    }

    fn merge(&mut self, other: &Moments) {
        if self.signal.is_empty() {
            *self = other.clone();
            return;
        }
        for (a, b) in self.signal.iter_mut().zip(&other.signal) {
            *a += b;
        }
        for (a, b) in self.power.iter_mut().zip(&other.power) {
            *a += b;
        }
        self.count += other.count;
    }

    fn se(&self, noise_var: f64, prelog: f64) -> Result<Vec<f64>> {
        let n = Complex64::new(self.count as f64, 0.0);
        self.signal
            .iter()
            .zip(&self.power)
            .enumerate()
            .map(|(k, (a, b))| {
                lower_bound_se(&a.map(|z| z / n), &b.map(|z| z / n), noise_var)
                    .map(|bits| prelog * bits)
                    .ok_or(Error::IndefiniteEffectiveNoise { ue: k })
            })
            .collect()
    }
}

/// `log₂ det(I + Aᴴ (B + σ²I − AAᴴ)⁻¹ A)` in bits, or `None` when the
/// effective noise is not positive definite.
pub fn lower_bound_se(a: &CMatrix, b: &CMatrix, noise_var: f64) -> Option<f64> {
    let s = b.nrows();
    let mut d = b - a * a.adjoint();
    for i in 0..s {
        d[(i, i)] += noise_var;
    }
    let bits = match (s, a.ncols()) {
        (1, 1) => {
            let d0 = d[(0, 0)].re;
            if !(d0 > 0.0) {
                return None;
            }
            (1.0 + a[(0, 0)].norm_sqr() / d0).log2()
        }
        (2, 2) => {
            let (d00, d11) = (d[(0, 0)].re, d[(1, 1)].re);
            let d01 = 0.5 * (d[(0, 1)] + d[(1, 0)].conj());
            let det = d00 * d11 - d01.norm_sqr();
            if !(d00 > 0.0 && det > 0.0) {
                return None;
            }
            let inv = CMatrix::from_row_slice(
                2,
                2,
                &[Complex64::new(d11 / det, 0.0), -d01 / det, -d01.conj() / det, Complex64::new(d00 / det, 0.0)],
            );
            let mut m = a.adjoint() * inv * a;
            m[(0, 0)] += 1.0;
            m[(1, 1)] += 1.0;
            let det_m = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re;
            if !(det_m > 0.0) {
                return None;
            }
            det_m.log2()
        }
        _ => {
            let chol = crate::numerics::hermitian_part(&d).cholesky()?;
            let mut m = a.adjoint() * chol.solve(a);
            for i in 0..m.nrows() {
                m[(i, i)] += 1.0;
            }
            let c = crate::numerics::hermitian_part(&m).cholesky()?;
            2.0 * c.l().diagonal().iter().map(|z| z.re.log2()).sum::<f64>()
        }
    };
    Some(bits.max(0.0))
}

/// Sample the SE bound over `spec.trials` joint channel/estimate draws.
pub fn monte_carlo_se(
    source: &dyn TrialSource,
    factory: &dyn PrecoderFactory,
    noise_var: f64,
    prelog: f64,
    spec: &MonteCarloSpec,
) -> Result<SeReport> {
    check_noise(noise_var)?;
    check_prelog(prelog)?;
    if spec.trials < 100 {
        return Err(Error::InsufficientSamples { required: 100, got: spec.trials });
    }
    let batches: Vec<Moments> = (0..spec.batches())
        .into_par_iter()
        .map(|b| {
            let size = spec.batch.min(spec.trials - b * spec.batch);
            let mut rng = stream(spec.seed, &[b as u64]);
            let mut acc = Moments::new();
            for _ in 0..size {
                let trial = source.draw(&mut rng)?;
                let w = factory.build(&trial.estimates)?;
                acc.add(&trial.channels, &w)?;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut total = Moments::new();
    for b in &batches {
        total.merge(b);
    }
    let per_ue = total.se(noise_var, prelog)?;

    let std_errors = if batches.len() >= 2 {
        let per_batch = batches.iter().map(|b| b.se(noise_var, prelog)).collect::<Result<Vec<_>>>()?;
        let nb = per_batch.len() as f64;
        Some(
            (0..per_ue.len())
                .map(|k| {
                    let mean = per_batch.iter().map(|s| s[k]).sum::<f64>() / nb;
                    let var = per_batch.iter().map(|s| (s[k] - mean).powi(2)).sum::<f64>() / (nb - 1.0);
                    (var / nb).sqrt()
                })
                .collect(),
        )
    } else {
        None
    };

    let mut report = SeReport::new(per_ue, SeMethod::MonteCarlo, prelog, spec.trials);
    report.std_errors = std_errors;
    Ok(report)
}
