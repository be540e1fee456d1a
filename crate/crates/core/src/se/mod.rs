//! Downlink spectral efficiency: closed-form MR expressions and the generic
//! Monte Carlo lower bound.

mod monte_carlo;

pub use monte_carlo::{
    lower_bound_se, monte_carlo_se, DualPolSource, EstimationPath, FnSource, MonteCarloSpec, Trial, TrialSource,
    UniPolSource,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimation::{DualEstimator, StreamEstimator};
use crate::numerics::trace_product;
use crate::precoding::MIN_TRACE;
use crate::units::PolPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeMethod {
    ClosedFormMr,
    MonteCarlo,
    Simplified,
    UniClosedFormMr,
}

impl SeMethod {
    pub fn label(self) -> &'static str {
        match self {
            SeMethod::ClosedFormMr => "closed_form_mr",
            SeMethod::MonteCarlo => "monte_carlo",
            SeMethod::Simplified => "simplified",
            SeMethod::UniClosedFormMr => "uni_closed_form_mr",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeReport {
    pub per_ue_se: Vec<f64>,
    pub sum_se: f64,
    pub method: SeMethod,
    pub prelog: f64,
    /// Zero for analytical results.
    pub trials: usize,
    /// Batch-means standard error per UE (Monte Carlo only).
    pub std_errors: Option<Vec<f64>>,
    pub config_digest: Option<String>,
}

impl SeReport {
    pub fn new(per_ue_se: Vec<f64>, method: SeMethod, prelog: f64, trials: usize) -> Self {
        let sum_se = per_ue_se.iter().sum();
        SeReport { per_ue_se, sum_se, method, prelog, trials, std_errors: None, config_digest: None }
    }

    pub fn with_digest(mut self, digest: impl Into<String>) -> Self {
        self.config_digest = Some(digest.into());
        self
    }
}

/// Fraction of the coherence block left for data.
pub fn prelog(tau_c: usize, tau_p: usize) -> Result<f64> {
    if tau_c == 0 || tau_p >= tau_c {
        return Err(Error::PilotBudgetExceeded { pilots: tau_p, tau_c });
    }
    Ok((tau_c - tau_p) as f64 / tau_c as f64)
}

fn check_prelog(prelog: f64) -> Result<()> {
    if !(prelog > 0.0 && prelog <= 1.0) {
        return Err(Error::InvalidParameter(format!("prelog {prelog} must lie in (0, 1]")));
    }
    Ok(())
}

fn check_noise(noise_var: f64) -> Result<()> {
    if !(noise_var > 0.0) {
        return Err(Error::InvalidParameter(format!("noise variance {noise_var} must be positive")));
    }
    Ok(())
}

/// One precoded stream: its estimator statistics and downlink power.
struct StreamTerm<'a> {
    stats: &'a StreamEstimator,
    rho: f64,
}

/// Per-UE, per-stream SINR of MR with the use-and-then-forget bound, where
/// every stream of every UE interferes through `ρ tr(Γ_l R_k) / tr(Γ_l)`.
fn mr_sinrs(ues: &[Vec<StreamTerm<'_>>], noise_var: f64) -> Result<Vec<Vec<f64>>> {
    let mut traces = Vec::with_capacity(ues.len());
    for streams in ues {
        let mut t = Vec::with_capacity(streams.len());
        for s in streams {
            let tr = s.stats.trace_gamma();
            if s.rho != 0.0 && !(tr > MIN_TRACE) {
                return Err(Error::DegenerateTrace(tr));
            }
            t.push(tr);
        }
        traces.push(t);
    }
    let mut out = Vec::with_capacity(ues.len());
    for (k, streams) in ues.iter().enumerate() {
        let mut sinrs = Vec::with_capacity(streams.len());
        for (s, own) in streams.iter().enumerate() {
            if own.rho == 0.0 {
                sinrs.push(0.0);
                continue;
            }
            let mut interference = noise_var;
            for (l, other) in ues.iter().enumerate() {
                for (j, term) in other.iter().enumerate() {
                    if term.rho == 0.0 {
                        continue;
                    }
                    let cross = trace_product(term.stats.gamma(), own.stats.covariance())?.re;
                    interference += term.rho * cross / traces[l][j];
                }
            }
            sinrs.push(own.rho * traces[k][s] / interference);
        }
        out.push(sinrs);
    }
    Ok(out)
}

fn se_from_sinrs(sinrs: &[Vec<f64>], prelog: f64) -> Vec<f64> {
    sinrs.iter().map(|s| prelog * s.iter().map(|x| (1.0 + x).log2()).sum::<f64>()).collect()
}

/// Closed-form SE of dual-polarized MR precoding with MMSE estimates.
pub fn closed_form_se_mr(
    estimators: &[DualEstimator],
    rhos: &[PolPair],
    noise_var: f64,
    prelog: f64,
) -> Result<SeReport> {
    check_noise(noise_var)?;
    check_prelog(prelog)?;
    if estimators.len() != rhos.len() {
        return Err(Error::DimensionMismatch("one power pair per UE".into()));
    }
    let ues: Vec<Vec<StreamTerm<'_>>> = estimators
        .iter()
        .zip(rhos)
        .map(|(e, r)| vec![StreamTerm { stats: &e.v, rho: r.v }, StreamTerm { stats: &e.h, rho: r.h }])
        .collect();
    let sinrs = mr_sinrs(&ues, noise_var)?;
    Ok(SeReport::new(se_from_sinrs(&sinrs, prelog), SeMethod::ClosedFormMr, prelog, 0))
}

/// Closed-form SE of uni-polarized MR; one stream per UE, common power.
pub fn uni_closed_form_se_mr(
    estimators: &[StreamEstimator],
    rho: f64,
    noise_var: f64,
    prelog: f64,
) -> Result<SeReport> {
    check_noise(noise_var)?;
    check_prelog(prelog)?;
    let ues: Vec<Vec<StreamTerm<'_>>> = estimators.iter().map(|e| vec![StreamTerm { stats: e, rho }]).collect();
    let sinrs = mr_sinrs(&ues, noise_var)?;
    Ok(SeReport::new(se_from_sinrs(&sinrs, prelog), SeMethod::UniClosedFormMr, prelog, 0))
}

/// Closed-form MR SE when every UE has `R_bs = β I` and no polarization
/// leakage. Each stream sees the array gain `M/2` and only co-polar
/// interference.
pub fn simplified_se_uncorrelated(
    betas: &[f64],
    pilot_powers: &[PolPair],
    rhos: &[PolPair],
    m: usize,
    tau_p: usize,
    noise_var: f64,
    prelog: f64,
) -> Result<SeReport> {
    check_prelog(prelog)?;
    if betas.len() != pilot_powers.len() || betas.len() != rhos.len() {
        return Err(Error::DimensionMismatch("betas, pilot powers and rhos must align".into()));
    }
    let half = (m / 2) as f64;
    let tau = tau_p as f64;
    let rho_v: f64 = rhos.iter().map(|r| r.v).sum();
    let rho_h: f64 = rhos.iter().map(|r| r.h).sum();
    let stream = |rho: f64, p: f64, beta: f64, total_rho: f64| {
        let signal = half * rho * p * tau * beta * beta / (p * tau * beta + noise_var);
        let interference = total_rho * beta + noise_var;
        (1.0 + signal / interference).log2()
    };
    let per_ue = betas
        .iter()
        .zip(pilot_powers.iter().zip(rhos))
        .map(|(&b, (p, r))| prelog * (stream(r.v, p.v, b, rho_v) + stream(r.h, p.h, b, rho_h)))
        .collect();
    Ok(SeReport::new(per_ue, SeMethod::Simplified, prelog, 0))
}
