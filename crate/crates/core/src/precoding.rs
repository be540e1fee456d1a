//! Downlink MR and ZF precoders.
//!
//! Estimates are handled as stacked matrices `Ĥ_k` whose rows are the
//! conjugated per-stream estimates, so one code path serves both the dual
//! (`2 × M`) and uni-polarized (`1 × M/2`) setups.

use num_complex::Complex64;

use crate::channel::stack_rows;
use crate::error::{Error, Result};
use crate::estimation::{ChannelEstimate, DualEstimator, StreamEstimator};
use crate::numerics::{hermitian_eigenvalues, hermitian_solve, CMatrix, CVector};
use crate::units::PolPair;

/// Traces below this cannot normalize an MR precoder.
pub const MIN_TRACE: f64 = 1e-30;
/// Largest Gram condition number accepted by ZF.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Scheme {
    #[serde(rename = "MR")]
    Mr,
    #[serde(rename = "ZF")]
    Zf,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::Mr => "MR",
            Scheme::Zf => "ZF",
        }
    }
}

/// Per-UE precoding matrices (`M × 2` dual, `M/2 × 1` uni).
#[derive(Debug, Clone)]
pub struct PrecoderSet {
    pub scheme: Scheme,
    pub matrices: Vec<CMatrix>,
}

impl PrecoderSet {
    /// `Σ_k tr(W_kᴴ W_k)`.
    pub fn total_power(&self) -> f64 {
        self.matrices.iter().map(|w| w.norm_squared()).sum()
    }
}

/// `W_k = Ĥ_kᴴ diag(√(ρ_s / tr Γ_s))`.
pub fn mr_from_rows(rows: &CMatrix, traces: &[f64], powers: &[f64]) -> Result<CMatrix> {
    if traces.len() != rows.nrows() || powers.len() != rows.nrows() {
        return Err(Error::DimensionMismatch("one trace and one power per stream".into()));
    }
    let mut w = rows.adjoint();
    for (s, (&t, &rho)) in traces.iter().zip(powers).enumerate() {
        if !(t > MIN_TRACE) {
            return Err(Error::DegenerateEstimateStatistics(t));
        }
        w.column_mut(s).scale_mut((rho / t).sqrt());
    }
    Ok(w)
}

/// MR precoder of one dual-polarized UE, normalized by the analytical traces.
pub fn mr_precoder_dual(est: &ChannelEstimate, rho: PolPair) -> Result<CMatrix> {
    let t = est.stats.traces();
    mr_from_rows(&est.matrix(), &[t.v, t.h], &[rho.v, rho.h])
}

pub fn mr_precoder_uni(hhat: &CVector, trace_gamma: f64, rho: f64) -> Result<CMatrix> {
    mr_from_rows(&stack_rows(&[hhat]), &[trace_gamma], &[rho])
}

/// Unnormalized `W_all = H_allᴴ (H_all H_allᴴ)⁻¹` for stacked estimate rows.
pub fn zf_directions(stacked: &CMatrix) -> Result<CMatrix> {
    let (streams, antennas) = stacked.shape();
    if streams > antennas {
        return Err(Error::TooManyUes { streams, antennas });
    }
    if streams == 0 {
        return Ok(CMatrix::zeros(antennas, 0));
    }
    let gram = stacked * stacked.adjoint();
    let eig = hermitian_eigenvalues(&gram);
    let max = eig.iter().cloned().fold(0.0, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::RankDeficient(condition));
    }
    Ok(hermitian_solve(&gram, stacked)?.adjoint())
}

/// ZF precoders: each column of `W_all` normalized and scaled by `√ρ`.
/// `powers[k]` lists one power per stream of UE `k`.
pub fn zf_from_rows(per_ue_rows: &[CMatrix], powers: &[Vec<f64>]) -> Result<Vec<CMatrix>> {
    if per_ue_rows.len() != powers.len() {
        return Err(Error::DimensionMismatch("one power list per UE".into()));
    }
    if per_ue_rows.is_empty() {
        return Ok(Vec::new());
    }
    let antennas = per_ue_rows[0].ncols();
    let total: usize = per_ue_rows.iter().map(|r| r.nrows()).sum();
    let mut stacked = CMatrix::zeros(total, antennas);
    let mut offset = 0;
    for rows in per_ue_rows {
        if rows.ncols() != antennas {
            return Err(Error::DimensionMismatch("estimates disagree on antenna count".into()));
        }
        stacked.rows_mut(offset, rows.nrows()).copy_from(rows);
        offset += rows.nrows();
    }
    let w_all = zf_directions(&stacked)?;
    let mut out = Vec::with_capacity(per_ue_rows.len());
    let mut offset = 0;
    for (rows, p) in per_ue_rows.iter().zip(powers) {
        let s = rows.nrows();
        if p.len() != s {
            return Err(Error::DimensionMismatch("one power per stream".into()));
        }
        let mut w = w_all.columns(offset, s).into_owned();
        for (j, &rho) in p.iter().enumerate() {
            let norm = w.column(j).norm();
            w.column_mut(j).scale_mut(rho.sqrt() / norm);
        }
        out.push(w);
        offset += s;
    }
    Ok(out)
}

pub fn zf_precoder_dual(estimates: &[ChannelEstimate], rhos: &[PolPair]) -> Result<PrecoderSet> {
    let rows: Vec<CMatrix> = estimates.iter().map(|e| e.matrix()).collect();
    let powers: Vec<Vec<f64>> = rhos.iter().map(|r| vec![r.v, r.h]).collect();
    Ok(PrecoderSet { scheme: Scheme::Zf, matrices: zf_from_rows(&rows, &powers)? })
}

pub fn zf_precoder_uni(estimates: &[CVector], rho: f64) -> Result<PrecoderSet> {
    let rows: Vec<CMatrix> = estimates.iter().map(|h| stack_rows(&[h])).collect();
    let powers = vec![vec![rho]; estimates.len()];
    Ok(PrecoderSet { scheme: Scheme::Zf, matrices: zf_from_rows(&rows, &powers)? })
}

/// Builds every UE's precoder from the current estimates `Ĥ_k`.
pub trait PrecoderFactory: Sync {
    fn scheme(&self) -> Scheme;
    fn build(&self, estimates: &[CMatrix]) -> Result<Vec<CMatrix>>;
}

/// MR with fixed per-stream traces and powers.
#[derive(Debug, Clone)]
pub struct MrFactory {
    traces: Vec<Vec<f64>>,
    powers: Vec<Vec<f64>>,
}

impl MrFactory {
    pub fn dual(estimators: &[DualEstimator], rhos: &[PolPair]) -> Self {
        MrFactory {
            traces: estimators.iter().map(|e| vec![e.v.trace_gamma(), e.h.trace_gamma()]).collect(),
            powers: rhos.iter().map(|r| vec![r.v, r.h]).collect(),
        }
    }

    pub fn uni(estimators: &[StreamEstimator], rho: f64) -> Self {
        MrFactory {
            traces: estimators.iter().map(|e| vec![e.trace_gamma()]).collect(),
            powers: vec![vec![rho]; estimators.len()],
        }
    }
}

impl PrecoderFactory for MrFactory {
    fn scheme(&self) -> Scheme {
        Scheme::Mr
    }

    fn build(&self, estimates: &[CMatrix]) -> Result<Vec<CMatrix>> {
        estimates
            .iter()
            .zip(self.traces.iter().zip(&self.powers))
            .map(|(rows, (t, p))| mr_from_rows(rows, t, p))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct ZfFactory {
    powers: Vec<Vec<f64>>,
}

impl ZfFactory {
    pub fn dual(rhos: &[PolPair]) -> Self {
        ZfFactory { powers: rhos.iter().map(|r| vec![r.v, r.h]).collect() }
    }

    pub fn uni(k: usize, rho: f64) -> Self {
        ZfFactory { powers: vec![vec![rho]; k] }
    }
}

impl PrecoderFactory for ZfFactory {
    fn scheme(&self) -> Scheme {
        Scheme::Zf
    }

    fn build(&self, estimates: &[CMatrix]) -> Result<Vec<CMatrix>> {
        zf_from_rows(estimates, &self.powers)
    }
}

/// Diagonal of `Ĥ_k W_k`.
pub fn self_gains(estimate_rows: &CMatrix, w: &CMatrix) -> Vec<Complex64> {
    let g = estimate_rows * w;
    (0..g.nrows().min(g.ncols())).map(|i| g[(i, i)]).collect()
}
