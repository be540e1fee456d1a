//! Spatial correlation of the BS array and its split into V- and
//! H-polarized covariances.
//!
//! Ports are interleaved as `(1V, 1H, 2V, 2H, …)` along the `M`-dimensional
//! axis everywhere in the crate.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{hermitian_psd_sqrt, kron, CMatrix, CVector, HermitianFactor};

/// Channel cross-polar discrimination expressed as the leakage fraction `q`,
/// with `XPD = (1 − q) / q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XpdSpec {
    pub xpd_db: f64,
    pub q: f64,
}

pub fn xpd_from_db(xpd_db: f64) -> XpdSpec {
    let q = if xpd_db == f64::INFINITY { 0.0 } else { 1.0 / (1.0 + 10f64.powf(xpd_db / 10.0)) };
    XpdSpec { xpd_db, q }
}

impl XpdSpec {
    pub fn from_q(q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidParameter(format!("leakage fraction {q} outside [0, 1]")));
        }
        let xpd_db = if q == 0.0 { f64::INFINITY } else { 10.0 * ((1.0 - q) / q).log10() };
        Ok(XpdSpec { xpd_db, q })
    }
}

/// Gaussian local scattering covariance of a half-wavelength ULA with
/// `half_m` elements, averaged over the given cluster angles.
///
/// `[R]_{s,m} = (β/N) Σ_n exp(jπ(s−m) sin φ_n) exp(−σ²/2 (π(s−m) cos φ_n)²)`.
pub fn local_scattering_cov(beta: f64, cluster_angles: &[f64], asd: f64, half_m: usize) -> Result<CMatrix> {
    if half_m == 0 || cluster_angles.is_empty() {
        return Err(Error::InvalidParameter("need at least one antenna and one cluster".into()));
    }
    if !(asd >= 0.0) || !(beta >= 0.0) {
        return Err(Error::InvalidParameter(format!("beta {beta} and ASD {asd} must be nonnegative")));
    }
    let n = cluster_angles.len() as f64;
    let pi = std::f64::consts::PI;
    // Toeplitz: only the lag matters.
    let first_col: Vec<Complex64> = (0..half_m)
        .map(|lag| {
            let d = lag as f64;
            let sum: Complex64 = cluster_angles
                .iter()
                .map(|&phi| {
                    let phase = Complex64::from_polar(1.0, pi * d * phi.sin());
                    let spread = (-(asd * asd) / 2.0 * (pi * d * phi.cos()).powi(2)).exp();
                    phase * spread
                })
                .sum();
            sum * (beta / n)
        })
        .collect();
    Ok(CMatrix::from_fn(half_m, half_m, |s, m| {
        if s >= m {
            first_col[s - m]
        } else {
            first_col[m - s].conj()
        }
    }))
}

/// Diagonals of `D_v = I ⊗ diag(1−q, q)` and `D_h = I ⊗ diag(q, 1−q)`.
pub fn polarization_weights(m: usize, q: f64) -> (Vec<f64>, Vec<f64>) {
    let dv = (0..m).map(|i| if i % 2 == 0 { 1.0 - q } else { q }).collect();
    let dh = (0..m).map(|i| if i % 2 == 0 { q } else { 1.0 - q }).collect();
    (dv, dh)
}

/// Per-UE covariance set.
#[derive(Debug, Clone)]
pub struct CorrelationSet {
    r_bs: CMatrix,
    q: f64,
    r: CMatrix,
    r_v: CMatrix,
    r_h: CMatrix,
    sqrt_r_bs: HermitianFactor,
    sqrt_r: HermitianFactor,
}

/// Build `R = R_bs ⊗ I₂` and its polarization split.
///
/// With the Hermitian square root, `R^{1/2} D (R^{1/2})ᴴ` reduces to
/// `R_bs ⊗ diag(·)`, which is what is stored; [`CorrelationSet::definitional_split`]
/// recomputes the long form.
pub fn build_correlation_set(r_bs: &CMatrix, q: f64) -> Result<CorrelationSet> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!("leakage fraction {q} outside [0, 1]")));
    }
    let sqrt_r_bs = hermitian_psd_sqrt(r_bs)?;
    let r_bs = sqrt_r_bs.base().clone();
    let sqrt_r = sqrt_r_bs.kron_identity(2);
    let diag2 = |a: f64, b: f64| {
        CMatrix::from_diagonal(&CVector::from_vec(vec![Complex64::new(a, 0.0), Complex64::new(b, 0.0)]))
    };
    let r = kron(&r_bs, &CMatrix::identity(2, 2));
    let r_v = kron(&r_bs, &diag2(1.0 - q, q));
    let r_h = kron(&r_bs, &diag2(q, 1.0 - q));
    Ok(CorrelationSet { r_bs, q, r, r_v, r_h, sqrt_r_bs, sqrt_r })
}

impl CorrelationSet {
    pub fn r_bs(&self) -> &CMatrix {
        &self.r_bs
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `R = R_bs ⊗ I₂`.
    pub fn r(&self) -> &CMatrix {
        &self.r
    }

    pub fn r_v(&self) -> &CMatrix {
        &self.r_v
    }

    pub fn r_h(&self) -> &CMatrix {
        &self.r_h
    }

    pub fn sqrt_r(&self) -> &HermitianFactor {
        &self.sqrt_r
    }

    pub fn sqrt_r_bs(&self) -> &HermitianFactor {
        &self.sqrt_r_bs
    }

    /// Number of BS ports `M`.
    pub fn ports(&self) -> usize {
        self.r.nrows()
    }

    /// Block covariance `blockdiag(R_v, R_h)` of `vec(H_kᴴ)`.
    pub fn block_covariance(&self) -> CMatrix {
        let m = self.ports();
        let mut out = CMatrix::zeros(2 * m, 2 * m);
        out.view_mut((0, 0), (m, m)).copy_from(&self.r_v);
        out.view_mut((m, m), (m, m)).copy_from(&self.r_h);
        out
    }

    /// `(R^{1/2} D_v R^{1/2}ᴴ, R^{1/2} D_h R^{1/2}ᴴ)` evaluated literally.
    pub fn definitional_split(&self) -> (CMatrix, CMatrix) {
        split_with_factor(self.sqrt_r.factor(), self.q)
    }
}

/// `(F D_v Fᴴ, F D_h Fᴴ)` for an arbitrary `M × M` factor `F`.
pub fn split_with_factor(factor: &CMatrix, q: f64) -> (CMatrix, CMatrix) {
    let (dv, dh) = polarization_weights(factor.ncols(), q);
    let weighted = |d: &[f64]| {
        let mut fd = factor.clone();
        for (j, &w) in d.iter().enumerate() {
            fd.column_mut(j).scale_mut(w);
        }
        fd * factor.adjoint()
    };
    (weighted(&dv), weighted(&dh))
}
