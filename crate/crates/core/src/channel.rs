//! Channel realizations.
//!
//! A dual-polarized UE sees `H_k = S̃_k R^{1/2}` with the rows of `S̃_k`
//! carrying the leakage amplitudes `√(1−q)` and `√q` on alternate ports.

use num_complex::Complex64;
use rand::Rng;

use crate::correlation::{polarization_weights, CorrelationSet};
use crate::error::{Error, Result};
use crate::numerics::{sample_standard_complex_gaussian, CMatrix, CVector, HermitianFactor};

/// Channel of one dual-polarized UE: `H_k = [h_v h_h]ᴴ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPolChannel {
    pub h_v: CVector,
    pub h_h: CVector,
}

impl DualPolChannel {
    pub fn ports(&self) -> usize {
        self.h_v.len()
    }

    /// `H_k` as a `2 × M` matrix with rows `h_vᴴ` and `h_hᴴ`.
    pub fn matrix(&self) -> CMatrix {
        stack_rows(&[&self.h_v, &self.h_h])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniPolChannel {
    pub h: CVector,
}

impl UniPolChannel {
    pub fn matrix(&self) -> CMatrix {
        stack_rows(&[&self.h])
    }
}

/// Stack column vectors as conjugated rows: row `i` is `vᵢᴴ`.
pub fn stack_rows(vs: &[&CVector]) -> CMatrix {
    let m = vs.first().map_or(0, |v| v.len());
    CMatrix::from_fn(vs.len(), m, |i, j| vs[i][j].conj())
}

fn leaky_draw<R: Rng + ?Sized>(amplitudes: &[f64], rng: &mut R) -> CVector {
    let mut s = sample_standard_complex_gaussian(amplitudes.len(), rng);
    for (z, &a) in s.iter_mut().zip(amplitudes) {
        *z *= a;
    }
    s
}

/// Draw `(s̃_v, s̃_h)` for `m` ports.
pub fn sample_leaky_rows<R: Rng + ?Sized>(m: usize, q: f64, rng: &mut R) -> (CVector, CVector) {
    let (dv, dh) = polarization_weights(m, q);
    let av: Vec<f64> = dv.iter().map(|w| w.sqrt()).collect();
    let ah: Vec<f64> = dh.iter().map(|w| w.sqrt()).collect();
    let sv = leaky_draw(&av, rng);
    let sh = leaky_draw(&ah, rng);
    (sv, sh)
}

pub fn sample_dual_channel<R: Rng + ?Sized>(corr: &CorrelationSet, rng: &mut R) -> DualPolChannel {
    sample_dual_channel_with_factor(corr.sqrt_r().factor(), corr.q(), rng)
}

/// Same as [`sample_dual_channel`] with an arbitrary factor `F` of `R`
/// (`F Fᴴ = R`) in place of the Hermitian square root.
pub fn sample_dual_channel_with_factor<R: Rng + ?Sized>(factor: &CMatrix, q: f64, rng: &mut R) -> DualPolChannel {
    let (sv, sh) = sample_leaky_rows(factor.ncols(), q, rng);
    DualPolChannel { h_v: factor * sv, h_h: factor * sh }
}

pub fn sample_uni_channel<R: Rng + ?Sized>(factor: &HermitianFactor, rng: &mut R) -> UniPolChannel {
    UniPolChannel { h: factor.sample(rng) }
}

/// Minimum sample count accepted by [`empirical_xpd`].
pub const MIN_XPD_SAMPLES: usize = 1000;

/// Ratio in dB of average co-polar to cross-polar port power.
pub fn empirical_xpd(samples: &[DualPolChannel]) -> Result<f64> {
    if samples.len() < MIN_XPD_SAMPLES {
        return Err(Error::InsufficientSamples { required: MIN_XPD_SAMPLES, got: samples.len() });
    }
    let mut co = 0.0;
    let mut cross = 0.0;
    for ch in samples {
        for (i, (v, h)) in ch.h_v.iter().zip(ch.h_h.iter()).enumerate() {
            if i % 2 == 0 {
                co += v.norm_sqr();
                cross += h.norm_sqr();
            } else {
                co += h.norm_sqr();
                cross += v.norm_sqr();
            }
        }
    }
    Ok(10.0 * (co / cross).log10())
}

/// `(1/n) Σ a bᴴ` over paired vector samples.
pub fn sample_cross_covariance<'a, I>(pairs: I, dim: usize) -> CMatrix
where
    I: IntoIterator<Item = (&'a CVector, &'a CVector)>,
{
    let mut acc = CMatrix::zeros(dim, dim);
    let mut n = 0usize;
    for (a, b) in pairs {
        acc.ger(Complex64::new(1.0, 0.0), a, &b.map(|z| z.conj()), Complex64::new(1.0, 0.0));
        n += 1;
    }
    if n > 0 {
        acc /= Complex64::new(n as f64, 0.0);
    }
    acc
}
