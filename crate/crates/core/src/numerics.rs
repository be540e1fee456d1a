//! Complex Hermitian linear algebra shared by the channel, estimation and
//! spectral efficiency code.
//!
//! All tolerances are relative to a norm of the input. Pathloss values span
//! many orders of magnitude, so absolute thresholds would be meaningless.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative asymmetry accepted by [`hermitian_psd_sqrt`].
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Negative eigenvalues above `-PSD_FLOOR * ‖A‖₂` are clamped to zero.
pub const PSD_FLOOR: f64 = 1e-10;
/// Cholesky pivots below `SINGULAR_TOL * ‖A‖` are treated as singular.
pub const SINGULAR_TOL: f64 = 1e-14;

/// A Hermitian PSD matrix together with its Hermitian square root.
#[derive(Debug, Clone)]
pub struct HermitianFactor {
    base: CMatrix,
    factor: CMatrix,
    eigen_floor: f64,
}

impl HermitianFactor {
    pub fn base(&self) -> &CMatrix {
        &self.base
    }

    pub fn factor(&self) -> &CMatrix {
        &self.factor
    }

    /// Absolute eigenvalue floor used when the factor was computed.
    pub fn eigen_floor(&self) -> f64 {
        self.eigen_floor
    }

    pub fn dim(&self) -> usize {
        self.base.nrows()
    }

    /// Draw `factor · z` with `z` standard complex Gaussian, i.e. a sample of
    /// `CN(0, base)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CVector {
        let z = sample_standard_complex_gaussian(self.dim(), rng);
        &self.factor * z
    }

    /// Kronecker product `factor ⊗ I_n`, which is the Hermitian square root of
    /// `base ⊗ I_n`.
    pub fn kron_identity(&self, n: usize) -> HermitianFactor {
        let eye = CMatrix::identity(n, n);
        HermitianFactor {
            base: kron(&self.base, &eye),
            factor: kron(&self.factor, &eye),
            eigen_floor: self.eigen_floor,
        }
    }
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `‖A − Aᴴ‖_F / ‖A‖_F`, zero for the zero matrix.
pub fn relative_asymmetry(a: &CMatrix) -> f64 {
    let norm = frobenius(a);
    if norm == 0.0 {
        return 0.0;
    }
    frobenius(&(a - a.adjoint())) / norm
}

/// `(A + Aᴴ) / 2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

fn ensure_square(a: &CMatrix, what: &str) -> Result<()> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "{what} must be square and nonempty, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Eigendecomposition `A = U Λ Uᴴ` of a Hermitian PSD matrix. Eigenvalues in
/// `[-1e-10·‖A‖₂, 0)` are clamped to zero.
#[derive(Debug, Clone)]
pub struct PsdSpectrum {
    vectors: CMatrix,
    values: Vec<f64>,
    floor: f64,
}

pub fn psd_spectrum(a: &CMatrix) -> Result<PsdSpectrum> {
    ensure_square(a, "input")?;
    let asymmetry = relative_asymmetry(a);
    if asymmetry > HERMITIAN_TOL {
        return Err(Error::NotHermitian { asymmetry });
    }
    let eig = SymmetricEigen::new(hermitian_part(a));
    let spectral = eig.eigenvalues.iter().fold(0.0_f64, |m, &l| m.max(l.abs()));
    let floor = PSD_FLOOR * spectral;
    let min_eigenvalue = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eigenvalue < -floor {
        return Err(Error::NotPsd { min_eigenvalue, floor });
    }
    Ok(PsdSpectrum {
        vectors: eig.eigenvectors,
        values: eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect(),
        floor,
    })
}

impl PsdSpectrum {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> &CMatrix {
        &self.vectors
    }

    /// `U f(Λ) Uᴴ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(f(lambda));
        }
        hermitian_part(&(&scaled * self.vectors.adjoint()))
    }

    /// `U f(Λ) Uᴴ` together with its Hermitian square root; `f` must be
    /// nonnegative.
    pub fn factor(&self, f: impl Fn(f64) -> f64) -> HermitianFactor {
        let spectral = self.values.iter().map(|&l| f(l).abs()).fold(0.0, f64::max);
        HermitianFactor {
            base: self.map(&f),
            factor: self.map(|l| f(l).max(0.0).sqrt()),
            eigen_floor: PSD_FLOOR * spectral,
        }
    }
}

/// Unique Hermitian PSD square root `B = U √Λ Uᴴ` of a Hermitian PSD matrix.
///
/// Eigenvalues in `[-1e-10·‖A‖₂, 0)` are clamped to zero.
pub fn hermitian_psd_sqrt(a: &CMatrix) -> Result<HermitianFactor> {
    let spectrum = psd_spectrum(a)?;
    Ok(HermitianFactor { base: hermitian_part(a), factor: spectrum.map(f64::sqrt), eigen_floor: spectrum.floor })
}

/// Solve `A X = B` for Hermitian positive definite `A` via Cholesky.
pub fn hermitian_solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    ensure_square(a, "system matrix")?;
    if b.nrows() != a.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "system is {}x{} but right-hand side has {} rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    let scale = frobenius(a);
    if scale == 0.0 {
        return Err(Error::Singular);
    }
    let chol = Cholesky::new(hermitian_part(a)).ok_or(Error::Singular)?;
    let l = chol.l_dirty();
    let min_pivot = (0..l.nrows()).map(|i| l[(i, i)].re).fold(f64::INFINITY, f64::min);
    if min_pivot * min_pivot < SINGULAR_TOL * scale {
        return Err(Error::Singular);
    }
    Ok(chol.solve(b))
}

/// `tr(A·B)` computed as `Σ_{i,j} A_ij B_ji` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Result<Complex64> {
    if a.nrows() != b.ncols() || a.ncols() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "trace of ({}x{})·({}x{})",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    Ok(acc)
}

/// Real trace of a (Hermitian) matrix.
pub fn real_trace(a: &CMatrix) -> f64 {
    a.diagonal().iter().map(|z| z.re).sum()
}

/// `n` i.i.d. `CN(0, 1)` samples: real and imaginary parts independent
/// `N(0, 1/2)`.
pub fn sample_standard_complex_gaussian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVector::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * s, im * s)
    })
}

/// Eigenvalues of a Hermitian matrix (ascending order not guaranteed).
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    hermitian_part(a).symmetric_eigenvalues().iter().cloned().collect()
}
