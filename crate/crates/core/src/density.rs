//! Density matrices on arbitrary tensor-factor spaces.

use std::ops::Deref;

use nalgebra::DVector;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::{self, hermitian_part};
use crate::scalar::{re, CMatrix, Real};

/// Hermiticity tolerance on the largest entry of `ρ − ρ†`.
pub const TOL_HERM: f64 = 1e-10;
/// Trace tolerance after renormalization.
pub const TOL_TRACE: f64 = 1e-8;
/// Most negative eigenvalue tolerated.
pub const TOL_PSD: f64 = 1e-8;
/// Number of top Fock levels inspected by the truncation witness.
pub const TAIL_LEVELS: usize = 5;
/// Largest population allowed in the top `TAIL_LEVELS` levels.
pub const TAIL_MASS_LIMIT: f64 = 1e-6;

/// Hermitian, positive semi-definite, unit-trace matrix.
///
/// Construction through [`DensityMatrix::new`] validates all three
/// properties; the `*_unchecked` constructors are used inside channel
/// pipelines where the properties hold by construction up to round-off.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T: Real> {
    mat: CMatrix<T>,
}

impl<T: Real> Deref for DensityMatrix<T> {
    type Target = CMatrix<T>;
    fn deref(&self) -> &CMatrix<T> {
        &self.mat
    }
}

impl<T: Real> DensityMatrix<T> {
    pub fn new(mat: CMatrix<T>) -> Result<Self> {
        validate(&mat)?;
        Ok(Self { mat: hermitian_part(&mat) })
    }

    /// Wraps `mat` after symmetrizing it, without the PSD/trace checks.
    pub fn new_unchecked(mat: CMatrix<T>) -> Self {
        Self { mat: hermitian_part(&mat) }
    }

    pub fn from_ket(psi: &DVector<Complex<T>>) -> Result<Self> {
        let norm = psi.norm();
        if !(norm > T::zero()) {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let v = psi / re(norm);
        Ok(Self { mat: &v * v.adjoint() })
    }

    /// Fock state `|n⟩⟨n|` in a space of `dim` levels.
    pub fn fock(n: usize, dim: usize) -> Result<Self> {
        if n >= dim {
            return Err(Error::DimensionMismatch { expected: dim, got: n + 1 });
        }
        let mut m = CMatrix::zeros(dim, dim);
        m[(n, n)] = re(T::one());
        Ok(Self { mat: m })
    }

    pub fn vacuum(dim: usize) -> Self {
        Self::fock(0, dim).expect("vacuum fits any non-empty space")
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.mat
    }

    pub fn trace(&self) -> T {
        linalg::trace(&self.mat).re
    }

    /// Divides by the trace so that `tr ρ = 1`.
    pub fn renormalized(mut self) -> Self {
        let t = self.trace();
        if t > T::zero() {
            self.mat /= re(t);
        }
        self
    }

    pub fn purity(&self) -> T {
        // tr ρ² = Σ |ρ_ij|² for Hermitian ρ
        self.mat.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
    }

    pub fn min_eigenvalue(&self) -> T {
        linalg::hermitian_eigenvalues(&self.mat).first().copied().unwrap_or_else(T::zero)
    }

    /// `tr(ρ O)`.
    pub fn expect(&self, op: &CMatrix<T>) -> Complex<T> {
        // tr(ρO) = Σ_ij ρ_ij O_ji, avoids forming the product
        let n = self.dim();
        let mut acc = Complex::new(T::zero(), T::zero());
        for j in 0..n {
            for i in 0..n {
                acc += self.mat[(i, j)] * op[(j, i)];
            }
        }
        acc
    }

    /// Population of the top `TAIL_LEVELS` levels of the last tensor factor
    /// (of dimension `osc_dim`).
    pub fn tail_mass(&self, osc_dim: usize) -> T {
        let lead = self.dim() / osc_dim;
        let first = osc_dim.saturating_sub(TAIL_LEVELS);
        let mut mass = T::zero();
        for q in 0..lead {
            for n in first..osc_dim {
                let k = q * osc_dim + n;
                mass += self.mat[(k, k)].re;
            }
        }
        mass
    }

    /// Trace-norm distance `‖ρ − σ‖₁`.
    pub fn trace_distance(&self, other: &Self) -> T {
        linalg::trace_norm_hermitian(&(&self.mat - &other.mat))
    }

    /// Fidelity with a pure state `⟨ψ|ρ|ψ⟩`.
    pub fn overlap(&self, psi: &DVector<Complex<T>>) -> T {
        linalg::expectation_vec(&self.mat, psi).re
    }

    /// Reduced state on the trailing factor of dimension `dim_last`.
    pub fn trace_out_first(&self, dim_first: usize) -> Self {
        Self { mat: linalg::partial_trace_first(&self.mat, dim_first) }
    }

    /// `ρ_A ⊗ ρ_B`.
    pub fn tensor(&self, other: &Self) -> Self {
        Self { mat: linalg::kron(&self.mat, &other.mat) }
    }

    /// Conjugation `U ρ U†`.
    pub fn conjugate(&self, u: &CMatrix<T>) -> Self {
        Self::new_unchecked(linalg::sandwich(u, &self.mat, &u.adjoint()))
    }

    pub fn validate(&self) -> Result<()> {
        validate(&self.mat)
    }
}

fn validate<T: Real>(mat: &CMatrix<T>) -> Result<()> {
    if mat.nrows() != mat.ncols() || mat.is_empty() {
        return Err(Error::InvalidState(format!("shape {}x{}", mat.nrows(), mat.ncols())));
    }
    if mat.iter().any(|z| !(z.re.as_f64().is_finite() && z.im.as_f64().is_finite())) {
        return Err(Error::InvalidState("non-finite entry".into()));
    }
    let herm = linalg::hermiticity_defect(mat).as_f64();
    if herm > TOL_HERM {
        return Err(Error::InvalidState(format!("not Hermitian (defect {herm:.3e})")));
    }
    let tr = linalg::trace(mat).re.as_f64();
    if (tr - 1.0).abs() > TOL_TRACE {
        return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
    }
    let min = linalg::hermitian_eigenvalues(mat).first().copied().unwrap_or_else(T::zero).as_f64();
    if min < -TOL_PSD {
        return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cplx;

    #[test]
    fn validation_rejects_bad_states() {
        let mut m = CMatrix::<f64>::zeros(2, 2);
        m[(0, 0)] = cplx(0.5, 0.0);
        assert!(DensityMatrix::new(m.clone()).is_err());
        m[(1, 1)] = cplx(0.5, 0.0);
        assert!(DensityMatrix::new(m.clone()).is_ok());
        m[(0, 1)] = cplx(0.6, 0.0);
        m[(1, 0)] = cplx(0.6, 0.0);
        assert!(matches!(DensityMatrix::new(m.clone()), Err(Error::InvalidState(_))));
        m[(0, 1)] = cplx(0.1, 0.1);
        m[(1, 0)] = cplx(0.1, 0.1);
        assert!(DensityMatrix::new(m).is_err());
    }

    #[test]
    fn tail_mass_counts_top_levels() {
        let rho = DensityMatrix::<f64>::fock(7, 10).unwrap();
        assert_eq!(rho.tail_mass(10), 1.0);
        let rho = DensityMatrix::<f64>::fock(4, 10).unwrap();
        assert_eq!(rho.tail_mass(10), 0.0);
        // joint qubit ⊗ oscillator: both qubit blocks are counted
        let q = DensityMatrix::<f64>::fock(1, 2).unwrap();
        let joint = q.tensor(&DensityMatrix::fock(9, 10).unwrap());
        assert_eq!(joint.tail_mass(10), 1.0);
    }

    #[test]
    fn expectation_matches_trace_product() {
        let psi = DVector::from_vec(vec![cplx(0.6, 0.0), cplx(0.0, 0.8)]);
        let rho = DensityMatrix::<f64>::from_ket(&psi).unwrap();
        let op = CMatrix::from_fn(2, 2, |i, j| cplx(i as f64 + 1.0, j as f64));
        let want = linalg::trace(&(rho.matrix() * &op));
        assert!((rho.expect(&op) - want).norm() < 1e-14);
        assert!((rho.purity() - 1.0).abs() < 1e-14);
    }
}
