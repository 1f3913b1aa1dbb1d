//! Dense complex linear algebra used by the channel and observable code.

use nalgebra::DVector;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{modulus, re, CMatrix, Real};

pub fn identity<T: Real>(dim: usize) -> CMatrix<T> {
    CMatrix::identity(dim, dim)
}

pub fn dagger<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    m.adjoint()
}

#[inline]
pub fn mul<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    T::matmul(a, b)
}

/// `a ρ b`.
pub fn sandwich<T: Real>(a: &CMatrix<T>, rho: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    mul(&mul(a, rho), b)
}

pub fn trace<T: Real>(m: &CMatrix<T>) -> Complex<T> {
    m.diagonal().iter().fold(Complex::new(T::zero(), T::zero()), |acc, z| acc + z)
}

/// Kronecker product `a ⊗ b` (first factor is the slow index).
pub fn kron<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a.kronecker(b)
}

/// `(m + m†)/2`.
pub fn hermitian_part<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    (m + m.adjoint()) * re(T::lit(0.5))
}

/// Largest modulus of `m - m†`.
pub fn hermiticity_defect<T: Real>(m: &CMatrix<T>) -> T {
    let n = m.nrows();
    let mut worst = T::zero();
    for j in 0..n {
        for i in 0..=j {
            let d = modulus(m[(i, j)] - m[(j, i)].conj());
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

pub fn max_abs<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| {
        let a = modulus(*z);
        if a > acc {
            a
        } else {
            acc
        }
    })
}

/// Spectral norm via the largest singular value.
pub fn op_norm<T: Real>(m: &CMatrix<T>) -> T {
    if m.is_empty() {
        return T::zero();
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(T::zero(), |acc, &s| if s > acc { s } else { acc })
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues<T: Real>(m: &CMatrix<T>) -> Vec<T> {
    let mut ev: Vec<T> = hermitian_part(m).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

/// Eigen-decomposition of a Hermitian matrix: (eigenvalues, eigenvectors as columns).
pub fn hermitian_eigh<T: Real>(m: &CMatrix<T>) -> (Vec<T>, CMatrix<T>) {
    let eig = hermitian_part(m).symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Trace norm of a Hermitian matrix (sum of |eigenvalues|).
pub fn trace_norm_hermitian<T: Real>(m: &CMatrix<T>) -> T {
    hermitian_eigenvalues(m).into_iter().fold(T::zero(), |acc, x| acc + x.abs())
}

/// Trace norm of a Hermitian matrix with cheap Frobenius bounds short-circuiting
/// the eigen-decomposition when the comparison with `tol` is already decided.
///
/// Returns `(below_tol, value_or_bound)`.
pub fn trace_norm_below<T: Real>(m: &CMatrix<T>, tol: T) -> (bool, T) {
    let frob = m.norm();
    if frob >= tol {
        return (false, frob);
    }
    let bound = frob * T::from_count(m.nrows()).sqrt();
    if bound < tol {
        return (true, bound);
    }
    let exact = trace_norm_hermitian(m);
    (exact < tol, exact)
}

/// Partial trace over the leading factor of dimension `dim_a` in `A ⊗ B`.
pub fn partial_trace_first<T: Real>(m: &CMatrix<T>, dim_a: usize) -> CMatrix<T> {
    let dim_b = m.nrows() / dim_a;
    let mut out = CMatrix::zeros(dim_b, dim_b);
    for k in 0..dim_a {
        out += m.view((k * dim_b, k * dim_b), (dim_b, dim_b));
    }
    out
}

/// Partial trace over the trailing factor of dimension `dim_b` in `A ⊗ B`.
pub fn partial_trace_last<T: Real>(m: &CMatrix<T>, dim_b: usize) -> CMatrix<T> {
    let dim_a = m.nrows() / dim_b;
    CMatrix::from_fn(dim_a, dim_a, |i, j| {
        (0..dim_b).fold(Complex::new(T::zero(), T::zero()), |acc, k| acc + m[(i * dim_b + k, j * dim_b + k)])
    })
}

/// Block `(a, b)` of size `dim_b × dim_b` of an operator on `A ⊗ B`, i.e. `⟨a|M|b⟩_A`.
pub fn block<T: Real>(m: &CMatrix<T>, a: usize, b: usize, dim_b: usize) -> CMatrix<T> {
    m.view((a * dim_b, b * dim_b), (dim_b, dim_b)).into_owned()
}

/// `⟨v|M|v⟩` for a column vector `v`.
pub fn expectation_vec<T: Real>(m: &CMatrix<T>, v: &DVector<Complex<T>>) -> Complex<T> {
    (v.adjoint() * m * v)[(0, 0)]
}

fn one_norm<T: Real>(m: &CMatrix<T>) -> T {
    m.column_iter()
        .map(|c| c.iter().fold(T::zero(), |acc, z| acc + modulus(*z)))
        .fold(T::zero(), |acc, s| if s > acc { s } else { acc })
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub fn expm<T: Real>(a: &CMatrix<T>) -> Result<CMatrix<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
    }
    let norm = one_norm(a).as_f64();
    if !norm.is_finite() {
        return Err(Error::Numerical { step: 0, reason: "non-finite generator in expm".into() });
    }
    const THETA13: f64 = 5.371920351148152;
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let scaled = a * re(T::lit(0.5f64.powi(s)));

    let b = |k: usize| re(T::lit(PADE13[k]));
    let id = identity::<T>(n);
    let a2 = mul(&scaled, &scaled);
    let a4 = mul(&a2, &a2);
    let a6 = mul(&a4, &a2);

    let u_inner = &a6 * b(13) + &a4 * b(11) + &a2 * b(9);
    let u_inner = mul(&a6, &u_inner) + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &id * b(1);
    let u = mul(&scaled, &u_inner);
    let v_inner = &a6 * b(12) + &a4 * b(10) + &a2 * b(8);
    let v = mul(&a6, &v_inner) + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &id * b(0);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or_else(|| Error::Numerical { step: 0, reason: "singular Padé denominator".into() })?;
    for _ in 0..s {
        r = mul(&r, &r);
    }
    Ok(r)
}
