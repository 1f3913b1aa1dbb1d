//! Single-mode operators on the truncated Fock space `|0⟩..|n_max⟩`.
//!
//! Operators are plain dense complex matrices of dimension `n_max + 1`.
//! Truncation-sensitive constructions (`displacement`, `squeeze`) refuse
//! parameters whose states would reach the top of the basis.

use num_complex::Complex;

use crate::error::{invalid, Error, Result};
use crate::linalg::expm;
use crate::scalar::{cplx, modulus, polar, re, CMatrix, Real};

/// Operator on the truncated oscillator space.
pub type FockOperator<T> = CMatrix<T>;

/// Displaced squeezed vacuum `D(α) S(r e^{iφ_r}) |0⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezeTarget<T> {
    pub alpha: Complex<T>,
    /// Squeeze magnitude; negative values squeeze the orthogonal quadrature.
    pub r: T,
    /// Squeeze direction in `[0, 2π)`.
    pub phi_r: T,
}

/// Squeeze magnitudes beyond this cannot be represented faithfully at desk-scale truncation.
pub const R_CAP: f64 = 5.0;

impl<T: Real> SqueezeTarget<T> {
    pub fn new(alpha: Complex<T>, r: T, phi_r: T) -> Result<Self> {
        if !(r.abs() < T::lit(R_CAP)) {
            return Err(invalid("r", format!("|r| must be < {R_CAP}, got {}", r.as_f64())));
        }
        Ok(Self { alpha, r, phi_r: wrap_two_pi(phi_r) })
    }

    pub fn vacuum() -> Self {
        Self { alpha: cplx(T::zero(), T::zero()), r: T::zero(), phi_r: T::zero() }
    }

    /// `ζ = r e^{iφ_r}`.
    pub fn zeta(&self) -> Complex<T> {
        polar(self.r, self.phi_r)
    }

    /// State vector of the target in a basis of `n_max + 1` levels.
    pub fn ket(&self, n_max: usize) -> Result<nalgebra::DVector<Complex<T>>> {
        let d = displacement(self.alpha, n_max)?;
        let s = squeeze(self.zeta(), n_max)?;
        let ds = T::matmul(&d, &s);
        Ok(ds.column(0).into_owned())
    }
}

pub(crate) fn wrap_two_pi<T: Real>(x: T) -> T {
    let tau = T::two_pi();
    let mut y = x % tau;
    if y < T::zero() {
        y += tau;
    }
    if y >= tau {
        y -= tau;
    }
    y
}

fn check_levels(n_max: usize, min: usize) -> Result<()> {
    if n_max < min {
        return Err(invalid("n_max", format!("must be >= {min}, got {n_max}")));
    }
    Ok(())
}

/// Annihilation operator, `⟨n−1|a|n⟩ = √n`.
pub fn annihilation<T: Real>(n_max: usize) -> Result<FockOperator<T>> {
    check_levels(n_max, 1)?;
    let dim = n_max + 1;
    let mut a = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = re(T::from_count(n).sqrt());
    }
    Ok(a)
}

pub fn creation<T: Real>(n_max: usize) -> Result<FockOperator<T>> {
    Ok(annihilation::<T>(n_max)?.adjoint())
}

/// `N = a†a`, built directly as `diag(0..n_max)`.
pub fn number<T: Real>(n_max: usize) -> FockOperator<T> {
    diagonal(n_max, |n| re(T::from_count(n)))
}

/// Parity `e^{iπN}`, diagonal `(−1)^n`.
pub fn parity<T: Real>(n_max: usize) -> FockOperator<T> {
    diagonal(n_max, |n| re(if n % 2 == 0 { T::one() } else { -T::one() }))
}

/// Phase rotation `e^{iφN}`.
pub fn rotation<T: Real>(phi: T, n_max: usize) -> FockOperator<T> {
    diagonal(n_max, |n| polar(T::one(), phi * T::from_count(n)))
}

fn diagonal<T: Real>(n_max: usize, f: impl Fn(usize) -> Complex<T>) -> FockOperator<T> {
    let dim = n_max + 1;
    let mut m = CMatrix::zeros(dim, dim);
    for n in 0..dim {
        m[(n, n)] = f(n);
    }
    m
}

/// Quadrature `X_φ = (a e^{iφ} + a† e^{−iφ}) / 2`.
pub fn quadrature<T: Real>(phi: T, n_max: usize) -> Result<FockOperator<T>> {
    let a = annihilation::<T>(n_max)?;
    let half = T::lit(0.5);
    let ph = polar(half, phi);
    Ok(&a * ph + a.adjoint() * ph.conj())
}

/// Building blocks of the resonant qubit–oscillator propagator at angle `θ`.
///
/// `sin θ_N / √N` is never formed on its own; only the composites `r` and `l`
/// appear, which are regular at `n = 0`.
#[derive(Debug, Clone)]
pub struct ResonantBlocks<T: Real> {
    /// `cos θ_N`, entries `cos(θ√n)`.
    pub c: FockOperator<T>,
    /// `cos θ_{N+I}`, entries `cos(θ√(n+1))`.
    pub c_plus: FockOperator<T>,
    /// `(sin θ_N / √N) a†`, `⟨n+1|R|n⟩ = sin(θ√(n+1))`.
    pub r: FockOperator<T>,
    /// `a (sin θ_N / √N)`, `⟨n−1|L|n⟩ = sin(θ√n)`.
    pub l: FockOperator<T>,
}

impl<T: Real> ResonantBlocks<T> {
    pub fn new(theta: T, n_max: usize) -> Result<Self> {
        check_levels(n_max, 1)?;
        let dim = n_max + 1;
        let angle = |n: usize| theta * T::from_count(n).sqrt();
        let c = diagonal(n_max, |n| re(angle(n).cos()));
        let c_plus = diagonal(n_max, |n| re(angle(n + 1).cos()));
        let mut r = CMatrix::zeros(dim, dim);
        let mut l = CMatrix::zeros(dim, dim);
        for n in 0..n_max {
            let s = re(angle(n + 1).sin());
            r[(n + 1, n)] = s;
            l[(n, n + 1)] = s;
        }
        Ok(Self { c, c_plus, r, l })
    }

    pub fn dim(&self) -> usize {
        self.c.nrows()
    }
}

/// Displacement `D(α) = exp(α a† − α* a)`; requires `|α|² ≤ n_max / 4`.
pub fn displacement<T: Real>(alpha: Complex<T>, n_max: usize) -> Result<FockOperator<T>> {
    check_levels(n_max, 1)?;
    let need = (T::lit(4.0) * alpha.norm_sqr()).as_f64().ceil() as usize;
    if need > n_max {
        return Err(Error::Truncation { n_max, required: need });
    }
    let a = annihilation::<T>(n_max)?;
    let gen = a.adjoint() * alpha - &a * alpha.conj();
    expm(&gen)
}

/// Squeeze `S(ζ) = exp(½(ζ* a² − ζ a†²))`; requires `e^{2|ζ|} ≤ n_max / 4`.
pub fn squeeze<T: Real>(zeta: Complex<T>, n_max: usize) -> Result<FockOperator<T>> {
    check_levels(n_max, 1)?;
    let need = (T::lit(4.0) * (T::lit(2.0) * modulus(zeta)).exp()).as_f64().ceil() as usize;
    if need > n_max {
        return Err(Error::Truncation { n_max, required: need });
    }
    let a = annihilation::<T>(n_max)?;
    let a2 = T::matmul(&a, &a);
    let half = T::lit(0.5);
    let gen = (&a2 * zeta.conj() - a2.adjoint() * zeta) * re(half);
    expm(&gen)
}

/// Exact Fock matrix elements `⟨m|D(β)|n⟩` for `m, n ≤ n_max`, without truncating
/// the underlying infinite-dimensional operator.
///
/// Uses the coherent-state column and the ladder recurrences
/// `√(n+1)⟨m|D|n+1⟩ = √m⟨m−1|D|n⟩ − β*⟨m|D|n⟩`.
pub fn displacement_elements<T: Real>(beta: Complex<T>, n_max: usize) -> FockOperator<T> {
    let dim = n_max + 1;
    let mut d = CMatrix::zeros(dim, dim);
    let mut amp = re((-T::lit(0.5) * beta.norm_sqr()).exp());
    for m in 0..dim {
        d[(m, 0)] = amp;
        amp = amp * beta / re(T::from_count(m + 1).sqrt());
    }
    for n in 0..n_max {
        let inv = T::one() / T::from_count(n + 1).sqrt();
        for m in 0..dim {
            let down = if m > 0 { d[(m - 1, n)] * re(T::from_count(m).sqrt()) } else { re(T::zero()) };
            d[(m, n + 1)] = (down - beta.conj() * d[(m, n)]) * re(inv);
        }
    }
    d
}
