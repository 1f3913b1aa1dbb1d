//! Quadrature statistics, squeezing in dB, fidelities and Wigner grids.

use std::fmt::Write as _;

use nalgebra::Matrix2;
use rayon::prelude::*;

use crate::density::DensityMatrix;
use crate::error::{invalid, Error, Result};
use crate::fock::{displacement_elements, quadrature, SqueezeTarget};
use crate::linalg::mul;
use crate::scalar::{cplx, CMatrix, Real};

/// `−20 / ln 10`, the dB weight applied to `ln(2ΔX)`.
pub const DB_WEIGHT: f64 = -8.685889638065036;

/// Squeezing in dB for a minimal quadrature spread `delta_min`.
pub fn r_eff_db(delta_min: f64) -> f64 {
    DB_WEIGHT * (2.0 * delta_min).ln()
}

/// First and second quadrature moments of an oscillator state.
///
/// `X_φ = cos φ X_0 + sin φ X_{π/2}`, so the variance of any quadrature is
/// the quadratic form of `var_matrix` on `(cos φ, sin φ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureStats {
    pub mean_x0: f64,
    pub mean_xpi2: f64,
    /// Symmetrized central second moments of `(X_0, X_{π/2})`.
    pub var_matrix: [[f64; 2]; 2],
    pub delta_min: f64,
    pub delta_max: f64,
    /// Direction of the minimal spread, in `[0, π)`.
    pub phi_min: f64,
    pub r_eff_db: f64,
    pub purity: f64,
    pub uncertainty_product: f64,
}

impl QuadratureStats {
    /// `ΔX_φ` for an arbitrary direction.
    pub fn delta_at(&self, phi: f64) -> f64 {
        let (s, c) = phi.sin_cos();
        let v = &self.var_matrix;
        (c * c * v[0][0] + 2.0 * s * c * v[0][1] + s * s * v[1][1]).max(0.0).sqrt()
    }

    /// `⟨X_φ⟩` for an arbitrary direction.
    pub fn mean_at(&self, phi: f64) -> f64 {
        phi.cos() * self.mean_x0 + phi.sin() * self.mean_xpi2
    }
}

/// Precomputed quadrature operators for repeated measurements at one truncation.
#[derive(Debug, Clone)]
pub struct QuadratureProbe<T: Real> {
    x0: CMatrix<T>,
    x1: CMatrix<T>,
    x0x0: CMatrix<T>,
    x1x1: CMatrix<T>,
    sym: CMatrix<T>,
}

impl<T: Real> QuadratureProbe<T> {
    pub fn new(n_max: usize) -> Result<Self> {
        let x0 = quadrature(T::zero(), n_max)?;
        let x1 = quadrature(T::frac_pi_2(), n_max)?;
        let x0x0 = mul(&x0, &x0);
        let x1x1 = mul(&x1, &x1);
        let p = mul(&x0, &x1);
        let sym = (&p + p.adjoint()) * cplx(T::lit(0.5), T::zero());
        Ok(Self { x0, x1, x0x0, x1x1, sym })
    }

    pub fn dim(&self) -> usize {
        self.x0.nrows()
    }

    pub fn measure(&self, rho: &DensityMatrix<T>) -> Result<QuadratureStats> {
        if rho.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: rho.dim() });
        }
        let ev = |op: &CMatrix<T>| rho.expect(op).re.as_f64();
        let tr = rho.trace().as_f64();
        let m0 = ev(&self.x0) / tr;
        let m1 = ev(&self.x1) / tr;
        let v00 = ev(&self.x0x0) / tr - m0 * m0;
        let v11 = ev(&self.x1x1) / tr - m1 * m1;
        let v01 = ev(&self.sym) / tr - m0 * m1;
        let purity = rho.purity().as_f64() / (tr * tr);
        Ok(stats_from_moments(m0, m1, [[v00, v01], [v01, v11]], purity))
    }
}

fn stats_from_moments(m0: f64, m1: f64, v: [[f64; 2]; 2], purity: f64) -> QuadratureStats {
    let eig = Matrix2::new(v[0][0], v[0][1], v[1][0], v[1][1]).symmetric_eigen();
    let (imin, imax) = if eig.eigenvalues[0] <= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
    let dmin = eig.eigenvalues[imin].max(0.0).sqrt();
    let dmax = eig.eigenvalues[imax].max(0.0).sqrt();
    let dir = eig.eigenvectors.column(imin);
    let mut phi = dir[1].atan2(dir[0]).rem_euclid(std::f64::consts::PI);
    if phi >= std::f64::consts::PI {
        phi = 0.0;
    }
    QuadratureStats {
        mean_x0: m0,
        mean_xpi2: m1,
        var_matrix: v,
        delta_min: dmin,
        delta_max: dmax,
        phi_min: phi,
        r_eff_db: r_eff_db(dmin),
        purity,
        uncertainty_product: dmin * dmax,
    }
}

/// Quadrature statistics of an oscillator state.
pub fn quad_stats<T: Real>(rho: &DensityMatrix<T>) -> Result<QuadratureStats> {
    if rho.dim() < 2 {
        return Err(invalid("rho", "oscillator space needs at least two levels"));
    }
    QuadratureProbe::new(rho.dim() - 1)?.measure(rho)
}

/// `⟨ψ|ρ|ψ⟩` with `|ψ⟩ = D(α) S(ζ) |0⟩`.
pub fn fidelity<T: Real>(rho: &DensityMatrix<T>, target: &SqueezeTarget<T>, n_max: usize) -> Result<T> {
    if rho.dim() != n_max + 1 {
        return Err(Error::DimensionMismatch { expected: n_max + 1, got: rho.dim() });
    }
    Ok(rho.overlap(&target.ket(n_max)?))
}

/// Rectangular grid in the `α` plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub re_range: (f64, f64),
    pub im_range: (f64, f64),
    pub resolution: usize,
}

impl GridSpec {
    pub fn square(half_width: f64, resolution: usize) -> Self {
        Self { re_range: (-half_width, half_width), im_range: (-half_width, half_width), resolution }
    }

    fn validate(&self) -> Result<()> {
        if self.resolution < 2 {
            return Err(invalid("resolution", "need at least two points per axis"));
        }
        let ok = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && a < b;
        if !ok(self.re_range) || !ok(self.im_range) {
            return Err(invalid("grid", "ranges must be finite and increasing"));
        }
        Ok(())
    }

    fn axis(range: (f64, f64), n: usize) -> Vec<f64> {
        let step = (range.1 - range.0) / (n - 1) as f64;
        (0..n).map(|k| range.0 + step * k as f64).collect()
    }

    pub fn re_axis(&self) -> Vec<f64> {
        Self::axis(self.re_range, self.resolution)
    }

    pub fn im_axis(&self) -> Vec<f64> {
        Self::axis(self.im_range, self.resolution)
    }
}

/// Wigner function sampled on a grid; `values[(i, j)]` is at `re_axis[i] + i·im_axis[j]`.
#[derive(Debug, Clone)]
pub struct WignerGrid {
    pub spec: GridSpec,
    pub values: nalgebra::DMatrix<f64>,
    pub n_max: usize,
    pub tail_mass: f64,
}

impl WignerGrid {
    /// Riemann sum of `W` over the grid (trapezoidal weights on the border).
    pub fn integral(&self) -> f64 {
        let n = self.spec.resolution;
        let dre = (self.spec.re_range.1 - self.spec.re_range.0) / (n - 1) as f64;
        let dim = (self.spec.im_range.1 - self.spec.im_range.0) / (n - 1) as f64;
        let w = |k: usize| if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += w(i) * w(j) * self.values[(i, j)];
            }
        }
        acc * dre * dim
    }

    /// CSV with `re,im,w` rows, preceded by `#` header lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# n_max={}", self.n_max);
        let _ = writeln!(out, "# tail_mass={}", format_sig(self.tail_mass));
        let _ = writeln!(out, "re,im,w");
        let re = self.spec.re_axis();
        let im = self.spec.im_axis();
        for (i, x) in re.iter().enumerate() {
            for (j, y) in im.iter().enumerate() {
                let _ = writeln!(out, "{},{},{}", format_sig(*x), format_sig(*y), format_sig(self.values[(i, j)]));
            }
        }
        out
    }
}

/// `W(α) = (2/π) tr[D(α) e^{iπN} D†(α) ρ]`, evaluated as
/// `(2/π) Σ_{mn} (−1)^n ρ_{nm} ⟨m|D(2α)|n⟩` with exact displacement elements.
pub fn wigner<T: Real>(rho: &DensityMatrix<T>, spec: GridSpec) -> Result<WignerGrid> {
    spec.validate()?;
    let dim = rho.dim();
    let n_max = dim - 1;
    let re = spec.re_axis();
    let im = spec.im_axis();
    let points: Vec<(usize, usize)> = (0..spec.resolution)
        .flat_map(|i| (0..spec.resolution).map(move |j| (i, j)))
        .collect();
    let vals: Vec<f64> = points
        .par_iter()
        .map(|&(i, j)| wigner_point(rho, re[i], im[j], n_max))
        .collect();
    let mut values = nalgebra::DMatrix::zeros(spec.resolution, spec.resolution);
    for (&(i, j), v) in points.iter().zip(vals) {
        values[(i, j)] = v;
    }
    Ok(WignerGrid { spec, values, n_max, tail_mass: rho.tail_mass(dim).as_f64() })
}

fn wigner_point<T: Real>(rho: &DensityMatrix<T>, x: f64, y: f64, n_max: usize) -> f64 {
    let beta = cplx(T::lit(2.0 * x), T::lit(2.0 * y));
    let d = displacement_elements(beta, n_max);
    let mut acc = T::zero();
    for n in 0..=n_max {
        let mut col = T::zero();
        for m in 0..=n_max {
            col += (rho[(n, m)] * d[(m, n)]).re;
        }
        if n % 2 == 0 {
            acc += col;
        } else {
            acc -= col;
        }
    }
    acc.as_f64() * std::f64::consts::FRAC_2_PI
}

/// Formats a value with 9 significant digits, switching to exponent notation
/// outside `[1e-4, 1e9)`.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".to_string() } else { format!("{x}") };
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-4..9).contains(&exp) {
        let s = format!("{x:.8e}");
        let (mant, e) = s.split_once('e').expect("exponent present");
        return format!("{}e{}", trim_zeros(mant), e);
    }
    let decimals = (8 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
