//! Quantum channel machinery: the resonant propagator, Kraus extraction from
//! unitary dilations, channel application, Lindblad integration, and
//! fixed-point iteration.
//!
//! Tensor order is fixed crate-wide as (newest qubit) ⊗ (older qubit) ⊗
//! (oscillator); every ancilla factor precedes the system factor.

use num_complex::Complex;

use crate::density::DensityMatrix;
use crate::error::{invalid, Error, Result};
use crate::fock::ResonantBlocks;
use crate::linalg::{self, dagger, identity, mul, op_norm};
use crate::scalar::{modulus, re, CMatrix, Real};

/// Ordered Kraus operators `{M_k}` acting as `ρ ↦ Σ_k M_k ρ M_k†`.
#[derive(Debug, Clone)]
pub struct KrausMap<T: Real> {
    ops: Vec<CMatrix<T>>,
    adjoints: Vec<CMatrix<T>>,
    completeness_defect: T,
}

impl<T: Real> KrausMap<T> {
    /// Builds the map and records `‖Σ M†M − I‖` over the full space.
    pub fn new(ops: Vec<CMatrix<T>>) -> Result<Self> {
        let dim = check_ops(&ops)?;
        let all: Vec<usize> = (0..dim).collect();
        let defect = completeness_defect_on(&ops, &all);
        Ok(Self::assemble(ops, defect))
    }

    /// Builds a map on `(ancilla factors) ⊗ oscillator` and records the
    /// completeness defect on the guarded subspace where the oscillator
    /// occupies levels `0..=keep_levels`.
    pub fn guarded(ops: Vec<CMatrix<T>>, osc_dim: usize, keep_levels: usize) -> Result<Self> {
        let dim = check_ops(&ops)?;
        if osc_dim == 0 || dim % osc_dim != 0 {
            return Err(Error::DimensionMismatch { expected: osc_dim, got: dim });
        }
        let idx = guarded_indices(dim, osc_dim, keep_levels);
        let defect = completeness_defect_on(&ops, &idx);
        Ok(Self::assemble(ops, defect))
    }

    /// Builds a map whose defect is declared by the caller (first-order
    /// maps that are not exactly trace preserving).
    pub fn with_declared_defect(ops: Vec<CMatrix<T>>, declared: T) -> Result<Self> {
        check_ops(&ops)?;
        Ok(Self::assemble(ops, declared))
    }

    fn assemble(ops: Vec<CMatrix<T>>, completeness_defect: T) -> Self {
        let adjoints = ops.iter().map(dagger).collect();
        Self { ops, adjoints, completeness_defect }
    }

    pub fn ops(&self) -> &[CMatrix<T>] {
        &self.ops
    }

    pub fn dim(&self) -> usize {
        self.ops[0].nrows()
    }

    pub fn completeness_defect(&self) -> T {
        self.completeness_defect
    }

    /// `Σ M† M`.
    pub fn completeness(&self) -> CMatrix<T> {
        completeness(&self.ops)
    }

    /// `Σ_k M_k X M_k†` on an arbitrary (not necessarily positive) operator.
    pub fn apply_operator(&self, x: &CMatrix<T>) -> CMatrix<T> {
        let mut out = CMatrix::zeros(x.nrows(), x.ncols());
        for (m, md) in self.ops.iter().zip(&self.adjoints) {
            out += mul(&mul(m, x), md);
        }
        out
    }

    pub fn apply(&self, rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
        apply_channel(self, rho)
    }
}

fn check_ops<T: Real>(ops: &[CMatrix<T>]) -> Result<usize> {
    let first = ops.first().ok_or_else(|| invalid("ops", "Kraus map needs at least one operator"))?;
    let dim = first.nrows();
    for m in ops {
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: m.nrows().max(m.ncols()) });
        }
    }
    Ok(dim)
}

fn completeness<T: Real>(ops: &[CMatrix<T>]) -> CMatrix<T> {
    let dim = ops[0].nrows();
    ops.iter().fold(CMatrix::zeros(dim, dim), |acc, m| acc + mul(&dagger(m), m))
}

fn guarded_indices(dim: usize, osc_dim: usize, keep_levels: usize) -> Vec<usize> {
    (0..dim).filter(|k| k % osc_dim <= keep_levels).collect()
}

fn completeness_defect_on<T: Real>(ops: &[CMatrix<T>], idx: &[usize]) -> T {
    let c = completeness(ops);
    let sub = CMatrix::from_fn(idx.len(), idx.len(), |i, j| {
        let v = c[(idx[i], idx[j])];
        if i == j {
            v - re(T::one())
        } else {
            v
        }
    });
    op_norm(&sub)
}

/// `ρ ↦ Σ_k M_k ρ M_k†`, symmetrized to remove round-off anti-Hermitian parts.
pub fn apply_channel<T: Real>(map: &KrausMap<T>, rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
    if rho.dim() != map.dim() {
        return Err(Error::DimensionMismatch { expected: map.dim(), got: rho.dim() });
    }
    Ok(DensityMatrix::new_unchecked(map.apply_operator(rho.matrix())))
}

/// Resonant qubit–oscillator propagator on qubit ⊗ oscillator:
/// `U_r = |g⟩⟨g|⊗C + |e⟩⟨e|⊗C₊ − |e⟩⟨g|⊗L + |g⟩⟨e|⊗R`.
pub fn resonant_propagator<T: Real>(theta: T, n_max: usize) -> Result<CMatrix<T>> {
    if n_max < 2 {
        return Err(invalid("n_max", format!("must be >= 2, got {n_max}")));
    }
    let b = ResonantBlocks::new(theta, n_max)?;
    Ok(propagator_from_blocks(&b))
}

fn propagator_from_blocks<T: Real>(b: &ResonantBlocks<T>) -> CMatrix<T> {
    let d = b.dim();
    let mut u = CMatrix::zeros(2 * d, 2 * d);
    u.view_mut((0, 0), (d, d)).copy_from(&b.c);
    u.view_mut((d, d), (d, d)).copy_from(&b.c_plus);
    u.view_mut((d, 0), (d, d)).copy_from(&(-&b.l));
    u.view_mut((0, d), (d, d)).copy_from(&b.r);
    u
}

/// Kraus operators of `ρ ↦ tr_anc[U (ρ_anc ⊗ ρ) U†]` for a unitary `U` on
/// ancilla ⊗ system.
///
/// `ancilla_basis` holds the output basis vectors as columns. Mixed ancilla
/// inputs are decomposed spectrally; each eigenvector with weight `p_i`
/// contributes operators `√p_i ⟨k|U|ψ_i⟩`.
pub fn kraus_from_dilation<T: Real>(
    u: &CMatrix<T>,
    ancilla_in: &DensityMatrix<T>,
    ancilla_basis: &CMatrix<T>,
) -> Result<KrausMap<T>> {
    let na = ancilla_in.dim();
    if u.nrows() != u.ncols() || !u.nrows().is_multiple_of(na) {
        return Err(Error::DimensionMismatch { expected: na, got: u.nrows() });
    }
    if ancilla_basis.nrows() != na || ancilla_basis.ncols() != na {
        return Err(Error::DimensionMismatch { expected: na, got: ancilla_basis.nrows() });
    }
    ancilla_in.validate()?;
    let ns = u.nrows() / na;
    let (weights, vecs) = linalg::hermitian_eigh(ancilla_in.matrix());
    let floor = T::lit(1e-14);

    let mut ops = Vec::new();
    for (i, &p) in weights.iter().enumerate() {
        if p <= floor {
            continue;
        }
        let amp = re(p.sqrt());
        let psi = vecs.column(i);
        for k in 0..na {
            let mut m = CMatrix::zeros(ns, ns);
            for a in 0..na {
                let bra = ancilla_basis[(a, k)].conj();
                if modulus(bra) == T::zero() {
                    continue;
                }
                for j in 0..na {
                    let w = bra * psi[j] * amp;
                    if modulus(w) == T::zero() {
                        continue;
                    }
                    m += u.view((a * ns, j * ns), (ns, ns)) * w;
                }
            }
            ops.push(m);
        }
    }
    KrausMap::new(ops)
}

/// Continuous-time generator `dρ/dτ = −i[H,ρ] + Σ_j D(L_j)ρ`.
#[derive(Debug, Clone)]
pub struct LindbladModel<T: Real> {
    pub hamiltonian: CMatrix<T>,
    pub dissipators: Vec<CMatrix<T>>,
}

impl<T: Real> LindbladModel<T> {
    pub fn new(hamiltonian: CMatrix<T>, dissipators: Vec<CMatrix<T>>) -> Result<Self> {
        let dim = hamiltonian.nrows();
        let herm = linalg::hermiticity_defect(&hamiltonian).as_f64();
        if herm > 1e-10 {
            return Err(invalid("hamiltonian", format!("not Hermitian (defect {herm:.3e})")));
        }
        for l in &dissipators {
            if l.nrows() != dim || l.ncols() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: l.nrows() });
            }
        }
        Ok(Self { hamiltonian, dissipators })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    /// `max_j ‖L_j‖²`.
    pub fn max_rate(&self) -> T {
        self.dissipators.iter().map(|l| {
            let n = op_norm(l);
            n * n
        }).fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    /// Default RK4 step `min(0.05, 0.05 / max_j ‖L_j‖²)`.
    pub fn default_dt(&self) -> T {
        let base = T::lit(0.05);
        let rate = self.max_rate();
        if rate > T::one() {
            base / rate
        } else {
            base
        }
    }

    fn prepared(&self) -> PreparedLindblad<T> {
        let half = re(T::lit(0.5));
        let mut effective = self.hamiltonian.map(|z| Complex::new(z.im, -z.re)); // −iH
        for l in &self.dissipators {
            effective -= mul(&dagger(l), l) * half;
        }
        PreparedLindblad {
            effective,
            jumps: self.dissipators.iter().map(|l| (l.clone(), dagger(l))).collect(),
        }
    }

    /// `dρ/dτ` at `ρ`.
    pub fn rhs(&self, rho: &CMatrix<T>) -> CMatrix<T> {
        self.prepared().rhs(rho)
    }
}

struct PreparedLindblad<T: Real> {
    /// `K = −iH − ½ Σ L†L`, so that `dρ/dτ = Kρ + ρK† + Σ LρL†`.
    effective: CMatrix<T>,
    jumps: Vec<(CMatrix<T>, CMatrix<T>)>,
}

impl<T: Real> PreparedLindblad<T> {
    /// Uses `ρK† = (Kρ)†`, valid for Hermitian `ρ`.
    fn rhs(&self, rho: &CMatrix<T>) -> CMatrix<T> {
        let kr = mul(&self.effective, rho);
        let mut out = &kr + kr.adjoint();
        for (l, ld) in &self.jumps {
            out += mul(&mul(l, rho), ld);
        }
        out
    }
}

/// Fixed-step classical RK4 integration of a Lindblad model over `duration`.
///
/// The final partial step is shortened so that exactly `duration` is covered.
pub fn integrate_lindblad<T: Real>(
    model: &LindbladModel<T>,
    rho0: &DensityMatrix<T>,
    duration: T,
    dt: T,
) -> Result<DensityMatrix<T>> {
    if !(dt > T::zero()) {
        return Err(invalid("dt", "must be positive"));
    }
    if !(duration >= dt) {
        return Err(invalid("duration", "must be at least one step"));
    }
    if rho0.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: rho0.dim() });
    }
    let prep = model.prepared();
    let mut rho = rho0.matrix().clone();
    let mut t = T::zero();
    let mut step = 0usize;
    let two = re(T::lit(2.0));
    let sixth = T::one() / T::lit(6.0);
    while t < duration {
        let h = if t + dt > duration { duration - t } else { dt };
        if h <= T::lit(1e-14) * duration {
            break;
        }
        let hc = re(h);
        let half = re(h * T::lit(0.5));
        let k1 = prep.rhs(&rho);
        let k2 = prep.rhs(&(&rho + &k1 * half));
        let k3 = prep.rhs(&(&rho + &k2 * half));
        let k4 = prep.rhs(&(&rho + &k3 * hc));
        rho += (k1 + &k2 * two + &k3 * two + k4) * re(h * sixth);
        // `rhs` is only correct on Hermitian input; round-off must not accumulate
        rho = linalg::hermitian_part(&rho);
        step += 1;
        if rho.iter().any(|z| !(z.re.as_f64().is_finite() && z.im.as_f64().is_finite())) {
            return Err(Error::Numerical {
                step,
                reason: format!("non-finite density matrix at τ = {}", (t + h).as_f64()),
            });
        }
        t += h;
    }
    Ok(DensityMatrix::new_unchecked(rho))
}

/// Result of a fixed-point iteration.
#[derive(Debug, Clone)]
pub struct FixedPoint<S> {
    pub state: S,
    pub iterations: usize,
    pub converged: bool,
    /// Last measured distance between successive iterates (an upper bound
    /// when the cheap Frobenius test already decided the comparison).
    pub last_delta: f64,
}

/// Iterates `step` from `init` until `delta(prev, next, tol)` reports
/// convergence or `max_iters` steps have been taken.
///
/// `delta` returns `(below_tol, distance)`. Non-convergence is reported
/// through the `converged` flag rather than an error.
pub fn iterate_to_fixed_point<S, F, D>(
    init: S,
    mut step: F,
    mut delta: D,
    max_iters: usize,
) -> Result<FixedPoint<S>>
where
    F: FnMut(&S, usize) -> Result<S>,
    D: FnMut(&S, &S) -> (bool, f64),
{
    let mut state = init;
    let mut last = f64::INFINITY;
    for it in 1..=max_iters {
        let next = step(&state, it)?;
        let (done, d) = delta(&state, &next);
        if !d.is_finite() {
            return Err(Error::Numerical { step: it, reason: "non-finite iterate".into() });
        }
        last = d;
        state = next;
        if done {
            return Ok(FixedPoint { state, iterations: it, converged: true, last_delta: last });
        }
    }
    Ok(FixedPoint { state, iterations: max_iters, converged: false, last_delta: last })
}

/// Fixed point of a channel on density matrices under the trace-norm criterion.
pub fn fixed_point<T, F>(mut step: F, rho0: DensityMatrix<T>, tol: T, max_iters: usize) -> Result<FixedPoint<DensityMatrix<T>>>
where
    T: Real,
    F: FnMut(&DensityMatrix<T>) -> Result<DensityMatrix<T>>,
{
    if !(tol > T::zero()) {
        return Err(invalid("tol", "must be positive"));
    }
    iterate_to_fixed_point(
        rho0,
        |rho, _| step(rho),
        |a, b| {
            let (done, d) = linalg::trace_norm_below(&(b.matrix() - a.matrix()), tol);
            (done, d.as_f64())
        },
        max_iters,
    )
}

/// Identity map on `dim` levels.
pub fn identity_map<T: Real>(dim: usize) -> KrausMap<T> {
    KrausMap::new(vec![identity(dim)]).expect("identity is a valid Kraus map")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::annihilation;
    use crate::linalg::max_abs;
    use crate::scalar::cplx;
    use std::f64::consts::PI;

    fn qubit_basis() -> CMatrix<f64> {
        identity(2)
    }

    #[test]
    fn propagator_edge_cases() {
        let u0 = resonant_propagator::<f64>(0.0, 6).unwrap();
        assert!(max_abs(&(u0 - identity::<f64>(14))) < 1e-15);

        let d = 7;
        let u = resonant_propagator::<f64>(0.37, 6).unwrap();
        // |g,0⟩ is dark
        assert!((u[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!(u.column(0).iter().skip(1).all(|z| z.norm() < 1e-15));
        // |e,0⟩ at θ = π/2 → |g,1⟩ with amplitude 1
        let u = resonant_propagator::<f64>(PI / 2.0, 6).unwrap();
        assert!((u[(1, d)].re - 1.0).abs() < 1e-15);

        assert!(resonant_propagator::<f64>(0.1, 1).is_err());
    }

    #[test]
    fn propagator_unitary_on_guarded_subspace() {
        let n_max = 12;
        let d = n_max + 1;
        let u = resonant_propagator::<f64>(0.9, n_max).unwrap();
        let uu = dagger(&u) * &u;
        for i in 0..2 * d {
            for j in 0..2 * d {
                if i % d > n_max - 2 || j % d > n_max - 2 {
                    continue;
                }
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((uu[(i, j)] - cplx(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn dilation_reads_off_propagator_columns() {
        let n_max = 10;
        let th = PI / 20.0;
        let u = resonant_propagator::<f64>(th, n_max).unwrap();
        let g = DensityMatrix::<f64>::fock(0, 2).unwrap();
        let map = kraus_from_dilation(&u, &g, &qubit_basis()).unwrap();
        let b = ResonantBlocks::<f64>::new(th, n_max).unwrap();
        assert_eq!(map.ops().len(), 2);
        assert!(max_abs(&(&map.ops()[0] - &b.c)) < 1e-15);
        assert!(max_abs(&(&map.ops()[1] + &b.l)) < 1e-15);

        let id = identity::<f64>(2 * (n_max + 1));
        let m = kraus_from_dilation(&id, &g, &qubit_basis()).unwrap();
        assert!(max_abs(&(&m.ops()[0] - identity::<f64>(n_max + 1))) < 1e-15);
        assert!(max_abs(&m.ops()[1]) < 1e-15);
    }

    #[test]
    fn dilation_rejects_bad_inputs() {
        let u = resonant_propagator::<f64>(0.1, 6).unwrap();
        let bad = DensityMatrix::new_unchecked(CMatrix::<f64>::identity(2, 2));
        assert!(kraus_from_dilation(&u, &bad, &qubit_basis()).is_err());
        let three = DensityMatrix::<f64>::fock(0, 3).unwrap();
        assert!(matches!(
            kraus_from_dilation(&u, &three, &identity(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn identity_channel_is_noop() {
        let psi = nalgebra::DVector::from_vec(vec![cplx(0.6, 0.0), cplx(0.0, 0.8), cplx(0.0, 0.0)]);
        let rho = DensityMatrix::<f64>::from_ket(&psi).unwrap();
        let out = identity_map::<f64>(3).apply(&rho).unwrap();
        assert!(max_abs(&(out.matrix() - rho.matrix())) < 1e-16);
        assert!(apply_channel(&identity_map::<f64>(4), &rho).is_err());
    }

    #[test]
    fn photon_decay_matches_exponential() {
        let n_max = 6;
        let kappa = 0.3f64;
        let a = annihilation::<f64>(n_max).unwrap() * cplx(kappa.sqrt(), 0.0);
        let model = LindbladModel::new(CMatrix::zeros(n_max + 1, n_max + 1), vec![a]).unwrap();
        let rho0 = DensityMatrix::<f64>::fock(1, n_max + 1).unwrap();
        let tau = 2.0;
        let out = integrate_lindblad(&model, &rho0, tau, model.default_dt()).unwrap();
        let n = crate::fock::number::<f64>(n_max);
        assert!((out.expect(&n).re - (-kappa * tau).exp()).abs() < 1e-5);
        assert!((out.trace() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_generator_keeps_state() {
        let model = LindbladModel::<f64>::new(CMatrix::zeros(3, 3), vec![]).unwrap();
        let rho0 = DensityMatrix::<f64>::fock(2, 3).unwrap();
        let out = integrate_lindblad(&model, &rho0, 1.0, 0.1).unwrap();
        assert!(max_abs(&(out.matrix() - rho0.matrix())) < 1e-15);
        assert!(integrate_lindblad(&model, &rho0, 1.0, 0.0).is_err());
        assert!(integrate_lindblad(&model, &rho0, 0.01, 0.1).is_err());
    }

    #[test]
    fn fixed_point_of_identity_is_immediate() {
        let rho = DensityMatrix::<f64>::fock(1, 4).unwrap();
        let fp = fixed_point(|r| Ok(r.clone()), rho.clone(), 1e-8, 10).unwrap();
        assert!(fp.converged);
        assert_eq!(fp.iterations, 1);
        assert_eq!(fp.state, rho);
    }

    #[test]
    fn fixed_point_reports_non_convergence() {
        // a qubit flip never settles
        let mut x = CMatrix::<f64>::zeros(2, 2);
        x[(0, 1)] = cplx(1.0, 0.0);
        x[(1, 0)] = cplx(1.0, 0.0);
        let flip = KrausMap::new(vec![x]).unwrap();
        let rho = DensityMatrix::<f64>::fock(0, 2).unwrap();
        let fp = fixed_point(|r| flip.apply(r), rho, 1e-8, 25).unwrap();
        assert!(!fp.converged);
        assert_eq!(fp.iterations, 25);
    }
}
