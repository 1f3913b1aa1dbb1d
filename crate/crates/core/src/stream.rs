//! Reservoir of a continuously entangled qubit stream.
//!
//! Each fresh qubit is entangled with the active one just before the active
//! qubit meets the oscillator, so one qubit of memory keeps the joint process
//! Markovian. Joint states live on (active qubit) ⊗ (oscillator). The parity
//! symmetry of the step reduces them to a pair of oscillator operators
//! `(ρ_D, ρ_O)`, which is the default simulation path.

use num_complex::Complex;

use crate::channels::{iterate_to_fixed_point, FixedPoint, KrausMap};
use crate::density::{DensityMatrix, TAIL_MASS_LIMIT};
use crate::error::{invalid, Error, Result};
use crate::fock::{parity, ResonantBlocks};
use crate::linalg::{self, dagger, kron, max_abs, mul};
use crate::observables::{QuadratureProbe, QuadratureStats};
use crate::scalar::{cplx, re, CMatrix, Real};

/// Joint state of the active qubit and the oscillator, qubit factor first.
pub type JointState<T> = DensityMatrix<T>;

fn sigma_x<T: Real>() -> CMatrix<T> {
    let mut m = CMatrix::zeros(2, 2);
    m[(0, 1)] = re(T::one());
    m[(1, 0)] = re(T::one());
    m
}

/// `σ_y` with `σ_y|g⟩ = i|e⟩`, `σ_y|e⟩ = −i|g⟩` (`|g⟩ ≡ |0⟩`).
fn sigma_y<T: Real>() -> CMatrix<T> {
    let mut m = CMatrix::zeros(2, 2);
    m[(0, 1)] = cplx(T::zero(), -T::one());
    m[(1, 0)] = cplx(T::zero(), T::one());
    m
}

/// `U_E = cos φ I − i sin φ σ_x ⊗ σ_y` on (older qubit) ⊗ (fresh qubit).
pub fn entangler<T: Real>(phi: T) -> CMatrix<T> {
    let (s, c) = phi.sin_cos();
    CMatrix::identity(4, 4) * re(c) + kron(&sigma_x(), &sigma_y()) * cplx(T::zero(), -s)
}

/// `A = cos φ |g⟩⟨g| + sin φ |e⟩⟨e|`, `B = cos φ |g⟩⟨e| + sin φ |e⟩⟨g|`.
fn qubit_dyads<T: Real>(phi: T) -> (CMatrix<T>, CMatrix<T>) {
    let (s, c) = phi.sin_cos();
    let mut a = CMatrix::zeros(2, 2);
    a[(0, 0)] = re(c);
    a[(1, 1)] = re(s);
    let mut b = CMatrix::zeros(2, 2);
    b[(0, 1)] = re(c);
    b[(1, 0)] = re(s);
    (a, b)
}

/// `M_g = A⊗C + B⊗R`, `M_e = B⊗C₊ − A⊗L` on qubit ⊗ oscillator.
pub fn stream_kraus<T: Real>(phi: T, theta: T, n_max: usize) -> Result<KrausMap<T>> {
    let blk = ResonantBlocks::new(theta, n_max)?;
    let (a, b) = qubit_dyads(phi);
    let mg = kron(&a, &blk.c) + kron(&b, &blk.r);
    let me = kron(&b, &blk.c_plus) - kron(&a, &blk.l);
    KrausMap::guarded(vec![mg, me], blk.dim(), n_max.saturating_sub(2))
}

/// One step of the joint dynamics.
pub fn stream_step<T: Real>(s: &JointState<T>, map: &KrausMap<T>) -> Result<JointState<T>> {
    map.apply(s)
}

/// Symmetry-reduced joint state.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedStreamState<T: Real> {
    pub rho_d: CMatrix<T>,
    pub rho_o: CMatrix<T>,
}

impl<T: Real> ReducedStreamState<T> {
    /// `ρ_D = ρ_O = |0⟩⟨0|`, the image of a ground qubit and an empty oscillator.
    pub fn ground(n_max: usize) -> Self {
        let v = DensityMatrix::<T>::vacuum(n_max + 1).into_matrix();
        Self { rho_d: v.clone(), rho_o: v }
    }

    pub fn dim(&self) -> usize {
        self.rho_d.nrows()
    }

    pub fn density(&self) -> DensityMatrix<T> {
        DensityMatrix::new_unchecked(self.rho_d.clone())
    }

    pub fn trace(&self) -> T {
        linalg::trace(&self.rho_d).re
    }

    fn scaled(mut self, k: T) -> Self {
        let k = re(k);
        self.rho_d *= k;
        self.rho_o *= k;
        self
    }
}

/// `⟨x|ρ|y⟩` blocks in the `|±⟩` basis: `(ρ₊₊, ρ₋₋, ρ₊₋)`.
fn pm_blocks<T: Real>(rho: &CMatrix<T>, d: usize) -> (CMatrix<T>, CMatrix<T>, CMatrix<T>) {
    let b = |i, j| linalg::block(rho, i, j, d);
    let (gg, ge, eg, ee) = (b(0, 0), b(0, 1), b(1, 0), b(1, 1));
    let half = re(T::lit(0.5));
    let pp = (&gg + &ge + &eg + &ee) * half;
    let mm = (&gg - &ge - &eg + &ee) * half;
    let pm = (&gg - &ge + &eg - &ee) * half;
    (pp, mm, pm)
}

/// Projects a parity-symmetric joint state to `(ρ_D, ρ_O)`.
pub fn lift<T: Real>(s: &JointState<T>) -> Result<ReducedStreamState<T>> {
    let dim = s.dim();
    if !dim.is_multiple_of(2) {
        return Err(Error::DimensionMismatch { expected: dim + 1, got: dim });
    }
    let d = dim / 2;
    let p = parity::<T>(d - 1);
    let (pp, mm, pm) = pm_blocks(s.matrix(), d);
    let dev_diag = max_abs(&(&pp - mul(&mul(&p, &mm), &p)));
    let pm_p = mul(&pm, &p);
    let dev_off = max_abs(&(&pm_p - mul(&p, &dagger(&pm))));
    let dev = dev_diag.max(dev_off).as_f64();
    if dev > 1e-8 {
        return Err(Error::SymmetryViolation(dev));
    }
    let two = re(T::lit(2.0));
    Ok(ReducedStreamState { rho_d: pp * two, rho_o: pm_p * two })
}

/// Rebuilds the joint state from `(ρ_D, ρ_O)`.
pub fn embed<T: Real>(r: &ReducedStreamState<T>) -> JointState<T> {
    let d = r.dim();
    let p = parity::<T>(d - 1);
    let half = re(T::lit(0.5));
    let pp = &r.rho_d * half;
    let mm = mul(&mul(&p, &r.rho_d), &p) * half;
    let pm = mul(&r.rho_o, &p) * half;
    let mp = mul(&p, &r.rho_o) * half;
    let gg = (&pp + &mm + &pm + &mp) * half;
    let ee = (&pp + &mm - &pm - &mp) * half;
    let ge = (&pp - &pm + &mp - &mm) * half;
    let eg = (&pp + &pm - &mp - &mm) * half;
    let mut out = CMatrix::zeros(2 * d, 2 * d);
    out.view_mut((0, 0), (d, d)).copy_from(&gg);
    out.view_mut((0, d), (d, d)).copy_from(&ge);
    out.view_mut((d, 0), (d, d)).copy_from(&eg);
    out.view_mut((d, d), (d, d)).copy_from(&ee);
    DensityMatrix::new_unchecked(out)
}

/// Precomputed operators of the reduced dynamics at fixed `(φ, θ, n_max)`.
#[derive(Debug, Clone)]
pub struct ReducedDynamics<T: Real> {
    ap: CMatrix<T>,
    am: CMatrix<T>,
    ap_d: CMatrix<T>,
    am_d: CMatrix<T>,
    /// Diagonal of the parity operator.
    sign: Vec<T>,
    s2: T,
    c2: T,
}

impl<T: Real> ReducedDynamics<T> {
    pub fn new(phi: T, theta: T, n_max: usize) -> Result<Self> {
        let b = ResonantBlocks::new(theta, n_max)?;
        let k = re(T::one() / T::lit(2.0).sqrt());
        let ap = (&b.c + &b.r) * k;
        let am = (&b.c_plus - &b.l) * k;
        let two_phi = phi * T::lit(2.0);
        Ok(Self {
            ap_d: dagger(&ap),
            am_d: dagger(&am),
            ap,
            am,
            sign: (0..=n_max).map(|n| if n % 2 == 0 { T::one() } else { -T::one() }).collect(),
            s2: two_phi.sin(),
            c2: two_phi.cos(),
        })
    }

    /// `(A₊ρA₊†, A₋ρA₋†)`.
    fn halves(&self, rho: &CMatrix<T>) -> (CMatrix<T>, CMatrix<T>) {
        (mul(&mul(&self.ap, rho), &self.ap_d), mul(&mul(&self.am, rho), &self.am_d))
    }

    pub fn phi_map(&self, rho: &CMatrix<T>) -> CMatrix<T> {
        let (p, m) = self.halves(rho);
        p + m
    }

    pub fn upsilon_map(&self, rho: &CMatrix<T>) -> CMatrix<T> {
        let (p, m) = self.halves(rho);
        p - m
    }

    /// `P X P` for diagonal parity `P`.
    fn conj_parity(&self, x: &CMatrix<T>) -> CMatrix<T> {
        CMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            let s = self.sign[i] * self.sign[j];
            x[(i, j)] * s
        })
    }

    /// `P X + X P`.
    fn anti_parity(&self, x: &CMatrix<T>) -> CMatrix<T> {
        CMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * (self.sign[i] + self.sign[j]))
    }

    pub fn step(&self, r: &ReducedStreamState<T>) -> ReducedStreamState<T> {
        let fd = self.phi_map(&r.rho_d);
        let uo = self.upsilon_map(&r.rho_o);
        let half = T::lit(0.5);
        let wp = re((T::one() + self.s2) * half);
        let wm = re((T::one() - self.s2) * half);
        let wc = re(self.c2 * half);
        let rho_d = &fd * wp + self.conj_parity(&fd) * wm + self.anti_parity(&uo) * wc;
        let rho_o = &uo * wp + self.conj_parity(&uo) * wm + self.anti_parity(&fd) * wc;
        ReducedStreamState { rho_d: linalg::hermitian_part(&rho_d), rho_o: linalg::hermitian_part(&rho_o) }
    }
}

/// `Φ(ρ) = ½(C+R)ρ(C+R)† + ½(C₊−L)ρ(C₊−L)†`.
pub fn phi_map<T: Real>(rho: &CMatrix<T>, theta: T) -> Result<CMatrix<T>> {
    Ok(ReducedDynamics::new(T::zero(), theta, rho.nrows() - 1)?.phi_map(rho))
}

/// `Υ(ρ) = ½(C+R)ρ(C+R)† − ½(C₊−L)ρ(C₊−L)†`.
pub fn upsilon_map<T: Real>(rho: &CMatrix<T>, theta: T) -> Result<CMatrix<T>> {
    Ok(ReducedDynamics::new(T::zero(), theta, rho.nrows() - 1)?.upsilon_map(rho))
}

pub fn reduced_step<T: Real>(r: &ReducedStreamState<T>, phi: T, theta: T) -> Result<ReducedStreamState<T>> {
    Ok(ReducedDynamics::new(phi, theta, r.dim() - 1)?.step(r))
}

/// Steady state of the reduced dynamics from the ground initial state.
///
/// Converged once `ρ_D` and `ρ_O` each move by less than `tol/2` in trace norm. The pair
/// is renormalized by `tr ρ_D` each step so that probability leaking through
/// the truncation edge does not masquerade as ongoing dynamics.
pub fn reduced_steady<T: Real>(
    phi: T,
    theta: T,
    n_max: usize,
    tol: f64,
    max_iters: usize,
) -> Result<FixedPoint<ReducedStreamState<T>>> {
    let dynamics = ReducedDynamics::new(phi, theta, n_max)?;
    let half_tol = T::lit(tol / 2.0);
    iterate_to_fixed_point(
        ReducedStreamState::ground(n_max),
        |r, it| {
            let next = dynamics.step(r);
            let tr = next.trace();
            if !(tr > T::zero()) {
                return Err(Error::Numerical { step: it, reason: "ρ_D lost its trace".into() });
            }
            Ok(next.scaled(T::one() / tr))
        },
        |a, b| {
            let (d_ok, dd) = linalg::trace_norm_below(&(&b.rho_d - &a.rho_d), half_tol);
            let (o_ok, od) = linalg::trace_norm_below(&(&b.rho_o - &a.rho_o), half_tol);
            (d_ok && o_ok, (dd + od).as_f64())
        },
        max_iters,
    )
}

/// Trajectory and final state of a reduced stream run.
#[derive(Debug, Clone)]
pub struct StreamRun<T: Real> {
    /// Statistics of `ρ_D` after each step, starting with the ground state.
    pub trajectory: Vec<QuadratureStats>,
    pub state: ReducedStreamState<T>,
    pub steps: usize,
    pub converged: bool,
    pub tail_mass: f64,
    pub tail_flag: bool,
}

/// Reduced-dynamics run from the ground state, recording `ρ_D` statistics
/// each step. Same convergence rule and renormalization as [`reduced_steady`].
pub fn simulate_stream<T: Real>(phi: T, theta: T, n_max: usize, max_steps: usize, tol: f64) -> Result<StreamRun<T>> {
    if !(tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    let dynamics = ReducedDynamics::new(phi, theta, n_max)?;
    let probe = QuadratureProbe::<T>::new(n_max)?;
    let half_tol = T::lit(tol / 2.0);
    let mut r = ReducedStreamState::ground(n_max);
    let mut trajectory = vec![probe.measure(&r.density())?];
    let (mut steps, mut converged, mut tail_flag) = (0, false, false);
    for k in 1..=max_steps {
        let next = dynamics.step(&r);
        let tr = next.trace();
        if !(tr.as_f64().is_finite() && tr > T::zero()) {
            return Err(Error::Numerical { step: k, reason: "ρ_D lost its trace".into() });
        }
        let next = next.scaled(T::one() / tr);
        let (d_ok, _) = linalg::trace_norm_below(&(&next.rho_d - &r.rho_d), half_tol);
        let (o_ok, _) = linalg::trace_norm_below(&(&next.rho_o - &r.rho_o), half_tol);
        r = next;
        let rho_d = r.density();
        tail_flag |= rho_d.tail_mass(n_max + 1).as_f64() > TAIL_MASS_LIMIT;
        trajectory.push(probe.measure(&rho_d)?);
        steps = k;
        if d_ok && o_ok {
            converged = true;
            break;
        }
    }
    let tail_mass = r.density().tail_mass(n_max + 1).as_f64();
    Ok(StreamRun { trajectory, state: r, steps, converged, tail_mass, tail_flag })
}

/// Small-θ steady-state prediction for `ρ_D`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamSteadyPrediction {
    pub x0_mean: f64,
    pub xpi2_mean: f64,
    pub delta_xpi2: f64,
    pub phi: f64,
    pub theta: f64,
}

/// `⟨X_0⟩ = θ sin 2φ / (2(1 − sin 2φ))`, `ΔX_{π/2} = √((1 − 2 sin 2φ cos² 2φ)/(4 cos² 2φ))`.
pub fn perturbative_steady(phi: f64, theta: f64) -> Result<StreamSteadyPrediction> {
    if !phi.is_finite() || !theta.is_finite() {
        return Err(invalid("phi", "non-finite input"));
    }
    let (s2, c2) = (2.0 * phi).sin_cos();
    if !(phi.abs() < std::f64::consts::FRAC_PI_4) || c2 * c2 < 1e-12 {
        return Err(Error::Divergent(format!(
            "φ = {phi} at or beyond π/4: the quadrature spread is unbounded"
        )));
    }
    let radicand = 1.0 - 2.0 * s2 * c2 * c2;
    if !(radicand > 0.0) {
        return Err(Error::Divergent(format!("negative radicand {radicand} at φ = {phi}")));
    }
    Ok(StreamSteadyPrediction {
        x0_mean: theta * s2 / (2.0 * (1.0 - s2)),
        xpi2_mean: 0.0,
        delta_xpi2: (radicand / (4.0 * c2 * c2)).sqrt(),
        phi,
        theta,
    })
}

fn formula_spread(phi: f64) -> f64 {
    perturbative_steady(phi, 0.0).map(|p| p.delta_xpi2).unwrap_or(f64::INFINITY)
}

/// Golden-section minimization of the small-θ spread over `φ ∈ (0, π/4)`.
pub fn find_optimal_phi() -> (f64, f64) {
    golden_section(formula_spread, 0.0, std::f64::consts::FRAC_PI_4, 1e-6)
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = (a + b) / 2.0;
    (x, f(x))
}

/// Amplitudes of `n_qubits` ground qubits after the entangler chain
/// `(1,2), (2,3), …`; qubit 1 is the most significant bit, `g = 0`.
pub fn mps_coefficients(phi: f64, n_qubits: usize) -> Result<Vec<Complex<f64>>> {
    if !(2..=12).contains(&n_qubits) {
        return Err(invalid("n_qubits", format!("must lie in 2..=12, got {n_qubits}")));
    }
    let ue = entangler::<f64>(phi);
    let len = 1usize << n_qubits;
    let mut amp = vec![Complex::new(0.0, 0.0); len];
    amp[0] = Complex::new(1.0, 0.0);
    for k in 0..n_qubits - 1 {
        // bits of qubits k (older) and k + 1 (fresh)
        let hi = n_qubits - 1 - k;
        let lo = hi - 1;
        let mut next = vec![Complex::new(0.0, 0.0); len];
        for (idx, &a) in amp.iter().enumerate() {
            if a == Complex::new(0.0, 0.0) {
                continue;
            }
            let pair_in = (((idx >> hi) & 1) << 1) | ((idx >> lo) & 1);
            let rest = idx & !((1 << hi) | (1 << lo));
            for pair_out in 0..4 {
                let w = ue[(pair_out, pair_in)];
                if w.norm() == 0.0 {
                    continue;
                }
                let out = rest | ((pair_out >> 1) << hi) | ((pair_out & 1) << lo);
                next[out] += w * a;
            }
        }
        amp = next;
    }
    Ok(amp)
}

/// Parses a `g`/`e` label (qubit 1 first) into a basis index.
pub fn basis_index(label: &str) -> Result<usize> {
    label.chars().try_fold(0usize, |acc, ch| match ch {
        'g' => Ok(acc << 1),
        'e' => Ok((acc << 1) | 1),
        _ => Err(invalid("label", format!("unexpected character {ch:?}"))),
    })
}
