//! Reservoir of entangled qubit pairs: the two-qubit Kraus map, its Lindblad
//! limit, the tuning calculator that targets a displaced squeezed state, and
//! the steady-state simulation loop.
//!
//! Amplitudes `β_xy` carry the second qubit's label first: `x` is the qubit
//! that meets the oscillator second, `y` the one that meets it first. With the
//! pair as an ancilla, the basis order is `|gg⟩, |ge⟩, |eg⟩, |ee⟩` (index `2x + y`).

use num_complex::Complex;

use crate::channels::{apply_channel, KrausMap, LindbladModel};
use crate::density::{DensityMatrix, TAIL_MASS_LIMIT};
use crate::error::{invalid, Error, Result};
use crate::fock::{annihilation, ResonantBlocks, SqueezeTarget};
use crate::linalg::{self, mul};
use crate::observables::{QuadratureProbe, QuadratureStats};
use crate::scalar::{arg, cplx, modulus, polar, re, CMatrix, Real};

/// Amplitudes of a pure two-qubit input state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairState<T> {
    pub beta_gg: Complex<T>,
    pub beta_ge: Complex<T>,
    pub beta_eg: Complex<T>,
    pub beta_ee: Complex<T>,
}

impl<T: Real> PairState<T> {
    pub fn new(beta_gg: Complex<T>, beta_ge: Complex<T>, beta_eg: Complex<T>, beta_ee: Complex<T>) -> Result<Self> {
        let p = Self { beta_gg, beta_ge, beta_eg, beta_ee };
        let norm = p.norm_sqr().as_f64();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(invalid("pair", format!("amplitudes have squared norm {norm}")));
        }
        Ok(p)
    }

    pub fn ground() -> Self {
        let z = cplx(T::zero(), T::zero());
        Self { beta_gg: re(T::one()), beta_ge: z, beta_eg: z, beta_ee: z }
    }

    pub fn norm_sqr(&self) -> T {
        self.amplitudes().iter().fold(T::zero(), |a, b| a + b.norm_sqr())
    }

    /// `[β_gg, β_ge, β_eg, β_ee]`.
    pub fn amplitudes(&self) -> [Complex<T>; 4] {
        [self.beta_gg, self.beta_ge, self.beta_eg, self.beta_ee]
    }

    /// `|ψ⟩⟨ψ|` on the 4-dimensional pair space.
    pub fn density(&self) -> DensityMatrix<T> {
        let v = nalgebra::DVector::from_column_slice(&self.amplitudes());
        DensityMatrix::from_ket(&v).expect("normalized pair state")
    }
}

/// Parameterization of the pair state used to steer the reservoir.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTuning<T> {
    pub u: T,
    pub mu: T,
    pub epsilon: T,
    pub chi: T,
    /// Half Rabi angle of each qubit–oscillator interaction.
    pub theta: T,
}

impl<T: Real> PairTuning<T> {
    pub fn new(u: T, mu: T, epsilon: T, chi: T, theta: T) -> Result<Self> {
        if !(u.abs() < T::frac_pi_4()) {
            return Err(invalid("u", format!("|u| must be < π/4, got {}", u.as_f64())));
        }
        if !(epsilon >= T::zero()) {
            return Err(invalid("epsilon", "must be non-negative"));
        }
        if !theta.is_finite() || !mu.is_finite() || !chi.is_finite() {
            return Err(invalid("tuning", "non-finite angle"));
        }
        Ok(Self { u, mu, epsilon, chi, theta })
    }

    /// Convergence rate per pair, `2θ² cos 2u`.
    pub fn kappa(&self) -> T {
        T::lit(2.0) * self.theta * self.theta * (T::lit(2.0) * self.u).cos()
    }

    /// `tanh r = −tan u`.
    pub fn squeeze_r(&self) -> T {
        (-self.u.tan()).atanh()
    }

    /// Displaced squeezed state stabilized in the small-θ limit, with `ε`
    /// inverted through the tuning relation (the residual thermal channels
    /// are neglected).
    pub fn theory_target(&self) -> Result<SqueezeTarget<T>> {
        let r = self.squeeze_r();
        let phi_r = self.mu;
        if self.epsilon == T::zero() || self.theta == T::zero() {
            return SqueezeTarget::new(cplx(T::zero(), T::zero()), r, phi_r);
        }
        let t = r.tanh();
        let chi = self.chi;
        let mut phi_a = (chi.sin() - t * (phi_r - chi).sin()).atan2(chi.cos() - t * (phi_r - chi).cos());
        let probe = polar(T::one(), -chi)
            * (polar(T::one(), phi_a) + polar(t, phi_r - phi_a));
        if probe.re < T::zero() {
            phi_a += T::pi();
        }
        let f = epsilon_factor(r, phi_r, chi);
        let mag = self.epsilon * T::lit(2.0).sqrt() / (self.theta * f);
        SqueezeTarget::new(polar(mag, phi_a), r, phi_r)
    }
}

/// `√((1+s)(1−s)/(1+cos(φ_r−2χ)s))` with `s = sin 2u = −2t/(1+t²)`, `t = tanh r`.
fn epsilon_factor<T: Real>(r: T, phi_r: T, chi: T) -> T {
    let t = r.tanh();
    let s = -T::lit(2.0) * t / (T::one() + t * t);
    let num = (T::one() + s) * (T::one() - s);
    let den = T::one() + (phi_r - T::lit(2.0) * chi).cos() * s;
    (num / den).sqrt()
}

/// Output of the tuning calculator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningReport<T> {
    pub pair: PairState<T>,
    pub tuning: PairTuning<T>,
    pub kappa: T,
    pub target: SqueezeTarget<T>,
}

pub fn pair_state_from_tuning<T: Real>(t: &PairTuning<T>) -> PairState<T> {
    let (se, ce) = t.epsilon.sin_cos();
    let (su, cu) = t.u.sin_cos();
    let cross = polar(se / T::lit(2.0).sqrt(), t.chi);
    PairState {
        beta_gg: re(ce * cu),
        beta_ge: cross,
        beta_eg: cross,
        beta_ee: polar(ce * su, t.mu),
    }
}

/// Pair tuning that stabilizes `target` in the small-θ limit.
pub fn tune<T: Real>(target: &SqueezeTarget<T>, theta: T) -> Result<TuningReport<T>> {
    if !(theta > T::zero()) {
        return Err(invalid("theta", "must be positive"));
    }
    if !(target.r.abs() < T::lit(crate::fock::R_CAP)) {
        return Err(invalid("r", "squeeze magnitude beyond cap"));
    }
    let t = target.r.tanh();
    let phi_r = target.phi_r;
    let u = (-t).atan();
    let mag = modulus(target.alpha);
    let (chi, epsilon) = if mag == T::zero() {
        (T::zero(), T::zero())
    } else {
        let pa = arg(target.alpha);
        let chi = (pa.sin() - t * (pa - phi_r).sin()).atan2(pa.cos() + t * (pa - phi_r).cos());
        let f = epsilon_factor(target.r, phi_r, chi);
        debug_assert!(f > T::zero() && f < T::lit(2.0).sqrt());
        (chi, theta * mag / T::lit(2.0).sqrt() * f)
    };
    let tuning = PairTuning::new(u, phi_r, epsilon, chi, theta)?;
    let kappa = T::lit(2.0) * theta * theta * (T::one() - t * t) / (T::one() + t * t);
    Ok(TuningReport { pair: pair_state_from_tuning(&tuning), tuning, kappa, target: *target })
}

/// `[[C, R], [−L, C₊]]` indexed `[out][in]`: `⟨out|U_r|in⟩` oscillator blocks.
fn single_qubit_blocks<T: Real>(b: &ResonantBlocks<T>) -> [[CMatrix<T>; 2]; 2] {
    [[b.c.clone(), b.r.clone()], [-&b.l, b.c_plus.clone()]]
}

/// The four Kraus operators `M_gg, M_ge, M_eg, M_ee` of one pair interaction.
pub fn pair_kraus<T: Real>(p: &PairState<T>, theta: T, n_max: usize) -> Result<KrausMap<T>> {
    check_pair(p)?;
    let b = ResonantBlocks::new(theta, n_max)?;
    let u = single_qubit_blocks(&b);
    let beta = p.amplitudes();
    let dim = b.dim();
    let mut ops = Vec::with_capacity(4);
    for x in 0..2 {
        for y in 0..2 {
            let mut m = CMatrix::zeros(dim, dim);
            for xi in 0..2 {
                for yi in 0..2 {
                    let w = beta[2 * xi + yi];
                    if modulus(w) == T::zero() {
                        continue;
                    }
                    m += mul(&u[x][xi], &u[y][yi]) * w;
                }
            }
            ops.push(m);
        }
    }
    KrausMap::guarded(ops, dim, n_max.saturating_sub(3))
}

fn check_pair<T: Real>(p: &PairState<T>) -> Result<()> {
    let n = p.norm_sqr().as_f64();
    if (n - 1.0).abs() > 1e-12 {
        return Err(invalid("pair", format!("amplitudes have squared norm {n}")));
    }
    Ok(())
}

/// Unitary of a full pair interaction on (pair) ⊗ (oscillator), pair index `2x + y`.
pub fn pair_dilation<T: Real>(theta: T, n_max: usize) -> Result<CMatrix<T>> {
    let b = ResonantBlocks::new(theta, n_max)?;
    let u = single_qubit_blocks(&b);
    let d = b.dim();
    let mut w = CMatrix::zeros(4 * d, 4 * d);
    for x in 0..2 {
        for y in 0..2 {
            for xi in 0..2 {
                for yi in 0..2 {
                    let blk = mul(&u[x][xi], &u[y][yi]);
                    w.view_mut(((2 * x + y) * d, (2 * xi + yi) * d), (d, d)).copy_from(&blk);
                }
            }
        }
    }
    Ok(w)
}

/// Kraus map of a pair in an arbitrary (possibly mixed) state on the pair space.
pub fn pair_kraus_mixed<T: Real>(ancilla: &DensityMatrix<T>, theta: T, n_max: usize) -> Result<KrausMap<T>> {
    if ancilla.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: ancilla.dim() });
    }
    let w = pair_dilation(theta, n_max)?;
    let raw = crate::channels::kraus_from_dilation(&w, ancilla, &linalg::identity(4))?;
    KrausMap::guarded(raw.ops().to_vec(), n_max + 1, n_max.saturating_sub(3))
}

/// Lindblad generator obtained by expanding the pair map to second order in θ.
pub fn pair_lindblad<T: Real>(p: &PairState<T>, theta: T, n_max: usize) -> Result<LindbladModel<T>> {
    check_pair(p)?;
    let a = annihilation::<T>(n_max)?;
    let ad = a.adjoint();
    let cross = p.beta_ge + p.beta_eg;
    let q = &a * (p.beta_gg * cross.conj() + p.beta_ee.conj() * cross);
    // H = −iθ(Q − Q†)
    let h = (&q - q.adjoint()) * cplx(T::zero(), -theta);
    let l1 = (&a * p.beta_gg - &ad * p.beta_ee) * re(T::lit(2.0).sqrt() * theta);
    let l2 = &a * (cross * theta);
    let l3 = &ad * (cross * theta);
    LindbladModel::new(h, vec![l1, l2, l3])
}

/// Simulation controls for the steady-state loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub n_max: usize,
    pub max_steps: usize,
    /// Trace-norm distance between successive states that counts as converged.
    pub tol: f64,
    /// Decay per pair, `γ · 2t_r`; `None` disables the decay channel.
    pub decay: Option<f64>,
}

impl RunOptions {
    pub fn new(n_max: usize, max_steps: usize) -> Self {
        Self { n_max, max_steps, tol: 1e-8, decay: None }
    }
}

/// Trajectory and final state of a reservoir run.
#[derive(Debug, Clone)]
pub struct PairRun<T: Real> {
    /// Statistics after each step, starting with the initial state.
    pub trajectory: Vec<QuadratureStats>,
    pub state: DensityMatrix<T>,
    pub steps: usize,
    pub converged: bool,
    pub tail_mass: f64,
    /// `tail_mass` exceeded the truncation witness limit at some step.
    pub tail_flag: bool,
}

/// Iterates `step` from `rho0`, recording statistics and stopping once the
/// trace-norm change between iterations falls below `opts.tol`.
pub fn run_reservoir<T, F>(rho0: DensityMatrix<T>, opts: &RunOptions, mut step: F) -> Result<PairRun<T>>
where
    T: Real,
    F: FnMut(&DensityMatrix<T>) -> Result<DensityMatrix<T>>,
{
    let dim = opts.n_max + 1;
    if !rho0.dim().is_multiple_of(dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: rho0.dim() });
    }
    let lead = rho0.dim() / dim;
    let probe = QuadratureProbe::<T>::new(opts.n_max)?;
    let measure = |r: &DensityMatrix<T>| -> Result<QuadratureStats> {
        if lead == 1 {
            probe.measure(r)
        } else {
            probe.measure(&r.trace_out_first(lead))
        }
    };
    let tol = T::lit(opts.tol);
    let mut rho = rho0;
    let mut trajectory = vec![measure(&rho)?];
    let mut converged = false;
    let mut tail_flag = false;
    let mut steps = 0;
    for k in 1..=opts.max_steps {
        let next = step(&rho)?;
        if next.iter().any(|z| !(z.re.as_f64().is_finite() && z.im.as_f64().is_finite())) {
            return Err(Error::Numerical { step: k, reason: "non-finite state".into() });
        }
        let tail = next.tail_mass(dim).as_f64();
        tail_flag |= tail > TAIL_MASS_LIMIT;
        let (done, _) = linalg::trace_norm_below(&(next.matrix() - rho.matrix()), tol);
        rho = next;
        trajectory.push(measure(&rho)?);
        steps = k;
        if done {
            converged = true;
            break;
        }
    }
    let tail_mass = rho.tail_mass(dim).as_f64();
    Ok(PairRun { trajectory, state: rho, steps, converged, tail_mass, tail_flag })
}

/// Runs the pair reservoir from the vacuum, optionally interleaving oscillator
/// decay after every pair.
pub fn simulate_pair_reservoir<T: Real>(p: &PairState<T>, theta: T, opts: &RunOptions) -> Result<PairRun<T>> {
    let map = pair_kraus(p, theta, opts.n_max)?;
    simulate_with_map(&map, opts)
}

/// Same loop for an arbitrary pair channel on the oscillator.
pub fn simulate_with_map<T: Real>(map: &KrausMap<T>, opts: &RunOptions) -> Result<PairRun<T>> {
    let decay = decay_map(opts)?;
    let rho0 = DensityMatrix::vacuum(opts.n_max + 1);
    run_reservoir(rho0, opts, |rho| reservoir_step(map, decay.as_ref(), rho))
}

fn decay_map<T: Real>(opts: &RunOptions) -> Result<Option<KrausMap<T>>> {
    match opts.decay {
        Some(g) if g > 0.0 => Ok(Some(crate::imperfections::decay_kraus(T::lit(g), opts.n_max)?)),
        _ => Ok(None),
    }
}

/// One pair interaction followed by the optional decay channel.
pub fn reservoir_step<T: Real>(
    map: &KrausMap<T>,
    decay: Option<&KrausMap<T>>,
    rho: &DensityMatrix<T>,
) -> Result<DensityMatrix<T>> {
    let out = apply_channel(map, rho)?;
    match decay {
        // the first-order decay map loses trace at O((γt)²); the state is
        // renormalized so that the fixed-point test sees only physics
        Some(d) => Ok(apply_channel(d, &out)?.renormalized()),
        None => Ok(out),
    }
}

/// Trace distance to `steady` after each step of a fresh run from the vacuum,
/// starting with the vacuum itself. Stops early once the distance drops
/// below `floor`.
pub fn distance_trajectory<T: Real>(
    map: &KrausMap<T>,
    opts: &RunOptions,
    steady: &DensityMatrix<T>,
    floor: f64,
) -> Result<Vec<f64>> {
    let decay = decay_map(opts)?;
    let mut rho = DensityMatrix::vacuum(opts.n_max + 1);
    let mut out = vec![rho.trace_distance(steady).as_f64()];
    for _ in 0..opts.max_steps {
        rho = reservoir_step(map, decay.as_ref(), &rho)?;
        let d = rho.trace_distance(steady).as_f64();
        out.push(d);
        if d < floor {
            break;
        }
    }
    Ok(out)
}

/// Exponential rate `κ` of `d_k ∝ e^{−κk}`, by least squares on `ln d_k` over
/// the steps with `lo ≤ d_k ≤ hi`. `None` with fewer than three such points.
pub fn fit_decay_rate(d: &[f64], lo: f64, hi: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        d.iter().enumerate().filter(|(_, &v)| v >= lo && v <= hi).map(|(k, &v)| (k as f64, v.ln())).collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(-sxy / sxx)
}
