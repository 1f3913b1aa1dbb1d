//! Imperfect pair reservoirs: oscillator energy decay, loss of pair
//! coherence, the analytic second-moment steady state, and a grid optimizer
//! over `(u, θ)`.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::channels::{KrausMap, LindbladModel};
use crate::density::DensityMatrix;
use crate::error::{invalid, Error, Result};
use crate::fock::{annihilation, number};
use crate::observables::format_sig;
use crate::pair::{pair_kraus_mixed, simulate_with_map, RunOptions};
use crate::scalar::{re, CMatrix, Real};

/// Largest decay per step for which the first-order Kraus map is accepted.
pub const DECAY_GUARD: f64 = 0.05;

/// Parameters of an imperfect pair reservoir.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImperfectionConfig {
    /// Fraction of the `|gg⟩⟨ee|` coherence that survives.
    pub eta: f64,
    /// Ratio of Rabi frequency to oscillator decay rate; `None` disables decay.
    pub omega_over_gamma: Option<f64>,
    pub theta: f64,
    pub u: f64,
}

impl ImperfectionConfig {
    pub fn new(eta: f64, omega_over_gamma: Option<f64>, theta: f64, u: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(invalid("eta", format!("must lie in [0, 1], got {eta}")));
        }
        if let Some(r) = omega_over_gamma {
            if !(r > 0.0) {
                return Err(invalid("omega_over_gamma", "must be positive"));
            }
        }
        if !(u.abs() < std::f64::consts::FRAC_PI_4) {
            return Err(invalid("u", "|u| must be < π/4"));
        }
        if !(theta > 0.0) {
            return Err(invalid("theta", "must be positive"));
        }
        Ok(Self { eta, omega_over_gamma, theta, u })
    }

    /// Decay per pair, `γ · 2t_r = 4θ / (Ω/γ)`.
    pub fn decay_per_pair(&self) -> Option<f64> {
        self.omega_over_gamma.map(|r| 4.0 * self.theta / r)
    }
}

/// First-order oscillator decay: `M₀ = I − (γt/2)N`, `M₁ = √(γt) a`.
pub fn decay_kraus<T: Real>(gamma_t: T, n_max: usize) -> Result<KrausMap<T>> {
    if !(gamma_t >= T::zero()) || gamma_t >= T::lit(DECAY_GUARD) {
        return Err(invalid("gamma_tr", format!("must lie in [0, {DECAY_GUARD}), got {}", gamma_t.as_f64())));
    }
    let dim = n_max + 1;
    let m0 = CMatrix::identity(dim, dim) - number::<T>(n_max) * re(gamma_t / T::lit(2.0));
    let m1 = annihilation::<T>(n_max)? * re(gamma_t.sqrt());
    // Σ M†M − I = (γt/2)² N², largest on the top level
    let nm = T::from_count(n_max);
    let declared = gamma_t * gamma_t * nm * nm / T::lit(4.0);
    KrausMap::with_declared_defect(vec![m0, m1], declared)
}

/// Pair state with its `|gg⟩⟨ee|` coherence reduced by `η`.
pub fn dephased_pair<T: Real>(
    beta_gg: num_complex::Complex<T>,
    beta_ee: num_complex::Complex<T>,
    eta: T,
) -> Result<DensityMatrix<T>> {
    let norm = (beta_gg.norm_sqr() + beta_ee.norm_sqr()).as_f64();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(invalid("pair", format!("|β_gg|² + |β_ee|² = {norm}")));
    }
    if !(eta >= T::zero() && eta <= T::one()) {
        return Err(invalid("eta", "must lie in [0, 1]"));
    }
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = re(beta_gg.norm_sqr());
    m[(3, 3)] = re(beta_ee.norm_sqr());
    m[(3, 0)] = beta_gg.conj() * beta_ee * eta;
    m[(0, 3)] = beta_ee.conj() * beta_gg * eta;
    DensityMatrix::new(m)
}

/// Steady `(⟨X_0²⟩, ⟨X_{π/2}²⟩)` of the small-θ dynamics with pair coherence `η`.
pub fn moment_steady(u: f64, eta: f64) -> Result<(f64, f64)> {
    let c = (2.0 * u).cos();
    if !(c > 1e-12) {
        return Err(Error::Divergent(format!("cos 2u = {c} ≤ 0: no bounded steady state")));
    }
    let s = (2.0 * u).sin();
    Ok(((1.0 + eta * s) / (4.0 * c), (1.0 - eta * s) / (4.0 * c)))
}

/// Two-dissipator Lindblad model of the dephased pair: with probability
/// `p_f = (1−η)/2` the `|ee⟩` amplitude flips sign, which swaps the squeezed
/// dissipator `b₊ ∝ cos u a − sin u a†` for `b₋ ∝ cos u a + sin u a†`.
pub fn phase_flip_lindblad<T: Real>(u: T, eta: T, theta: T, n_max: usize) -> Result<LindbladModel<T>> {
    let a = annihilation::<T>(n_max)?;
    let ad = a.adjoint();
    let (su, cu) = u.sin_cos();
    let pf = (T::one() - eta) / T::lit(2.0);
    let k = T::lit(2.0).sqrt() * theta;
    let plus = (&a * re(cu) - &ad * re(su)) * re(k * (T::one() - pf).sqrt());
    let minus = (&a * re(cu) + &ad * re(su)) * re(k * pf.sqrt());
    LindbladModel::new(CMatrix::zeros(n_max + 1, n_max + 1), vec![plus, minus])
}

/// Kraus map of one dephased pair interaction (ε = 0, μ = 0).
pub fn imperfect_pair_kraus<T: Real>(u: T, eta: T, theta: T, n_max: usize) -> Result<KrausMap<T>> {
    let (su, cu) = u.sin_cos();
    let anc = dephased_pair(re(cu), re(su), eta)?;
    pair_kraus_mixed(&anc, theta, n_max)
}

/// Result of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellResult {
    pub u: f64,
    pub theta: f64,
    pub delta_x_pi2: f64,
    pub r_eff_db: f64,
    pub steps: usize,
    pub converged: bool,
    pub tail_mass: f64,
    /// Cell failed outright; the numeric fields are NaN.
    pub failed: bool,
}

/// Settings of the `(u, θ)` optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub eta: f64,
    pub omega_over_gamma: Option<f64>,
    pub u_grid: Vec<f64>,
    pub theta_grid: Vec<f64>,
    pub n_max: usize,
    pub max_steps: usize,
    pub tol: f64,
    /// Number of refinement stages around the best cell.
    pub refine_stages: usize,
    pub workers: Option<usize>,
}

/// Full table and the best cell.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub cells: Vec<CellResult>,
    pub best: CellResult,
}

impl SweepResult {
    pub fn to_csv(&self, cfg: &SweepConfig) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# n_max={} tol={} eta={}", cfg.n_max, format_sig(cfg.tol), format_sig(cfg.eta));
        let _ = writeln!(
            out,
            "# omega_over_gamma={}",
            cfg.omega_over_gamma.map(format_sig).unwrap_or_else(|| "none".into())
        );
        let _ = writeln!(out, "u,theta,delta_x_pi2,r_eff_db,converged,tail_mass");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                format_sig(c.u),
                format_sig(c.theta),
                format_sig(c.delta_x_pi2),
                format_sig(c.r_eff_db),
                if c.failed { "failed" } else if c.converged { "true" } else { "false" },
                format_sig(c.tail_mass)
            );
        }
        out
    }
}

/// Steady `ΔX_{π/2}` of one `(u, θ)` cell.
pub fn run_cell(cfg: &SweepConfig, u: f64, theta: f64) -> CellResult {
    let fail = CellResult {
        u,
        theta,
        delta_x_pi2: f64::NAN,
        r_eff_db: f64::NAN,
        steps: 0,
        converged: false,
        tail_mass: f64::NAN,
        failed: true,
    };
    let Ok(ic) = ImperfectionConfig::new(cfg.eta, cfg.omega_over_gamma, theta, u) else {
        return fail;
    };
    let Ok(map) = imperfect_pair_kraus(u, cfg.eta, theta, cfg.n_max) else {
        return fail;
    };
    let opts = RunOptions { n_max: cfg.n_max, max_steps: cfg.max_steps, tol: cfg.tol, decay: ic.decay_per_pair() };
    match simulate_with_map(&map, &opts) {
        Ok(run) => {
            let s = run.trajectory.last().copied().expect("trajectory has the initial state");
            let dx = s.delta_at(std::f64::consts::FRAC_PI_2);
            CellResult {
                u,
                theta,
                delta_x_pi2: dx,
                r_eff_db: crate::observables::r_eff_db(dx),
                steps: run.steps,
                converged: run.converged,
                tail_mass: run.tail_mass,
                failed: false,
            }
        }
        Err(_) => fail,
    }
}

fn run_cells(cfg: &SweepConfig, points: &[(f64, f64)]) -> Vec<CellResult> {
    let work = || points.par_iter().map(|&(u, t)| run_cell(cfg, u, t)).collect();
    match cfg.workers {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(work),
            Err(_) => work(),
        },
        None => work(),
    }
}

fn best_of(cells: &[CellResult]) -> Option<CellResult> {
    cells
        .iter()
        .filter(|c| !c.failed && c.delta_x_pi2.is_finite())
        .min_by(|a, b| a.delta_x_pi2.total_cmp(&b.delta_x_pi2))
        .copied()
}

fn spacing(grid: &[f64], x: f64) -> f64 {
    let mut sorted: Vec<f64> = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let gaps: Vec<f64> = sorted.windows(2).map(|w| w[1] - w[0]).collect();
    if gaps.is_empty() {
        return 0.0;
    }
    let idx = sorted.iter().position(|&v| v == x).unwrap_or(0);
    let left = if idx > 0 { gaps[idx - 1] } else { f64::INFINITY };
    let right = if idx < gaps.len() { gaps[idx] } else { f64::INFINITY };
    left.min(right)
}

/// Exhaustive grid search followed by factor-4 refinements around the best cell.
pub fn optimize_squeezing(cfg: &SweepConfig) -> Result<SweepResult> {
    if cfg.u_grid.is_empty() || cfg.theta_grid.is_empty() {
        return Err(invalid("grid", "u and θ grids must be non-empty"));
    }
    if !(0.0..=1.0).contains(&cfg.eta) {
        return Err(invalid("eta", "must lie in [0, 1]"));
    }
    let points: Vec<(f64, f64)> =
        cfg.u_grid.iter().flat_map(|&u| cfg.theta_grid.iter().map(move |&t| (u, t))).collect();
    let mut cells = run_cells(cfg, &points);
    let mut best = best_of(&cells).ok_or_else(|| Error::Numerical { step: 0, reason: "every grid cell failed".into() })?;

    let mut du = spacing(&cfg.u_grid, best.u);
    let mut dt = spacing(&cfg.theta_grid, best.theta);
    for _ in 0..cfg.refine_stages {
        du /= 4.0;
        dt /= 4.0;
        let mut pts = Vec::new();
        for i in -1i32..=1 {
            for j in -1i32..=1 {
                if i == 0 && j == 0 {
                    continue;
                }
                let u = best.u + du * i as f64;
                let t = best.theta + dt * j as f64;
                if (du > 0.0 || i == 0) && (dt > 0.0 || j == 0) && u.abs() < std::f64::consts::FRAC_PI_4 && t > 0.0 {
                    pts.push((u, t));
                }
            }
        }
        pts.dedup();
        if pts.is_empty() {
            break;
        }
        let refined = run_cells(cfg, &pts);
        cells.extend(refined);
        best = best_of(&cells).expect("at least the previous best");
    }
    Ok(SweepResult { cells, best })
}

/// Quadrature spread `ΔX_{π/2}` predicted by the moment equations at the
/// coherence-limited optimum `sin 2u = η`.
pub fn moment_optimum(eta: f64) -> f64 {
    (1.0 - eta * eta).powf(0.25) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::integrate_lindblad;
    use crate::linalg::{hermitian_eigenvalues, max_abs};
    use crate::observables::quad_stats;
    use crate::scalar::cplx;
    use std::f64::consts::PI;

    #[test]
    fn decay_examples() {
        let id = decay_kraus::<f64>(0.0, 8).unwrap();
        let one = DensityMatrix::<f64>::fock(1, 9).unwrap();
        assert!(max_abs(&(id.apply(&one).unwrap().matrix() - one.matrix())) < 1e-16);

        let d = decay_kraus::<f64>(0.002, 8).unwrap();
        let out = d.apply(&one).unwrap();
        let n = out.expect(&number::<f64>(8)).re;
        assert!((n - (1.0 - 0.001f64).powi(2)).abs() < 1e-12);
        assert!((n - 0.998).abs() < 1e-5);

        let vac = DensityMatrix::<f64>::vacuum(9);
        assert!(max_abs(&(d.apply(&vac).unwrap().matrix() - vac.matrix())) < 1e-16);
        assert!(d.completeness_defect() > 0.0);
        let c = d.completeness() - CMatrix::<f64>::identity(9, 9);
        assert!(max_abs(&c) <= d.completeness_defect() + 1e-15);
        assert!(decay_kraus::<f64>(0.05, 8).is_err());
        assert!(decay_kraus::<f64>(-0.01, 8).is_err());
    }

    #[test]
    fn dephased_pair_examples() {
        let (b0, b1) = (cplx(0.8, 0.0), cplx(0.0, 0.6));
        let pure = dephased_pair::<f64>(b0, b1, 1.0).unwrap();
        assert!((pure.purity() - 1.0).abs() < 1e-14);
        let mixed = dephased_pair(b0, b1, 0.0).unwrap();
        assert!(mixed[(0, 3)].norm() == 0.0 && (mixed.purity() - 0.64f64.powi(2) - 0.36f64.powi(2)).abs() < 1e-14);
        let h = 0.5f64.sqrt();
        let half = dephased_pair(cplx(h, 0.0), cplx(h, 0.0), 0.5).unwrap();
        let ev = hermitian_eigenvalues(half.matrix());
        assert!((ev[3] - 0.75).abs() < 1e-14 && (ev[2] - 0.25).abs() < 1e-14);
        assert!(dephased_pair(cplx(1.0, 0.0), cplx(0.1, 0.0), 0.5).is_err());
    }

    #[test]
    fn moment_examples() {
        let (a, b) = moment_steady(0.0, 0.7).unwrap();
        assert!((a - 0.25).abs() < 1e-15 && (b - 0.25).abs() < 1e-15);
        let eta = 0.995f64;
        let u = eta.asin() / 2.0;
        let (_, x2) = moment_steady(u, eta).unwrap();
        assert!((x2.sqrt() - moment_optimum(eta)).abs() < 1e-12);
        assert!((moment_optimum(eta) - 0.1580).abs() < 5e-5);
        let (a, b) = moment_steady(0.5, 0.0).unwrap();
        assert_eq!(a, b);
        assert!(a >= 0.25);
        assert!(matches!(moment_steady(PI / 4.0, 1.0), Err(Error::Divergent(_))));
    }

    #[test]
    fn mixed_pair_kraus_is_complete() {
        let map = imperfect_pair_kraus(PI / 5.0, 0.9, PI / 20.0, 20).unwrap();
        assert_eq!(map.ops().len(), 8);
        assert!(map.completeness_defect() < 1e-10);
    }

    fn steady_dx(u: f64, eta: f64, theta: f64, decay: Option<f64>, n_max: usize) -> f64 {
        let map = imperfect_pair_kraus(u, eta, theta, n_max).unwrap();
        let opts = RunOptions { n_max, max_steps: 40_000, tol: 1e-9, decay };
        let run = simulate_with_map(&map, &opts).unwrap();
        assert!(run.converged);
        run.trajectory.last().unwrap().delta_at(PI / 2.0)
    }

    #[test]
    fn simulation_approaches_moment_prediction_for_small_theta() {
        let (u, eta) = (PI / 8.0, 0.9);
        let want = moment_steady(u, eta).unwrap().1.sqrt();
        let a = steady_dx(u, eta, PI / 30.0, None, 30);
        let b = steady_dx(u, eta, PI / 60.0, None, 30);
        assert!((a - b).abs() / b < 0.01, "{a} vs {b}");
        assert!((b - want).abs() / want < 0.01, "{b} vs {want}");
    }

    #[test]
    fn phase_flip_mixture_agrees_with_kraus_model() {
        let (u, eta, theta, n_max) = (PI / 8.0, 0.9, PI / 40.0, 30);
        let model = phase_flip_lindblad(u, eta, theta, n_max).unwrap();
        let mut rho = DensityMatrix::vacuum(n_max + 1);
        for _ in 0..30 {
            rho = integrate_lindblad(&model, &rho, 200.0, model.default_dt()).unwrap();
        }
        let lind = quad_stats(&rho).unwrap().delta_at(PI / 2.0);
        let kraus = steady_dx(u, eta, theta, None, n_max);
        assert!((lind - kraus).abs() / kraus < 0.02, "{lind} vs {kraus}");
    }

    #[test]
    fn decay_raises_spread_monotonically() {
        let (u, theta, n_max) = (PI / 8.0, PI / 20.0, 30);
        let mut last = 0.0;
        for g in [None, Some(0.001), Some(0.004), Some(0.016)] {
            let dx = steady_dx(u, 1.0, theta, g, n_max);
            assert!(dx > last, "{dx} after {last}");
            last = dx;
        }
    }

    #[test]
    fn sweep_validation_and_ideal_limit() {
        let mut cfg = SweepConfig {
            eta: 1.0,
            omega_over_gamma: None,
            u_grid: vec![],
            theta_grid: vec![PI / 10.0],
            n_max: 30,
            max_steps: 20_000,
            tol: 1e-9,
            refine_stages: 0,
            workers: Some(1),
        };
        assert!(optimize_squeezing(&cfg).is_err());
        cfg.u_grid = vec![0.1, 0.2, 0.3];
        let res = optimize_squeezing(&cfg).unwrap();
        assert_eq!(res.cells.len(), 3);
        assert_eq!(res.best.u, 0.3);
        let r = 0.3f64.tan().atanh();
        // finite θ shifts the discrete steady state off the ideal dark state at O(θ²)
        let ideal = (-r).exp() / 2.0;
        assert!((res.best.delta_x_pi2 - ideal).abs() < 0.01 * ideal, "{:?} {ideal}", res.best);
        let csv = res.to_csv(&cfg);
        assert!(csv.lines().nth(2).unwrap() == "u,theta,delta_x_pi2,r_eff_db,converged,tail_mass");
        assert_eq!(csv.lines().count(), 6);
    }

    #[test]
    fn refinement_adds_cells_around_best() {
        let cfg = SweepConfig {
            eta: 0.9,
            omega_over_gamma: None,
            u_grid: vec![0.2, 0.4],
            theta_grid: vec![PI / 10.0, PI / 8.0],
            n_max: 25,
            max_steps: 20_000,
            tol: 1e-8,
            refine_stages: 1,
            workers: None,
        };
        let res = optimize_squeezing(&cfg).unwrap();
        assert!(res.cells.len() > 4);
        assert!(res.cells.iter().all(|c| !c.failed));
        let grid_best = res.cells[..4].iter().map(|c| c.delta_x_pi2).fold(f64::INFINITY, f64::min);
        assert!(res.best.delta_x_pi2 <= grid_best);
    }

    #[test]
    fn config_validation() {
        assert!(ImperfectionConfig::new(1.1, None, 0.1, 0.1).is_err());
        assert!(ImperfectionConfig::new(0.9, Some(0.0), 0.1, 0.1).is_err());
        let c = ImperfectionConfig::new(0.995, Some(1000.0 * PI), PI / 28.0, PI / 4.3).unwrap();
        assert!((c.decay_per_pair().unwrap() - 4.0 * PI / 28.0 / (1000.0 * PI)).abs() < 1e-18);
    }
}
