//! One function per subcommand: validate, compute, write files.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use num_complex::Complex;
use rayon::prelude::*;

use super::output::{param_header, steady_table, trajectory_csv, write_file, TableRow};
use super::params::Params;
use super::{CliError, Common, Outcome};
use crate::channels::KrausMap;
use crate::density::{DensityMatrix, TAIL_MASS_LIMIT};
use crate::fock::SqueezeTarget;
use crate::imperfections::{imperfect_pair_kraus, optimize_squeezing, ImperfectionConfig, SweepConfig};
use crate::observables::{format_sig, quad_stats, r_eff_db, wigner as wigner_grid, GridSpec, QuadratureStats};
use crate::pair::{
    distance_trajectory, fit_decay_rate, pair_kraus, pair_state_from_tuning, run_reservoir, simulate_with_map, tune,
    PairTuning, RunOptions,
};
use crate::stream::{
    find_optimal_phi, mps_coefficients, perturbative_steady, simulate_stream, stream_kraus, StreamSteadyPrediction,
};

fn theory_row(target: &SqueezeTarget<f64>, kappa: f64) -> TableRow {
    let r = target.r;
    let axis = if r >= 0.0 { target.phi_r / 2.0 } else { (target.phi_r + PI) / 2.0 };
    let minor = (-r.abs()).exp() / 2.0;
    TableRow {
        x0: target.alpha.im,
        xpi2: target.alpha.re,
        phi_r: (2.0 * axis).rem_euclid(2.0 * PI),
        d_major: r.abs().exp() / 2.0,
        d_minor: minor,
        kappa: Some(kappa),
        db: r_eff_db(minor),
    }
}

fn run_flags(converged: bool, tail_flag: bool, tail_mass: f64, steps: usize) -> Vec<String> {
    let mut w = Vec::new();
    if !converged {
        w.push(format!("no convergence within {steps} steps"));
    }
    if tail_flag {
        w.push(format!("Fock tail mass exceeded {TAIL_MASS_LIMIT:e} during the run (final {tail_mass:.3e})"));
    }
    w
}

fn status_lines(out: &mut String, steps: usize, converged: bool, tail_mass: f64, warnings: &[String]) {
    let _ = writeln!(out, "steps: {steps}");
    let _ = writeln!(out, "converged: {converged}");
    let _ = writeln!(out, "tail_mass: {}", format_sig(tail_mass));
    for w in warnings {
        let _ = writeln!(out, "warning: {w}");
    }
}

pub fn pair_steady(p: &Params, common: &Common) -> Result<Outcome, CliError> {
    let theta = p.angle("theta", Some(PI / 20.0))?;
    let u = p.angle("u", None)?;
    let mu = p.angle("mu", Some(0.0))?;
    let epsilon = p.angle("epsilon", Some(0.0))?;
    let chi = p.angle("chi", Some(0.0))?;
    let eta = p.float("eta", Some(1.0))?;
    let ratio = p.opt_float("omega_over_gamma")?;
    let n_max = p.n_max(80)?;
    let max_steps = p.count("steps", 50_000)?;
    let tol = p.float("tol", Some(1e-8))?;
    let fit = p.raw("fit_kappa").is_none() || p.flag("fit_kappa")?;
    if !(tol > 0.0) {
        return Err(CliError::validation("tol: must be positive"));
    }
    let tuning = PairTuning::new(u, mu, epsilon, chi, theta)?;
    let imperfect = ImperfectionConfig::new(eta, ratio, theta, u)?;
    let map: KrausMap<f64> = if eta < 1.0 {
        if mu != 0.0 || epsilon != 0.0 {
            return Err(CliError::validation("eta: dephased pairs are only modelled for mu = epsilon = 0"));
        }
        imperfect_pair_kraus(u, eta, theta, n_max)?
    } else {
        pair_kraus(&pair_state_from_tuning(&tuning), theta, n_max)?
    };
    let opts = RunOptions { n_max, max_steps, tol, decay: imperfect.decay_per_pair() };
    let run = simulate_with_map(&map, &opts)?;
    let last = *run.trajectory.last().expect("trajectory starts with the vacuum");

    let kappa_sim = if fit && run.converged {
        let d = distance_trajectory(&map, &opts, &run.state, 1e-9)?;
        fit_decay_rate(&d, 1e-7, 1e-2)
    } else {
        None
    };
    let target = tuning.theory_target()?;
    let warnings = run_flags(run.converged, run.tail_flag, run.tail_mass, run.steps);

    let mut report = String::from("pair-steady\n");
    report.push_str(&steady_table(Some(&theory_row(&target, tuning.kappa())), &TableRow::from_stats(&last, kappa_sim)));
    let _ = writeln!(report, "frame: table columns use X_phi(table) = X_(phi - pi/2)");
    let _ = writeln!(report, "uncertainty_product: {:.6}", last.uncertainty_product);
    let _ = writeln!(report, "purity: {:.6}", last.purity);
    status_lines(&mut report, run.steps, run.converged, run.tail_mass, &warnings);

    let header = param_header("pair-steady", p);
    let mut files = vec![write_file(&common.out, "summary.txt", &format!("{header}{report}"))?];
    let traj_header = format!(
        "{header}# n_max={n_max}\n# tol={}\n# tail_mass={}\n",
        format_sig(tol),
        format_sig(run.tail_mass)
    );
    files.push(write_file(&common.out, "trajectory.csv", &trajectory_csv(&traj_header, &run.trajectory))?);
    if p.flag("wigner")? {
        let spec = GridSpec::square(p.float("half_width", Some(4.0))?, p.count("resolution", 81)?);
        let grid = wigner_grid(&run.state, spec)?;
        files.push(write_file(&common.out, "wigner.csv", &format!("{header}{}", grid.to_csv()))?);
    }
    Ok(Outcome { files, report, warnings })
}

pub fn pair_tune(p: &Params, common: &Common) -> Result<Outcome, CliError> {
    let alpha = Complex::new(p.float("alpha_re", Some(0.0))?, p.float("alpha_im", Some(0.0))?);
    let r = p.float("r", None)?;
    let phi_r = p.angle("phi_r", Some(0.0))?;
    let theta = p.angle("theta", Some(PI / 20.0))?;
    let target = SqueezeTarget::new(alpha, r, phi_r)?;
    let rep = tune(&target, theta)?;
    let t = rep.tuning;
    let mut report = String::from("pair-tune\n");
    let _ = writeln!(report, "u: {}", format_sig(t.u));
    let _ = writeln!(report, "mu: {}", format_sig(t.mu));
    let _ = writeln!(report, "epsilon: {}", format_sig(t.epsilon));
    let _ = writeln!(report, "chi: {}", format_sig(t.chi));
    let _ = writeln!(report, "kappa: {}", format_sig(rep.kappa));
    for (name, b) in ["gg", "ge", "eg", "ee"].iter().zip(rep.pair.amplitudes()) {
        let _ = writeln!(report, "beta_{name}: {} {:+}i", format_sig(b.re), format_sig(b.im));
    }
    report.push_str(&steady_table(None, &theory_row(&target, rep.kappa)).replacen("simulation", "theory    ", 1));
    let header = param_header("pair-tune", p);
    let files = vec![write_file(&common.out, "summary.txt", &format!("{header}{report}"))?];
    Ok(Outcome { files, report, warnings: Vec::new() })
}

pub fn imperfect_sweep(p: &Params, common: &Common) -> Result<Outcome, CliError> {
    let cfg = SweepConfig {
        eta: p.float("eta", Some(0.995))?,
        omega_over_gamma: p.opt_float("omega_over_gamma")?,
        u_grid: p.grid("u_grid")?,
        theta_grid: p.grid("theta_grid")?,
        n_max: p.n_max(80)?,
        max_steps: p.count("steps", 200_000)?,
        tol: p.float("tol", Some(1e-8))?,
        refine_stages: p.count("refine", 0)?,
        workers: common.workers,
    };
    if !(cfg.tol > 0.0) {
        return Err(CliError::validation("tol: must be positive"));
    }
    if let Some(&bad) = cfg.u_grid.iter().find(|u| !(u.abs() < std::f64::consts::FRAC_PI_4)) {
        return Err(CliError::validation(format!("u_grid: |u| must be < pi/4, got {bad}")));
    }
    if let Some(&bad) = cfg.theta_grid.iter().find(|t| !(**t > 0.0)) {
        return Err(CliError::validation(format!("theta_grid: values must be positive, got {bad}")));
    }
    let res = optimize_squeezing(&cfg)?;
    let failed = res.cells.iter().filter(|c| c.failed).count();
    let stalled = res.cells.iter().filter(|c| !c.failed && !c.converged).count();
    let heavy = res.cells.iter().filter(|c| !c.failed && c.tail_mass > TAIL_MASS_LIMIT).count();
    let mut warnings = Vec::new();
    if failed > 0 {
        warnings.push(format!("{failed} cell(s) failed"));
    }
    if stalled > 0 {
        warnings.push(format!("{stalled} cell(s) did not converge"));
    }
    if heavy > 0 {
        warnings.push(format!("{heavy} cell(s) exceed the tail-mass limit"));
    }
    let b = res.best;
    let mut report = String::from("imperfect-sweep\n");
    let _ = writeln!(report, "cells: {}", res.cells.len());
    let _ = writeln!(report, "best_u: {} (pi/{:.3})", format_sig(b.u), PI / b.u);
    let _ = writeln!(report, "best_theta: {} (pi/{:.3})", format_sig(b.theta), PI / b.theta);
    let _ = writeln!(report, "best_delta_x_pi2: {}", format_sig(b.delta_x_pi2));
    let _ = writeln!(report, "best_r_eff_db: {}", format_sig(b.r_eff_db));
    let _ = writeln!(report, "best_tail_mass: {}", format_sig(b.tail_mass));
    for w in &warnings {
        let _ = writeln!(report, "warning: {w}");
    }
    let header = param_header("imperfect-sweep", p);
    let files = vec![
        write_file(&common.out, "summary.txt", &format!("{header}{report}"))?,
        write_file(&common.out, "sweep.csv", &format!("{header}{}", res.to_csv(&cfg)))?,
    ];
    Ok(Outcome { files, report, warnings })
}

fn prediction_lines(out: &mut String, pred: &StreamSteadyPrediction) {
    let _ = writeln!(out, "formula_x0_mean: {}", format_sig(pred.x0_mean));
    let _ = writeln!(out, "formula_xpi2_mean: {}", format_sig(pred.xpi2_mean));
    let _ = writeln!(out, "formula_delta_xpi2: {}", format_sig(pred.delta_xpi2));
}

pub fn stream_steady(p: &Params, common: &Common) -> Result<Outcome, CliError> {
    let phi = p.angle("phi", None)?;
    let theta = p.angle("theta", Some(PI / 40.0))?;
    let n_max = p.n_max(40)?;
    let max_steps = p.count("steps", 200_000)?;
    let tol = p.float("tol", Some(1e-9))?;
    let joint = p.flag("joint")?;
    if !(tol > 0.0) {
        return Err(CliError::validation("tol: must be positive"));
    }
    let (traj, steps, converged, tail_mass, tail_flag) = if joint {
        let map = stream_kraus(phi, theta, n_max)?;
        let rho0 = DensityMatrix::fock(0, 2)?.tensor(&DensityMatrix::vacuum(n_max + 1));
        let opts = RunOptions { n_max, max_steps, tol, decay: None };
        let run = run_reservoir(rho0, &opts, |s| Ok(map.apply(s)?.renormalized()))?;
        (run.trajectory, run.steps, run.converged, run.tail_mass, run.tail_flag)
    } else {
        let run = simulate_stream(phi, theta, n_max, max_steps, tol)?;
        (run.trajectory, run.steps, run.converged, run.tail_mass, run.tail_flag)
    };
    let last = *traj.last().expect("trajectory starts with the ground state");
    let warnings = run_flags(converged, tail_flag, tail_mass, steps);

    let mut report = String::from("stream-steady\n");
    let _ = writeln!(report, "path: {}", if joint { "joint (oscillator marginal)" } else { "reduced (rho_D)" });
    let _ = writeln!(report, "sim_x0_mean: {}", format_sig(last.mean_x0));
    let _ = writeln!(report, "sim_xpi2_mean: {}", format_sig(last.mean_xpi2));
    let sim_dx = last.delta_at(FRAC_PI_2);
    let _ = writeln!(report, "sim_delta_xpi2: {}", format_sig(sim_dx));
    let _ = writeln!(report, "sim_r_eff_db: {}", format_sig(last.r_eff_db));
    match perturbative_steady(phi, theta) {
        Ok(pred) => {
            prediction_lines(&mut report, &pred);
            let _ = writeln!(report, "gap_delta_xpi2: {}", format_sig(sim_dx - pred.delta_xpi2));
        }
        Err(e) => {
            let _ = writeln!(report, "formula: {e}");
        }
    }
    status_lines(&mut report, steps, converged, tail_mass, &warnings);
    let header = param_header("stream-steady", p);
    let traj_header = format!("{header}# n_max={n_max}\n# tol={}\n# tail_mass={}\n", format_sig(tol), format_sig(tail_mass));
    let files = vec![
        write_file(&common.out, "summary.txt", &format!("{header}{report}"))?,
        write_file(&common.out, "trajectory.csv", &trajectory_csv(&traj_header, &traj))?,
    ];
    Ok(Outcome { files, report, warnings })
}

struct FormulaPoint {
    phi: f64,
    pred: Result<StreamSteadyPrediction, String>,
    sim: Option<Result<(QuadratureStats, bool, f64), String>>,
}

pub fn stream_formula(p: &Params, common: &Common) -> Result<Outcome, CliError> {
    let phis = match (p.raw("phi"), p.raw("phi_grid")) {
        (Some(_), Some(_)) => return Err(CliError::validation("phi, phi_grid: give one, not both")),
        (Some(_), None) => vec![p.angle("phi", None)?],
        (None, Some(_)) => p.grid("phi_grid")?,
        (None, None) => return Err(CliError::validation("phi: required (or phi_grid)")),
    };
    let theta = p.angle("theta", Some(PI / 40.0))?;
    let simulate = p.flag("simulate")?;
    let n_max = p.n_max(40)?;
    let max_steps = p.count("steps", 200_000)?;
    let tol = p.float("tol", Some(1e-9))?;
    if !(tol > 0.0) {
        return Err(CliError::validation("tol: must be positive"));
    }

    let eval = |&phi: &f64| FormulaPoint {
        phi,
        pred: perturbative_steady(phi, theta).map_err(|e| e.to_string()),
        sim: simulate.then(|| {
            simulate_stream(phi, theta, n_max, max_steps, tol)
                .map(|r| (*r.trajectory.last().expect("non-empty"), r.converged, r.tail_mass))
                .map_err(|e| e.to_string())
        }),
    };
    let points: Vec<FormulaPoint> = match (simulate, common.workers) {
        (true, Some(n)) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CliError::validation(format!("workers: {e}")))?
            .install(|| phis.par_iter().map(eval).collect()),
        (true, None) => phis.par_iter().map(eval).collect(),
        (false, _) => phis.iter().map(eval).collect(),
    };

    let mut csv = param_header("stream-formula", p);
    let _ = writeln!(csv, "# theta={}", format_sig(theta));
    if simulate {
        let _ = writeln!(csv, "# n_max={n_max}\n# tol={}", format_sig(tol));
        csv.push_str("phi,delta_xpi2,x0_mean,status,sim_delta_xpi2,sim_x0_mean,sim_converged,sim_tail_mass\n");
    } else {
        csv.push_str("phi,delta_xpi2,x0_mean,status\n");
    }
    let mut warnings = Vec::new();
    for pt in &points {
        let (d, x0, status) = match &pt.pred {
            Ok(pr) => (format_sig(pr.delta_xpi2), format_sig(pr.x0_mean), "ok".to_string()),
            Err(_) => ("inf".into(), "nan".into(), "divergent".into()),
        };
        let _ = write!(csv, "{},{d},{x0},{status}", format_sig(pt.phi));
        match &pt.sim {
            Some(Ok((s, conv, tail))) => {
                if !conv {
                    warnings.push(format!("phi={} did not converge", format_sig(pt.phi)));
                }
                if *tail > TAIL_MASS_LIMIT {
                    warnings.push(format!("phi={} exceeds the tail-mass limit", format_sig(pt.phi)));
                }
                let _ = write!(
                    csv,
                    ",{},{},{conv},{}",
                    format_sig(s.delta_at(FRAC_PI_2)),
                    format_sig(s.mean_x0),
                    format_sig(*tail)
                );
            }
            Some(Err(e)) => {
                warnings.push(format!("phi={} failed: {e}", format_sig(pt.phi)));
                csv.push_str(",nan,nan,failed,nan");
            }
            None => {}
        }
        csv.push('\n');
    }

    let (phi_star, delta_star) = find_optimal_phi();
    let mut report = String::from("stream-formula\n");
    if let [only] = points.as_slice() {
        let _ = writeln!(report, "phi: {}", format_sig(only.phi));
        match &only.pred {
            Ok(pred) => prediction_lines(&mut report, pred),
            Err(e) => {
                let _ = writeln!(report, "formula: {e}");
            }
        }
    } else if let Some(best) = points
        .iter()
        .filter_map(|pt| pt.pred.as_ref().ok().map(|pr| (pt.phi, pr.delta_xpi2)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
    {
        let _ = writeln!(report, "grid_points: {}", points.len());
        let _ = writeln!(report, "grid_min_phi: {}", format_sig(best.0));
        let _ = writeln!(report, "grid_min_delta_xpi2: {}", format_sig(best.1));
    }
    let _ = writeln!(report, "optimal_phi: {}", format_sig(phi_star));
    let _ = writeln!(report, "optimal_delta_xpi2: {}", format_sig(delta_star));
    let _ = writeln!(report, "optimal_r_eff_db: {}", format_sig(r_eff_db(delta_star)));
    for w in &warnings {
        let _ = writeln!(report, "warning: {w}");
    }
    let header = param_header("stream-formula", p);
    let files = vec![
        write_file(&common.out, "summary.txt", &format!("{header}{report}"))?,
        write_file(&common.out, "stream_formula.csv", &csv)?,
    ];
    Ok(Outcome { files, report, warnings })
}

pub fn wigner(p: &Params, common: &Common) -> Result<Outcome, CliError> {
    let n_max = p.n_max(40)?;
    let kind = p.raw("state").unwrap_or("vacuum").to_ascii_lowercase();
    let rho = match kind.as_str() {
        "vacuum" => DensityMatrix::<f64>::vacuum(n_max + 1),
        "fock" => {
            let n = p.count("n", 0)?;
            if n > n_max {
                return Err(CliError::validation(format!("n: must not exceed n_max = {n_max}")));
            }
            DensityMatrix::fock(n, n_max + 1)?
        }
        "squeezed" | "coherent" => {
            let alpha = Complex::new(p.float("alpha_re", Some(0.0))?, p.float("alpha_im", Some(0.0))?);
            let target = SqueezeTarget::new(alpha, p.float("r", Some(0.0))?, p.angle("phi_r", Some(0.0))?)?;
            DensityMatrix::from_ket(&target.ket(n_max)?)?.renormalized()
        }
        other => return Err(CliError::validation(format!("state: unknown kind `{other}` (vacuum, fock, squeezed)"))),
    };
    let spec = GridSpec::square(p.float("half_width", Some(3.0))?, p.count("resolution", 81)?);
    let grid = wigner_grid(&rho, spec)?;
    let stats = quad_stats(&rho)?;
    let mut report = String::from("wigner\n");
    let _ = writeln!(report, "state: {kind}");
    let _ = writeln!(report, "integral: {}", format_sig(grid.integral()));
    let _ = writeln!(report, "w_min: {}", format_sig(grid.values.min()));
    let _ = writeln!(report, "w_max: {}", format_sig(grid.values.max()));
    let _ = writeln!(report, "delta_min: {}", format_sig(stats.delta_min));
    let _ = writeln!(report, "tail_mass: {}", format_sig(grid.tail_mass));
    let mut warnings = Vec::new();
    if grid.tail_mass > TAIL_MASS_LIMIT {
        warnings.push(format!("tail mass {:.3e} exceeds the truncation limit", grid.tail_mass));
    }
    let header = param_header("wigner", p);
    let files = vec![
        write_file(&common.out, "summary.txt", &format!("{header}{report}"))?,
        write_file(&common.out, "wigner.csv", &format!("{header}{}", grid.to_csv()))?,
    ];
    Ok(Outcome { files, report, warnings })
}

fn basis_label(idx: usize, n: usize) -> String {
    (0..n).map(|k| if (idx >> (n - 1 - k)) & 1 == 1 { 'e' } else { 'g' }).collect()
}

pub fn mps_expand(p: &Params, common: &Common) -> Result<Outcome, CliError> {
    let phi = p.angle("phi", Some(0.1))?;
    let n = p.count("n_qubits", 5)?;
    let amp = mps_coefficients(phi, n)?;
    let mut csv = param_header("mps-expand", p);
    csv.push_str("basis,re,im,abs\n");
    for (i, a) in amp.iter().enumerate() {
        let _ = writeln!(csv, "{},{},{},{}", basis_label(i, n), format_sig(a.re), format_sig(a.im), format_sig(a.norm()));
    }
    let mut order: Vec<usize> = (0..amp.len()).filter(|&i| amp[i].norm() > 1e-15).collect();
    order.sort_by(|&a, &b| amp[b].norm().total_cmp(&amp[a].norm()).then(a.cmp(&b)));
    let mut report = String::from("mps-expand\n");
    let _ = writeln!(report, "phi: {}", format_sig(phi));
    let mut level = 0;
    let mut prev = f64::INFINITY;
    for &i in &order {
        let m = amp[i].norm();
        if level == 0 || (prev - m).abs() > 1e-12 {
            level += 1;
            prev = m;
        }
        let _ = writeln!(report, "beta_{level}: {} |amp| = {}", basis_label(i, n), format_sig(m));
    }
    let header = param_header("mps-expand", p);
    let files = vec![
        write_file(&common.out, "summary.txt", &format!("{header}{report}"))?,
        write_file(&common.out, "mps.csv", &csv)?,
    ];
    Ok(Outcome { files, report, warnings: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theory_row_frames() {
        let t = SqueezeTarget::new(Complex::new(1.633, 0.943), -0.658, FRAC_PI_2).unwrap();
        let row = theory_row(&t, 0.025);
        assert_eq!((row.x0, row.xpi2), (0.943, 1.633));
        assert!((row.phi_r - 1.5 * PI).abs() < 1e-12);
        assert!((row.d_major - 0.9655).abs() < 1e-3 && (row.d_minor - 0.2589).abs() < 1e-3);
        let t = SqueezeTarget::new(Complex::new(0.0, 0.0), -0.658, 0.0).unwrap();
        assert!((theory_row(&t, 0.0).phi_r - PI).abs() < 1e-12);
    }

    #[test]
    fn labels() {
        assert_eq!(basis_label(0b00011, 5), "gggee");
        assert_eq!(basis_label(0b10100, 5), "egegg");
    }
}
