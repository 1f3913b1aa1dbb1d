//! Summary tables and CSV writers.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::params::Params;
use super::CliError;
use crate::observables::{format_sig, QuadratureStats};

/// One row of the steady-state table.
///
/// Columns live in the table frame, which is the computational frame rotated
/// by a quarter turn: `X_φ(table) = X_{φ−π/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow {
    pub x0: f64,
    pub xpi2: f64,
    pub phi_r: f64,
    /// Spread along `φ_r/2`, the anti-squeezed axis.
    pub d_major: f64,
    /// Spread along `(φ_r+π)/2`.
    pub d_minor: f64,
    pub kappa: Option<f64>,
    pub db: f64,
}

impl TableRow {
    pub fn from_stats(s: &QuadratureStats, kappa: Option<f64>) -> Self {
        Self {
            x0: -s.mean_xpi2,
            xpi2: s.mean_x0,
            phi_r: (2.0 * s.phi_min).rem_euclid(2.0 * PI),
            d_major: s.delta_max,
            d_minor: s.delta_min,
            kappa,
            db: s.r_eff_db,
        }
    }
}

/// Renders an angle as a multiple of `π/2` when it is one.
pub fn angle_label(x: f64) -> String {
    let q = x / (PI / 2.0);
    let k = q.round();
    if (q - k).abs() > 1e-6 {
        return format!("{x:.4}");
    }
    match k as i64 {
        0 => "0".into(),
        1 => "pi/2".into(),
        2 => "pi".into(),
        3 => "3pi/2".into(),
        4 => "2pi".into(),
        n if n % 2 == 0 => format!("{}pi", n / 2),
        n => format!("{n}pi/2"),
    }
}

/// Drops signs that only survive as `-0.000` after rounding.
fn clean(x: f64) -> f64 {
    if x.abs() < 5e-4 {
        0.0
    } else {
        x
    }
}

pub fn steady_table(theory: Option<&TableRow>, sim: &TableRow) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<11}{:>10}{:>10}{:>9}{:>14}{:>18}{:>10}{:>11}",
        "", "<X_0>", "<X_pi/2>", "phi_r", "dX(phi_r/2)", "dX((phi_r+pi)/2)", "kappa", "r_eff(dB)"
    );
    let mut row = |name: &str, r: &TableRow| {
        let kappa = r.kappa.map_or_else(|| "-".to_string(), |k| format!("{k:.4}"));
        let _ = writeln!(
            out,
            "{:<11}{:>10.3}{:>10.3}{:>9}{:>14.3}{:>18.3}{:>10}{:>11.2}",
            name,
            clean(r.x0),
            clean(r.xpi2),
            angle_label(r.phi_r),
            r.d_major,
            r.d_minor,
            kappa,
            r.db
        );
    };
    if let Some(t) = theory {
        row("theory", t);
    }
    row("simulation", sim);
    out
}

/// `# key=value` lines recording every input parameter.
pub fn param_header(mode: &str, params: &Params) -> String {
    let mut out = format!("# mode={mode}\n");
    for (k, v) in params.entries() {
        let _ = writeln!(out, "# {k}={v}");
    }
    out
}

pub fn trajectory_csv(header: &str, traj: &[QuadratureStats]) -> String {
    let mut out = String::from(header);
    out.push_str("# frame: X_phi = (a e^{i phi} + a^dag e^{-i phi})/2\n");
    out.push_str("step,mean_x0,mean_xpi2,delta_min,delta_max,phi_min,r_eff_db,purity\n");
    for (k, s) in traj.iter().enumerate() {
        let _ = writeln!(
            out,
            "{k},{},{},{},{},{},{},{}",
            format_sig(s.mean_x0),
            format_sig(s.mean_xpi2),
            format_sig(s.delta_min),
            format_sig(s.delta_max),
            format_sig(s.phi_min),
            format_sig(s.r_eff_db),
            format_sig(s.purity)
        );
    }
    out
}

pub fn write_file(dir: &Path, name: &str, content: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(mean_x0: f64, mean_xpi2: f64, phi_min: f64) -> QuadratureStats {
        QuadratureStats {
            mean_x0,
            mean_xpi2,
            var_matrix: [[0.0; 2]; 2],
            delta_min: 0.258,
            delta_max: 0.97,
            phi_min,
            r_eff_db: 5.75,
            purity: 1.0,
            uncertainty_product: 0.25,
        }
    }

    #[test]
    fn table_frame_mapping() {
        // α = 1.589 + 0.921i has ⟨X_{π/2}⟩ = −0.921 and reads (0.921, 1.589)
        let r = TableRow::from_stats(&stats(1.589, -0.921, 3.0 * PI / 4.0), None);
        assert_eq!((r.x0, r.xpi2), (0.921, 1.589));
        assert!((r.phi_r - 3.0 * PI / 2.0).abs() < 1e-12);
        let r = TableRow::from_stats(&stats(0.0, 0.0, PI / 2.0), None);
        assert_eq!(angle_label(r.phi_r), "pi");
    }

    #[test]
    fn labels() {
        assert_eq!(angle_label(0.0), "0");
        assert_eq!(angle_label(PI / 2.0), "pi/2");
        assert_eq!(angle_label(1.5 * PI), "3pi/2");
        assert_eq!(angle_label(0.3), "0.3000");
    }

    #[test]
    fn table_layout() {
        let sim = TableRow::from_stats(&stats(0.0, 0.0, PI / 2.0), None);
        let t = steady_table(Some(&TableRow { kappa: Some(0.0247), ..sim }), &sim);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("theory") && lines[1].contains("0.0247"));
        assert!(lines[2].starts_with("simulation") && lines[2].contains(" 0.970") && lines[2].contains("5.75"));
        assert!(!t.contains("-0.000"));
    }
}
