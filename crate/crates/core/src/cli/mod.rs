//! Scenario runner behind the `qres` binary.
//!
//! Each subcommand reads a flat `key = value` config (optional) and lets
//! command-line flags override it. Exit status: 0 success, 1 invalid input,
//! 2 numerical failure (or, with `--strict`, a non-converged run or a
//! truncation-tail breach).

mod modes;
pub mod output;
pub mod params;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use params::Params;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error on {path}: {reason}")]
    Io { path: PathBuf, reason: String },
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        Self::Validation(msg.into())
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), reason: e.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Numerical(_) => EXIT_NUMERICAL,
            _ => EXIT_INVALID,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Truncation { .. } | Error::InvalidParameter { .. } | Error::DimensionMismatch { .. } => {
                Self::Validation(e.to_string())
            }
            _ => Self::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qres", version, about = "Discrete-time reservoir engineering of an oscillator driven by entangled qubits")]
pub struct Cli {
    #[command(subcommand)]
    pub mode: Mode,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Flat `key = value` file; flags given on the command line win.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Exit with status 2 when a run fails to converge or its Fock tail is too heavy.
    #[arg(long)]
    pub strict: bool,
    /// Worker threads for sweeps (default: available parallelism).
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
}

macro_rules! mode_args {
    ($(#[$doc:meta])* $name:ident { $($(#[$fdoc:meta])* $field:ident),* $(,)? }) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Args)]
        pub struct $name {
            #[command(flatten)]
            pub common: Common,
            $(
                $(#[$fdoc])*
                #[arg(long, value_name = "VALUE", allow_hyphen_values = true)]
                pub $field: Option<String>,
            )*
        }

        impl $name {
            pub const KEYS: &'static [&'static str] = &[$(stringify!($field)),*];

            fn params(&self) -> Result<Params, CliError> {
                let mut p = match &self.common.config {
                    Some(path) => Params::from_config_file(path, Self::KEYS)?,
                    None => Params::default(),
                };
                $(
                    if let Some(v) = &self.$field {
                        p.set(stringify!($field), v);
                    }
                )*
                Ok(p)
            }
        }
    };
}

mode_args!(
    /// Steady state of the entangled-pair reservoir.
    PairSteady {
        /// Coupling angle per qubit (default pi/20).
        theta,
        /// Squeezing angle of the pair, |u| < pi/4.
        u,
        /// Phase of the |ee> amplitude (default 0).
        mu,
        /// Weight of the |ge>+|eg> component (default 0).
        epsilon,
        /// Phase of the |ge>+|eg> component (default 0).
        chi,
        /// Pair purity; below 1 uses the dephased pair (needs mu = epsilon = 0).
        eta,
        /// Ratio Omega/gamma setting the oscillator decay per pair (default: no decay).
        omega_over_gamma,
        /// Fock truncation (default 80).
        n_max,
        /// Maximum number of pairs (default 50000).
        steps,
        /// Trace-norm convergence threshold (default 1e-8).
        tol,
        /// Fit the convergence rate from a second run (default true).
        fit_kappa,
        /// Also write the steady-state Wigner grid (default false).
        wigner,
        /// Half width of the Wigner grid (default 4).
        half_width,
        /// Points per Wigner axis (default 81).
        resolution,
    }
);

mode_args!(
    /// Pair settings that stabilize a chosen displaced squeezed state.
    PairTune {
        /// Target displacement, real part (default 0).
        alpha_re,
        /// Target displacement, imaginary part (default 0).
        alpha_im,
        /// Target squeezing parameter.
        r,
        /// Target squeezing phase (default 0).
        phi_r,
        /// Coupling angle per qubit (default pi/20).
        theta,
    }
);

mode_args!(
    /// Grid search over (u, theta) with dephased pairs and oscillator decay.
    ImperfectSweep {
        /// Pair purity (default 0.995).
        eta,
        /// Ratio Omega/gamma (default: no decay).
        omega_over_gamma,
        /// Values of u: `a,b,c` or `start:stop:step`.
        u_grid,
        /// Values of theta, same syntax.
        theta_grid,
        /// Fock truncation (default 80).
        n_max,
        /// Maximum pairs per cell (default 200000).
        steps,
        /// Trace-norm convergence threshold (default 1e-8).
        tol,
        /// Factor-4 refinement stages around the best cell (default 0).
        refine,
    }
);

mode_args!(
    /// Steady state of the continuously entangled stream.
    StreamSteady {
        /// Entangler angle.
        phi,
        /// Coupling angle per qubit (default pi/40).
        theta,
        /// Fock truncation (default 40).
        n_max,
        /// Maximum number of qubits (default 200000).
        steps,
        /// Convergence threshold on the reduced pair (default 1e-9).
        tol,
        /// Simulate the full qubit-oscillator state instead of the reduced pair.
        joint,
    }
);

mode_args!(
    /// Small-theta stream formulas, optionally against simulation.
    StreamFormula {
        /// Single entangler angle.
        phi,
        /// Entangler angles: `a,b,c` or `start:stop:step`.
        phi_grid,
        /// Coupling angle used for <X_0> and simulations (default pi/40).
        theta,
        /// Add simulated points (default false).
        simulate,
        /// Fock truncation for simulated points (default 40).
        n_max,
        /// Maximum qubits per simulated point (default 200000).
        steps,
        /// Convergence threshold for simulated points (default 1e-9).
        tol,
    }
);

mode_args!(
    /// Wigner function of a reference state on a square grid.
    Wigner {
        /// vacuum, fock or squeezed (default vacuum).
        state,
        /// Photon number for `state = fock`.
        n,
        /// Displacement, real part (default 0).
        alpha_re,
        /// Displacement, imaginary part (default 0).
        alpha_im,
        /// Squeezing parameter (default 0).
        r,
        /// Squeezing phase (default 0).
        phi_r,
        /// Fock truncation (default 40).
        n_max,
        /// Half width of the grid (default 3).
        half_width,
        /// Points per axis (default 81).
        resolution,
    }
);

mode_args!(
    /// Amplitudes of a finite stream segment after the entangler chain.
    MpsExpand {
        /// Entangler angle (default 0.1).
        phi,
        /// Number of qubits, 2 to 12 (default 5).
        n_qubits,
    }
);

#[derive(Debug, Subcommand)]
pub enum Mode {
    PairSteady(PairSteady),
    PairTune(PairTune),
    ImperfectSweep(ImperfectSweep),
    StreamSteady(StreamSteady),
    StreamFormula(StreamFormula),
    Wigner(Wigner),
    MpsExpand(MpsExpand),
}

/// What a mode produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub report: String,
    /// Convergence or truncation warnings; fatal under `--strict`.
    pub warnings: Vec<String>,
}

pub fn execute(mode: &Mode) -> Result<(Outcome, bool), CliError> {
    let (out, strict) = match mode {
        Mode::PairSteady(a) => (modes::pair_steady(&a.params()?, &a.common)?, a.common.strict),
        Mode::PairTune(a) => (modes::pair_tune(&a.params()?, &a.common)?, a.common.strict),
        Mode::ImperfectSweep(a) => (modes::imperfect_sweep(&a.params()?, &a.common)?, a.common.strict),
        Mode::StreamSteady(a) => (modes::stream_steady(&a.params()?, &a.common)?, a.common.strict),
        Mode::StreamFormula(a) => (modes::stream_formula(&a.params()?, &a.common)?, a.common.strict),
        Mode::Wigner(a) => (modes::wigner(&a.params()?, &a.common)?, a.common.strict),
        Mode::MpsExpand(a) => (modes::mps_expand(&a.params()?, &a.common)?, a.common.strict),
    };
    Ok((out, strict))
}

/// Parses `args` (program name first), runs the mode and returns the exit status.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    run_with_output(args, &mut std::io::stdout().lock())
}

/// Same as [`run`], writing the report to `stdout` instead of the process stdout.
pub fn run_with_output<I, S>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = e.print();
                return EXIT_INVALID;
            }
            let _ = write!(stdout, "{}", e.render());
            return EXIT_OK;
        }
    };
    match execute(&cli.mode) {
        Ok((outcome, strict)) => {
            // a closed pipe on stdout is not a failure of the run
            let _ = stdout.write_all(outcome.report.as_bytes());
            for f in &outcome.files {
                let _ = writeln!(stdout, "wrote {}", f.display());
            }
            if strict && !outcome.warnings.is_empty() {
                EXIT_NUMERICAL
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
