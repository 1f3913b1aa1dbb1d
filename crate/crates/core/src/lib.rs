//! Discrete-time reservoir engineering of a harmonic oscillator.
//!
//! An oscillator is kicked by resonant qubits, either in entangled pairs or
//! as a continuously entangled stream, and relaxes to a squeezed steady state.
//! All numerics are generic over [`Real`]; the `*64` / `*32` aliases fix the
//! precision.

// `!(x > 0)` is deliberate: NaN must fail the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channels;
pub mod cli;
pub mod density;
pub mod error;
pub mod fock;
pub mod imperfections;
pub mod linalg;
pub mod observables;
pub mod pair;
pub mod scalar;
pub mod stream;

pub use channels::{
    apply_channel, fixed_point, integrate_lindblad, iterate_to_fixed_point, kraus_from_dilation,
    resonant_propagator, FixedPoint, KrausMap, LindbladModel,
};
pub use density::DensityMatrix;
pub use error::{Error, Result};
pub use fock::{ResonantBlocks, SqueezeTarget};
pub use imperfections::{optimize_squeezing, ImperfectionConfig, SweepConfig, SweepResult};
pub use observables::{quad_stats, wigner, GridSpec, QuadratureStats, WignerGrid};
pub use pair::{pair_kraus, simulate_pair_reservoir, tune, PairRun, PairState, PairTuning, RunOptions};
pub use scalar::{CMatrix, Real};
pub use stream::{
    perturbative_steady, reduced_steady, stream_kraus, JointState, ReducedStreamState, StreamSteadyPrediction,
};

pub type Complex64 = num_complex::Complex<f64>;
pub type CMatrix64 = CMatrix<f64>;
pub type CMatrix32 = CMatrix<f32>;
pub type DensityMatrix64 = DensityMatrix<f64>;
pub type DensityMatrix32 = DensityMatrix<f32>;
pub type KrausMap64 = KrausMap<f64>;
pub type KrausMap32 = KrausMap<f32>;
pub type PairState64 = PairState<f64>;
pub type PairTuning64 = PairTuning<f64>;
pub type SqueezeTarget64 = SqueezeTarget<f64>;
pub type ReducedStreamState64 = ReducedStreamState<f64>;
