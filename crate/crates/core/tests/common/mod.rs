//! Brute-force constructions shared by the integration targets. Everything
//! here is built from the resonant propagator and plain tensor algebra, never
//! from the production Kraus assemblies it is compared against.

#![allow(dead_code)]

use qres::linalg::{dagger, identity, kron};
use qres::scalar::cplx;
use qres::{resonant_propagator, CMatrix64, DensityMatrix64, PairState64};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Full-rank density matrix from a Ginibre draw.
pub fn random_density(rng: &mut StdRng, dim: usize) -> DensityMatrix64 {
    let g = CMatrix64::from_fn(dim, dim, |_, _| cplx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let m = &g * dagger(&g);
    let tr: f64 = (0..dim).map(|i| m[(i, i)].re).sum();
    DensityMatrix64::new(m / cplx(tr, 0.0)).unwrap()
}

/// Ginibre density matrix whose population sits on the lowest `occupied` levels.
pub fn random_low_density(rng: &mut StdRng, dim: usize, occupied: usize) -> DensityMatrix64 {
    let small = random_density(rng, occupied);
    let mut m = CMatrix64::zeros(dim, dim);
    m.view_mut((0, 0), (occupied, occupied)).copy_from(small.matrix());
    DensityMatrix64::new(m).unwrap()
}

pub fn random_pair(rng: &mut StdRng) -> PairState64 {
    let mut b: Vec<_> = (0..4).map(|_| cplx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let n = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in &mut b {
        *z /= n;
    }
    PairState64::new(b[0], b[1], b[2], b[3]).unwrap()
}

/// Exchange of two qubits.
pub fn swap4() -> CMatrix64 {
    let mut s = CMatrix64::zeros(4, 4);
    for (i, j) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
        s[(i, j)] = cplx(1.0, 0.0);
    }
    s
}

/// `tr_{q2 q1}[U (|ψ⟩⟨ψ| ⊗ ρ) U†]` on q2 ⊗ q1 ⊗ osc, where qubit 1 meets the
/// oscillator first and qubit 2 second.
pub fn pair_oracle(p: &PairState64, theta: f64, rho: &CMatrix64, n_max: usize) -> CMatrix64 {
    let d = n_max + 1;
    let ur = resonant_propagator(theta, n_max).unwrap();
    let u1 = kron(&identity(2), &ur);
    let sw = kron(&swap4(), &identity(d));
    let u = &sw * &u1 * &sw * &u1;
    // amplitude index 2x + y, x being the qubit that meets the oscillator last
    let psi = nalgebra::DVector::from_column_slice(&p.amplitudes());
    let anc = &psi * psi.adjoint();
    let joint = kron(&anc, rho);
    let out = &u * joint * dagger(&u);
    qres::linalg::partial_trace_first(&out, 4)
}

/// Four stages on (fresh) ⊗ (active) ⊗ osc: append `|g⟩`, entangle the pair,
/// let the active qubit interact, trace it out.
pub fn four_stage_oracle(rho: &CMatrix64, phi: f64, theta: f64, n_max: usize) -> CMatrix64 {
    let d = n_max + 1;
    let g = DensityMatrix64::fock(0, 2).unwrap().into_matrix();
    let a = kron(&g, rho);
    // the entangler acts on (older) ⊗ (fresh)
    let ue = swap4() * qres::stream::entangler::<f64>(phi) * swap4();
    let u1 = kron(&ue, &identity(d));
    let b = &u1 * a * dagger(&u1);
    let u2 = kron(&identity(2), &resonant_propagator(theta, n_max).unwrap());
    let c = &u2 * b * dagger(&u2);
    let mut out = CMatrix64::zeros(2 * d, 2 * d);
    for x in 0..2 {
        for y in 0..2 {
            for t in 0..2 {
                let blk = c.view(((2 * x + t) * d, (2 * y + t) * d), (d, d)).clone_owned();
                let mut v = out.view_mut((x * d, y * d), (d, d));
                v += blk;
            }
        }
    }
    out
}
