//! Seeded random generation of instances, targets and feasible allocations.
//!
//! Used by the verification suites and throughout the test code. Everything
//! is deterministic given the seed.

use nalgebra::DMatrix;
use rand::Rng as _;
use rand::SeedableRng;

use crate::bounds::Allocation;
use crate::matkernel::{self, SymMatrix};
use crate::model::{collective_mmse, CeoInstance, DistortionTarget};

/// The crate-wide deterministic RNG.
pub type Rng = rand_chacha::ChaCha12Rng;

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Derives a stream-independent child seed; used to give parallel workers
/// their own generators without coupling their draws.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    seed.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn random_orthogonal(rng: &mut Rng, n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    m.qr().q()
}

/// Symmetric PD matrix with eigenvalues in `[0.5, 2]`.
pub fn random_spd(rng: &mut Rng, n: usize) -> SymMatrix {
    let q = random_orthogonal(rng, n);
    let evals: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    let d = DMatrix::from_fn(n, n, |i, j| if i == j { evals[i] } else { 0.0 });
    SymMatrix::symmetrized(&q * d * q.transpose())
}

/// Symmetric PSD matrix with eigenvalues in `(0, 1)`, bounded away from the
/// box faces.
pub fn random_psd_in_unit_box(rng: &mut Rng, n: usize) -> SymMatrix {
    let q = random_orthogonal(rng, n);
    let evals: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.95)).collect();
    let d = DMatrix::from_fn(n, n, |i, j| if i == j { evals[i] } else { 0.0 });
    SymMatrix::symmetrized(&q * d * q.transpose())
}

/// Random aligned instance with well-conditioned covariances.
pub fn random_instance(rng: &mut Rng, sensors: usize, dim: usize) -> CeoInstance {
    let kx = random_spd(rng, dim);
    let noises = (0..sensors).map(|_| random_spd(rng, dim)).collect();
    CeoInstance::new(kx, noises).expect("random covariances are PD")
}

/// Random target strictly between the distortion limits:
/// `D = MMSE + t (K_X - MMSE)` with `t` in `(0.25, 0.9)`.
pub fn random_target(rng: &mut Rng, inst: &CeoInstance) -> DistortionTarget {
    let mmse = collective_mmse(inst).expect("instance is PD");
    let t = rng.random_range(0.25..0.9);
    let d = mmse.add(&inst.kx().sub(&mmse).scaled(t));
    DistortionTarget::new(d).expect("interpolated target is PD")
}

/// Random tangent weights in `[0.1, 2]`.
pub fn random_mu(rng: &mut Rng, sensors: usize) -> Vec<f64> {
    (0..sensors).map(|_| rng.random_range(0.1..2.0)).collect()
}

/// Random strictly feasible allocation.
///
/// Draws whitened coordinates `E_l` with eigenvalues in `(0, 1)`, then scales
/// the whole family toward zero until the coupled distortion constraint
/// holds; the constraint is monotone in the scale, so bisection applies. The
/// final point sits strictly inside the feasible set.
pub fn random_feasible_allocation(
    rng: &mut Rng,
    inst: &CeoInstance,
    target: &DistortionTarget,
) -> Allocation {
    let m = inst.dim();
    let l = inst.sensors();
    let kx_inv = matkernel::inverse(inst.kx()).expect("kx is PD");
    let d_inv = matkernel::inverse(target.matrix()).expect("target is PD");
    let whiteners: Vec<(SymMatrix, SymMatrix)> = (0..l)
        .map(|i| {
            let s = inst.noise(i);
            let s_inv_half = matkernel::sym_sqrt(&matkernel::inverse(s).unwrap()).unwrap();
            let s_half = matkernel::sym_sqrt(s).unwrap();
            (s_inv_half, s_half)
        })
        .collect();
    let es: Vec<SymMatrix> = (0..l).map(|_| random_psd_in_unit_box(rng, m)).collect();

    let lmi_ok = |t: f64| -> bool {
        let mut g = kx_inv.clone();
        for i in 0..l {
            let inner = SymMatrix::identity(m).sub(&es[i].scaled(t));
            let contrib = matkernel::congruence(whiteners[i].0.as_dmatrix(), &inner);
            g = g.add(&contrib);
        }
        g.sub(&d_inv).min_eigenvalue() >= 0.0
    };

    let mut t_max = 1.0;
    if !lmi_ok(1.0) {
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if lmi_ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        t_max = lo;
    }
    let t = t_max * rng.random_range(0.2..0.95);
    let mats = (0..l)
        .map(|i| {
            let e = es[i].scaled(t);
            SymMatrix::symmetrized(
                whiteners[i].1.as_dmatrix() * e.as_dmatrix() * whiteners[i].1.as_dmatrix(),
            )
        })
        .collect();
    Allocation::aligned(mats)
}
