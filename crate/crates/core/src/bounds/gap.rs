//! Two-sensor closed forms under the strict-gap assumptions: the exact
//! minimum of the outer tangent objective, an upper bound on the unclipped
//! (Chen-Wang) minimum, and the witness allocations attaining each.
//!
//! The roles "sensor 1" / "sensor 2" follow the weights: sensor 1 is the one
//! with the larger weight (stable swap on ties, though the assumptions
//! themselves require strictly distinct weights).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matkernel::{self, SymMatrix};
use crate::model::{validate_distortion, CeoInstance, DistortionTarget};

use super::{Allocation, WeightVector};

/// Strictness margin for the assumption checks; the inequalities in the
/// closed forms are strict, numerics need a positive floor.
pub const STRICT_MARGIN: f64 = 1e-9;

/// One strict matrix inequality: `holds` iff the min eigenvalue of
/// (rhs - lhs) exceeds [`STRICT_MARGIN`]; `margin` is that eigenvalue.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IneqCheck {
    pub holds: bool,
    pub margin: f64,
}

impl IneqCheck {
    fn from_margin(margin: f64) -> Self {
        IneqCheck {
            holds: margin > STRICT_MARGIN,
            margin,
        }
    }

    fn failed() -> Self {
        IneqCheck {
            holds: false,
            margin: f64::NEG_INFINITY,
        }
    }
}

/// Per-inequality report for the three gap assumptions.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GapAssumptions {
    /// `(mu2/mu1) Sigma_1^{-1} < K_X^{-1} + Sigma_2^{-1} - D^{-1}`
    pub first: IneqCheck,
    /// `(mu2/(mu1-mu2)) K_X^{-1} < Sigma_2^{-1}`
    pub second: IneqCheck,
    /// `(mu1/(mu1-mu2)) D^{-1} < K_X^{-1} + Sigma_2^{-1}`
    pub third: IneqCheck,
}

impl GapAssumptions {
    pub fn all_hold(&self) -> bool {
        self.first.holds && self.second.holds && self.third.holds
    }
}

struct GapSetup {
    /// Original indices of the (high-weight, low-weight) sensors.
    hi: usize,
    lo: usize,
    mu1: f64,
    mu2: f64,
    kx_inv: SymMatrix,
    s2_inv: SymMatrix,
    d_inv: SymMatrix,
}

fn setup(inst: &CeoInstance, target: &DistortionTarget, mu: &WeightVector) -> Result<GapSetup> {
    if inst.sensors() != 2 {
        return Err(Error::WrongSensorCount {
            expected: 2,
            got: inst.sensors(),
        });
    }
    if mu.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: mu.len(),
        });
    }
    if target.dim() != inst.dim() {
        return Err(Error::DimensionMismatch {
            expected: inst.dim(),
            got: target.dim(),
        });
    }
    let order = mu.descending_order();
    let (hi, lo) = (order[0], order[1]);
    Ok(GapSetup {
        hi,
        lo,
        mu1: mu.get(hi),
        mu2: mu.get(lo),
        kx_inv: matkernel::inverse(inst.kx())?,
        s2_inv: matkernel::inverse(inst.noise(lo))?,
        d_inv: matkernel::inverse(target.matrix())?,
    })
}

/// Evaluates the three strict inequalities enabling the closed forms.
pub fn check_gap_assumptions(
    inst: &CeoInstance,
    target: &DistortionTarget,
    mu: &WeightVector,
) -> Result<GapAssumptions> {
    let g = setup(inst, target, mu)?;
    let s1_inv = matkernel::inverse(inst.noise(g.hi))?;

    let rhs1 = g.kx_inv.add(&g.s2_inv).sub(&g.d_inv);
    let first = IneqCheck::from_margin(
        rhs1.sub(&s1_inv.scaled(g.mu2 / g.mu1)).min_eigenvalue(),
    );

    let (second, third) = if g.mu1 > g.mu2 {
        let second = IneqCheck::from_margin(
            g.s2_inv
                .sub(&g.kx_inv.scaled(g.mu2 / (g.mu1 - g.mu2)))
                .min_eigenvalue(),
        );
        let third = IneqCheck::from_margin(
            g.kx_inv
                .add(&g.s2_inv)
                .sub(&g.d_inv.scaled(g.mu1 / (g.mu1 - g.mu2)))
                .min_eigenvalue(),
        );
        (second, third)
    } else {
        // Strictness needs mu1 > mu2.
        (IneqCheck::failed(), IneqCheck::failed())
    };

    Ok(GapAssumptions {
        first,
        second,
        third,
    })
}

fn require_assumptions(
    inst: &CeoInstance,
    target: &DistortionTarget,
    mu: &WeightVector,
) -> Result<GapSetup> {
    let checks = check_gap_assumptions(inst, target, mu)?;
    if !checks.all_hold() {
        return Err(Error::AssumptionsViolated(format!(
            "gap assumptions: first {}, second {}, third {}",
            checks.first.holds, checks.second.holds, checks.third.holds
        )));
    }
    if !validate_distortion(inst, target)?.is_ok() {
        return Err(Error::AssumptionsViolated(
            "distortion target outside its admissible interval".into(),
        ));
    }
    setup(inst, target, mu)
}

/// Exact minimum of the outer tangent objective under the assumptions:
/// `(mu2/2) log(|K_X|/|D|) + (mu2/2) log(|Sigma_2^{-1}| / |K_X^{-1} + Sigma_2^{-1} - D^{-1}|)`.
pub fn corollary3_tplus(
    inst: &CeoInstance,
    target: &DistortionTarget,
    mu: &WeightVector,
) -> Result<f64> {
    let g = require_assumptions(inst, target, mu)?;
    let q = g.kx_inv.add(&g.s2_inv).sub(&g.d_inv);
    let ld_kx = matkernel::logdet(inst.kx())?;
    let ld_d = matkernel::logdet(target.matrix())?;
    let ld_s2_inv = matkernel::logdet(&g.s2_inv)?;
    let ld_q = matkernel::logdet(&q)?;
    Ok(0.5 * g.mu2 * (ld_kx - ld_d) + 0.5 * g.mu2 * (ld_s2_inv - ld_q))
}

/// Upper bound on the unclipped tangent minimum under the same assumptions;
/// strictly below [`corollary3_tplus`] when the third assumption is strict.
pub fn corollary4_tminus_upper(
    inst: &CeoInstance,
    target: &DistortionTarget,
    mu: &WeightVector,
) -> Result<f64> {
    let g = require_assumptions(inst, target, mu)?;
    let m = inst.dim() as f64;
    let q = g.kx_inv.add(&g.s2_inv).sub(&g.d_inv);
    let sum = g.kx_inv.add(&g.s2_inv);
    let ld_q = matkernel::logdet(&q)?;
    let ld_sum = matkernel::logdet(&sum)?;
    let ld_d = matkernel::logdet(target.matrix())?;
    let tplus = corollary3_tplus(inst, target, mu)?;

    let ratio = g.mu2 / g.mu1;
    let second = 0.5 * g.mu2 * (ld_q - (m * ratio.ln() + ld_sum));
    let blow = g.mu1 / (g.mu1 - g.mu2);
    let third = 0.5 * (g.mu1 - g.mu2) * ((m * blow.ln() - ld_sum) - ld_d);
    Ok(tplus + second + third)
}

/// Allocation attaining [`corollary3_tplus`]:
/// `D_1 = Sigma_1`, `D_2 = Sigma_2 (K_X^{-1} + Sigma_2^{-1} - D^{-1}) Sigma_2`.
pub fn corollary3_witness(
    inst: &CeoInstance,
    target: &DistortionTarget,
    mu: &WeightVector,
) -> Result<Allocation> {
    let g = require_assumptions(inst, target, mu)?;
    let q = g.kx_inv.add(&g.s2_inv).sub(&g.d_inv);
    let s2 = inst.noise(g.lo);
    let d2 = SymMatrix::symmetrized(s2.as_dmatrix() * q.as_dmatrix() * s2.as_dmatrix());
    let mut mats = vec![SymMatrix::zeros(inst.dim()); 2];
    mats[g.hi] = inst.noise(g.hi).clone();
    mats[g.lo] = d2;
    Ok(Allocation::aligned(mats))
}

/// Allocation whose unclipped tangent value equals [`corollary4_tminus_upper`]:
/// `D_1 = Sigma_1`, `D_2 = (mu2/mu1) Sigma_2 (K_X^{-1} + Sigma_2^{-1}) Sigma_2`.
pub fn corollary4_witness(
    inst: &CeoInstance,
    target: &DistortionTarget,
    mu: &WeightVector,
) -> Result<Allocation> {
    let g = require_assumptions(inst, target, mu)?;
    let sum = g.kx_inv.add(&g.s2_inv);
    let s2 = inst.noise(g.lo);
    let d2 = SymMatrix::symmetrized(s2.as_dmatrix() * sum.as_dmatrix() * s2.as_dmatrix())
        .scaled(g.mu2 / g.mu1);
    let mut mats = vec![SymMatrix::zeros(inst.dim()); 2];
    mats[g.hi] = inst.noise(g.hi).clone();
    mats[g.lo] = d2;
    Ok(Allocation::aligned(mats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{alloc_feasible, chen_wang_tangent_value, outer_tangent_value};

    fn unit_gap_instance(d: f64) -> (CeoInstance, DistortionTarget, WeightVector) {
        let inst = CeoInstance::new(
            SymMatrix::from_diagonal(&[1.0]),
            vec![SymMatrix::from_diagonal(&[1.0]), SymMatrix::from_diagonal(&[1.0])],
        )
        .unwrap();
        let target = DistortionTarget::scalar(d).unwrap();
        let mu = WeightVector::new(vec![4.0, 1.0]).unwrap();
        (inst, target, mu)
    }

    #[test]
    fn assumptions_window() {
        let (inst, target, mu) = unit_gap_instance(0.75);
        let checks = check_gap_assumptions(&inst, &target, &mu).unwrap();
        assert!(checks.all_hold());
        assert!((checks.first.margin - (2.0 - 4.0 / 3.0 - 0.25)).abs() < 1e-12);
        assert!((checks.second.margin - 2.0 / 3.0).abs() < 1e-12);
        assert!((checks.third.margin - (2.0 - 16.0 / 9.0)).abs() < 1e-12);

        let (inst, target, mu) = unit_gap_instance(0.5);
        let checks = check_gap_assumptions(&inst, &target, &mu).unwrap();
        assert!(!checks.third.holds, "D = 0.5 violates the third assumption");

        let tied = WeightVector::new(vec![1.0, 1.0]).unwrap();
        let (inst, target, _) = unit_gap_instance(0.75);
        let checks = check_gap_assumptions(&inst, &target, &tied).unwrap();
        assert!(!checks.second.holds && !checks.third.holds);
    }

    #[test]
    fn closed_forms_on_the_unit_instance() {
        let (inst, target, mu) = unit_gap_instance(0.75);
        let tplus = corollary3_tplus(&inst, &target, &mu).unwrap();
        let want = 0.5 * ((4.0_f64 / 3.0).ln() + 1.5_f64.ln());
        assert!((tplus - want).abs() < 1e-14);
        assert!((tplus - 0.5 * 2.0_f64.ln()).abs() < 1e-14);

        let tminus = corollary4_tminus_upper(&inst, &target, &mu).unwrap();
        let want = tplus + 0.5 * (4.0_f64 / 3.0).ln() + 1.5 * (8.0_f64 / 9.0).ln();
        assert!((tminus - want).abs() < 1e-14);
        assert!(tminus < tplus - 0.02, "gap should be ~0.033 nats");
    }

    #[test]
    fn witnesses_attain_the_closed_forms() {
        let (inst, target, mu) = unit_gap_instance(0.8);
        let w3 = corollary3_witness(&inst, &target, &mu).unwrap();
        assert!(alloc_feasible(&inst, &w3, &target).unwrap().max_violation < 1e-9);
        let at_witness = outer_tangent_value(&inst, &w3, &target, &mu).unwrap();
        let closed = corollary3_tplus(&inst, &target, &mu).unwrap();
        assert!((at_witness - closed).abs() < 1e-12);

        let w4 = corollary4_witness(&inst, &target, &mu).unwrap();
        assert!(alloc_feasible(&inst, &w4, &target).unwrap().max_violation < 1e-9);
        let chen_at_witness = chen_wang_tangent_value(&inst, &w4, &target, &mu).unwrap();
        let upper = corollary4_tminus_upper(&inst, &target, &mu).unwrap();
        assert!((chen_at_witness - upper).abs() < 1e-12);
    }

    #[test]
    fn swapped_weights_swap_roles() {
        // mu = (1, 4): sensor 2 takes the high-weight role, values match the
        // canonically ordered problem.
        let (inst, target, _) = unit_gap_instance(0.75);
        let mu_rev = WeightVector::new(vec![1.0, 4.0]).unwrap();
        let mu_fwd = WeightVector::new(vec![4.0, 1.0]).unwrap();
        let a = corollary3_tplus(&inst, &target, &mu_rev).unwrap();
        let b = corollary3_tplus(&inst, &target, &mu_fwd).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn violated_assumptions_error() {
        let (inst, target, _) = unit_gap_instance(0.75);
        let tied = WeightVector::new(vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            corollary3_tplus(&inst, &target, &tied),
            Err(Error::AssumptionsViolated(_))
        ));
    }
}
