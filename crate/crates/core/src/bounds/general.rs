//! Bound evaluators for the general-channel model `Y_l = H_l X + N_l` with
//! identity noise. The effective precision becomes
//! `K_X^{-1} + sum H_l^T (I - D_l) H_l`, the sensor rate terms
//! `1/2 log(1/|D_l|)`, and the allocation box `[0, I]`.

use crate::error::{Error, Result};
use crate::matkernel::{self, SymMatrix};
use crate::model::{DistortionTarget, GeneralCeoInstance};

use super::aligned::log_plus;
use super::{Allocation, Feasibility, Frame, SubsetId, FEASIBILITY_TOL};

/// Outer or inner form of a subset bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Outer,
    Inner,
}

fn check_dims(
    inst: &GeneralCeoInstance,
    alloc: &Allocation,
    target: Option<&DistortionTarget>,
) -> Result<()> {
    if alloc.frame != Frame::General {
        return Err(Error::InvalidInstance(
            "general evaluators need a general-frame allocation".into(),
        ));
    }
    if alloc.sensors() != inst.sensors() {
        return Err(Error::DimensionMismatch {
            expected: inst.sensors(),
            got: alloc.sensors(),
        });
    }
    for (l, d) in alloc.mats.iter().enumerate() {
        if d.dim() != inst.channel(l).nrows() {
            return Err(Error::DimensionMismatch {
                expected: inst.channel(l).nrows(),
                got: d.dim(),
            });
        }
    }
    if let Some(t) = target {
        if t.dim() != inst.dim() {
            return Err(Error::DimensionMismatch {
                expected: inst.dim(),
                got: t.dim(),
            });
        }
    }
    Ok(())
}

/// `K_X^{-1} + sum_{l in subset} H_l^T (I - D_l) H_l`.
pub fn general_effective_precision(
    inst: &GeneralCeoInstance,
    alloc: &Allocation,
    subset: SubsetId,
) -> Result<SymMatrix> {
    check_dims(inst, alloc, None)?;
    if !subset.within(inst.sensors()) {
        return Err(Error::DimensionMismatch {
            expected: inst.sensors(),
            got: subset.len(),
        });
    }
    let mut prec = matkernel::inverse(inst.kx())?;
    for l in subset.members() {
        let r = inst.channel(l).nrows();
        let inner = SymMatrix::identity(r).sub(&alloc.mats[l]);
        prec = prec.add(&matkernel::congruence(inst.channel(l), &inner));
    }
    Ok(prec)
}

/// Sum-rate bound over `subset` for the general model, outer or inner form.
pub fn general_subset_bound(
    inst: &GeneralCeoInstance,
    alloc: &Allocation,
    target: &DistortionTarget,
    subset: SubsetId,
    kind: BoundKind,
) -> Result<f64> {
    check_dims(inst, alloc, Some(target))?;
    if !subset.within(inst.sensors()) {
        return Err(Error::DimensionMismatch {
            expected: inst.sensors(),
            got: subset.len(),
        });
    }
    if subset.is_empty() {
        return Ok(0.0);
    }
    let l_total = inst.sensors();
    let comp = subset.complement(l_total);
    let ld_comp = -matkernel::logdet(&general_effective_precision(inst, alloc, comp)?)?;
    let first = match kind {
        BoundKind::Outer => {
            let ld_d = matkernel::logdet(target.matrix())?;
            log_plus(ld_comp - ld_d)
        }
        BoundKind::Inner => {
            let full = general_effective_precision(inst, alloc, SubsetId::full(l_total))?;
            ld_comp + matkernel::logdet(&full)?
        }
    };
    let mut value = 0.5 * first;
    for l in subset.members() {
        let ld = matkernel::logdet(&alloc.mats[l])
            .map_err(|_| Error::SingularAllocation { sensor: l })?;
        value -= 0.5 * ld;
    }
    Ok(value)
}

/// Feasibility of a general-frame allocation: boxes `[0, I]` plus the
/// coupled distortion constraint.
pub fn general_alloc_feasible(
    inst: &GeneralCeoInstance,
    alloc: &Allocation,
    target: &DistortionTarget,
) -> Result<Feasibility> {
    check_dims(inst, alloc, Some(target))?;
    let mut worst = 0.0_f64;
    for l in 0..inst.sensors() {
        let r = inst.channel(l).nrows();
        worst = worst.max(matkernel::psd_leq_violation(&SymMatrix::zeros(r), &alloc.mats[l])?);
        worst = worst.max(matkernel::psd_leq_violation(&alloc.mats[l], &SymMatrix::identity(r))?);
    }
    let prec = general_effective_precision(inst, alloc, SubsetId::full(inst.sensors()))?;
    match matkernel::inverse(&prec) {
        Ok(cov) => worst = worst.max(matkernel::psd_leq_violation(&cov, target.matrix())?),
        Err(_) => worst = f64::INFINITY,
    }
    Ok(Feasibility {
        feasible: worst <= FEASIBILITY_TOL,
        max_violation: worst,
    })
}

/// Maps an aligned-frame allocation to the whitened general frame:
/// `D'_l = Sigma_l^{-1/2} D_l Sigma_l^{-1/2}`.
pub fn whiten_allocation(
    inst: &crate::model::CeoInstance,
    alloc: &Allocation,
) -> Result<Allocation> {
    if alloc.frame != Frame::Aligned {
        return Err(Error::InvalidInstance("expected an aligned allocation".into()));
    }
    let mats = (0..inst.sensors())
        .map(|l| {
            let s_inv_half = matkernel::sym_sqrt(&matkernel::inverse(inst.noise(l))?)?;
            Ok(SymMatrix::symmetrized(
                s_inv_half.as_dmatrix() * alloc.mats[l].as_dmatrix() * s_inv_half.as_dmatrix(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Allocation::general(mats))
}
