//! Scalar specializations of the subset and tangent bounds, in plain `f64`
//! arithmetic. These agree with the 1x1-matrix code paths to near machine
//! precision and back the grid oracle and the parallel model.

use crate::error::{Error, Result};
use crate::model::ScalarCeoInstance;

use super::{SubsetId, TangentKind};

/// Precision contributed by sensor `l` at allocation value `d_l`:
/// `(sigma_l^2 - d_l) / sigma_l^4`.
#[inline]
pub fn precision_contribution(noise_var: f64, d_l: f64) -> f64 {
    (noise_var - d_l) / (noise_var * noise_var)
}

fn check(inst: &ScalarCeoInstance, d_alloc: &[f64]) -> Result<()> {
    if d_alloc.len() != inst.sensors() {
        return Err(Error::DimensionMismatch {
            expected: inst.sensors(),
            got: d_alloc.len(),
        });
    }
    Ok(())
}

/// Scalar form of the outer subset bound.
pub fn scalar_subset_bound(
    inst: &ScalarCeoInstance,
    d: f64,
    d_alloc: &[f64],
    subset: SubsetId,
) -> Result<f64> {
    check(inst, d_alloc)?;
    if !subset.within(inst.sensors()) {
        return Err(Error::DimensionMismatch {
            expected: inst.sensors(),
            got: subset.len(),
        });
    }
    if subset.is_empty() {
        return Ok(0.0);
    }
    let comp = subset.complement(inst.sensors());
    let mut prec = 1.0 / inst.var_x;
    for l in comp.members() {
        prec += precision_contribution(inst.noise_vars[l], d_alloc[l]);
    }
    let mut value = 0.5 * (-(d.ln()) - prec.ln()).max(0.0);
    for l in subset.members() {
        if d_alloc[l] <= 0.0 {
            return Err(Error::SingularAllocation { sensor: l });
        }
        value += 0.5 * (inst.noise_vars[l] / d_alloc[l]).ln();
    }
    Ok(value)
}

/// Scalar form of the tangent objectives. Weights are re-sorted descending
/// with sensor permutation, stable on ties, exactly as in the matrix path.
pub fn scalar_tangent_value(
    inst: &ScalarCeoInstance,
    d: f64,
    d_alloc: &[f64],
    mu: &[f64],
    kind: TangentKind,
) -> Result<f64> {
    check(inst, d_alloc)?;
    if mu.len() != inst.sensors() {
        return Err(Error::DimensionMismatch {
            expected: inst.sensors(),
            got: mu.len(),
        });
    }
    let l_total = inst.sensors();
    if kind == TangentKind::ChenWang && l_total != 2 {
        return Err(Error::WrongSensorCount {
            expected: 2,
            got: l_total,
        });
    }
    let mut order: Vec<usize> = (0..l_total).collect();
    order.sort_by(|a, b| mu[*b].partial_cmp(&mu[*a]).unwrap());

    // suffix_prec[k] covers sorted sensors k..L.
    let mut suffix_prec = vec![1.0 / inst.var_x; l_total + 1];
    for k in (0..l_total).rev() {
        let l = order[k];
        suffix_prec[k] =
            suffix_prec[k + 1] + precision_contribution(inst.noise_vars[l], d_alloc[l]);
    }

    let mut value = 0.0;
    for t in 0..l_total - 1 {
        let w = 0.5 * (mu[order[t]] - mu[order[t + 1]]);
        if w == 0.0 {
            continue;
        }
        let log_ratio = -(d.ln()) - suffix_prec[t + 1].ln();
        value += w * match kind {
            TangentKind::Outer => log_ratio.max(0.0),
            TangentKind::ChenWang => log_ratio,
            TangentKind::Inner => suffix_prec[0].ln() - suffix_prec[t + 1].ln(),
        };
    }
    for l in 0..l_total {
        if d_alloc[l] <= 0.0 {
            return Err(Error::SingularAllocation { sensor: l });
        }
        value += 0.5 * mu[l] * (inst.noise_vars[l] / d_alloc[l]).ln();
    }
    let mu_min = mu[order[l_total - 1]];
    value += 0.5
        * mu_min
        * match kind {
            TangentKind::Inner => inst.var_x.ln() + suffix_prec[0].ln(),
            _ => inst.var_x.ln() - d.ln(),
        };
    Ok(value)
}
