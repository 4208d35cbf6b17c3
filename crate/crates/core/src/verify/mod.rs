//! Runnable end-to-end checks: the two strict-separation demonstrations,
//! the supermodularity property suite, and the enhancement convergence
//! probe. Each demo recomputes its closed forms along two independent
//! routes (closed-form expression vs. witness allocation through the
//! generic evaluators) and requires 1e-10 agreement before drawing any
//! conclusion.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::bounds::{set_function, Allocation, SubsetId};
use crate::error::{Error, Result};
use crate::matkernel::{self, SymMatrix};
use crate::model::{CeoInstance, DistortionTarget, GeneralCeoInstance};

mod demos;
mod suites;

pub use demos::{demo_gap, demo_parallel};
pub use suites::{
    run_dominance_suite, run_enhancement_suite, run_supermodularity_suite, SuiteReport,
};

/// One named pass/fail entry with its numeric margin.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionEntry {
    pub name: String,
    pub holds: bool,
    pub margin: f64,
}

/// Outcome of a demonstration.
#[derive(Debug, Clone, Serialize)]
pub struct DemoConclusion {
    pub pass: bool,
    pub statement: String,
    /// Margin of the demonstrated strict inequality, in nats.
    pub margin: f64,
}

/// Full record of one demonstration run.
#[derive(Debug, Clone, Serialize)]
pub struct DemoReport {
    pub assumptions: Vec<AssumptionEntry>,
    pub quantities: BTreeMap<String, f64>,
    pub conclusion: DemoConclusion,
}

impl DemoReport {
    pub fn assumptions_hold(&self) -> bool {
        self.assumptions.iter().all(|a| a.holds)
    }
}

/// Result of the supermodularity check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SupermodularityReport {
    pub pass: bool,
    /// Most negative slack across all checked inequalities (0 when every
    /// check holds exactly).
    pub worst_violation: f64,
}

/// Exhaustively verifies that the outer region's set function is zero on
/// the empty set, monotone, and supermodular at the given allocation.
pub fn check_supermodularity(
    inst: &CeoInstance,
    target: &DistortionTarget,
    alloc: &Allocation,
    max_l: usize,
) -> Result<SupermodularityReport> {
    let l_total = inst.sensors();
    if max_l > 4 || l_total > max_l {
        return Err(Error::InvalidInstance(format!(
            "supermodularity check enumerates 4^L pairs; L = {l_total} exceeds max_l = {max_l} (cap 4)"
        )));
    }
    let f: Vec<f64> = SubsetId::all(l_total)
        .map(|s| set_function(inst, alloc, target, s))
        .collect::<Result<Vec<_>>>()?;

    let mut worst = -f[0].abs();
    for a in SubsetId::all(l_total) {
        for t in 0..l_total {
            if !a.contains(t) {
                worst = worst.min(f[a.insert(t).bits() as usize] - f[a.bits() as usize]);
            }
        }
        for b in SubsetId::all(l_total) {
            let lhs = f[a.union(b).bits() as usize] + f[a.intersection(b).bits() as usize];
            let rhs = f[a.bits() as usize] + f[b.bits() as usize];
            worst = worst.min(lhs - rhs);
        }
    }
    Ok(SupermodularityReport {
        pass: worst >= -1e-9,
        worst_violation: worst,
    })
}

/// One row of the enhancement convergence table.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnhancementRow {
    pub alpha: f64,
    /// Spectral-norm distance of the perturbed conditional covariance from
    /// its unperturbed limit.
    pub distance: f64,
}

/// Perturbs every channel by `alpha` along its singular values,
/// `H_{l,alpha} = U (Lambda + alpha I) V^T`, and measures how fast the
/// conditional covariance over `subset`'s complement converges to the
/// unperturbed expression as `alpha` decreases. Covers rank-deficient
/// channels, which is the case the limit argument exists for.
pub fn enhancement_probe(
    inst: &GeneralCeoInstance,
    alloc: &Allocation,
    subset: SubsetId,
    alphas: &[f64],
) -> Result<Vec<EnhancementRow>> {
    if alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::InvalidInstance("alphas must be positive".into()));
    }
    if alphas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInstance("alphas must be strictly decreasing".into()));
    }
    if !subset.within(inst.sensors()) {
        return Err(Error::DimensionMismatch {
            expected: inst.sensors(),
            got: subset.len(),
        });
    }
    let comp = subset.complement(inst.sensors());
    let limit = matkernel::inverse(&crate::bounds::general_effective_precision(
        inst, alloc, comp,
    )?)?;

    let svds: Vec<_> = comp
        .members()
        .map(|l| (l, inst.channel(l).clone().svd(true, true)))
        .collect();

    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let mut prec = matkernel::inverse(inst.kx())?;
        for (l, svd) in &svds {
            let u = svd.u.as_ref().expect("computed with vectors");
            let v_t = svd.v_t.as_ref().expect("computed with vectors");
            let k = svd.singular_values.len();
            let diag = DMatrix::from_fn(k, k, |i, j| {
                if i == j {
                    svd.singular_values[i] + alpha
                } else {
                    0.0
                }
            });
            let h_alpha = u * diag * v_t;
            let r = h_alpha.nrows();
            let inner = SymMatrix::identity(r).sub(&alloc.mats[*l]);
            prec = prec.add(&matkernel::congruence(&h_alpha, &inner));
        }
        let cov = matkernel::inverse(&prec)?;
        let distance = cov.sub(&limit).spectral_norm();
        rows.push(EnhancementRow { alpha, distance });
    }
    Ok(rows)
}
