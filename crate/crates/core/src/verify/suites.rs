//! Randomized verification suites behind the command-line `verify` verb.

use serde::Serialize;

use crate::bounds::{
    chen_wang_tangent_value, inner_subset_bound, inner_tangent_value, outer_subset_bound,
    outer_tangent_value, Allocation, SubsetId, WeightVector,
};
use crate::error::Result;
use crate::matkernel::SymMatrix;
use crate::model::{CeoInstance, DistortionTarget, GeneralCeoInstance};
use crate::random::{random_feasible_allocation, random_mu, seeded};

use super::{check_supermodularity, enhancement_probe, EnhancementRow};

/// Summary of one randomized suite run.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub trials: usize,
    pub violations: usize,
    /// Most negative slack observed across every checked inequality.
    pub worst_slack: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enhancement: Option<Vec<EnhancementRow>>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Supermodularity of the set function over random feasible allocations.
pub fn run_supermodularity_suite(
    inst: &CeoInstance,
    target: &DistortionTarget,
    trials: usize,
    seed: u64,
) -> Result<SuiteReport> {
    let mut rng = seeded(seed);
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for _ in 0..trials {
        let alloc = random_feasible_allocation(&mut rng, inst, target);
        let report = check_supermodularity(inst, target, &alloc, 4)?;
        if !report.pass {
            violations += 1;
        }
        worst = worst.min(report.worst_violation);
    }
    Ok(SuiteReport {
        suite: "supermodularity".into(),
        trials,
        violations,
        worst_slack: worst,
        enhancement: None,
    })
}

/// Pointwise dominance of the bound families: for every subset,
/// `inner >= outer >= 0`, and for the tangent values
/// `chen_wang <= outer <= inner` (the unclipped form when L = 2).
pub fn run_dominance_suite(
    inst: &CeoInstance,
    target: &DistortionTarget,
    trials: usize,
    seed: u64,
) -> Result<SuiteReport> {
    let mut rng = seeded(seed);
    let l_total = inst.sensors();
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for _ in 0..trials {
        let alloc = random_feasible_allocation(&mut rng, inst, target);
        let mu = WeightVector::new(random_mu(&mut rng, l_total))?;
        let mut trial_worst = f64::INFINITY;
        for s in SubsetId::all_nonempty(l_total) {
            let outer = outer_subset_bound(inst, &alloc, target, s)?;
            let inner = inner_subset_bound(inst, &alloc, s)?;
            trial_worst = trial_worst.min(outer).min(inner - outer);
        }
        let outer_t = outer_tangent_value(inst, &alloc, target, &mu)?;
        let inner_t = inner_tangent_value(inst, &alloc, target, &mu)?;
        trial_worst = trial_worst.min(inner_t - outer_t);
        if l_total == 2 {
            let chen_t = chen_wang_tangent_value(inst, &alloc, target, &mu)?;
            trial_worst = trial_worst.min(outer_t - chen_t);
        }
        if trial_worst < -1e-12 {
            violations += 1;
        }
        worst = worst.min(trial_worst);
    }
    Ok(SuiteReport {
        suite: "dominance".into(),
        trials,
        violations,
        worst_slack: worst,
        enhancement: None,
    })
}

/// Enhancement convergence on a general instance: distances must be
/// non-increasing along the alpha sequence and end below 1e-6.
pub fn run_enhancement_suite(
    inst: &GeneralCeoInstance,
    alphas: &[f64],
    seed: u64,
) -> Result<SuiteReport> {
    let mut rng = seeded(seed);
    let alloc = Allocation::general(
        inst.channels()
            .iter()
            .map(|h| {
                crate::random::random_psd_in_unit_box(&mut rng, h.nrows())
                    .scaled(0.8)
                    .add(&SymMatrix::identity(h.nrows()).scaled(0.1))
            })
            .collect(),
    );
    let rows = enhancement_probe(inst, &alloc, SubsetId::empty(), alphas)?;
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for w in rows.windows(2) {
        let slack = w[0].distance - w[1].distance;
        worst = worst.min(slack);
        if slack < -1e-12 {
            violations += 1;
        }
    }
    let last = rows.last().expect("validated non-empty").distance;
    worst = worst.min(1e-6 - last);
    if last >= 1e-6 {
        violations += 1;
    }
    Ok(SuiteReport {
        suite: "enhancement".into(),
        trials: rows.len(),
        violations,
        worst_slack: worst,
        enhancement: Some(rows),
    })
}
