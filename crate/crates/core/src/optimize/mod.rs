//! Minimization of the tangent objectives over feasible allocations.
//!
//! The continuous optimizer is a multi-start projected gradient method in
//! whitened coordinates: box constraints become eigenvalue clipping, the
//! coupled distortion constraint is handled by a geometrically escalated
//! quadratic penalty, and feasibility is restored and re-certified after
//! optimization rather than assumed. A brute-force grid oracle provides
//! independent ground truth at small scale, and the scalar model admits an
//! exact equality-constrained solve.

use rayon::prelude::*;

use crate::bounds::{
    alloc_feasible, general_alloc_feasible, BoundReport, TangentKind, WeightVector,
};
use crate::error::{Error, Result};
use crate::matkernel::SymMatrix;
use crate::model::{CeoInstance, DistortionTarget, GeneralCeoInstance};
use crate::random::{child_seed, random_psd_in_unit_box, seeded};

mod grid;
mod objective;
mod scalar_solve;

pub use grid::{grid_oracle, GridOptions};
pub use objective::WhitenedTangent;
pub use scalar_solve::scalar_solve;

/// Options for [`minimize_tangent`].
#[derive(Debug, Clone)]
pub struct OptimizerOptions {
    /// Number of starts (heuristic starts first, then seeded random draws).
    pub starts: usize,
    /// Total gradient-iteration budget, split across the penalty phases.
    pub max_iters: usize,
    /// Initial line-search step.
    pub step_init: f64,
    /// Objective-decrease threshold that ends a penalty phase.
    pub tol_obj: f64,
    /// First penalty weight of the geometric schedule.
    pub penalty_from: f64,
    /// Last penalty weight of the geometric schedule. The default ends at
    /// 1e8: the residual constraint bias scales inversely with this.
    pub penalty_to: f64,
    /// Multiplier between consecutive penalty weights.
    pub penalty_factor: f64,
    /// Seed for the random starts; identical seeds give identical reports.
    pub seed: u64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            starts: 16,
            max_iters: 2000,
            step_init: 0.1,
            tol_obj: 1e-9,
            penalty_from: 10.0,
            penalty_to: 1e8,
            penalty_factor: 10.0,
            seed: 42,
        }
    }
}

impl OptimizerOptions {
    fn validate(&self) -> Result<()> {
        let ok = self.starts > 0
            && self.max_iters > 0
            && self.step_init > 0.0
            && self.tol_obj > 0.0
            && self.penalty_from > 0.0
            && self.penalty_to >= self.penalty_from
            && self.penalty_factor > 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInstance("optimizer options must be positive".into()))
        }
    }

    fn penalty_schedule(&self) -> Vec<f64> {
        let mut rhos = vec![self.penalty_from];
        while *rhos.last().unwrap() < self.penalty_to {
            let next = rhos.last().unwrap() * self.penalty_factor;
            rhos.push(next.min(self.penalty_to));
        }
        rhos
    }
}

/// One multi-start descent on a prepared problem. Returns the best feasible
/// whitened point and its true (unpenalized) objective value.
fn descend(
    problem: &WhitenedTangent,
    opts: &OptimizerOptions,
    warm: Option<&[SymMatrix]>,
) -> Result<(f64, Vec<SymMatrix>)> {
    if !problem.fully_informative_feasible() {
        return Err(Error::Infeasible);
    }
    let rhos = opts.penalty_schedule();
    let per_phase = (opts.max_iters / rhos.len()).max(1);

    let mut starts: Vec<Vec<SymMatrix>> = Vec::new();
    if let Some(w) = warm {
        starts.push(w.to_vec());
    }
    let eye = |t: f64| -> Vec<SymMatrix> {
        problem
            .dims()
            .iter()
            .map(|d| SymMatrix::identity(*d).scaled(t))
            .collect()
    };
    starts.push(eye(1.0));
    starts.push(eye(0.5));
    starts.push(eye(problem.saturating_scale().max(1e-3)));
    while starts.len() < opts.starts + warm.map_or(0, |_| 1) {
        let idx = starts.len() as u64;
        let mut rng = seeded(child_seed(opts.seed, idx));
        starts.push(
            problem
                .dims()
                .iter()
                .map(|d| random_psd_in_unit_box(&mut rng, *d))
                .collect(),
        );
    }

    let runs: Vec<(f64, Vec<SymMatrix>)> = starts
        .par_iter()
        .map(|start| run_single_start(problem, start, &rhos, per_phase, opts))
        .collect();

    let best = runs
        .into_iter()
        .min_by(|a, b| a.0.partial_cmp(&b.0).expect("values are not NaN"))
        .expect("at least one start");
    if !best.0.is_finite() {
        return Err(Error::Infeasible);
    }
    Ok(best)
}

fn run_single_start(
    problem: &WhitenedTangent,
    start: &[SymMatrix],
    rhos: &[f64],
    per_phase: usize,
    opts: &OptimizerOptions,
) -> (f64, Vec<SymMatrix>) {
    let mut e = problem.project(start);
    let mut step = opts.step_init;
    let mut lambda = 0.0;
    for &rho in rhos {
        let (mut f, mut grads) = problem.penalized(&e, rho, lambda);
        if grads.is_none() {
            break;
        }
        for _ in 0..per_phase {
            let g = grads.as_ref().expect("loop invariant");
            // Backtracking on the penalized objective: halve until decrease.
            let mut t = step;
            let mut accepted = None;
            while t >= 1e-12 {
                let trial: Vec<SymMatrix> = e
                    .iter()
                    .zip(g)
                    .map(|(el, gl)| el.sub(&gl.scaled(t)))
                    .collect();
                let trial = problem.project(&trial);
                let (ft, gt) = problem.penalized(&trial, rho, lambda);
                if ft < f && gt.is_some() {
                    accepted = Some((trial, ft, gt));
                    break;
                }
                t *= 0.5;
            }
            match accepted {
                Some((trial, ft, gt)) => {
                    let decrease = f - ft;
                    e = trial;
                    f = ft;
                    grads = gt;
                    step = (t * 2.0).min(opts.step_init * 10.0);
                    if decrease < opts.tol_obj {
                        break;
                    }
                }
                None => break,
            }
        }
        // Multiplier update at the end of each phase.
        lambda += 2.0 * rho * problem.lmi_violation(&e);
    }
    // Feasible polish: descend on the true objective, restoring the coupled
    // constraint after every trial step. When the plain gradient direction
    // stalls against the active constraint, crawl along its tangent plane
    // instead; this removes the residual penalty bias at boundary optima.
    let mut e = problem.restore_feasibility(&e);
    let mut f = problem.value(&e);
    let polish_iters = per_phase.max(400);
    let mut step = opts.step_init;
    'polish: for _ in 0..polish_iters {
        let (_, grads) = problem.value_and_gradient(&e);
        let g = match grads {
            Some(g) => g,
            None => break,
        };
        let normal = problem.lmi_normal(&e);
        let dot = |a: &[SymMatrix], b: &[SymMatrix]| -> f64 {
            a.iter()
                .zip(b)
                .map(|(x, y)| {
                    x.as_dmatrix()
                        .iter()
                        .zip(y.as_dmatrix().iter())
                        .map(|(p, q)| p * q)
                        .sum::<f64>()
                })
                .sum()
        };
        let nn = dot(&normal, &normal);
        let beta = if nn > 0.0 { dot(&g, &normal) / nn } else { 0.0 };
        let tangential: Vec<SymMatrix> = g
            .iter()
            .zip(&normal)
            .map(|(gl, nl)| gl.sub(&nl.scaled(beta)))
            .collect();

        // Evaluate both directions and keep the better step: against an
        // active constraint the plain direction only yields microscopic
        // restore-limited decreases, while the tangential one makes real
        // progress along the boundary.
        let mut best_step: Option<(f64, Vec<SymMatrix>, f64)> = None;
        for dir in [&g, &tangential] {
            let mut t = step;
            while t >= 1e-13 {
                let trial: Vec<SymMatrix> = e
                    .iter()
                    .zip(dir.iter())
                    .map(|(el, dl)| el.sub(&dl.scaled(t)))
                    .collect();
                let trial = problem.restore_between(&e, &problem.project(&trial));
                let ft = problem.value(&trial);
                if ft < f {
                    if best_step.as_ref().map_or(true, |(bf, _, _)| ft < *bf) {
                        best_step = Some((ft, trial, t));
                    }
                    break;
                }
                t *= 0.5;
            }
        }
        match best_step {
            Some((ft, trial, t)) => {
                let decrease = f - ft;
                e = trial;
                f = ft;
                step = (t * 2.0).min(opts.step_init * 10.0);
                if decrease < 1e-14 * f.abs().max(1.0) {
                    break 'polish;
                }
            }
            None => break,
        }
    }
    (f, e)
}

fn assemble_report(
    problem: &WhitenedTangent,
    inst: objective::ProblemInstance<'_>,
    target: &DistortionTarget,
    value: f64,
    e: &[SymMatrix],
) -> Result<BoundReport> {
    let allocation = problem.unwhiten(e);
    let feasibility = match &inst {
        objective::ProblemInstance::Aligned(i) => alloc_feasible(i, &allocation, target)?,
        objective::ProblemInstance::General(i) => general_alloc_feasible(i, &allocation, target)?,
    };
    let per_subset = problem.subset_rates(&inst, target, &allocation)?;
    Ok(BoundReport {
        value,
        allocation,
        feasibility,
        per_subset,
    })
}

/// Minimizes the chosen tangent objective over feasible allocations of an
/// aligned instance. The reported value is an upper estimate of the true
/// minimum, at a feasibility-certified allocation.
pub fn minimize_tangent(
    kind: TangentKind,
    inst: &CeoInstance,
    target: &DistortionTarget,
    mu: &WeightVector,
    opts: &OptimizerOptions,
) -> Result<BoundReport> {
    opts.validate()?;
    let problem = WhitenedTangent::aligned(inst, target, mu, kind)?;
    let (value, e) = descend(&problem, opts, None)?;
    assemble_report(
        &problem,
        objective::ProblemInstance::Aligned(inst),
        target,
        value,
        &e,
    )
}

/// General-channel analogue of [`minimize_tangent`] (outer or inner form).
pub fn minimize_tangent_general(
    kind: TangentKind,
    inst: &GeneralCeoInstance,
    target: &DistortionTarget,
    mu: &WeightVector,
    opts: &OptimizerOptions,
) -> Result<BoundReport> {
    opts.validate()?;
    let problem = WhitenedTangent::general(inst, target, mu, kind)?;
    let (value, e) = descend(&problem, opts, None)?;
    assemble_report(
        &problem,
        objective::ProblemInstance::General(inst),
        target,
        value,
        &e,
    )
}

/// One row of a tangent sweep.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TracePoint {
    pub mu: Vec<f64>,
    pub value: f64,
    pub report: BoundReport,
}

/// Minimizes the tangent objective along a list of weight vectors, reusing
/// each optimum as a warm start for the next.
pub fn trace_region(
    kind: TangentKind,
    inst: &CeoInstance,
    target: &DistortionTarget,
    mu_list: &[Vec<f64>],
    opts: &OptimizerOptions,
) -> Result<Vec<TracePoint>> {
    opts.validate()?;
    let mut out = Vec::with_capacity(mu_list.len());
    let mut warm: Option<Vec<SymMatrix>> = None;
    for mu_raw in mu_list {
        let mu = WeightVector::new(mu_raw.clone())?;
        let problem = WhitenedTangent::aligned(inst, target, &mu, kind)?;
        let (value, e) = descend(&problem, opts, warm.as_deref())?;
        let report = assemble_report(
            &problem,
            objective::ProblemInstance::Aligned(inst),
            target,
            value,
            &e,
        )?;
        warm = Some(e);
        out.push(TracePoint {
            mu: mu_raw.clone(),
            value,
            report,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::gap::corollary3_tplus;
    use crate::model::ScalarCeoInstance;
    use crate::random::{random_instance, random_target, seeded};
    use rand::Rng as _;

    fn quick_opts() -> OptimizerOptions {
        OptimizerOptions {
            starts: 8,
            max_iters: 600,
            ..OptimizerOptions::default()
        }
    }

    #[test]
    fn zero_rate_at_kx() {
        let mut rng = seeded(71);
        let inst = random_instance(&mut rng, 2, 2);
        let target = DistortionTarget::new(inst.kx().clone()).unwrap();
        let mu = WeightVector::new(vec![1.5, 1.0]).unwrap();
        for kind in [TangentKind::Outer, TangentKind::Inner, TangentKind::ChenWang] {
            let report = minimize_tangent(kind, &inst, &target, &mu, &quick_opts()).unwrap();
            assert!(report.value.abs() < 1e-6, "{kind:?}: {}", report.value);
            assert!(report.feasibility.feasible);
        }
    }

    #[test]
    fn matches_gap_closed_form() {
        let inst = ScalarCeoInstance::new(1.0, vec![1.0, 1.0])
            .unwrap()
            .to_matrix_instance();
        let target = DistortionTarget::scalar(0.75).unwrap();
        let mu = WeightVector::new(vec![4.0, 1.0]).unwrap();
        let report =
            minimize_tangent(TangentKind::Outer, &inst, &target, &mu, &quick_opts()).unwrap();
        let closed = corollary3_tplus(&inst, &target, &mu).unwrap();
        assert!((closed - 0.5 * 2.0_f64.ln()).abs() < 1e-14);
        assert!(report.value >= closed - 1e-9, "optimizer below the true minimum");
        assert!((report.value - closed).abs() < 1e-6, "{} vs {closed}", report.value);
        assert!(report.feasibility.feasible);
    }

    #[test]
    fn reports_are_deterministic() {
        let mut rng = seeded(72);
        let inst = random_instance(&mut rng, 2, 2);
        let target = random_target(&mut rng, &inst);
        let mu = WeightVector::new(vec![1.3, 0.4]).unwrap();
        let a = minimize_tangent(TangentKind::Outer, &inst, &target, &mu, &quick_opts()).unwrap();
        let b = minimize_tangent(TangentKind::Outer, &inst, &target, &mu, &quick_opts()).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        for (x, y) in a.allocation.mats.iter().zip(&b.allocation.mats) {
            assert_eq!(x.as_dmatrix(), y.as_dmatrix());
        }
    }

    #[test]
    fn nesting_at_the_minimum_level() {
        let mut rng = seeded(73);
        for _ in 0..3 {
            let inst = random_instance(&mut rng, 2, 2);
            let target = random_target(&mut rng, &inst);
            let mu = WeightVector::new(vec![rng.random_range(0.5..2.0), rng.random_range(0.1..0.5)])
                .unwrap();
            let outer =
                minimize_tangent(TangentKind::Outer, &inst, &target, &mu, &quick_opts()).unwrap();
            let inner =
                minimize_tangent(TangentKind::Inner, &inst, &target, &mu, &quick_opts()).unwrap();
            let chen =
                minimize_tangent(TangentKind::ChenWang, &inst, &target, &mu, &quick_opts()).unwrap();
            assert!(outer.value <= inner.value + 1e-6);
            assert!(chen.value <= outer.value + 1e-6);
            for r in [&outer, &inner, &chen] {
                assert!(r.feasibility.max_violation < 1e-8);
            }
        }
    }

    #[test]
    fn infeasible_target_is_reported() {
        let mut rng = seeded(74);
        let inst = random_instance(&mut rng, 2, 2);
        let mmse = crate::model::collective_mmse(&inst).unwrap();
        let target = DistortionTarget::new(mmse.scaled(0.5)).unwrap();
        let mu = WeightVector::new(vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            minimize_tangent(TangentKind::Outer, &inst, &target, &mu, &quick_opts()),
            Err(Error::Infeasible)
        ));
    }

    #[test]
    fn trace_is_monotone_in_weights() {
        let inst = ScalarCeoInstance::new(1.0, vec![0.8, 1.4])
            .unwrap()
            .to_matrix_instance();
        let target = DistortionTarget::scalar(0.5).unwrap();
        let mus: Vec<Vec<f64>> = (1..=8).map(|i| vec![1.0, 0.1 * i as f64]).collect();
        let trace = trace_region(TangentKind::Outer, &inst, &target, &mus, &quick_opts()).unwrap();
        for w in trace.windows(2) {
            assert!(w[1].value >= w[0].value - 1e-6);
        }
        let chen = trace_region(TangentKind::ChenWang, &inst, &target, &mus, &quick_opts()).unwrap();
        for (c, o) in chen.iter().zip(&trace) {
            assert!(c.value <= o.value + 1e-6);
        }
    }
}
