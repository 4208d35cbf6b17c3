//! Subset and tangent bounds for the aligned model, plus the supermodular
//! set function and contra-polymatroid vertices behind the tangent forms.
//!
//! Conventions shared by every evaluator here:
//! - all rates are in nats;
//! - the empty subset yields a vacuous bound of exactly 0;
//! - a singular `D_l` for a sensor inside the rated subset means an infinite
//!   rate term and is reported as `SingularAllocation`, never as a float;
//! - tangent weights are re-sorted descending internally, stable by sensor
//!   index on ties.

use crate::error::{Error, Result};
use crate::matkernel::{self, SymMatrix};
use crate::model::{CeoInstance, DistortionTarget};

use super::{Allocation, Feasibility, Frame, SubsetId, TangentKind, WeightVector, FEASIBILITY_TOL};

fn check_dims(inst: &CeoInstance, alloc: &Allocation, target: Option<&DistortionTarget>) -> Result<()> {
    if alloc.frame != Frame::Aligned {
        return Err(Error::InvalidInstance(
            "aligned evaluators need an aligned-frame allocation".into(),
        ));
    }
    if alloc.sensors() != inst.sensors() {
        return Err(Error::DimensionMismatch {
            expected: inst.sensors(),
            got: alloc.sensors(),
        });
    }
    for d in &alloc.mats {
        if d.dim() != inst.dim() {
            return Err(Error::DimensionMismatch {
                expected: inst.dim(),
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

/// `log^+ x` on the log scale: clips an already-computed `log x` at zero.
#[inline]
pub(crate) fn log_plus(log_x: f64) -> f64 {
    log_x.max(0.0)
}

/// Information contributed by sensor `l`:
/// `Sigma_l^{-1} (Sigma_l - D_l) Sigma_l^{-1}`.
fn sensor_contribution(inst: &CeoInstance, alloc: &Allocation, l: usize) -> Result<SymMatrix> {
    let s_inv = matkernel::inverse(inst.noise(l))?;
    let inner = inst.noise(l).sub(&alloc.mats[l]);
    Ok(matkernel::congruence(s_inv.as_dmatrix(), &inner))
}

/// `K_X^{-1} + sum_{l in subset} Sigma_l^{-1}(Sigma_l - D_l)Sigma_l^{-1}`.
pub fn effective_precision(
    inst: &CeoInstance,
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
        prec = prec.add(&sensor_contribution(inst, alloc, l)?);
    }
    Ok(prec)
}

/// `1/2 (logdet Sigma_l - logdet D_l)`, the per-sensor rate term.
fn sensor_rate_term(inst: &CeoInstance, alloc: &Allocation, l: usize) -> Result<f64> {
    let ld_sigma = matkernel::logdet(inst.noise(l))?;
    let ld_d = matkernel::logdet(&alloc.mats[l])
        .map_err(|_| Error::SingularAllocation { sensor: l })?;
    Ok(0.5 * (ld_sigma - ld_d))
}

/// Sum-rate lower bound over `subset` from the outer region.
pub fn outer_subset_bound(
    inst: &CeoInstance,
    alloc: &Allocation,
    target: &DistortionTarget,
    subset: SubsetId,
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
    let comp = subset.complement(inst.sensors());
    let prec = effective_precision(inst, alloc, comp)?;
    let log_ratio = -matkernel::logdet(&prec)? - matkernel::logdet(target.matrix())?;
    let mut value = 0.5 * log_plus(log_ratio);
    for l in subset.members() {
        value += sensor_rate_term(inst, alloc, l)?;
    }
    Ok(value)
}

/// Sum-rate lower bound over `subset` from the inner (achievable) region.
pub fn inner_subset_bound(
    inst: &CeoInstance,
    alloc: &Allocation,
    subset: SubsetId,
) -> Result<f64> {
    check_dims(inst, alloc, None)?;
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
    let prec_comp = effective_precision(inst, alloc, comp)?;
    let prec_full = effective_precision(inst, alloc, SubsetId::full(l_total))?;
    let mut value = 0.5 * (matkernel::logdet(&prec_full)? - matkernel::logdet(&prec_comp)?);
    for l in subset.members() {
        value += sensor_rate_term(inst, alloc, l)?;
    }
    Ok(value)
}

/// Checks the coupled distortion constraint and the per-sensor boxes.
/// The violation is the largest relative PSD-order deficit observed.
pub fn alloc_feasible(
    inst: &CeoInstance,
    alloc: &Allocation,
    target: &DistortionTarget,
) -> Result<Feasibility> {
    check_dims(inst, alloc, Some(target))?;
    let zero = SymMatrix::zeros(inst.dim());
    let mut worst = 0.0_f64;
    for l in 0..inst.sensors() {
        worst = worst.max(matkernel::psd_leq_violation(&zero, &alloc.mats[l])?);
        worst = worst.max(matkernel::psd_leq_violation(&alloc.mats[l], inst.noise(l))?);
    }
    let prec = effective_precision(inst, alloc, SubsetId::full(inst.sensors()))?;
    match matkernel::inverse(&prec) {
        Ok(cov) => worst = worst.max(matkernel::psd_leq_violation(&cov, target.matrix())?),
        Err(_) => worst = f64::INFINITY,
    }
    Ok(Feasibility {
        feasible: worst <= FEASIBILITY_TOL,
        max_violation: worst,
    })
}

/// The supermodular set function behind the outer region:
/// `f(A) = max(0, 1/2 logdet(P(A^c)^{-1}) - 1/2 logdet D)`.
pub fn set_function(
    inst: &CeoInstance,
    alloc: &Allocation,
    target: &DistortionTarget,
    subset: SubsetId,
) -> Result<f64> {
    check_dims(inst, alloc, Some(target))?;
    if !subset.within(inst.sensors()) {
        return Err(Error::DimensionMismatch {
            expected: inst.sensors(),
            got: subset.len(),
        });
    }
    let comp = subset.complement(inst.sensors());
    let prec = effective_precision(inst, alloc, comp)?;
    let log_ratio = -matkernel::logdet(&prec)? - matkernel::logdet(target.matrix())?;
    Ok(0.5 * log_plus(log_ratio))
}

/// Rates of the contra-polymatroid vertex selected by `order`: greedy
/// increments of the set function along the order, shifted back to the
/// original rate coordinates. `rates[l]` is indexed by sensor, not by
/// position in `order`.
pub fn vertex_rates(
    inst: &CeoInstance,
    alloc: &Allocation,
    target: &DistortionTarget,
    order: &[usize],
) -> Result<Vec<f64>> {
    check_dims(inst, alloc, Some(target))?;
    let l_total = inst.sensors();
    let mut seen = vec![false; l_total];
    if order.len() != l_total || order.iter().any(|&l| l >= l_total || std::mem::replace(&mut seen[l], true)) {
        return Err(Error::InvalidInstance(
            "order must be a permutation of the sensors".into(),
        ));
    }
    let mut rates = vec![0.0; l_total];
    let mut prefix = SubsetId::empty();
    let mut f_prev = set_function(inst, alloc, target, prefix)?;
    for &l in order {
        prefix = prefix.insert(l);
        let f_cur = set_function(inst, alloc, target, prefix)?;
        rates[l] = f_cur - f_prev + sensor_rate_term(inst, alloc, l)?;
        f_prev = f_cur;
    }
    Ok(rates)
}

/// Suffix precisions in sorted order: `g[k]` covers sorted sensors `k..L`,
/// so `g[L] = K_X^{-1}` and `g[0]` is the full-set precision.
fn suffix_precisions(
    inst: &CeoInstance,
    alloc: &Allocation,
    order: &[usize],
) -> Result<Vec<SymMatrix>> {
    let l_total = order.len();
    let mut g = vec![matkernel::inverse(inst.kx())?; l_total + 1];
    for k in (0..l_total).rev() {
        g[k] = g[k + 1].add(&sensor_contribution(inst, alloc, order[k])?);
    }
    Ok(g)
}

fn tangent_value(
    inst: &CeoInstance,
    alloc: &Allocation,
    target: &DistortionTarget,
    mu: &WeightVector,
    kind: TangentKind,
) -> Result<f64> {
    check_dims(inst, alloc, Some(target))?;
    let l_total = inst.sensors();
    if mu.len() != l_total {
        return Err(Error::DimensionMismatch {
            expected: l_total,
            got: mu.len(),
        });
    }
    if kind == TangentKind::ChenWang && l_total != 2 {
        return Err(Error::WrongSensorCount {
            expected: 2,
            got: l_total,
        });
    }
    let order = mu.descending_order();
    let g = suffix_precisions(inst, alloc, &order)?;
    let ld_d = matkernel::logdet(target.matrix())?;
    let ld_kx = matkernel::logdet(inst.kx())?;
    let ld_full = matkernel::logdet(&g[0])?;

    let mut value = 0.0;
    for t in 0..l_total.saturating_sub(1) {
        let w = 0.5 * (mu.get(order[t]) - mu.get(order[t + 1]));
        if w == 0.0 {
            continue;
        }
        let ld_suffix = matkernel::logdet(&g[t + 1])?;
        let term = match kind {
            TangentKind::Outer => log_plus(-ld_suffix - ld_d),
            TangentKind::ChenWang => -ld_suffix - ld_d,
            TangentKind::Inner => ld_full - ld_suffix,
        };
        value += w * term;
    }
    for &l in &order {
        value += mu.get(l) * sensor_rate_term(inst, alloc, l)?;
    }
    let mu_min = mu.get(*order.last().expect("L >= 1"));
    value += 0.5
        * mu_min
        * match kind {
            TangentKind::Inner => ld_kx + ld_full,
            _ => ld_kx - ld_d,
        };
    Ok(value)
}

/// Weighted sum-rate value of the outer region's tangent objective at the
/// given allocation.
pub fn outer_tangent_value(
    inst: &CeoInstance,
    alloc: &Allocation,
    target: &DistortionTarget,
    mu: &WeightVector,
) -> Result<f64> {
    tangent_value(inst, alloc, target, mu, TangentKind::Outer)
}

/// Inner-region analogue of [`outer_tangent_value`]; never below it on the
/// same allocation.
pub fn inner_tangent_value(
    inst: &CeoInstance,
    alloc: &Allocation,
    target: &DistortionTarget,
    mu: &WeightVector,
) -> Result<f64> {
    tangent_value(inst, alloc, target, mu, TangentKind::Inner)
}

/// Two-sensor tangent objective without the positivity operator; equals the
/// outer value whenever the clipped log argument is at least one.
pub fn chen_wang_tangent_value(
    inst: &CeoInstance,
    alloc: &Allocation,
    target: &DistortionTarget,
    mu: &WeightVector,
) -> Result<f64> {
    tangent_value(inst, alloc, target, mu, TangentKind::ChenWang)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_feasible_allocation, random_instance, random_mu, random_target, seeded};
    use rand::Rng as _;

    fn scalar_instance(var_x: f64, noise: &[f64]) -> CeoInstance {
        CeoInstance::new(
            SymMatrix::from_diagonal(&[var_x]),
            noise.iter().map(|v| SymMatrix::from_diagonal(&[*v])).collect(),
        )
        .unwrap()
    }

    fn full_alloc(inst: &CeoInstance) -> Allocation {
        Allocation::aligned(inst.noises().to_vec())
    }

    #[test]
    fn effective_precision_limits() {
        let mut rng = seeded(1);
        let inst = random_instance(&mut rng, 3, 2);
        let kx_inv = matkernel::inverse(inst.kx()).unwrap();

        let alloc = full_alloc(&inst);
        let empty = effective_precision(&inst, &alloc, SubsetId::empty()).unwrap();
        assert!((empty.as_dmatrix() - kx_inv.as_dmatrix()).norm() < 1e-12);
        let saturated = effective_precision(&inst, &alloc, SubsetId::full(3)).unwrap();
        assert!((saturated.as_dmatrix() - kx_inv.as_dmatrix()).norm() < 1e-10);

        let zero_alloc = Allocation::aligned(vec![SymMatrix::zeros(2); 3]);
        let full_info = effective_precision(&inst, &zero_alloc, SubsetId::full(3)).unwrap();
        let mut want = kx_inv;
        for l in 0..3 {
            want = want.add(&matkernel::inverse(inst.noise(l)).unwrap());
        }
        assert!((full_info.as_dmatrix() - want.as_dmatrix()).norm() < 1e-10);
    }

    #[test]
    fn outer_subset_examples() {
        let inst = scalar_instance(1.0, &[1.0]);
        let d_eq = DistortionTarget::scalar(1.0).unwrap();
        let alloc = full_alloc(&inst);
        assert_eq!(
            outer_subset_bound(&inst, &alloc, &d_eq, SubsetId::empty()).unwrap(),
            0.0
        );
        let v = outer_subset_bound(&inst, &alloc, &d_eq, SubsetId::from_members(&[0])).unwrap();
        assert!(v.abs() < 1e-12, "D = K_X needs zero rate, got {v}");

        // D = 0.6 with the saturating D_1 = 1/3: rate is (1/2) ln 5.
        let d = DistortionTarget::scalar(0.6).unwrap();
        let alloc = Allocation::aligned(vec![SymMatrix::from_diagonal(&[1.0 / 3.0])]);
        let v = outer_subset_bound(&inst, &alloc, &d, SubsetId::from_members(&[0])).unwrap();
        let want = 0.5 * 5.0_f64.ln();
        assert!((v - want).abs() < 1e-12);
        assert!((want - 0.8047189562170502).abs() < 1e-12);
    }

    #[test]
    fn singular_sensor_is_reported() {
        let inst = scalar_instance(1.0, &[1.0]);
        let d = DistortionTarget::scalar(0.6).unwrap();
        let alloc = Allocation::aligned(vec![SymMatrix::zeros(1)]);
        let r = outer_subset_bound(&inst, &alloc, &d, SubsetId::from_members(&[0]));
        assert!(matches!(r, Err(Error::SingularAllocation { sensor: 0 })));
    }

    #[test]
    fn inner_subset_examples_and_dominance() {
        let mut rng = seeded(2);
        let inst = random_instance(&mut rng, 2, 2);
        let alloc = full_alloc(&inst);
        for s in SubsetId::all(2) {
            assert!(inner_subset_bound(&inst, &alloc, s).unwrap().abs() < 1e-10);
        }

        for _ in 0..25 {
            let inst = random_instance(&mut rng, 3, 2);
            let target = random_target(&mut rng, &inst);
            let alloc = random_feasible_allocation(&mut rng, &inst, &target);
            for s in SubsetId::all(3) {
                let outer = outer_subset_bound(&inst, &alloc, &target, s).unwrap();
                let inner = inner_subset_bound(&inst, &alloc, s).unwrap();
                assert!(outer >= -1e-12);
                assert!(inner >= outer - 1e-10, "inner {inner} < outer {outer}");
            }
        }
    }

    #[test]
    fn alloc_feasible_examples() {
        let mut rng = seeded(3);
        let inst = random_instance(&mut rng, 2, 2);
        let alloc = full_alloc(&inst);

        let at_kx = DistortionTarget::new(inst.kx().clone()).unwrap();
        assert!(alloc_feasible(&inst, &alloc, &at_kx).unwrap().feasible);

        let below = DistortionTarget::new(inst.kx().scaled(0.7)).unwrap();
        assert!(!alloc_feasible(&inst, &alloc, &below).unwrap().feasible);

        let zero_alloc = Allocation::aligned(vec![SymMatrix::zeros(2); 2]);
        let mmse = crate::model::collective_mmse(&inst).unwrap();
        let just_above = DistortionTarget::new(mmse.scaled(1.05)).unwrap();
        assert!(alloc_feasible(&inst, &zero_alloc, &just_above).unwrap().feasible);
    }

    #[test]
    fn set_function_is_supermodular_exhaustively() {
        let mut rng = seeded(4);
        for _ in 0..10 {
            let inst = random_instance(&mut rng, 3, 2);
            let target = random_target(&mut rng, &inst);
            let alloc = random_feasible_allocation(&mut rng, &inst, &target);
            let f: Vec<f64> = SubsetId::all(3)
                .map(|s| set_function(&inst, &alloc, &target, s).unwrap())
                .collect();
            assert!(f[0].abs() < 1e-12, "f(empty) = {}", f[0]);
            for a in SubsetId::all(3) {
                for b in SubsetId::all(3) {
                    let lhs = f[a.union(b).bits() as usize] + f[a.intersection(b).bits() as usize];
                    let rhs = f[a.bits() as usize] + f[b.bits() as usize];
                    assert!(lhs >= rhs - 1e-9, "supermodularity violated: {lhs} < {rhs}");
                }
            }
        }
    }

    #[test]
    fn vertex_examples() {
        let inst = scalar_instance(1.0, &[1.0]);
        let d = DistortionTarget::scalar(0.6).unwrap();
        let alloc = Allocation::aligned(vec![SymMatrix::from_diagonal(&[1.0 / 3.0])]);
        let rates = vertex_rates(&inst, &alloc, &d, &[0]).unwrap();
        let f1 = set_function(&inst, &alloc, &d, SubsetId::from_members(&[0])).unwrap();
        assert!((rates[0] - (f1 + 0.5 * 3.0_f64.ln())).abs() < 1e-12);

        let inst2 = scalar_instance(1.0, &[1.0, 2.0]);
        let dkx = DistortionTarget::scalar(1.0).unwrap();
        let rates = vertex_rates(&inst2, &full_alloc(&inst2), &dkx, &[1, 0]).unwrap();
        assert!(rates.iter().all(|r| r.abs() < 1e-10));
    }

    #[test]
    fn vertex_satisfies_constraints_and_beats_sampled_points() {
        let mut rng = seeded(5);
        let inst = random_instance(&mut rng, 3, 2);
        let target = random_target(&mut rng, &inst);
        let alloc = random_feasible_allocation(&mut rng, &inst, &target);
        let mu = WeightVector::new(vec![1.7, 0.9, 0.4]).unwrap();
        let order = mu.descending_order();
        let rates = vertex_rates(&inst, &alloc, &target, &order).unwrap();

        // All 2^L - 1 subset constraints hold at the vertex.
        let mut r_max = 0.0_f64;
        for s in SubsetId::all_nonempty(3) {
            let bound = outer_subset_bound(&inst, &alloc, &target, s).unwrap();
            let sum: f64 = s.members().map(|l| rates[l]).sum();
            assert!(sum >= bound - 1e-9, "subset {s}: {sum} < {bound}");
            r_max = r_max.max(bound);
        }

        // Polyhedral brute force: no sampled feasible point in a large box
        // does better than the vertex on the weighted sum.
        let vertex_value: f64 = (0..3).map(|l| mu.get(l) * rates[l]).sum();
        let hi = 2.0 * r_max + 1.0;
        let mut best = f64::INFINITY;
        let mut accepted = 0u32;
        for _ in 0..100_000 {
            let cand = [
                rng.random_range(0.0..hi),
                rng.random_range(0.0..hi),
                rng.random_range(0.0..hi),
            ];
            let ok = SubsetId::all_nonempty(3).all(|s| {
                let sum: f64 = s.members().map(|l| cand[l]).sum();
                sum >= outer_subset_bound(&inst, &alloc, &target, s).unwrap()
            });
            if ok {
                accepted += 1;
                best = best.min((0..3).map(|l| mu.get(l) * cand[l]).sum());
            }
        }
        assert!(accepted > 1000, "sampler starved: {accepted}");
        assert!(vertex_value <= best + 1e-9, "vertex {vertex_value} vs sampled {best}");
    }

    #[test]
    fn tangent_trivial_cases() {
        let mut rng = seeded(6);
        let inst = random_instance(&mut rng, 2, 2);
        let alloc = full_alloc(&inst);
        let dkx = DistortionTarget::new(inst.kx().clone()).unwrap();
        let mu = WeightVector::new(vec![1.0, 1.0]).unwrap();
        assert!(outer_tangent_value(&inst, &alloc, &dkx, &mu).unwrap().abs() < 1e-10);
        assert!(chen_wang_tangent_value(&inst, &alloc, &dkx, &mu).unwrap().abs() < 1e-10);

        // D_l = Sigma_l zeroes the inner value regardless of D.
        let d_any = random_target(&mut rng, &inst);
        assert!(inner_tangent_value(&inst, &alloc, &d_any, &mu).unwrap().abs() < 1e-10);
    }

    #[test]
    fn single_sensor_tangent_collapses_to_subset_bound() {
        let inst = scalar_instance(1.0, &[1.0]);
        let d = DistortionTarget::scalar(0.6).unwrap();
        let alloc = Allocation::aligned(vec![SymMatrix::from_diagonal(&[1.0 / 3.0])]);
        let mu = WeightVector::new(vec![1.0]).unwrap();
        let tangent = outer_tangent_value(&inst, &alloc, &d, &mu).unwrap();
        let subset = outer_subset_bound(&inst, &alloc, &d, SubsetId::from_members(&[0])).unwrap();
        assert!((tangent - subset).abs() < 1e-14);
    }

    #[test]
    fn tangent_matches_vertex_and_orders_dominate() {
        let mut rng = seeded(7);
        for _ in 0..30 {
            let l = if rng.random_range(0.0..1.0) < 0.5 { 2 } else { 3 };
            let inst = random_instance(&mut rng, l, 2);
            let target = random_target(&mut rng, &inst);
            let alloc = random_feasible_allocation(&mut rng, &inst, &target);
            let mu = WeightVector::new(random_mu(&mut rng, l)).unwrap();

            let tangent = outer_tangent_value(&inst, &alloc, &target, &mu).unwrap();
            let rates = vertex_rates(&inst, &alloc, &target, &mu.descending_order()).unwrap();
            let weighted: f64 = (0..l).map(|i| mu.get(i) * rates[i]).sum();
            assert!((tangent - weighted).abs() < 1e-12, "{tangent} vs {weighted}");

            let inner = inner_tangent_value(&inst, &alloc, &target, &mu).unwrap();
            assert!(inner >= tangent - 1e-12);
            if l == 2 {
                let chen = chen_wang_tangent_value(&inst, &alloc, &target, &mu).unwrap();
                assert!(chen <= tangent + 1e-12);
            }
        }
    }

    #[test]
    fn tied_weights_are_order_invariant() {
        let mut rng = seeded(8);
        let inst = random_instance(&mut rng, 3, 2);
        let target = random_target(&mut rng, &inst);
        let alloc = random_feasible_allocation(&mut rng, &inst, &target);
        let mu = WeightVector::new(vec![1.0, 0.5, 0.5]).unwrap();
        let v = outer_tangent_value(&inst, &alloc, &target, &mu).unwrap();

        // Swap the two tied sensors, keeping the weights in place.
        let swapped_inst = CeoInstance::new(
            inst.kx().clone(),
            vec![inst.noise(0).clone(), inst.noise(2).clone(), inst.noise(1).clone()],
        )
        .unwrap();
        let swapped_alloc = Allocation::aligned(vec![
            alloc.mats[0].clone(),
            alloc.mats[2].clone(),
            alloc.mats[1].clone(),
        ]);
        let v_swapped = outer_tangent_value(&swapped_inst, &swapped_alloc, &target, &mu).unwrap();
        assert!((v - v_swapped).abs() < 1e-12);
    }

    #[test]
    fn chen_wang_needs_two_sensors() {
        let mut rng = seeded(9);
        let inst = random_instance(&mut rng, 3, 2);
        let target = random_target(&mut rng, &inst);
        let alloc = full_alloc(&inst);
        let mu = WeightVector::new(vec![1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(
            chen_wang_tangent_value(&inst, &alloc, &target, &mu),
            Err(Error::WrongSensorCount { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn saturated_constraint_means_unclipped_outer_and_chen_equality() {
        // The Corollary-style witness saturates the distortion constraint:
        // K_X = Sigma_1 = Sigma_2 = 1, D = 0.75, D_1 = 1, D_2 = 2/3.
        let inst = scalar_instance(1.0, &[1.0, 1.0]);
        let d = DistortionTarget::scalar(0.75).unwrap();
        let alloc = Allocation::aligned(vec![
            SymMatrix::from_diagonal(&[1.0]),
            SymMatrix::from_diagonal(&[2.0 / 3.0]),
        ]);
        let feas = alloc_feasible(&inst, &alloc, &d).unwrap();
        assert!(feas.max_violation < 1e-9);
        let mu = WeightVector::new(vec![4.0, 1.0]).unwrap();
        let outer = outer_tangent_value(&inst, &alloc, &d, &mu).unwrap();
        let chen = chen_wang_tangent_value(&inst, &alloc, &d, &mu).unwrap();
        assert!((outer - chen).abs() < 1e-12);
        for s in SubsetId::all_nonempty(2) {
            assert!(outer_subset_bound(&inst, &alloc, &d, s).unwrap() >= -1e-12);
        }
    }
}
