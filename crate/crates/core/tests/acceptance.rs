//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//!
//! Criteria (tolerances pinned in the asserts):
//! 1. scalar tightness of the inner/outer minima, by grid and by optimizer;
//! 2. the two-sensor strict-gap reproduction with its closed forms;
//! 3. the parallel counterexample with its assumption margins;
//! 4. supermodularity of the set function, exhaustively at L = 3;
//! 5. vertex/tangent consistency of the contra-polymatroid form;
//! 6. pointwise dominance chen-wang <= outer <= inner;
//! 7. general-channel forms reproduce aligned values under whitening;
//! 8. enhancement limit on the bundled rank-deficient instance;
//! 9. analytic gradients vs. central finite differences.

use std::time::Instant;

use ceo_region_core::bounds::{
    chen_wang_tangent_value, general_subset_bound, inner_subset_bound, inner_tangent_value,
    outer_subset_bound, outer_tangent_value, vertex_rates, whiten_allocation, Allocation,
    BoundKind, SubsetId, TangentKind, WeightVector,
};
use ceo_region_core::matkernel::{GenMatrix, SymMatrix};
use ceo_region_core::model::{
    align_to_general, DistortionTarget, GeneralCeoInstance, ScalarCeoInstance,
};
use ceo_region_core::optimize::{
    grid_oracle, minimize_tangent, GridOptions, OptimizerOptions, WhitenedTangent,
};
use ceo_region_core::random::{
    random_feasible_allocation, random_instance, random_mu, random_target, seeded, Rng,
};
use ceo_region_core::verify::{check_supermodularity, demo_gap, demo_parallel, enhancement_probe};
use rand::Rng as _;

fn pass(criterion: usize, detail: &str) {
    println!("[PASS] criterion {criterion}: {detail}");
}

fn random_scalar_instance(rng: &mut Rng, l: usize) -> (ScalarCeoInstance, f64) {
    let noise: Vec<f64> = (0..l).map(|_| rng.random_range(0.5..2.0)).collect();
    let inst = ScalarCeoInstance::new(rng.random_range(0.5..2.0), noise).unwrap();
    let d = rng.random_range(inst.mmse() * 1.05..inst.var_x * 0.95);
    (inst, d)
}

#[test]
fn criterion_1_scalar_tightness() {
    let start = Instant::now();
    let mut rng = seeded(1001);
    let opts = OptimizerOptions {
        starts: 8,
        max_iters: 1000,
        ..OptimizerOptions::default()
    };
    let mut worst_grid = 0.0_f64;
    let mut worst_min = 0.0_f64;
    for case in 0..20 {
        let l = if case % 2 == 0 { 2 } else { 3 };
        let (inst, d) = random_scalar_instance(&mut rng, l);
        let m_inst = inst.to_matrix_instance();
        let target = DistortionTarget::scalar(d).unwrap();
        let gopts = if l == 2 {
            GridOptions {
                resolution: 201,
                refine_levels: 4,
            }
        } else {
            GridOptions {
                resolution: 81,
                refine_levels: 6,
            }
        };
        for i in 0..10 {
            let t = 0.15 + 0.85 * i as f64 / 9.0;
            let mut mu_raw = vec![1.0, t];
            if l == 3 {
                mu_raw.push(0.6 * t);
            }
            let mu = WeightVector::new(mu_raw).unwrap();

            let g_outer = grid_oracle(TangentKind::Outer, &m_inst, &target, &mu, &gopts).unwrap();
            let g_inner = grid_oracle(TangentKind::Inner, &m_inst, &target, &mu, &gopts).unwrap();
            let grid_diff = (g_outer.value - g_inner.value).abs();
            assert!(grid_diff < 1e-5, "grid tightness: case {case}, |diff| = {grid_diff:.3e}");
            worst_grid = worst_grid.max(grid_diff);

            let m_outer = minimize_tangent(TangentKind::Outer, &m_inst, &target, &mu, &opts).unwrap();
            let m_inner = minimize_tangent(TangentKind::Inner, &m_inst, &target, &mu, &opts).unwrap();
            let min_diff = (m_outer.value - m_inner.value).abs();
            assert!(min_diff < 1e-4, "minimizer tightness: case {case}, |diff| = {min_diff:.3e}");
            worst_min = worst_min.max(min_diff);
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}, budget 30 s");
    pass(
        1,
        &format!(
            "20 scalar instances x 10 weights: |inner - outer| <= {worst_grid:.2e} (grid, tol 1e-5), <= {worst_min:.2e} (minimizer, tol 1e-4), {elapsed:?}"
        ),
    );
}

#[test]
fn criterion_2_gap_reproduction() {
    let start = Instant::now();
    let report = demo_gap(1.0, 4.0, 0.75).unwrap();
    assert!(report.assumptions_hold(), "assumption set must hold at the demo point");
    assert!(report.conclusion.pass, "{}", report.conclusion.statement);

    let tplus = report.quantities["t_plus"];
    assert!((tplus - 0.5 * std::f64::consts::LN_2).abs() < 1e-10, "T+ = {tplus}");
    let witness_delta = (tplus - report.quantities["t_plus_witness"]).abs();
    assert!(witness_delta < 1e-10, "witness cross-check off by {witness_delta:.3e}");

    let gap = report.quantities["gap"];
    let exact = 1.5 * (9.0_f64 / 8.0).ln() - 0.5 * (4.0_f64 / 3.0).ln();
    assert!((gap - exact).abs() < 1e-10, "gap {gap} vs exact {exact}");
    assert!(gap >= 0.03 && gap > 0.02);

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}, budget 1 s");
    pass(
        2,
        &format!("T+ = ln(2)/2 to 1e-10, strict gap {gap:.6} nats, {elapsed:?}"),
    );
}

#[test]
fn criterion_3_parallel_counterexample() {
    let start = Instant::now();
    let report = demo_parallel(1.0, 0.4, 0.8, 4.0).unwrap();
    assert!(report.assumptions_hold());
    assert!(report.conclusion.pass, "{}", report.conclusion.statement);

    let expected_margins = [
        ("parallel_first", 0.75 - 0.25),
        ("parallel_second", 1.0 - 1.0 / 3.0),
        ("parallel_third", 2.0 - 5.0 / 3.0),
        ("parallel_fourth", 1.25 - 1.2),
    ];
    for (name, want) in expected_margins {
        let a = report.assumptions.iter().find(|a| a.name == name).unwrap();
        assert!((a.margin - want).abs() < 1e-12, "{name}: {} vs {want}", a.margin);
    }

    let gap = report.quantities["gap"];
    assert!(gap > 1e-3, "gap {gap}");
    let grid_delta = (report.quantities["t_parallel"] - report.quantities["t_parallel_grid"]).abs();
    assert!(grid_delta < 1e-5, "grid cross-check off by {grid_delta:.3e}");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}, budget 5 s");
    pass(
        3,
        &format!("margins match, Tp - T+_upper = {gap:.6} nats, grid agreement {grid_delta:.2e}, {elapsed:?}"),
    );
}

#[test]
fn criterion_4_supermodularity() {
    let start = Instant::now();
    let mut rng = seeded(1004);
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let inst = random_instance(&mut rng, 3, 2);
        let target = random_target(&mut rng, &inst);
        for _ in 0..20 {
            let alloc = random_feasible_allocation(&mut rng, &inst, &target);
            let report = check_supermodularity(&inst, &target, &alloc, 4).unwrap();
            assert!(
                report.worst_violation >= -1e-9,
                "violation {:.3e}",
                report.worst_violation
            );
            worst = worst.min(report.worst_violation);
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}, budget 10 s");
    pass(
        4,
        &format!("50 instances x 20 allocations, worst slack {worst:.2e} >= -1e-9, {elapsed:?}"),
    );
}

#[test]
fn criterion_5_vertex_tangent_consistency() {
    let mut rng = seeded(1005);
    let mut worst_slack = f64::INFINITY;
    let mut worst_gap = 0.0_f64;
    for _ in 0..20 {
        let inst = random_instance(&mut rng, 3, 2);
        let target = random_target(&mut rng, &inst);
        let alloc = random_feasible_allocation(&mut rng, &inst, &target);
        let mu = WeightVector::new(random_mu(&mut rng, 3)).unwrap();
        let rates = vertex_rates(&inst, &alloc, &target, &mu.descending_order()).unwrap();
        for s in SubsetId::all_nonempty(3) {
            let bound = outer_subset_bound(&inst, &alloc, &target, s).unwrap();
            let sum: f64 = s.members().map(|l| rates[l]).sum();
            let slack = sum - bound;
            assert!(slack >= -1e-9, "subset {s}: slack {slack:.3e}");
            worst_slack = worst_slack.min(slack);
        }
        let weighted: f64 = (0..3).map(|l| mu.get(l) * rates[l]).sum();
        let tangent = outer_tangent_value(&inst, &alloc, &target, &mu).unwrap();
        let gap = (weighted - tangent).abs();
        assert!(gap < 1e-12, "vertex/tangent gap {gap:.3e}");
        worst_gap = worst_gap.max(gap);
    }
    pass(
        5,
        &format!("20 allocations: all subset slacks >= {worst_slack:.2e}, tangent identity to {worst_gap:.2e}"),
    );
}

#[test]
fn criterion_6_pointwise_dominance() {
    let mut rng = seeded(1006);
    let mut worst = f64::INFINITY;
    for _ in 0..100 {
        let inst = random_instance(&mut rng, 2, 2);
        let target = random_target(&mut rng, &inst);
        let alloc = random_feasible_allocation(&mut rng, &inst, &target);
        let mu = WeightVector::new(random_mu(&mut rng, 2)).unwrap();
        let chen = chen_wang_tangent_value(&inst, &alloc, &target, &mu).unwrap();
        let outer = outer_tangent_value(&inst, &alloc, &target, &mu).unwrap();
        let inner = inner_tangent_value(&inst, &alloc, &target, &mu).unwrap();
        let slack = (outer - chen).min(inner - outer);
        assert!(slack >= -1e-12, "dominance slack {slack:.3e}");
        worst = worst.min(slack);
    }
    pass(6, &format!("100 triples: chen <= outer <= inner, worst slack {worst:.2e}"));
}

#[test]
fn criterion_7_general_aligned_equivalence() {
    let mut rng = seeded(1007);
    let mut worst = 0.0_f64;
    for case in 0..20 {
        let l = 2 + case % 2;
        let m = 1 + case % 3;
        let inst = random_instance(&mut rng, l, m);
        let target = random_target(&mut rng, &inst);
        let gen = align_to_general(&inst).unwrap();
        let alloc = random_feasible_allocation(&mut rng, &inst, &target);
        let whitened = whiten_allocation(&inst, &alloc).unwrap();
        for s in SubsetId::all(l) {
            let outer = outer_subset_bound(&inst, &alloc, &target, s).unwrap();
            let gen_outer = general_subset_bound(&gen, &whitened, &target, s, BoundKind::Outer).unwrap();
            let inner = inner_subset_bound(&inst, &alloc, s).unwrap();
            let gen_inner = general_subset_bound(&gen, &whitened, &target, s, BoundKind::Inner).unwrap();
            let diff = (outer - gen_outer).abs().max((inner - gen_inner).abs());
            assert!(diff < 1e-10, "case {case} subset {s}: diff {diff:.3e}");
            worst = worst.max(diff);
        }
    }
    pass(7, &format!("20 instances, all subsets: max |aligned - general| = {worst:.2e} < 1e-10"));
}

#[test]
fn criterion_8_enhancement_limit() {
    // The bundled instance with one rank-deficient channel.
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../instances/general_rank_deficient.json"
    ))
    .expect("bundled instance present");
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    let rows = |v: &serde_json::Value| -> Vec<Vec<f64>> {
        v.as_array()
            .unwrap()
            .iter()
            .map(|r| r.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect())
            .collect()
    };
    let kx_rows = rows(&json["kx"]);
    let kx = SymMatrix::from_rows(&kx_rows).unwrap();
    let channels: Vec<GenMatrix> = json["sensors"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| {
            let h = rows(&s["h"]);
            GenMatrix::from_fn(h.len(), h[0].len(), |i, j| h[i][j])
        })
        .collect();
    let has_deficient = channels.iter().any(|h| {
        let svd = h.clone().svd(false, false);
        svd.singular_values.iter().any(|s| *s < 1e-12)
    });
    assert!(has_deficient, "bundled instance must have a rank-deficient channel");
    let inst = GeneralCeoInstance::new(kx, channels).unwrap();

    let alloc = Allocation::general(vec![SymMatrix::identity(2).scaled(0.5); 2]);
    let alphas = [1e-2, 1e-4, 1e-6];
    let table = enhancement_probe(&inst, &alloc, SubsetId::empty(), &alphas).unwrap();
    assert!(table[0].distance > table[1].distance && table[1].distance > table[2].distance);
    let last = table[2].distance;
    assert!(last < 1e-6, "final distance {last:.3e}");
    pass(
        8,
        &format!(
            "distances {:.3e} > {:.3e} > {:.3e}, final < 1e-6",
            table[0].distance, table[1].distance, table[2].distance
        ),
    );
}

#[test]
fn criterion_9_gradient_correctness() {
    let mut rng = seeded(1009);
    let mut checked = 0;
    let mut worst = 0.0_f64;
    while checked < 50 {
        let m = 1 + checked % 2;
        let inst = random_instance(&mut rng, 2, m);
        let target = random_target(&mut rng, &inst);
        let alloc = random_feasible_allocation(&mut rng, &inst, &target);
        let mu = WeightVector::new(random_mu(&mut rng, 2)).unwrap();
        let mut usable = true;
        for kind in [TangentKind::Outer, TangentKind::Inner, TangentKind::ChenWang] {
            let problem = WhitenedTangent::aligned(&inst, &target, &mu, kind).unwrap();
            let e = problem.whiten(&alloc).unwrap();
            // Stay clear of the clipped term's kink: finite differences
            // straddle it.
            if problem.min_clip_distance(&e) < 1e-3 {
                usable = false;
                break;
            }
            let (_, grads) = problem.value_and_gradient(&e);
            let grads = grads.expect("interior point");
            for l in 0..2 {
                let fd = fd_gradient(&problem, &e, l, 1e-5);
                let diff = (fd.as_dmatrix() - grads[l].as_dmatrix()).norm();
                let rel = diff / fd.as_dmatrix().norm().max(1.0);
                assert!(rel < 1e-4, "{kind:?} sensor {l}: relative error {rel:.3e}");
                worst = worst.max(rel);
            }
        }
        if usable {
            checked += 1;
        }
    }
    pass(
        9,
        &format!("50 interior points x 3 objectives: max relative gradient error {worst:.2e} < 1e-4"),
    );
}

/// Central finite differences over the symmetric perturbation basis:
/// the independent oracle for criterion 9.
fn fd_gradient(problem: &WhitenedTangent, e: &[SymMatrix], l: usize, h: f64) -> SymMatrix {
    let n = e[l].dim();
    let mut fd = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut bump = |s: f64| -> f64 {
                let mut pert = e.to_vec();
                let mut rows: Vec<Vec<f64>> = (0..n)
                    .map(|a| (0..n).map(|b| pert[l].get(a, b)).collect())
                    .collect();
                rows[i][j] += s;
                if i != j {
                    rows[j][i] += s;
                }
                pert[l] = SymMatrix::from_rows(&rows).unwrap();
                problem.value(&pert)
            };
            let slope = (bump(h) - bump(-h)) / (2.0 * h);
            let gij = if i == j { slope } else { 0.5 * slope };
            fd[i][j] = gij;
            fd[j][i] = gij;
        }
    }
    SymMatrix::from_rows(&fd).unwrap()
}
