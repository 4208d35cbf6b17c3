//! Brute-force grid oracle for instances with few scalar degrees of freedom.
//!
//! Exhaustively grids the allocation box (per sensor, per diagonal
//! component), filters by the coupled distortion constraint, evaluates the
//! tangent objective in plain scalar arithmetic, and refines locally around
//! the best cell. Entirely independent of the continuous optimizer: no
//! matrices, no gradients, no randomness.

use crate::bounds::{
    alloc_feasible, inner_subset_bound, outer_subset_bound, Allocation, BoundReport, Feasibility,
    SubsetId, TangentKind, WeightVector,
};
use crate::error::{Error, Result};
use crate::matkernel::SymMatrix;
use crate::model::{CeoInstance, DistortionTarget};

/// Maximum scalar degrees of freedom the oracle will enumerate.
pub const MAX_GRID_DOF: usize = 4;

/// Options for [`grid_oracle`].
#[derive(Debug, Clone, Copy)]
pub struct GridOptions {
    /// Grid points per scalar degree of freedom.
    pub resolution: usize,
    /// Number of local refinement passes after the initial sweep.
    pub refine_levels: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            resolution: 201,
            refine_levels: 2,
        }
    }
}

/// Leaf feasibility slack: grid points must satisfy the constraint on the
/// feasible side, up to round-off.
const LEAF_TOL: f64 = 1e-12;

struct GridProblem {
    kind: TangentKind,
    sensors: usize,
    comps: usize,
    /// Sorted positions to original sensors, weight descending.
    order: Vec<usize>,
    mu_sorted: Vec<f64>,
    /// Noise variances by sorted position, then component.
    noise: Vec<Vec<f64>>,
    kx_diag: Vec<f64>,
    d_diag: Vec<f64>,
}

impl GridProblem {
    fn axis_count(&self) -> usize {
        self.sensors * self.comps
    }

    /// Processing order: lowest-weight sensor first, components in order.
    fn axis(&self, j: usize) -> (usize, usize) {
        let pos = self.sensors - 1 - j / self.comps;
        (pos, j % self.comps)
    }
}

struct Search<'a> {
    prob: &'a GridProblem,
    grids: Vec<Vec<f64>>,
    sp: Vec<f64>,
    cur: Vec<usize>,
    best: f64,
    best_idx: Vec<usize>,
    final_const: f64,
}

impl Search<'_> {
    fn recurse(&mut self, j: usize, acc: f64) {
        if j == self.prob.axis_count() {
            for m in 0..self.prob.comps {
                if self.sp[m] * self.prob.d_diag[m] < 1.0 - LEAF_TOL {
                    return;
                }
            }
            let mut total = acc + self.final_const;
            if self.prob.kind == TangentKind::Inner {
                let mu_max = self.prob.mu_sorted[0];
                total += 0.5 * mu_max * self.sp.iter().map(|s| s.ln()).sum::<f64>();
            }
            if total < self.best {
                self.best = total;
                self.best_idx.copy_from_slice(&self.cur);
            }
            return;
        }
        let (pos, comp) = self.prob.axis(j);
        let mut acc = acc;
        if comp == 0 && pos + 1 < self.prob.sensors {
            // Entering sensor `pos`: the suffix term over deeper sensors.
            let w = 0.5 * (self.prob.mu_sorted[pos] - self.prob.mu_sorted[pos + 1]);
            if w != 0.0 {
                let log_ratio: f64 = (0..self.prob.comps)
                    .map(|m| -(self.prob.d_diag[m].ln()) - self.sp[m].ln())
                    .sum();
                acc += w * match self.prob.kind {
                    TangentKind::Outer => log_ratio.max(0.0),
                    TangentKind::ChenWang => log_ratio,
                    TangentKind::Inner => -self.sp.iter().map(|s| s.ln()).sum::<f64>(),
                };
            }
        }
        let noise = self.prob.noise[pos][comp];
        let half_mu = 0.5 * self.prob.mu_sorted[pos];
        let saved = self.sp[comp];
        for i in 0..self.grids[j].len() {
            let v = self.grids[j][i];
            if v <= 0.0 {
                continue;
            }
            self.cur[j] = i;
            self.sp[comp] = saved + (noise - v) / (noise * noise);
            self.recurse(j + 1, acc + half_mu * (noise / v).ln());
        }
        self.sp[comp] = saved;
    }
}

fn is_diagonal(m: &SymMatrix) -> bool {
    let scale = m.max_abs_entry().max(1.0);
    for i in 0..m.dim() {
        for j in 0..m.dim() {
            if i != j && m.get(i, j).abs() > 1e-12 * scale {
                return false;
            }
        }
    }
    true
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![0.5 * (lo + hi)];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + step * i as f64).collect()
}

/// Exhaustive grid minimization of a tangent objective. Supports scalar
/// instances (`M = 1`) and fully diagonal instances with at most
/// [`MAX_GRID_DOF`] allocation degrees of freedom.
pub fn grid_oracle(
    kind: TangentKind,
    inst: &CeoInstance,
    target: &DistortionTarget,
    mu: &WeightVector,
    gopts: &GridOptions,
) -> Result<BoundReport> {
    if gopts.resolution < 3 || gopts.resolution > 100_000 {
        return Err(Error::InvalidInstance("grid resolution out of range".into()));
    }
    let l_total = inst.sensors();
    let m_total = inst.dim();
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
    let diagonal = m_total == 1
        || (is_diagonal(inst.kx())
            && is_diagonal(target.matrix())
            && inst.noises().iter().all(is_diagonal));
    if !diagonal {
        return Err(Error::TooManyDegreesOfFreedom {
            max: MAX_GRID_DOF,
            got: l_total * m_total * (m_total + 1) / 2,
        });
    }
    let dof = l_total * m_total;
    if dof > MAX_GRID_DOF {
        return Err(Error::TooManyDegreesOfFreedom {
            max: MAX_GRID_DOF,
            got: dof,
        });
    }

    let order = mu.descending_order();
    let prob = GridProblem {
        kind,
        sensors: l_total,
        comps: m_total,
        mu_sorted: order.iter().map(|l| mu.get(*l)).collect(),
        noise: order
            .iter()
            .map(|l| (0..m_total).map(|m| inst.noise(*l).get(m, m)).collect())
            .collect(),
        kx_diag: (0..m_total).map(|m| inst.kx().get(m, m)).collect(),
        d_diag: (0..m_total).map(|m| target.matrix().get(m, m)).collect(),
        order,
    };

    let mu_min = *prob.mu_sorted.last().expect("L >= 1");
    let final_const = match kind {
        TangentKind::Inner => {
            0.5 * mu_min * prob.kx_diag.iter().map(|k| k.ln()).sum::<f64>()
        }
        _ => {
            0.5 * mu_min
                * (0..m_total)
                    .map(|m| (prob.kx_diag[m] / prob.d_diag[m]).ln())
                    .sum::<f64>()
        }
    };

    // Trust-region style refinement around the best cell. A window that the
    // best point pushes against doubles and recenters (minima can sit far
    // along a diagonal valley of the distortion boundary); a window that
    // contains its best point strictly inside shrinks. Only shrinking passes
    // count toward `refine_levels`.
    let caps: Vec<f64> = (0..prob.axis_count())
        .map(|j| {
            let (pos, comp) = prob.axis(j);
            prob.noise[pos][comp]
        })
        .collect();
    let mut widths: Vec<f64> = caps.clone();
    let mut centers: Vec<f64> = caps.iter().map(|c| 0.5 * c).collect();

    let mut best = f64::INFINITY;
    let mut best_vals: Vec<Option<f64>> = vec![None; prob.axis_count()];
    let mut shrinks = 0;
    let max_passes = 12 * (gopts.refine_levels + 2);
    for _pass in 0..max_passes {
        let ranges: Vec<(f64, f64)> = (0..prob.axis_count())
            .map(|j| {
                let lo = (centers[j] - 0.5 * widths[j]).max(0.0);
                let hi = (centers[j] + 0.5 * widths[j]).min(caps[j]);
                (lo, hi)
            })
            .collect();
        let grids: Vec<Vec<f64>> = ranges
            .iter()
            .enumerate()
            .map(|(j, (lo, hi))| {
                let mut g = linspace(*lo, *hi, gopts.resolution);
                // Anchor with the axis's upper face and the best point so
                // far: face optima stay reachable, the search cannot regress.
                if caps[j] > *hi {
                    g.push(caps[j]);
                }
                if let Some(v) = best_vals[j] {
                    if v < *lo || v > *hi {
                        g.push(v);
                    }
                }
                g
            })
            .collect();
        let mut search = Search {
            prob: &prob,
            sp: (0..m_total).map(|m| 1.0 / prob.kx_diag[m]).collect(),
            cur: vec![0; prob.axis_count()],
            best: f64::INFINITY,
            best_idx: vec![0; prob.axis_count()],
            final_const,
            grids,
        };
        search.recurse(0, 0.0);
        if !search.best.is_finite() {
            return Err(Error::Infeasible);
        }
        let improved = search.best < best - 1e-13 * best.abs().max(1.0);
        if search.best < best {
            best = search.best;
            best_vals = (0..prob.axis_count())
                .map(|j| Some(search.grids[j][search.best_idx[j]]))
                .collect();
        }

        for j in 0..prob.axis_count() {
            let (lo, hi) = ranges[j];
            let h = (hi - lo) / (gopts.resolution - 1) as f64;
            let v = search.grids[j][search.best_idx[j]];
            // An axis whose best pushes its window edge gets a doubled
            // window; minima can sit far along a diagonal valley.
            let pushes_low = v < lo + 2.0 * h && lo > 0.0;
            let pushes_high = v > hi - 2.0 * h && hi < caps[j];
            if pushes_low || pushes_high || v < lo || v > hi {
                widths[j] = (2.0 * widths[j]).min(caps[j]);
            }
            centers[j] = v;
        }
        if !improved {
            // The lattice is exhausted at this scale; zoom in.
            shrinks += 1;
            if shrinks > gopts.refine_levels {
                break;
            }
            for (j, w) in widths.iter_mut().enumerate() {
                let h = *w / (gopts.resolution - 1) as f64;
                *w = (20.0 * h).min(caps[j]);
            }
        }
    }

    // Rebuild the winning allocation in original sensor indexing.
    let mut d_vals = vec![vec![0.0; m_total]; l_total];
    for j in 0..prob.axis_count() {
        let (pos, comp) = prob.axis(j);
        d_vals[prob.order[pos]][comp] = best_vals[j].ok_or(Error::Infeasible)?;
    }
    let allocation = Allocation::aligned(
        d_vals.iter().map(|row| SymMatrix::from_diagonal(row)).collect(),
    );
    let feasibility = alloc_feasible(inst, &allocation, target)?;
    let mut per_subset = std::collections::BTreeMap::new();
    if kind != TangentKind::ChenWang {
        for s in SubsetId::all_nonempty(l_total) {
            let v = match kind {
                TangentKind::Outer => outer_subset_bound(inst, &allocation, target, s)?,
                _ => inner_subset_bound(inst, &allocation, s)?,
            };
            per_subset.insert(s, v);
        }
    }
    Ok(BoundReport {
        value: best,
        allocation,
        feasibility: Feasibility {
            feasible: feasibility.feasible,
            max_violation: feasibility.max_violation,
        },
        per_subset,
    })
}
