//! Exact scalar-model solve on the equality manifold.
//!
//! For the scalar model the tangent minimum is attained where the coupled
//! distortion constraint holds with equality. In the precision coordinates
//! `u_l = (sigma_l^2 - D_l) / sigma_l^4` the manifold is the box-bounded
//! hyperplane `sum u_l = 1/D - 1/sigma_X^2`, every clipped log is plain, and
//! the restricted objective is convex; projected gradient descent is exact
//! here. On this manifold the outer and inner objectives coincide, which is
//! what makes the scalar region tight.

use crate::bounds::scalar::{scalar_subset_bound, scalar_tangent_value};
use crate::bounds::{
    alloc_feasible, Allocation, BoundReport, SubsetId, TangentKind, WeightVector,
};
use crate::error::{Error, Result};
use crate::matkernel::SymMatrix;
use crate::model::{DistortionTarget, ScalarCeoInstance};

/// Projects onto `{0 <= u <= cap, sum u = total}` by bisecting the shift of
/// a clamped translation.
fn project_simplex_box(v: &[f64], cap: &[f64], total: f64) -> Vec<f64> {
    let shifted_sum = |lambda: f64| -> f64 {
        v.iter()
            .zip(cap)
            .map(|(vi, ci)| (vi - lambda).clamp(0.0, *ci))
            .sum()
    };
    let mut lo = v
        .iter()
        .zip(cap)
        .map(|(vi, ci)| vi - ci)
        .fold(f64::INFINITY, f64::min);
    let mut hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    lo -= 1.0;
    hi += 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if shifted_sum(mid) > total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    v.iter()
        .zip(cap)
        .map(|(vi, ci)| (vi - lambda).clamp(0.0, *ci))
        .collect()
}

struct ManifoldObjective<'a> {
    inst: &'a ScalarCeoInstance,
    d: f64,
    /// Sorted positions to original sensors.
    order: Vec<usize>,
    mu: Vec<f64>,
}

impl ManifoldObjective<'_> {
    fn d_alloc(&self, u: &[f64]) -> Vec<f64> {
        (0..u.len())
            .map(|l| {
                let nv = self.inst.noise_vars[l];
                nv - nv * nv * u[l]
            })
            .collect()
    }

    fn value(&self, u: &[f64]) -> f64 {
        let alloc = self.d_alloc(u);
        if alloc.iter().any(|d| *d <= 0.0) {
            return f64::INFINITY;
        }
        scalar_tangent_value(self.inst, self.d, &alloc, &self.mu, TangentKind::Outer)
            .expect("positive allocation on the manifold")
    }

    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let l_total = u.len();
        let mut suffix = vec![1.0 / self.inst.var_x; l_total + 1];
        for k in (0..l_total).rev() {
            suffix[k] = suffix[k + 1] + u[self.order[k]];
        }
        let mut grad = vec![0.0; l_total];
        // Suffix terms: d/du_j of -w_t ln(suffix_{t+1}) for positions j > t.
        let mut acc = 0.0;
        for pos in 0..l_total {
            if pos >= 1 {
                let t = pos - 1;
                let w = 0.5 * (self.mu[self.order[t]] - self.mu[self.order[t + 1]]);
                acc += -w / suffix[t + 1];
            }
            grad[self.order[pos]] = acc;
        }
        for l in 0..l_total {
            let nv = self.inst.noise_vars[l];
            let d_l = nv - nv * nv * u[l];
            grad[l] += 0.5 * self.mu[l] * nv * nv / d_l;
        }
        grad
    }
}

/// Minimizes the scalar tangent objective on the equality manifold; the
/// result matches both the outer and inner continuous minima (tightness).
pub fn scalar_solve(inst: &ScalarCeoInstance, d: f64, mu: &[f64]) -> Result<BoundReport> {
    let l_total = inst.sensors();
    if mu.len() != l_total {
        return Err(Error::DimensionMismatch {
            expected: l_total,
            got: mu.len(),
        });
    }
    let mu_vec = WeightVector::new(mu.to_vec())?;
    let lo = inst.mmse();
    if !(d >= lo * (1.0 - 1e-9) && d <= inst.var_x * (1.0 + 1e-9)) {
        return Err(Error::Infeasible);
    }
    let total = (1.0 / d - 1.0 / inst.var_x).max(0.0);
    let caps: Vec<f64> = inst.noise_vars.iter().map(|nv| 1.0 / nv).collect();

    let obj = ManifoldObjective {
        inst,
        d,
        order: mu_vec.descending_order(),
        mu: mu.to_vec(),
    };

    let mut u: Vec<f64> = if l_total == 1 {
        vec![total]
    } else {
        let cap_sum: f64 = caps.iter().sum();
        let start: Vec<f64> = caps.iter().map(|c| total * c / cap_sum).collect();
        let mut u = project_simplex_box(&start, &caps, total);
        let mut f = obj.value(&u);
        let mut step = 0.25;
        'descent: for _ in 0..4000 {
            let g = obj.gradient(&u);
            let mut t = step;
            loop {
                if t < 1e-14 {
                    break 'descent;
                }
                let cand: Vec<f64> = u.iter().zip(&g).map(|(ui, gi)| ui - t * gi).collect();
                let cand = project_simplex_box(&cand, &caps, total);
                let fc = obj.value(&cand);
                if fc < f {
                    let decrease = f - fc;
                    u = cand;
                    f = fc;
                    step = (t * 2.0).min(1.0);
                    if decrease < 1e-13 {
                        break 'descent;
                    }
                    break;
                }
                t *= 0.5;
            }
        }
        u
    };
    // Clean round-off drift off the manifold.
    u = project_simplex_box(&u, &caps, total);

    let d_alloc = obj.d_alloc(&u);
    let value = scalar_tangent_value(inst, d, &d_alloc, mu, TangentKind::Outer)?;
    let allocation = Allocation::aligned(
        d_alloc.iter().map(|v| SymMatrix::from_diagonal(&[*v])).collect(),
    );
    let m_inst = inst.to_matrix_instance();
    let target = DistortionTarget::scalar(d)?;
    let feasibility = alloc_feasible(&m_inst, &allocation, &target)?;
    let mut per_subset = std::collections::BTreeMap::new();
    for s in SubsetId::all_nonempty(l_total) {
        per_subset.insert(s, scalar_subset_bound(inst, d, &d_alloc, s)?);
    }
    Ok(BoundReport {
        value,
        allocation,
        feasibility,
        per_subset,
    })
}
