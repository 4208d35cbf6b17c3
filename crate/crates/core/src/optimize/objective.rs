//! The tangent objectives in whitened coordinates, with analytic gradients.
//!
//! Aligned allocations are re-parameterized as `E_l = Sigma_l^{-1/2} D_l
//! Sigma_l^{-1/2}`, general ones are already in `[0, I]`. In these
//! coordinates both models share one objective: channel matrices `C_l`
//! (either `Sigma_l^{-1/2}` or `H_l`) enter the suffix precisions
//! `K_X^{-1} + sum_j C_j^T (I - E_j) C_j`, and every sensor rate term is
//! `-1/2 mu_l logdet E_l`. Points outside the domain (singular `E_l`,
//! non-PD precision) evaluate to `+inf`.
//!
//! The symmetric-gradient convention is used throughout: `df = tr(G dE)`
//! with `G` symmetric, so the derivative of `logdet X` is `X^{-1}`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::bounds::{Allocation, SubsetId, TangentKind, WeightVector};
use crate::error::{Error, Result};
use crate::matkernel::{self, SymMatrix, PD_TOL};
use crate::model::{CeoInstance, DistortionTarget, GeneralCeoInstance};

/// A tangent objective over whitened allocation coordinates, for either
/// model. `E` vectors are indexed by original sensor.
pub struct WhitenedTangent {
    kind: TangentKind,
    frame: Frame,
    kx_inv: DMatrix<f64>,
    ld_kx: f64,
    ld_d: f64,
    d_inv: DMatrix<f64>,
    /// Channel matrix per sensor, original indexing.
    channels: Vec<DMatrix<f64>>,
    mu: Vec<f64>,
    /// Sensor indices sorted by weight, descending.
    order: Vec<usize>,
    dims: Vec<usize>,
}

enum Frame {
    /// Carries `Sigma_l^{1/2}` for un-whitening.
    Aligned(Vec<SymMatrix>),
    General,
}

fn logdet_dmatrix(m: &DMatrix<f64>) -> Option<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let spectral = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let tol = PD_TOL * spectral.max(1.0);
    let mut ld = 0.0;
    for v in eig.eigenvalues.iter() {
        if *v <= tol {
            return None;
        }
        ld += v.ln();
    }
    Some(ld)
}

fn inverse_dmatrix(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    let spectral = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let tol = PD_TOL * spectral.max(1.0);
    if eig.eigenvalues.iter().any(|v| *v <= tol) {
        return None;
    }
    let n = m.nrows();
    let d = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0 / eig.eigenvalues[i]
        } else {
            0.0
        }
    });
    let inv = &eig.eigenvectors * d * eig.eigenvectors.transpose();
    Some(0.5 * (&inv + inv.transpose()))
}

impl WhitenedTangent {
    pub fn aligned(
        inst: &CeoInstance,
        target: &DistortionTarget,
        mu: &WeightVector,
        kind: TangentKind,
    ) -> Result<Self> {
        let l_total = inst.sensors();
        if mu.len() != l_total {
            return Err(Error::DimensionMismatch {
                expected: l_total,
                got: mu.len(),
            });
        }
        if target.dim() != inst.dim() {
            return Err(Error::DimensionMismatch {
                expected: inst.dim(),
                got: target.dim(),
            });
        }
        if kind == TangentKind::ChenWang && l_total != 2 {
            return Err(Error::WrongSensorCount {
                expected: 2,
                got: l_total,
            });
        }
        let mut channels = Vec::with_capacity(l_total);
        let mut halves = Vec::with_capacity(l_total);
        for l in 0..l_total {
            channels.push(
                matkernel::sym_sqrt(&matkernel::inverse(inst.noise(l))?)?.into_dmatrix(),
            );
            halves.push(matkernel::sym_sqrt(inst.noise(l))?);
        }
        Ok(WhitenedTangent {
            kind,
            frame: Frame::Aligned(halves),
            kx_inv: matkernel::inverse(inst.kx())?.into_dmatrix(),
            ld_kx: matkernel::logdet(inst.kx())?,
            ld_d: matkernel::logdet(target.matrix())?,
            d_inv: matkernel::inverse(target.matrix())?.into_dmatrix(),
            channels,
            mu: mu.as_slice().to_vec(),
            order: mu.descending_order(),
            dims: vec![inst.dim(); l_total],
        })
    }

    pub fn general(
        inst: &GeneralCeoInstance,
        target: &DistortionTarget,
        mu: &WeightVector,
        kind: TangentKind,
    ) -> Result<Self> {
        let l_total = inst.sensors();
        if mu.len() != l_total {
            return Err(Error::DimensionMismatch {
                expected: l_total,
                got: mu.len(),
            });
        }
        if target.dim() != inst.dim() {
            return Err(Error::DimensionMismatch {
                expected: inst.dim(),
                got: target.dim(),
            });
        }
        if kind == TangentKind::ChenWang {
            return Err(Error::InvalidInstance(
                "the unclipped two-sensor form is defined for the aligned model".into(),
            ));
        }
        Ok(WhitenedTangent {
            kind,
            frame: Frame::General,
            kx_inv: matkernel::inverse(inst.kx())?.into_dmatrix(),
            ld_kx: matkernel::logdet(inst.kx())?,
            ld_d: matkernel::logdet(target.matrix())?,
            d_inv: matkernel::inverse(target.matrix())?.into_dmatrix(),
            channels: inst.channels().to_vec(),
            mu: mu.as_slice().to_vec(),
            order: mu.descending_order(),
            dims: inst.channels().iter().map(|h| h.nrows()).collect(),
        })
    }

    pub fn sensors(&self) -> usize {
        self.channels.len()
    }

    /// Whitened block dimension per sensor, original indexing.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn kind(&self) -> TangentKind {
        self.kind
    }

    /// `g[k] = K_X^{-1} + sum over sorted positions k.. of the channel
    /// contributions`; `g[L]` is `K_X^{-1}`, `g[0]` the full precision.
    fn suffix_precisions(&self, e: &[SymMatrix]) -> Vec<DMatrix<f64>> {
        let l_total = self.sensors();
        let mut g = Vec::with_capacity(l_total + 1);
        g.push(self.kx_inv.clone());
        for k in (0..l_total).rev() {
            let l = self.order[k];
            let c = &self.channels[l];
            let inner = DMatrix::identity(self.dims[l], self.dims[l]) - e[l].as_dmatrix();
            let contrib = c.transpose() * inner * c;
            let prev = g.last().expect("non-empty");
            let s = prev + 0.5 * (&contrib + contrib.transpose());
            g.push(s);
        }
        g.reverse(); // g[k] now covers sorted positions k..
        g
    }

    /// Objective value; `+inf` outside the domain.
    pub fn value(&self, e: &[SymMatrix]) -> f64 {
        self.eval(e, false).0
    }

    /// Objective value and symmetric gradient (original sensor indexing).
    /// The gradient of a clipped term is zero at and beyond the clip.
    pub fn value_and_gradient(&self, e: &[SymMatrix]) -> (f64, Option<Vec<SymMatrix>>) {
        self.eval(e, true)
    }

    fn eval(&self, e: &[SymMatrix], want_grad: bool) -> (f64, Option<Vec<SymMatrix>>) {
        let l_total = self.sensors();
        assert_eq!(e.len(), l_total, "one E block per sensor");
        let g = self.suffix_precisions(e);

        let mut ld_suffix = vec![0.0; l_total + 1];
        for (k, gk) in g.iter().enumerate() {
            match logdet_dmatrix(gk) {
                Some(ld) => ld_suffix[k] = ld,
                None => return (f64::INFINITY, None),
            }
        }

        let mut e_lds = vec![0.0; l_total];
        let mut e_invs: Vec<Option<DMatrix<f64>>> = vec![None; l_total];
        for l in 0..l_total {
            match logdet_dmatrix(e[l].as_dmatrix()) {
                Some(ld) => e_lds[l] = ld,
                None => return (f64::INFINITY, None),
            }
            if want_grad {
                e_invs[l] = inverse_dmatrix(e[l].as_dmatrix());
                if e_invs[l].is_none() {
                    return (f64::INFINITY, None);
                }
            }
        }

        let mut value = 0.0;
        let mut active = vec![false; l_total.saturating_sub(1)];
        for t in 0..l_total.saturating_sub(1) {
            let w = 0.5 * (self.mu[self.order[t]] - self.mu[self.order[t + 1]]);
            if w == 0.0 {
                continue;
            }
            match self.kind {
                TangentKind::Outer => {
                    let r = -ld_suffix[t + 1] - self.ld_d;
                    if r > 0.0 {
                        value += w * r;
                        active[t] = true;
                    }
                }
                TangentKind::ChenWang => {
                    value += w * (-ld_suffix[t + 1] - self.ld_d);
                    active[t] = true;
                }
                TangentKind::Inner => {
                    value += w * (ld_suffix[0] - ld_suffix[t + 1]);
                    active[t] = true;
                }
            }
        }
        for l in 0..l_total {
            value += -0.5 * self.mu[l] * e_lds[l];
        }
        let mu_min = self.mu[self.order[l_total - 1]];
        value += 0.5
            * mu_min
            * match self.kind {
                TangentKind::Inner => self.ld_kx + ld_suffix[0],
                _ => self.ld_kx - self.ld_d,
            };

        if !want_grad {
            return (value, None);
        }

        // Gradient: walk sorted positions, accumulating the weighted suffix
        // inverses that apply to all deeper sensors.
        let m = self.kx_inv.nrows();
        let mut acc = DMatrix::<f64>::zeros(m, m);
        if self.kind == TangentKind::Inner {
            match inverse_dmatrix(&g[0]) {
                Some(inv0) => acc -= 0.5 * self.mu[self.order[0]] * inv0,
                None => return (f64::INFINITY, None),
            }
        }
        let mut grads: Vec<SymMatrix> = e
            .iter()
            .map(|el| SymMatrix::zeros(el.dim()))
            .collect();
        for pos in 0..l_total {
            if pos >= 1 {
                let t = pos - 1;
                if t < active.len() && active[t] {
                    let w = 0.5 * (self.mu[self.order[t]] - self.mu[self.order[t + 1]]);
                    match inverse_dmatrix(&g[t + 1]) {
                        Some(inv) => acc += w * inv,
                        None => return (f64::INFINITY, None),
                    }
                }
            }
            let l = self.order[pos];
            let c = &self.channels[l];
            let mut gl = c * &acc * c.transpose();
            gl -= 0.5 * self.mu[l] * e_invs[l].as_ref().expect("computed above");
            grads[l] = SymMatrix::symmetrized(gl);
        }
        (value, Some(grads))
    }

    /// Absolute violation of the coupled distortion constraint:
    /// `max(0, -lambda_min(G_full - D^{-1}))`, plus the minimizing
    /// eigenvector when violated.
    fn lmi_violation_with_vector(&self, e: &[SymMatrix]) -> (f64, Option<DMatrix<f64>>) {
        let g = self.suffix_precisions(e);
        let slack = &g[0] - &self.d_inv;
        let eig = SymmetricEigen::new(slack);
        let mut min_val = f64::INFINITY;
        let mut min_idx = 0;
        for (i, v) in eig.eigenvalues.iter().enumerate() {
            if *v < min_val {
                min_val = *v;
                min_idx = i;
            }
        }
        if min_val >= 0.0 {
            (0.0, None)
        } else {
            let v = eig.eigenvectors.column(min_idx).into_owned();
            (-min_val, Some(DMatrix::from_column_slice(v.len(), 1, v.as_slice())))
        }
    }

    /// Absolute violation of the coupled distortion constraint.
    pub fn lmi_violation(&self, e: &[SymMatrix]) -> f64 {
        self.lmi_violation_with_vector(e).0
    }

    /// Symmetric gradient of the distortion constraint's minimum eigenvalue
    /// with respect to each whitened block: `-C_l v v^T C_l^T` for the
    /// minimizing eigenvector `v`. This is the (inward) constraint normal
    /// used to crawl along the active boundary.
    pub fn lmi_normal(&self, e: &[SymMatrix]) -> Vec<SymMatrix> {
        let g = self.suffix_precisions(e);
        let slack = &g[0] - &self.d_inv;
        let eig = SymmetricEigen::new(slack);
        let mut min_val = f64::INFINITY;
        let mut min_idx = 0;
        for (i, v) in eig.eigenvalues.iter().enumerate() {
            if *v < min_val {
                min_val = *v;
                min_idx = i;
            }
        }
        let v = eig.eigenvectors.column(min_idx).into_owned();
        let v = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
        (0..self.sensors())
            .map(|l| {
                let cv = &self.channels[l] * &v;
                SymMatrix::symmetrized(-(&cv * cv.transpose()))
            })
            .collect()
    }

    /// Distance of the clipped log arguments from their kink, in log units;
    /// `+inf` when the objective has no clip (inner, unclipped, or L = 1).
    pub fn min_clip_distance(&self, e: &[SymMatrix]) -> f64 {
        if self.kind != TangentKind::Outer {
            return f64::INFINITY;
        }
        let g = self.suffix_precisions(e);
        let mut min = f64::INFINITY;
        for t in 0..self.sensors().saturating_sub(1) {
            let w = self.mu[self.order[t]] - self.mu[self.order[t + 1]];
            if w == 0.0 {
                continue;
            }
            if let Some(ld) = logdet_dmatrix(&g[t + 1]) {
                min = min.min((-ld - self.ld_d).abs());
            }
        }
        min
    }

    /// Augmented-Lagrangian objective
    /// `f + lambda * violation + rho * violation^2` with gradient. The
    /// multiplier term removes the constraint bias a pure quadratic penalty
    /// would leave at boundary optima.
    pub fn penalized(&self, e: &[SymMatrix], rho: f64, lambda: f64) -> (f64, Option<Vec<SymMatrix>>) {
        let (value, grads) = self.eval(e, true);
        if !value.is_finite() {
            return (value, None);
        }
        let mut grads = grads.expect("finite value has a gradient");
        let (viol, vec) = self.lmi_violation_with_vector(e);
        let total = value + lambda * viol + rho * viol * viol;
        if let Some(v) = vec {
            // d(-lambda_min)/dE_l = C_l v v^T C_l^T.
            let weight = lambda + 2.0 * rho * viol;
            for l in 0..self.sensors() {
                let cv = &self.channels[l] * &v;
                let outer = &cv * cv.transpose();
                grads[l] = SymMatrix::symmetrized(grads[l].as_dmatrix() + weight * outer);
            }
        }
        (total, Some(grads))
    }

    /// Projects each block onto the whitened box `[0, I]`.
    pub fn project(&self, e: &[SymMatrix]) -> Vec<SymMatrix> {
        e.iter()
            .map(|el| {
                matkernel::project_box(el, &SymMatrix::identity(el.dim()))
                    .expect("identity upper bound is PD")
            })
            .collect()
    }

    /// Maps whitened coordinates back to an allocation in the right frame.
    pub fn unwhiten(&self, e: &[SymMatrix]) -> Allocation {
        match &self.frame {
            Frame::Aligned(halves) => Allocation::aligned(
                e.iter()
                    .zip(halves)
                    .map(|(el, h)| {
                        SymMatrix::symmetrized(h.as_dmatrix() * el.as_dmatrix() * h.as_dmatrix())
                    })
                    .collect(),
            ),
            Frame::General => Allocation::general(e.to_vec()),
        }
    }

    /// Inverse of [`Self::unwhiten`], used for warm starts.
    pub fn whiten(&self, alloc: &Allocation) -> Result<Vec<SymMatrix>> {
        match &self.frame {
            Frame::Aligned(_) => (0..self.sensors())
                .map(|l| {
                    let c = &self.channels[l];
                    Ok(SymMatrix::symmetrized(c * alloc.mats[l].as_dmatrix() * c.transpose()))
                })
                .collect(),
            Frame::General => Ok(alloc.mats.clone()),
        }
    }

    /// The whitened value of the distortion interval's information ceiling:
    /// used by callers to detect infeasible problems early.
    pub fn fully_informative_feasible(&self) -> bool {
        let zeros: Vec<SymMatrix> = self.dims.iter().map(|d| SymMatrix::zeros(*d)).collect();
        let g = self.suffix_precisions(&zeros);
        let slack = &g[0] - &self.d_inv;
        let eig = SymmetricEigen::new(slack.clone());
        let spectral = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        min >= -crate::bounds::FEASIBILITY_TOL * spectral.max(1.0)
    }

    /// Largest uniform scale `t` such that `E_l = t I` keeps the coupled
    /// constraint satisfied (the box saturating start).
    pub fn saturating_scale(&self) -> f64 {
        let eye_at = |t: f64| -> Vec<SymMatrix> {
            self.dims
                .iter()
                .map(|d| SymMatrix::identity(*d).scaled(t))
                .collect()
        };
        if self.lmi_violation(&eye_at(1.0)) == 0.0 {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.lmi_violation(&eye_at(mid)) == 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Scales `e` toward zero until the coupled constraint holds; the
    /// constraint is monotone in the scale, so bisection is exact.
    pub fn restore_feasibility(&self, e: &[SymMatrix]) -> Vec<SymMatrix> {
        if self.lmi_violation(e) == 0.0 {
            return e.to_vec();
        }
        let scaled = |t: f64| -> Vec<SymMatrix> { e.iter().map(|el| el.scaled(t)).collect() };
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.lmi_violation(&scaled(mid)) == 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        scaled(lo)
    }

    /// Moves from a feasible point toward `trial` as far as the coupled
    /// constraint allows. The precision is affine in `E`, so the minimum
    /// eigenvalue is concave along the segment and the feasible stretch is
    /// an interval: bisection is exact. Unlike scaling toward zero, this
    /// keeps coordinates the two points share (active box faces) pinned.
    pub fn restore_between(
        &self,
        feasible: &[SymMatrix],
        trial: &[SymMatrix],
    ) -> Vec<SymMatrix> {
        if self.lmi_violation(trial) == 0.0 {
            return trial.to_vec();
        }
        let blend = |t: f64| -> Vec<SymMatrix> {
            feasible
                .iter()
                .zip(trial)
                .map(|(a, b)| a.scaled(1.0 - t).add(&b.scaled(t)))
                .collect()
        };
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.lmi_violation(&blend(mid)) == 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        blend(lo)
    }

    /// Per-subset bound values at an allocation, for reports.
    pub(crate) fn subset_rates(
        &self,
        inst: &ProblemInstance<'_>,
        target: &DistortionTarget,
        alloc: &Allocation,
    ) -> Result<std::collections::BTreeMap<SubsetId, f64>> {
        let mut map = std::collections::BTreeMap::new();
        let l_total = self.sensors();
        if self.kind == TangentKind::ChenWang {
            // The paper characterizes this bound only through its tangents;
            // there is no subset-sum region form to report.
            return Ok(map);
        }
        for s in SubsetId::all_nonempty(l_total) {
            let v = match (inst, self.kind) {
                (ProblemInstance::Aligned(i), TangentKind::Outer) => {
                    crate::bounds::outer_subset_bound(i, alloc, target, s)?
                }
                (ProblemInstance::Aligned(i), _) => crate::bounds::inner_subset_bound(i, alloc, s)?,
                (ProblemInstance::General(i), TangentKind::Outer) => {
                    crate::bounds::general_subset_bound(
                        i,
                        alloc,
                        target,
                        s,
                        crate::bounds::BoundKind::Outer,
                    )?
                }
                (ProblemInstance::General(i), _) => crate::bounds::general_subset_bound(
                    i,
                    alloc,
                    target,
                    s,
                    crate::bounds::BoundKind::Inner,
                )?,
            };
            map.insert(s, v);
        }
        Ok(map)
    }
}

/// Either model, borrowed, for report assembly.
pub(crate) enum ProblemInstance<'a> {
    Aligned(&'a CeoInstance),
    General(&'a GeneralCeoInstance),
}
