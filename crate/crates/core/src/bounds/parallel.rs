//! Parallel-model bounds: the exact per-component region, and the two-sensor
//! closed forms showing the vector outer bound is not tight on this model.
//!
//! All formulas separate across source components; the only numerical work
//! is a one-dimensional convex minimization on the first component's
//! equality segment.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ParallelCeoInstance;

use super::gap::IneqCheck;
use super::scalar::{precision_contribution, scalar_subset_bound};
use super::SubsetId;

/// Absolute tolerance (relative to the precision scale) for the
/// per-component equality constraint.
pub const SATURATION_TOL: f64 = 1e-9;

/// Per-inequality report for the four parallel-model assumptions.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ParallelAssumptions {
    /// `(mu2/mu1)/sigma_12^2 < 1/sigma_2^2 + 1/sigma_22^2 - 1/D_2`
    pub first: IneqCheck,
    /// `(mu2/(mu1-mu2))/sigma_2^2 < 1/sigma_22^2`
    pub second: IneqCheck,
    /// `(mu1/(mu1-mu2))/D_2 < 1/sigma_2^2 + 1/sigma_22^2`
    pub third: IneqCheck,
    /// `(1/D_1)(1/sigma_1^2 + 1/sigma_21^2)^{-1} > ((mu1-mu2)/mu1) D_2 (1/sigma_2^2 + 1/sigma_22^2)`
    pub fourth: IneqCheck,
}

impl ParallelAssumptions {
    pub fn all_hold(&self) -> bool {
        self.first.holds && self.second.holds && self.third.holds && self.fourth.holds
    }
}

struct ParallelSetup {
    /// Original indices of the (high-weight, low-weight) sensors.
    hi: usize,
    lo: usize,
    mu1: f64,
    mu2: f64,
}

fn setup(inst: &ParallelCeoInstance, mu: &[f64]) -> Result<ParallelSetup> {
    if inst.sensors() != 2 {
        return Err(Error::WrongSensorCount {
            expected: 2,
            got: inst.sensors(),
        });
    }
    if inst.components() != 2 {
        return Err(Error::InvalidInstance(
            "the parallel closed forms need exactly two source components".into(),
        ));
    }
    if mu.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: mu.len(),
        });
    }
    let (hi, lo) = if mu[1] > mu[0] { (1, 0) } else { (0, 1) };
    Ok(ParallelSetup {
        hi,
        lo,
        mu1: mu[hi],
        mu2: mu[lo],
    })
}

fn strict(margin: f64) -> IneqCheck {
    IneqCheck {
        holds: margin > super::gap::STRICT_MARGIN,
        margin,
    }
}

fn failed() -> IneqCheck {
    IneqCheck {
        holds: false,
        margin: f64::NEG_INFINITY,
    }
}

/// Evaluates the four scalar strict inequalities behind the closed forms.
pub fn check_parallel_assumptions(
    inst: &ParallelCeoInstance,
    mu: &[f64],
) -> Result<ParallelAssumptions> {
    let s = setup(inst, mu)?;
    let (sv, nv, d) = (&inst.source_vars, &inst.noise_vars, &inst.targets);
    let inv_s2 = 1.0 / sv[1];
    let inv_s22 = 1.0 / nv[s.lo][1];

    let first = strict(inv_s2 + inv_s22 - 1.0 / d[1] - (s.mu2 / s.mu1) / nv[s.hi][1]);
    let (second, third) = if s.mu1 > s.mu2 {
        (
            strict(inv_s22 - (s.mu2 / (s.mu1 - s.mu2)) * inv_s2),
            strict(inv_s2 + inv_s22 - (s.mu1 / (s.mu1 - s.mu2)) / d[1]),
        )
    } else {
        (failed(), failed())
    };
    let lhs4 = (1.0 / d[0]) / (1.0 / sv[0] + 1.0 / nv[s.lo][0]);
    let rhs4 = ((s.mu1 - s.mu2) / s.mu1) * d[1] * (inv_s2 + inv_s22);
    let fourth = if s.mu1 > s.mu2 { strict(lhs4 - rhs4) } else { failed() };

    Ok(ParallelAssumptions {
        first,
        second,
        third,
        fourth,
    })
}

fn require_assumptions(inst: &ParallelCeoInstance, mu: &[f64]) -> Result<ParallelSetup> {
    let checks = check_parallel_assumptions(inst, mu)?;
    if !checks.all_hold() {
        return Err(Error::AssumptionsViolated(format!(
            "parallel assumptions: first {}, second {}, third {}, fourth {}",
            checks.first.holds, checks.second.holds, checks.third.holds, checks.fourth.holds
        )));
    }
    setup(inst, mu)
}

/// The first-component cost restricted to its equality segment, as a
/// function of the low-weight sensor's precision contribution `u_lo`.
fn f1_at(inst: &ParallelCeoInstance, s: &ParallelSetup, c1: f64, u_lo: f64) -> f64 {
    let nv_hi = inst.noise_vars[s.hi][0];
    let nv_lo = inst.noise_vars[s.lo][0];
    let u_hi = c1 - u_lo;
    let d_hi = nv_hi - nv_hi * nv_hi * u_hi;
    let d_lo = nv_lo - nv_lo * nv_lo * u_lo;
    if d_hi <= 0.0 || d_lo <= 0.0 {
        return f64::INFINITY;
    }
    let d1 = inst.targets[0];
    let sv1 = inst.source_vars[0];
    0.5 * s.mu1 * (nv_hi / d_hi).ln()
        + 0.5 * s.mu2 * (nv_lo / d_lo).ln()
        + 0.5 * s.mu2 * (sv1 / d1).ln()
        + 0.5 * (s.mu1 - s.mu2) * (-(d1.ln()) - (1.0 / sv1 + u_lo).ln())
}

/// Minimizes `f_1` over the equality segment by a dense grid with two local
/// refinements; the restriction is convex, so this is reliable.
fn minimize_f1(inst: &ParallelCeoInstance, s: &ParallelSetup) -> (f64, f64) {
    let c1 = 1.0 / inst.targets[0] - 1.0 / inst.source_vars[0];
    let cap_hi = 1.0 / inst.noise_vars[s.hi][0];
    let cap_lo = 1.0 / inst.noise_vars[s.lo][0];
    let mut lo = (c1 - cap_hi).max(0.0);
    let mut hi = c1.min(cap_lo);
    let mut best_u = 0.5 * (lo + hi);
    let mut best_f = f1_at(inst, s, c1, best_u);
    for _ in 0..3 {
        let n = 2000;
        let step = (hi - lo) / n as f64;
        if step <= 0.0 {
            break;
        }
        for i in 0..=n {
            let u = lo + step * i as f64;
            let f = f1_at(inst, s, c1, u);
            if f < best_f {
                best_f = f;
                best_u = u;
            }
        }
        lo = (best_u - 2.0 * step).max(lo);
        hi = (best_u + 2.0 * step).min(hi);
    }
    (best_f, best_u)
}

/// Result of the exact parallel tangent minimum.
#[derive(Debug, Clone, Serialize)]
pub struct ParallelTpResult {
    /// The tangent minimum over the parallel rate-distortion region, nats.
    pub value: f64,
    /// Optimizing `(D_11, D_21)` on the first component, indexed by sensor.
    pub d_component1: Vec<f64>,
    /// Full witness allocation `d[l][m]`, sensor-major.
    pub witness: Vec<Vec<f64>>,
}

/// Exact tangent minimum of the parallel region under the assumptions:
/// the minimized first-component cost plus the second component's closed
/// form, attained at `D_12 = sigma_12^2`,
/// `D_22 = sigma_22^4 (1/sigma_2^2 + 1/sigma_22^2 - 1/D_2)`.
pub fn corollary5_parallel_tp(
    inst: &ParallelCeoInstance,
    mu: &[f64],
) -> Result<ParallelTpResult> {
    let s = require_assumptions(inst, mu)?;
    let (f1_min, u_lo) = minimize_f1(inst, &s);

    let sv2 = inst.source_vars[1];
    let d2 = inst.targets[1];
    let nv_lo2 = inst.noise_vars[s.lo][1];
    let q2 = 1.0 / sv2 + 1.0 / nv_lo2 - 1.0 / d2;
    let value = f1_min + 0.5 * s.mu2 * (sv2 / d2).ln() + 0.5 * s.mu2 * (-(nv_lo2.ln()) - q2.ln());

    let c1 = 1.0 / inst.targets[0] - 1.0 / inst.source_vars[0];
    let nv_hi1 = inst.noise_vars[s.hi][0];
    let nv_lo1 = inst.noise_vars[s.lo][0];
    let mut witness = vec![vec![0.0; 2]; 2];
    witness[s.hi][0] = nv_hi1 - nv_hi1 * nv_hi1 * (c1 - u_lo);
    witness[s.lo][0] = nv_lo1 - nv_lo1 * nv_lo1 * u_lo;
    witness[s.hi][1] = inst.noise_vars[s.hi][1];
    witness[s.lo][1] = nv_lo2 * nv_lo2 * q2;

    Ok(ParallelTpResult {
        value,
        d_component1: vec![witness[0][0], witness[1][0]],
        witness,
    })
}

/// Upper bound on the vector outer bound's tangent minimum for the same
/// instance; strictly below [`corollary5_parallel_tp`] under the third
/// assumption. The bound is attained by the diagonal allocation with
/// `D_12 = sigma_12^2`, `D_22 = (mu2/mu1) sigma_22^4 (1/sigma_2^2 + 1/sigma_22^2)`.
pub fn corollary6_tplus_upper(inst: &ParallelCeoInstance, mu: &[f64]) -> Result<f64> {
    let s = require_assumptions(inst, mu)?;
    let (f1_min, _) = minimize_f1(inst, &s);

    let sv2 = inst.source_vars[1];
    let d2 = inst.targets[1];
    let nv_lo2 = inst.noise_vars[s.lo][1];
    let sum2 = 1.0 / sv2 + 1.0 / nv_lo2;
    Ok(f1_min
        + 0.5 * s.mu2 * (sv2 / d2).ln()
        + 0.5 * s.mu2 * ((s.mu1 / s.mu2) / nv_lo2 / sum2).ln()
        + 0.5 * (s.mu1 - s.mu2) * ((s.mu1 / (s.mu1 - s.mu2)) / d2 / sum2).ln())
}

/// The diagonal allocation attaining [`corollary6_tplus_upper`], sensor-major.
pub fn corollary6_witness(inst: &ParallelCeoInstance, mu: &[f64]) -> Result<Vec<Vec<f64>>> {
    let s = require_assumptions(inst, mu)?;
    let (_, u_lo) = minimize_f1(inst, &s);
    let c1 = 1.0 / inst.targets[0] - 1.0 / inst.source_vars[0];
    let nv_hi1 = inst.noise_vars[s.hi][0];
    let nv_lo1 = inst.noise_vars[s.lo][0];
    let nv_lo2 = inst.noise_vars[s.lo][1];
    let sum2 = 1.0 / inst.source_vars[1] + 1.0 / nv_lo2;
    let mut witness = vec![vec![0.0; 2]; 2];
    witness[s.hi][0] = nv_hi1 - nv_hi1 * nv_hi1 * (c1 - u_lo);
    witness[s.lo][0] = nv_lo1 - nv_lo1 * nv_lo1 * u_lo;
    witness[s.hi][1] = inst.noise_vars[s.hi][1];
    witness[s.lo][1] = (s.mu2 / s.mu1) * nv_lo2 * nv_lo2 * sum2;
    Ok(witness)
}

/// Sum-rate bound of the exact parallel region over `subset`, at an
/// allocation satisfying every per-component equality constraint. With the
/// equality in force every log is non-negative, so no clipping is applied.
pub fn parallel_subset_bound(
    inst: &ParallelCeoInstance,
    d_alloc: &[Vec<f64>],
    subset: SubsetId,
) -> Result<f64> {
    let l_total = inst.sensors();
    let m_total = inst.components();
    if d_alloc.len() != l_total {
        return Err(Error::DimensionMismatch {
            expected: l_total,
            got: d_alloc.len(),
        });
    }
    for row in d_alloc {
        if row.len() != m_total {
            return Err(Error::DimensionMismatch {
                expected: m_total,
                got: row.len(),
            });
        }
    }
    for m in 0..m_total {
        let mut prec = 1.0 / inst.source_vars[m];
        for l in 0..l_total {
            prec += precision_contribution(inst.noise_vars[l][m], d_alloc[l][m]);
        }
        let want = 1.0 / inst.targets[m];
        let violation = (prec - want).abs();
        if violation > SATURATION_TOL * want.max(1.0) {
            return Err(Error::ConstraintNotSaturated {
                component: m,
                violation,
            });
        }
    }
    let mut value = 0.0;
    for m in 0..m_total {
        let comp = inst.component(m);
        let col: Vec<f64> = (0..l_total).map(|l| d_alloc[l][m]).collect();
        value += scalar_subset_bound(&comp, inst.targets[m], &col, subset)?;
    }
    Ok(value)
}
