//! Pure evaluators for the rate-region bound formulas.
//!
//! Submodules split the surface by model: [`aligned`] carries the subset and
//! tangent bounds plus the contra-polymatroid machinery, [`general`] the
//! channel-matrix forms, [`scalar`] and [`parallel`] the specializations, and
//! [`gap`] the two-sensor closed forms used by the strict-gap demonstration.

use std::collections::BTreeMap;
use std::fmt;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::matkernel::SymMatrix;

pub mod aligned;
pub mod gap;
pub mod general;
pub mod parallel;
pub mod scalar;

pub use aligned::{
    alloc_feasible, chen_wang_tangent_value, effective_precision, inner_subset_bound,
    inner_tangent_value, outer_subset_bound, outer_tangent_value, set_function, vertex_rates,
};
pub use gap::{check_gap_assumptions, corollary3_tplus, corollary4_tminus_upper, GapAssumptions};
pub use general::{general_alloc_feasible, general_effective_precision, general_subset_bound, whiten_allocation, BoundKind};
pub use parallel::{
    check_parallel_assumptions, corollary5_parallel_tp, corollary6_tplus_upper,
    parallel_subset_bound, ParallelAssumptions,
};
pub use scalar::{scalar_subset_bound, scalar_tangent_value};

/// Default tolerance when certifying allocation feasibility.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Which tangent objective is being evaluated or minimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TangentKind {
    /// Outer region, clipped first term.
    Outer,
    /// Inner (achievable) region.
    Inner,
    /// Two-sensor outer form without the positivity operator.
    ChenWang,
}

/// A subset of the sensors `{1, ..., L}`, stored as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubsetId {
    bits: u32,
}

impl SubsetId {
    pub const EMPTY: SubsetId = SubsetId { bits: 0 };

    pub fn empty() -> Self {
        Self::EMPTY
    }

    pub fn full(l: usize) -> Self {
        assert!(l <= 32);
        SubsetId {
            bits: if l == 32 { u32::MAX } else { (1u32 << l) - 1 },
        }
    }

    /// Subset from 0-based sensor indices.
    pub fn from_members(members: &[usize]) -> Self {
        let mut bits = 0;
        for &m in members {
            assert!(m < 32);
            bits |= 1 << m;
        }
        SubsetId { bits }
    }

    pub fn contains(&self, sensor: usize) -> bool {
        self.bits & (1 << sensor) != 0
    }

    pub fn insert(&self, sensor: usize) -> Self {
        SubsetId {
            bits: self.bits | (1 << sensor),
        }
    }

    pub fn complement(&self, l: usize) -> Self {
        SubsetId {
            bits: !self.bits & Self::full(l).bits,
        }
    }

    pub fn union(&self, other: SubsetId) -> Self {
        SubsetId {
            bits: self.bits | other.bits,
        }
    }

    pub fn intersection(&self, other: SubsetId) -> Self {
        SubsetId {
            bits: self.bits & other.bits,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// True when every member is a valid sensor index for `l` sensors.
    pub fn within(&self, l: usize) -> bool {
        self.bits & !Self::full(l).bits == 0
    }

    /// 0-based member indices in increasing order.
    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        (0..32).filter(move |i| self.contains(*i))
    }

    /// All `2^L` subsets, empty set first.
    pub fn all(l: usize) -> impl Iterator<Item = SubsetId> {
        assert!(l <= 16, "subset enumeration is meant for small L");
        (0..(1u32 << l)).map(|bits| SubsetId { bits })
    }

    /// All non-empty subsets.
    pub fn all_nonempty(l: usize) -> impl Iterator<Item = SubsetId> {
        Self::all(l).skip(1)
    }
}

impl fmt::Display for SubsetId {
    /// 1-based member list, e.g. `{1,3}`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, m) in self.members().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", m + 1)?;
        }
        write!(f, "}}")
    }
}

impl Serialize for SubsetId {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Tangent-hyperplane weights, one non-negative entry per sensor with at
/// least one strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightVector {
    mu: Vec<f64>,
}

impl WeightVector {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::InvalidInstance("weight vector must be non-empty".into()));
        }
        if mu.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::InvalidInstance(
                "weights must be finite and non-negative".into(),
            ));
        }
        if !mu.iter().any(|m| *m > 0.0) {
            return Err(Error::InvalidInstance(
                "at least one weight must be strictly positive".into(),
            ));
        }
        Ok(WeightVector { mu })
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn get(&self, l: usize) -> f64 {
        self.mu[l]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.mu
    }

    /// Sensor indices sorted by weight, descending; ties broken by index
    /// (stable). Tangent formulas are evaluated in this order.
    pub fn descending_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.mu.len()).collect();
        idx.sort_by(|a, b| self.mu[*b].partial_cmp(&self.mu[*a]).unwrap());
        idx
    }
}

/// Which box constraint an allocation lives in: `[0, Sigma_l]` for the
/// aligned model, `[0, I]` for the general model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Frame {
    Aligned,
    General,
}

/// The per-sensor matrices `{D_l}` parameterizing both bounds.
#[derive(Debug, Clone, Serialize)]
pub struct Allocation {
    pub mats: Vec<SymMatrix>,
    pub frame: Frame,
}

impl Allocation {
    pub fn aligned(mats: Vec<SymMatrix>) -> Self {
        Allocation {
            mats,
            frame: Frame::Aligned,
        }
    }

    pub fn general(mats: Vec<SymMatrix>) -> Self {
        Allocation {
            mats,
            frame: Frame::General,
        }
    }

    pub fn sensors(&self) -> usize {
        self.mats.len()
    }
}

/// Feasibility certificate: whether the distortion and box constraints hold,
/// and the largest relative constraint violation observed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Feasibility {
    pub feasible: bool,
    pub max_violation: f64,
}

/// Result of a bound evaluation or minimization.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    /// Objective value in nats.
    pub value: f64,
    pub allocation: Allocation,
    pub feasibility: Feasibility,
    /// Per-subset rate bounds at the reported allocation, keyed by subset.
    pub per_subset: BTreeMap<SubsetId, f64>,
}

impl BoundReport {
    pub fn per_subset_serializable(&self) -> BTreeMap<String, f64> {
        self.per_subset
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect()
    }
}

/// Serializes a subset-keyed map with display-form keys.
pub fn serialize_subset_map<S: Serializer>(
    map: &BTreeMap<SubsetId, f64>,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    let mut m = serializer.serialize_map(Some(map.len()))?;
    for (k, v) in map {
        m.serialize_entry(&k.to_string(), v)?;
    }
    m.end()
}
