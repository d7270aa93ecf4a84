//! Normalized left Haar systems on finite groupoids.
//!
//! A Haar system here is one nonnegative weight per arrow, read as the mass
//! `ν_{tgt k}({k})` that the target fiber through `k` assigns to `k`. The
//! normalizing function is absorbed into the weights, so normalization means
//! that each target fiber carries total mass one.

use std::sync::Arc;

use num_rational::Rational64;
use thiserror::Error;

use crate::groupoid::{ArrowId, FiniteGroupoid, GroupoidError, ObjectId, Restriction};

/// Residual tolerance for normalization and invariance checks.
pub const HAAR_TOL: f64 = 1e-12;

/// Largest groupoid for which the exact rational check is offered.
pub const EXACT_MAX_ARROWS: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HaarError {
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("weight of arrow {arrow} is {weight}, not a nonnegative finite number")]
    NegativeWeight { arrow: ArrowId, weight: f64 },
    #[error("the exact check supports at most {EXACT_MAX_ARROWS} arrows, got {0}")]
    TooLargeForExact(usize),
    #[error(transparent)]
    Groupoid(#[from] GroupoidError),
}

#[derive(Debug, Clone)]
pub struct HaarSystem {
    groupoid: Arc<FiniteGroupoid>,
    weights: Vec<f64>,
    definite: bool,
}

impl HaarSystem {
    /// Wraps custom weights. Only the shape and sign are checked; use
    /// [`check_haar`] for normalization and invariance.
    pub fn from_weights(
        groupoid: Arc<FiniteGroupoid>,
        weights: Vec<f64>,
    ) -> Result<Self, HaarError> {
        if weights.len() != groupoid.num_arrows() {
            return Err(HaarError::WeightCount {
                expected: groupoid.num_arrows(),
                got: weights.len(),
            });
        }
        if let Some((arrow, &weight)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
        {
            return Err(HaarError::NegativeWeight { arrow, weight });
        }
        let definite = weights.iter().all(|&w| w > 0.0);
        Ok(Self {
            groupoid,
            weights,
            definite,
        })
    }

    pub fn groupoid(&self) -> &Arc<FiniteGroupoid> {
        &self.groupoid
    }

    pub fn weight(&self, k: ArrowId) -> f64 {
        self.weights[k]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Every arrow carries positive mass.
    pub fn is_definite(&self) -> bool {
        self.definite
    }
}

/// The counting Haar system: `weight(k) = 1 / |t⁻¹(tgt k)|`.
pub fn counting_haar(groupoid: Arc<FiniteGroupoid>) -> HaarSystem {
    let weights = (0..groupoid.num_arrows())
        .map(|k| 1.0 / groupoid.target_fiber(groupoid.tgt(k)).len() as f64)
        .collect();
    HaarSystem {
        groupoid,
        weights,
        definite: true,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HaarReport {
    /// `max_x |Σ_{tgt k = x} weight(k) − 1|`.
    pub max_normalization_residual: f64,
    /// Object attaining the maximum residual.
    pub worst_object: Option<ObjectId>,
    /// Pairs `(g, k)` with `tgt k = src g` and `|weight(gk) − weight(k)| > 1e-12`.
    pub invariance_violations: Vec<(ArrowId, ArrowId)>,
}

impl HaarReport {
    pub fn passes(&self) -> bool {
        self.max_normalization_residual <= HAAR_TOL && self.invariance_violations.is_empty()
    }
}

pub fn check_haar(haar: &HaarSystem) -> HaarReport {
    let g = haar.groupoid();
    let mut max_res = 0.0;
    let mut worst = None;
    for x in 0..g.num_objects() {
        let total: f64 = g.target_fiber(x).iter().map(|&k| haar.weight(k)).sum();
        let res = (total - 1.0).abs();
        if worst.is_none() || res > max_res {
            max_res = res;
            worst = Some(x);
        }
    }
    let mut violations = Vec::new();
    for arrow in 0..g.num_arrows() {
        for &k in g.target_fiber(g.src(arrow)) {
            let gk = g.mul(arrow, k);
            if (haar.weight(gk) - haar.weight(k)).abs() > HAAR_TOL {
                violations.push((arrow, k));
            }
        }
    }
    HaarReport {
        max_normalization_residual: max_res,
        worst_object: worst,
        invariance_violations: violations,
    }
}

/// Restricts a Haar system to `Γ|_S` for a union of orbits `S`.
///
/// Target fibers of an invariant subset are entire fibers of the ambient
/// groupoid, so no mass escapes and the weights carry over unchanged.
pub fn restrict_haar(
    haar: &HaarSystem,
    objects: &[ObjectId],
) -> Result<(Restriction, HaarSystem), HaarError> {
    let restriction = haar.groupoid().restrict(objects)?;
    let weights = restriction
        .arrow_map
        .iter()
        .map(|&k| haar.weight(k))
        .collect();
    let restricted = HaarSystem::from_weights(Arc::new(restriction.groupoid.clone()), weights)?;
    Ok((restriction, restricted))
}

/// Counting weights as exact rationals.
pub fn counting_haar_exact(groupoid: &FiniteGroupoid) -> Result<Vec<Rational64>, HaarError> {
    if groupoid.num_arrows() > EXACT_MAX_ARROWS {
        return Err(HaarError::TooLargeForExact(groupoid.num_arrows()));
    }
    Ok((0..groupoid.num_arrows())
        .map(|k| Rational64::new(1, groupoid.target_fiber(groupoid.tgt(k)).len() as i64))
        .collect())
}

/// Exact normalization and left-invariance check over the rationals.
///
/// Returns the objects whose fiber mass differs from one and the pairs
/// `(g, k)` where invariance fails, both empty for a Haar system.
#[allow(clippy::type_complexity)]
pub fn check_haar_exact(
    groupoid: &FiniteGroupoid,
    weights: &[Rational64],
) -> Result<(Vec<ObjectId>, Vec<(ArrowId, ArrowId)>), HaarError> {
    if groupoid.num_arrows() > EXACT_MAX_ARROWS {
        return Err(HaarError::TooLargeForExact(groupoid.num_arrows()));
    }
    if weights.len() != groupoid.num_arrows() {
        return Err(HaarError::WeightCount {
            expected: groupoid.num_arrows(),
            got: weights.len(),
        });
    }
    let one = Rational64::from_integer(1);
    let bad_objects = (0..groupoid.num_objects())
        .filter(|&x| {
            groupoid
                .target_fiber(x)
                .iter()
                .map(|&k| weights[k])
                .sum::<Rational64>()
                != one
        })
        .collect();
    let mut bad_pairs = Vec::new();
    for g in 0..groupoid.num_arrows() {
        for &k in groupoid.target_fiber(groupoid.src(g)) {
            if weights[groupoid.mul(g, k)] != weights[k] {
                bad_pairs.push((g, k));
            }
        }
    }
    Ok((bad_objects, bad_pairs))
}
