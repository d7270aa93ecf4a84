//! Pseudo-representations of finite groupoids on vector bundles over the objects.
//!
//! A pseudo-representation assigns to every arrow `g` a linear map
//! `E_{src g} → E_{tgt g}` with no functoriality required. The quantities
//! here measure how far such an assignment is from being a representation:
//!
//! * `b(λ) = max_g ‖λ(g)‖`, the size;
//! * `c(λ) = max_{(g',g)} ‖λ(g'g) − λ(g')λ(g)‖`, the multiplicativity defect;
//! * `Δ^λ(g,h) = λ(g)λ(h)⁻¹ − λ(gh⁻¹)` on divisible pairs, the difference cocycle.
//!
//! Norms are operator norms with respect to the inner products stored in the
//! [`FiberBundle`]. On a finite groupoid every supremum is a maximum.

use std::sync::Arc;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::groupoid::{ArrowId, FiniteGroupoid, ObjectId};
use crate::linalg::{self, Metric};

/// Relative slack applied when checking an inequality between computed norms.
pub const ESTIMATE_REL_TOL: f64 = 1e-12;

/// Absolute rounding floor, in units of `(1 + b)²`, for the same checks.
pub const ESTIMATE_ABS_TOL: f64 = 1e-14;

/// Unit defect below which a pseudo-representation counts as unital.
pub const UNITAL_TOL: f64 = 1e-12;

/// Checks `observed ≤ bound` up to rounding in quantities of size `scale`.
pub fn estimate_holds(observed: f64, bound: f64, scale: f64) -> bool {
    let floor = ESTIMATE_ABS_TOL * (1.0 + scale).powi(2);
    observed <= bound + ESTIMATE_REL_TOL * bound.abs() + floor
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PsrepError {
    #[error("metric on object {object} is not symmetric positive-definite")]
    DegenerateMetric { object: ObjectId },
    #[error("bundle has {got} fibers but the groupoid has {expected} objects")]
    FiberCount { expected: usize, got: usize },
    #[error("map of arrow {arrow} has shape {got:?}, expected {expected:?}")]
    Shape {
        arrow: ArrowId,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("expected {expected} maps, got {got}")]
    MapCount { expected: usize, got: usize },
    #[error("map of arrow {arrow} is not invertible")]
    NonInvertible { arrow: ArrowId },
    #[error("operands live on different groupoids")]
    MismatchedGroupoid,
    #[error("({numerator}, {denominator}) is not a divisible pair")]
    NotDivisible {
        numerator: ArrowId,
        denominator: ArrowId,
    },
}

/// Fiber dimensions and inner products over the objects of a groupoid.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberBundle {
    metrics: Vec<Metric>,
}

impl FiberBundle {
    /// Fibers of the given dimensions with the standard inner product.
    pub fn euclidean(dims: &[usize]) -> Self {
        Self {
            metrics: dims.iter().map(|&d| Metric::identity(d)).collect(),
        }
    }

    /// `n` fibers of dimension `dim`, standard inner product.
    pub fn trivial(n: usize, dim: usize) -> Self {
        Self::euclidean(&vec![dim; n])
    }

    /// Fibers with the given Gram matrices.
    pub fn with_metrics(grams: Vec<DMatrix<f64>>) -> Result<Self, PsrepError> {
        let metrics = grams
            .into_iter()
            .enumerate()
            .map(|(object, g)| Metric::from_gram(g).ok_or(PsrepError::DegenerateMetric { object }))
            .collect::<Result<_, _>>()?;
        Ok(Self { metrics })
    }

    pub fn len(&self) -> usize {
        self.metrics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metrics.is_empty()
    }

    pub fn dim(&self, x: ObjectId) -> usize {
        self.metrics[x].dim()
    }

    pub fn metric(&self, x: ObjectId) -> &Metric {
        &self.metrics[x]
    }

    /// `‖a‖_{x,y}` for a map `a: E_x → E_y`.
    pub fn norm(&self, a: &DMatrix<f64>, x: ObjectId, y: ObjectId) -> f64 {
        Metric::norm_between(a, &self.metrics[x], &self.metrics[y])
    }

    /// The bundle over a subset of objects, in the given order.
    pub fn restrict(&self, objects: &[ObjectId]) -> Self {
        Self {
            metrics: objects.iter().map(|&x| self.metrics[x].clone()).collect(),
        }
    }
}

/// Weighted operator norm `sup_{|v|_src = 1} |a v|_dst` for Gram matrices
/// `src` and `dst`.
pub fn operator_norm(
    a: &DMatrix<f64>,
    src: &DMatrix<f64>,
    dst: &DMatrix<f64>,
) -> Result<f64, PsrepError> {
    let s = Metric::from_gram(src.clone()).ok_or(PsrepError::DegenerateMetric { object: 0 })?;
    let d = Metric::from_gram(dst.clone()).ok_or(PsrepError::DegenerateMetric { object: 1 })?;
    Ok(Metric::norm_between(a, &s, &d))
}

/// The pair of sizes `b` and `c` of a pseudo-representation on some invariant set.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Norms {
    pub b: f64,
    pub c: f64,
}

impl Norms {
    pub const ZERO: Norms = Norms { b: 0.0, c: 0.0 };

    /// Componentwise maximum.
    pub fn max(self, other: Norms) -> Norms {
        Norms {
            b: self.b.max(other.b),
            c: self.c.max(other.c),
        }
    }
}

/// `c ≤ b⁻² / 9`, the near-multiplicativity inequality.
pub fn gate_holds(norms: Norms) -> bool {
    norms.c <= 1.0 / (9.0 * norms.b * norms.b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitGate {
    pub orbit: usize,
    pub norms: Norms,
    /// `b⁻² / 9`.
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateReport {
    pub unital: bool,
    pub orbits: Vec<OrbitGate>,
}

impl GateReport {
    pub fn passes(&self) -> bool {
        self.unital && self.orbits.iter().all(|o| o.pass)
    }

    pub fn first_failing_orbit(&self) -> Option<usize> {
        self.orbits.iter().find(|o| !o.pass).map(|o| o.orbit)
    }
}

/// The inverse-map estimates on one invariant set.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseBounds {
    pub norms: Norms,
    /// `max_g ‖λ(g)⁻¹‖_{tgt g, src g}`.
    pub max_inverse_norm: f64,
    /// `max_{(g,h)} ‖Δ^λ(g,h)‖_{tgt h, tgt g}`.
    pub max_delta_norm: f64,
    /// `b / (1 − c)`, when `c < 1`.
    pub inverse_bound: Option<f64>,
    /// `c b / (1 − c)`, when `c < 1`.
    pub delta_bound: Option<f64>,
}

impl InverseBounds {
    fn new(norms: Norms, max_inverse_norm: f64, max_delta_norm: f64) -> Self {
        let (inverse_bound, delta_bound) = if norms.c < 1.0 {
            let r = norms.b / (1.0 - norms.c);
            (Some(r), Some(norms.c * r))
        } else {
            (None, None)
        };
        Self {
            norms,
            max_inverse_norm,
            max_delta_norm,
            inverse_bound,
            delta_bound,
        }
    }

    /// Both estimates hold, or `c ≥ 1` and neither applies.
    pub fn holds(&self) -> bool {
        let b = self.norms.b;
        let a = self
            .inverse_bound
            .is_none_or(|bound| estimate_holds(self.max_inverse_norm, bound, b));
        let d = self
            .delta_bound
            .is_none_or(|bound| estimate_holds(self.max_delta_norm, bound, b));
        a && d
    }
}

#[derive(Debug, Clone)]
pub struct InverseReport {
    /// `λ(g)⁻¹: E_{tgt g} → E_{src g}` for every arrow.
    pub inverses: Vec<DMatrix<f64>>,
    pub global: InverseBounds,
    pub orbits: Vec<InverseBounds>,
}

impl InverseReport {
    pub fn holds(&self) -> bool {
        self.global.holds() && self.orbits.iter().all(InverseBounds::holds)
    }
}

#[derive(Debug, Clone)]
pub struct PseudoRep {
    groupoid: Arc<FiniteGroupoid>,
    bundle: Arc<FiberBundle>,
    maps: Vec<DMatrix<f64>>,
}

impl PseudoRep {
    pub fn new(
        groupoid: Arc<FiniteGroupoid>,
        bundle: Arc<FiberBundle>,
        maps: Vec<DMatrix<f64>>,
    ) -> Result<Self, PsrepError> {
        if bundle.len() != groupoid.num_objects() {
            return Err(PsrepError::FiberCount {
                expected: groupoid.num_objects(),
                got: bundle.len(),
            });
        }
        if maps.len() != groupoid.num_arrows() {
            return Err(PsrepError::MapCount {
                expected: groupoid.num_arrows(),
                got: maps.len(),
            });
        }
        for (arrow, m) in maps.iter().enumerate() {
            let expected = (bundle.dim(groupoid.tgt(arrow)), bundle.dim(groupoid.src(arrow)));
            if m.shape() != expected {
                return Err(PsrepError::Shape {
                    arrow,
                    expected,
                    got: m.shape(),
                });
            }
        }
        Ok(Self {
            groupoid,
            bundle,
            maps,
        })
    }

    /// The representation sending every arrow to the identity; needs equal fiber dimensions
    /// along each orbit.
    pub fn identity(groupoid: Arc<FiniteGroupoid>, bundle: Arc<FiberBundle>) -> Result<Self, PsrepError> {
        let maps = (0..groupoid.num_arrows())
            .map(|g| DMatrix::identity(bundle.dim(groupoid.tgt(g)), bundle.dim(groupoid.src(g))))
            .collect();
        Self::new(groupoid, bundle, maps)
    }

    /// Same groupoid and bundle, new maps.
    pub fn with_maps(&self, maps: Vec<DMatrix<f64>>) -> Result<Self, PsrepError> {
        Self::new(self.groupoid.clone(), self.bundle.clone(), maps)
    }

    pub fn groupoid(&self) -> &Arc<FiniteGroupoid> {
        &self.groupoid
    }

    pub fn bundle(&self) -> &Arc<FiberBundle> {
        &self.bundle
    }

    pub fn map(&self, g: ArrowId) -> &DMatrix<f64> {
        &self.maps[g]
    }

    pub fn maps(&self) -> &[DMatrix<f64>] {
        &self.maps
    }

    pub fn into_maps(self) -> Vec<DMatrix<f64>> {
        self.maps
    }

    /// `‖λ(g)‖_{src g, tgt g}`.
    pub fn arrow_norm(&self, g: ArrowId) -> f64 {
        self.bundle
            .norm(&self.maps[g], self.groupoid.src(g), self.groupoid.tgt(g))
    }

    /// `‖λ(g'g) − λ(g')λ(g)‖_{src g, tgt g'}`.
    pub fn composition_defect(&self, left: ArrowId, right: ArrowId) -> f64 {
        let g = &self.groupoid;
        let d = &self.maps[g.mul(left, right)] - &self.maps[left] * &self.maps[right];
        self.bundle.norm(&d, g.src(right), g.tgt(left))
    }

    /// `max_x ‖λ(1_x) − id‖_{x,x}`.
    pub fn unit_defect(&self) -> f64 {
        (0..self.groupoid.num_objects())
            .map(|x| {
                let u = &self.maps[self.groupoid.unit(x)];
                let d = u - DMatrix::identity(u.nrows(), u.ncols());
                self.bundle.norm(&d, x, x)
            })
            .fold(0.0, f64::max)
    }

    pub fn is_unital(&self) -> bool {
        self.unit_defect() <= UNITAL_TOL
    }

    /// `b(λ)`.
    pub fn b_norm(&self) -> f64 {
        (0..self.groupoid.num_arrows())
            .map(|g| self.arrow_norm(g))
            .fold(0.0, f64::max)
    }

    /// `c(λ)`.
    pub fn c_norm(&self) -> f64 {
        self.groupoid
            .composable_pairs()
            .map(|(l, r)| self.composition_defect(l, r))
            .fold(0.0, f64::max)
    }

    pub fn norms(&self) -> Norms {
        self.orbit_norms()
            .into_iter()
            .fold(Norms::ZERO, Norms::max)
    }

    /// `b` and `c` of the restriction to each orbit, indexed like
    /// [`FiniteGroupoid::orbits`].
    pub fn orbit_norms(&self) -> Vec<Norms> {
        let g = &self.groupoid;
        let mut out = vec![Norms::ZERO; g.orbits().len()];
        for arrow in 0..g.num_arrows() {
            let o = g.orbit_of(g.src(arrow));
            out[o].b = out[o].b.max(self.arrow_norm(arrow));
        }
        for (l, r) in g.composable_pairs() {
            let o = g.orbit_of(g.src(r));
            out[o].c = out[o].c.max(self.composition_defect(l, r));
        }
        out
    }

    /// `λ(g)⁻¹` for every arrow.
    pub fn inverses(&self) -> Result<Vec<DMatrix<f64>>, PsrepError> {
        self.maps
            .iter()
            .enumerate()
            .map(|(arrow, m)| linalg::invert(m).ok_or(PsrepError::NonInvertible { arrow }))
            .collect()
    }

    /// `Δ^λ(g, h) = λ(g)λ(h)⁻¹ − λ(gh⁻¹)`, a map `E_{tgt h} → E_{tgt g}`.
    pub fn delta_cocycle(&self, g: ArrowId, h: ArrowId) -> Result<DMatrix<f64>, PsrepError> {
        let grp = &self.groupoid;
        if grp.src(g) != grp.src(h) {
            return Err(PsrepError::NotDivisible {
                numerator: g,
                denominator: h,
            });
        }
        let inv = linalg::invert(&self.maps[h]).ok_or(PsrepError::NonInvertible { arrow: h })?;
        Ok(delta_with(self, &inv, g, h))
    }

    /// The restriction to `Γ|_S` for an invariant set `S`.
    pub fn restrict(&self, objects: &[ObjectId]) -> Result<(crate::groupoid::Restriction, PseudoRep), crate::groupoid::GroupoidError> {
        let r = self.groupoid.restrict(objects)?;
        let maps = r.arrow_map.iter().map(|&g| self.maps[g].clone()).collect();
        let rep = PseudoRep::new(
            Arc::new(r.groupoid.clone()),
            Arc::new(self.bundle.restrict(&r.object_map)),
            maps,
        )
        .expect("restriction preserves shapes");
        Ok((r, rep))
    }

    /// Evaluates `c ≤ b⁻²/9` on every orbit with the bundle's stored metrics.
    ///
    /// No search over other metrics is attempted, so a failing verdict only
    /// means the stored metric does not certify the inequality.
    pub fn is_nearly_multiplicative(&self) -> GateReport {
        let orbits = self
            .orbit_norms()
            .into_iter()
            .enumerate()
            .map(|(orbit, norms)| OrbitGate {
                orbit,
                norms,
                threshold: 1.0 / (9.0 * norms.b * norms.b),
                pass: gate_holds(norms),
            })
            .collect();
        GateReport {
            unital: self.is_unital(),
            orbits,
        }
    }

    /// Inverts every map and evaluates the estimates
    /// `‖λ(g)⁻¹‖ ≤ b/(1−c)` and `‖Δ^λ(g,h)‖ ≤ c b/(1−c)`, globally and per orbit.
    pub fn inverse_rep(&self) -> Result<InverseReport, PsrepError> {
        let inverses = self.inverses()?;
        let g = &self.groupoid;
        let n_orbits = g.orbits().len();
        let mut inv_norm = vec![0.0f64; n_orbits];
        for arrow in 0..g.num_arrows() {
            let o = g.orbit_of(g.src(arrow));
            let n = self.bundle.norm(&inverses[arrow], g.tgt(arrow), g.src(arrow));
            inv_norm[o] = inv_norm[o].max(n);
        }
        let mut delta_norm = vec![0.0f64; n_orbits];
        for p in g.divisible_pairs() {
            let d = delta_with(self, &inverses[p.denominator], p.numerator, p.denominator);
            let o = g.orbit_of(g.src(p.numerator));
            let n = self.bundle.norm(&d, g.tgt(p.denominator), g.tgt(p.numerator));
            delta_norm[o] = delta_norm[o].max(n);
        }
        let orbit_norms = self.orbit_norms();
        let global_norms = orbit_norms.iter().copied().fold(Norms::ZERO, Norms::max);
        let orbits: Vec<InverseBounds> = (0..n_orbits)
            .map(|o| InverseBounds::new(orbit_norms[o], inv_norm[o], delta_norm[o]))
            .collect();
        let global = InverseBounds::new(
            global_norms,
            inv_norm.iter().copied().fold(0.0, f64::max),
            delta_norm.iter().copied().fold(0.0, f64::max),
        );
        Ok(InverseReport {
            inverses,
            global,
            orbits,
        })
    }
}

/// `Δ^λ(g, h)` given a precomputed `λ(h)⁻¹`.
pub(crate) fn delta_with(
    rep: &PseudoRep,
    inv_h: &DMatrix<f64>,
    g: ArrowId,
    h: ArrowId,
) -> DMatrix<f64> {
    let grp = rep.groupoid();
    let q = grp.mul(g, grp.inverse(h));
    rep.map(g) * inv_h - rep.map(q)
}
