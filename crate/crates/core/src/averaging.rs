//! The multiplicative averaging operator and its iteration.
//!
//! For an invertible pseudo-representation `λ` and a normalized left Haar
//! system `ν`,
//!
//! ```text
//! avg λ(g) = Σ_{tgt k = src g} ν(k) · λ(gk) λ(k)⁻¹ .
//! ```
//!
//! Representations are fixed points. Near a representation the operator
//! squares the multiplicativity defect, so iterating it from a nearly
//! multiplicative starting point converges very fast to a representation.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::haar::HaarSystem;
use crate::psrep::{delta_with, estimate_holds, Norms, PseudoRep, PsrepError};
use crate::trace::{
    envelope_at, quadratic_bound, GateSummary, IterationTrace, StopRule, TraceRow, Verdict,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AveragingError {
    #[error(transparent)]
    Psrep(#[from] PsrepError),
    #[error("Haar system and pseudo-representation live on different groupoids")]
    MismatchedGroupoid,
    #[error("defect c = {c} on orbit {orbit} is not below 1")]
    GatePrecondition { orbit: usize, c: f64 },
    #[error("pseudo-representation is not unital (unit defect {defect})")]
    NotUnital { defect: f64 },
}

fn check_same_groupoid(rep: &PseudoRep, haar: &HaarSystem) -> Result<(), AveragingError> {
    if Arc::ptr_eq(rep.groupoid(), haar.groupoid()) || **rep.groupoid() == **haar.groupoid() {
        Ok(())
    } else {
        Err(AveragingError::MismatchedGroupoid)
    }
}

/// `avg λ` given precomputed inverses. The inner sum runs over the target
/// fiber in ascending arrow order.
fn average_with(rep: &PseudoRep, inverses: &[DMatrix<f64>], haar: &HaarSystem) -> PseudoRep {
    let g = rep.groupoid();
    let bundle = rep.bundle();
    let maps = (0..g.num_arrows())
        .map(|arrow| {
            let mut acc = DMatrix::zeros(bundle.dim(g.tgt(arrow)), bundle.dim(g.src(arrow)));
            for &k in g.target_fiber(g.src(arrow)) {
                let gk = g.mul(arrow, k);
                acc += (rep.map(gk) * &inverses[k]) * haar.weight(k);
            }
            acc
        })
        .collect();
    rep.with_maps(maps).expect("averaging preserves shapes")
}

/// One application of the averaging operator.
pub fn average(rep: &PseudoRep, haar: &HaarSystem) -> Result<PseudoRep, AveragingError> {
    check_same_groupoid(rep, haar)?;
    let inverses = rep.inverses()?;
    Ok(average_with(rep, &inverses, haar))
}

/// Residuals of the two exact identities relating `avg λ` to `Δ^λ`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct IdentityResiduals {
    /// `max_g ‖avg λ(g) − λ(g) − Σ_k ν(k) Δ^λ(gk, k)‖`.
    pub residual_a: f64,
    /// `max_{(g',g)}` of the norm of the difference between the
    /// multiplicativity defect of `avg λ` and its expression through `Δ^λ`.
    pub residual_b: f64,
    /// `b(λ)`.
    pub b: f64,
}

impl IdentityResiduals {
    /// `1e-12 · (1 + b)³`.
    pub fn threshold(&self) -> f64 {
        1e-12 * (1.0 + self.b).powi(3)
    }

    pub fn holds(&self) -> bool {
        self.residual_a <= self.threshold() && self.residual_b <= self.threshold()
    }
}

/// Evaluates both sides of the two fundamental identities independently.
///
/// The left-hand sides come from [`average`]; the right-hand sides are sums
/// of difference cocycles. Neither unitality nor small defect is needed.
pub fn verify_fundamental_identities(
    rep: &PseudoRep,
    haar: &HaarSystem,
) -> Result<IdentityResiduals, AveragingError> {
    check_same_groupoid(rep, haar)?;
    let inverses = rep.inverses()?;
    let avg = average_with(rep, &inverses, haar);
    let g = rep.groupoid();
    let bundle = rep.bundle();
    let delta = |num: usize, den: usize| delta_with(rep, &inverses[den], num, den);

    // Σ_k ν(k) Δ(gk, k), a map E_{src g} → E_{tgt g}
    let mean_delta: Vec<DMatrix<f64>> = (0..g.num_arrows())
        .map(|arrow| {
            let mut acc = DMatrix::zeros(bundle.dim(g.tgt(arrow)), bundle.dim(g.src(arrow)));
            for &k in g.target_fiber(g.src(arrow)) {
                acc += delta(g.mul(arrow, k), k) * haar.weight(k);
            }
            acc
        })
        .collect();

    let mut residual_a = 0.0f64;
    for arrow in 0..g.num_arrows() {
        let d = avg.map(arrow) - rep.map(arrow) - &mean_delta[arrow];
        residual_a = residual_a.max(bundle.norm(&d, g.src(arrow), g.tgt(arrow)));
    }

    let mut residual_b = 0.0f64;
    for (left, right) in g.composable_pairs() {
        let fiber = g.target_fiber(g.src(right));
        let lr = g.mul(left, right);
        let lhs = avg.map(lr) - avg.map(left) * avg.map(right);

        let mut single = DMatrix::zeros(lhs.nrows(), lhs.ncols());
        for &k in fiber {
            let rk = g.mul(right, k);
            single += (delta(g.mul(lr, k), rk) * delta(rk, k)) * haar.weight(k);
        }
        let mut double = DMatrix::zeros(lhs.nrows(), lhs.ncols());
        for &h in fiber {
            let rh = g.mul(right, h);
            let outer = delta(g.mul(lr, h), rh);
            for &k in fiber {
                let inner = delta(g.mul(right, k), k);
                double += (&outer * inner) * (haar.weight(h) * haar.weight(k));
            }
        }
        let d = lhs - (single - double);
        residual_b = residual_b.max(bundle.norm(&d, g.src(right), g.tgt(left)));
    }

    Ok(IdentityResiduals {
        residual_a,
        residual_b,
        b: rep.b_norm(),
    })
}

/// The one-step estimates on one orbit.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StepEstimate {
    pub orbit: usize,
    pub before: Norms,
    pub after: Norms,
    /// `b / (1 − c)`.
    pub b_bound: f64,
    /// `2 c² b² / (1 − c)²`.
    pub c_bound: f64,
    pub b_slack: f64,
    pub c_slack: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StepReport {
    pub orbits: Vec<StepEstimate>,
}

impl StepReport {
    pub fn holds(&self) -> bool {
        self.orbits.iter().all(|o| o.pass)
    }
}

/// Checks `b(avg λ) ≤ b/(1−c)` and `c(avg λ) ≤ 2c²b²/(1−c)²` on every orbit.
pub fn verify_step_estimates(
    rep: &PseudoRep,
    haar: &HaarSystem,
) -> Result<StepReport, AveragingError> {
    check_same_groupoid(rep, haar)?;
    let defect = rep.unit_defect();
    if defect > crate::psrep::UNITAL_TOL {
        return Err(AveragingError::NotUnital { defect });
    }
    let before = rep.orbit_norms();
    if let Some((orbit, n)) = before.iter().enumerate().find(|(_, n)| n.c >= 1.0) {
        return Err(AveragingError::GatePrecondition { orbit, c: n.c });
    }
    let after = average(rep, haar)?.orbit_norms();
    let orbits = before
        .iter()
        .zip(&after)
        .enumerate()
        .map(|(orbit, (&b, &a))| {
            let r = b.b / (1.0 - b.c);
            let b_bound = r;
            let c_bound = 2.0 * b.c * b.c * r * r;
            StepEstimate {
                orbit,
                before: b,
                after: a,
                b_bound,
                c_bound,
                b_slack: b_bound - a.b,
                c_slack: c_bound - a.c,
                pass: estimate_holds(a.b, b_bound, b.b) && estimate_holds(a.c, c_bound, b.b),
            }
        })
        .collect();
    Ok(StepReport { orbits })
}

/// `max_g ‖a(g) − b(g)‖_{src g, tgt g}`.
pub fn distance(a: &PseudoRep, b: &PseudoRep) -> f64 {
    let g = a.groupoid();
    (0..g.num_arrows())
        .map(|arrow| {
            a.bundle()
                .norm(&(a.map(arrow) - b.map(arrow)), g.src(arrow), g.tgt(arrow))
        })
        .fold(0.0, f64::max)
}

/// Repeatedly averages `rep` until `c ≤ stop.tol_c` or `stop.max_iter` steps.
///
/// Row `i` describes `avg^i λ`. The near-multiplicativity of `rep` is
/// recorded in the trace but does not stop the iteration.
pub fn iterate(
    rep: &PseudoRep,
    haar: &HaarSystem,
    stop: StopRule,
) -> Result<IterationTrace<PseudoRep>, AveragingError> {
    check_same_groupoid(rep, haar)?;
    let start = Instant::now();
    let initial = rep.orbit_norms();
    let gate = GateSummary::from_norms(rep.is_unital(), &initial);

    let mut rows: Vec<TraceRow> = Vec::new();
    let mut current = rep.clone();
    let mut previous: Option<PseudoRep> = None;
    let verdict = loop {
        let i = rows.len();
        let orbit_norms = if i == 0 {
            initial.clone()
        } else {
            current.orbit_norms()
        };
        let norms = orbit_norms.iter().copied().fold(Norms::ZERO, Norms::max);
        let quadratic_bound_rhs = rows.last().and_then(|r| quadratic_bound(&r.orbit_norms));
        rows.push(TraceRow {
            iteration: i,
            b: norms.b,
            c: norms.c,
            unit_defect: current.unit_defect(),
            quadratic_bound_rhs,
            envelope: gate.passed().then(|| envelope_at(&initial, i)),
            step_distance: previous.as_ref().map(|p| distance(&current, p)),
            orbit_norms,
            seminorm_defects: Vec::new(),
            wall_time: start.elapsed().as_secs_f64(),
        });

        if norms.c <= stop.tol_c {
            break Verdict::Converged { iterations: i };
        }
        if i >= stop.max_iter || !norms.b.is_finite() || !norms.c.is_finite() {
            break Verdict::Diverged { iterations: i };
        }
        let inverses = match current.inverses() {
            Ok(inv) => inv,
            Err(PsrepError::NonInvertible { arrow }) => {
                break Verdict::NonInvertibleAt {
                    iteration: i,
                    location: arrow,
                }
            }
            Err(e) => return Err(e.into()),
        };
        let next = average_with(&current, &inverses, haar);
        previous = Some(std::mem::replace(&mut current, next));
    };

    Ok(IterationTrace {
        rows,
        verdict,
        gate,
        last: current,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groupoid::{action_groupoid, cyclic_group, pair_groupoid, FiniteGroupAction, FiniteGroupoid};
    use crate::haar::counting_haar;
    use crate::psrep::FiberBundle;
    use approx::assert_relative_eq;

    fn z2_bundle() -> Arc<FiniteGroupoid> {
        let a = FiniteGroupAction::new(cyclic_group(2), vec!["1".into()], vec![vec![0], vec![0]])
            .unwrap();
        Arc::new(action_groupoid(&a))
    }

    fn scalar_rep(g: Arc<FiniteGroupoid>, values: &[f64]) -> PseudoRep {
        let bundle = Arc::new(FiberBundle::trivial(g.num_objects(), 1));
        let maps = values.iter().map(|&v| DMatrix::from_element(1, 1, v)).collect();
        PseudoRep::new(g, bundle, maps).unwrap()
    }

    #[test]
    fn scalar_two_term_average() {
        let g = z2_bundle();
        let e = 0.1;
        let rep = scalar_rep(g.clone(), &[1.0, 1.0 + e]);
        let avg = average(&rep, &counting_haar(g)).unwrap();
        // ½[(1+e) + 1/(1+e)]
        let expected = 0.5 * ((1.0 + e) + 1.0 / (1.0 + e));
        assert_relative_eq!(avg.map(1)[(0, 0)], expected, epsilon = 1e-15);
        assert_relative_eq!(expected, 1.004_545_454_545_454_5, epsilon = 1e-15);
        assert_eq!(avg.map(0)[(0, 0)], 1.0);
    }

    #[test]
    fn identity_is_fixed() {
        let g = Arc::new(pair_groupoid(3));
        let rep = PseudoRep::identity(g.clone(), Arc::new(FiberBundle::trivial(3, 2))).unwrap();
        let avg = average(&rep, &counting_haar(g)).unwrap();
        assert_eq!(distance(&avg, &rep), 0.0);
    }

    #[test]
    fn average_is_unital() {
        let g = Arc::new(pair_groupoid(2));
        let rep = scalar_rep(g.clone(), &[1.3, 0.7, 2.0, 0.9]);
        let avg = average(&rep, &counting_haar(g)).unwrap();
        assert!(avg.unit_defect() < 1e-15);
    }

    #[test]
    fn identities_on_identity_rep() {
        let g = Arc::new(pair_groupoid(2));
        let rep = PseudoRep::identity(g.clone(), Arc::new(FiberBundle::trivial(2, 2))).unwrap();
        let r = verify_fundamental_identities(&rep, &counting_haar(g)).unwrap();
        assert_eq!(r.residual_a, 0.0);
        assert_eq!(r.residual_b, 0.0);
    }

    #[test]
    fn step_estimates_scalar_example() {
        let g = z2_bundle();
        let rep = scalar_rep(g.clone(), &[1.0, 1.1]);
        let haar = counting_haar(g);
        let report = verify_step_estimates(&rep, &haar).unwrap();
        // brute force: b = 1.1, c = |1 − 1.21| = 0.21
        let o = &report.orbits[0];
        assert_relative_eq!(o.before.b, 1.1, epsilon = 1e-15);
        assert_relative_eq!(o.before.c, 0.21, epsilon = 1e-15);
        let a = 0.5 * (1.1 + 1.0 / 1.1);
        assert_relative_eq!(o.after.b, a, epsilon = 1e-15);
        assert_relative_eq!(o.after.c, (1.0 - a * a).abs(), epsilon = 1e-15);
        assert!(report.holds());
    }

    #[test]
    fn step_estimates_reject_large_defect() {
        let g = z2_bundle();
        let rep = scalar_rep(g.clone(), &[1.0, 1.5]);
        assert!(matches!(
            verify_step_estimates(&rep, &counting_haar(g)),
            Err(AveragingError::GatePrecondition { orbit: 0, .. })
        ));
    }

    #[test]
    fn iterate_representation_converges_immediately() {
        let g = Arc::new(pair_groupoid(2));
        let rep = PseudoRep::identity(g.clone(), Arc::new(FiberBundle::trivial(2, 1))).unwrap();
        let trace = iterate(&rep, &counting_haar(g), StopRule::default()).unwrap();
        assert_eq!(trace.verdict, Verdict::Converged { iterations: 0 });
        assert_eq!(trace.rows.len(), 1);
        assert_eq!(trace.rows[0].c, 0.0);
    }

    #[test]
    fn iterate_scalar_converges() {
        let g = z2_bundle();
        let rep = scalar_rep(g.clone(), &[1.0, 1.02]);
        let trace = iterate(&rep, &counting_haar(g), StopRule::default()).unwrap();
        assert!(trace.converged());
        assert!(trace.gate.passed());
        for w in trace.rows.windows(2) {
            assert!(estimate_holds(w[1].c, w[1].quadratic_bound_rhs.unwrap(), w[0].b));
        }
    }

    #[test]
    fn iterate_survives_huge_perturbation() {
        let g = z2_bundle();
        let rep = scalar_rep(g.clone(), &[1.0, 3.4]);
        let trace = iterate(&rep, &counting_haar(g), StopRule { tol_c: 1e-12, max_iter: 10 }).unwrap();
        assert!(!trace.gate.passed());
        assert!(trace.rows.len() <= 11);
    }

    #[test]
    fn iterate_reports_singular_iterates() {
        let g = z2_bundle();
        let rep = scalar_rep(g.clone(), &[1.0, 0.0]);
        let trace = iterate(&rep, &counting_haar(g), StopRule::default()).unwrap();
        assert_eq!(
            trace.verdict,
            Verdict::NonInvertibleAt {
                iteration: 0,
                location: 1
            }
        );
    }

    #[test]
    fn mismatched_groupoids_are_rejected() {
        let rep = scalar_rep(z2_bundle(), &[1.0, 1.0]);
        let other = counting_haar(Arc::new(pair_groupoid(2)));
        assert_eq!(average(&rep, &other).unwrap_err(), AveragingError::MismatchedGroupoid);
    }
}
