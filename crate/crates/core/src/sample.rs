//! Seeded generators for test inputs: genuine representations in random
//! gauges, random invertible pseudo-representations, gated perturbations and
//! smooth torus functions.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;

use crate::circle::TorusGridFn;
use crate::groupoid::{permutations, ArrowId, FiniteGroupAction, FiniteGroupoid};
use crate::linalg::condition_number;
use crate::psrep::{gate_holds, FiberBundle, PseudoRep};

/// Largest condition number accepted for random frames and random values.
pub const MAX_SAMPLE_CONDITION: f64 = 50.0;

/// The standard `(n−1)`-dimensional irreducible representation of `S_n`,
/// one matrix per permutation in the order of [`permutations`].
///
/// It is the permutation representation restricted to the sum-zero subspace,
/// written in the basis `e_0 − e_1, …, e_{n−2} − e_{n−1}`.
pub fn standard_irrep(n: usize) -> Vec<DMatrix<f64>> {
    let d = n - 1;
    let basis = DMatrix::from_fn(n, d, |r, c| {
        if r == c {
            1.0
        } else if r == c + 1 {
            -1.0
        } else {
            0.0
        }
    });
    let left = (basis.transpose() * &basis)
        .try_inverse()
        .expect("basis has full rank")
        * basis.transpose();
    permutations(n)
        .iter()
        .map(|p| {
            let perm = DMatrix::from_fn(n, n, |r, c| if p[c] == r { 1.0 } else { 0.0 });
            &left * perm * &basis
        })
        .collect()
}

/// `ℤ/m` acting on the plane by rotations through `2πj/m`.
pub fn rotation_rep(m: usize) -> Vec<DMatrix<f64>> {
    (0..m)
        .map(|j| {
            let t = 2.0 * PI * j as f64 / m as f64;
            DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()])
        })
        .collect()
}

/// `λ(g, u) = A_{g·u} ρ(g) A_u⁻¹`, a representation of the action groupoid
/// for any group representation `ρ` and invertible frames `A_u`.
pub fn gauge_representation(
    action: &FiniteGroupAction,
    groupoid: Arc<FiniteGroupoid>,
    rho: &[DMatrix<f64>],
    frames: &[DMatrix<f64>],
) -> PseudoRep {
    let dim = rho[0].nrows();
    let inv: Vec<DMatrix<f64>> = frames
        .iter()
        .map(|a| a.clone().try_inverse().expect("frames are invertible"))
        .collect();
    let np = action.num_points();
    let maps = (0..groupoid.num_arrows())
        .map(|id| {
            let (g, u) = (id / np, id % np);
            &frames[action.act[g][u]] * &rho[g] * &inv[u]
        })
        .collect();
    let bundle = Arc::new(FiberBundle::trivial(np, dim));
    PseudoRep::new(groupoid, bundle, maps).expect("shapes match")
}

/// A square matrix with entries uniform in `[lo, hi]`, redrawn until its
/// condition number is at most [`MAX_SAMPLE_CONDITION`].
pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, dim: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    loop {
        let m = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(lo..=hi));
        if condition_number(&m) <= MAX_SAMPLE_CONDITION {
            return m;
        }
    }
}

/// `I + E` with `E` uniform in `[−1/2, 1/2]`, redrawn until well conditioned.
pub fn random_frame<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DMatrix<f64> {
    loop {
        let m = DMatrix::from_fn(dim, dim, |r, c| {
            f64::from(u8::from(r == c)) + rng.random_range(-0.5..=0.5)
        });
        if condition_number(&m) <= MAX_SAMPLE_CONDITION {
            return m;
        }
    }
}

/// A genuine representation in a random gauge.
pub fn random_representation<R: Rng + ?Sized>(
    rng: &mut R,
    action: &FiniteGroupAction,
    groupoid: Arc<FiniteGroupoid>,
    rho: &[DMatrix<f64>],
) -> PseudoRep {
    let dim = rho[0].nrows();
    let frames: Vec<DMatrix<f64>> = (0..action.num_points())
        .map(|_| random_frame(rng, dim))
        .collect();
    gauge_representation(action, groupoid, rho, &frames)
}

/// Independent random values on every arrow, entries in `[lo, hi]`, each
/// well conditioned. With `unital` the units carry identities.
pub fn random_pseudo_rep<R: Rng + ?Sized>(
    rng: &mut R,
    groupoid: Arc<FiniteGroupoid>,
    dim: usize,
    lo: f64,
    hi: f64,
    unital: bool,
) -> PseudoRep {
    let maps = (0..groupoid.num_arrows())
        .map(|g| {
            if unital && groupoid.is_unit(g) {
                DMatrix::identity(dim, dim)
            } else {
                random_matrix(rng, dim, lo, hi)
            }
        })
        .collect();
    let bundle = Arc::new(FiberBundle::trivial(groupoid.num_objects(), dim));
    PseudoRep::new(groupoid, bundle, maps).expect("shapes match")
}

/// Noise matrices with entries uniform in `[−1, 1]` on non-unit arrows, zero on units.
pub fn unit_noise<R: Rng + ?Sized>(rng: &mut R, rep: &PseudoRep) -> Vec<DMatrix<f64>> {
    let g = rep.groupoid();
    (0..g.num_arrows())
        .map(|a| {
            let m = rep.map(a);
            if g.is_unit(a) {
                DMatrix::zeros(m.nrows(), m.ncols())
            } else {
                DMatrix::from_fn(m.nrows(), m.ncols(), |_, _| rng.random_range(-1.0..=1.0))
            }
        })
        .collect()
}

/// `rep + scale·noise`.
pub fn add_scaled(rep: &PseudoRep, noise: &[DMatrix<f64>], scale: f64) -> PseudoRep {
    let maps = rep
        .maps()
        .iter()
        .zip(noise)
        .map(|(m, e)| m + e * scale)
        .collect();
    rep.with_maps(maps).expect("noise has the shapes of rep")
}

/// A perturbation that passes the near-multiplicativity gate.
#[derive(Debug, Clone)]
pub struct GatedPerturbation {
    pub rep: PseudoRep,
    /// Entries of the added noise lie in `[−scale, scale]`.
    pub scale: f64,
    /// How many times the requested amplitude was halved.
    pub halvings: u32,
}

/// Adds entrywise uniform noise in `[−δ, δ]` to the non-unit arrows of
/// `rep`, halving `δ` until every orbit satisfies `c ≤ 1/(9b²)`.
///
/// Unit arrows are left alone so that the result stays unital. Returns
/// `None` if 60 halvings do not suffice, which happens only when `rep`
/// itself fails the gate.
pub fn gated_perturbation<R: Rng + ?Sized>(
    rng: &mut R,
    rep: &PseudoRep,
    delta: f64,
) -> Option<GatedPerturbation> {
    let noise = unit_noise(rng, rep);
    let mut scale = delta;
    for halvings in 0..=60 {
        let candidate = add_scaled(rep, &noise, scale);
        if candidate.orbit_norms().into_iter().all(gate_holds) {
            return Some(GatedPerturbation {
                rep: candidate,
                scale,
                halvings,
            });
        }
        scale *= 0.5;
    }
    None
}

/// Unital `I + s·E` on a trivial bundle with `E` uniform in `[−1, 1]`,
/// halving `s` from 1 until every orbit has `c < c_max`.
pub fn random_near_identity<R: Rng + ?Sized>(
    rng: &mut R,
    groupoid: Arc<FiniteGroupoid>,
    dim: usize,
    c_max: f64,
) -> PseudoRep {
    let bundle = Arc::new(FiberBundle::trivial(groupoid.num_objects(), dim));
    let base = PseudoRep::identity(groupoid, bundle).expect("identity");
    let noise = unit_noise(rng, &base);
    let mut s = 1.0;
    loop {
        let candidate = add_scaled(&base, &noise, s);
        if candidate.orbit_norms().iter().all(|n| n.c < c_max) {
            return candidate;
        }
        s *= 0.5;
    }
}

/// Random trigonometric polynomial of degree at most `degree` in each
/// variable, coefficients uniform in `[−1, 1]` divided by `1 + p² + q²`.
pub fn random_smooth_grid<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    k: usize,
    degree: usize,
) -> TorusGridFn {
    let mut terms = Vec::new();
    for p in 0..=degree {
        for q in 0..=degree {
            let w = 1.0 / (1.0 + (p * p + q * q) as f64);
            let c: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..=1.0) * w);
            terms.push((p as f64, q as f64, c));
        }
    }
    TorusGridFn::from_fn(n, k, |t, a| {
        terms
            .iter()
            .map(|&(p, q, c)| {
                let (x, y) = (2.0 * PI * p * t, 2.0 * PI * q * a);
                c[0] * x.cos() * y.cos()
                    + c[1] * x.cos() * y.sin()
                    + c[2] * x.sin() * y.cos()
                    + c[3] * x.sin() * y.sin()
            })
            .sum()
    })
    .expect("valid grid shape")
}

/// Arrows that are not units.
pub fn non_unit_arrows(g: &FiniteGroupoid) -> impl Iterator<Item = ArrowId> + '_ {
    (0..g.num_arrows()).filter(|&a| !g.is_unit(a))
}
