//! Acceptance checks. Runs with `cargo test --test acceptance` and prints one
//! PASS/FAIL line per criterion; the process fails if any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use groupoid_averaging::averaging::{average, distance, iterate, verify_fundamental_identities, verify_step_estimates};
use groupoid_averaging::bounds::{
    check_lemma_12_8, check_lemma_12_8_with, check_lemma_14_4, envelope, BootstrapParams, Slack,
};
use groupoid_averaging::circle::{
    average_circle, from_profile, group_bundle_average, iterate_circle, limit_profile,
    multiplicativity_residual, CircleError, CircleProfile, TorusGridFn,
};
use groupoid_averaging::groupoid::{
    action_groupoid, cyclic_group, pair_groupoid, symmetric_action, twisted_cyclic_action,
    FiniteGroupAction, FiniteGroupoid,
};
use groupoid_averaging::haar::{counting_haar, restrict_haar};
use groupoid_averaging::psrep::PseudoRep;
use groupoid_averaging::sample::{
    gated_perturbation, random_near_identity, random_pseudo_rep, random_representation,
    random_smooth_grid, rotation_rep, standard_irrep,
};
use groupoid_averaging::trace::{StopRule, Verdict};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

/// Rounding floor for a measured defect of maps of size `b`.
fn noise_floor(b: f64) -> f64 {
    64.0 * f64::EPSILON * (1.0 + b) * (1.0 + b)
}

fn s3_action() -> (FiniteGroupAction, Arc<FiniteGroupoid>) {
    let action = symmetric_action(3);
    let g = Arc::new(action_groupoid(&action));
    (action, g)
}

fn z2_swap(points: usize) -> (FiniteGroupAction, Arc<FiniteGroupoid>) {
    let mut swap: Vec<usize> = (0..points).collect();
    swap.swap(0, 1);
    let action = FiniteGroupAction::new(
        cyclic_group(2),
        (1..=points).map(|u| u.to_string()).collect(),
        vec![(0..points).collect(), swap],
    )
    .expect("valid action");
    let g = Arc::new(action_groupoid(&action));
    (action, g)
}

fn max_entry_deviation(a: &PseudoRep, b: &PseudoRep) -> f64 {
    a.maps()
        .iter()
        .zip(b.maps())
        .map(|(x, y)| (x - y).amax())
        .fold(0.0, f64::max)
}

fn fixed_points() -> Outcome {
    let (action, g) = s3_action();
    let haar = counting_haar(g.clone());
    let rho = standard_irrep(3);
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rep = random_representation(&mut rng, &action, g.clone(), &rho);
        let avg = average(&rep, &haar).map_err(|e| e.to_string())?;
        let dev = max_entry_deviation(&avg, &rep);
        ensure!(dev <= 1e-13, "seed {seed}: deviation {dev:e}");
        worst = worst.max(dev);
    }
    Ok(format!("50 S3 representations, max deviation {worst:.2e}"))
}

fn fundamental_identities() -> Outcome {
    let groupoids: Vec<Arc<FiniteGroupoid>> = vec![
        Arc::new(pair_groupoid(3)),
        s3_action().1,
        z2_swap(2).1,
        Arc::new(action_groupoid(&twisted_cyclic_action(4, 4, 2).expect("valid"))),
    ];
    let mut worst = 0.0f64;
    let mut non_unital = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let g = groupoids[seed as usize % groupoids.len()].clone();
        let unital = seed % 2 == 0;
        let dim = 1 + (seed as usize / 4) % 3;
        let rep = random_pseudo_rep(&mut rng, g.clone(), dim, 0.5, 1.5, unital);
        if !rep.is_unital() {
            non_unital += 1;
        }
        let r = verify_fundamental_identities(&rep, &counting_haar(g)).map_err(|e| e.to_string())?;
        ensure!(
            r.holds(),
            "seed {seed}: residuals ({:e}, {:e}) above {:e}",
            r.residual_a,
            r.residual_b,
            r.threshold()
        );
        worst = worst.max(r.residual_a.max(r.residual_b) / r.threshold());
    }
    Ok(format!(
        "100 inputs ({non_unital} non-unital), worst residual/threshold {worst:.2e}"
    ))
}

fn one_step_estimates() -> Outcome {
    let (s3, g_s3) = s3_action();
    let (z2, g_z2) = z2_swap(3);
    let rho_s3 = standard_irrep(3);
    let rho_z2 = rotation_rep(2);
    let mut max_c = 0.0f64;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
        let rep = match seed % 4 {
            0 => random_near_identity(&mut rng, Arc::new(pair_groupoid(3)), 2, 1.0),
            1 => random_near_identity(&mut rng, g_s3.clone(), 2, 1.0),
            2 => {
                let base = random_representation(&mut rng, &s3, g_s3.clone(), &rho_s3);
                let noise = groupoid_averaging::sample::unit_noise(&mut rng, &base);
                let mut s = 0.5;
                loop {
                    let cand = groupoid_averaging::sample::add_scaled(&base, &noise, s);
                    if cand.orbit_norms().iter().all(|n| n.c < 1.0) {
                        break cand;
                    }
                    s *= 0.5;
                }
            }
            _ => {
                let base = random_representation(&mut rng, &z2, g_z2.clone(), &rho_z2);
                gated_perturbation(&mut rng, &base, 1.0).expect("gate reachable").rep
            }
        };
        let haar = counting_haar(rep.groupoid().clone());
        let inv = rep.inverse_rep().map_err(|e| e.to_string())?;
        ensure!(inv.holds(), "seed {seed}: inverse estimates fail: {:?}", inv.orbits);
        let step = verify_step_estimates(&rep, &haar).map_err(|e| e.to_string())?;
        ensure!(step.holds(), "seed {seed}: step estimates fail: {:?}", step.orbits);
        max_c = max_c.max(rep.c_norm());
    }
    Ok(format!("100 unital inputs, largest c = {max_c:.3}"))
}

fn fast_convergence() -> Outcome {
    let (s3, g_s3) = s3_action();
    let (z2, g_z2) = z2_swap(2);
    let rho_s3 = standard_irrep(3);
    let rho_z2 = rotation_rep(2);
    let mut max_iters = 0;
    let mut c0_range = (f64::INFINITY, 0.0f64);
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
        let base = if seed % 2 == 0 {
            random_representation(&mut rng, &s3, g_s3.clone(), &rho_s3)
        } else {
            random_representation(&mut rng, &z2, g_z2.clone(), &rho_z2)
        };
        let p = gated_perturbation(&mut rng, &base, 0.2).expect("gate reachable");
        let haar = counting_haar(base.groupoid().clone());
        let trace = iterate(&p.rep, &haar, StopRule::default()).map_err(|e| e.to_string())?;
        ensure!(trace.gate.passed(), "seed {seed}: gate not recorded as passing");
        c0_range = (c0_range.0.min(trace.rows[0].c), c0_range.1.max(trace.rows[0].c));

        let initial = &trace.rows[0].orbit_norms;
        for (o, n0) in initial.iter().enumerate() {
            let b: Vec<f64> = trace.rows.iter().map(|r| r.orbit_norms[o].b).collect();
            let c: Vec<f64> = trace.rows.iter().map(|r| r.orbit_norms[o].c).collect();
            let eps = 6.0 * n0.b * n0.b * n0.c;
            let (_, c_env) = envelope(n0.b.max(1.0), n0.c, c.len()).map_err(|e| e.to_string())?;
            let floor = noise_floor(n0.b);
            for i in 0..c.len() {
                let squaring = groupoid_averaging::bounds::squared_power(eps, i) / (6.0 * n0.b * n0.b);
                ensure!(
                    c[i] <= squaring * (1.0 + 1e-12) + floor,
                    "seed {seed} orbit {o} step {i}: c = {:e} above ε^(2^i)/(6b0²) = {squaring:e}",
                    c[i]
                );
                ensure!(
                    c[i] <= c_env[i] * (1.0 + 1e-12) + floor,
                    "seed {seed} orbit {o} step {i}: c = {:e} above the tight envelope {:e}",
                    c[i],
                    c_env[i]
                );
                ensure!(
                    c_env[i] <= squaring * (1.0 + 1e-12),
                    "seed {seed} orbit {o} step {i}: tight envelope {:e} above {squaring:e}",
                    c_env[i]
                );
            }
            if n0.b >= 1.0 {
                let report = check_lemma_12_8_with(&b, &c, Slack { rel: 1e-12, abs: floor });
                ensure!(
                    report.pass(),
                    "seed {seed} orbit {o}: sequence check fails at {:?}",
                    report.first_failure
                );
            }
        }
        // ‖avg λ − λ‖ ≤ max ‖Δ‖ ≤ c b / (1 − c), so the iterates are Cauchy.
        for (i, pair) in trace.rows.windows(2).enumerate() {
            let bound = pair[0]
                .orbit_norms
                .iter()
                .map(|n| n.c * n.b / (1.0 - n.c))
                .fold(0.0, f64::max);
            let step = pair[1].step_distance.expect("recorded after the first row");
            ensure!(
                step <= bound * (1.0 + 1e-12) + noise_floor(pair[0].b),
                "seed {seed} step {}: moved {step:e}, bound {bound:e}",
                i + 1
            );
        }
        let iters = match trace.verdict {
            Verdict::Converged { iterations } => iterations,
            v => return Err(format!("seed {seed}: {v:?}")),
        };
        ensure!(iters <= 7, "seed {seed}: {iters} iterations");
        max_iters = max_iters.max(iters);
        let defect = trace.last.c_norm();
        ensure!(defect <= 1e-11, "seed {seed}: limit defect {defect:e}");
        ensure!(trace.last.unit_defect() <= 1e-13, "seed {seed}: limit not unital");
    }
    Ok(format!(
        "20 gated runs with c0 in [{:.1e}, {:.1e}], at most {max_iters} iterations",
        c0_range.0, c0_range.1
    ))
}

fn tight_pair(b0: f64, c0: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    envelope(b0, c0, n).expect("gated start")
}

fn tight_bootstrap(n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (mut c, mut bp, mut cp) = (vec![0.05], vec![1.0], vec![0.05]);
    for i in 0..n - 1 {
        let a = bp[i] * c[i] + cp[i];
        bp.push(bp[i] + a);
        cp.push(a * c[i]);
        c.push(c[i] * c[i]);
    }
    (c, bp, cp)
}

fn lemma_oracles() -> Outcome {
    for (b0, c0) in [(1.0, 1.0 / 9.0), (1.3, 0.05), (2.0, 0.01)] {
        let (b, c) = tight_pair(b0, c0, 8);
        let r = check_lemma_12_8(&b, &c);
        ensure!(r.pass(), "tight recursion from ({b0}, {c0}) rejected: {:?}", r.first_failure);
    }
    let (b, c) = tight_pair(1.0, 1.0 / 9.0, 8);
    let corrupt: [(&str, Box<dyn Fn(&mut Vec<f64>, &mut Vec<f64>)>, usize); 5] = [
        ("b0 below one", Box::new(|b, _| b[0] = 0.9), 0),
        ("epsilon above 2/3", Box::new(|_, c| c[0] = 0.2), 0),
        ("c3 inflated", Box::new(|_, c| c[3] *= 10.0), 3),
        ("b2 inflated", Box::new(|b, _| b[2] *= 1.5), 2),
        ("c4 nudged by 1e-9", Box::new(|_, c| c[4] *= 1.0 + 1e-9), 4),
    ];
    for (name, f, expected) in corrupt.iter() {
        let (mut b2, mut c2) = (b.clone(), c.clone());
        f(&mut b2, &mut c2);
        let r = check_lemma_12_8(&b2, &c2);
        ensure!(
            !r.pass() && r.first_failure == Some(*expected),
            "squaring lemma, {name}: first failure {:?}, expected {expected}",
            r.first_failure
        );
    }

    let params = BootstrapParams {
        l: 1.0,
        r: 1.0,
        epsilon: 0.5,
        start: 0,
    };
    let (c, bp, cp) = tight_bootstrap(8);
    let r = check_lemma_14_4(&c, &bp, &cp, params);
    ensure!(r.pass(), "bootstrapping lemma rejects tight recursion: {:?}", r.first_failure);
    type Corrupt3 = Box<dyn Fn(&mut Vec<f64>, &mut Vec<f64>, &mut Vec<f64>)>;
    let corrupt: [(&str, Corrupt3, usize); 5] = [
        ("c above c' at 3", Box::new(|c, _, cp| cp[3] = c[3] * 0.5), 3),
        ("b'2 raised", Box::new(|_, bp, _| bp[2] += 1.0), 2),
        ("c4 doubled", Box::new(|c, _, _| c[4] *= 2.0), 4),
        ("c'1 tripled", Box::new(|_, _, cp| cp[1] *= 3.0), 1),
        ("c0 above epsilon", Box::new(|c, _, _| c[0] = 0.6), 0),
    ];
    for (name, f, expected) in corrupt.iter() {
        let (mut c2, mut bp2, mut cp2) = (c.clone(), bp.clone(), cp.clone());
        f(&mut c2, &mut bp2, &mut cp2);
        let r = check_lemma_14_4(&c2, &bp2, &cp2, params);
        ensure!(
            !r.pass() && r.first_failure == Some(*expected),
            "bootstrapping lemma, {name}: first failure {:?}, expected {expected}",
            r.first_failure
        );
    }
    Ok("both oracles accept tight recursions and locate 10 corruptions".into())
}

fn sine_profile(k: usize, m: usize, amp: f64) -> CircleProfile {
    CircleProfile::from_fn(k, m, |t| amp * (2.0 * PI * k as f64 * t).sin()).expect("valid profile")
}

fn circle_closed_forms() -> Outcome {
    let n = 64;
    let (_, lambda) = from_profile(&sine_profile(2, 2 * n, 0.1), n).map_err(|e| e.to_string())?;
    let res = multiplicativity_residual(&lambda);
    ensure!(res.cocycle <= 1e-13 && res.unit <= 1e-13, "residuals {res:?}");
    let avg = average_circle(&lambda).map_err(|e| e.to_string())?;
    let dev = avg.distance(&lambda).map_err(|e| e.to_string())?;
    ensure!(dev <= 1e-13, "average moved a multiplicative effect by {dev:e}");

    let skew = CircleProfile::from_fn(2, 2 * n, |t| 0.1 * (2.0 * PI * t).sin()).expect("in range");
    ensure!(
        matches!(from_profile(&skew, n), Err(CircleError::NonPeriodicProfile { .. })),
        "non-periodic profile accepted"
    );
    let vanishing = TorusGridFn::constant(n, 2, -0.5).expect("grid").effect();
    ensure!(
        matches!(average_circle(&vanishing), Err(CircleError::NonInvertible { .. })),
        "Λ ≡ 0 was averaged"
    );
    Ok(format!(
        "cocycle {:.1e}, unit {:.1e}, fixed to {dev:.1e}",
        res.cocycle, res.unit
    ))
}

/// `c_{i+1} ≤ 2 (b_i/(1−c_i))² s_i²` for the seminorm sequence `s`, above a rounding floor.
fn quadratic_decay(b: &[f64], c: &[f64], s: &[f64], floor: f64) -> Result<(), usize> {
    for i in 0..s.len() - 1 {
        let r = b[i] / (1.0 - c[i]);
        if s[i + 1] > floor && s[i + 1] > 2.0 * r * r * s[i] * s[i] * (1.0 + 1e-12) {
            return Err(i + 1);
        }
        if s[i + 1] > floor && s[i + 1] >= s[i] {
            return Err(i + 1);
        }
    }
    Ok(())
}

fn gated_circle_start(n: usize, f: &CircleProfile) -> Result<TorusGridFn, String> {
    let (_, base) = from_profile(f, n).map_err(|e| e.to_string())?;
    let bump = TorusGridFn::from_fn(n, f.k(), |t, a| {
        1.0 + 0.01 * (2.0 * PI * t).sin() * (2.0 * PI * a).sin()
    })
    .map_err(|e| e.to_string())?;
    base.zip_with(&bump, |x, y| x * y).map_err(|e| e.to_string())
}

fn circle_convergence() -> Outcome {
    let stop = StopRule::default();
    let mut worst_period = 0.0f64;
    for n in [32, 64, 128] {
        let start = gated_circle_start(n, &sine_profile(2, 2 * n, 0.1))?;
        let trace = iterate_circle(&start, stop).map_err(|e| e.to_string())?;
        ensure!(trace.gate.passed(), "N = {n}: start fails the gate");
        ensure!(trace.converged(), "N = {n}: {:?}", trace.verdict);
        let b = trace.b_sequence();
        let c = trace.c_sequence();
        for r in 0..2 {
            let s: Vec<f64> = trace.rows.iter().map(|row| row.seminorm_defects[r]).collect();
            let floor = noise_floor(b[0]) * (n as f64).powi(r as i32);
            quadratic_decay(&b, &c, &s, floor)
                .map_err(|i| format!("N = {n}, r = {r}: no quadratic decay at step {i}: {s:?}"))?;
        }
        let f = limit_profile(&trace.last).map_err(|e| e.to_string())?;
        let period = f.periodicity_defect().expect("k divides N");
        ensure!(period <= 1e-10, "N = {n}: limit profile periodicity defect {period:e}");
        let res = multiplicativity_residual(&trace.last).cocycle;
        ensure!(res <= 1e-12, "N = {n}: limit residual {res:e}");
        worst_period = worst_period.max(period);
    }

    // straight line between two multiplicative effects
    let n = 64;
    let f0 = sine_profile(2, 2 * n, 0.1);
    let f1 = CircleProfile::from_fn(2, 2 * n, |t| {
        0.06 * (4.0 * PI * t).sin() + 0.04 * (1.0 - (4.0 * PI * t).cos()) + 0.02 * (8.0 * PI * t).sin()
    })
    .expect("valid profile");
    let (_, l0) = from_profile(&f0, n).map_err(|e| e.to_string())?;
    let (_, l1) = from_profile(&f1, n).map_err(|e| e.to_string())?;
    let mut end_error = 0.0f64;
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let lt = l0.lerp(&l1, t).map_err(|e| e.to_string())?;
        let trace = iterate_circle(&lt, stop).map_err(|e| e.to_string())?;
        ensure!(trace.gate.passed(), "t = {t}: path point fails the gate");
        ensure!(trace.converged(), "t = {t}: {:?}", trace.verdict);
        let limit = &trace.last;
        ensure!(multiplicativity_residual(limit).cocycle <= 1e-12, "t = {t}: limit not multiplicative");
        if t == 0.0 || t == 1.0 {
            let target = if t == 0.0 { &l0 } else { &l1 };
            let e = limit.distance(target).map_err(|e| e.to_string())?;
            ensure!(e <= 1e-10, "t = {t}: endpoint moved by {e:e}");
            end_error = end_error.max(e);
        }
        // the same path taken through profiles stays multiplicative throughout
        let (_, lf) = from_profile(&f0.lerp(&f1, t).map_err(|e| e.to_string())?, n)
            .map_err(|e| e.to_string())?;
        ensure!(multiplicativity_residual(&lf).cocycle <= 1e-13, "t = {t}: profile path left the set");
    }
    Ok(format!(
        "N = 32/64/128 converge quadratically (r = 0, 1), periodicity {worst_period:.1e}, path endpoints {end_error:.1e}"
    ))
}

fn abelian_annihilation() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(4000 + seed);
        let x = random_smooth_grid(&mut rng, 64, 1, 5);
        let m = group_bundle_average(&x).max_abs();
        ensure!(m <= 1e-13, "seed {seed}: max |avg X| = {m:e}");
        worst = worst.max(m);
    }
    Ok(format!("20 random X, max |avg X| = {worst:.1e}"))
}

fn restriction_commutes() -> Outcome {
    let mut worst = 0.0f64;
    let (z2, g) = z2_swap(3);
    let twisted = twisted_cyclic_action(4, 4, 2).expect("valid");
    let gt = Arc::new(action_groupoid(&twisted));
    let cases: Vec<(FiniteGroupAction, Arc<FiniteGroupoid>, Vec<DMatrix<f64>>)> =
        vec![(z2, g, rotation_rep(2)), (twisted, gt, rotation_rep(4))];
    for (seed, (action, g, rho)) in cases.into_iter().enumerate() {
        ensure!(g.orbits().len() == 2, "expected two orbits, got {}", g.orbits().len());
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + seed as u64);
        let base = random_representation(&mut rng, &action, g.clone(), &rho);
        let rep = gated_perturbation(&mut rng, &base, 0.3).expect("gate reachable").rep;
        let haar = counting_haar(g.clone());
        let avg = average(&rep, &haar).map_err(|e| e.to_string())?;
        for orbit in g.orbits() {
            let (_, rep_s) = rep.restrict(orbit).map_err(|e| e.to_string())?;
            let (_, haar_s) = restrict_haar(&haar, orbit).map_err(|e| e.to_string())?;
            let lhs = average(&rep_s, &haar_s).map_err(|e| e.to_string())?;
            let (_, rhs) = avg.restrict(orbit).map_err(|e| e.to_string())?;
            let dev = max_entry_deviation(&lhs, &rhs);
            ensure!(dev <= 1e-14, "orbit {orbit:?}: deviation {dev:e}");
            ensure!(distance(&lhs, &rhs) <= 1e-14, "orbit {orbit:?}: norm deviation");
            worst = worst.max(dev);
        }
    }
    Ok(format!("two 2-orbit groupoids, max deviation {worst:.1e}"))
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "fixed-point exactness", budget: Duration::from_secs(1), run: fixed_points },
        Criterion { id: 2, name: "fundamental identities", budget: Duration::from_secs(5), run: fundamental_identities },
        Criterion { id: 3, name: "one-step estimates", budget: Duration::from_secs(5), run: one_step_estimates },
        Criterion { id: 4, name: "fast convergence", budget: Duration::from_secs(5), run: fast_convergence },
        Criterion { id: 5, name: "sequence lemma oracles", budget: Duration::from_secs(1), run: lemma_oracles },
        Criterion { id: 6, name: "circle closed forms", budget: Duration::from_secs(1), run: circle_closed_forms },
        Criterion { id: 7, name: "circle convergence and deformation", budget: Duration::from_secs(10), run: circle_convergence },
        Criterion { id: 8, name: "abelian one-step annihilation", budget: Duration::from_secs(1), run: abelian_annihilation },
        Criterion { id: 9, name: "restriction commutes with averaging", budget: Duration::from_secs(1), run: restriction_commutes },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|detail| {
            if elapsed <= c.budget {
                Ok(detail)
            } else {
                Err(format!("{detail}; took {elapsed:.2?}, budget {:?}", c.budget))
            }
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {} ({}) [{elapsed:.2?}]: {detail}", c.id, c.name),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {} ({}) [{elapsed:.2?}]: {why}", c.id, c.name);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
