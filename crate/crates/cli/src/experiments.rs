//! The experiment kinds. Each one produces an [`Outcome`]: files to write,
//! a JSON summary and a list of assertions.

use std::f64::consts::PI;
use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use groupoid_averaging::averaging::{
    iterate, verify_fundamental_identities, verify_step_estimates,
};
use groupoid_averaging::bounds::{check_lemma_12_8_with, BoundSeqReport, Slack};
use groupoid_averaging::circle::{
    average_circle, from_profile, group_bundle_average, iterate_circle, limit_profile,
    multiplicativity_residual, CircleProfile, TorusGridFn,
};
use groupoid_averaging::groupoid::{action_groupoid, symmetric_action};
use groupoid_averaging::haar::{counting_haar, HaarSystem};
use groupoid_averaging::io::{bundle_from_json, groupoid_from_json, haar_from_json, psrep_from_json};
use groupoid_averaging::psrep::PseudoRep;
use groupoid_averaging::sample::{gated_perturbation, random_representation, random_smooth_grid, standard_irrep};
use groupoid_averaging::trace::{read_trace_csv, IterationTrace, TraceRecord};

use crate::config::{Experiment, Kind, DEFAULT_CIRCLE_PERTURB};

/// Tolerance for the closed-form and one-step annihilation checks.
pub const EXACT_TOL: f64 = 1e-13;
/// Tolerance for `f_∞(θ + 1/k) = f_∞(θ)`.
pub const PERIODICITY_TOL: f64 = 1e-10;
/// Degree of the random trigonometric polynomial used by `group_bundle`.
pub const RANDOM_DEGREE: usize = 5;

#[derive(Debug)]
pub enum RunError {
    /// Bad config or unreadable input: exit code 2.
    Input(String),
    /// Could not write an artifact.
    Output(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Input(m) | RunError::Output(m) => f.write_str(m),
        }
    }
}

fn input_err(what: &str, e: impl std::fmt::Display) -> RunError {
    RunError::Input(format!("{what}: {e}"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Assertion {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            pass,
            detail,
        }
    }
}

type Files = Vec<(String, Vec<u8>)>;

#[derive(Debug, Clone)]
pub struct Outcome {
    /// File name and contents, written into the output directory in order.
    pub files: Vec<(String, Vec<u8>)>,
    pub details: Value,
    pub assertions: Vec<Assertion>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }

    /// `verdict.json`: the experiment, every assertion and the details.
    pub fn verdict_json(&self, exp: &Experiment) -> String {
        let v = json!({
            "kind": exp.kind.to_string(),
            "seed": exp.seed,
            "pass": self.passed(),
            "assertions": self.assertions,
            "details": self.details,
        });
        let mut s = serde_json::to_string_pretty(&v).expect("plain data serializes");
        s.push('\n');
        s
    }
}

/// Rounding allowance for computed defects of size about `b`.
pub fn noise_floor(b: f64) -> f64 {
    64.0 * f64::EPSILON * (1.0 + b) * (1.0 + b)
}

pub fn run(exp: &Experiment, log: &mut dyn FnMut(String)) -> Result<Outcome, RunError> {
    match exp.kind {
        Kind::FiniteIterate => finite_iterate(exp, log),
        Kind::FiniteIdentities => finite_identities(exp, log),
        Kind::CircleIterate => circle_iterate(exp, log),
        Kind::CircleProfile => circle_profile(exp),
        Kind::BoundsCheck => bounds_check(exp),
        Kind::GroupBundle => group_bundle(exp, log),
    }
}

/// Parses every input without running anything; returns a short description.
pub fn load_inputs(exp: &Experiment) -> Result<Value, RunError> {
    Ok(match exp.kind {
        Kind::FiniteIterate | Kind::FiniteIdentities => match load_finite(exp)? {
            Some((rep, _)) => json!({
                "objects": rep.groupoid().num_objects(),
                "arrows": rep.groupoid().num_arrows(),
            }),
            None => json!({"bundled": "S3 acting on 3 points"}),
        },
        Kind::CircleIterate | Kind::GroupBundle => match &exp.inputs.grid {
            Some(p) => {
                let g = read_grid(p)?;
                json!({"N": g.n(), "k": g.k()})
            }
            None => json!({"N": exp.n, "k": exp.k}),
        },
        Kind::CircleProfile => json!({"samples": load_profile(exp)?.len()}),
        Kind::BoundsCheck => json!({"rows": load_trace(exp)?.len()}),
    })
}

fn read_text(path: &Path) -> Result<String, RunError> {
    fs::read_to_string(path).map_err(|e| input_err(&format!("cannot read {}", path.display()), e))
}

fn load_finite(exp: &Experiment) -> Result<Option<(PseudoRep, HaarSystem)>, RunError> {
    let i = &exp.inputs;
    let (Some(gp), Some(bp), Some(pp)) = (&i.groupoid, &i.bundle, &i.psrep) else {
        return Ok(None);
    };
    let g = Arc::new(groupoid_from_json(&read_text(gp)?).map_err(|e| input_err("groupoid", e))?);
    let bundle = Arc::new(bundle_from_json(&g, &read_text(bp)?).map_err(|e| input_err("bundle", e))?);
    let rep = psrep_from_json(g.clone(), bundle, &read_text(pp)?).map_err(|e| input_err("psrep", e))?;
    let haar = match &i.haar {
        Some(hp) => haar_from_json(g, &read_text(hp)?).map_err(|e| input_err("haar", e))?,
        None => counting_haar(g),
    };
    Ok(Some((rep, haar)))
}

#[derive(Debug, Clone, Serialize)]
struct PerturbInfo {
    requested: f64,
    applied: f64,
    halvings: u32,
    rescale: f64,
}

/// The starting pseudo-representation: the input files, or the bundled
/// standard representation of `S_3` on 3 points in a random gauge; then the
/// optional gated perturbation.
fn finite_start(
    exp: &Experiment,
    log: &mut dyn FnMut(String),
) -> Result<(PseudoRep, HaarSystem, Option<PerturbInfo>), RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(exp.seed.unwrap_or(0));
    let (rep, haar) = match load_finite(exp)? {
        Some(loaded) => loaded,
        None => {
            let action = symmetric_action(3);
            let g = Arc::new(action_groupoid(&action));
            let rep = random_representation(&mut rng, &action, g.clone(), &standard_irrep(3));
            (rep, counting_haar(g))
        }
    };
    let Some(delta) = exp.perturb.filter(|&d| d > 0.0) else {
        return Ok((rep, haar, None));
    };
    let p = gated_perturbation(&mut rng, &rep, delta).ok_or_else(|| {
        RunError::Input("the input fails the near-multiplicativity gate even unperturbed".into())
    })?;
    let info = PerturbInfo {
        requested: delta,
        applied: p.scale,
        halvings: p.halvings,
        rescale: p.scale / delta,
    };
    log(format!(
        "perturbation amplitude {:e} rescaled by {:e} ({} halvings) to pass the gate",
        delta, info.rescale, info.halvings
    ));
    Ok((p.rep, haar, Some(info)))
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> Result<(), String>) -> Result<Vec<u8>, RunError> {
    let mut buf = Vec::new();
    write(&mut buf).map_err(RunError::Output)?;
    Ok(buf)
}

fn bounds_assertion(report: &BoundSeqReport) -> Assertion {
    match report.failures().next() {
        None => Assertion::new("bounds", true, format!("{} checks passed", report.checks.len())),
        Some(f) => Assertion::new(
            "bounds",
            false,
            format!(
                "row {} fails {}: observed {:e} > bound {:e}",
                f.index, f.name, f.observed, f.bound
            ),
        ),
    }
}

/// Trace, bounds cross-check and the convergence/bounds assertions shared by
/// both iterate kinds.
fn iteration_artifacts<T>(
    trace: &IterationTrace<T>,
) -> Result<(Files, BoundSeqReport, Vec<Assertion>), RunError> {
    let b = trace.b_sequence();
    let c = trace.c_sequence();
    let slack = Slack {
        abs: noise_floor(b[0]),
        ..Slack::default()
    };
    let report = check_lemma_12_8_with(&b, &c, slack);
    let files = vec![
        ("trace.csv".to_string(), csv_bytes(|w| trace.write_csv(w).map_err(|e| e.to_string()))?),
        ("bounds.csv".to_string(), csv_bytes(|w| report.write_csv(w).map_err(|e| e.to_string()))?),
    ];
    let mut assertions = vec![Assertion::new(
        "converged",
        trace.converged(),
        format!("{:?}, final c = {:e}", trace.verdict, c[c.len() - 1]),
    )];
    if trace.gate.passed() {
        assertions.push(bounds_assertion(&report));
    }
    Ok((files, report, assertions))
}

fn finite_iterate(exp: &Experiment, log: &mut dyn FnMut(String)) -> Result<Outcome, RunError> {
    let (rep, haar, perturbation) = finite_start(exp, log)?;
    let trace = iterate(&rep, &haar, exp.stop).map_err(|e| input_err("cannot iterate", e))?;
    let (files, report, assertions) = iteration_artifacts(&trace)?;
    let details = json!({
        "verdict": trace.verdict,
        "gate": trace.gate,
        "perturbation": perturbation,
        "b0": trace.rows[0].b,
        "c0": trace.rows[0].c,
        "bounds_hypotheses_hold": report.hypothesis_ok,
    });
    Ok(Outcome {
        files,
        details,
        assertions,
    })
}

fn finite_identities(exp: &Experiment, log: &mut dyn FnMut(String)) -> Result<Outcome, RunError> {
    let (rep, haar, perturbation) = finite_start(exp, log)?;
    let identities =
        verify_fundamental_identities(&rep, &haar).map_err(|e| input_err("cannot average", e))?;
    let mut assertions = vec![Assertion::new(
        "fundamental_identities",
        identities.holds(),
        format!(
            "residuals {:e}, {:e} against {:e}",
            identities.residual_a,
            identities.residual_b,
            identities.threshold()
        ),
    )];
    let steps = match verify_step_estimates(&rep, &haar) {
        Ok(report) => {
            let failing = report.orbits.iter().find(|o| !o.pass);
            assertions.push(Assertion::new(
                "step_estimates",
                failing.is_none(),
                match failing {
                    None => format!("{} orbits", report.orbits.len()),
                    Some(o) => format!("orbit {} violates the one-step bounds", o.orbit),
                },
            ));
            json!(report)
        }
        Err(e) => {
            log(format!("one-step estimates not applicable: {e}"));
            json!({"skipped": e.to_string()})
        }
    };
    let details = json!({
        "identities": identities,
        "step_estimates": steps,
        "perturbation": perturbation,
    });
    Ok(Outcome {
        files: Vec::new(),
        details,
        assertions,
    })
}

fn read_grid(path: &Path) -> Result<TorusGridFn, RunError> {
    let file = fs::File::open(path).map_err(|e| input_err(&format!("cannot read {}", path.display()), e))?;
    TorusGridFn::read_csv(BufReader::new(file)).map_err(|e| input_err("grid", e))
}

/// `f(θ) = 0.1 sin(2πkθ)` on the `kN` grid.
fn default_profile(exp: &Experiment) -> Result<CircleProfile, RunError> {
    let k = exp.k as f64;
    CircleProfile::from_fn(exp.k, exp.k * exp.n, |t| 0.1 * (2.0 * PI * k * t).sin())
        .map_err(|e| input_err("profile", e))
}

fn load_profile(exp: &Experiment) -> Result<CircleProfile, RunError> {
    match &exp.inputs.profile {
        Some(p) => {
            let file = fs::File::open(p).map_err(|e| input_err(&format!("cannot read {}", p.display()), e))?;
            CircleProfile::read_csv(exp.k, BufReader::new(file)).map_err(|e| input_err("profile", e))
        }
        None => default_profile(exp),
    }
}

fn grid_bytes(g: &TorusGridFn) -> Result<Vec<u8>, RunError> {
    csv_bytes(|w| g.write_csv(w).map_err(|e| e.to_string()))
}

/// Starting `Λ`: the grid input, or the multiplicative `Λ` of the default
/// profile; multiplied by `1 + δ sin(2πθ) sin(2πa)`, which keeps `Λ(0, a) = 1`.
fn circle_iterate(exp: &Experiment, log: &mut dyn FnMut(String)) -> Result<Outcome, RunError> {
    let base = match &exp.inputs.grid {
        Some(p) => read_grid(p)?,
        None => from_profile(&default_profile(exp)?, exp.n)
            .map_err(|e| input_err("profile", e))?
            .1,
    };
    let delta = exp.perturb.unwrap_or(if exp.inputs.grid.is_some() {
        0.0
    } else {
        DEFAULT_CIRCLE_PERTURB
    });
    let bump = TorusGridFn::from_fn(base.n(), base.k(), |t, a| {
        1.0 + delta * (2.0 * PI * t).sin() * (2.0 * PI * a).sin()
    })
    .map_err(|e| input_err("grid", e))?;
    let start = base.zip_with(&bump, |x, y| x * y).map_err(|e| input_err("grid", e))?;
    log(format!("circle start: N = {}, k = {}, bump amplitude {:e}", start.n(), start.k(), delta));
    let trace = iterate_circle(&start, exp.stop).map_err(|e| input_err("cannot iterate", e))?;
    let (mut files, report, mut assertions) = iteration_artifacts(&trace)?;
    let mut seminorms = String::from("i,c0,c1,c2\n");
    for row in &trace.rows {
        let s: Vec<String> = row.seminorm_defects.iter().map(|v| format!("{v:e}")).collect();
        seminorms.push_str(&format!("{},{}\n", row.iteration, s.join(",")));
    }
    files.push(("seminorms.csv".to_string(), seminorms.into_bytes()));
    let mut periodicity = None;
    if trace.converged() {
        let f = limit_profile(&trace.last).map_err(|e| input_err("limit", e))?;
        let defect = f.periodicity_defect().unwrap_or(0.0);
        periodicity = Some(defect);
        assertions.push(Assertion::new(
            "limit_periodic",
            defect <= PERIODICITY_TOL,
            format!("max |f(θ + 1/k) − f(θ)| = {defect:e}"),
        ));
        files.push((
            "profile.csv".to_string(),
            csv_bytes(|w| f.write_csv(w).map_err(|e| e.to_string()))?,
        ));
    }
    let details = json!({
        "N": start.n(),
        "k": start.k(),
        "bump": delta,
        "verdict": trace.verdict,
        "gate": trace.gate,
        "bounds_hypotheses_hold": report.hypothesis_ok,
        "limit_periodicity_defect": periodicity,
    });
    Ok(Outcome {
        files,
        details,
        assertions,
    })
}

fn circle_profile(exp: &Experiment) -> Result<Outcome, RunError> {
    let profile = load_profile(exp)?;
    let (x, lambda) = from_profile(&profile, exp.n).map_err(|e| input_err("profile", e))?;
    let residuals = multiplicativity_residual(&lambda);
    let averaged = average_circle(&lambda).map_err(|e| input_err("average", e))?;
    let moved = averaged.distance(&lambda).map_err(|e| input_err("average", e))?;
    let assertions = vec![
        Assertion::new(
            "cocycle",
            residuals.cocycle <= EXACT_TOL,
            format!("cocycle residual {:e}", residuals.cocycle),
        ),
        Assertion::new(
            "unit",
            residuals.unit <= EXACT_TOL,
            format!("unit residual {:e}", residuals.unit),
        ),
        Assertion::new("fixed_by_average", moved <= EXACT_TOL, format!("max |avg Λ − Λ| = {moved:e}")),
    ];
    let details = json!({
        "N": exp.n,
        "k": exp.k,
        "residuals": residuals,
        "average_moves": moved,
    });
    Ok(Outcome {
        files: vec![
            ("x.csv".to_string(), grid_bytes(&x)?),
            ("lambda.csv".to_string(), grid_bytes(&lambda)?),
        ],
        details,
        assertions,
    })
}

fn load_trace(exp: &Experiment) -> Result<Vec<TraceRecord>, RunError> {
    let path = exp.inputs.trace.as_ref().expect("validated");
    let file = fs::File::open(path).map_err(|e| input_err(&format!("cannot read {}", path.display()), e))?;
    let rows = read_trace_csv(BufReader::new(file)).map_err(|e| input_err("trace", e))?;
    if rows.is_empty() {
        return Err(RunError::Input("trace has no rows".into()));
    }
    Ok(rows)
}

/// Checks a trace CSV against the squaring lemma and against its own
/// `quadratic_bound_rhs` and `envelope` columns.
fn bounds_check(exp: &Experiment) -> Result<Outcome, RunError> {
    let rows = load_trace(exp)?;
    let b: Vec<f64> = rows.iter().map(|r| r.b).collect();
    let c: Vec<f64> = rows.iter().map(|r| r.c).collect();
    let floor = noise_floor(b[0]);
    let report = check_lemma_12_8_with(&b, &c, Slack { abs: floor, ..Slack::default() });
    let mut assertions = vec![bounds_assertion(&report)];
    for (name, column) in [
        ("quadratic_bound_column", rows.iter().map(|r| r.quadratic_bound_rhs).collect::<Vec<_>>()),
        ("envelope_column", rows.iter().map(|r| r.envelope).collect()),
    ] {
        let bad = rows
            .iter()
            .zip(&column)
            .find(|(r, bound)| bound.is_some_and(|v| r.c > v * (1.0 + 1e-12) + floor));
        assertions.push(match bad {
            None => Assertion::new(name, true, "every row within its column".into()),
            Some((r, bound)) => Assertion::new(
                name,
                false,
                format!("row {}: c = {:e} > {:e}", r.i, r.c, bound.unwrap_or(f64::NAN)),
            ),
        });
    }
    let details = json!({
        "rows": rows.len(),
        "hypotheses_hold": report.hypothesis_ok,
        "first_failure": report.first_failure,
    });
    Ok(Outcome {
        files: vec![(
            "bounds.csv".to_string(),
            csv_bytes(|w| report.write_csv(w).map_err(|e| e.to_string()))?,
        )],
        details,
        assertions,
    })
}

/// `X` from the grid input, a random smooth grid when seeded, or a fixed
/// trigonometric polynomial.
fn group_bundle(exp: &Experiment, log: &mut dyn FnMut(String)) -> Result<Outcome, RunError> {
    let x = match (&exp.inputs.grid, exp.seed) {
        (Some(p), _) => read_grid(p)?,
        (None, Some(seed)) => {
            random_smooth_grid(&mut ChaCha8Rng::seed_from_u64(seed), exp.n, exp.k, RANDOM_DEGREE)
        }
        (None, None) => {
            log("no seed: using the fixed X = sin 2πθ cos 4πa + cos 6πθ sin 2πa / 2".into());
            TorusGridFn::from_fn(exp.n, exp.k, |t, a| {
                (2.0 * PI * t).sin() * (4.0 * PI * a).cos()
                    + 0.5 * (6.0 * PI * t).cos() * (2.0 * PI * a).sin()
            })
            .map_err(|e| input_err("grid", e))?
        }
    };
    let avg = group_bundle_average(&x);
    let max = avg.max_abs();
    let details = json!({"N": x.n(), "k": x.k(), "max_abs_average": max});
    Ok(Outcome {
        files: vec![("average.csv".to_string(), grid_bytes(&avg)?)],
        details,
        assertions: vec![Assertion::new(
            "annihilated",
            max <= EXACT_TOL,
            format!("max |avg X| = {max:e}"),
        )],
    })
}
