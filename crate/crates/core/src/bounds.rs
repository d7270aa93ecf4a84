//! Scalar oracles for the recursive inequalities behind fast convergence.
//!
//! Nothing here knows about groupoids. The functions take sequences of
//! numbers, typically columns of an iteration trace, and check them against
//! the two sequence lemmas: the squaring lemma for `(b_i, c_i)` driven by the
//! one-step estimates, and the bootstrapping lemma that transfers squaring
//! decay from one sequence of defects to another.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

/// Extra room granted to every inequality: `observed ≤ bound + rel·|bound| + abs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Slack {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Slack {
    fn default() -> Self {
        Self { rel: 1e-12, abs: 0.0 }
    }
}

impl Slack {
    fn allows(&self, observed: f64, bound: f64) -> bool {
        observed <= bound + self.rel * bound.abs() + self.abs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Hypothesis,
    Conclusion,
}

/// One inequality `observed ≤ bound` at one index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub index: usize,
    pub kind: CheckKind,
    pub name: &'static str,
    pub bound: f64,
    pub observed: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundSeqReport {
    pub hypothesis_ok: bool,
    pub checks: Vec<BoundCheck>,
    /// Smallest index with a failing check of either kind.
    pub first_failure: Option<usize>,
    /// For the bootstrapping lemma: the smallest `I' ≥ I` with
    /// `c'_{i'} ≤ ε^{2^{i'−I'}}` for every recorded `i' ≥ I'`.
    pub decay_start: Option<usize>,
}

impl BoundSeqReport {
    /// Hypotheses hold and every conclusion holds.
    pub fn pass(&self) -> bool {
        self.hypothesis_ok && self.checks.iter().all(|c| c.pass)
    }

    /// Conclusions hold wherever they were checked; hypothesis failures are ignored.
    pub fn conclusions_pass(&self) -> bool {
        self.checks
            .iter()
            .filter(|c| c.kind == CheckKind::Conclusion)
            .all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &BoundCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// One row per check: `index,kind,check,bound,observed,pass`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "kind", "check", "bound", "observed", "pass"])?;
        for c in &self.checks {
            let kind = match c.kind {
                CheckKind::Hypothesis => "hypothesis",
                CheckKind::Conclusion => "conclusion",
            };
            w.write_record([
                c.index.to_string(),
                kind.to_string(),
                c.name.to_string(),
                crate::trace::fmt_f64(c.bound),
                crate::trace::fmt_f64(c.observed),
                c.pass.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    fn finish(mut checks: Vec<BoundCheck>, decay_start: Option<usize>) -> Self {
        checks.sort_by_key(|c| c.index);
        let hypothesis_ok = checks
            .iter()
            .all(|c| c.pass || c.kind != CheckKind::Hypothesis);
        let first_failure = checks.iter().find(|c| !c.pass).map(|c| c.index);
        Self {
            hypothesis_ok,
            checks,
            first_failure,
            decay_start,
        }
    }
}

struct Recorder {
    slack: Slack,
    checks: Vec<BoundCheck>,
}

impl Recorder {
    fn push(&mut self, index: usize, kind: CheckKind, name: &'static str, observed: f64, bound: f64) -> bool {
        let pass = self.slack.allows(observed, bound);
        self.checks.push(BoundCheck {
            index,
            kind,
            name,
            bound,
            observed,
            pass,
        });
        pass
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("sequences have lengths {0:?}; they must be equal")]
    LengthMismatch(Vec<usize>),
    #[error("need b0 ≥ 1 and 6·b0²·c0 ≤ 2/3, got b0 = {b0}, c0 = {c0}")]
    GateViolation { b0: f64, c0: f64 },
}

/// `ε^{2^n}` by repeated squaring; underflows to zero harmlessly.
pub fn squared_power(eps: f64, n: usize) -> f64 {
    let mut e = eps;
    for _ in 0..n {
        e *= e;
        if e == 0.0 {
            break;
        }
    }
    e
}

/// [`check_lemma_12_8_with`] at the default slack.
pub fn check_lemma_12_8(b: &[f64], c: &[f64]) -> BoundSeqReport {
    check_lemma_12_8_with(b, c, Slack::default())
}

/// Squaring lemma for `(b_i, c_i)`.
///
/// Hypotheses: `b_0 ≥ 1`, `ε = 6 b_0² c_0 ≤ 2/3` (both at index 0), and for
/// every `i` with `c_i < 1` the one-step estimates
/// `b_{i+1} ≤ b_i/(1−c_i)` and `c_{i+1} ≤ 2 c_i² (b_i/(1−c_i))²` (at index `i+1`).
///
/// Conclusions, checked only when the index-0 hypotheses hold:
/// `c_i ≤ ε^{2^i}/(6 b_0²)` and `b_i/(1−c_i) ≤ √3 b_0` for every `i`.
///
/// Sequences shorter than two terms or of unequal length are reported as a
/// hypothesis failure at index 0.
pub fn check_lemma_12_8_with(b: &[f64], c: &[f64], slack: Slack) -> BoundSeqReport {
    let mut rec = Recorder {
        slack,
        checks: Vec::new(),
    };
    if b.len() != c.len() || b.is_empty() {
        rec.checks.push(BoundCheck {
            index: 0,
            kind: CheckKind::Hypothesis,
            name: "equal_nonempty_lengths",
            bound: c.len() as f64,
            observed: b.len() as f64,
            pass: false,
        });
        return BoundSeqReport::finish(rec.checks, None);
    }

    let (b0, c0) = (b[0], c[0]);
    let eps = 6.0 * b0 * b0 * c0;
    // b0 ≥ 1 written as 1 ≤ b0
    let start_ok = rec.push(0, CheckKind::Hypothesis, "b0_at_least_one", 1.0, b0)
        & rec.push(0, CheckKind::Hypothesis, "epsilon_at_most_two_thirds", eps, 2.0 / 3.0);

    for i in 0..b.len() - 1 {
        if c[i] < 1.0 {
            let r = b[i] / (1.0 - c[i]);
            rec.push(i + 1, CheckKind::Hypothesis, "b_step", b[i + 1], r);
            rec.push(i + 1, CheckKind::Hypothesis, "c_step", c[i + 1], 2.0 * c[i] * c[i] * r * r);
        }
    }

    if start_ok {
        for i in 0..b.len() {
            rec.push(
                i,
                CheckKind::Conclusion,
                "c_envelope",
                c[i],
                squared_power(eps, i) / (6.0 * b0 * b0),
            );
            let ratio = if c[i] < 1.0 {
                b[i] / (1.0 - c[i])
            } else {
                f64::INFINITY
            };
            rec.push(i, CheckKind::Conclusion, "b_ratio", ratio, 3f64.sqrt() * b0);
        }
    }
    BoundSeqReport::finish(rec.checks, None)
}

/// Constants of the bootstrapping lemma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootstrapParams {
    pub l: f64,
    pub r: f64,
    pub epsilon: f64,
    /// Index from which `c_i ≤ ε^{2^{i−I}}`.
    pub start: usize,
}

impl BootstrapParams {
    /// `K = RL + L + R`.
    pub fn k(&self) -> f64 {
        self.r * self.l + self.l + self.r
    }
}

/// [`check_lemma_14_4_with`] at the default slack.
pub fn check_lemma_14_4(
    c: &[f64],
    b_prime: &[f64],
    c_prime: &[f64],
    params: BootstrapParams,
) -> BoundSeqReport {
    check_lemma_14_4_with(c, b_prime, c_prime, params, Slack::default())
}

/// Bootstrapping lemma for `(c_i, b'_i, c'_i)`.
///
/// Hypotheses, at index `i+1` unless noted:
/// `b'_{i+1} ≤ b'_i + L a'_i`, `c'_{i+1} ≤ L a'_i c_i`, `c_{i+1} ≤ R c_i²`
/// where `a'_i = b'_i c_i + c'_i`; at index `i`: `c_i ≤ c'_i`, and
/// `c_i ≤ ε^{2^{i−I}}` for `i ≥ I`.
///
/// Conclusions, with `A = a'_I` and `K = RL + L + R`:
/// - `a'_{i+1} ≤ K a'_i c_i` for `i ≥ I`;
/// - `b'_i ≤ b'_I + L ε⁻¹ A Σ_{n < i−I} Kⁿ ε^{2ⁿ}` for `i ≥ I`;
/// - `c'_{i+1} ≤ L (b'_i + 1) (c'_i)²` for every `i`;
/// - `c'_{i+1} ≤ L ε⁻¹ A K^{i−I} ε^{2^{i−I}} · ε^{2^{i−I}}` for `i ≥ I`.
///
/// The report also carries the smallest `I' ≥ I` after which `c'` decays at
/// the squaring rate `ε^{2^{i'−I'}}` over the recorded indices.
pub fn check_lemma_14_4_with(
    c: &[f64],
    b_prime: &[f64],
    c_prime: &[f64],
    params: BootstrapParams,
    slack: Slack,
) -> BoundSeqReport {
    let mut rec = Recorder {
        slack,
        checks: Vec::new(),
    };
    let n = c.len();
    let params_ok = b_prime.len() == n
        && c_prime.len() == n
        && params.l > 0.0
        && params.r > 0.0
        && params.epsilon > 0.0
        && params.epsilon < 1.0;
    if !params_ok {
        rec.checks.push(BoundCheck {
            index: 0,
            kind: CheckKind::Hypothesis,
            name: "lengths_and_constants",
            bound: f64::NAN,
            observed: f64::NAN,
            pass: false,
        });
        return BoundSeqReport::finish(rec.checks, None);
    }
    let BootstrapParams {
        l,
        r,
        epsilon: eps,
        start,
    } = params;
    let k = params.k();
    let a: Vec<f64> = (0..n).map(|i| b_prime[i] * c[i] + c_prime[i]).collect();

    for i in 0..n {
        rec.push(i, CheckKind::Hypothesis, "c_below_c_prime", c[i], c_prime[i]);
        if i >= start {
            rec.push(i, CheckKind::Hypothesis, "c_squaring_decay", c[i], squared_power(eps, i - start));
        }
        if i + 1 < n {
            rec.push(i + 1, CheckKind::Hypothesis, "b_prime_step", b_prime[i + 1], b_prime[i] + l * a[i]);
            rec.push(i + 1, CheckKind::Hypothesis, "c_prime_step", c_prime[i + 1], l * a[i] * c[i]);
            rec.push(i + 1, CheckKind::Hypothesis, "c_step", c[i + 1], r * c[i] * c[i]);
        }
    }

    if start < n {
        let a_start = a[start];
        let mut series = 0.0;
        for i in start..n {
            let j = i - start;
            rec.push(
                i,
                CheckKind::Conclusion,
                "b_prime_bounded",
                b_prime[i],
                b_prime[start] + l / eps * a_start * series,
            );
            series += k.powi(j as i32) * squared_power(eps, j);
            if i + 1 < n {
                rec.push(i + 1, CheckKind::Conclusion, "a_prime_contraction", a[i + 1], k * a[i] * c[i]);
                let e = squared_power(eps, j);
                rec.push(
                    i + 1,
                    CheckKind::Conclusion,
                    "c_prime_envelope",
                    c_prime[i + 1],
                    l / eps * a_start * k.powi(j as i32) * e * e,
                );
            }
        }
    }
    for i in 0..n.saturating_sub(1) {
        rec.push(
            i + 1,
            CheckKind::Conclusion,
            "c_prime_quadratic",
            c_prime[i + 1],
            l * (b_prime[i] + 1.0) * c_prime[i] * c_prime[i],
        );
    }

    let decay_start = (start..n).find(|&i0| {
        (i0..n).all(|i| slack.allows(c_prime[i], squared_power(eps, i - i0)))
    });
    BoundSeqReport::finish(rec.checks, decay_start)
}

/// The sequences obtained by equality in the one-step estimates:
/// `b_{i+1} = b_i/(1−c_i)`, `c_{i+1} = 2 c_i² (b_i/(1−c_i))²`, `n` terms each.
pub fn envelope(b0: f64, c0: f64, n: usize) -> Result<(Vec<f64>, Vec<f64>), BoundsError> {
    if !(b0 >= 1.0 && c0 >= 0.0 && 6.0 * b0 * b0 * c0 <= 2.0 / 3.0) {
        return Err(BoundsError::GateViolation { b0, c0 });
    }
    let mut b = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    let (mut bi, mut ci) = (b0, c0);
    for _ in 0..n {
        b.push(bi);
        c.push(ci);
        let r = bi / (1.0 - ci);
        (bi, ci) = (r, 2.0 * ci * ci * r * r);
    }
    Ok((b, c))
}

/// `1 / ∏ (1 − c_i)`.
pub fn inverse_product(c: &[f64]) -> f64 {
    1.0 / c.iter().map(|ci| 1.0 - ci).product::<f64>()
}
