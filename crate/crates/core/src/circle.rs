//! Scalar pseudo-representations of the circle acting on itself by `a ↦ kθ + a`.
//!
//! The circle is coordinatized by `ℝ/ℤ`. An arrow is a pair `(θ, a)` with
//! source `a` and target `kθ + a`; a connection is determined by its vertical
//! component `X(θ, a)` and its effect is the scalar `Λ = 1 + kX`.
//!
//! Everything is discretized on the `N × N` torus grid `(l/N, i/N)`. The flows
//! `θ ↦ θ + j/N` and `a ↦ a − kj/N` map grid nodes to grid nodes, so the
//! averaging operator needs no interpolation: on the grid it is exactly the
//! counting-measure average of the finite action groupoid `ℤ/N ⋉ ℤ/N` with
//! `j · i = i + kj`, whose arrow `(l, i)` has id `l·N + i`.

use std::io::{BufRead, Write};
use std::time::Instant;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::psrep::Norms;
use crate::trace::{
    envelope_at, fmt_f64, quadratic_bound, GateSummary, IterationTrace, StopRule, TraceRow,
    Verdict,
};

/// `|Λ|` at or below this counts as non-invertible.
pub const SINGULAR_VALUE: f64 = 1e-12;

/// Tolerance for `f(θ + 1/k) = f(θ)` on samples and for `f(0) = 0`.
pub const PROFILE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircleError {
    #[error("grid resolution must be at least 4, got {0}")]
    GridTooSmall(usize),
    #[error("twist k must be at least 1")]
    ZeroTwist,
    #[error("expected {expected} grid values, got {got}")]
    ValueCount { expected: usize, got: usize },
    #[error("profile has {samples} samples; need N = {n} or a multiple of k·N = {}", .k * .n)]
    Resolution { samples: usize, n: usize, k: usize },
    #[error("profile must vanish at zero, f(0) = {0}")]
    NotZeroAtOrigin(f64),
    #[error("1 + k·f is {value} ≤ 0 at sample {index}")]
    ProfileOutOfRange { index: usize, value: f64 },
    #[error("profile is not 1/k-periodic (max |f(θ + 1/k) − f(θ)| = {defect}), so X is not periodic")]
    NonPeriodicProfile { defect: f64 },
    #[error("Λ is not invertible at grid node (θ index {theta}, a index {a})")]
    NonInvertible { theta: usize, a: usize },
    #[error("Λ(0, a) differs from 1 by {0}")]
    NotUnital(f64),
    #[error("grids differ in resolution or twist")]
    Mismatch,
    #[error("parse error: {0}")]
    Parse(String),
}

/// A doubly 1-periodic function sampled on the `N × N` torus grid.
///
/// `values[l·N + i] ≈ F(l/N, i/N)`; the first index is `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusGridFn {
    n: usize,
    k: usize,
    values: Vec<f64>,
}

fn check_shape(n: usize, k: usize) -> Result<(), CircleError> {
    if n < 4 {
        return Err(CircleError::GridTooSmall(n));
    }
    if k == 0 {
        return Err(CircleError::ZeroTwist);
    }
    Ok(())
}

impl TorusGridFn {
    pub fn new(n: usize, k: usize, values: Vec<f64>) -> Result<Self, CircleError> {
        check_shape(n, k)?;
        if values.len() != n * n {
            return Err(CircleError::ValueCount {
                expected: n * n,
                got: values.len(),
            });
        }
        Ok(Self { n, k, values })
    }

    pub fn from_fn(n: usize, k: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self, CircleError> {
        check_shape(n, k)?;
        let h = 1.0 / n as f64;
        let values = (0..n * n)
            .map(|idx| f((idx / n) as f64 * h, (idx % n) as f64 * h))
            .collect();
        Ok(Self { n, k, values })
    }

    pub fn constant(n: usize, k: usize, value: f64) -> Result<Self, CircleError> {
        Self::new(n, k, vec![value; n * n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at `(l/N, i/N)` with indices taken mod `N`.
    pub fn at(&self, l: i64, i: i64) -> f64 {
        let n = self.n as i64;
        self.values[(l.rem_euclid(n) * n + i.rem_euclid(n)) as usize]
    }

    fn idx(&self, l: usize, i: usize) -> usize {
        (l % self.n) * self.n + i % self.n
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            n: self.n,
            k: self.k,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self, CircleError> {
        if self.n != other.n || self.k != other.k {
            return Err(CircleError::Mismatch);
        }
        Ok(Self {
            n: self.n,
            k: self.k,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// `(1 − t)·self + t·other`.
    pub fn lerp(&self, other: &Self, t: f64) -> Result<Self, CircleError> {
        self.zip_with(other, |a, b| (1.0 - t) * a + t * b)
    }

    /// `max |self − other|`.
    pub fn distance(&self, other: &Self) -> Result<f64, CircleError> {
        Ok(self.zip_with(other, |a, b| a - b)?.max_abs())
    }

    /// `Λ = 1 + kX`.
    pub fn effect(&self) -> Self {
        let k = self.k as f64;
        self.map(|x| 1.0 + k * x)
    }

    /// `X = (Λ − 1)/k`.
    pub fn vertical(&self) -> Self {
        let k = self.k as f64;
        self.map(|l| (l - 1.0) / k)
    }

    /// Writes the header line `N,k` followed by `N` rows of `N` values, row = θ index.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        w.write_record([self.n.to_string(), self.k.to_string()])?;
        for row in self.values.chunks(self.n) {
            w.write_record(row.iter().map(|&v| fmt_f64(v)))?;
        }
        w.flush()
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self, CircleError> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut records = r.records();
        let parse_err = |e: csv::Error| CircleError::Parse(e.to_string());
        let header = records
            .next()
            .ok_or_else(|| CircleError::Parse("empty grid file".into()))?
            .map_err(parse_err)?;
        let int = |s: Option<&str>, what: &str| {
            s.unwrap_or("")
                .parse::<usize>()
                .map_err(|e| CircleError::Parse(format!("header {what}: {e}")))
        };
        if header.len() != 2 {
            return Err(CircleError::Parse("header must be `N,k`".into()));
        }
        let n = int(header.get(0), "N")?;
        let k = int(header.get(1), "k")?;
        let mut values = Vec::with_capacity(n * n);
        for (row, rec) in records.enumerate() {
            let rec = rec.map_err(parse_err)?;
            if rec.len() != n {
                return Err(CircleError::Parse(format!(
                    "row {row} has {} values, expected {n}",
                    rec.len()
                )));
            }
            for s in rec.iter() {
                values.push(
                    s.parse::<f64>()
                        .map_err(|e| CircleError::Parse(format!("row {row}: {e}")))?,
                );
            }
        }
        Self::new(n, k, values)
    }
}

/// Samples `f[j] ≈ f(j/M)` of a real function on the circle, with the twist `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleProfile {
    k: usize,
    samples: Vec<f64>,
}

impl CircleProfile {
    /// Checks `f(0) = 0` and `1 + k·f > 0` at every sample.
    pub fn new(k: usize, samples: Vec<f64>) -> Result<Self, CircleError> {
        if k == 0 {
            return Err(CircleError::ZeroTwist);
        }
        if samples.is_empty() {
            return Err(CircleError::Parse("empty profile".into()));
        }
        if samples[0].abs() > PROFILE_TOL {
            return Err(CircleError::NotZeroAtOrigin(samples[0]));
        }
        if let Some((index, &f)) = samples
            .iter()
            .enumerate()
            .find(|(_, &f)| !(1.0 + k as f64 * f > 0.0))
        {
            return Err(CircleError::ProfileOutOfRange {
                index,
                value: 1.0 + k as f64 * f,
            });
        }
        Ok(Self { k, samples })
    }

    /// Samples a closed form at `j/m`, `j = 0..m`.
    pub fn from_fn(k: usize, m: usize, f: impl Fn(f64) -> f64) -> Result<Self, CircleError> {
        Self::new(k, (0..m).map(|j| f(j as f64 / m as f64)).collect())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `max_j |f[j + M/k] − f[j]|`, or `None` when `k` does not divide `M`.
    pub fn periodicity_defect(&self) -> Option<f64> {
        let m = self.samples.len();
        if !m.is_multiple_of(self.k) {
            return None;
        }
        let shift = m / self.k;
        Some(
            (0..m)
                .map(|j| (self.samples[(j + shift) % m] - self.samples[j]).abs())
                .fold(0.0, f64::max),
        )
    }

    /// Trigonometric interpolation to `factor · M` samples.
    pub fn upsample(&self, factor: usize) -> Vec<f64> {
        trig_upsample(&self.samples, factor)
    }

    /// `(1 − t)·self + t·other`, a straight line in the convex set of profiles.
    pub fn lerp(&self, other: &Self, t: f64) -> Result<Self, CircleError> {
        if self.k != other.k || self.samples.len() != other.samples.len() {
            return Err(CircleError::Mismatch);
        }
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(&a, &b)| (1.0 - t) * a + t * b)
            .collect();
        Self::new(self.k, samples)
    }

    /// One value per line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for &v in &self.samples {
            writeln!(out, "{}", fmt_f64(v))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(k: usize, input: R) -> Result<Self, CircleError> {
        let mut samples = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line.map_err(|e| CircleError::Parse(e.to_string()))?;
            let s = line.trim().trim_end_matches(',');
            if s.is_empty() {
                continue;
            }
            samples.push(
                s.parse::<f64>()
                    .map_err(|e| CircleError::Parse(format!("line {}: {e}", n + 1)))?,
            );
        }
        Self::new(k, samples)
    }
}

/// Trigonometric interpolation of periodic samples onto a grid `factor` times finer.
///
/// For even `M` the Nyquist coefficient is split evenly between the two
/// frequencies `±M/2`, which keeps real data real.
pub fn trig_upsample(samples: &[f64], factor: usize) -> Vec<f64> {
    let m = samples.len();
    if factor <= 1 || m == 0 {
        return samples.to_vec();
    }
    let big = m * factor;
    let mut planner = FftPlanner::<f64>::new();
    let mut spec: Vec<Complex<f64>> = samples.iter().map(|&v| Complex::new(v, 0.0)).collect();
    planner.plan_fft_forward(m).process(&mut spec);

    let mut padded = vec![Complex::new(0.0, 0.0); big];
    let half = m / 2;
    for (q, &c) in spec.iter().enumerate() {
        if m.is_multiple_of(2) && q == half {
            padded[half] += c * 0.5;
            padded[big - half] += c * 0.5;
        } else if q < half || (m % 2 == 1 && q == half) {
            padded[q] = c;
        } else {
            padded[big - (m - q)] = c;
        }
    }
    planner.plan_fft_inverse(big).process(&mut padded);
    padded.iter().map(|c| c.re / m as f64).collect()
}

/// Builds the multiplicative pair `(X, Λ)` from a profile.
///
/// `X(θ, a) = [f(θ + a/k) − f(a/k)] / (1 + k f(a/k))` and `Λ = 1 + kX`.
/// The arguments `θ + a/k` live on the grid of spacing `1/(kN)`: the profile
/// is used directly if it has `kN` samples (or a multiple), and is
/// trigonometrically interpolated if it has `N`.
///
/// The result is periodic in `a` only for a `1/k`-periodic profile, so any
/// other profile is rejected with [`CircleError::NonPeriodicProfile`].
pub fn from_profile(
    profile: &CircleProfile,
    n: usize,
) -> Result<(TorusGridFn, TorusGridFn), CircleError> {
    let k = profile.k;
    check_shape(n, k)?;
    let m = profile.len();
    let fine = k * n;
    let samples: Vec<f64> = if m == fine {
        profile.samples.clone()
    } else if m.is_multiple_of(fine) {
        profile.samples.iter().step_by(m / fine).copied().collect()
    } else if m == n {
        let mut fine = profile.upsample(k);
        // interpolation passes through the nodes; keep them bit-exact
        for (j, &v) in profile.samples.iter().enumerate() {
            fine[k * j] = v;
        }
        fine
    } else {
        return Err(CircleError::Resolution { samples: m, n, k });
    };
    let kf = k as f64;
    if let Some((index, &f)) = samples
        .iter()
        .enumerate()
        .find(|(_, &f)| !(1.0 + kf * f > 0.0))
    {
        return Err(CircleError::ProfileOutOfRange {
            index,
            value: 1.0 + kf * f,
        });
    }
    let scale = samples.iter().fold(1.0f64, |s, v| s.max(v.abs()));
    let defect = (0..fine)
        .map(|j| (samples[(j + n) % fine] - samples[j]).abs())
        .fold(0.0, f64::max);
    if defect > PROFILE_TOL * scale {
        return Err(CircleError::NonPeriodicProfile { defect });
    }

    let mut x = Vec::with_capacity(n * n);
    for l in 0..n {
        for i in 0..n {
            let fa = samples[i];
            x.push((samples[(k * l + i) % fine] - fa) / (1.0 + kf * fa));
        }
    }
    let x = TorusGridFn::new(n, k, x)?;
    let lambda = x.effect();
    Ok((x, lambda))
}

/// Residuals of the cocycle and unit equations.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CocycleResiduals {
    /// `max |Λ(θ'+θ, a) − Λ(θ', kθ+a)·Λ(θ, a)|` over grid triples.
    pub cocycle: f64,
    /// `max_a |Λ(0, a) − 1|`.
    pub unit: f64,
}

pub fn multiplicativity_residual(lambda: &TorusGridFn) -> CocycleResiduals {
    let n = lambda.n;
    let k = lambda.k;
    let mut cocycle = 0.0f64;
    for lp in 0..n {
        for l in 0..n {
            let sum_row = &lambda.values[((lp + l) % n) * n..][..n];
            let first_row = &lambda.values[lp * n..][..n];
            let row = &lambda.values[l * n..][..n];
            let shift = (k * l) % n;
            for i in 0..n {
                let d = sum_row[i] - first_row[(shift + i) % n] * row[i];
                cocycle = cocycle.max(d.abs());
            }
        }
    }
    let unit = lambda.values[..n]
        .iter()
        .map(|v| (v - 1.0).abs())
        .fold(0.0, f64::max);
    CocycleResiduals { cocycle, unit }
}

/// `max |X(θ'+θ, a) − X(θ, a) − X(θ', kθ+a)·(1 + kX(θ, a))|`, the
/// multiplicativity residual written for the vertical component directly.
///
/// For `Λ = 1 + kX` the cocycle residual of `Λ` is exactly `k` times this.
pub fn connection_residual(x: &TorusGridFn) -> f64 {
    let n = x.n as i64;
    let k = x.k as i64;
    let kf = x.k as f64;
    let mut res = 0.0f64;
    for lp in 0..n {
        for l in 0..n {
            for i in 0..n {
                let xv = x.at(l, i);
                let d = x.at(lp + l, i) - xv - x.at(lp, k * l + i) * (1.0 + kf * xv);
                res = res.max(d.abs());
            }
        }
    }
    res
}

/// One averaging step:
/// `avg Λ(θ, a) = (1/N) Σ_j Λ(θ + j/N, a − kj/N) / Λ(j/N, a − kj/N)`.
pub fn average_circle(lambda: &TorusGridFn) -> Result<TorusGridFn, CircleError> {
    let n = lambda.n;
    let k = lambda.k;
    if let Some(pos) = lambda.values.iter().position(|v| v.abs() <= SINGULAR_VALUE) {
        return Err(CircleError::NonInvertible {
            theta: pos / n,
            a: pos % n,
        });
    }
    let inv: Vec<f64> = lambda.values.iter().map(|v| 1.0 / v).collect();
    let nf = n as f64;
    let mut out = Vec::with_capacity(n * n);
    for l in 0..n {
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                // a − kj mod N
                let src = (i + n - (k * j) % n) % n;
                acc += lambda.values[lambda.idx(l + j, src)] * inv[j * n + src];
            }
            out.push(acc / nf);
        }
    }
    TorusGridFn::new(n, k, out)
}

/// The vertical average for the trivial action, where `λ` is the identity:
/// `(1/N) Σ_j [X(φ + j/N, a) − X(j/N, a)]`.
///
/// Both Riemann sums run over the same values, so the result vanishes up to
/// rounding for every `X`.
pub fn group_bundle_average(x: &TorusGridFn) -> TorusGridFn {
    let n = x.n;
    let nf = n as f64;
    let mut out = Vec::with_capacity(n * n);
    for l in 0..n {
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += x.values[x.idx(l + j, i)] - x.values[j * n + i];
            }
            out.push(acc / nf);
        }
    }
    TorusGridFn {
        n,
        k: x.k,
        values: out,
    }
}

/// Discrete analogue of the `C^r` seminorm, `r ≤ 2`.
///
/// `r = 0` is `max |F|`. Higher orders also take the maximum of the central
/// differences `N/2·(F(·+h) − F(·−h))` in each variable, and for `r = 2` the
/// second differences `N²·(F(·+h) − 2F + F(·−h))` and the mixed difference
/// (central in `θ` of central in `a`). With `h = 1/N`, the central difference
/// of `sin 2πθ` is `N sin(2πh) cos 2πθ`.
pub fn discrete_seminorm(f: &TorusGridFn, r: u8) -> f64 {
    seminorm_values(f.n, &f.values, r)
}

fn seminorm_values(n: usize, v: &[f64], r: u8) -> f64 {
    let at = |l: usize, i: usize| v[(l % n) * n + i % n];
    let nf = n as f64;
    let mut m = 0.0f64;
    for l in 0..n {
        for i in 0..n {
            let c = at(l, i);
            m = m.max(c.abs());
            if r >= 1 {
                let dt = 0.5 * nf * (at(l + 1, i) - at(l + n - 1, i));
                let da = 0.5 * nf * (at(l, i + 1) - at(l, i + n - 1));
                m = m.max(dt.abs()).max(da.abs());
            }
            if r >= 2 {
                let dtt = nf * nf * (at(l + 1, i) - 2.0 * c + at(l + n - 1, i));
                let daa = nf * nf * (at(l, i + 1) - 2.0 * c + at(l, i + n - 1));
                let dta = 0.25
                    * nf
                    * nf
                    * (at(l + 1, i + 1) - at(l + 1, i + n - 1) - at(l + n - 1, i + 1)
                        + at(l + n - 1, i + n - 1));
                m = m.max(dtt.abs()).max(daa.abs()).max(dta.abs());
            }
        }
    }
    m
}

/// `[c⁽⁰⁾, c⁽¹⁾, c⁽²⁾]`, where `c⁽ʳ⁾ = max_{θ'} |D_{θ'}|_r` and
/// `D_{θ'}(θ, a) = Λ(θ'+θ, a) − Λ(θ', kθ+a)·Λ(θ, a)`.
///
/// `c⁽⁰⁾` equals the cocycle residual.
pub fn defect_seminorms(lambda: &TorusGridFn) -> [f64; 3] {
    let n = lambda.n;
    let k = lambda.k;
    let mut out = [0.0f64; 3];
    let mut d = vec![0.0; n * n];
    for lp in 0..n {
        for l in 0..n {
            let shift = (k * l) % n;
            for i in 0..n {
                d[l * n + i] = lambda.values[lambda.idx(lp + l, i)]
                    - lambda.values[lp * n + (shift + i) % n] * lambda.values[l * n + i];
            }
        }
        for (r, slot) in out.iter_mut().enumerate() {
            *slot = slot.max(seminorm_values(n, &d, r as u8));
        }
    }
    out
}

/// `f_∞(θ) = X(θ, 0) = (Λ(θ, 0) − 1)/k` on the `N` grid points.
pub fn limit_profile(lambda: &TorusGridFn) -> Result<CircleProfile, CircleError> {
    let k = lambda.k as f64;
    let samples = (0..lambda.n)
        .map(|l| (lambda.values[l * lambda.n] - 1.0) / k)
        .collect();
    CircleProfile::new(lambda.k, samples)
}

/// Repeated [`average_circle`] with the same trace format as the finite driver.
///
/// Row `i` records `b = max |Λ_i|`, `c` = cocycle residual of `Λ_i`, the unit
/// residual, and the defect seminorms `[c⁽⁰⁾, c⁽¹⁾, c⁽²⁾]`.
pub fn iterate_circle(
    lambda: &TorusGridFn,
    stop: StopRule,
) -> Result<IterationTrace<TorusGridFn>, CircleError> {
    let unit = multiplicativity_residual(lambda).unit;
    if unit > PROFILE_TOL {
        return Err(CircleError::NotUnital(unit));
    }
    let start = Instant::now();
    let mut rows: Vec<TraceRow> = Vec::new();
    let mut current = lambda.clone();
    let mut previous: Option<TorusGridFn> = None;
    let mut initial = Vec::new();
    let mut gate = None;

    let verdict = loop {
        let i = rows.len();
        let seminorms = defect_seminorms(&current);
        let norms = Norms {
            b: current.max_abs(),
            c: seminorms[0],
        };
        if i == 0 {
            initial = vec![norms];
            gate = Some(GateSummary::from_norms(true, &initial));
        }
        let gate_ref = gate.as_ref().expect("set at i = 0");
        rows.push(TraceRow {
            iteration: i,
            b: norms.b,
            c: norms.c,
            unit_defect: current.values[..current.n]
                .iter()
                .map(|v| (v - 1.0).abs())
                .fold(0.0, f64::max),
            quadratic_bound_rhs: rows.last().and_then(|r| quadratic_bound(&r.orbit_norms)),
            envelope: gate_ref.passed().then(|| envelope_at(&initial, i)),
            step_distance: previous.as_ref().map(|p| {
                p.distance(&current).expect("same grid")
            }),
            orbit_norms: vec![norms],
            seminorm_defects: seminorms.to_vec(),
            wall_time: start.elapsed().as_secs_f64(),
        });

        if norms.c <= stop.tol_c {
            break Verdict::Converged { iterations: i };
        }
        if i >= stop.max_iter || !norms.b.is_finite() || !norms.c.is_finite() {
            break Verdict::Diverged { iterations: i };
        }
        match average_circle(&current) {
            Ok(next) => previous = Some(std::mem::replace(&mut current, next)),
            Err(CircleError::NonInvertible { theta, a }) => {
                break Verdict::NonInvertibleAt {
                    iteration: i,
                    location: theta * current.n + a,
                }
            }
            Err(e) => return Err(e),
        }
    };

    Ok(IterationTrace {
        rows,
        verdict,
        gate: gate.expect("at least one row"),
        last: current,
    })
}

/// `f(0), f(1/k), …, f(1)`.
///
/// If `X` built from `f` is periodic in `a` but `f(1/k) ≠ 0`, then
/// `f(θ + 1/k) − f(θ) = f(1/k)(1 + k f(θ))` forces these values to be
/// strictly monotone, so `f(1) ≠ 0` and `X` cannot be periodic in `θ`.
pub fn profile_steps(k: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
    (0..=k).map(|j| f(j as f64 / k as f64)).collect()
}

/// Strictly increasing or strictly decreasing.
pub fn is_strictly_monotone(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] > w[0]) || values.windows(2).all(|w| w[1] < w[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine_profile(k: usize, m: usize, amp: f64) -> CircleProfile {
        CircleProfile::from_fn(k, m, |t| amp * (2.0 * PI * k as f64 * t).sin()).unwrap()
    }

    #[test]
    fn zero_profile_gives_trivial_effect() {
        let p = CircleProfile::new(2, vec![0.0; 16]).unwrap();
        let (x, l) = from_profile(&p, 16).unwrap();
        assert_eq!(x.max_abs(), 0.0);
        assert!(l.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn periodic_profile_is_multiplicative() {
        let (_, l) = from_profile(&sine_profile(2, 64, 0.1), 32).unwrap();
        let res = multiplicativity_residual(&l);
        assert!(res.cocycle <= 1e-13, "{res:?}");
        assert!(res.unit <= 1e-13);
    }

    #[test]
    fn upsampled_profile_matches_closed_form() {
        let coarse = sine_profile(2, 32, 0.1);
        let fine = sine_profile(2, 64, 0.1);
        let (x1, _) = from_profile(&coarse, 32).unwrap();
        let (x2, _) = from_profile(&fine, 32).unwrap();
        assert!(x1.distance(&x2).unwrap() < 1e-14);
    }

    #[test]
    fn non_periodic_profile_is_rejected() {
        let p = CircleProfile::from_fn(2, 64, |t| 0.1 * (2.0 * PI * t).sin()).unwrap();
        match from_profile(&p, 32) {
            Err(CircleError::NonPeriodicProfile { defect }) => assert!((defect - 0.2).abs() < 1e-3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn vanishing_effect_is_not_invertible() {
        let x = TorusGridFn::constant(8, 2, -0.5).unwrap();
        let l = x.effect();
        assert!(l.values().iter().all(|&v| v == 0.0));
        assert_eq!(
            average_circle(&l),
            Err(CircleError::NonInvertible { theta: 0, a: 0 })
        );
        // the constant solves the cocycle equation but not the unit equation
        let res = multiplicativity_residual(&l);
        assert_eq!(res.cocycle, 0.0);
        assert_eq!(res.unit, 1.0);
    }

    #[test]
    fn average_fixes_multiplicative_effects() {
        let (_, l) = from_profile(&sine_profile(3, 48, 0.08), 16).unwrap();
        let avg = average_circle(&l).unwrap();
        assert!(avg.distance(&l).unwrap() <= 1e-13);
    }

    #[test]
    fn average_is_unital_exactly() {
        let l = TorusGridFn::from_fn(16, 2, |t, a| {
            1.0 + 0.05 * (2.0 * PI * t).sin() * (2.0 * PI * a).cos() + 0.02 * (2.0 * PI * a).sin()
        })
        .unwrap();
        let avg = average_circle(&l).unwrap();
        assert!(avg.values()[..16].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn residual_matches_brute_force() {
        let l = TorusGridFn::from_fn(8, 2, |t, a| {
            1.0 + 0.01 * (2.0 * PI * t).sin() * (2.0 * PI * a).sin()
        })
        .unwrap();
        let mut brute = 0.0f64;
        for lp in 0..8i64 {
            for lt in 0..8i64 {
                for i in 0..8i64 {
                    let d = l.at(lp + lt, i) - l.at(lp, 2 * lt + i) * l.at(lt, i);
                    brute = brute.max(d.abs());
                }
            }
        }
        assert!(brute > 0.0);
        assert_eq!(multiplicativity_residual(&l).cocycle, brute);
        assert_eq!(defect_seminorms(&l)[0], brute);
    }

    #[test]
    fn connection_residual_scales_by_k() {
        let l = TorusGridFn::from_fn(8, 3, |t, a| {
            1.0 + 0.02 * (2.0 * PI * t).sin() * (2.0 * PI * a).sin()
        })
        .unwrap();
        let x = l.vertical();
        let lhs = multiplicativity_residual(&l).cocycle;
        assert!((lhs - 3.0 * connection_residual(&x)).abs() <= 1e-13);
    }

    #[test]
    fn seminorm_of_sine() {
        let n = 64;
        let f = TorusGridFn::from_fn(n, 1, |t, _| (2.0 * PI * t).sin()).unwrap();
        assert_eq!(discrete_seminorm(&f, 0), 1.0);
        let expected = n as f64 * (2.0 * PI / n as f64).sin();
        assert!((discrete_seminorm(&f, 1) - expected).abs() < 1e-12);
        let c = TorusGridFn::constant(8, 1, 3.0).unwrap();
        assert_eq!(discrete_seminorm(&c, 1), 3.0);
        assert_eq!(discrete_seminorm(&c, 2), 3.0);
    }

    #[test]
    fn group_bundle_average_vanishes() {
        let x = TorusGridFn::from_fn(64, 1, |p, a| (2.0 * PI * p).sin() * (2.0 * PI * a).cos()).unwrap();
        assert!(group_bundle_average(&x).max_abs() <= 1e-14);
    }

    #[test]
    fn limit_profile_round_trip() {
        let p = sine_profile(2, 32, 0.1);
        let (x, l) = from_profile(&p, 32).unwrap();
        let f = limit_profile(&l).unwrap();
        for (a, b) in f.samples().iter().zip(p.samples()) {
            assert!((a - b).abs() < 1e-15);
        }
        for l_idx in 0..32 {
            assert_eq!(x.values()[l_idx * 32], p.samples()[l_idx]);
        }
    }

    #[test]
    fn iterate_multiplicative_converges_at_zero() {
        let (_, l) = from_profile(&sine_profile(2, 32, 0.1), 16).unwrap();
        let trace = iterate_circle(&l, StopRule::default()).unwrap();
        assert_eq!(trace.verdict, Verdict::Converged { iterations: 0 });
    }

    #[test]
    fn iterate_rejects_non_unital() {
        let l = TorusGridFn::constant(8, 1, 2.0).unwrap();
        assert!(matches!(iterate_circle(&l, StopRule::default()), Err(CircleError::NotUnital(_))));
    }

    #[test]
    fn monotone_obstruction() {
        let k = 3;
        let alpha = 0.7;
        let f = |t: f64| ((alpha * t).exp() - 1.0) / k as f64;
        // the shift identity holds for this profile
        for j in 0..20 {
            let t = j as f64 / 7.0;
            let lhs = f(t + 1.0 / k as f64) - f(t);
            let rhs = f(1.0 / k as f64) * (1.0 + k as f64 * f(t));
            assert!((lhs - rhs).abs() < 1e-14);
        }
        let steps = profile_steps(k, f);
        assert!(is_strictly_monotone(&steps));
        assert!(steps[k] > 0.0);
        assert!(!is_strictly_monotone(&[0.0, 0.0, 0.0]));
    }

    #[test]
    fn grid_csv_round_trip() {
        let l = TorusGridFn::from_fn(4, 2, |t, a| 1.0 + t * 0.1 - a / 3.0).unwrap();
        let mut buf = Vec::new();
        l.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"4,2\n"));
        assert_eq!(TorusGridFn::read_csv(&buf[..]).unwrap(), l);
        let p = sine_profile(2, 8, 0.1);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(CircleProfile::read_csv(2, &buf[..]).unwrap(), p);
        assert!(TorusGridFn::read_csv("4,2\n1,2,3\n".as_bytes()).is_err());
    }

    #[test]
    fn profile_validation() {
        assert!(matches!(
            CircleProfile::new(2, vec![0.1, 0.0]),
            Err(CircleError::NotZeroAtOrigin(_))
        ));
        assert!(matches!(
            CircleProfile::new(2, vec![0.0, -0.5]),
            Err(CircleError::ProfileOutOfRange { index: 1, .. })
        ));
    }
}
