//! Iteration traces shared by the finite-groupoid and circle drivers.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::psrep::{gate_holds, Norms};

/// Header of the trace CSV.
pub const TRACE_HEADER: [&str; 6] = ["i", "b", "c", "unit_defect", "quadratic_bound_rhs", "envelope"];

/// When to stop iterating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub tol_c: f64,
    pub max_iter: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            tol_c: 1e-12,
            max_iter: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub b: f64,
    pub c: f64,
    pub unit_defect: f64,
    /// `max_O 2 c_O² (b_O / (1 − c_O))²` of the previous row, the one-step
    /// bound on this row's `c`.
    pub quadratic_bound_rhs: Option<f64>,
    /// `max_O ε_O^{2^i} / (6 b_{0,O}²)` with `ε_O = 6 b_{0,O}² c_{0,O}`, present when
    /// the initial iterate satisfies the near-multiplicativity gate on every orbit.
    pub envelope: Option<f64>,
    /// Largest distance `‖λ_i(g) − λ_{i−1}(g)‖` to the previous iterate.
    pub step_distance: Option<f64>,
    /// `b` and `c` per invariant set.
    pub orbit_norms: Vec<Norms>,
    /// Extra defect measurements, e.g. discrete `C^r` seminorms for `r = 0, 1, 2`.
    pub seminorm_defects: Vec<f64>,
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    /// The last row has `c ≤ tol_c`.
    Converged { iterations: usize },
    /// `max_iter` reached, or values stopped being finite.
    Diverged { iterations: usize },
    /// Averaging the iterate `iteration` hit a non-invertible value at `location`
    /// (an arrow id, or a grid node index for circle grids).
    NonInvertibleAt { iteration: usize, location: usize },
}

/// Near-multiplicativity of the starting point.
///
/// The gate is sufficient for convergence, not necessary: iteration proceeds
/// either way, and a failure is only recorded here.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateSummary {
    pub unital: bool,
    pub failed_orbit: Option<usize>,
    /// `ε_O = 6 b_{0,O}² c_{0,O}` per orbit.
    pub epsilon: Vec<f64>,
}

impl GateSummary {
    pub fn from_norms(unital: bool, norms: &[Norms]) -> Self {
        let failed_orbit = norms.iter().position(|n| !gate_holds(*n));
        Self {
            unital,
            failed_orbit,
            epsilon: norms.iter().map(|n| 6.0 * n.b * n.b * n.c).collect(),
        }
    }

    pub fn passed(&self) -> bool {
        self.unital && self.failed_orbit.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct IterationTrace<T> {
    pub rows: Vec<TraceRow>,
    pub verdict: Verdict,
    pub gate: GateSummary,
    /// The last iterate that was computed.
    pub last: T,
}

impl<T> IterationTrace<T> {
    pub fn converged(&self) -> bool {
        matches!(self.verdict, Verdict::Converged { .. })
    }

    pub fn b_sequence(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.b).collect()
    }

    pub fn c_sequence(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.c).collect()
    }

    /// Writes the trace CSV.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let rows: Vec<TraceRecord> = self.rows.iter().map(TraceRecord::from).collect();
        write_trace_csv(out, &rows)
    }
}

/// `max_O ε_O^{2^i} / (6 b_{0,O}²)`, the fast-convergence envelope at step `i`.
pub fn envelope_at(initial: &[Norms], i: usize) -> f64 {
    initial
        .iter()
        .map(|n| {
            let mut e = 6.0 * n.b * n.b * n.c;
            for _ in 0..i {
                e *= e;
            }
            e / (6.0 * n.b * n.b)
        })
        .fold(0.0, f64::max)
}

/// `max_O 2 c_O² (b_O / (1 − c_O))²`, or `None` if some orbit has `c ≥ 1`.
pub fn quadratic_bound(norms: &[Norms]) -> Option<f64> {
    norms.iter().try_fold(0.0f64, |acc, n| {
        (n.c < 1.0).then(|| {
            let r = n.b / (1.0 - n.c);
            acc.max(2.0 * n.c * n.c * r * r)
        })
    })
}

/// One line of the trace CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub i: usize,
    pub b: f64,
    pub c: f64,
    pub unit_defect: f64,
    pub quadratic_bound_rhs: Option<f64>,
    pub envelope: Option<f64>,
}

impl From<&TraceRow> for TraceRecord {
    fn from(r: &TraceRow) -> Self {
        Self {
            i: r.iteration,
            b: r.b,
            c: r.c,
            unit_defect: r.unit_defect,
            quadratic_bound_rhs: r.quadratic_bound_rhs,
            envelope: r.envelope,
        }
    }
}

/// Shortest representation that round-trips through `f64` parsing.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_trace_csv<W: Write>(out: W, rows: &[TraceRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in rows {
        w.write_record([
            r.i.to_string(),
            fmt_f64(r.b),
            fmt_f64(r.c),
            fmt_f64(r.unit_defect),
            fmt_opt(r.quadratic_bound_rhs),
            fmt_opt(r.envelope),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum TraceParseError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("unexpected header {0:?}")]
    Header(Vec<String>),
    #[error("line {line}: {message}")]
    Field { line: usize, message: String },
}

/// Reads a trace CSV, e.g. one written by [`IterationTrace::write_csv`] or edited by hand.
pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<TraceRecord>, TraceParseError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != TRACE_HEADER {
        return Err(TraceParseError::Header(header));
    }
    let mut rows = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = n + 2;
        let field = |j: usize| -> Result<Option<f64>, TraceParseError> {
            let s = rec.get(j).unwrap_or("");
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<f64>().map(Some).map_err(|e| TraceParseError::Field {
                line,
                message: format!("column {}: {e}", TRACE_HEADER[j]),
            })
        };
        let required = |j: usize| {
            field(j)?.ok_or_else(|| TraceParseError::Field {
                line,
                message: format!("column {} is empty", TRACE_HEADER[j]),
            })
        };
        let i = rec
            .get(0)
            .unwrap_or("")
            .parse::<usize>()
            .map_err(|e| TraceParseError::Field {
                line,
                message: format!("column i: {e}"),
            })?;
        rows.push(TraceRecord {
            i,
            b: required(1)?,
            c: required(2)?,
            unit_defect: required(3)?,
            quadratic_bound_rhs: field(4)?,
            envelope: field(5)?,
        });
    }
    Ok(rows)
}
