//! JSON descriptions of groupoids, Haar weights, fiber bundles and
//! pseudo-representations.
//!
//! Objects and arrows are referred to by label everywhere:
//!
//! ```json
//! {
//!   "objects": ["x", "y"],
//!   "arrows": [{"id": "1x", "src": "x", "tgt": "x"}, ...],
//!   "compose": [["g'", "g", "g'g"], ...],
//!   "units": {"x": "1x", ...},
//!   "inverses": {"g": "g^-1", ...}
//! }
//! ```
//!
//! Weights are `{"weights": {"arrow": w}}`, bundles are
//! `{"fibers": {"x": {"dim": 2, "gram": [[1, 0], [0, 1]]}}}` with the Gram
//! matrix optional, and pseudo-representations are
//! `{"maps": {"arrow": {"shape": [rows, cols], "data": [row-major]}}}`.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::groupoid::{Arrow, FiniteGroupoid, GroupoidError, GroupoidTables};
use crate::haar::{HaarError, HaarSystem};
use crate::psrep::{FiberBundle, PseudoRep, PsrepError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error("unknown object {0:?}")]
    UnknownObject(String),
    #[error("unknown arrow {0:?}")]
    UnknownArrow(String),
    #[error("no entry for {0:?}")]
    Missing(String),
    #[error("matrix for {label:?} has shape {shape:?} but {len} entries")]
    MatrixData {
        label: String,
        shape: [usize; 2],
        len: usize,
    },
    #[error(transparent)]
    Groupoid(#[from] GroupoidError),
    #[error(transparent)]
    Haar(#[from] HaarError),
    #[error(transparent)]
    Psrep(#[from] PsrepError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArrowJson {
    pub id: String,
    pub src: String,
    pub tgt: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupoidJson {
    pub objects: Vec<String>,
    pub arrows: Vec<ArrowJson>,
    pub compose: Vec<[String; 3]>,
    pub units: BTreeMap<String, String>,
    pub inverses: BTreeMap<String, String>,
}

fn index(labels: &[String]) -> Result<HashMap<&str, usize>, IoError> {
    let mut map = HashMap::with_capacity(labels.len());
    for (i, l) in labels.iter().enumerate() {
        if map.insert(l.as_str(), i).is_some() {
            return Err(IoError::DuplicateLabel(l.clone()));
        }
    }
    Ok(map)
}

impl GroupoidJson {
    pub fn from_groupoid(g: &FiniteGroupoid) -> Self {
        let t = g.tables();
        let arrow = |a: usize| t.arrow_labels[a].clone();
        let object = |x: usize| t.object_labels[x].clone();
        Self {
            objects: t.object_labels.clone(),
            arrows: t
                .arrows
                .iter()
                .enumerate()
                .map(|(a, ar)| ArrowJson {
                    id: arrow(a),
                    src: object(ar.src),
                    tgt: object(ar.tgt),
                })
                .collect(),
            compose: t
                .compose
                .iter()
                .map(|&(l, r, c)| [arrow(l), arrow(r), arrow(c)])
                .collect(),
            units: t
                .units
                .iter()
                .enumerate()
                .map(|(x, &u)| (object(x), arrow(u)))
                .collect(),
            inverses: t
                .inverses
                .iter()
                .enumerate()
                .map(|(a, &i)| (arrow(a), arrow(i)))
                .collect(),
        }
    }

    /// Resolves labels and builds the groupoid. Axioms are not checked here;
    /// see [`FiniteGroupoid::validate`].
    pub fn to_groupoid(&self) -> Result<FiniteGroupoid, IoError> {
        let arrow_labels: Vec<String> = self.arrows.iter().map(|a| a.id.clone()).collect();
        let objects = index(&self.objects)?;
        let arrows = index(&arrow_labels)?;
        let obj = |l: &str| {
            objects
                .get(l)
                .copied()
                .ok_or_else(|| IoError::UnknownObject(l.to_string()))
        };
        let arr = |l: &str| {
            arrows
                .get(l)
                .copied()
                .ok_or_else(|| IoError::UnknownArrow(l.to_string()))
        };
        let table_arrows = self
            .arrows
            .iter()
            .map(|a| {
                Ok(Arrow {
                    src: obj(&a.src)?,
                    tgt: obj(&a.tgt)?,
                })
            })
            .collect::<Result<Vec<_>, IoError>>()?;
        let compose = self
            .compose
            .iter()
            .map(|[l, r, c]| Ok((arr(l)?, arr(r)?, arr(c)?)))
            .collect::<Result<Vec<_>, IoError>>()?;
        for l in self.units.keys() {
            obj(l)?;
        }
        for l in self.inverses.keys() {
            arr(l)?;
        }
        let units = self
            .objects
            .iter()
            .map(|x| arr(self.units.get(x).ok_or_else(|| IoError::Missing(x.clone()))?))
            .collect::<Result<Vec<_>, IoError>>()?;
        let inverses = arrow_labels
            .iter()
            .map(|a| arr(self.inverses.get(a).ok_or_else(|| IoError::Missing(a.clone()))?))
            .collect::<Result<Vec<_>, IoError>>()?;
        Ok(FiniteGroupoid::from_tables(GroupoidTables {
            object_labels: self.objects.clone(),
            arrow_labels,
            arrows: table_arrows,
            compose,
            units,
            inverses,
        })?)
    }
}

pub fn groupoid_from_json(text: &str) -> Result<FiniteGroupoid, IoError> {
    serde_json::from_str::<GroupoidJson>(text)?.to_groupoid()
}

pub fn groupoid_to_json(g: &FiniteGroupoid) -> String {
    serde_json::to_string_pretty(&GroupoidJson::from_groupoid(g)).expect("plain data serializes")
}

fn arrow_lookup(g: &FiniteGroupoid) -> HashMap<&str, usize> {
    (0..g.num_arrows()).map(|a| (g.arrow_label(a), a)).collect()
}

fn object_lookup(g: &FiniteGroupoid) -> HashMap<&str, usize> {
    (0..g.num_objects()).map(|x| (g.object_label(x), x)).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HaarJson {
    pub weights: BTreeMap<String, f64>,
}

/// Reads weights for every arrow of `groupoid`.
pub fn haar_from_json(groupoid: Arc<FiniteGroupoid>, text: &str) -> Result<HaarSystem, IoError> {
    let parsed: HaarJson = serde_json::from_str(text)?;
    let lookup = arrow_lookup(&groupoid);
    let mut weights = vec![None; groupoid.num_arrows()];
    for (label, &w) in &parsed.weights {
        let a = *lookup
            .get(label.as_str())
            .ok_or_else(|| IoError::UnknownArrow(label.clone()))?;
        weights[a] = Some(w);
    }
    let weights = weights
        .into_iter()
        .enumerate()
        .map(|(a, w)| w.ok_or_else(|| IoError::Missing(groupoid.arrow_label(a).to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(HaarSystem::from_weights(groupoid, weights)?)
}

pub fn haar_to_json(haar: &HaarSystem) -> String {
    let g = haar.groupoid();
    let weights = (0..g.num_arrows())
        .map(|a| (g.arrow_label(a).to_string(), haar.weight(a)))
        .collect();
    serde_json::to_string_pretty(&HaarJson { weights }).expect("plain data serializes")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiberJson {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gram: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundleJson {
    pub fibers: BTreeMap<String, FiberJson>,
}

fn rows_to_matrix(label: &str, rows: &[Vec<f64>], dim: usize) -> Result<DMatrix<f64>, IoError> {
    let len = rows.iter().map(Vec::len).sum();
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(IoError::MatrixData {
            label: label.to_string(),
            shape: [dim, dim],
            len,
        });
    }
    Ok(DMatrix::from_fn(dim, dim, |r, c| rows[r][c]))
}

pub fn bundle_from_json(groupoid: &FiniteGroupoid, text: &str) -> Result<FiberBundle, IoError> {
    let parsed: BundleJson = serde_json::from_str(text)?;
    let lookup = object_lookup(groupoid);
    let mut grams = vec![None; groupoid.num_objects()];
    for (label, fiber) in &parsed.fibers {
        let x = *lookup
            .get(label.as_str())
            .ok_or_else(|| IoError::UnknownObject(label.clone()))?;
        grams[x] = Some(match &fiber.gram {
            Some(rows) => rows_to_matrix(label, rows, fiber.dim)?,
            None => DMatrix::identity(fiber.dim, fiber.dim),
        });
    }
    let grams = grams
        .into_iter()
        .enumerate()
        .map(|(x, g)| g.ok_or_else(|| IoError::Missing(groupoid.object_label(x).to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FiberBundle::with_metrics(grams)?)
}

pub fn bundle_to_json(groupoid: &FiniteGroupoid, bundle: &FiberBundle) -> String {
    let fibers = (0..groupoid.num_objects())
        .map(|x| {
            let m = bundle.metric(x);
            let gram = (!m.is_identity()).then(|| {
                let g = m.gram();
                (0..g.nrows())
                    .map(|r| (0..g.ncols()).map(|c| g[(r, c)]).collect())
                    .collect()
            });
            (
                groupoid.object_label(x).to_string(),
                FiberJson {
                    dim: bundle.dim(x),
                    gram,
                },
            )
        })
        .collect();
    serde_json::to_string_pretty(&BundleJson { fibers }).expect("plain data serializes")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

impl MatrixJson {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        Self {
            shape: [m.nrows(), m.ncols()],
            data: (0..m.nrows())
                .flat_map(|r| (0..m.ncols()).map(move |c| m[(r, c)]))
                .collect(),
        }
    }

    pub fn to_matrix(&self, label: &str) -> Result<DMatrix<f64>, IoError> {
        let [r, c] = self.shape;
        if self.data.len() != r * c {
            return Err(IoError::MatrixData {
                label: label.to_string(),
                shape: self.shape,
                len: self.data.len(),
            });
        }
        Ok(DMatrix::from_row_slice(r, c, &self.data))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsrepJson {
    pub maps: BTreeMap<String, MatrixJson>,
}

pub fn psrep_from_json(
    groupoid: Arc<FiniteGroupoid>,
    bundle: Arc<FiberBundle>,
    text: &str,
) -> Result<PseudoRep, IoError> {
    let parsed: PsrepJson = serde_json::from_str(text)?;
    let lookup = arrow_lookup(&groupoid);
    let mut maps = vec![None; groupoid.num_arrows()];
    for (label, m) in &parsed.maps {
        let a = *lookup
            .get(label.as_str())
            .ok_or_else(|| IoError::UnknownArrow(label.clone()))?;
        maps[a] = Some(m.to_matrix(label)?);
    }
    let maps = maps
        .into_iter()
        .enumerate()
        .map(|(a, m)| m.ok_or_else(|| IoError::Missing(groupoid.arrow_label(a).to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PseudoRep::new(groupoid, bundle, maps)?)
}

pub fn psrep_to_json(rep: &PseudoRep) -> String {
    let g = rep.groupoid();
    let maps = (0..g.num_arrows())
        .map(|a| (g.arrow_label(a).to_string(), MatrixJson::from_matrix(rep.map(a))))
        .collect();
    serde_json::to_string_pretty(&PsrepJson { maps }).expect("plain data serializes")
}
