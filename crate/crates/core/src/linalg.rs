//! Small dense matrix helpers: spectral norms, conditioning, metric factors.

use nalgebra::{DMatrix, SymmetricEigen, SVD};

/// Condition number (2-norm) at or above which a matrix counts as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// Smallest eigenvalue a Gram matrix may have.
pub const METRIC_MIN_EIGENVALUE: f64 = 1e-12;

fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    match m.shape() {
        (0, _) | (_, 0) => Vec::new(),
        (1, 1) => vec![m[(0, 0)].abs()],
        _ => SVD::new(m.clone(), false, false)
            .singular_values
            .iter()
            .copied()
            .collect(),
    }
}

/// Largest singular value; zero for empty matrices.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).into_iter().fold(0.0, f64::max)
}

/// `σ_max / σ_min` for square matrices, infinite otherwise or when singular.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let sv = singular_values(m);
    if sv.is_empty() {
        return 1.0;
    }
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 || !max.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse of a well-conditioned square matrix.
pub fn invert(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if condition_number(m) >= SINGULAR_CONDITION {
        return None;
    }
    if m.nrows() == 0 {
        return Some(m.clone());
    }
    m.clone().try_inverse()
}

/// A Gram matrix with its square root and inverse square root.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    gram: DMatrix<f64>,
    sqrt: DMatrix<f64>,
    inv_sqrt: DMatrix<f64>,
    identity: bool,
}

impl Metric {
    pub fn identity(dim: usize) -> Self {
        let id = DMatrix::identity(dim, dim);
        Self {
            gram: id.clone(),
            sqrt: id.clone(),
            inv_sqrt: id,
            identity: true,
        }
    }

    /// Factors a symmetric positive-definite Gram matrix; `None` if it is not one.
    pub fn from_gram(gram: DMatrix<f64>) -> Option<Self> {
        if !gram.is_square() {
            return None;
        }
        let n = gram.nrows();
        let scale = gram.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (gram[(i, j)] - gram[(j, i)]).abs() > 1e-12 * scale {
                    return None;
                }
            }
        }
        if gram.iter().any(|v| !v.is_finite()) {
            return None;
        }
        if gram == DMatrix::identity(n, n) {
            return Some(Self::identity(n));
        }
        let eig = SymmetricEigen::new(gram.clone());
        if eig.eigenvalues.iter().any(|&l| l <= METRIC_MIN_EIGENVALUE) {
            return None;
        }
        let q = &eig.eigenvectors;
        let sqrt = q * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt)) * q.transpose();
        let inv_sqrt =
            q * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt())) * q.transpose();
        Some(Self {
            gram,
            sqrt,
            inv_sqrt,
            identity: false,
        })
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// `sup_{|v|_src = 1} |a v|_dst`, the largest singular value of
    /// `dst^{1/2} a src^{-1/2}`.
    pub fn norm_between(a: &DMatrix<f64>, src: &Metric, dst: &Metric) -> f64 {
        match (src.identity, dst.identity) {
            (true, true) => spectral_norm(a),
            (true, false) => spectral_norm(&(&dst.sqrt * a)),
            (false, true) => spectral_norm(&(a * &src.inv_sqrt)),
            (false, false) => spectral_norm(&(&dst.sqrt * a * &src.inv_sqrt)),
        }
    }
}
