//! Dense linear algebra for subspace alignment: PCA bases, projection and
//! reconstruction, and the closed-form alignment transform between two bases.
//!
//! Everything here is deterministic. PCA uses a full symmetric
//! eigendecomposition of either the `D x D` covariance or, when there are
//! fewer samples than dimensions, the `n x n` Gram matrix of the centered rows.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, RowDVector, SymmetricEigen};

use crate::error::{Result, SsaError};

/// Eigenvalues closer than this are treated as tied.
const TIE_GAP: f64 = 1e-10;

/// Rows are samples, columns are ambient dimensions. All entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix(DMatrix<f64>);

impl SampleMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(SsaError::EmptyInput("sample matrix".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SsaError::NonFinite);
        }
        Ok(Self(values))
    }

    /// Builds a matrix from row vectors of equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(SsaError::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, dim, |i, j| rows[i][j]))
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Copies out the given rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> DMatrix<f64> {
        self.0.select_rows(rows)
    }
}

impl AsRef<DMatrix<f64>> for SampleMatrix {
    fn as_ref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Centered orthonormal principal-component basis of one domain.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    /// `D x d`, orthonormal columns, sign-normalized.
    pub components: DMatrix<f64>,
    /// Row mean of the fitted data, length `D`.
    pub mean: RowDVector<f64>,
    /// Non-increasing, non-negative.
    pub eigenvalues: Vec<f64>,
}

impl SubspaceBasis {
    pub fn ambient_dim(&self) -> usize {
        self.components.nrows()
    }

    pub fn dim(&self) -> usize {
        self.components.ncols()
    }

    /// `(x - mean) * components`.
    pub fn project(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.ambient_dim() {
            return Err(SsaError::DimensionMismatch {
                expected: self.ambient_dim(),
                got: x.ncols(),
            });
        }
        Ok(center_with(x, &self.mean) * &self.components)
    }

    /// `z * components^T + mean`.
    pub fn reconstruct(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if z.ncols() != self.dim() {
            return Err(SsaError::DimensionMismatch {
                expected: self.dim(),
                got: z.ncols(),
            });
        }
        let mut out = z * self.components.transpose();
        for mut row in out.row_iter_mut() {
            row += &self.mean;
        }
        Ok(out)
    }
}

/// `d x d` transform taking source components onto target components.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentTransform {
    pub m: DMatrix<f64>,
}

/// Largest subspace dimension `fit_pca` accepts for `n` rows in `dim` columns.
pub fn max_dim(n: usize, dim: usize) -> usize {
    n.saturating_sub(1).min(dim)
}

/// Fits the top-`d` principal components of `x`.
pub fn fit_pca(x: &DMatrix<f64>, d: usize) -> Result<SubspaceBasis> {
    let (n, dim) = x.shape();
    if n < 2 {
        return Err(SsaError::DegenerateInput(format!(
            "PCA needs at least 2 rows, got {n}"
        )));
    }
    if d == 0 {
        return Err(SsaError::InvalidConfig("subspace dimension must be >= 1".into()));
    }
    let max = max_dim(n, dim);
    if d > max {
        return Err(SsaError::DimensionTooLarge { requested: d, max });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SsaError::NonFinite);
    }

    let mean = row_mean(x);
    let centered = center_with(x, &mean);
    let scale = 1.0 / (n - 1) as f64;

    let pairs = if n <= dim {
        gram_eigenpairs(&centered, scale, d).unwrap_or_else(|| covariance_eigenpairs(&centered, scale))
    } else {
        covariance_eigenpairs(&centered, scale)
    };
    let pairs = order_eigenpairs(pairs);

    let mut components = DMatrix::zeros(dim, d);
    let mut eigenvalues = Vec::with_capacity(d);
    for (j, (value, vector)) in pairs.into_iter().take(d).enumerate() {
        components.set_column(j, &vector);
        eigenvalues.push(value.max(0.0));
    }
    Ok(SubspaceBasis {
        components,
        mean,
        eigenvalues,
    })
}

/// `M* = C_s^T C_t`, the exact least-squares minimizer of `|C_s M - C_t|_F`.
pub fn solve_alignment(c_s: &SubspaceBasis, c_t: &SubspaceBasis) -> Result<AlignmentTransform> {
    if c_s.ambient_dim() != c_t.ambient_dim() {
        return Err(SsaError::DimensionMismatch {
            expected: c_s.ambient_dim(),
            got: c_t.ambient_dim(),
        });
    }
    if c_s.dim() != c_t.dim() {
        return Err(SsaError::DimensionMismatch {
            expected: c_s.dim(),
            got: c_t.dim(),
        });
    }
    Ok(AlignmentTransform {
        m: c_s.components.transpose() * &c_t.components,
    })
}

pub fn row_mean(x: &DMatrix<f64>) -> RowDVector<f64> {
    let n = x.nrows() as f64;
    let mut mean = RowDVector::zeros(x.ncols());
    for row in x.row_iter() {
        mean += row;
    }
    mean / n
}

pub fn center_with(x: &DMatrix<f64>, mean: &RowDVector<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for mut row in out.row_iter_mut() {
        row -= mean;
    }
    out
}

fn covariance_eigenpairs(centered: &DMatrix<f64>, scale: f64) -> Vec<(f64, DVector<f64>)> {
    let cov = (centered.transpose() * centered) * scale;
    let eig = SymmetricEigen::new(cov);
    eig.eigenvalues
        .iter()
        .zip(eig.eigenvectors.column_iter())
        .map(|(&value, col)| (value, sign_normalized(col.into_owned())))
        .collect()
}

/// Eigenpairs via the Gram matrix. Returns `None` when any of the top `d`
/// eigenvalues is too small for the back-mapping to stay accurate.
fn gram_eigenpairs(centered: &DMatrix<f64>, scale: f64, d: usize) -> Option<Vec<(f64, DVector<f64>)>> {
    let gram = (centered * centered.transpose()) * scale;
    let eig = SymmetricEigen::new(gram);
    let mut pairs: Vec<(f64, DVector<f64>)> = eig
        .eigenvalues
        .iter()
        .zip(eig.eigenvectors.column_iter())
        .map(|(&v, c)| (v, c.into_owned()))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let top = pairs.first()?.0;
    if top <= 0.0 || pairs[d - 1].0 < 1e-8 * top {
        return None;
    }
    let mapped = pairs
        .into_iter()
        .take(d)
        .map(|(value, u)| {
            // X^T u / sqrt((n-1) lambda) is a unit eigenvector of the covariance.
            let mut v = centered.transpose() * u;
            let norm = v.norm();
            v /= norm;
            (value, sign_normalized(v))
        })
        .collect();
    Some(mapped)
}

/// Flips `v` so its largest-magnitude entry (lowest index on ties) is non-negative.
pub fn sign_normalized(mut v: DVector<f64>) -> DVector<f64> {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        v.neg_mut();
    }
    v
}

fn lexicographic(a: &DVector<f64>, b: &DVector<f64>) -> Ordering {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Descending by eigenvalue; runs of near-tied eigenvalues are ordered by the
/// lexicographic order of their (sign-normalized) eigenvectors.
fn order_eigenpairs(mut pairs: Vec<(f64, DVector<f64>)>) -> Vec<(f64, DVector<f64>)> {
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() && pairs[end - 1].0 - pairs[end].0 < TIE_GAP {
            end += 1;
        }
        if end - start > 1 {
            pairs[start..end].sort_by(|a, b| lexicographic(&a.1, &b.1));
        }
        start = end;
    }
    pairs
}
