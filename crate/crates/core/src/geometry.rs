//! Spherical primitives: configurations of unit vectors, geodesic distances,
//! the pairwise kinematic table, signed minors, and the closed-hemisphere
//! test.

use nalgebra::{DMatrix, DVector};
use serde::ser::SerializeStruct;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Accepted deviation of a point norm from 1.
pub const UNIT_TOL: f64 = 1e-12;
/// Pairs with |q_i . q_j| >= 1 - SINGULAR_TOL count as collided or antipodal.
pub const SINGULAR_TOL: f64 = 1e-12;
/// Relative singular-value cutoff for the numerical rank.
pub const RANK_TOL: f64 = 1e-9;
/// Signed minors below this fraction of the largest one count as vanishing.
pub const MINOR_TOL: f64 = 1e-10;
/// Feasibility slack accepted by the closed-hemisphere witness search.
const WITNESS_TOL: f64 = 1e-9;

/// N labeled points on the unit sphere S^n in R^{n+1}.
///
/// Invariants enforced at construction: every point has unit norm within
/// [`UNIT_TOL`], no pair is collided or antipodal within [`SINGULAR_TOL`],
/// and there are at least two bodies.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    dim: usize,
    points: Vec<DVector<f64>>,
}

impl Configuration {
    /// Validates raw coordinates: N rows of length `dim + 1`.
    pub fn new(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_points(dim, points.into_iter().map(DVector::from_vec).collect())
    }

    /// Validates already-assembled vectors.
    pub fn from_points(dim: usize, points: Vec<DVector<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput(
                "sphere dimension must be at least 1".into(),
            ));
        }
        if points.len() < 2 {
            return Err(Error::InvalidInput("need at least two bodies".into()));
        }
        for (index, p) in points.iter().enumerate() {
            if p.len() != dim + 1 {
                return Err(Error::InvalidInput(format!(
                    "point {index} has {} coordinates, expected {}",
                    p.len(),
                    dim + 1
                )));
            }
            if !p.iter().all(|x| x.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "point {index} has non-finite coordinates"
                )));
            }
            let norm = p.norm();
            if (norm - 1.0).abs() > UNIT_TOL {
                return Err(Error::NonUnitPoint { index, norm });
            }
        }
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                let dot = points[i].dot(&points[j]);
                if dot.abs() >= 1.0 - SINGULAR_TOL {
                    return Err(Error::SingularPair { i, j, dot });
                }
            }
        }
        Ok(Self { dim, points })
    }

    /// Sphere dimension n.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dimension of the ambient space, n + 1.
    pub fn ambient_dim(&self) -> usize {
        self.dim + 1
    }

    pub fn n_bodies(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &DVector<f64> {
        &self.points[i]
    }

    /// The (n+1) x N matrix with the points as columns.
    pub fn as_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_columns(&self.points)
    }

    /// Numerical rank of the point matrix, with singular values below
    /// [`RANK_TOL`] times the largest one treated as zero.
    pub fn rank(&self) -> usize {
        let sv = self.as_matrix().singular_values();
        let smax = sv.max();
        if smax <= 0.0 {
            return 0;
        }
        sv.iter().filter(|&&s| s > RANK_TOL * smax).count()
    }

    /// True when the N bodies span R^{N-1}: they live on S^{N-2}
    /// (dim = N - 2) and the point matrix has full rank N - 1.
    pub fn is_dziobek(&self) -> bool {
        self.dim + 2 == self.n_bodies() && self.rank() == self.n_bodies() - 1
    }
}

impl Serialize for Configuration {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("Configuration", 2)?;
        st.serialize_field("dim", &self.dim)?;
        let rows: Vec<Vec<f64>> = self
            .points
            .iter()
            .map(|p| p.iter().copied().collect())
            .collect();
        st.serialize_field("points", &rows)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for Configuration {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            dim: usize,
            points: Vec<Vec<f64>>,
        }
        let raw = Raw::deserialize(deserializer)?;
        Configuration::new(raw.dim, raw.points).map_err(serde::de::Error::custom)
    }
}

/// Geodesic distance on the unit sphere: arccos of the clamped inner
/// product. Symmetric in its arguments.
pub fn geodesic_distance(p: &DVector<f64>, q: &DVector<f64>) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    for v in [p, q] {
        let norm = v.norm();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidInput(format!(
                "argument is not a unit vector (norm = {norm})"
            )));
        }
    }
    Ok(p.dot(q).clamp(-1.0, 1.0).acos())
}

/// 2·atan2(‖p−q‖, ‖p+q‖): the angle between unit vectors, equal to the
/// geodesic distance but accurate at both ends of [0, π]. arccos of the
/// inner product cannot resolve angles below ~1.5e-8 (the arccos of one
/// ulp under 1), which matters when measuring near-zero drift.
pub(crate) fn stable_angle(p: &DVector<f64>, q: &DVector<f64>) -> f64 {
    2.0 * (p - q).norm().atan2((p + q).norm())
}

/// Cached pairwise quantities: cos d_ij, sin d_ij and S_ij = 1/sin^3 d_ij.
///
/// All matrices are symmetric. Diagonal entries are not meaningful: cosd
/// holds 1, sind holds 0 and s holds NaN there.
#[derive(Debug, Clone)]
pub struct PairTable {
    pub cosd: DMatrix<f64>,
    pub sind: DMatrix<f64>,
    pub s: DMatrix<f64>,
}

impl PairTable {
    pub fn build(c: &Configuration) -> Result<Self> {
        let n = c.n_bodies();
        let mut cosd = DMatrix::from_element(n, n, 1.0);
        let mut sind = DMatrix::zeros(n, n);
        let mut s = DMatrix::from_element(n, n, f64::NAN);
        for i in 0..n {
            for j in (i + 1)..n {
                let dot = c.point(i).dot(c.point(j)).clamp(-1.0, 1.0);
                if dot.abs() >= 1.0 - SINGULAR_TOL {
                    return Err(Error::SingularPair { i, j, dot });
                }
                let sin = (1.0 - dot * dot).sqrt();
                let sij = sin.powi(3).recip();
                cosd[(i, j)] = dot;
                cosd[(j, i)] = dot;
                sind[(i, j)] = sin;
                sind[(j, i)] = sin;
                s[(i, j)] = sij;
                s[(j, i)] = sij;
            }
        }
        Ok(Self { cosd, sind, s })
    }
}

/// Signed maximal minors of the point matrix of N bodies spanning R^{N-1}.
///
/// Entry k (0-based) is (-1)^k det(X_k), where X is the (N-1) x N point
/// matrix and X_k deletes column k. The vector spans the kernel of X, so
/// sum_k entries[k] q_k = 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaVector {
    pub entries: Vec<f64>,
}

impl DeltaVector {
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |a, x| a.max(x.abs()))
    }

    /// True when every entry is strictly positive or every entry strictly
    /// negative.
    pub fn same_sign(&self) -> bool {
        self.entries.iter().all(|&x| x > 0.0) || self.entries.iter().all(|&x| x < 0.0)
    }

    /// Max-norm of sum_k entries[k] q_k, which vanishes for exact minors.
    pub fn kernel_residual(&self, c: &Configuration) -> f64 {
        let mut sum = DVector::zeros(c.ambient_dim());
        for (d, q) in self.entries.iter().zip(c.points()) {
            sum += q * *d;
        }
        sum.amax()
    }
}

/// Computes the signed-minor vector of a configuration of N bodies in
/// R^{N-1}.
pub fn delta_vector(c: &Configuration) -> Result<DeltaVector> {
    let n = c.n_bodies();
    if c.ambient_dim() != n - 1 {
        return Err(Error::WrongCodimension {
            n_bodies: n,
            dim: c.dim(),
            expected: n - 2,
        });
    }
    let rank = c.rank();
    if rank != n - 1 {
        return Err(Error::DegenerateConfiguration {
            rank,
            needed: n - 1,
        });
    }
    let x = c.as_matrix();
    let entries = (0..n)
        .map(|k| {
            let det = x.clone().remove_column(k).determinant();
            if k % 2 == 0 {
                det
            } else {
                -det
            }
        })
        .collect();
    Ok(DeltaVector { entries })
}

/// Searches for a closed hemisphere containing every body.
///
/// Returns a unit normal u with u . q_i >= 0 for all i when one exists,
/// and None otherwise. The bodies avoid every closed hemisphere exactly
/// when the origin is strictly interior to their convex hull, so it
/// suffices to scan the candidate supporting normals: any null direction
/// of the point set (the bodies then lie on a great sphere), and, at full
/// rank, the extreme rays of the admissible cone {u : q_i . u >= 0 for
/// all i}, each orthogonal to some spanning subset of n points.
pub fn in_closed_hemisphere(c: &Configuration) -> Option<DVector<f64>> {
    let d = c.ambient_dim();
    let points = c.points();

    let q = c.as_matrix();
    let gram = &q * q.transpose();
    let eig = gram.symmetric_eigen();
    let lmax = eig.eigenvalues.max();
    for k in 0..d {
        if eig.eigenvalues[k] <= (RANK_TOL * RANK_TOL) * lmax {
            return Some(eig.eigenvectors.column(k).into_owned());
        }
    }

    for subset in index_subsets(points.len(), d - 1) {
        let cols: Vec<&DVector<f64>> = subset.iter().map(|&i| &points[i]).collect();
        let u = orthogonal_complement_direction(&cols);
        let norm = u.norm();
        if norm <= 1e-12 {
            continue;
        }
        let u = u / norm;
        for cand in [u.clone(), -u] {
            if points.iter().all(|p| p.dot(&cand) >= -WITNESS_TOL) {
                return Some(cand);
            }
        }
    }
    None
}

/// Direction orthogonal to d-1 vectors in R^d, by cofactor expansion of the
/// matrix with the vectors as columns. Zero when the vectors are dependent.
fn orthogonal_complement_direction(cols: &[&DVector<f64>]) -> DVector<f64> {
    let d = cols[0].len();
    debug_assert_eq!(cols.len(), d - 1);
    let m = DMatrix::from_fn(d, d - 1, |r, c| cols[c][r]);
    DVector::from_fn(d, |row, _| {
        let det = m.clone().remove_row(row).determinant();
        if row % 2 == 0 {
            det
        } else {
            -det
        }
    })
}

/// All k-element subsets of {0, ..., n-1} in lexicographic order.
fn index_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k == 0 || k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}
