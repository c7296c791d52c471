//! Finite metric spaces and the transforms the engines consume.
//!
//! A [`FiniteMetricSpace`] is a labelled, symmetric distance matrix. Every
//! constructor that accepts external data runs [`validate_metric`] first;
//! generators build their matrices from a distance function and are trusted.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{MagError, Result};
use crate::generate::SpaceSpec;

/// Relative slack used for every metric-axiom check.
pub const TRIANGLE_SLACK: f64 = 1e-9;

/// At most this many violating triples are listed in a [`ValidationReport`].
const MAX_LISTED_TRIPLES: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct FiniteMetricSpace {
    labels: Vec<String>,
    n: usize,
    // row-major, symmetric by construction
    dist: Vec<f64>,
    provenance: Option<SpaceSpec>,
}

#[derive(Serialize, Deserialize)]
struct RawSpace {
    labels: Vec<String>,
    dist: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<SpaceSpec>,
}

impl TryFrom<RawSpace> for FiniteMetricSpace {
    type Error = MagError;

    fn try_from(raw: RawSpace) -> Result<Self> {
        let mut space = FiniteMetricSpace::from_rows(raw.dist)?;
        if raw.labels.len() != space.n {
            return Err(MagError::InvalidParams(format!(
                "{} labels for {} points",
                raw.labels.len(),
                space.n
            )));
        }
        space.labels = raw.labels;
        space.provenance = raw.provenance;
        Ok(space)
    }
}

impl From<FiniteMetricSpace> for RawSpace {
    fn from(space: FiniteMetricSpace) -> Self {
        RawSpace {
            dist: space.rows(),
            labels: space.labels,
            provenance: space.provenance,
        }
    }
}

impl FiniteMetricSpace {
    /// Validated construction from a full distance matrix. Labels default to
    /// the point indices.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let report = validate_metric(&rows)?;
        if !report.ok {
            return Err(MagError::InvalidMetric(Box::new(report)));
        }
        Ok(Self::symmetrized(rows))
    }

    /// Construction that checks shape and finiteness but not the metric
    /// axioms. The upper triangle is copied to the lower one.
    pub fn from_rows_unvalidated(rows: Vec<Vec<f64>>) -> Result<Self> {
        check_shape(&rows)?;
        Ok(Self::symmetrized(rows))
    }

    fn symmetrized(rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        Self::from_fn(n, |i, j| rows[i][j])
    }

    /// Builds a space from a distance function evaluated on the upper
    /// triangle. The diagonal is set to exactly zero.
    pub(crate) fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = f(i, j);
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        FiniteMetricSpace {
            labels: (0..n).map(|i| i.to_string()).collect(),
            n,
            dist,
            provenance: None,
        }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(MagError::InvalidParams(format!(
                "{} labels for {} points",
                labels.len(),
                self.n
            )));
        }
        self.labels = labels;
        Ok(self)
    }

    pub(crate) fn with_provenance(mut self, spec: Option<SpaceSpec>) -> Self {
        self.provenance = spec;
        self
    }

    pub fn singleton() -> Self {
        Self::from_fn(1, |_, _| 0.0)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    /// Row `i` of the distance matrix.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.n..(i + 1) * self.n]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn provenance(&self) -> Option<&SpaceSpec> {
        self.provenance.as_ref()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.dist)
    }

    /// Raw row-major distances.
    pub fn as_slice(&self) -> &[f64] {
        &self.dist
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// The subspace on the given point indices, in the given order.
    pub fn subspace(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(MagError::EmptySubset);
        }
        for &i in indices {
            if i >= self.n {
                return Err(MagError::IndexOutOfRange {
                    index: i,
                    len: self.n,
                });
            }
        }
        let mut sub = Self::from_fn(indices.len(), |a, b| self.dist(indices[a], indices[b]));
        sub.labels = indices.iter().map(|&i| self.labels[i].clone()).collect();
        Ok(sub)
    }

    /// The space with point `index` removed.
    pub fn without_point(&self, index: usize) -> Result<Self> {
        let keep: Vec<usize> = (0..self.n).filter(|&i| i != index).collect();
        self.subspace(&keep)
    }

    pub fn validate(&self) -> ValidationReport {
        // shape and finiteness hold by construction
        validate_square(self.n, |i, j| self.dist(i, j))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriangleViolation {
    pub i: usize,
    pub j: usize,
    /// The intermediate point.
    pub via: usize,
    pub violation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub worst_triangle_violation: f64,
    pub worst_asymmetry: f64,
    pub worst_diagonal: f64,
    /// Off-diagonal pairs with a non-positive distance.
    pub nonpositive_pairs: Vec<(usize, usize)>,
    pub offending_triples: Vec<TriangleViolation>,
    pub slack: f64,
}

fn check_shape(rows: &[Vec<f64>]) -> Result<()> {
    let n = rows.len();
    if n == 0 {
        return Err(MagError::EmptySpace);
    }
    for (r, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(MagError::NonSquareMatrix {
                row: r,
                len: row.len(),
                expected: n,
            });
        }
        if let Some(c) = row.iter().position(|x| !x.is_finite()) {
            return Err(MagError::NonFiniteEntry(r, c));
        }
    }
    Ok(())
}

/// Checks the metric axioms on a square matrix of finite reals.
///
/// Triangle, symmetry and diagonal checks use the relative slack
/// [`TRIANGLE_SLACK`] times the largest entry. Off-diagonal entries must be
/// strictly positive.
pub fn validate_metric(rows: &[Vec<f64>]) -> Result<ValidationReport> {
    check_shape(rows)?;
    Ok(validate_square(rows.len(), |i, j| rows[i][j]))
}

fn validate_square(n: usize, d: impl Fn(usize, usize) -> f64) -> ValidationReport {
    let mut max_entry = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            max_entry = max_entry.max(d(i, j).abs());
        }
    }
    let slack = TRIANGLE_SLACK * max_entry;

    let mut worst_asymmetry = 0.0f64;
    let mut worst_diagonal = 0.0f64;
    let mut nonpositive_pairs = Vec::new();
    for i in 0..n {
        worst_diagonal = worst_diagonal.max(d(i, i).abs());
        for j in (i + 1)..n {
            worst_asymmetry = worst_asymmetry.max((d(i, j) - d(j, i)).abs());
            if d(i, j) <= 0.0 || d(j, i) <= 0.0 {
                nonpositive_pairs.push((i, j));
            }
        }
    }

    let mut worst_triangle = 0.0f64;
    let mut triples = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let dij = d(i, j);
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                let v = dij - d(i, k) - d(k, j);
                if v > worst_triangle {
                    worst_triangle = v;
                }
                if v > slack && triples.len() < MAX_LISTED_TRIPLES {
                    triples.push(TriangleViolation {
                        i,
                        j,
                        via: k,
                        violation: v,
                    });
                }
            }
        }
    }

    let ok = worst_triangle <= slack
        && worst_asymmetry <= slack
        && worst_diagonal <= slack
        && nonpositive_pairs.is_empty();
    ValidationReport {
        ok,
        worst_triangle_violation: worst_triangle,
        worst_asymmetry,
        worst_diagonal,
        nonpositive_pairs,
        offending_triples: triples,
        slack,
    }
}

/// The space `tA`: every distance multiplied by `t`.
pub fn scale_space(a: &FiniteMetricSpace, t: f64) -> Result<FiniteMetricSpace> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(MagError::NonpositiveScale(t));
    }
    let provenance = a.provenance.clone().map(|mut s| {
        s.scale *= t;
        s
    });
    Ok(FiniteMetricSpace {
        labels: a.labels.clone(),
        n: a.n,
        dist: a.dist.iter().map(|d| d * t).collect(),
        provenance,
    })
}

/// The snowflake `A^alpha` for `0 < alpha <= 1`.
pub fn snowflake_space(a: &FiniteMetricSpace, alpha: f64) -> Result<FiniteMetricSpace> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(MagError::ExponentOutOfRange(format!(
            "snowflake exponent must lie in (0, 1], got {alpha}"
        )));
    }
    let provenance = a.provenance.clone().map(|mut s| {
        s.scale = s.scale.powf(alpha);
        s.snowflake *= alpha;
        s
    });
    Ok(FiniteMetricSpace {
        labels: a.labels.clone(),
        n: a.n,
        dist: a.dist.iter().map(|d| d.powf(alpha)).collect(),
        provenance,
    })
}

/// The `l_q` product of two spaces; `q = f64::INFINITY` gives the max metric.
pub fn lp_product(
    a: &FiniteMetricSpace,
    b: &FiniteMetricSpace,
    q: f64,
) -> Result<FiniteMetricSpace> {
    if !(q >= 1.0) {
        return Err(MagError::ExponentOutOfRange(format!(
            "product exponent must be >= 1, got {q}"
        )));
    }
    let nb = b.n;
    let combine = |x: f64, y: f64| {
        if q == 1.0 {
            x + y
        } else if q.is_infinite() {
            x.max(y)
        } else if q == 2.0 {
            x.hypot(y)
        } else {
            (x.powf(q) + y.powf(q)).powf(1.0 / q)
        }
    };
    let space = FiniteMetricSpace::from_fn(a.n * nb, |u, v| {
        combine(a.dist(u / nb, v / nb), b.dist(u % nb, v % nb))
    });
    let labels = (0..a.n * nb)
        .map(|u| format!("({},{})", a.labels[u / nb], b.labels[u % nb]))
        .collect();
    Ok(FiniteMetricSpace { labels, ..space })
}

/// Largest distance from a point of `from` to its nearest point of `to`.
pub fn directed_hausdorff(from: &[usize], to: &[usize], x: &FiniteMetricSpace) -> f64 {
    from.iter()
        .map(|&i| {
            to.iter()
                .map(|&j| x.dist(i, j))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Hausdorff distance between two nonempty subsets of `x`, given by indices.
pub fn hausdorff_distance(i: &[usize], j: &[usize], x: &FiniteMetricSpace) -> Result<f64> {
    if i.is_empty() || j.is_empty() {
        return Err(MagError::EmptySubset);
    }
    if let Some(&bad) = i.iter().chain(j).find(|&&k| k >= x.len()) {
        return Err(MagError::IndexOutOfRange {
            index: bad,
            len: x.len(),
        });
    }
    Ok(directed_hausdorff(i, j, x).max(directed_hausdorff(j, i, x)))
}
