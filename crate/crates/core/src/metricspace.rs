//! Points, metrics and the dense distance matrix every algorithm consumes.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Default cap on the number of matrix entries (`n * n`).
pub const DEFAULT_ENTRY_CAP: usize = 100_000_000;

/// Absolute tolerance used by [`validate_triangle`].
pub const TRIANGLE_TOLERANCE: f64 = 1e-9;

/// `n` points in `d`-dimensional space, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    dim: usize,
    coords: Vec<f64>,
    labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: p.len(),
                });
            }
            if let Some(j) = p.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("point {i}, coordinate {j}")));
            }
            coords.extend_from_slice(p);
        }
        Self::from_flat(name, dim, coords)
    }

    pub fn from_flat(name: impl Into<String>, dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.is_empty() {
            return Err(Error::Invalid("dataset needs n >= 1 and d >= 1".into()));
        }
        if coords.len() % dim != 0 {
            return Err(Error::Invalid(format!(
                "{} coordinates do not divide into rows of {dim}",
                coords.len()
            )));
        }
        if let Some(k) = coords.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!(
                "point {}, coordinate {}",
                k / dim,
                k % dim
            )));
        }
        Ok(Self {
            name: name.into(),
            dim,
            coords,
            labels: None,
        })
    }

    /// Attach ground-truth class ids. They must be contiguous `0..c`.
    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::DimensionMismatch {
                left: self.len(),
                right: labels.len(),
            });
        }
        check_contiguous(&labels)?;
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Number of distinct classes, when labels are present.
    pub fn class_count(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().max().map_or(0, |m| m + 1))
    }

    /// The same dataset with its rows reordered: row `i` of the result is row
    /// `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.len() {
            return Err(Error::DimensionMismatch {
                left: self.len(),
                right: order.len(),
            });
        }
        let mut coords = Vec::with_capacity(self.coords.len());
        for &i in order {
            coords.extend_from_slice(self.point(i));
        }
        Ok(Self {
            name: self.name.clone(),
            dim: self.dim,
            coords,
            labels: self
                .labels
                .as_ref()
                .map(|l| order.iter().map(|&i| l[i]).collect()),
        })
    }
}

pub(crate) fn check_contiguous(labels: &[usize]) -> Result<()> {
    let Some(&max) = labels.iter().max() else {
        return Ok(());
    };
    let mut seen = vec![false; max + 1];
    for &l in labels {
        seen[l] = true;
    }
    match seen.iter().position(|s| !s) {
        Some(missing) => Err(Error::Invalid(format!(
            "labels are not contiguous: id {missing} is unused but {max} appears"
        ))),
        None => Ok(()),
    }
}

/// Built-in distance functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Manhattan,
    Minkowski { p: f64 },
}

impl Metric {
    pub fn minkowski(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::Invalid(format!("minkowski p must be > 0, got {p}")));
        }
        Ok(Metric::Minkowski { p })
    }

    /// Whether the metric is known to satisfy the triangle inequality.
    pub fn is_proper(&self) -> bool {
        match self {
            Metric::Euclidean | Metric::Manhattan => true,
            Metric::Minkowski { p } => *p >= 1.0,
        }
    }

    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match *self {
            Metric::Euclidean => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            Metric::Manhattan => diffs.sum(),
            Metric::Minkowski { p } => diffs.map(|d| d.powf(p)).sum::<f64>().powf(p.recip()),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Euclidean => f.write_str("euclidean"),
            Metric::Manhattan => f.write_str("manhattan"),
            Metric::Minkowski { p } => write!(f, "minkowski:{p}"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "manhattan" => Ok(Metric::Manhattan),
            _ => {
                let p = s
                    .strip_prefix("minkowski:")
                    .and_then(|p| p.parse::<f64>().ok())
                    .ok_or_else(|| {
                        Error::Invalid(format!(
                            "unknown metric {s:?} (expected euclidean, manhattan or minkowski:p)"
                        ))
                    })?;
                Metric::minkowski(p)
            }
        }
    }
}

/// Distance between two points under `metric`.
pub fn distance(a: &[f64], b: &[f64], metric: Metric) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("distance argument".into()));
    }
    Ok(metric.eval(a, b))
}

/// Dense symmetric `n x n` matrix of pairwise distances, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
    metric_tag: String,
}

impl DistanceMatrix {
    /// Wrap precomputed values, checking symmetry, zero diagonal and
    /// nonnegative finite entries.
    pub fn from_rows(rows: Vec<Vec<f64>>, metric_tag: impl Into<String>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Invalid("distance matrix must have n >= 1".into()));
        }
        let mut values = Vec::with_capacity(n * n);
        for row in &rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    left: n,
                    right: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        let dm = Self {
            n,
            values,
            metric_tag: metric_tag.into(),
        };
        dm.check()?;
        Ok(dm)
    }

    fn check(&self) -> Result<()> {
        let n = self.n;
        for i in 0..n {
            if self.get(i, i) != 0.0 {
                return Err(Error::Invalid(format!("diagonal entry ({i},{i}) is not 0")));
            }
            for j in 0..n {
                let v = self.get(i, j);
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Invalid(format!("entry ({i},{j}) = {v}")));
                }
                if v != self.get(j, i) {
                    return Err(Error::Invalid(format!("entry ({i},{j}) breaks symmetry")));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn metric_tag(&self) -> &str {
        &self.metric_tag
    }
}

/// Pairwise distances of `ds` under `metric`, refusing more than
/// [`DEFAULT_ENTRY_CAP`] entries.
pub fn distance_matrix(ds: &Dataset, metric: Metric) -> Result<DistanceMatrix> {
    distance_matrix_with_cap(ds, metric, DEFAULT_ENTRY_CAP)
}

pub fn distance_matrix_with_cap(
    ds: &Dataset,
    metric: Metric,
    entry_cap: usize,
) -> Result<DistanceMatrix> {
    let n = ds.len();
    match n.checked_mul(n) {
        Some(entries) if entries <= entry_cap => {}
        _ => return Err(Error::TooLarge { n, cap: entry_cap }),
    }
    let mut values = vec![0.0; n * n];
    // Each entry is computed independently, so the parallel fill matches a
    // sequential one bit for bit.
    values.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let a = ds.point(i);
        for (j, out) in row.iter_mut().enumerate() {
            if j != i {
                *out = metric.eval(a, ds.point(j));
            }
        }
    });
    Ok(DistanceMatrix {
        n,
        values,
        metric_tag: metric.to_string(),
    })
}

/// Outcome of sampling triples against the triangle inequality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriangleReport {
    pub passed: bool,
    pub checked: usize,
    pub violations: usize,
    /// Largest `d(i,k) - d(i,j) - d(j,k)` seen; 0 when nothing was violated.
    pub worst_violation: f64,
    pub worst_triple: Option<(usize, usize, usize)>,
    /// Set when the generating metric is not guaranteed to be a metric
    /// (minkowski with p < 1).
    pub improper_metric: bool,
}

/// Check `d(i,k) <= d(i,j) + d(j,k)` on triples of distinct indices.
///
/// When `n^3` does not exceed `samples` every ordered triple is checked,
/// otherwise `samples` triples are drawn with a fixed seed.
pub fn validate_triangle(dm: &DistanceMatrix, samples: usize) -> TriangleReport {
    validate_triangle_seeded(dm, samples, 0x7269_616e_676c_6521)
}

pub fn validate_triangle_seeded(dm: &DistanceMatrix, samples: usize, seed: u64) -> TriangleReport {
    let n = dm.len();
    let mut report = TriangleReport {
        passed: true,
        checked: 0,
        violations: 0,
        worst_violation: 0.0,
        worst_triple: None,
        improper_metric: dm
            .metric_tag()
            .parse::<Metric>()
            .is_ok_and(|m| !m.is_proper()),
    };
    if n < 3 {
        return report;
    }
    let mut check = |i: usize, j: usize, k: usize| {
        report.checked += 1;
        let excess = dm.get(i, k) - dm.get(i, j) - dm.get(j, k);
        if excess > TRIANGLE_TOLERANCE {
            report.violations += 1;
            report.passed = false;
            if excess > report.worst_violation {
                report.worst_violation = excess;
                report.worst_triple = Some((i, j, k));
            }
        }
    };
    let exhaustive = n
        .checked_pow(3)
        .is_some_and(|cube| cube <= samples);
    if exhaustive {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if i != j && j != k && i != k {
                        check(i, j, k);
                    }
                }
            }
        }
    } else {
        let mut rng = SeededRng::new(seed);
        let mut drawn = 0;
        while drawn < samples {
            let (i, j, k) = (rng.index(n), rng.index(n), rng.index(n));
            if i != j && j != k && i != k {
                check(i, j, k);
                drawn += 1;
            }
        }
    }
    report
}
