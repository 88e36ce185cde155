//! KNN local density, sparse-point removal and the FC-KNN pipeline.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fission_core::{
    d_zero, fission_subset, subset_max_crack, Partition, SplitRecord, Subset, ThresholdMode,
};
use crate::metricspace::{DistanceMatrix, Metric};

/// Slack applied when turning ratios into counts, so that `0.4 + 3 * 0.1`
/// still removes `floor(0.7 * n)` points.
const RATIO_SLACK: f64 = 1e-9;

/// Per-point density `1 / sum of distances to the n0 nearest other points`.
///
/// A point whose `n0` nearest neighbours all coincide with it gets
/// `f64::INFINITY`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityVector {
    pub rho: Vec<f64>,
    pub n0: usize,
}

/// Neighbourhood size, either fixed or as a fraction of `n` rounded up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborCount {
    Fixed(usize),
    Fraction(f64),
}

impl NeighborCount {
    pub fn resolve(&self, n: usize) -> usize {
        match *self {
            NeighborCount::Fixed(k) => k,
            NeighborCount::Fraction(f) => (f * n as f64 - RATIO_SLACK).ceil().max(1.0) as usize,
        }
    }
}

impl Default for NeighborCount {
    fn default() -> Self {
        NeighborCount::Fraction(0.02)
    }
}

impl std::str::FromStr for NeighborCount {
    type Err = Error;

    /// `"5"` is a fixed count, `"2%"` a fraction of `n`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("bad neighbour count {s:?} (expected an integer or a percentage like 2%)"));
        match s.strip_suffix('%') {
            Some(pct) => {
                let pct: f64 = pct.trim().parse().map_err(|_| bad())?;
                if !(pct > 0.0 && pct < 100.0) {
                    return Err(bad());
                }
                Ok(NeighborCount::Fraction(pct / 100.0))
            }
            None => match s.trim().parse::<usize>() {
                Ok(k) if k >= 1 => Ok(NeighborCount::Fixed(k)),
                _ => Err(bad()),
            },
        }
    }
}

impl std::fmt::Display for NeighborCount {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NeighborCount::Fixed(k) => write!(f, "{k}"),
            NeighborCount::Fraction(x) => write!(f, "{}%", x * 100.0),
        }
    }
}

/// Parameters of the denoising stage and the FC-KNN pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FcParams {
    /// Denoising stops once `MC(C) > t * d0(C)`.
    pub t: f64,
    pub n0: NeighborCount,
    pub r_start: f64,
    pub r_step: f64,
    pub r_max: f64,
    pub metric: Metric,
    /// Stop rule of the fission run on the dense subset; `Scaled` stops at
    /// `t * d0(C)`.
    pub threshold_mode: ThresholdMode,
}

impl Default for FcParams {
    fn default() -> Self {
        Self {
            t: 4.0,
            n0: NeighborCount::default(),
            r_start: 0.4,
            r_step: 0.1,
            r_max: 0.9,
            metric: Metric::Euclidean,
            threshold_mode: ThresholdMode::Scaled,
        }
    }
}

impl FcParams {
    /// Check the parameters against a dataset of `n` points and return the
    /// resolved neighbourhood size.
    pub fn validate(&self, n: usize) -> Result<usize> {
        if !(self.t > 1.0 && self.t.is_finite()) {
            return Err(Error::Invalid(format!("t must be > 1, got {}", self.t)));
        }
        if !(self.r_start > 0.0 && self.r_start <= self.r_max && self.r_max < 1.0) {
            return Err(Error::Invalid(format!(
                "need 0 < r_start <= r_max < 1, got r_start = {}, r_max = {}",
                self.r_start, self.r_max
            )));
        }
        if !(self.r_step > 0.0) {
            return Err(Error::Invalid(format!("r_step must be > 0, got {}", self.r_step)));
        }
        if let NeighborCount::Fraction(f) = self.n0 {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Invalid(format!("n0 fraction must be in (0, 1), got {f}")));
            }
        }
        let n0 = self.n0.resolve(n);
        if n0 == 0 || n0 >= n {
            return Err(Error::Invalid(format!(
                "n0 = {n0} is out of range for {n} points"
            )));
        }
        Ok(n0)
    }
}

/// Density of every point from its `n0` nearest other points.
///
/// Neighbours tied at the cut-off radius are taken in index order, and each
/// sum is accumulated nearest first.
pub fn knn_density(dm: &DistanceMatrix, n0: usize) -> Result<DensityVector> {
    let n = dm.len();
    if n0 == 0 || n0 >= n {
        return Err(Error::Invalid(format!(
            "n0 = {n0} is out of range for {n} points"
        )));
    }
    let rho = (0..n)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(n),
            |buf: &mut Vec<(f64, usize)>, i| {
                buf.clear();
                buf.extend(
                    dm.row(i)
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != i)
                        .map(|(j, &d)| (d, j)),
                );
                let near = nearest_first(buf, n0);
                let sum: f64 = near.iter().map(|&(d, _)| d).sum();
                if sum == 0.0 {
                    f64::INFINITY
                } else {
                    sum.recip()
                }
            },
        )
        .collect();
    Ok(DensityVector { rho, n0 })
}

fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// The `k` smallest entries of `buf`, sorted.
fn nearest_first(buf: &mut [(f64, usize)], k: usize) -> &[(f64, usize)] {
    if k < buf.len() {
        buf.select_nth_unstable_by(k - 1, by_distance_then_index);
    }
    let near = &mut buf[..k];
    near.sort_unstable_by(by_distance_then_index);
    near
}

/// Indices ordered by removal priority: lowest density first, and among
/// equal densities the higher index first.
pub fn removal_order(density: &DensityVector) -> Vec<usize> {
    let mut order: Vec<usize> = (0..density.rho.len()).collect();
    order.sort_by(|&a, &b| {
        density.rho[a]
            .total_cmp(&density.rho[b])
            .then(b.cmp(&a))
    });
    order
}

/// Number of points removed at ratio `r`.
pub fn removal_count(r: f64, n: usize) -> usize {
    (r * n as f64 + RATIO_SLACK).floor() as usize
}

/// One pass of the denoising loop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DenoiseStep {
    pub r: f64,
    pub removed: usize,
    pub d0: f64,
    pub mc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DenoiseResult {
    pub dense_subset: Subset,
    pub removed: Vec<usize>,
    pub r_final: f64,
    pub mc_final: f64,
    pub d0_final: f64,
    /// Whether `MC(C) > t * d0(C)` was reached before `r_max`.
    pub separated: bool,
    pub n0: usize,
    pub steps: Vec<DenoiseStep>,
}

/// Strip low-density points until the dense subset shows a crack wider than
/// `t * d0`, raising the removal ratio from `r_start` by `r_step` up to
/// `r_max`.
///
/// Densities are computed once on the full input and every ratio removes its
/// share from the full input, so removed sets are nested across ratios.
pub fn denoise(dm: &DistanceMatrix, params: &FcParams) -> Result<DenoiseResult> {
    let n = dm.len();
    if n < 5 {
        return Err(Error::Invalid(format!("denoising needs at least 5 points, got {n}")));
    }
    let n0 = params.validate(n)?;
    let density = knn_density(dm, n0)?;
    let order = removal_order(&density);

    let mut steps = Vec::new();
    let mut step = 0usize;
    loop {
        let r = params.r_start + step as f64 * params.r_step;
        let removed = removal_count(r, n);
        if removed + 2 > n {
            return Err(Error::OverDenoised {
                remaining: n.saturating_sub(removed),
                r,
            });
        }
        let dense = Subset::from_unsorted(order[removed..].to_vec())?;
        let d0 = d_zero(dm, &dense)?;
        let mc = subset_max_crack(dm, &dense)?.value;
        steps.push(DenoiseStep { r, removed, d0, mc });

        let separated = mc > params.t * d0;
        let exhausted = r + params.r_step > params.r_max + RATIO_SLACK;
        if separated || exhausted {
            let mut removed_points = order[..removed].to_vec();
            removed_points.sort_unstable();
            return Ok(DenoiseResult {
                dense_subset: dense,
                removed: removed_points,
                r_final: r,
                mc_final: mc,
                d0_final: d0,
                separated,
                n0,
                steps,
            });
        }
        step += 1;
    }
}

/// Attach unlabelled points one at a time through the globally shortest
/// edge between a labelled and an unlabelled point.
///
/// `dense_labels[i]` is the cluster of `dense.indices()[i]`; those labels are
/// kept as they are. Ties go to the lowest (labelled, unlabelled) index pair.
pub fn assign_remainder(
    dm: &DistanceMatrix,
    dense: &Subset,
    dense_labels: &[usize],
    removed: &[usize],
) -> Result<Partition> {
    let n = dm.len();
    if dense_labels.len() != dense.len() {
        return Err(Error::DimensionMismatch {
            left: dense.len(),
            right: dense_labels.len(),
        });
    }
    let mut labels: Vec<Option<usize>> = vec![None; n];
    for (&i, &l) in dense.indices().iter().zip(dense_labels) {
        if i >= n {
            return Err(Error::Invalid(format!("point {i} out of range")));
        }
        labels[i] = Some(l);
    }
    let mut pending = Vec::with_capacity(removed.len());
    for &u in removed {
        if u >= n {
            return Err(Error::Invalid(format!("point {u} out of range")));
        }
        if labels[u].is_some() || pending.contains(&u) {
            return Err(Error::Invalid(format!(
                "point {u} is both labelled and pending, or listed twice"
            )));
        }
        pending.push(u);
    }
    if dense.len() + pending.len() != n {
        return Err(Error::Invalid(format!(
            "dense ({}) and removed ({}) points do not cover all {n} points",
            dense.len(),
            pending.len()
        )));
    }
    pending.sort_unstable();

    // best[p] = (distance, labelled index) of the closest labelled point to
    // pending[p]; lexicographic minimum so ties prefer the lower index.
    let mut best: Vec<(f64, usize)> = pending
        .par_iter()
        .map(|&u| {
            let row = dm.row(u);
            dense
                .indices()
                .iter()
                .map(|&c| (row[c], c))
                .min_by(by_distance_then_index)
                .expect("dense subset is nonempty")
        })
        .collect();

    while !pending.is_empty() {
        let pick = (0..pending.len())
            .min_by(|&a, &b| {
                by_distance_then_index(&best[a], &best[b]).then(pending[a].cmp(&pending[b]))
            })
            .expect("pending is nonempty");
        let u = pending.remove(pick);
        let (_, c) = best.remove(pick);
        labels[u] = labels[c];
        let row = dm.row(u);
        for (p, &v) in pending.iter().enumerate() {
            let cand = (row[v], u);
            if by_distance_then_index(&cand, &best[p]) == Ordering::Less {
                best[p] = cand;
            }
        }
    }

    let mut partition = Partition::from_labels(
        labels
            .into_iter()
            .map(|l| l.expect("every point labelled"))
            .collect(),
    )?;
    partition.split_trace = Vec::new();
    Ok(partition)
}

/// Result of the full FC-KNN pipeline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FcKnnOutcome {
    pub partition: Partition,
    pub denoise: DenoiseResult,
    pub warnings: Vec<String>,
}

/// Denoise, run fission on the dense subset, then attach the removed points.
///
/// With the default [`ThresholdMode::Scaled`] the fission threshold is
/// `t * d0(C)`, the same bar the denoising loop cleared.
pub fn fc_knn(dm: &DistanceMatrix, params: &FcParams) -> Result<FcKnnOutcome> {
    let denoised = denoise(dm, params)?;
    let mut warnings = Vec::new();
    if !denoised.separated {
        warnings.push(format!(
            "denoising reached r = {} without MC > t * d0 (MC = {}, d0 = {}); clustering the remaining dense subset",
            denoised.r_final, denoised.mc_final, denoised.d0_final
        ));
    }
    let fission = fission_subset(
        dm,
        denoised.dense_subset.clone(),
        params.threshold_mode.stop_rule(params.t),
    )?;
    let split_trace: Vec<SplitRecord> = fission.split_trace;

    let members = denoised.dense_subset.indices();
    let mut dense_labels = vec![0; members.len()];
    for (id, cluster) in fission.clusters.iter().enumerate() {
        for &i in cluster.indices() {
            let pos = members.binary_search(&i).expect("cluster member is in the dense subset");
            dense_labels[pos] = id;
        }
    }
    let mut partition = assign_remainder(dm, &denoised.dense_subset, &dense_labels, &denoised.removed)?;
    partition.split_trace = split_trace;
    Ok(FcKnnOutcome {
        partition,
        denoise: denoised,
        warnings,
    })
}
