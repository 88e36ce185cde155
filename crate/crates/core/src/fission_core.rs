//! Crack detection and the recursive fission loop.
//!
//! A subset is split at its maximal crack: the widest gap between two
//! adjacent entries of any sorted row of its distance matrix. Splitting stops
//! once every live subset has a maximal crack no larger than the
//! nearest-neighbour radius `d0`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metricspace::DistanceMatrix;

/// Sorted, duplicate-free list of point indices into a distance matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct Subset(Vec<usize>);

impl Subset {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Invalid("subset must be nonempty".into()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(
                "subset indices must be strictly ascending".into(),
            ));
        }
        Ok(Self(indices))
    }

    /// Every index `0..n`.
    pub fn full(n: usize) -> Self {
        Self((0..n).collect())
    }

    /// Build from arbitrary indices by sorting; fails on duplicates.
    pub fn from_unsorted(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        Self::new(indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> usize {
        self.0[0]
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }

    fn check_against(&self, dm: &DistanceMatrix) -> Result<()> {
        match self.0.last() {
            Some(&last) if last >= dm.len() => Err(Error::Invalid(format!(
                "subset index {last} out of range for {} points",
                dm.len()
            ))),
            _ => Ok(()),
        }
    }
}

/// Row-sorted view of a (sub)distance matrix and its adjacent differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GapTable {
    members: Vec<usize>,
    sorted_rows: Vec<Vec<f64>>,
    gaps: Vec<Vec<f64>>,
    order: Vec<Vec<usize>>,
}

impl GapTable {
    /// Point indices the rows refer to, ascending.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn sorted_rows(&self) -> &[Vec<f64>] {
        &self.sorted_rows
    }

    pub fn gaps(&self) -> &[Vec<f64>] {
        &self.gaps
    }

    /// `order[r][k]` is the point index at sorted position `k` of row `r`.
    pub fn order(&self) -> &[Vec<usize>] {
        &self.order
    }
}

/// Where a subset is fissured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrackLocation {
    /// Reference point index.
    pub row: usize,
    /// Sorted position of the lower distance of the crack pair.
    pub low: usize,
    /// Gap magnitude.
    pub value: f64,
    /// Lower distance of the crack pair; points at or below it go left.
    pub threshold: f64,
}

/// One executed split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitRecord {
    pub size: usize,
    pub mc: f64,
    pub d0: f64,
    pub row: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

/// Cluster assignment for every point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    pub labels: Vec<usize>,
    pub k: usize,
    pub split_trace: Vec<SplitRecord>,
}

impl Partition {
    /// Wrap labels that must be contiguous `0..k`.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Invalid("partition must cover at least one point".into()));
        }
        crate::metricspace::check_contiguous(&labels)?;
        let k = labels.iter().max().map_or(0, |m| m + 1);
        Ok(Self {
            labels,
            k,
            split_trace: Vec::new(),
        })
    }

    /// Label clusters `0..k` in order of their smallest member.
    pub fn from_clusters(n: usize, clusters: &[Subset]) -> Result<Self> {
        let mut sorted: Vec<&Subset> = clusters.iter().collect();
        sorted.sort_by_key(|c| c.first());
        let mut labels = vec![usize::MAX; n];
        for (id, cluster) in sorted.iter().enumerate() {
            for &i in cluster.indices() {
                if i >= n || labels[i] != usize::MAX {
                    return Err(Error::Invalid(format!(
                        "point {i} is out of range or in two clusters"
                    )));
                }
                labels[i] = id;
            }
        }
        if let Some(i) = labels.iter().position(|&l| l == usize::MAX) {
            return Err(Error::Invalid(format!("point {i} is in no cluster")));
        }
        Partition::from_labels(labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Members of each cluster, by cluster id.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }
}

/// Which `d0` the fission loop compares each maximal crack against.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopRule {
    /// `d0` of the whole input, computed once before the loop.
    #[default]
    Global,
    /// `d0(C)` of each candidate subset.
    PerSubset,
    /// `factor * d0` of the whole input, computed once.
    Scaled(f64),
    /// A caller-supplied threshold.
    Fixed(f64),
}

/// User-facing choice of stop rule; [`ThresholdMode::Scaled`] multiplies
/// the global `d0` by the tuning factor `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    Global,
    PerSubset,
    Scaled,
}

impl ThresholdMode {
    pub fn stop_rule(self, t: f64) -> StopRule {
        match self {
            ThresholdMode::Global => StopRule::Global,
            ThresholdMode::PerSubset => StopRule::PerSubset,
            ThresholdMode::Scaled => StopRule::Scaled(t),
        }
    }
}

impl std::str::FromStr for ThresholdMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(ThresholdMode::Global),
            "per-subset" => Ok(ThresholdMode::PerSubset),
            "scaled" => Ok(ThresholdMode::Scaled),
            _ => Err(Error::Invalid(format!(
                "unknown threshold mode {s:?} (expected global, per-subset or scaled)"
            ))),
        }
    }
}

impl std::fmt::Display for ThresholdMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ThresholdMode::Global => "global",
            ThresholdMode::PerSubset => "per-subset",
            ThresholdMode::Scaled => "scaled",
        })
    }
}

/// Sort every row of the restricted matrix and take adjacent differences.
pub fn gap_table(dm: &DistanceMatrix, sub: &Subset) -> Result<GapTable> {
    if sub.is_empty() {
        return Err(Error::Invalid("empty subset".into()));
    }
    sub.check_against(dm)?;
    let members = sub.indices().to_vec();
    let (order, sorted_rows): (Vec<Vec<usize>>, Vec<Vec<f64>>) = members
        .par_iter()
        .map(|&p| {
            let row = dm.row(p);
            let mut pairs: Vec<(f64, usize)> = members.iter().map(|&q| (row[q], q)).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            pairs.into_iter().map(|(d, q)| (q, d)).unzip()
        })
        .unzip();
    let gaps = sorted_rows
        .iter()
        .map(|r| r.windows(2).map(|w| w[1] - w[0]).collect())
        .collect();
    Ok(GapTable {
        members,
        sorted_rows,
        gaps,
        order,
    })
}

/// Largest entry of the gap table; ties go to the lowest row, then the lowest
/// sorted position.
pub fn maximal_crack(gt: &GapTable) -> Result<CrackLocation> {
    if gt.members.len() < 2 {
        return Err(Error::NoCrack(gt.members.len()));
    }
    let mut best: Option<CrackLocation> = None;
    for (r, gaps) in gt.gaps.iter().enumerate() {
        for (k, &g) in gaps.iter().enumerate() {
            if best.is_none_or(|b| g > b.value) {
                best = Some(CrackLocation {
                    row: gt.members[r],
                    low: k,
                    value: g,
                    threshold: gt.sorted_rows[r][k],
                });
            }
        }
    }
    Ok(best.expect("at least one gap"))
}

/// Maximal crack of a subset without materialising the gap table.
///
/// Returns the same location as `maximal_crack(gap_table(..))`: sorted
/// values do not depend on how equal distances are ordered, so sorting
/// distances alone yields identical gaps and positions.
pub fn subset_max_crack(dm: &DistanceMatrix, sub: &Subset) -> Result<CrackLocation> {
    sub.check_against(dm)?;
    let members = sub.indices();
    if members.len() < 2 {
        return Err(Error::NoCrack(members.len()));
    }
    let per_row: Vec<(usize, f64, f64)> = members
        .par_iter()
        .map_init(
            || Vec::with_capacity(members.len()),
            |buf, &p| {
                let row = dm.row(p);
                buf.clear();
                buf.extend(members.iter().map(|&q| row[q]));
                buf.sort_unstable_by(f64::total_cmp);
                let mut low = 0;
                let mut value = buf[1] - buf[0];
                for k in 1..buf.len() - 1 {
                    let g = buf[k + 1] - buf[k];
                    if g > value {
                        value = g;
                        low = k;
                    }
                }
                (low, value, buf[low])
            },
        )
        .collect();
    let mut best = 0;
    for (r, cand) in per_row.iter().enumerate().skip(1) {
        if cand.1 > per_row[best].1 {
            best = r;
        }
    }
    let (low, value, threshold) = per_row[best];
    Ok(CrackLocation {
        row: members[best],
        low,
        value,
        threshold,
    })
}

/// Split `sub` into the points within `cl.threshold` of `cl.row` and the rest.
pub fn split_at_crack(
    sub: &Subset,
    dm: &DistanceMatrix,
    cl: &CrackLocation,
) -> Result<(Subset, Subset)> {
    sub.check_against(dm)?;
    if !sub.contains(cl.row) {
        return Err(Error::InconsistentCrack(format!(
            "reference point {} is not in the subset",
            cl.row
        )));
    }
    let row = dm.row(cl.row);
    let mut at_threshold = false;
    let mut above: Option<f64> = None;
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for &q in sub.indices() {
        let d = row[q];
        if d <= cl.threshold {
            at_threshold |= d == cl.threshold;
            left.push(q);
        } else {
            above = Some(above.map_or(d, |a: f64| a.min(d)));
            right.push(q);
        }
    }
    let upper = above.ok_or_else(|| {
        Error::InconsistentCrack(format!(
            "no distance from point {} exceeds {}",
            cl.row, cl.threshold
        ))
    })?;
    if !at_threshold || upper - cl.threshold != cl.value {
        return Err(Error::InconsistentCrack(format!(
            "crack at point {} (threshold {}, value {}) does not match the matrix",
            cl.row, cl.threshold, cl.value
        )));
    }
    Ok((Subset(left), Subset(right)))
}

/// Largest nearest-neighbour distance inside `sub`.
pub fn d_zero(dm: &DistanceMatrix, sub: &Subset) -> Result<f64> {
    sub.check_against(dm)?;
    let members = sub.indices();
    if members.len() < 2 {
        return Err(Error::Invalid(format!(
            "d0 needs at least 2 points, got {}",
            members.len()
        )));
    }
    Ok(members
        .par_iter()
        .map(|&p| {
            let row = dm.row(p);
            members
                .iter()
                .filter(|&&q| q != p)
                .map(|&q| row[q])
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max))
}

/// Clusters produced by [`fission_subset`].
#[derive(Debug, Clone, PartialEq)]
pub struct FissionOutcome {
    pub clusters: Vec<Subset>,
    pub split_trace: Vec<SplitRecord>,
}

struct Live {
    subset: Subset,
    crack: Option<CrackLocation>,
    threshold: f64,
}

impl Live {
    fn new(dm: &DistanceMatrix, subset: Subset, rule: StopRule, global: f64) -> Result<Self> {
        if subset.len() < 2 {
            return Ok(Self {
                subset,
                crack: None,
                threshold: global,
            });
        }
        let threshold = match rule {
            StopRule::PerSubset => d_zero(dm, &subset)?,
            _ => global,
        };
        let crack = subset_max_crack(dm, &subset)?;
        Ok(Self {
            subset,
            crack: Some(crack),
            threshold,
        })
    }

    fn splittable(&self) -> bool {
        self.crack.is_some_and(|c| c.value > self.threshold)
    }
}

/// Run the fission loop on the points of `root`.
///
/// Under [`StopRule::Global`] the threshold is `d0(root)`, under
/// [`StopRule::Scaled`] a multiple of it. Among subsets
/// whose maximal crack exceeds their threshold, the largest is split first
/// (ties: lowest smallest index). Subsets of fewer than two points are final.
pub fn fission_subset(dm: &DistanceMatrix, root: Subset, rule: StopRule) -> Result<FissionOutcome> {
    root.check_against(dm)?;
    let global = match rule {
        StopRule::Fixed(t) => t,
        _ if root.len() < 2 => 0.0,
        StopRule::Scaled(factor) => factor * d_zero(dm, &root)?,
        StopRule::Global | StopRule::PerSubset => d_zero(dm, &root)?,
    };
    let cap = root.len().saturating_sub(1);
    let mut live = vec![Live::new(dm, root, rule, global)?];
    let mut trace = Vec::new();

    loop {
        let pick = live
            .iter()
            .enumerate()
            .filter(|(_, l)| l.splittable())
            .min_by_key(|(_, l)| (std::cmp::Reverse(l.subset.len()), l.subset.first()))
            .map(|(i, _)| i);
        let Some(idx) = pick else { break };
        if trace.len() >= cap {
            return Err(Error::NonTermination(trace.len()));
        }
        let current = live.swap_remove(idx);
        let crack = current.crack.expect("splittable subsets carry a crack");
        let (left, right) = split_at_crack(&current.subset, dm, &crack)?;
        trace.push(SplitRecord {
            size: current.subset.len(),
            mc: crack.value,
            d0: current.threshold,
            row: crack.row,
            threshold: crack.threshold,
            left: left.len(),
            right: right.len(),
        });
        live.push(Live::new(dm, left, rule, global)?);
        live.push(Live::new(dm, right, rule, global)?);
    }

    let mut clusters: Vec<Subset> = live.into_iter().map(|l| l.subset).collect();
    clusters.sort_by_key(Subset::first);
    Ok(FissionOutcome {
        clusters,
        split_trace: trace,
    })
}

/// Fission clustering of every point in `dm`.
pub fn fission_cluster(dm: &DistanceMatrix, rule: StopRule) -> Result<Partition> {
    if dm.is_empty() {
        return Err(Error::Invalid("empty distance matrix".into()));
    }
    let outcome = fission_subset(dm, Subset::full(dm.len()), rule)?;
    let mut partition = Partition::from_clusters(dm.len(), &outcome.clusters)?;
    partition.split_trace = outcome.split_trace;
    Ok(partition)
}
