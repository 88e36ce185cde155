//! Clustering accuracy (optimal one-to-one matching) and class-weighted F-score.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub f_score: f64,
    pub predicted_k: usize,
    pub true_k: usize,
    /// Predicted cluster id -> true class id.
    pub matching: BTreeMap<usize, usize>,
}

/// Overlap counts `table[cluster][class]`.
fn contingency(pred: &[usize], truth: &[usize]) -> Result<(Vec<Vec<u64>>, usize, usize)> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Invalid("cannot evaluate an empty labelling".into()));
    }
    let kp = pred.iter().max().map_or(0, |m| m + 1);
    let kt = truth.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kt]; kp];
    for (&p, &t) in pred.iter().zip(truth) {
        table[p][t] += 1;
    }
    Ok((table, kp, kt))
}

/// Minimum-cost perfect assignment on a square matrix (Hungarian method with
/// potentials). Returns `assign[row] = column`.
fn min_cost_assignment(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based arrays; row/column 0 is the virtual start.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col = 0;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col] = true;
            let r = owner[col];
            let mut delta = i64::MAX;
            let mut next = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost[r - 1][j - 1] - u[r] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = col;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    next = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            col = next;
            if owner[col] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col];
            owner[col] = owner[prev];
            col = prev;
            if col == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        if owner[j] > 0 {
            assign[owner[j] - 1] = j - 1;
        }
    }
    assign
}

/// Fraction of points on which `pred` agrees with `truth` under the best
/// one-to-one relabelling of clusters to classes.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<(f64, BTreeMap<usize, usize>)> {
    let (table, kp, kt) = contingency(pred, truth)?;
    let size = kp.max(kt);
    let cost: Vec<Vec<i64>> = (0..size)
        .map(|i| {
            (0..size)
                .map(|j| match table.get(i).and_then(|r| r.get(j)) {
                    Some(&c) => -(c as i64),
                    None => 0,
                })
                .collect()
        })
        .collect();
    let assign = min_cost_assignment(&cost);
    let mut matched = 0u64;
    let mut matching = BTreeMap::new();
    for (cluster, &class) in assign.iter().enumerate().take(kp) {
        if class < kt {
            matched += table[cluster][class];
            matching.insert(cluster, class);
        }
    }
    Ok((matched as f64 / pred.len() as f64, matching))
}

/// `sum over classes (n_i / n) * max over clusters F(cluster, class)`.
pub fn f_score(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let (table, kp, kt) = contingency(pred, truth)?;
    let n = pred.len() as f64;
    let cluster_sizes: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
    let mut total = 0.0;
    for class in 0..kt {
        let class_size: u64 = (0..kp).map(|c| table[c][class]).sum();
        if class_size == 0 {
            continue;
        }
        let best = (0..kp)
            .filter(|&c| table[c][class] > 0)
            .map(|c| {
                let hit = table[c][class] as f64;
                let precision = hit / cluster_sizes[c] as f64;
                let recall = hit / class_size as f64;
                2.0 * precision * recall / (precision + recall)
            })
            .fold(0.0, f64::max);
        total += class_size as f64 / n * best;
    }
    Ok(total)
}

pub fn evaluate(pred: &[usize], truth: &[usize]) -> Result<EvalReport> {
    let (accuracy, matching) = accuracy(pred, truth)?;
    Ok(EvalReport {
        accuracy,
        f_score: f_score(pred, truth)?,
        predicted_k: pred.iter().collect::<std::collections::BTreeSet<_>>().len(),
        true_k: truth.iter().collect::<std::collections::BTreeSet<_>>().len(),
        matching,
    })
}
