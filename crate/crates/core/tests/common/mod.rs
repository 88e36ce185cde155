//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use fission::DistanceMatrix;

/// Brute-force maximal crack of `members`: every pair of distances from every
/// reference point is a crack when no distance from that point lies strictly
/// between them. Returns `(row, low, value)`; ties resolve to the lowest row,
/// then the lowest sorted position.
pub fn brute_force_crack(dm: &DistanceMatrix, members: &[usize]) -> (usize, usize, f64) {
    let mut best: Option<(usize, usize, f64)> = None;
    for &x0 in members {
        let dists: Vec<f64> = members.iter().map(|&q| dm.get(x0, q)).collect();
        for &a in &dists {
            for &b in &dists {
                if b < a {
                    continue;
                }
                if dists.iter().any(|&c| c > a && c < b) {
                    continue;
                }
                let value = b - a;
                let low = if value > 0.0 {
                    dists.iter().filter(|&&c| c <= a).count() - 1
                } else {
                    // Zero-width crack between two copies of `a`.
                    if dists.iter().filter(|&&c| c == a).count() < 2 {
                        continue;
                    }
                    dists.iter().filter(|&&c| c < a).count()
                };
                let better = match best {
                    None => true,
                    Some((r, l, v)) => {
                        value > v || (value == v && (x0, low) < (r, l))
                    }
                };
                if better {
                    best = Some((x0, low, value));
                }
            }
        }
    }
    best.expect("at least two members")
}

/// Largest nearest-neighbour distance, by direct scan.
pub fn brute_d0(dm: &DistanceMatrix, members: &[usize]) -> f64 {
    members
        .iter()
        .map(|&p| {
            members
                .iter()
                .filter(|&&q| q != p)
                .map(|&q| dm.get(p, q))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Whether the graph joining points at distance `<= radius` is connected.
pub fn threshold_graph_connected(dm: &DistanceMatrix, members: &[usize], radius: f64) -> bool {
    let mut seen = vec![false; members.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..members.len() {
            if !seen[j] && dm.get(members[i], members[j]) <= radius {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Whether two labellings induce the same partition.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    let mut fwd = std::collections::HashMap::new();
    let mut back = std::collections::HashMap::new();
    a.len() == b.len()
        && a.iter().zip(b).all(|(&x, &y)| {
            *fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x
        })
}
