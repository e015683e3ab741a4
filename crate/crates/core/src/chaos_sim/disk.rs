//! Disk-graph subgraph counts.
//!
//! Two points are adjacent when their Euclidean distance is strictly
//! positive and strictly less than the radius (coincident points are never
//! adjacent, so grid-mode multiplicities cause no loops). Counts are over
//! unordered vertex subsets inducing the pattern; multiplicities multiply.
//!
//! A cell-bucket accelerator handles the large-N regimes; the brute-force
//! subset scan is kept as the oracle for small configurations.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::PoissonSample;

/// Induced patterns counted by [`disk_graph_stat`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    /// Adjacent pairs.
    Edge,
    /// Triples with all three pairs adjacent.
    Triangle,
    /// Triples inducing a path: exactly two adjacent pairs.
    Path3,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

fn adjacent(s: &PoissonSample, i: usize, j: usize, r2: f64) -> bool {
    let d2 = dist2(s.site(i), s.site(j));
    d2 > 0.0 && d2 < r2
}

/// Count induced occurrences of `pattern` in the disk graph of radius `r`.
pub fn disk_graph_stat(s: &PoissonSample, r: f64, pattern: Pattern) -> f64 {
    let n = s.sites();
    if n == 0 || r <= 0.0 {
        return 0.0;
    }
    // Bucket sites into cells of side r; neighbours live in adjacent cells.
    let dim = s.dim();
    let mut cells: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let key: Vec<i64> = s.site(i).iter().map(|&x| (x / r).floor() as i64).collect();
        cells.entry(key).or_default().push(i);
    }
    let mut adj: Vec<Vec<usize>> = alloc::vec![Vec::new(); n];
    let r2 = r * r;
    let mut offsets: Vec<Vec<i64>> = alloc::vec![Vec::new()];
    for _ in 0..dim {
        let mut next = Vec::new();
        for o in &offsets {
            for d in -1..=1i64 {
                let mut v = o.clone();
                v.push(d);
                next.push(v);
            }
        }
        offsets = next;
    }
    for (key, members) in &cells {
        for off in &offsets {
            let nkey: Vec<i64> = key.iter().zip(off).map(|(&k, &d)| k + d).collect();
            if nkey < *key {
                continue; // each unordered cell pair once
            }
            let Some(others) = cells.get(&nkey) else { continue };
            for &i in members {
                for &j in others {
                    if (nkey == *key && j <= i) || !adjacent(s, i, j, r2) {
                        continue;
                    }
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
    }
    match pattern {
        Pattern::Edge => {
            let mut count = 0.0;
            for i in 0..n {
                for &j in &adj[i] {
                    if j > i {
                        count += s.mult(i) * s.mult(j);
                    }
                }
            }
            count
        }
        Pattern::Triangle => {
            let mut count = 0.0;
            for i in 0..n {
                for (a, &j) in adj[i].iter().enumerate() {
                    if j <= i {
                        continue;
                    }
                    for &k in adj[i].iter().skip(a + 1) {
                        if k <= i || k == j {
                            continue;
                        }
                        if adjacent(s, j, k, r2) {
                            count += s.mult(i) * s.mult(j) * s.mult(k);
                        }
                    }
                }
            }
            count
        }
        Pattern::Path3 => {
            // centre vertex with two neighbours that are not adjacent;
            // multiplicity m at the centre also yields paths through each
            // of the m coincident points.
            let mut count = 0.0;
            for c in 0..n {
                let nb = &adj[c];
                for (a, &u) in nb.iter().enumerate() {
                    for &w in nb.iter().skip(a + 1) {
                        if w == u {
                            continue;
                        }
                        if !adjacent(s, u, w, r2) {
                            count += s.mult(c) * s.mult(u) * s.mult(w);
                        }
                    }
                }
            }
            count
        }
    }
}

/// Edge count for 1-d samples whose sites are already in coordinate order
/// (see `sample_into_sorted`): a two-pointer sweep, O(sites + edges).
pub fn edge_count_sorted(s: &PoissonSample, r: f64) -> f64 {
    debug_assert_eq!(s.dim(), 1);
    let n = s.sites();
    let mut count = 0.0;
    let mut lo = 0usize;
    for i in 0..n {
        let x = s.site(i)[0];
        while s.site(lo)[0] <= x - r {
            lo += 1;
        }
        for j in lo..i {
            debug_assert!(s.site(j)[0] <= x);
            if x - s.site(j)[0] > 0.0 {
                count += s.mult(i) * s.mult(j);
            }
        }
    }
    count
}

/// Brute-force oracle: scan all pairs/triples.
pub fn disk_graph_stat_direct(s: &PoissonSample, r: f64, pattern: Pattern) -> f64 {
    let n = s.sites();
    let r2 = r * r;
    match pattern {
        Pattern::Edge => {
            let mut count = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    if adjacent(s, i, j, r2) {
                        count += s.mult(i) * s.mult(j);
                    }
                }
            }
            count
        }
        Pattern::Triangle | Pattern::Path3 => {
            let mut count = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    for k in (j + 1)..n {
                        let e1 = adjacent(s, i, j, r2);
                        let e2 = adjacent(s, j, k, r2);
                        let e3 = adjacent(s, i, k, r2);
                        let edges = e1 as u32 + e2 as u32 + e3 as u32;
                        let hit = match pattern {
                            Pattern::Triangle => edges == 3,
                            Pattern::Path3 => edges == 2,
                            Pattern::Edge => unreachable!(),
                        };
                        if hit {
                            count += s.mult(i) * s.mult(j) * s.mult(k);
                        }
                    }
                }
            }
            count
        }
    }
}
