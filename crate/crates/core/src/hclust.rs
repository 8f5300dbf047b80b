//! Complete-linkage agglomerative clustering and dendrogram cuts.
//!
//! [`linkage_complete`] runs the nearest-neighbor-chain algorithm, which is
//! O(n²) in time on top of the O(n²) distance matrix. Merges are then sorted
//! by height so that undoing the last `n - 1` merges yields the `n`-cluster
//! partition.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geo::{condensed_index, DistanceMatrix};

/// One agglomeration step. Node ids below `leaf_count` are leaves; merge `k`
/// creates node `leaf_count + k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    merges: Vec<Merge>,
    leaf_count: usize,
}

impl Dendrogram {
    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    /// Partition obtained by undoing the last `n - 1` merges.
    pub fn cut(&self, n: usize) -> Result<ClusterAssignment> {
        cut(self, n)
    }
}

/// Cluster label per point; labels are `0..n` ordered by each cluster's
/// smallest point index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    labels: Vec<usize>,
    n: usize,
}

impl ClusterAssignment {
    /// Relabels arbitrary ids into canonical order (first occurrence first).
    pub fn from_raw_labels(raw: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let labels = raw
            .iter()
            .map(|r| {
                let next = map.len();
                *map.entry(*r).or_insert(next)
            })
            .collect();
        Self { labels, n: map.len() }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn cluster_count(&self) -> usize {
        self.n
    }

    /// Point indices of each cluster, in label order; each list ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// Complete-linkage dendrogram over `d`.
///
/// Ties between equally near clusters go to the lower index, and merges of
/// equal height keep the order in which the chain discovered them.
pub fn linkage_complete(d: &DistanceMatrix) -> Result<Dendrogram> {
    let n = d.size();
    if n < 2 {
        return Err(invalid(format!("linkage needs at least 2 points, got {n}")));
    }
    let mut dist = d.entries().to_vec();
    let at = |i: usize, j: usize| if i < j { condensed_index(n, i, j) } else { condensed_index(n, j, i) };

    let mut active = vec![true; n];
    let mut raw: Vec<(usize, usize, f64)> = Vec::with_capacity(n - 1);
    let mut chain: Vec<usize> = Vec::with_capacity(n);

    for _ in 0..n - 1 {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).expect("an active cluster remains"));
        }
        let (a, b, height) = loop {
            let a = *chain.last().unwrap();
            let prev = (chain.len() >= 2).then(|| chain[chain.len() - 2]);
            let mut best = prev;
            let mut best_d = prev.map_or(f64::INFINITY, |p| dist[at(a, p)]);
            for x in 0..n {
                if x == a || !active[x] {
                    continue;
                }
                let dx = dist[at(a, x)];
                if dx < best_d || best.is_none() {
                    best = Some(x);
                    best_d = dx;
                }
            }
            let c = best.expect("at least two active clusters");
            if Some(c) == prev {
                chain.truncate(chain.len() - 2);
                break (a, c, best_d);
            }
            chain.push(c);
        };
        let (keep, drop) = (a.min(b), a.max(b));
        active[drop] = false;
        for x in 0..n {
            if active[x] && x != keep {
                let merged = dist[at(keep, x)].max(dist[at(drop, x)]);
                dist[at(keep, x)] = merged;
            }
        }
        raw.push((keep, drop, height));
    }

    // stable: equal heights keep discovery order, so children precede parents
    raw.sort_by(|p, q| p.2.total_cmp(&q.2));

    let mut uf = UnionFind::new(n);
    let mut node_of = (0..n).collect::<Vec<_>>();
    let mut size_of = vec![1usize; n];
    let merges = raw
        .into_iter()
        .enumerate()
        .map(|(k, (x, y, height))| {
            let (rx, ry) = (uf.find(x), uf.find(y));
            let (nx, ny) = (node_of[rx], node_of[ry]);
            let size = size_of[rx] + size_of[ry];
            let root = rx.min(ry);
            uf.parent[rx.max(ry)] = root;
            node_of[root] = n + k;
            size_of[root] = size;
            Merge {
                left: nx.min(ny),
                right: nx.max(ny),
                height,
                size,
            }
        })
        .collect();

    Ok(Dendrogram {
        merges,
        leaf_count: n,
    })
}

/// Cuts `dend` into exactly `n` clusters.
pub fn cut(dend: &Dendrogram, n: usize) -> Result<ClusterAssignment> {
    let leaves = dend.leaf_count;
    if n == 0 || n > leaves {
        return Err(invalid(format!("cluster count {n} outside 1..={leaves}")));
    }
    let mut uf = UnionFind::new(2 * leaves - 1);
    for (k, m) in dend.merges[..leaves - n].iter().enumerate() {
        uf.parent[m.left] = leaves + k;
        uf.parent[m.right] = leaves + k;
    }
    let mut label_of_root = vec![usize::MAX; 2 * leaves - 1];
    let mut next = 0;
    let labels = (0..leaves)
        .map(|i| {
            let r = uf.find(i);
            if label_of_root[r] == usize::MAX {
                label_of_root[r] = next;
                next += 1;
            }
            label_of_root[r]
        })
        .collect();
    Ok(ClusterAssignment { labels, n })
}
