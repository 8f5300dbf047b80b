use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{cluster_stats, find_optimal_cut_subset, scan_scores, OptimizationTrace, PoiThresholds, TemporalStats};
use crate::error::{invalid, Result};
use crate::geo::{mean_point, pairwise_matrix, project_equirectangular, GeoPoint};
use crate::hclust::{cut, linkage_complete, ClusterAssignment};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Global,
    Local,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poi {
    pub id: usize,
    pub tier: Tier,
    /// Enclosing global POI; `None` for global POIs and orphan local POIs.
    pub parent: Option<usize>,
    pub centroid: GeoPoint,
    /// Ascending fix indices into the source trajectory.
    pub members: Vec<usize>,
    pub stats: TemporalStats,
}

/// Global POIs, the local POIs nested under them, and local POIs that
/// belong to no global POI.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PoiTree {
    pub global_pois: Vec<Poi>,
    pub orphan_local_pois: Vec<Poi>,
    pub children: BTreeMap<usize, Vec<Poi>>,
}

impl PoiTree {
    pub fn is_empty(&self) -> bool {
        self.global_pois.is_empty() && self.orphan_local_pois.is_empty()
    }

    pub fn children_of(&self, global_id: usize) -> &[Poi] {
        self.children.get(&global_id).map_or(&[], Vec::as_slice)
    }

    /// Every local POI: children in global order, then orphans.
    pub fn local_pois(&self) -> impl Iterator<Item = &Poi> {
        self.global_pois
            .iter()
            .flat_map(|g| self.children_of(g.id))
            .chain(&self.orphan_local_pois)
    }

    /// The POIs that make up the local tier: every local POI plus the global
    /// POIs that have no children.
    pub fn local_tier(&self) -> Vec<&Poi> {
        let mut out: Vec<&Poi> = self
            .global_pois
            .iter()
            .flat_map(|g| {
                let kids = self.children_of(g.id);
                if kids.is_empty() {
                    vec![g]
                } else {
                    kids.iter().collect()
                }
            })
            .collect();
        out.extend(&self.orphan_local_pois);
        out
    }

    pub fn all_pois(&self) -> impl Iterator<Item = &Poi> {
        self.global_pois.iter().chain(self.local_pois())
    }

    pub fn find(&self, id: usize) -> Option<&Poi> {
        self.all_pois().find(|p| p.id == id)
    }
}

/// A POI tree plus the score trace of the top-level cut search.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub tree: PoiTree,
    pub global_trace: OptimizationTrace,
}

struct Partition {
    clusters: Vec<Vec<usize>>,
    stats: Vec<TemporalStats>,
    trace: OptimizationTrace,
}

/// Clusters the fixes in `subset` (ascending) at the cut maximizing the POI
/// score under `p`.
fn optimal_partition(t: &Trajectory, subset: &[usize], p: &PoiThresholds) -> Result<Partition> {
    if subset.len() < 2 {
        let single = ClusterAssignment::from_raw_labels(&vec![0; subset.len()]);
        let stats = cluster_stats(t, subset, &single);
        let trace = scan_scores(subset.len(), |_| stats.iter().filter(|s| s.satisfies(p)).count());
        return Ok(Partition {
            clusters: vec![subset.to_vec()],
            stats,
            trace,
        });
    }
    let points: Vec<GeoPoint> = subset.iter().map(|&i| t.fixes()[i].point).collect();
    let dend = linkage_complete(&pairwise_matrix(&project_equirectangular(&points)?)?)?;
    let trace = find_optimal_cut_subset(t, subset, &dend, p)?;
    let assignment = cut(&dend, trace.best_n)?;
    let stats = cluster_stats(t, subset, &assignment);
    let clusters = assignment
        .members()
        .into_iter()
        .map(|m| m.into_iter().map(|k| subset[k]).collect())
        .collect();
    Ok(Partition { clusters, stats, trace })
}

fn centroid(t: &Trajectory, members: &[usize]) -> Result<GeoPoint> {
    let pts: Vec<GeoPoint> = members.iter().map(|&i| t.fixes()[i].point).collect();
    mean_point(&pts)
}

fn distinct_locations(t: &Trajectory, members: &[usize]) -> usize {
    let mut keys: Vec<(u64, u64)> = members
        .iter()
        .map(|&i| {
            let p = t.fixes()[i].point;
            (p.lat().to_bits(), p.lon().to_bits())
        })
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

/// Two-tier POI extraction.
///
/// The top-level cut maximizes the number of clusters meeting `global`.
/// Each qualifying cluster becomes a global POI and its fixes are clustered
/// again under `local` to find its local POIs. Top-level clusters that fail
/// `global` but meet `local` become orphan local POIs as they are.
pub fn extract_pois(t: &Trajectory, global: &PoiThresholds, local: &PoiThresholds) -> Result<PoiTree> {
    Ok(extract_pois_traced(t, global, local)?.tree)
}

pub fn extract_pois_traced(t: &Trajectory, global: &PoiThresholds, local: &PoiThresholds) -> Result<Extraction> {
    if t.is_empty() {
        return Err(invalid("cannot extract POIs from an empty trajectory"));
    }
    let all: Vec<usize> = (0..t.len()).collect();
    let top = optimal_partition(t, &all, global)?;

    let mut tree = PoiTree::default();
    let mut next_id = 0;
    let mut orphans = Vec::new();
    for (members, stats) in top.clusters.into_iter().zip(top.stats) {
        if stats.satisfies(global) {
            let id = next_id;
            next_id += 1;
            tree.global_pois.push(Poi {
                id,
                tier: Tier::Global,
                parent: None,
                centroid: centroid(t, &members)?,
                members,
                stats,
            });
        } else if stats.satisfies(local) {
            orphans.push((members, stats));
        }
    }

    for g in &tree.global_pois {
        if g.members.len() < 2 || distinct_locations(t, &g.members) < 2 {
            continue;
        }
        let sub = optimal_partition(t, &g.members, local)?;
        let mut kids = Vec::new();
        for (members, stats) in sub.clusters.into_iter().zip(sub.stats) {
            if stats.satisfies(local) {
                kids.push(Poi {
                    id: next_id,
                    tier: Tier::Local,
                    parent: Some(g.id),
                    centroid: centroid(t, &members)?,
                    members,
                    stats,
                });
                next_id += 1;
            }
        }
        if !kids.is_empty() {
            tree.children.insert(g.id, kids);
        }
    }

    for (members, stats) in orphans {
        tree.orphan_local_pois.push(Poi {
            id: next_id,
            tier: Tier::Local,
            parent: None,
            centroid: centroid(t, &members)?,
            members,
            stats,
        });
        next_id += 1;
    }

    Ok(Extraction {
        tree,
        global_trace: top.trace,
    })
}
