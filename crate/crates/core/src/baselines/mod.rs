//! Stay-point based clusterers used for comparison: DBSCAN, OPTICS, and
//! complete linkage cut by the Davies-Bouldin index or the silhouette
//! coefficient. All of them cluster stay-point centroids, and every non-noise
//! cluster counts as a POI.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geo::{pairwise_matrix, project_equirectangular, GeoPoint};
use crate::hclust::linkage_complete;
use crate::staypoint::{detect_staypoints, StayPoint, StayPointParams};
use crate::trajectory::Trajectory;

mod density;
mod validity;

pub use density::{
    core_flags, dbscan, dbscan_by, extract_dbscan, extract_xi, optics, optics_by, optics_clusters, OpticsOrdering,
    DEFAULT_XI,
};
pub use validity::{db_index, optimize_linkage, silhouette, silhouette_samples, Criterion};

/// Label of points that belong to no cluster.
pub const NOISE: i64 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    /// Stay-point minimum dwell (Δ), seconds.
    pub delta_s: i64,
    /// Stay-point radius (θ), meters.
    pub theta_m: f64,
    /// DBSCAN reachability (ε), meters.
    pub epsilon_m: f64,
    pub xi: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            delta_s: 1800,
            theta_m: 50.0,
            epsilon_m: 50.0,
            xi: DEFAULT_XI,
        }
    }
}

impl BaselineParams {
    pub fn staypoint_params(&self) -> StayPointParams {
        StayPointParams {
            min_duration_s: self.delta_s,
            max_distance_m: self.theta_m,
        }
    }

    /// `max(2, log10(n))`, rounded half up.
    pub fn min_pts(n: usize) -> usize {
        if n == 0 {
            return 2;
        }
        ((n as f64).log10() + 0.5).floor().max(2.0) as usize
    }

    pub fn cluster_cap(n: usize) -> usize {
        n / 2
    }
}

/// Per-point cluster ids with [`NOISE`] for unclustered points. Non-noise ids
/// are `0..cluster_count`, numbered by first occurrence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledClusters {
    labels: Vec<i64>,
    cluster_count: usize,
}

impl LabeledClusters {
    /// Renumbers arbitrary non-negative ids; negative ids become noise.
    pub fn from_labels(raw: &[i64]) -> Self {
        let mut map = std::collections::HashMap::new();
        let labels = raw
            .iter()
            .map(|&r| {
                if r < 0 {
                    NOISE
                } else {
                    let next = map.len() as i64;
                    *map.entry(r).or_insert(next)
                }
            })
            .collect();
        Self {
            labels,
            cluster_count: map.len(),
        }
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn cluster_count(&self) -> usize {
        self.cluster_count
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.cluster_count];
        for (i, &l) in self.labels.iter().enumerate() {
            if l >= 0 {
                out[l as usize].push(i);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    Dbscan,
    Optics,
    /// Complete linkage cut at the minimum Davies-Bouldin index.
    Db,
    /// Complete linkage cut at the maximum silhouette coefficient.
    Sc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineOutput {
    pub staypoints: Vec<StayPoint>,
    /// One label per stay point.
    pub clusters: LabeledClusters,
}

impl BaselineOutput {
    pub fn poi_count(&self) -> usize {
        self.clusters.cluster_count()
    }
}

/// Clusters already detected stay points.
pub fn cluster_staypoints(
    staypoints: &[StayPoint],
    method: BaselineMethod,
    params: &BaselineParams,
) -> Result<LabeledClusters> {
    let n = staypoints.len();
    let min_pts = BaselineParams::min_pts(n);
    match method {
        BaselineMethod::Dbscan => Ok(dbscan(staypoints, params.epsilon_m, min_pts)),
        BaselineMethod::Optics => Ok(optics_clusters(staypoints, min_pts, params.xi)),
        BaselineMethod::Db | BaselineMethod::Sc => {
            if n < 4 {
                // too few stay points for any cut to compare; keep them together
                log::debug!("{n} stay points, skipping the validity search");
                return Ok(LabeledClusters::from_labels(&vec![0; n]));
            }
            let centroids: Vec<GeoPoint> = staypoints.iter().map(|s| s.centroid).collect();
            let planar = project_equirectangular(&centroids)?;
            let dend = linkage_complete(&pairwise_matrix(&planar)?)?;
            let criterion = if method == BaselineMethod::Db {
                Criterion::DaviesBouldin
            } else {
                Criterion::Silhouette
            };
            optimize_linkage(&planar, &dend, criterion, BaselineParams::cluster_cap(n))
        }
    }
}

/// Stay-point detection followed by `method`.
pub fn run_baseline(t: &Trajectory, method: BaselineMethod, params: &BaselineParams) -> Result<BaselineOutput> {
    let staypoints = detect_staypoints(t, &params.staypoint_params())?;
    let clusters = cluster_staypoints(&staypoints, method, params)?;
    Ok(BaselineOutput { staypoints, clusters })
}
