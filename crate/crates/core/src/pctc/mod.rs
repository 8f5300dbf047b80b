//! POI clustering with temporal constraints.
//!
//! A cluster of fixes is a POI at a tier when it is visited on a large enough
//! fraction of the observation days (`f_vd`) and, on the days it is visited,
//! holds the user for long enough on average (`d_vd`). The POI score of a
//! dendrogram cut is the number of its clusters that qualify; the search walks
//! cuts from coarse to fine and keeps the best one.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::hclust::{cut, ClusterAssignment, Dendrogram};
use crate::trajectory::Trajectory;

mod export;
mod extract;

pub use export::{to_geojson, PoiDocument, PoiRecord, DOCUMENT_FORMAT, DOCUMENT_VERSION};
pub use extract::{extract_pois, extract_pois_traced, Extraction, Poi, PoiTree, Tier};

/// Consecutive cut sizes without a new best score before the search stops.
pub const STAGNATION_LIMIT: usize = 50;
/// The search stops once the score falls this far below the best seen.
pub const DROP_LIMIT: usize = 10;

/// Minimum visit-day fraction and minimum mean dwell minutes per visit day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoiThresholds {
    pub f_vd_min: f64,
    pub d_vd_min: f64,
}

impl PoiThresholds {
    pub const GLOBAL_DEFAULT: Self = Self {
        f_vd_min: 0.63,
        d_vd_min: 120.0,
    };
    pub const LOCAL_DEFAULT: Self = Self {
        f_vd_min: 0.13,
        d_vd_min: 30.0,
    };

    pub fn new(f_vd_min: f64, d_vd_min: f64) -> Result<Self> {
        // f_vd_min may exceed 1 to express an unsatisfiable constraint
        if !(f_vd_min >= 0.0) || !(d_vd_min >= 0.0) || !f_vd_min.is_finite() || !d_vd_min.is_finite() {
            return Err(invalid(format!("invalid thresholds ({f_vd_min}, {d_vd_min})")));
        }
        Ok(Self { f_vd_min, d_vd_min })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalStats {
    pub visit_days: usize,
    /// Fraction of observation days with at least one member fix.
    pub f_vd: f64,
    pub total_duration_min: f64,
    /// Mean dwell minutes per visit day.
    pub d_vd: f64,
}

impl TemporalStats {
    fn from_parts(visit_days: usize, total_duration_s: f64, observation_days: usize) -> Self {
        let total_duration_min = total_duration_s / 60.0;
        Self {
            visit_days,
            f_vd: if observation_days == 0 {
                0.0
            } else {
                visit_days as f64 / observation_days as f64
            },
            total_duration_min,
            d_vd: if visit_days == 0 {
                0.0
            } else {
                total_duration_min / visit_days as f64
            },
        }
    }

    pub fn satisfies(&self, p: &PoiThresholds) -> bool {
        self.f_vd >= p.f_vd_min && self.d_vd >= p.d_vd_min
    }
}

/// Visit-day and dwell statistics of a set of fixes.
pub fn temporal_stats(t: &Trajectory, members: &[usize]) -> Result<TemporalStats> {
    if members.is_empty() {
        return Err(invalid("temporal statistics of an empty member set"));
    }
    let fixes = t.fixes();
    let mut days = std::collections::BTreeSet::new();
    let mut total = 0.0;
    for &i in members {
        let f = fixes
            .get(i)
            .ok_or_else(|| invalid(format!("member index {i} out of range")))?;
        days.insert(t.day_of(f.timestamp));
        total += f.duration();
    }
    Ok(TemporalStats::from_parts(days.len(), total, t.observation_days()))
}

/// Statistics of every cluster in `assignment`, where point `k` of the
/// assignment is fix `subset[k]`. `subset` must be ascending.
pub(crate) fn cluster_stats(t: &Trajectory, subset: &[usize], assignment: &ClusterAssignment) -> Vec<TemporalStats> {
    let n = assignment.cluster_count();
    let mut last_day = vec![i64::MIN; n];
    let mut visit_days = vec![0usize; n];
    let mut total = vec![0.0f64; n];
    let fixes = t.fixes();
    for (k, &label) in assignment.labels().iter().enumerate() {
        let fix = &fixes[subset[k]];
        // fixes are time ordered, so days are non-decreasing within a cluster
        let day = t.day_of(fix.timestamp);
        if day != last_day[label] {
            last_day[label] = day;
            visit_days[label] += 1;
        }
        total[label] += fix.duration();
    }
    (0..n)
        .map(|l| TemporalStats::from_parts(visit_days[l], total[l], t.observation_days()))
        .collect()
}

fn score_subset(t: &Trajectory, subset: &[usize], c: &ClusterAssignment, p: &PoiThresholds) -> usize {
    cluster_stats(t, subset, c).iter().filter(|s| s.satisfies(p)).count()
}

/// Number of clusters in `c` that satisfy `p`. `c` labels every fix of `t`.
pub fn poi_score(t: &Trajectory, c: &ClusterAssignment, p: &PoiThresholds) -> usize {
    let all: Vec<usize> = (0..t.len()).collect();
    score_subset(t, &all, c, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Every cut size up to the point count was evaluated.
    Exhausted,
    /// The score returned to zero after having been positive.
    ZeroScore,
    /// No new best score for [`STAGNATION_LIMIT`] consecutive cut sizes.
    Stagnation50,
    /// The score fell [`DROP_LIMIT`] or more below the best so far.
    DropBy10,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub scores: BTreeMap<usize, usize>,
    pub best_n: usize,
    pub termination: Termination,
}

impl OptimizationTrace {
    pub fn best_score(&self) -> usize {
        self.scores.get(&self.best_n).copied().unwrap_or(0)
    }
}

/// Walks cut sizes `2..=max_n`, stopping early per the termination rules.
/// `max_n < 2` yields a single-cluster trace scored at `n = 1`.
pub fn scan_scores<F>(max_n: usize, mut score: F) -> OptimizationTrace
where
    F: FnMut(usize) -> usize,
{
    let mut scores = BTreeMap::new();
    if max_n < 2 {
        scores.insert(1, score(1));
        return OptimizationTrace {
            scores,
            best_n: 1,
            termination: Termination::Exhausted,
        };
    }
    let mut best_n = 2;
    let mut best = 0;
    let mut since_best = 0;
    let mut seen_nonzero = false;
    for n in 2..=max_n {
        let s = score(n);
        scores.insert(n, s);
        if n == 2 || s > best {
            best = s;
            best_n = n;
            since_best = 0;
        } else {
            since_best += 1;
        }
        let stop = if s == 0 && seen_nonzero {
            Some(Termination::ZeroScore)
        } else if best >= s + DROP_LIMIT {
            Some(Termination::DropBy10)
        } else if since_best >= STAGNATION_LIMIT {
            Some(Termination::Stagnation50)
        } else {
            None
        };
        seen_nonzero |= s > 0;
        if let Some(termination) = stop {
            return OptimizationTrace {
                scores,
                best_n,
                termination,
            };
        }
    }
    OptimizationTrace {
        scores,
        best_n,
        termination: Termination::Exhausted,
    }
}

pub(crate) fn find_optimal_cut_subset(
    t: &Trajectory,
    subset: &[usize],
    dend: &Dendrogram,
    p: &PoiThresholds,
) -> Result<OptimizationTrace> {
    if dend.leaf_count() != subset.len() {
        return Err(invalid(format!(
            "dendrogram has {} leaves for {} fixes",
            dend.leaf_count(),
            subset.len()
        )));
    }
    let mut failure = None;
    let trace = scan_scores(dend.leaf_count(), |n| match cut(dend, n) {
        Ok(c) => score_subset(t, subset, &c, p),
        Err(e) => {
            failure.get_or_insert(e);
            0
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(trace),
    }
}

/// Best cut of a dendrogram built over all fixes of `t`.
pub fn find_optimal_cut(t: &Trajectory, dend: &Dendrogram, p: &PoiThresholds) -> Result<OptimizationTrace> {
    let all: Vec<usize> = (0..t.len()).collect();
    find_optimal_cut_subset(t, &all, dend, p)
}
