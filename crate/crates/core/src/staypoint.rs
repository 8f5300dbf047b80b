//! Stay-point detection over a cleaned trajectory.
//!
//! A stay point is a contiguous run of fixes within `max_distance_m` of its
//! first fix whose dwell reaches `min_duration_s`. Runs never cross a
//! segment break, and dwell attributed across a missing-data gap is not
//! counted.

use std::ops::Range;

use serde::Serialize;

use crate::error::Result;
use crate::geo::{haversine_m, mean_point, GeoPoint};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StayPoint {
    pub centroid: GeoPoint,
    pub arrival: i64,
    pub departure: i64,
    /// Contiguous fix indices into the source trajectory.
    pub members: Range<usize>,
}

impl StayPoint {
    pub fn dwell_s(&self) -> i64 {
        self.departure - self.arrival
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StayPointParams {
    pub min_duration_s: i64,
    pub max_distance_m: f64,
}

impl Default for StayPointParams {
    fn default() -> Self {
        Self {
            min_duration_s: 1800,
            max_distance_m: 50.0,
        }
    }
}

pub fn detect_staypoints(t: &Trajectory, params: &StayPointParams) -> Result<Vec<StayPoint>> {
    scan(t, params, true)
}

fn scan(t: &Trajectory, params: &StayPointParams, respect_breaks: bool) -> Result<Vec<StayPoint>> {
    let blocked = |k: usize| respect_breaks && t.is_segment_break(k);
    let fixes = t.fixes();
    let n = fixes.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let anchor = fixes[i].point;
        let mut j = i + 1;
        while j < n
            && !blocked(j)
            && haversine_m(anchor, fixes[j].point) <= params.max_distance_m
        {
            j += 1;
        }
        let last = &fixes[j - 1];
        // The final member's own dwell counts unless it runs into missing data.
        let tail = if j < n && blocked(j) {
            (last.last_seen() - last.timestamp) as f64
        } else {
            last.duration()
        };
        let departure = last.timestamp + tail.floor() as i64;
        if departure - fixes[i].timestamp >= params.min_duration_s {
            let members: Vec<GeoPoint> = fixes[i..j].iter().map(|f| f.point).collect();
            out.push(StayPoint {
                centroid: mean_point(&members)?,
                arrival: fixes[i].timestamp,
                departure,
                members: i..j,
            });
        }
        i = j;
    }
    Ok(out)
}
