//! Builders for small hand-planned trajectories.

use crate::geo::GeoPoint;
use crate::trajectory::{preprocess, Fix, PreprocessConfig, Trajectory};

pub const T0: i64 = 1_364_342_400; // 2013-03-27T00:00:00Z

pub fn base() -> GeoPoint {
    GeoPoint::new(43.7044, -72.2887).unwrap()
}

/// A stay at `(east, north)` meters from [`base`] on `day`, starting at
/// `start_min` after midnight UTC and sampled every 10 minutes.
#[derive(Debug, Clone, Copy)]
pub struct Visit {
    pub day: i64,
    pub start_min: i64,
    pub minutes: i64,
    pub east: f64,
    pub north: f64,
}

pub fn visit(day: i64, start_min: i64, minutes: i64, east: f64, north: f64) -> Visit {
    Visit { day, start_min, minutes, east, north }
}

/// Builds and preprocesses a trajectory from visits. Each member sample is
/// jittered by up to a meter so no run collapses, and every visit is followed
/// 10 minutes after its last sample by a one-off fix 5+ km away, so each
/// member fix carries exactly 10 minutes of dwell. Returns the trajectory and
/// the fix indices of each visit.
pub fn planned(visits: &[Visit]) -> (Trajectory, Vec<Vec<usize>>) {
    let mut raw: Vec<(i64, f64, f64, Option<usize>)> = Vec::new();
    for (v_idx, v) in visits.iter().enumerate() {
        let start = T0 + v.day * 86_400 + v.start_min * 60;
        let samples = v.minutes / 10;
        for k in 0..samples {
            let j = ((k * 7 + v_idx as i64 * 3) % 5) as f64 * 0.2;
            raw.push((start + k * 600, v.east + j, v.north - j, Some(v_idx)));
        }
        let away = 5_000.0 + 37.0 * v_idx as f64;
        raw.push((start + samples * 600, away, away, None));
    }
    raw.sort_by_key(|r| r.0);
    let fixes: Vec<Fix> = raw
        .iter()
        .map(|&(ts, e, n, _)| Fix::new(ts, base().offset_m(e, n).unwrap(), 10.0).unwrap())
        .collect();
    let t = Trajectory::from_fixes("planned", fixes, 0);
    assert_eq!(t.len(), raw.len(), "planned visits must not share timestamps");
    let (t, report) = preprocess(&t, &PreprocessConfig::default()).unwrap();
    assert_eq!(report.removed(), 0, "planned visits must not overlap");
    let mut members = vec![Vec::new(); visits.len()];
    for (i, r) in raw.iter().enumerate() {
        if let Some(v) = r.3 {
            members[v].push(i);
        }
    }
    (t, members)
}
