//! Seeded synthetic trajectories with known POIs.
//!
//! A [`Persona`] plants places at metric offsets from an origin and gives
//! each a weekly visit schedule. The user is sampled on a fixed clock while
//! at a place or walking between places; at other times there is no data.
//! Local places nest inside a global place and take precedence while visited.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Datelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::pctc::{Poi, PoiTree, TemporalStats, Tier};
use crate::trajectory::{Fix, Trajectory};

pub mod presets;

const DAY_S: i64 = 86_400;

/// 2013-03-25T00:00:00Z, a Monday.
pub const DEFAULT_START: i64 = 1_364_169_600;

fn default_user() -> String {
    "synthetic".into()
}
fn default_start() -> i64 {
    DEFAULT_START
}
fn default_interval() -> i64 {
    600
}
fn default_sigma() -> f64 {
    10.0
}
fn default_accuracy() -> f64 {
    10.0
}
fn default_true() -> bool {
    true
}
fn default_speed() -> f64 {
    1.4
}
fn default_radius() -> f64 {
    50.0
}
fn all_days() -> Vec<u8> {
    (0..7).collect()
}
fn one() -> f64 {
    1.0
}
fn global() -> Tier {
    Tier::Global
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Persona {
    #[serde(default = "default_user")]
    pub user_id: String,
    pub seed: u64,
    /// Unix seconds of the first day's midnight.
    #[serde(default = "default_start")]
    pub start: i64,
    pub span_days: u32,
    #[serde(default = "default_interval")]
    pub sampling_interval_s: i64,
    /// Each sample time moves uniformly within ± this many seconds.
    #[serde(default)]
    pub sampling_jitter_s: i64,
    /// Radial RMS of the position noise, meters; truncated at 3σ.
    #[serde(default = "default_sigma")]
    pub noise_sigma_m: f64,
    #[serde(default = "default_accuracy")]
    pub accuracy_m: f64,
    #[serde(default = "default_true")]
    pub transit: bool,
    #[serde(default = "default_speed")]
    pub transit_speed_mps: f64,
    pub origin: GeoPoint,
    pub places: Vec<PlaceSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaceSpec {
    pub name: String,
    /// `local` at the top level plants a local POI outside every global one.
    #[serde(default = "global")]
    pub tier: Tier,
    /// Offset from the origin, or from the parent center for nested places.
    pub east_m: f64,
    pub north_m: f64,
    #[serde(default = "default_radius")]
    pub radius_m: f64,
    #[serde(default)]
    pub visits: Vec<VisitRule>,
    #[serde(default)]
    pub locals: Vec<PlaceSpec>,
    /// Visited but not planted: its fixes belong to no ground-truth POI.
    #[serde(default)]
    pub background: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisitRule {
    /// 0 = Monday.
    #[serde(default = "all_days")]
    pub weekdays: Vec<u8>,
    /// Minutes after local midnight.
    pub start_min: u32,
    pub minutes: u32,
    #[serde(default)]
    pub start_jitter_min: u32,
    #[serde(default)]
    pub minutes_jitter: u32,
    /// Chance that the visit happens on a matching day.
    #[serde(default = "one")]
    pub probability: f64,
}

impl VisitRule {
    pub fn daily(start_min: u32, minutes: u32) -> Self {
        Self::on(&[0, 1, 2, 3, 4, 5, 6], start_min, minutes)
    }

    pub fn on(weekdays: &[u8], start_min: u32, minutes: u32) -> Self {
        Self {
            weekdays: weekdays.to_vec(),
            start_min,
            minutes,
            start_jitter_min: 0,
            minutes_jitter: 0,
            probability: 1.0,
        }
    }
}

impl Persona {
    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InfeasiblePersona(m));
        if self.span_days == 0 {
            return bad("span_days must be positive".into());
        }
        if self.sampling_interval_s <= 0 {
            return bad("sampling_interval_s must be positive".into());
        }
        if self.sampling_jitter_s < 0 || 2 * self.sampling_jitter_s >= self.sampling_interval_s {
            return bad("sampling_jitter_s must be below half the interval".into());
        }
        if !(self.noise_sigma_m >= 0.0 && self.noise_sigma_m.is_finite()) {
            return bad("noise_sigma_m must be finite and non-negative".into());
        }
        if !(self.accuracy_m > 0.0 && self.accuracy_m.is_finite()) {
            return bad("accuracy_m must be positive".into());
        }
        if !(self.transit_speed_mps > 0.0) {
            return bad("transit_speed_mps must be positive".into());
        }
        for p in &self.places {
            check_place(p, None)?;
        }
        Ok(())
    }
}

fn check_place(p: &PlaceSpec, parent: Option<&PlaceSpec>) -> Result<()> {
    let bad = |m: String| Err(Error::InfeasiblePersona(format!("place {}: {m}", p.name)));
    if !(p.radius_m > 0.0) || !p.east_m.is_finite() || !p.north_m.is_finite() {
        return bad("invalid geometry".into());
    }
    if let Some(parent) = parent {
        if p.tier != Tier::Local || !p.locals.is_empty() {
            return bad("nested places must be local and cannot nest further".into());
        }
        if p.east_m.hypot(p.north_m) > parent.radius_m {
            return bad(format!("center lies outside parent {}", parent.name));
        }
        if p.background {
            return bad("nested places cannot be background".into());
        }
    } else if p.tier == Tier::Local && !p.locals.is_empty() {
        return bad("a local place cannot hold other places".into());
    }
    for r in &p.visits {
        if r.minutes == 0 || r.start_min >= 1440 || r.weekdays.iter().any(|&d| d > 6) {
            return bad("visit rule out of range".into());
        }
        if !(0.0..=1.0).contains(&r.probability) {
            return bad("visit probability outside [0, 1]".into());
        }
        if r.minutes_jitter >= r.minutes {
            return bad("minutes_jitter must be below minutes".into());
        }
    }
    for l in &p.locals {
        check_place(l, Some(p))?;
    }
    Ok(())
}

struct FlatPlace<'a> {
    spec: &'a PlaceSpec,
    parent: Option<usize>,
    /// Meters east and north of the origin.
    at: (f64, f64),
}

fn flatten(places: &[PlaceSpec]) -> Vec<FlatPlace<'_>> {
    let mut out = Vec::new();
    for p in places {
        let idx = out.len();
        out.push(FlatPlace {
            spec: p,
            parent: None,
            at: (p.east_m, p.north_m),
        });
        for l in &p.locals {
            out.push(FlatPlace {
                spec: l,
                parent: Some(idx),
                at: (p.east_m + l.east_m, p.north_m + l.north_m),
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
struct Stay {
    place: usize,
    start: i64,
    end: i64,
}

fn realize_stays(p: &Persona, flat: &[FlatPlace<'_>], rng: &mut ChaCha8Rng) -> Vec<Stay> {
    let mut stays = Vec::new();
    for day in 0..i64::from(p.span_days) {
        let midnight = p.start + day * DAY_S;
        let weekday = DateTime::from_timestamp(midnight, 0)
            .map(|d| d.weekday().num_days_from_monday() as u8)
            .unwrap_or(0);
        for (idx, place) in flat.iter().enumerate() {
            for r in &place.spec.visits {
                if !r.weekdays.contains(&weekday) {
                    continue;
                }
                // draw every variate so one rule's outcome never shifts another's
                let happens = rng.random::<f64>() < r.probability;
                let shift = jitter(rng, r.start_jitter_min);
                let stretch = jitter(rng, r.minutes_jitter);
                if !happens {
                    continue;
                }
                let start = midnight + (i64::from(r.start_min) + shift) * 60;
                let minutes = i64::from(r.minutes) + stretch;
                stays.push(Stay {
                    place: idx,
                    start,
                    end: start + minutes * 60,
                });
            }
        }
    }
    stays.sort_by_key(|s| (s.start, s.place));
    stays
}

fn jitter(rng: &mut ChaCha8Rng, amount: u32) -> i64 {
    let a = i64::from(amount);
    rng.random_range(-a..=a)
}

fn check_overlaps(p: &Persona, flat: &[FlatPlace<'_>], stays: &[Stay]) -> Result<()> {
    for (i, a) in stays.iter().enumerate() {
        for b in &stays[i + 1..] {
            if b.start >= a.end {
                continue;
            }
            let nested = flat[a.place].parent == Some(b.place) || flat[b.place].parent == Some(a.place);
            if !nested {
                return Err(Error::InfeasiblePersona(format!(
                    "visits to {} and {} overlap on day {}",
                    flat[a.place].spec.name,
                    flat[b.place].spec.name,
                    (a.start.max(b.start) - p.start).div_euclid(DAY_S)
                )));
            }
        }
    }
    Ok(())
}

/// Innermost stay containing `t`.
fn active(flat: &[FlatPlace<'_>], stays: &[Stay], t: i64) -> Option<usize> {
    let mut found: Option<usize> = None;
    let upto = stays.partition_point(|s| s.start <= t);
    for &s in &stays[..upto] {
        if s.start <= t && t < s.end {
            match found {
                Some(f) if flat[f].parent.is_some() => {}
                _ => found = Some(s.place),
            }
        }
    }
    found
}

/// Position while walking between stays, if `t` falls inside a trip.
fn transit_position(p: &Persona, flat: &[FlatPlace<'_>], stays: &[Stay], t: i64) -> Option<(f64, f64)> {
    let prev = stays.iter().filter(|s| s.end <= t).max_by_key(|s| s.end)?;
    let next_start = stays.iter().filter(|s| s.start > t).map(|s| s.start).min()?;
    let from = flat[active(flat, stays, prev.end - 1)?].at;
    let to = flat[active(flat, stays, next_start)?].at;
    let dist = (to.0 - from.0).hypot(to.1 - from.1);
    if dist == 0.0 {
        return None;
    }
    let travel = (dist / p.transit_speed_mps).min((next_start - prev.end) as f64);
    // the walk ends as the next stay begins
    let left = (next_start - t) as f64;
    if left > travel {
        return None;
    }
    let f = 1.0 - left / travel;
    Some((from.0 + f * (to.0 - from.0), from.1 + f * (to.1 - from.1)))
}

fn noise(rng: &mut ChaCha8Rng, sigma: f64) -> (f64, f64) {
    if sigma == 0.0 {
        return (0.0, 0.0);
    }
    // per-axis deviation σ/√2 gives a radial RMS of σ
    let axis = Normal::new(0.0, sigma / std::f64::consts::SQRT_2).expect("positive deviation");
    loop {
        let (dx, dy) = (axis.sample(rng), axis.sample(rng));
        if dx.hypot(dy) <= 3.0 * sigma {
            return (dx, dy);
        }
    }
}

/// A generated trajectory with its planted POIs. Member indices refer to
/// `trajectory`, and each POI's stats are those implied by the realized
/// schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticUser {
    pub trajectory: Trajectory,
    pub truth: PoiTree,
    pub names: BTreeMap<usize, String>,
    /// Noise-free position of each fix, meters east and north of the origin.
    pub clean_positions: Vec<(f64, f64)>,
}

pub fn generate(p: &Persona) -> Result<SyntheticUser> {
    p.validate()?;
    let flat = flatten(&p.places);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let stays = realize_stays(p, &flat, &mut rng);
    check_overlaps(p, &flat, &stays)?;

    let end = p.start + i64::from(p.span_days) * DAY_S;
    let mut fixes = Vec::new();
    let mut clean = Vec::new();
    let mut owner: Vec<Option<usize>> = Vec::new();
    let mut k = 0i64;
    loop {
        let base = p.start + k * p.sampling_interval_s;
        if base >= end {
            break;
        }
        k += 1;
        let t = base + jitter(&mut rng, p.sampling_jitter_s as u32);
        let (pos, place) = match active(&flat, &stays, t) {
            Some(idx) => (flat[idx].at, Some(idx)),
            None if p.transit => match transit_position(p, &flat, &stays, t) {
                Some(pos) => (pos, None),
                None => continue,
            },
            None => continue,
        };
        let (dx, dy) = noise(&mut rng, p.noise_sigma_m);
        let point = p.origin.offset_m(pos.0 + dx, pos.1 + dy)?;
        fixes.push(Fix::new(t, point, p.accuracy_m)?);
        clean.push(pos);
        owner.push(place);
    }
    let trajectory = Trajectory::from_fixes(p.user_id.clone(), fixes, 0);
    let (truth, names) = build_truth(p, &flat, &stays, &owner, &clean, trajectory.observation_days())?;
    Ok(SyntheticUser {
        trajectory,
        truth,
        names,
        clean_positions: clean,
    })
}

fn schedule_stats(stays: &[&Stay], observation_days: usize) -> TemporalStats {
    let mut days = BTreeSet::new();
    let mut intervals: Vec<(i64, i64)> = stays.iter().map(|s| (s.start, s.end)).collect();
    intervals.sort_unstable();
    let mut total = 0i64;
    let mut covered_to = i64::MIN;
    for (s, e) in intervals {
        let from = s.max(covered_to);
        if e > from {
            total += e - from;
        }
        covered_to = covered_to.max(e);
        for d in s.div_euclid(DAY_S)..=(e - 1).div_euclid(DAY_S) {
            days.insert(d);
        }
    }
    let visit_days = days.len();
    let minutes = total as f64 / 60.0;
    TemporalStats {
        visit_days,
        f_vd: if observation_days == 0 {
            0.0
        } else {
            visit_days as f64 / observation_days as f64
        },
        total_duration_min: minutes,
        d_vd: if visit_days == 0 { 0.0 } else { minutes / visit_days as f64 },
    }
}

fn build_truth(
    p: &Persona,
    flat: &[FlatPlace<'_>],
    stays: &[Stay],
    owner: &[Option<usize>],
    clean: &[(f64, f64)],
    observation_days: usize,
) -> Result<(PoiTree, BTreeMap<usize, String>)> {
    // a global place owns its own fixes and those of its nested places
    let covers = |outer: usize, inner: usize| inner == outer || flat[inner].parent == Some(outer);
    let make = |idx: usize, id: usize, tier: Tier, parent: Option<usize>| -> Result<Option<Poi>> {
        let members: Vec<usize> = owner
            .iter()
            .enumerate()
            .filter(|(_, o)| o.is_some_and(|o| covers(idx, o)))
            .map(|(i, _)| i)
            .collect();
        if members.is_empty() {
            log::warn!("planted place {} received no fixes", flat[idx].spec.name);
            return Ok(None);
        }
        let n = members.len() as f64;
        let (se, sn) = members.iter().fold((0.0, 0.0), |(e, nn), &i| (e + clean[i].0, nn + clean[i].1));
        let own: Vec<&Stay> = stays.iter().filter(|s| covers(idx, s.place)).collect();
        Ok(Some(Poi {
            id,
            tier,
            parent,
            centroid: p.origin.offset_m(se / n, sn / n)?,
            members,
            stats: schedule_stats(&own, observation_days),
        }))
    };

    let mut tree = PoiTree::default();
    let mut names = BTreeMap::new();
    let mut next = 0;
    let tops: Vec<usize> = (0..flat.len())
        .filter(|&i| flat[i].parent.is_none() && !flat[i].spec.background)
        .collect();
    let mut globals = Vec::new();
    for &i in tops.iter().filter(|&&i| flat[i].spec.tier == Tier::Global) {
        if let Some(poi) = make(i, next, Tier::Global, None)? {
            names.insert(next, flat[i].spec.name.clone());
            globals.push((i, next));
            tree.global_pois.push(poi);
            next += 1;
        }
    }
    for &(gi, gid) in &globals {
        let mut kids = Vec::new();
        for li in (0..flat.len()).filter(|&l| flat[l].parent == Some(gi)) {
            if let Some(poi) = make(li, next, Tier::Local, Some(gid))? {
                names.insert(next, flat[li].spec.name.clone());
                kids.push(poi);
                next += 1;
            }
        }
        if !kids.is_empty() {
            tree.children.insert(gid, kids);
        }
    }
    for &i in tops.iter().filter(|&&i| flat[i].spec.tier == Tier::Local) {
        if let Some(poi) = make(i, next, Tier::Local, None)? {
            names.insert(next, flat[i].spec.name.clone());
            tree.orphan_local_pois.push(poi);
            next += 1;
        }
    }
    Ok((tree, names))
}
