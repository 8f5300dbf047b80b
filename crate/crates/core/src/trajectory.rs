//! Fix streams: parsing delimiter-separated text and cleaning it into a
//! trajectory with per-fix dwell durations and missing-data segment breaks.

use std::collections::BTreeSet;
use std::io::Read;

use chrono::{DateTime, NaiveDateTime};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geo::GeoPoint;

const SECONDS_PER_DAY: i64 = 86_400;

/// One timestamped location sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fix {
    /// Seconds since the Unix epoch (UTC).
    pub timestamp: i64,
    pub point: GeoPoint,
    /// Confidence radius in meters.
    pub accuracy: f64,
    duration: f64,
    last_seen: i64,
}

impl Fix {
    pub fn new(timestamp: i64, point: GeoPoint, accuracy: f64) -> Result<Self> {
        if timestamp <= 0 {
            return Err(invalid(format!("timestamp must be positive, got {timestamp}")));
        }
        if !(accuracy >= 0.0) || !accuracy.is_finite() {
            return Err(invalid(format!("accuracy must be a non-negative number, got {accuracy}")));
        }
        Ok(Self {
            timestamp,
            point,
            accuracy,
            duration: 0.0,
            last_seen: timestamp,
        })
    }

    /// Dwell seconds attributed to this fix; zero until preprocessed.
    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Timestamp of the last raw sample merged into this fix. Equal to
    /// `timestamp` unless an unchanged-location run was collapsed onto it.
    pub fn last_seen(&self) -> i64 {
        self.last_seen
    }

    fn same_location(&self, other: &Fix) -> bool {
        self.point.lat() == other.point.lat() && self.point.lon() == other.point.lon()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    user_id: String,
    fixes: Vec<Fix>,
    segment_breaks: BTreeSet<usize>,
    observation_days: usize,
    day_offset_minutes: i32,
}

impl Trajectory {
    /// Builds an unprocessed trajectory. Fixes are sorted by timestamp and
    /// duplicate timestamps keep their first occurrence.
    pub fn from_fixes(user_id: impl Into<String>, fixes: Vec<Fix>, day_offset_minutes: i32) -> Self {
        Self::from_fixes_counting(user_id.into(), fixes, day_offset_minutes).0
    }

    fn from_fixes_counting(user_id: String, mut fixes: Vec<Fix>, day_offset_minutes: i32) -> (Self, usize) {
        // stable, so the first occurrence of a timestamp stays in front
        fixes.sort_by_key(|f| f.timestamp);
        let before = fixes.len();
        fixes.dedup_by_key(|f| f.timestamp);
        let duplicates = before - fixes.len();
        let mut t = Self {
            user_id,
            fixes,
            segment_breaks: BTreeSet::new(),
            observation_days: 0,
            day_offset_minutes,
        };
        t.observation_days = t.count_days(0..t.fixes.len());
        (t, duplicates)
    }

    pub fn user_id(&self) -> &str {
        &self.user_id
    }

    pub fn fixes(&self) -> &[Fix] {
        &self.fixes
    }

    pub fn len(&self) -> usize {
        self.fixes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixes.is_empty()
    }

    /// Indices whose fix is preceded by a missing-data gap.
    pub fn segment_breaks(&self) -> &BTreeSet<usize> {
        &self.segment_breaks
    }

    pub fn is_segment_break(&self, index: usize) -> bool {
        self.segment_breaks.contains(&index)
    }

    /// Distinct local calendar days with at least one fix.
    pub fn observation_days(&self) -> usize {
        self.observation_days
    }

    pub fn day_offset_minutes(&self) -> i32 {
        self.day_offset_minutes
    }

    /// Local calendar day number of a timestamp under this trajectory's offset.
    pub fn day_of(&self, timestamp: i64) -> i64 {
        (timestamp + i64::from(self.day_offset_minutes) * 60).div_euclid(SECONDS_PER_DAY)
    }

    pub fn points(&self) -> Vec<GeoPoint> {
        self.fixes.iter().map(|f| f.point).collect()
    }

    fn count_days(&self, indices: impl Iterator<Item = usize>) -> usize {
        let days: BTreeSet<i64> = indices.map(|i| self.day_of(self.fixes[i].timestamp)).collect();
        days.len()
    }
}

/// Column names for [`parse_fixes`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSchema {
    pub time: String,
    pub lat: String,
    pub lon: String,
    pub accuracy: String,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self {
            time: "timestamp".into(),
            lat: "latitude".into(),
            lon: "longitude".into(),
            accuracy: "accuracy".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParseReport {
    pub trajectory: Trajectory,
    /// Rows dropped because a field failed to parse or was out of range.
    pub skipped_rows: usize,
    pub duplicate_timestamps: usize,
}

/// Parses epoch seconds (integer or decimal) or an ISO-8601 date-time.
/// Date-times without an offset are read as UTC.
pub fn parse_timestamp(raw: &str) -> Option<i64> {
    let raw = raw.trim();
    if let Ok(secs) = raw.parse::<i64>() {
        return Some(secs);
    }
    if let Ok(secs) = raw.parse::<f64>() {
        return secs.is_finite().then(|| secs.floor() as i64);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.timestamp());
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(raw, fmt).ok())
        .map(|dt| dt.and_utc().timestamp())
}

fn detect_delimiter(text: &str) -> u8 {
    let header = text.lines().next().unwrap_or_default();
    if header.matches('\t').count() > header.matches(',').count() {
        b'\t'
    } else {
        b','
    }
}

/// Reads comma- or tab-separated fixes with a header row.
pub fn parse_fixes<R: Read>(
    mut stream: R,
    schema: &ColumnSchema,
    user_id: &str,
    day_offset_minutes: i32,
) -> Result<ParseReport> {
    let mut text = String::new();
    stream.read_to_string(&mut text)?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(&text))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let headers = reader.headers().map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column '{name}'"),
        })
    };
    let (ti, lai, loi, aci) = (
        column(&schema.time)?,
        column(&schema.lat)?,
        column(&schema.lon)?,
        column(&schema.accuracy)?,
    );

    let mut fixes = Vec::new();
    let mut skipped = 0;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let fix = (|| {
            let ts = parse_timestamp(record.get(ti)?)?;
            let lat: f64 = record.get(lai)?.parse().ok()?;
            let lon: f64 = record.get(loi)?.parse().ok()?;
            let acc: f64 = record.get(aci)?.parse().ok()?;
            Fix::new(ts, GeoPoint::new(lat, lon).ok()?, acc).ok()
        })();
        match fix {
            Some(f) => fixes.push(f),
            None => {
                warn!(target: "skip", "user={user_id} line={line} reason=unparseable");
                skipped += 1;
            }
        }
    }

    let (trajectory, duplicate_timestamps) =
        Trajectory::from_fixes_counting(user_id.to_string(), fixes, day_offset_minutes);
    if duplicate_timestamps > 0 {
        warn!(target: "skip", "user={user_id} reason=duplicate_timestamp count={duplicate_timestamps}");
    }
    Ok(ParseReport {
        trajectory,
        skipped_rows: skipped,
        duplicate_timestamps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessConfig {
    /// Inter-fix intervals longer than this mark missing data.
    pub gap_threshold_s: i64,
    /// Fixes with a larger confidence radius are discarded.
    pub max_accuracy_m: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            gap_threshold_s: 1800,
            max_accuracy_m: 1000.0,
        }
    }
}

/// Counts of fixes removed by each cleaning rule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PreprocessReport {
    pub input_fixes: usize,
    pub removed_inaccurate: usize,
    pub removed_zero_accuracy: usize,
    pub collapsed_unchanged: usize,
    pub segment_breaks: usize,
}

impl PreprocessReport {
    pub fn removed(&self) -> usize {
        self.removed_inaccurate + self.removed_zero_accuracy + self.collapsed_unchanged
    }
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    })
}

/// Cleans a parsed trajectory.
///
/// Drops fixes with zero or too-large accuracy, collapses runs of identical
/// coordinates onto their first fix, marks gaps longer than
/// `gap_threshold_s` as segment breaks and assigns each fix its dwell: the
/// span of its collapsed run plus the interval to the next fix, capped at the
/// gap threshold across a break. The final fix gets the median sampling
/// interval. A collapsed run never spans a missing-data gap.
pub fn preprocess(t: &Trajectory, cfg: &PreprocessConfig) -> Result<(Trajectory, PreprocessReport)> {
    if cfg.gap_threshold_s <= 0 || !(cfg.max_accuracy_m > 0.0) {
        return Err(invalid("gap threshold and maximum accuracy must be positive"));
    }
    let mut report = PreprocessReport {
        input_fixes: t.len(),
        ..Default::default()
    };

    let mut kept: Vec<Fix> = Vec::with_capacity(t.len());
    let mut breaks = BTreeSet::new();
    for fix in &t.fixes {
        if fix.accuracy == 0.0 {
            report.removed_zero_accuracy += 1;
            continue;
        }
        if fix.accuracy > cfg.max_accuracy_m {
            report.removed_inaccurate += 1;
            continue;
        }
        match kept.last_mut() {
            Some(prev) => {
                let gap = fix.timestamp - prev.last_seen;
                if gap > cfg.gap_threshold_s {
                    breaks.insert(kept.len());
                    kept.push(*fix);
                } else if prev.same_location(fix) {
                    prev.last_seen = prev.last_seen.max(fix.last_seen);
                    report.collapsed_unchanged += 1;
                } else {
                    kept.push(*fix);
                }
            }
            None => kept.push(*fix),
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyAfterCleaning);
    }

    let mut intervals: Vec<f64> = kept
        .windows(2)
        .map(|w| (w[1].timestamp - w[0].last_seen) as f64)
        .filter(|&dt| dt <= cfg.gap_threshold_s as f64)
        .collect();
    let sampling = median(&mut intervals).unwrap_or(0.0);

    let n = kept.len();
    for i in 0..n {
        let internal = (kept[i].last_seen - kept[i].timestamp) as f64;
        let outgoing = if i + 1 < n {
            let gap = (kept[i + 1].timestamp - kept[i].last_seen) as f64;
            gap.min(cfg.gap_threshold_s as f64)
        } else {
            sampling
        };
        kept[i].duration = internal + outgoing;
    }
    report.segment_breaks = breaks.len();

    let mut out = Trajectory {
        user_id: t.user_id.clone(),
        fixes: kept,
        segment_breaks: breaks,
        observation_days: 0,
        day_offset_minutes: t.day_offset_minutes,
    };
    out.observation_days = out.count_days(0..n);
    info!(
        "user={} input={} inaccurate={} zero_accuracy={} collapsed={} breaks={} kept={}",
        out.user_id,
        report.input_fixes,
        report.removed_inaccurate,
        report.removed_zero_accuracy,
        report.collapsed_unchanged,
        report.segment_breaks,
        n
    );
    Ok((out, report))
}

/// Writes a trajectory as CSV with the default column names plus dwell and
/// segment-break columns.
pub fn write_csv<W: std::io::Write>(t: &Trajectory, out: W) -> Result<()> {
    write_table(t, out, true)
}

/// Writes only the four input columns, for trajectories not yet
/// preprocessed.
pub fn write_raw_csv<W: std::io::Write>(t: &Trajectory, out: W) -> Result<()> {
    write_table(t, out, false)
}

fn write_table<W: std::io::Write>(t: &Trajectory, out: W, dwell: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let to_io = |e: csv::Error| Error::Io(e.into());
    let mut header = vec!["timestamp", "latitude", "longitude", "accuracy"];
    if dwell {
        header.extend(["duration", "segment_break"]);
    }
    w.write_record(&header).map_err(to_io)?;
    for (i, f) in t.fixes.iter().enumerate() {
        let mut row = vec![
            f.timestamp.to_string(),
            f.point.lat().to_string(),
            f.point.lon().to_string(),
            f.accuracy.to_string(),
        ];
        if dwell {
            row.push(f.duration.to_string());
            row.push(u8::from(t.is_segment_break(i)).to_string());
        }
        w.write_record(&row).map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}
