//! Batch comparison of PC-TC against the stay-point baselines.
//!
//! Each user is preprocessed once, then every configured method runs on the
//! cleaned trajectory. A row records the POI count, the predictability limit
//! of the visit sequence and the time spent in the clustering call.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_baseline, BaselineMethod, BaselineParams};
use crate::error::{invalid, Error, Result};
use crate::pctc::{extract_pois, PoiThresholds, Tier};
use crate::predictability::{predictability_limit, sequence_from_labels, sequence_from_tree};
use crate::trajectory::{parse_fixes, preprocess, ColumnSchema, PreprocessConfig, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dbscan,
    Optics,
    Db,
    Sc,
    Pctc,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Dbscan, Method::Optics, Method::Db, Method::Sc, Method::Pctc];

    pub fn name(self) -> &'static str {
        match self {
            Method::Dbscan => "dbscan",
            Method::Optics => "optics",
            Method::Db => "db",
            Method::Sc => "sc",
            Method::Pctc => "pctc",
        }
    }

    fn baseline(self) -> Option<BaselineMethod> {
        match self {
            Method::Dbscan => Some(BaselineMethod::Dbscan),
            Method::Optics => Some(BaselineMethod::Optics),
            Method::Db => Some(BaselineMethod::Db),
            Method::Sc => Some(BaselineMethod::Sc),
            Method::Pctc => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| invalid(format!("unknown method '{s}' (expected dbscan, optics, db, sc or pctc)")))
    }
}

/// Everything a comparison run needs. Parsed from `key = value` lines; see
/// [`RunConfig::set`] for the keys.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub methods: Vec<Method>,
    pub preprocess: PreprocessConfig,
    pub baseline: BaselineParams,
    pub global: PoiThresholds,
    pub local: PoiThresholds,
    /// When non-empty, PC-TC runs once per local F_vd threshold.
    pub f_vd_local_sweep: Vec<f64>,
    pub day_offset_minutes: i32,
    /// Worker threads across users; 0 uses every core.
    pub threads: usize,
    pub input: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            preprocess: PreprocessConfig::default(),
            baseline: BaselineParams::default(),
            global: PoiThresholds::GLOBAL_DEFAULT,
            local: PoiThresholds::LOCAL_DEFAULT,
            f_vd_local_sweep: Vec::new(),
            day_offset_minutes: 0,
            threads: 0,
            input: None,
            out_dir: None,
        }
    }
}

fn number<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| invalid(format!("{key}: cannot parse '{value}'")))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| number(key, s))
        .collect()
}

impl RunConfig {
    pub const KEYS: [&'static str; 16] = [
        "methods",
        "gap_threshold_s",
        "max_accuracy_m",
        "sp_duration_s",
        "sp_distance_m",
        "dbscan_eps_m",
        "optics_xi",
        "f_vd_global",
        "d_vd_global",
        "f_vd_local",
        "d_vd_local",
        "f_vd_local_sweep",
        "day_offset_minutes",
        "threads",
        "input",
        "out_dir",
    ];

    /// Applies one setting. `methods` and `f_vd_local_sweep` take comma
    /// separated lists; `methods = all` selects every method.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "methods" | "method" => {
                self.methods = if value == "all" {
                    Method::ALL.to_vec()
                } else {
                    list(key, value)?
                };
            }
            "gap_threshold_s" => self.preprocess.gap_threshold_s = number(key, value)?,
            "max_accuracy_m" => self.preprocess.max_accuracy_m = number(key, value)?,
            "sp_duration_s" => self.baseline.delta_s = number(key, value)?,
            "sp_distance_m" => self.baseline.theta_m = number(key, value)?,
            "dbscan_eps_m" => self.baseline.epsilon_m = number(key, value)?,
            "optics_xi" => self.baseline.xi = number(key, value)?,
            "f_vd_global" => self.global.f_vd_min = number(key, value)?,
            "d_vd_global" => self.global.d_vd_min = number(key, value)?,
            "f_vd_local" => self.local.f_vd_min = number(key, value)?,
            "d_vd_local" => self.local.d_vd_min = number(key, value)?,
            "f_vd_local_sweep" => self.f_vd_local_sweep = list(key, value)?,
            "day_offset_minutes" => self.day_offset_minutes = number(key, value)?,
            "threads" => self.threads = number(key, value)?,
            "input" => self.input = Some(PathBuf::from(value)),
            "out_dir" => self.out_dir = Some(PathBuf::from(value)),
            other => return Err(invalid(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: no as u64 + 1,
                message: format!("expected key = value, got '{line}'"),
            })?;
            cfg.set(k, v).map_err(|e| Error::Parse {
                line: no as u64 + 1,
                message: e.to_string(),
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(invalid("no methods selected"));
        }
        PoiThresholds::new(self.global.f_vd_min, self.global.d_vd_min)?;
        PoiThresholds::new(self.local.f_vd_min, self.local.d_vd_min)?;
        for &f in &self.f_vd_local_sweep {
            PoiThresholds::new(f, self.local.d_vd_min)?;
        }
        if self.preprocess.gap_threshold_s <= 0 || !(self.preprocess.max_accuracy_m > 0.0) {
            return Err(invalid("gap_threshold_s and max_accuracy_m must be positive"));
        }
        let b = &self.baseline;
        if b.delta_s <= 0 || !(b.theta_m > 0.0) || !(b.epsilon_m > 0.0) {
            return Err(invalid("stay-point and DBSCAN parameters must be positive"));
        }
        if !(b.xi > 0.0 && b.xi < 1.0) {
            return Err(invalid("optics_xi must lie in (0, 1)"));
        }
        if self.day_offset_minutes.abs() > 14 * 60 {
            return Err(invalid("day_offset_minutes must lie within ±840"));
        }
        Ok(())
    }
}

/// One user of a batch. A user whose input could not be read still gets
/// rows, carrying the error.
#[derive(Debug, Clone)]
pub struct UserInput {
    pub user_id: String,
    pub trajectory: std::result::Result<Trajectory, String>,
}

impl UserInput {
    pub fn ok(t: Trajectory) -> Self {
        Self {
            user_id: t.user_id().to_string(),
            trajectory: Ok(t),
        }
    }
}

fn is_table(p: &Path) -> bool {
    matches!(
        p.extension().and_then(|e| e.to_str()),
        Some("csv" | "tsv" | "txt")
    )
}

/// Reads one user from a file, or one user per `.csv`/`.tsv`/`.txt` file of
/// a directory (sorted by name). User ids are file stems.
pub fn load_batch(path: &Path, schema: &ColumnSchema, day_offset_minutes: i32) -> Result<Vec<UserInput>> {
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut v: Vec<PathBuf> = std::fs::read_dir(path)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        v.retain(|p| p.is_file() && is_table(p));
        v.sort();
        v
    } else {
        vec![path.to_path_buf()]
    };
    let mut out = Vec::with_capacity(files.len());
    for f in files {
        let user_id = f
            .file_stem()
            .map_or_else(|| "user".to_string(), |s| s.to_string_lossy().into_owned());
        let trajectory = std::fs::File::open(&f)
            .map_err(Error::from)
            .and_then(|file| parse_fixes(file, schema, &user_id, day_offset_minutes))
            .map(|r| r.trajectory)
            .map_err(|e| e.to_string());
        out.push(UserInput { user_id, trajectory });
    }
    Ok(out)
}

/// One method on one user. Counts are 0 and the limits empty when `error`
/// is set. `f_vd_local` is the local threshold PC-TC ran with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub user_id: String,
    pub method: Method,
    pub f_vd_local: Option<f64>,
    pub poi_count: usize,
    pub global_poi_count: Option<usize>,
    pub pl: Option<f64>,
    pub global_pl: Option<f64>,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

/// Column order of the rows CSV.
pub const ROW_COLUMNS: [&str; 9] = [
    "user_id",
    "method",
    "f_vd_local",
    "poi_count",
    "global_poi_count",
    "pl",
    "global_pl",
    "wall_time_s",
    "error",
];

impl EvaluationRow {
    fn failed(user_id: &str, method: Method, f_vd_local: Option<f64>, error: String) -> Self {
        Self {
            user_id: user_id.to_string(),
            method,
            f_vd_local,
            poi_count: 0,
            global_poi_count: None,
            pl: None,
            global_pl: None,
            wall_time_s: 0.0,
            error: Some(error),
        }
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

fn run_user(cfg: &RunConfig, input: &UserInput) -> Vec<EvaluationRow> {
    let sweep: Vec<Option<f64>> = if cfg.f_vd_local_sweep.is_empty() {
        vec![Some(cfg.local.f_vd_min)]
    } else {
        cfg.f_vd_local_sweep.iter().copied().map(Some).collect()
    };
    let jobs: Vec<(Method, Option<f64>)> = cfg
        .methods
        .iter()
        .flat_map(|&m| match m {
            Method::Pctc => sweep.iter().map(|&f| (m, f)).collect::<Vec<_>>(),
            _ => vec![(m, None)],
        })
        .collect();

    let id = &input.user_id;
    let cleaned = match &input.trajectory {
        Ok(raw) => preprocess(raw, &cfg.preprocess).map(|(t, _)| t).map_err(|e| e.to_string()),
        Err(e) => Err(e.clone()),
    };
    let t = match cleaned {
        Ok(t) => t,
        Err(e) => {
            log::warn!("user={id} failed: {e}");
            return jobs
                .into_iter()
                .map(|(m, f)| EvaluationRow::failed(id, m, f, e.clone()))
                .collect();
        }
    };

    jobs.into_iter()
        .map(|(method, f_vd_local)| {
            let row = match method.baseline() {
                Some(b) => run_baseline_row(&t, method, b, cfg),
                None => {
                    let local = PoiThresholds {
                        f_vd_min: f_vd_local.unwrap_or(cfg.local.f_vd_min),
                        ..cfg.local
                    };
                    run_pctc_row(&t, &cfg.global, &local, f_vd_local)
                }
            };
            row.unwrap_or_else(|e| {
                log::warn!("user={id} method={method} failed: {e}");
                EvaluationRow::failed(id, method, f_vd_local, e.to_string())
            })
        })
        .collect()
}

fn run_baseline_row(t: &Trajectory, method: Method, b: BaselineMethod, cfg: &RunConfig) -> Result<EvaluationRow> {
    let (out, wall) = timed(|| run_baseline(t, b, &cfg.baseline));
    let out = out?;
    let pl = sequence_from_labels(out.clusters.labels())
        .ok()
        .map(|s| predictability_limit(&s).pi_max);
    Ok(EvaluationRow {
        user_id: t.user_id().to_string(),
        method,
        f_vd_local: None,
        poi_count: out.poi_count(),
        global_poi_count: None,
        pl,
        global_pl: None,
        wall_time_s: wall,
        error: None,
    })
}

fn run_pctc_row(
    t: &Trajectory,
    global: &PoiThresholds,
    local: &PoiThresholds,
    f_vd_local: Option<f64>,
) -> Result<EvaluationRow> {
    let (tree, wall) = timed(|| extract_pois(t, global, local));
    let tree = tree?;
    let pl = |tier| {
        sequence_from_tree(t, &tree, tier)
            .ok()
            .map(|s| predictability_limit(&s).pi_max)
    };
    Ok(EvaluationRow {
        user_id: t.user_id().to_string(),
        method: Method::Pctc,
        f_vd_local,
        poi_count: tree.local_tier().len(),
        global_poi_count: Some(tree.global_pois.len()),
        pl: pl(Tier::Local),
        global_pl: pl(Tier::Global),
        wall_time_s: wall,
        error: None,
    })
}

/// Runs every configured method on every user. Users run concurrently on a
/// pool of `cfg.threads` workers; rows come back in input order, methods in
/// configured order.
pub fn run_compare(cfg: &RunConfig, batch: &[UserInput]) -> Result<Vec<EvaluationRow>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
    let per_user: Vec<Vec<EvaluationRow>> = pool.install(|| batch.par_iter().map(|u| run_user(cfg, u)).collect());
    Ok(per_user.into_iter().flatten().collect())
}

pub fn write_rows<W: Write>(rows: &[EvaluationRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let to_io = |e: csv::Error| Error::Io(e.into());
    w.write_record(ROW_COLUMNS).map_err(to_io)?;
    for r in rows {
        w.serialize(r).map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<EvaluationRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| Error::Parse {
                line: i as u64 + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Medians of one method (and local threshold, for PC-TC) over the users
/// where it succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub f_vd_local: Option<f64>,
    pub users: usize,
    pub failures: usize,
    pub median_poi_count: Option<f64>,
    pub median_global_poi_count: Option<f64>,
    pub median_pl: Option<f64>,
    pub median_global_pl: Option<f64>,
    pub median_wall_time_s: Option<f64>,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    })
}

/// Per-method medians in order of first appearance.
pub fn summarize(rows: &[EvaluationRow]) -> Vec<MethodSummary> {
    let mut order: Vec<(Method, Option<u64>)> = Vec::new();
    let mut groups: BTreeMap<(Method, Option<u64>), Vec<&EvaluationRow>> = BTreeMap::new();
    for r in rows {
        let key = (r.method, r.f_vd_local.map(f64::to_bits));
        if !groups.contains_key(&key) {
            order.push(key);
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let group = &groups[&key];
            let ok: Vec<&&EvaluationRow> = group.iter().filter(|r| r.error.is_none()).collect();
            let med = |f: &dyn Fn(&EvaluationRow) -> Option<f64>| {
                median(&ok.iter().filter_map(|r| f(r)).collect::<Vec<_>>())
            };
            MethodSummary {
                method: key.0,
                f_vd_local: key.1.map(f64::from_bits),
                users: ok.len(),
                failures: group.len() - ok.len(),
                median_poi_count: med(&|r| Some(r.poi_count as f64)),
                median_global_poi_count: med(&|r| r.global_poi_count.map(|c| c as f64)),
                median_pl: med(&|r| r.pl),
                median_global_pl: med(&|r| r.global_pl),
                median_wall_time_s: med(&|r| Some(r.wall_time_s)),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests;
