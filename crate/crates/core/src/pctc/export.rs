use std::ops::Range;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Poi, PoiThresholds, PoiTree, TemporalStats, Tier};
use crate::error::{invalid, Result};
use crate::geo::GeoPoint;

pub const DOCUMENT_FORMAT: &str = "pctc-poi-tree";
pub const DOCUMENT_VERSION: u32 = 1;

/// One POI in the versioned JSON document. Members are stored as half-open
/// index ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoiRecord {
    pub id: usize,
    pub tier: Tier,
    pub parent: Option<usize>,
    pub centroid: GeoPoint,
    pub stats: TemporalStats,
    pub member_ranges: Vec<Range<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoiDocument {
    pub format: String,
    pub version: u32,
    pub user_id: String,
    pub observation_days: usize,
    pub global_thresholds: PoiThresholds,
    pub local_thresholds: PoiThresholds,
    pub pois: Vec<PoiRecord>,
}

fn to_ranges(members: &[usize]) -> Vec<Range<usize>> {
    let mut out: Vec<Range<usize>> = Vec::new();
    for &i in members {
        match out.last_mut() {
            Some(r) if r.end == i => r.end = i + 1,
            _ => out.push(i..i + 1),
        }
    }
    out
}

fn record(p: &Poi) -> PoiRecord {
    PoiRecord {
        id: p.id,
        tier: p.tier,
        parent: p.parent,
        centroid: p.centroid,
        stats: p.stats,
        member_ranges: to_ranges(&p.members),
    }
}

impl PoiDocument {
    pub fn new(
        tree: &PoiTree,
        user_id: &str,
        observation_days: usize,
        global: PoiThresholds,
        local: PoiThresholds,
    ) -> Self {
        let mut pois = Vec::new();
        for g in &tree.global_pois {
            pois.push(record(g));
            pois.extend(tree.children_of(g.id).iter().map(record));
        }
        pois.extend(tree.orphan_local_pois.iter().map(record));
        Self {
            format: DOCUMENT_FORMAT.into(),
            version: DOCUMENT_VERSION,
            user_id: user_id.into(),
            observation_days,
            global_thresholds: global,
            local_thresholds: local,
            pois,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text)?;
        if doc.format != DOCUMENT_FORMAT || doc.version != DOCUMENT_VERSION {
            return Err(invalid(format!(
                "unsupported POI document {} v{}",
                doc.format, doc.version
            )));
        }
        Ok(doc)
    }

    /// Rebuilds the tree; fails on duplicate ids or dangling parents.
    pub fn to_tree(&self) -> Result<PoiTree> {
        let mut tree = PoiTree::default();
        let mut seen = std::collections::BTreeSet::new();
        for r in &self.pois {
            if !seen.insert(r.id) {
                return Err(invalid(format!("duplicate POI id {}", r.id)));
            }
            let poi = Poi {
                id: r.id,
                tier: r.tier,
                parent: r.parent,
                centroid: r.centroid,
                members: r.member_ranges.iter().flat_map(|r| r.clone()).collect(),
                stats: r.stats,
            };
            match (r.tier, r.parent) {
                (Tier::Global, None) => tree.global_pois.push(poi),
                (Tier::Global, Some(_)) => {
                    return Err(invalid(format!("global POI {} has a parent", r.id)));
                }
                (Tier::Local, None) => tree.orphan_local_pois.push(poi),
                (Tier::Local, Some(parent)) => tree.children.entry(parent).or_default().push(poi),
            }
        }
        for parent in tree.children.keys() {
            if !tree.global_pois.iter().any(|g| g.id == *parent) {
                return Err(invalid(format!("parent {parent} is not a global POI")));
            }
        }
        Ok(tree)
    }
}

/// GeoJSON feature collection with one Point feature per POI.
pub fn to_geojson(tree: &PoiTree) -> Value {
    let features: Vec<Value> = tree
        .all_pois()
        .map(|p| {
            json!({
                "type": "Feature",
                "geometry": {
                    "type": "Point",
                    "coordinates": [p.centroid.lon(), p.centroid.lat()],
                },
                "properties": {
                    "id": p.id,
                    "tier": p.tier,
                    "parent": p.parent,
                    "visit_days": p.stats.visit_days,
                    "f_vd": p.stats.f_vd,
                    "d_vd": p.stats.d_vd,
                    "total_duration_min": p.stats.total_duration_min,
                    "member_count": p.members.len(),
                },
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}
