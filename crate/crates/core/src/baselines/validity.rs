use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::LabeledClusters;
use crate::error::{invalid, Result};
use crate::geo::PlanarPoint;
use crate::hclust::{cut, ClusterAssignment, Dendrogram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    DaviesBouldin,
    Silhouette,
}

fn check(points: &[PlanarPoint], c: &ClusterAssignment) -> Result<Vec<Vec<usize>>> {
    if c.labels().len() != points.len() {
        return Err(invalid(format!(
            "{} labels for {} points",
            c.labels().len(),
            points.len()
        )));
    }
    if c.cluster_count() < 2 {
        return Err(invalid("validity index needs at least 2 clusters"));
    }
    Ok(c.members())
}

/// Davies-Bouldin index; lower is better. Coincident centroids contribute a
/// ratio of zero.
pub fn db_index(points: &[PlanarPoint], c: &ClusterAssignment) -> Result<f64> {
    let members = check(points, c)?;
    let centroids: Vec<PlanarPoint> = members
        .iter()
        .map(|m| {
            let k = m.len() as f64;
            let (sx, sy) = m.iter().fold((0.0, 0.0), |(x, y), &i| (x + points[i].x, y + points[i].y));
            PlanarPoint::new(sx / k, sy / k)
        })
        .collect();
    let scatter: Vec<f64> = members
        .iter()
        .zip(&centroids)
        .map(|(m, c)| m.iter().map(|&i| points[i].distance(c)).sum::<f64>() / m.len() as f64)
        .collect();
    let k = members.len();
    let total: f64 = (0..k)
        .map(|i| {
            (0..k)
                .filter(|&j| j != i)
                .map(|j| {
                    let d = centroids[i].distance(&centroids[j]);
                    if d == 0.0 {
                        0.0
                    } else {
                        (scatter[i] + scatter[j]) / d
                    }
                })
                .fold(0.0, f64::max)
        })
        .sum();
    Ok(total / k as f64)
}

/// Silhouette coefficient of each point; points in singleton clusters
/// score 0.
pub fn silhouette_samples(points: &[PlanarPoint], c: &ClusterAssignment) -> Result<Vec<f64>> {
    let members = check(points, c)?;
    let labels = c.labels();
    let k = members.len();
    let mut sums = vec![0.0; k];
    let mut out = vec![0.0; points.len()];
    for i in 0..points.len() {
        let own = labels[i];
        if members[own].len() == 1 {
            continue;
        }
        sums.fill(0.0);
        for (j, p) in points.iter().enumerate() {
            sums[labels[j]] += points[i].distance(p);
        }
        let a = sums[own] / (members[own].len() - 1) as f64;
        let b = (0..k)
            .filter(|&l| l != own)
            .map(|l| sums[l] / members[l].len() as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            out[i] = (b - a) / m;
        }
    }
    Ok(out)
}

/// Mean silhouette coefficient.
pub fn silhouette(points: &[PlanarPoint], c: &ClusterAssignment) -> Result<f64> {
    let s = silhouette_samples(points, c)?;
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}

/// The cut with `2 ≤ n ≤ cap` that minimizes the Davies-Bouldin index or
/// maximizes the silhouette; ties go to the smaller `n`.
pub fn optimize_linkage(
    points: &[PlanarPoint],
    dend: &Dendrogram,
    criterion: Criterion,
    cap: usize,
) -> Result<LabeledClusters> {
    if cap < 2 {
        return Err(invalid(format!("cluster cap {cap} leaves no cut to compare")));
    }
    if dend.leaf_count() != points.len() {
        return Err(invalid("dendrogram and points disagree in size"));
    }
    let top = cap.min(points.len());
    let scores: Vec<f64> = (2..=top)
        .into_par_iter()
        .map(|n| {
            let c = cut(dend, n)?;
            match criterion {
                Criterion::DaviesBouldin => db_index(points, &c).map(|v| -v),
                Criterion::Silhouette => silhouette(points, &c),
            }
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = k;
        }
    }
    let c = cut(dend, best + 2)?;
    let raw: Vec<i64> = c.labels().iter().map(|&l| l as i64).collect();
    Ok(LabeledClusters::from_labels(&raw))
}
