use super::{LabeledClusters, NOISE};
use crate::geo::haversine_m;
use crate::staypoint::StayPoint;

pub const DEFAULT_XI: f64 = 0.05;

fn neighborhoods<F: Fn(usize, usize) -> f64>(n: usize, dist: &F, eps: f64) -> Vec<Vec<usize>> {
    (0..n)
        .map(|i| (0..n).filter(|&j| i == j || dist(i, j) <= eps).collect())
        .collect()
}

/// Whether each point has at least `min_pts` points, itself included, within
/// `eps`.
pub fn core_flags<F: Fn(usize, usize) -> f64>(n: usize, dist: F, eps: f64, min_pts: usize) -> Vec<bool> {
    neighborhoods(n, &dist, eps).iter().map(|nb| nb.len() >= min_pts).collect()
}

/// DBSCAN over `n` points with a symmetric distance function. Points are
/// scanned in index order and a border point joins the first cluster that
/// reaches it.
pub fn dbscan_by<F: Fn(usize, usize) -> f64>(n: usize, dist: F, eps: f64, min_pts: usize) -> LabeledClusters {
    let nb = neighborhoods(n, &dist, eps);
    let core: Vec<bool> = nb.iter().map(|v| v.len() >= min_pts).collect();
    let mut labels = vec![NOISE; n];
    let mut next = 0;
    for i in 0..n {
        if labels[i] != NOISE || !core[i] {
            continue;
        }
        labels[i] = next;
        let mut stack = vec![i];
        while let Some(p) = stack.pop() {
            for &q in &nb[p] {
                if labels[q] == NOISE {
                    labels[q] = next;
                    if core[q] {
                        stack.push(q);
                    }
                }
            }
        }
        next += 1;
    }
    LabeledClusters::from_labels(&labels)
}

/// DBSCAN on stay-point centroids with great-circle distances.
pub fn dbscan(points: &[StayPoint], eps_m: f64, min_pts: usize) -> LabeledClusters {
    dbscan_by(points.len(), |i, j| haversine_m(points[i].centroid, points[j].centroid), eps_m, min_pts)
}

/// OPTICS ordering with an unbounded generating distance.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticsOrdering {
    pub ordering: Vec<usize>,
    /// Indexed by point; infinite where a point was never reached.
    pub reachability: Vec<f64>,
    /// Distance to the `min_pts`-th nearest point, itself included; infinite
    /// when there are fewer than `min_pts` points.
    pub core_distance: Vec<f64>,
    pub predecessor: Vec<Option<usize>>,
    pub min_pts: usize,
}

pub fn optics_by<F: Fn(usize, usize) -> f64>(n: usize, dist: F, min_pts: usize) -> OpticsOrdering {
    let d: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { dist(i, j) }).collect())
        .collect();
    let core_distance: Vec<f64> = d
        .iter()
        .map(|row| {
            if min_pts == 0 || row.len() < min_pts {
                return f64::INFINITY;
            }
            let mut sorted = row.clone();
            sorted.sort_by(f64::total_cmp);
            sorted[min_pts - 1]
        })
        .collect();
    let mut reachability = vec![f64::INFINITY; n];
    let mut predecessor = vec![None; n];
    let mut processed = vec![false; n];
    let mut ordering = Vec::with_capacity(n);
    for _ in 0..n {
        // first unprocessed point of minimum reachability
        let mut point = usize::MAX;
        for i in 0..n {
            if !processed[i] && (point == usize::MAX || reachability[i] < reachability[point]) {
                point = i;
            }
        }
        processed[point] = true;
        ordering.push(point);
        if core_distance[point].is_infinite() {
            continue;
        }
        for q in 0..n {
            if processed[q] {
                continue;
            }
            let r = d[point][q].max(core_distance[point]);
            if r < reachability[q] {
                reachability[q] = r;
                predecessor[q] = Some(point);
            }
        }
    }
    OpticsOrdering {
        ordering,
        reachability,
        core_distance,
        predecessor,
        min_pts,
    }
}

pub fn optics(points: &[StayPoint], min_pts: usize) -> OpticsOrdering {
    optics_by(points.len(), |i, j| haversine_m(points[i].centroid, points[j].centroid), min_pts)
}

/// Clusters of an ordering at a fixed reachability threshold, equivalent to
/// DBSCAN at `eps` on core points.
pub fn extract_dbscan(o: &OpticsOrdering, eps: f64) -> LabeledClusters {
    let mut labels = vec![NOISE; o.ordering.len()];
    let mut current = NOISE;
    for &p in &o.ordering {
        let far = !(o.reachability[p] <= eps);
        let near_core = o.core_distance[p] <= eps;
        if far && near_core {
            current += 1;
        }
        labels[p] = if far && !near_core { NOISE } else { current };
    }
    LabeledClusters::from_labels(&labels)
}

struct SteepDownArea {
    start: usize,
    end: usize,
    mib: f64,
}

/// Clusters from the steep areas of the reachability plot (ξ method), with
/// predecessor correction. Nested clusters are flattened by keeping the first
/// listed cluster that claims a point; inner clusters are listed first.
pub fn extract_xi(o: &OpticsOrdering, xi: f64, min_cluster_size: usize) -> LabeledClusters {
    let n = o.ordering.len();
    if n == 0 {
        return LabeledClusters::from_labels(&[]);
    }
    let mut plot: Vec<f64> = o.ordering.iter().map(|&p| o.reachability[p]).collect();
    // a trailing infinity closes a cluster that runs to the end of the plot
    plot.push(f64::INFINITY);
    let pred: Vec<Option<usize>> = o.ordering.iter().map(|&p| o.predecessor[p]).collect();

    let keep = 1.0 - xi;
    let ratio: Vec<f64> = (0..n).map(|i| plot[i] / plot[i + 1]).collect();
    let steep_up: Vec<bool> = ratio.iter().map(|&r| r <= keep).collect();
    let steep_down: Vec<bool> = ratio.iter().map(|&r| r >= 1.0 / keep).collect();
    let down: Vec<bool> = ratio.iter().map(|&r| r > 1.0).collect();
    let up: Vec<bool> = ratio.iter().map(|&r| r < 1.0).collect();

    let mut sdas: Vec<SteepDownArea> = Vec::new();
    let mut clusters: Vec<(usize, usize)> = Vec::new();
    let mut index = 0;
    let mut mib = 0.0f64;

    for steep in (0..n).filter(|&i| steep_up[i] || steep_down[i]) {
        if steep < index {
            continue;
        }
        mib = plot[index..=steep].iter().fold(mib, |m, &v| m.max(v));
        sdas = filter_sdas(sdas, mib, keep, &plot);
        if steep_down[steep] {
            let end = extend_region(&steep_down, &up, steep, o.min_pts);
            sdas.push(SteepDownArea {
                start: steep,
                end,
                mib: 0.0,
            });
            index = end + 1;
            mib = plot[index];
            continue;
        }
        let u_start = steep;
        let u_end = extend_region(&steep_up, &down, u_start, o.min_pts);
        index = u_end + 1;
        mib = plot[index];

        let mut found = Vec::new();
        for d in &sdas {
            let mut c_start = d.start;
            let mut c_end = u_end;
            if plot[c_end + 1] * keep < d.mib {
                continue;
            }
            let d_max = plot[d.start];
            if d_max * keep >= plot[c_end + 1] {
                while plot[c_start + 1] > plot[c_end + 1] && c_start < d.end {
                    c_start += 1;
                }
            } else if plot[c_end + 1] * keep >= d_max {
                while c_end > u_start && plot[c_end - 1] > d_max {
                    c_end -= 1;
                }
            }
            let Some((s, e)) = correct_predecessor(&plot, &pred, &o.ordering, c_start, c_end) else {
                continue;
            };
            if e - s + 1 < min_cluster_size || s > d.end || e < u_start {
                continue;
            }
            found.push((s, e));
        }
        found.reverse();
        clusters.extend(found);
    }

    let mut by_position = vec![NOISE; n];
    let mut label = 0;
    for (s, e) in clusters {
        if by_position[s..=e].iter().all(|&l| l == NOISE) {
            by_position[s..=e].fill(label);
            label += 1;
        }
    }
    let mut labels = vec![NOISE; n];
    for (pos, &p) in o.ordering.iter().enumerate() {
        labels[p] = by_position[pos];
    }
    LabeledClusters::from_labels(&labels)
}

fn filter_sdas(sdas: Vec<SteepDownArea>, mib: f64, keep: f64, plot: &[f64]) -> Vec<SteepDownArea> {
    if mib.is_infinite() {
        return Vec::new();
    }
    sdas.into_iter()
        .filter(|d| mib <= plot[d.start] * keep)
        .map(|mut d| {
            d.mib = d.mib.max(mib);
            d
        })
        .collect()
}

/// Extends a steep area while it stays steep, tolerating at most `min_pts`
/// consecutive flat-or-continuing points and stopping at a reversal.
fn extend_region(steep: &[bool], reversal: &[bool], start: usize, min_pts: usize) -> usize {
    let mut gentle = 0;
    let mut end = start;
    for i in start..steep.len() {
        if steep[i] {
            gentle = 0;
            end = i;
        } else if !reversal[i] {
            gentle += 1;
            if gentle > min_pts {
                break;
            }
        } else {
            return end;
        }
    }
    end
}

fn correct_predecessor(
    plot: &[f64],
    pred: &[Option<usize>],
    ordering: &[usize],
    s: usize,
    mut e: usize,
) -> Option<(usize, usize)> {
    while s < e {
        if plot[s] > plot[e] {
            return Some((s, e));
        }
        if let Some(p) = pred[e] {
            if ordering[s..e].contains(&p) {
                return Some((s, e));
            }
        }
        e -= 1;
    }
    None
}

/// OPTICS on stay-point centroids followed by ξ extraction, with the minimum
/// cluster size equal to `min_pts`.
pub fn optics_clusters(points: &[StayPoint], min_pts: usize, xi: f64) -> LabeledClusters {
    let o = optics(points, min_pts);
    extract_xi(&o, xi, min_pts.max(2))
}
