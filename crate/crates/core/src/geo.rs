//! Coordinate arithmetic: great-circle distance, a local planar projection and
//! condensed pairwise distance matrices.
//!
//! Absolute distances (stay-point radius, DBSCAN reachability) use
//! [`haversine_m`]. Everything that only needs relative distances works on
//! [`PlanarPoint`]s produced by [`project_equirectangular`], which is accurate
//! to well under 1% over a city-sized extent and far cheaper to evaluate.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// A WGS-84 latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGeoPoint")]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

#[derive(Deserialize)]
struct RawGeoPoint {
    lat: f64,
    lon: f64,
}

impl TryFrom<RawGeoPoint> for GeoPoint {
    type Error = Error;

    fn try_from(raw: RawGeoPoint) -> Result<Self> {
        GeoPoint::new(raw.lat, raw.lon)
    }
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !lon.is_finite() || lat.abs() > 90.0 || lon.abs() > 180.0 {
            return Err(Error::InvalidCoordinate { lat, lon });
        }
        Ok(Self { lat, lon })
    }

    #[inline]
    pub fn lat(&self) -> f64 {
        self.lat
    }

    #[inline]
    pub fn lon(&self) -> f64 {
        self.lon
    }

    /// Moves the point by a local east/north offset in meters.
    ///
    /// Uses the inverse of the equirectangular projection around `self`, so it
    /// is only meaningful for offsets of a few kilometers.
    pub fn offset_m(&self, east: f64, north: f64) -> Result<Self> {
        let dlat = (north / EARTH_RADIUS_M).to_degrees();
        let dlon = (east / (EARTH_RADIUS_M * self.lat.to_radians().cos())).to_degrees();
        Self::new(self.lat + dlat, self.lon + dlon)
    }
}

/// Meters east (`x`) and north (`y`) of a projection origin.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl PlanarPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn distance(&self, other: &PlanarPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Great-circle distance in meters on a sphere of radius [`EARTH_RADIUS_M`].
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Arithmetic mean of a non-empty point set.
pub fn mean_point(points: &[GeoPoint]) -> Result<GeoPoint> {
    if points.is_empty() {
        return Err(invalid("mean of an empty point set"));
    }
    let n = points.len() as f64;
    let (lat, lon) = points
        .iter()
        .fold((0.0, 0.0), |(la, lo), p| (la + p.lat, lo + p.lon));
    GeoPoint::new(lat / n, lon / n)
}

/// Projection parameters; kept so planar results can be mapped back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    origin: GeoPoint,
    cos_lat0: f64,
}

impl Projection {
    pub fn around(origin: GeoPoint) -> Self {
        Self {
            origin,
            cos_lat0: origin.lat.to_radians().cos(),
        }
    }

    pub fn origin(&self) -> GeoPoint {
        self.origin
    }

    pub fn forward(&self, p: GeoPoint) -> PlanarPoint {
        PlanarPoint {
            x: EARTH_RADIUS_M * (p.lon - self.origin.lon).to_radians() * self.cos_lat0,
            y: EARTH_RADIUS_M * (p.lat - self.origin.lat).to_radians(),
        }
    }

    pub fn inverse(&self, p: PlanarPoint) -> Result<GeoPoint> {
        let lat = self.origin.lat + (p.y / EARTH_RADIUS_M).to_degrees();
        let lon = self.origin.lon + (p.x / (EARTH_RADIUS_M * self.cos_lat0)).to_degrees();
        GeoPoint::new(lat, lon)
    }
}

/// Equirectangular projection about the mean coordinate of `points`.
pub fn project_equirectangular(points: &[GeoPoint]) -> Result<Vec<PlanarPoint>> {
    let proj = Projection::around(mean_point(points)?);
    Ok(points.iter().map(|&p| proj.forward(p)).collect())
}

/// Condensed upper-triangular matrix of pairwise distances in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    size: usize,
    entries: Vec<f64>,
}

#[inline]
pub(crate) fn condensed_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    n * i - i * (i + 1) / 2 + (j - i - 1)
}

impl DistanceMatrix {
    /// Builds a matrix from a symmetric distance function evaluated on `i < j`.
    pub fn from_fn<F>(size: usize, dist: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> f64,
    {
        if size < 2 {
            return Err(invalid(format!(
                "distance matrix needs at least 2 points, got {size}"
            )));
        }
        let mut entries = Vec::with_capacity(size * (size - 1) / 2);
        for i in 0..size {
            for j in i + 1..size {
                let d = dist(i, j);
                if !(d >= 0.0) {
                    return Err(invalid(format!("distance ({i}, {j}) is {d}")));
                }
                entries.push(d);
            }
        }
        Ok(Self { size, entries })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Distance between points `i` and `j`; zero on the diagonal.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.entries[condensed_index(self.size, i, j)],
            std::cmp::Ordering::Greater => self.entries[condensed_index(self.size, j, i)],
        }
    }
}

/// Euclidean pairwise distances between planar points.
pub fn pairwise_matrix(points: &[PlanarPoint]) -> Result<DistanceMatrix> {
    DistanceMatrix::from_fn(points.len(), |i, j| points[i].distance(&points[j]))
}

/// Great-circle pairwise distances.
pub fn haversine_matrix(points: &[GeoPoint]) -> Result<DistanceMatrix> {
    DistanceMatrix::from_fn(points.len(), |i, j| haversine_m(points[i], points[j]))
}
