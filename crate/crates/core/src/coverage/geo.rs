use crate::math;

/// Mean Earth radius (m).
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// A WGS84 position in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        GeoPoint { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        (-90.0..=90.0).contains(&self.lat) && (-180.0..=180.0).contains(&self.lon)
    }

    /// Great-circle distance in meters.
    pub fn distance(&self, other: &GeoPoint) -> f64 {
        let (p1, p2) = (self.lat.to_radians(), other.lat.to_radians());
        let dp = p2 - p1;
        let dl = (other.lon - self.lon).to_radians();
        let (sp, sl) = (math::sin(dp / 2.0), math::sin(dl / 2.0));
        let a = sp * sp + math::cos(p1) * math::cos(p2) * sl * sl;
        2.0 * EARTH_RADIUS_M * math::asin(math::sqrt(a.clamp(0.0, 1.0)))
    }

    /// The point `east` and `north` meters away, on a local tangent plane.
    pub fn offset(&self, east: f64, north: f64) -> GeoPoint {
        let dlat = (north / EARTH_RADIUS_M).to_degrees();
        let dlon = (east / (EARTH_RADIUS_M * math::cos(self.lat.to_radians()))).to_degrees();
        GeoPoint::new(self.lat + dlat, self.lon + dlon)
    }

    /// Local tangent-plane coordinates `(east, north)` of `self` relative to
    /// `origin`, in meters.
    pub(crate) fn local(&self, origin: &GeoPoint) -> (f64, f64) {
        let east = (self.lon - origin.lon).to_radians() * EARTH_RADIUS_M * math::cos(origin.lat.to_radians());
        let north = (self.lat - origin.lat).to_radians() * EARTH_RADIUS_M;
        (east, north)
    }

    /// Linear interpolation in degrees.
    pub fn lerp(&self, other: &GeoPoint, s: f64) -> GeoPoint {
        GeoPoint::new(
            self.lat + s * (other.lat - self.lat),
            self.lon + s * (other.lon - self.lon),
        )
    }
}

/// Parameter range `[s0, s1] ⊆ [0, 1]` where the segment `a -> b` lies within
/// `radius` of `center`. Uses a tangent plane at `center`.
pub(crate) fn disc_chord(a: &GeoPoint, b: &GeoPoint, center: &GeoPoint, radius: f64) -> Option<(f64, f64)> {
    let (ax, ay) = a.local(center);
    let (bx, by) = b.local(center);
    let (dx, dy) = (bx - ax, by - ay);
    let qa = dx * dx + dy * dy;
    let qb = 2.0 * (ax * dx + ay * dy);
    let qc = ax * ax + ay * ay - radius * radius;
    if qa == 0.0 {
        return (qc <= 0.0).then_some((0.0, 1.0));
    }
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return None;
    }
    let root = math::sqrt(disc);
    let s0 = ((-qb - root) / (2.0 * qa)).max(0.0);
    let s1 = ((-qb + root) / (2.0 * qa)).min(1.0);
    (s0 <= s1).then_some((s0, s1))
}
