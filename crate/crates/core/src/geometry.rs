//! Cartesian positions and direction helpers shared by every stage.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// A point (or displacement) in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub const ORIGIN: Position = Position { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Position) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Position) -> f64 {
        (self - other).norm()
    }

    /// Distance in the horizontal plane, z ignored.
    pub fn distance_xy(self, other: Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Unit vector along `self`; `None` for a zero-length vector.
    pub fn normalized(self) -> Option<Position> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    /// Unit vector for an azimuth/elevation pair in degrees.
    pub fn from_angles_deg(azimuth_deg: f64, elevation_deg: f64) -> Position {
        let (sa, ca) = azimuth_deg.to_radians().sin_cos();
        let (se, ce) = elevation_deg.to_radians().sin_cos();
        Position::new(ce * ca, ce * sa, se)
    }

    /// Azimuth and elevation (degrees) of the direction of `self`.
    pub fn angles_deg(self) -> (f64, f64) {
        let az = self.y.atan2(self.x).to_degrees();
        let el = self.z.atan2(self.x.hypot(self.y)).to_degrees();
        (az, el)
    }

    pub fn centroid(points: &[Position]) -> Option<Position> {
        if points.is_empty() {
            return None;
        }
        let sum = points.iter().fold(Position::ORIGIN, |acc, &p| acc + p);
        Some(sum * (1.0 / points.len() as f64))
    }
}

impl From<[f64; 3]> for Position {
    fn from(v: [f64; 3]) -> Self {
        Position::new(v[0], v[1], v[2])
    }
}

impl From<Position> for [f64; 3] {
    fn from(p: Position) -> Self {
        [p.x, p.y, p.z]
    }
}

impl Add for Position {
    type Output = Position;
    fn add(self, o: Position) -> Position {
        Position::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Position {
    type Output = Position;
    fn sub(self, o: Position) -> Position {
        Position::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Position {
    type Output = Position;
    fn mul(self, s: f64) -> Position {
        Position::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Position {
    type Output = Position;
    fn neg(self) -> Position {
        Position::new(-self.x, -self.y, -self.z)
    }
}

/// Wraps an angle in degrees to (-180, 180].
pub fn wrap_deg(angle: f64) -> f64 {
    let mut a = angle % 360.0;
    if a <= -180.0 {
        a += 360.0;
    } else if a > 180.0 {
        a -= 360.0;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles_round_trip() {
        for &(az, el) in &[(0.0, 0.0), (90.0, 10.0), (-135.0, -45.0), (180.0, 30.0)] {
            let (a, e) = Position::from_angles_deg(az, el).angles_deg();
            assert!((wrap_deg(a - az)).abs() < 1e-12);
            assert!((e - el).abs() < 1e-12);
        }
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_deg(180.0), 180.0);
        assert_eq!(wrap_deg(-180.0), 180.0);
        assert_eq!(wrap_deg(540.0), 180.0);
        assert!((wrap_deg(-190.0) - 170.0).abs() < 1e-12);
        assert!((wrap_deg(370.0) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn xy_distance_ignores_height() {
        let a = Position::new(0.0, 0.0, 1.5);
        let b = Position::new(3.0, 4.0, 10.0);
        assert_eq!(a.distance_xy(b), 5.0);
    }
}
