use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

pub type Point2 = Vector2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RobotId(pub u32);

impl fmt::Display for RobotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(theta: f64) -> f64 {
    let mut a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

pub fn rotation(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2D {
    pub position: Point2,
    pub heading: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            position: Point2::new(x, y),
            heading: normalize_angle(heading),
        }
    }

    /// Maps a point from this pose's body frame into the parent frame.
    pub fn transform_point(&self, p: &Point2) -> Point2 {
        rotation(self.heading) * p + self.position
    }

    /// Maps a parent-frame point into this pose's body frame.
    pub fn inverse_transform_point(&self, p: &Point2) -> Point2 {
        rotation(-self.heading) * (p - self.position)
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn contains(&self, p: &Point2) -> bool {
        p.x >= self.min[0] && p.x <= self.max[0] && p.y >= self.min[1] && p.y <= self.max[1]
    }

    pub fn area(&self) -> f64 {
        (self.max[0] - self.min[0]) * (self.max[1] - self.min[1])
    }

    /// The four boundary segments, counter-clockwise from the min corner.
    pub fn edges(&self) -> [(Point2, Point2); 4] {
        let a = Point2::new(self.min[0], self.min[1]);
        let b = Point2::new(self.max[0], self.min[1]);
        let c = Point2::new(self.max[0], self.max[1]);
        let d = Point2::new(self.min[0], self.max[1]);
        [(a, b), (b, c), (c, d), (d, a)]
    }
}

pub fn to_point(p: [f64; 2]) -> Point2 {
    Point2::new(p[0], p[1])
}
