//! Planar geometry used by positions, velocities and zone boundaries.

use std::fmt;
use std::ops::{Add, Mul, Sub};

/// A point (or vector) in the plane, in meters (or m/s for velocities).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    /// Euclidean length when the point is read as a vector.
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Unit vector in the same direction, or the zero vector.
    pub fn unit(self) -> Point {
        let n = self.norm();
        if n == 0.0 {
            Point::ORIGIN
        } else {
            Point::new(self.x / n, self.y / n)
        }
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Euclidean distance between two points.
pub fn distance(a: Point, b: Point) -> f64 {
    (a - b).norm()
}

/// Closed axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(min: Point, max: Point) -> Self {
        debug_assert!(min.x <= max.x && min.y <= max.y);
        Rect { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> Point {
        Point::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
        )
    }

    /// Boundary points are contained.
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// Nearest point of the rectangle to `p`.
    pub fn clamp(&self, p: Point) -> Point {
        Point::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
        )
    }

    /// True when the closed disc touches the rectangle.
    pub fn intersects_circle(&self, center: Point, radius: f64) -> bool {
        distance(self.clamp(center), center) <= radius
    }

    /// True when the whole closed disc lies inside the rectangle.
    pub fn contains_circle(&self, center: Point, radius: f64) -> bool {
        center.x - radius >= self.min.x
            && center.x + radius <= self.max.x
            && center.y - radius >= self.min.y
            && center.y + radius <= self.max.y
    }

    /// Reflects a point that overshot the walls back inside (mirror image per axis).
    ///
    /// Returns the reflected point and whether the x / y components were mirrored,
    /// so callers can flip the matching velocity components.
    pub fn reflect(&self, p: Point) -> (Point, bool, bool) {
        let (x, fx) = reflect_axis(p.x, self.min.x, self.max.x);
        let (y, fy) = reflect_axis(p.y, self.min.y, self.max.y);
        (Point::new(x, y), fx, fy)
    }
}

fn reflect_axis(mut v: f64, lo: f64, hi: f64) -> (f64, bool) {
    let span = hi - lo;
    if span <= 0.0 {
        return (lo, v != lo);
    }
    let mut flips = 0u32;
    // A step may overshoot by more than one span only with absurd dt; loop is bounded.
    while v < lo || v > hi {
        if v < lo {
            v = 2.0 * lo - v;
        } else {
            v = 2.0 * hi - v;
        }
        flips += 1;
        if flips > 64 {
            v = v.clamp(lo, hi);
            break;
        }
    }
    (v, flips % 2 == 1)
}
