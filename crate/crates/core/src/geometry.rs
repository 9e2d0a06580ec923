//! Points live in the plane; 1-D meshes use the first coordinate only.

use nalgebra::Vector2;

pub type Point = Vector2<f64>;

#[inline]
pub fn pt(x: f64, y: f64) -> Point {
    Vector2::new(x, y)
}

#[inline]
pub fn pt1(x: f64) -> Point {
    Vector2::new(x, 0.0)
}

/// Twice the signed area of the triangle `(a, b, c)`.
#[inline]
pub fn cross(a: &Point, b: &Point, c: &Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

pub fn triangle_area(v: &[Point; 3]) -> f64 {
    0.5 * cross(&v[0], &v[1], &v[2])
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn distance_to_segment(p: &Point, a: &Point, b: &Point) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Componentwise distance on a torus with the given periods (or plain
/// Euclidean distance when `period` is `None`).
pub fn periodic_distance(a: &Point, b: &Point, period: Option<&[f64]>) -> f64 {
    let mut d = a - b;
    if let Some(period) = period {
        for (i, &l) in period.iter().enumerate() {
            d[i] -= l * (d[i] / l).round();
        }
    }
    d.norm()
}

/// Wraps `x` into `[0, period)`.
#[inline]
pub fn wrap(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}
