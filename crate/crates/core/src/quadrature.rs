//! Fixed-order quadrature rules. All rules are normalized so that the
//! weights sum to one, i.e. they return means rather than integrals.

use crate::geometry::Point;

/// A node on `[0, 1]` with its normalized weight.
pub type Node1 = (f64, f64);

/// Gauss-Legendre rule with 3 or 5 points on `[0, 1]` (exact for degree 5 / 9).
pub fn gauss_legendre(points: usize) -> Vec<Node1> {
    match points {
        1 => vec![(0.5, 1.0)],
        3 => {
            let d = 0.5 * (3.0f64 / 5.0).sqrt();
            vec![(0.5 - d, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + d, 5.0 / 18.0)]
        }
        5 => {
            let r = (10.0f64 / 7.0).sqrt();
            let x1 = (5.0 - 2.0 * r).sqrt() / 3.0;
            let x2 = (5.0 + 2.0 * r).sqrt() / 3.0;
            let s70 = 70.0f64.sqrt();
            let w0 = 128.0 / 225.0;
            let w1 = (322.0 + 13.0 * s70) / 900.0;
            let w2 = (322.0 - 13.0 * s70) / 900.0;
            vec![
                (0.5 * (1.0 - x2), 0.5 * w2),
                (0.5 * (1.0 - x1), 0.5 * w1),
                (0.5, 0.5 * w0),
                (0.5 * (1.0 + x1), 0.5 * w1),
                (0.5 * (1.0 + x2), 0.5 * w2),
            ]
        }
        _ => panic!("unsupported Gauss-Legendre order {points}"),
    }
}

/// Mean of `f` over the segment `[a, b]` with `pieces` equal sub-segments,
/// each integrated with the given rule.
pub fn segment_mean<F, T>(a: &Point, b: &Point, rule: &[Node1], pieces: usize, mut f: F) -> T
where
    F: FnMut(Point) -> T,
    T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
{
    let mut acc = T::default();
    let scale = 1.0 / pieces as f64;
    for piece in 0..pieces {
        let s0 = piece as f64 * scale;
        for &(s, w) in rule {
            let t = s0 + s * scale;
            acc = acc + f(a + (b - a) * t) * (w * scale);
        }
    }
    acc
}

/// Dunavant's 7-point rule, exact for polynomials of degree 5, as
/// barycentric coordinates `(l0, l1, l2)` with normalized weights.
pub fn triangle_rule() -> [([f64; 3], f64); 7] {
    let s15 = 15.0f64.sqrt();
    let a1 = (9.0 - 2.0 * s15) / 21.0;
    let b1 = (6.0 + s15) / 21.0;
    let a2 = (9.0 + 2.0 * s15) / 21.0;
    let b2 = (6.0 - s15) / 21.0;
    let w1 = (155.0 + s15) / 1200.0;
    let w2 = (155.0 - s15) / 1200.0;
    let c = 1.0 / 3.0;
    [
        ([c, c, c], 9.0 / 40.0),
        ([a1, b1, b1], w1),
        ([b1, a1, b1], w1),
        ([b1, b1, a1], w1),
        ([a2, b2, b2], w2),
        ([b2, a2, b2], w2),
        ([b2, b2, a2], w2),
    ]
}

/// Sub-triangles of a uniform `m x m` refinement of `v`.
pub fn subdivide_triangle(v: &[Point; 3], m: usize) -> Vec<[Point; 3]> {
    let e1 = (v[1] - v[0]) / m as f64;
    let e2 = (v[2] - v[0]) / m as f64;
    let at = |i: usize, j: usize| v[0] + e1 * i as f64 + e2 * j as f64;
    let mut out = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..(m - j) {
            out.push([at(i, j), at(i + 1, j), at(i, j + 1)]);
            if i + j + 1 < m {
                out.push([at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)]);
            }
        }
    }
    out
}

/// Mean of `f` over a triangle using the 7-point rule on an `m x m`
/// refinement.
pub fn triangle_mean<F, T>(v: &[Point; 3], m: usize, mut f: F) -> T
where
    F: FnMut(Point) -> T,
    T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
{
    let rule = triangle_rule();
    let scale = 1.0 / (m * m) as f64;
    let mut acc = T::default();
    for t in subdivide_triangle(v, m) {
        for (l, w) in rule.iter() {
            let x = t[0] * l[0] + t[1] * l[1] + t[2] * l[2];
            acc = acc + f(x) * (w * scale);
        }
    }
    acc
}

/// Quadrature nodes of [`triangle_mean`] (used as sample points for sup norms).
pub fn triangle_nodes(v: &[Point; 3], m: usize) -> Vec<Point> {
    let rule = triangle_rule();
    subdivide_triangle(v, m)
        .iter()
        .flat_map(|t| rule.iter().map(move |(l, _)| t[0] * l[0] + t[1] * l[1] + t[2] * l[2]))
        .collect()
}
