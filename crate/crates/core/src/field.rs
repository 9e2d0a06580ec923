//! Velocity catalog and the discrete moments the scheme consumes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::{pt, Point};
use crate::mesh::Mesh;
use crate::quadrature::{gauss_legendre, segment_mean, triangle_mean};

/// Time-independent velocity fields with analytic bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VelocityField {
    /// Uniform velocity; `v` has one entry per space dimension.
    Constant { v: Vec<f64> },
    /// `a(x) = base + amp sin(2 pi freq x)`.
    #[serde(rename = "sine_1d")]
    Sine1d { base: f64, amp: f64, freq: f64 },
    /// `a(x) = slope x`. Unbounded; only meaningful on open meshes.
    #[serde(rename = "linear_1d")]
    Linear1d { slope: f64 },
    /// Divergence-free cellular flow derived from the stream function
    /// `psi = -amp cos(2 pi f x) cos(2 pi f y) / (2 pi f)`:
    /// `a = amp (-cos(2 pi f x) sin(2 pi f y), sin(2 pi f x) cos(2 pi f y))`.
    #[serde(rename = "stream_2d")]
    Stream2d { amp: f64, freq: f64 },
    /// `a = (bx + amp sin(2 pi f x), by + amp sin(2 pi f y))`, with
    /// `div a = 2 pi f amp (cos(2 pi f x) + cos(2 pi f y))`.
    #[serde(rename = "compressible_2d")]
    Compressible2d { base: [f64; 2], amp: f64, freq: f64 },
}

impl VelocityField {
    pub fn constant(v: &[f64]) -> Self {
        VelocityField::Constant { v: v.to_vec() }
    }

    pub fn eval(&self, x: &Point) -> Point {
        match self {
            VelocityField::Constant { v } => pt(v[0], v.get(1).copied().unwrap_or(0.0)),
            VelocityField::Sine1d { base, amp, freq } => {
                pt(base + amp * (2.0 * PI * freq * x.x).sin(), 0.0)
            }
            VelocityField::Linear1d { slope } => pt(slope * x.x, 0.0),
            VelocityField::Stream2d { amp, freq } => {
                let (sx, cx) = (2.0 * PI * freq * x.x).sin_cos();
                let (sy, cy) = (2.0 * PI * freq * x.y).sin_cos();
                pt(-amp * cx * sy, amp * sx * cy)
            }
            VelocityField::Compressible2d { base, amp, freq } => pt(
                base[0] + amp * (2.0 * PI * freq * x.x).sin(),
                base[1] + amp * (2.0 * PI * freq * x.y).sin(),
            ),
        }
    }

    /// Pointwise divergence.
    pub fn divergence(&self, x: &Point) -> f64 {
        match self {
            VelocityField::Constant { .. } | VelocityField::Stream2d { .. } => 0.0,
            VelocityField::Sine1d { amp, freq, .. } => {
                2.0 * PI * freq * amp * (2.0 * PI * freq * x.x).cos()
            }
            VelocityField::Linear1d { slope } => *slope,
            VelocityField::Compressible2d { amp, freq, .. } => {
                let w = 2.0 * PI * freq;
                w * amp * ((w * x.x).cos() + (w * x.y).cos())
            }
        }
    }

    /// `M = sup |a|` (infinite for the unbounded linear field).
    pub fn sup_norm(&self) -> f64 {
        match self {
            VelocityField::Constant { v } => v.iter().map(|c| c * c).sum::<f64>().sqrt(),
            VelocityField::Sine1d { base, amp, .. } => base.abs() + amp.abs(),
            VelocityField::Linear1d { slope } => {
                if *slope == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            VelocityField::Stream2d { amp, .. } => amp.abs(),
            VelocityField::Compressible2d { base, amp, .. } => {
                ((base[0].abs() + amp.abs()).powi(2) + (base[1].abs() + amp.abs()).powi(2)).sqrt()
            }
        }
    }

    /// Lipschitz constant `kappa`.
    pub fn lipschitz(&self) -> f64 {
        match self {
            VelocityField::Constant { .. } => 0.0,
            VelocityField::Sine1d { amp, freq, .. }
            | VelocityField::Stream2d { amp, freq }
            | VelocityField::Compressible2d { amp, freq, .. } => 2.0 * PI * (freq * amp).abs(),
            VelocityField::Linear1d { slope } => slope.abs(),
        }
    }

    /// `sup |div a|`.
    pub fn divergence_bound(&self) -> f64 {
        match self {
            VelocityField::Constant { .. } | VelocityField::Stream2d { .. } => 0.0,
            VelocityField::Sine1d { amp, freq, .. } => 2.0 * PI * (freq * amp).abs(),
            VelocityField::Linear1d { slope } => slope.abs(),
            VelocityField::Compressible2d { amp, freq, .. } => 4.0 * PI * (freq * amp).abs(),
        }
    }

    pub fn is_divergence_free(&self) -> bool {
        self.divergence_bound() == 0.0
    }

    /// Space dimension the field is written for, when it is fixed.
    pub fn dimension(&self) -> Option<usize> {
        match self {
            VelocityField::Constant { v } => Some(v.len()),
            VelocityField::Sine1d { .. } | VelocityField::Linear1d { .. } => Some(1),
            VelocityField::Stream2d { .. } | VelocityField::Compressible2d { .. } => Some(2),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, VelocityField::Constant { .. })
    }

    /// Exact mean over the segment `[a, b]` where the antiderivative is
    /// elementary; `None` otherwise.
    pub fn exact_segment_mean(&self, a: &Point, b: &Point) -> Option<Point> {
        match self {
            VelocityField::Constant { .. } => Some(self.eval(a)),
            VelocityField::Linear1d { .. } => Some((self.eval(a) + self.eval(b)) * 0.5),
            VelocityField::Sine1d { base, amp, freq } => {
                let w = 2.0 * PI * freq;
                Some(pt(base + amp * mean_sin(w * a.x, w * (b.x - a.x)), 0.0))
            }
            VelocityField::Stream2d { amp, freq } => {
                let w = 2.0 * PI * freq;
                let (x0, x1) = (w * a.x, w * (b.x - a.x));
                let (y0, y1) = (w * a.y, w * (b.y - a.y));
                // cos X sin Y = (sin(Y+X) + sin(Y-X)) / 2, sin X cos Y = (sin(X+Y) + sin(X-Y)) / 2
                let s_plus = mean_sin(x0 + y0, x1 + y1);
                let s_yx = mean_sin(y0 - x0, y1 - x1);
                let s_xy = mean_sin(x0 - y0, x1 - y1);
                Some(pt(-amp * 0.5 * (s_plus + s_yx), amp * 0.5 * (s_plus + s_xy)))
            }
            VelocityField::Compressible2d { base, amp, freq } => {
                let w = 2.0 * PI * freq;
                Some(pt(
                    base[0] + amp * mean_sin(w * a.x, w * (b.x - a.x)),
                    base[1] + amp * mean_sin(w * a.y, w * (b.y - a.y)),
                ))
            }
        }
    }

    /// Sign of `a` on the interval `[x0, x1]`: `Some(1)` if `a > 0`
    /// throughout, `Some(-1)` if `a < 0` throughout, `None` if `a` vanishes
    /// somewhere in it.
    pub fn sign_on_interval(&self, x0: f64, x1: f64) -> Option<f64> {
        let (lo, hi) = match self {
            VelocityField::Constant { v } => (v[0], v[0]),
            VelocityField::Linear1d { slope } => {
                let (a, b) = (slope * x0, slope * x1);
                (a.min(b), a.max(b))
            }
            VelocityField::Sine1d { base, amp, freq } => {
                let w = 2.0 * PI * freq;
                let (smin, smax) = sin_range(w * x0, w * x1);
                let (a, b) = (base + amp * smin, base + amp * smax);
                (a.min(b), a.max(b))
            }
            _ => {
                let vals: Vec<f64> = (0..=8)
                    .map(|i| self.eval(&pt(x0 + (x1 - x0) * i as f64 / 8.0, 0.0)).x)
                    .collect();
                (
                    vals.iter().copied().fold(f64::INFINITY, f64::min),
                    vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                )
            }
        };
        if lo > 0.0 {
            Some(1.0)
        } else if hi < 0.0 {
            Some(-1.0)
        } else {
            None
        }
    }
}

/// `int_0^1 sin(c0 + c1 s) ds`.
pub(crate) fn mean_sin(c0: f64, c1: f64) -> f64 {
    (c0 + 0.5 * c1).sin() * sinc(0.5 * c1)
}

fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-4 {
        1.0 - t * t / 6.0
    } else {
        t.sin() / t
    }
}

/// Range of `sin` over `[t0, t1]` (either order).
fn sin_range(t0: f64, t1: f64) -> (f64, f64) {
    let (a, b) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
    let mut lo = a.sin().min(b.sin());
    let mut hi = a.sin().max(b.sin());
    let contains = |c: f64| {
        let k = ((a - c) / (2.0 * PI)).ceil();
        c + 2.0 * PI * k <= b
    };
    if contains(0.5 * PI) {
        hi = 1.0;
    }
    if contains(-0.5 * PI) {
        lo = -1.0;
    }
    (lo, hi)
}

/// Face means `a_{K,L}`, normal fluxes `<a_{K,L}, n_{K,L}>`, cell means
/// `a_K` and discrete divergences `delta_K`.
#[derive(Debug, Clone)]
pub struct FieldMoments {
    pub face_mean: Vec<Point>,
    pub face_flux: Vec<f64>,
    pub cell_mean: Vec<Point>,
    pub divergence: Vec<f64>,
}

impl FieldMoments {
    /// Twin half-faces share one mean and carry exactly opposite fluxes.
    pub fn compute(mesh: &Mesh, field: &VelocityField) -> FieldMoments {
        let nf = mesh.faces.len();
        let mut face_mean = vec![Point::zeros(); nf];
        let mut face_flux = vec![0.0; nf];
        for f in &mesh.faces {
            if f.id > f.twin {
                continue;
            }
            let mean = face_mean_of(mesh, field, f.id);
            let flux = mean.dot(&f.normal);
            face_mean[f.id] = mean;
            face_mean[f.twin] = mean;
            face_flux[f.id] = flux;
            face_flux[f.twin] = -flux;
        }
        let cell_mean = (0..mesh.len()).map(|k| cell_mean(mesh, field, k)).collect();
        let divergence = (0..mesh.len())
            .map(|k| {
                let s: f64 = mesh.adjacency[k]
                    .iter()
                    .map(|&(_, f)| mesh.faces[f].area * face_flux[f])
                    .sum();
                s / mesh.cells[k].volume
            })
            .collect();
        FieldMoments { face_mean, face_flux, cell_mean, divergence }
    }

    pub fn max_abs_divergence(&self) -> f64 {
        self.divergence.iter().fold(0.0, |m, d| m.max(d.abs()))
    }
}

/// `a_{K,L}`: the point value in 1-D; the exact segment mean in 2-D when the
/// catalog entry allows it, 3-point Gauss-Legendre otherwise.
pub fn face_mean_of(mesh: &Mesh, field: &VelocityField, f: usize) -> Point {
    let face = &mesh.faces[f];
    if mesh.dimension == 1 {
        return field.eval(&face.barycenter);
    }
    let (a, b) = mesh.face_segment(f);
    field
        .exact_segment_mean(&a, &b)
        .unwrap_or_else(|| gauss_face_mean(field, &a, &b))
}

/// 3-point Gauss-Legendre segment mean.
pub fn gauss_face_mean(field: &VelocityField, a: &Point, b: &Point) -> Point {
    segment_mean(a, b, &gauss_legendre(3), 1, |x| field.eval(&x))
}

/// `a_K = |K|^{-1} int_K a`.
pub fn cell_mean(mesh: &Mesh, field: &VelocityField, k: usize) -> Point {
    if field.is_constant() {
        return field.eval(&mesh.cells[k].barycenter);
    }
    if mesh.dimension == 1 {
        let p = mesh.cell_points(k);
        segment_mean(&p[0], &p[1], &gauss_legendre(5), 2, |x| field.eval(&x))
    } else {
        triangle_mean(&mesh.triangle(k), 4, |x| field.eval(&x))
    }
}

/// `delta_K = |K|^-1 sum_f |f| phi_f` for a single cell, each face mean taken
/// on the canonical half of its twin pair as in [`FieldMoments::compute`].
pub fn cell_divergence(field: &VelocityField, k: usize, mesh: &Mesh) -> f64 {
    let s: f64 = mesh.adjacency[k]
        .iter()
        .map(|&(_, f)| {
            let face = &mesh.faces[f];
            let mean = face_mean_of(mesh, field, f.min(face.twin));
            let flux = if f <= face.twin { mean.dot(&face.normal) } else { -mean.dot(&mesh.faces[face.twin].normal) };
            face.area * flux
        })
        .sum();
    s / mesh.cells[k].volume
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_triangulated_torus_2d, build_uniform_1d};

    fn composite_mean(field: &VelocityField, a: &Point, b: &Point, n: usize) -> Point {
        // Independent oracle: 10^4-point composite midpoint rule.
        let mut acc = Point::zeros();
        for i in 0..n {
            let t = (i as f64 + 0.5) / n as f64;
            acc += field.eval(&(a + (b - a) * t));
        }
        acc / n as f64
    }

    #[test]
    fn constant_moments() {
        let m = build_triangulated_torus_2d(4).unwrap();
        let f = VelocityField::constant(&[1.0, 0.0]);
        let mo = FieldMoments::compute(&m, &f);
        assert!(mo.face_mean.iter().all(|a| *a == pt(1.0, 0.0)));
        assert!(mo.cell_mean.iter().all(|a| *a == pt(1.0, 0.0)));
        assert!(mo.divergence.iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn one_d_face_mean_is_point_value() {
        let m = build_uniform_1d(4, 1.0, true).unwrap();
        let f = VelocityField::Sine1d { base: 0.0, amp: 1.0, freq: 1.0 };
        let face = m.faces.iter().find(|fc| (fc.barycenter.x - 0.25).abs() < 1e-15).unwrap();
        assert!((face_mean_of(&m, &f, face.id).x - 1.0).abs() < 1e-15);
    }

    #[test]
    fn stream_face_mean_matches_composite_rule() {
        let f = VelocityField::Stream2d { amp: 1.0, freq: 1.0 };
        let segments = [
            (pt(0.0, 0.25), pt(0.25, 0.25)),
            (pt(0.1, 0.3), pt(0.35, 0.3)),
            (pt(0.25, 0.0), pt(0.0, 0.25)),
            (pt(0.5, 0.5), pt(0.5, 0.75)),
        ];
        for (a, b) in segments {
            let exact = f.exact_segment_mean(&a, &b).unwrap();
            let oracle = composite_mean(&f, &a, &b, 10_000);
            let scale = oracle.norm().max(1e-3);
            assert!((exact - oracle).norm() / scale < 1e-6, "{a:?}-{b:?}");
            let gauss = gauss_face_mean(&f, &a, &b);
            assert!((gauss - oracle).norm() / scale < 1e-3);
        }
    }

    #[test]
    fn compressible_face_mean_matches_composite_rule() {
        let f = VelocityField::Compressible2d { base: [0.3, -0.2], amp: 0.5, freq: 1.0 };
        let (a, b) = (pt(0.25, 0.0), pt(0.0, 0.25));
        let exact = f.exact_segment_mean(&a, &b).unwrap();
        let oracle = composite_mean(&f, &a, &b, 10_000);
        assert!((exact - oracle).norm() / oracle.norm() < 1e-6);
    }

    #[test]
    fn cell_mean_affine_and_trig() {
        let m = build_uniform_1d(4, 1.0, false).unwrap();
        let f = VelocityField::Linear1d { slope: 1.0 };
        assert!((cell_mean(&m, &f, 0).x - 0.125).abs() < 1e-15);

        let t = build_triangulated_torus_2d(4).unwrap();
        let s = VelocityField::Stream2d { amp: 1.0, freq: 1.0 };
        for k in [0usize, 5, 17] {
            let q = cell_mean(&t, &s, k);
            // refinement oracle: centroid rule on 64^2 and 128^2 subtriangles,
            // Richardson-extrapolated to cancel the O(h^2) term
            let tri = t.triangle(k);
            let centroid = |m: usize| {
                let subs = crate::quadrature::subdivide_triangle(&tri, m);
                subs.iter().fold(Point::zeros(), |a, st| a + s.eval(&((st[0] + st[1] + st[2]) / 3.0)))
                    / subs.len() as f64
            };
            let oracle = (centroid(128) * 4.0 - centroid(64)) / 3.0;
            assert!((q - oracle).norm() < 1e-9, "cell {k}: {q:?} {oracle:?}");
        }
    }

    #[test]
    fn divergence_from_endpoint_values() {
        let m = build_uniform_1d(8, 1.0, true).unwrap();
        let f = VelocityField::Sine1d { base: 1.0, amp: 0.5, freq: 1.0 };
        let mo = FieldMoments::compute(&m, &f);
        let expected = 0.5 * (PI / 4.0).sin() / 0.125;
        assert!((cell_divergence(&f, 0, &m) - expected).abs() < 1e-12);
        for k in 0..m.len() {
            assert_eq!(cell_divergence(&f, k, &m), mo.divergence[k]);
        }
        assert!((expected - 2.82843).abs() < 1e-5);
    }

    #[test]
    fn stream_field_is_discretely_divergence_free() {
        for n in [2, 4, 8, 16] {
            let m = build_triangulated_torus_2d(n).unwrap();
            let mo = FieldMoments::compute(&m, &VelocityField::Stream2d { amp: 1.0, freq: 1.0 });
            for k in 0..m.len() {
                let s: f64 = m.adjacency[k]
                    .iter()
                    .map(|&(_, f)| m.faces[f].area * mo.face_flux[f])
                    .sum();
                assert!(s.abs() < 1e-12, "n={n} cell {k}: {s}");
            }
        }
    }

    #[test]
    fn sign_on_interval_detects_zeros() {
        let f = VelocityField::Sine1d { base: 0.0, amp: 1.0, freq: 1.0 };
        assert_eq!(f.sign_on_interval(0.1, 0.4), Some(1.0));
        assert_eq!(f.sign_on_interval(0.6, 0.9), Some(-1.0));
        assert_eq!(f.sign_on_interval(0.4, 0.6), None);
        let g = VelocityField::Sine1d { base: 1.0, amp: 0.5, freq: 1.0 };
        assert_eq!(g.sign_on_interval(0.0, 1.0), Some(1.0));
        let h = VelocityField::Sine1d { base: 0.9, amp: 1.0, freq: 1.0 };
        assert_eq!(h.sign_on_interval(0.70, 0.80), Some(-1.0));
        assert_eq!(h.sign_on_interval(0.65, 0.75), None);
    }

    #[test]
    fn field_json_shape() {
        let f: VelocityField =
            serde_json::from_str(r#"{"kind":"sine_1d","base":1.0,"amp":0.5,"freq":1.0}"#).unwrap();
        assert_eq!(f, VelocityField::Sine1d { base: 1.0, amp: 0.5, freq: 1.0 });
        let c: VelocityField = serde_json::from_str(r#"{"kind":"constant","v":[1.0,0.0]}"#).unwrap();
        assert_eq!(c.dimension(), Some(2));
    }
}
