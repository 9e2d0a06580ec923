//! Cell/face geometry for interval meshes and triangulated tori.
//!
//! Faces are stored as directed half-faces: the record for `(K, L)` carries
//! the normal outward from `K` and a barycenter on `K`'s boundary, expressed
//! in `K`'s own coordinates. Across a periodic wrap the twin record `(L, K)`
//! holds the same point translated by the lattice vector `-shift`, where
//! `shift` moves the canonical copy of `L` next to the canonical copy of `K`.

mod build;
mod io;

pub use build::{build_nonuniform_1d, build_triangulated_torus_2d, build_uniform_1d};
pub use io::{load_mesh, mesh_from_json, mesh_hash, mesh_to_json, save_mesh};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{distance_to_segment, pt, Point};

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub id: usize,
    pub volume: f64,
    pub barycenter: Point,
    pub diameter: f64,
    /// Indices into [`Mesh::vertices`]: interval endpoints in 1-D, the
    /// counter-clockwise corners of the triangle in 2-D.
    pub vertices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub id: usize,
    /// Edge length in 2-D; 1 by convention in 1-D.
    pub area: f64,
    pub barycenter: Point,
    pub normal: Point,
    /// `(K, L)`: the face is seen from `K` and leads to `L`.
    pub cells: (usize, usize),
    pub twin: usize,
    pub shift: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub dimension: usize,
    pub vertices: Vec<Point>,
    pub cells: Vec<Cell>,
    pub faces: Vec<Face>,
    /// For each cell, `(neighbor, face)` pairs in increasing face order.
    pub adjacency: Vec<Vec<(usize, usize)>>,
    pub period: Option<Vec<f64>>,
    pub h_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryReport {
    pub dimension: usize,
    pub cell_count: usize,
    pub face_count: usize,
    pub h_max: f64,
    pub min_volume: f64,
    pub max_volume: f64,
    pub total_volume: f64,
    /// Smallest `alpha` with `sum_L |K n L| <= alpha |K| / h` for every cell.
    pub alpha: f64,
    /// Smallest `beta` with `|K| >= h^d / beta` and `sum_L |K n L| <= beta h^(d-1)`.
    pub beta: f64,
}

impl Mesh {
    /// Builds derived cell data and adjacency from raw parts. Performs the
    /// structural checks needed to index safely; geometric invariants are
    /// left to [`validate`].
    pub fn assemble(
        dimension: usize,
        period: Option<Vec<f64>>,
        vertices: Vec<Point>,
        cell_vertices: Vec<Vec<usize>>,
        faces: Vec<Face>,
    ) -> Result<Mesh> {
        if dimension != 1 && dimension != 2 {
            return Err(Error::mesh(format!("unsupported dimension {dimension}")));
        }
        if let Some(p) = &period {
            if p.len() != dimension {
                return Err(Error::mesh(format!(
                    "period has {} entries for a {dimension}-D mesh",
                    p.len()
                )));
            }
        }
        let corners = dimension + 1;
        let mut cells = Vec::with_capacity(cell_vertices.len());
        for (id, vs) in cell_vertices.into_iter().enumerate() {
            if vs.len() != corners {
                return Err(Error::mesh(format!(
                    "cell {id} has {} vertices, expected {corners}",
                    vs.len()
                )));
            }
            if let Some(&bad) = vs.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::mesh(format!("cell {id} references missing vertex {bad}")));
            }
            let p: Vec<Point> = vs.iter().map(|&v| vertices[v]).collect();
            let (volume, barycenter, diameter) = if dimension == 1 {
                let w = p[1].x - p[0].x;
                (w, pt(0.5 * (p[0].x + p[1].x), 0.0), w)
            } else {
                let area = 0.5 * crate::geometry::cross(&p[0], &p[1], &p[2]);
                let c = (p[0] + p[1] + p[2]) / 3.0;
                let d = (p[1] - p[0])
                    .norm()
                    .max((p[2] - p[1]).norm())
                    .max((p[0] - p[2]).norm());
                (area, c, d)
            };
            cells.push(Cell { id, volume, barycenter, diameter, vertices: vs });
        }
        let mut adjacency = vec![Vec::new(); cells.len()];
        for (i, f) in faces.iter().enumerate() {
            if f.id != i {
                return Err(Error::mesh(format!("face at position {i} has id {}", f.id)));
            }
            let (k, l) = f.cells;
            if k >= cells.len() || l >= cells.len() {
                return Err(Error::mesh(format!("face {i} references a missing cell")));
            }
            if f.twin >= faces.len() {
                return Err(Error::mesh(format!("face {i} has missing twin {}", f.twin)));
            }
            adjacency[k].push((l, i));
        }
        let h_max = cells.iter().map(|c| c.diameter).fold(0.0, f64::max);
        Ok(Mesh { dimension, vertices, cells, faces, adjacency, period, h_max })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn is_periodic(&self) -> bool {
        self.period.is_some()
    }

    pub fn cell_points(&self, k: usize) -> Vec<Point> {
        self.cells[k].vertices.iter().map(|&v| self.vertices[v]).collect()
    }

    /// Triangle corners of cell `k` (2-D meshes only).
    pub fn triangle(&self, k: usize) -> [Point; 3] {
        let v = &self.cells[k].vertices;
        [self.vertices[v[0]], self.vertices[v[1]], self.vertices[v[2]]]
    }

    /// Endpoints of the segment carrying face `f`, in the coordinates of the
    /// cell the face is seen from, ordered so the outward normal points to
    /// the right of `a -> b`.
    pub fn face_segment(&self, f: usize) -> (Point, Point) {
        let face = &self.faces[f];
        if self.dimension == 1 {
            return (face.barycenter, face.barycenter);
        }
        let tri = self.triangle(face.cells.0);
        (0..3)
            .map(|i| (tri[i], tri[(i + 1) % 3]))
            .min_by(|x, y| {
                let dx = ((x.0 + x.1) * 0.5 - face.barycenter).norm();
                let dy = ((y.0 + y.1) * 0.5 - face.barycenter).norm();
                dx.total_cmp(&dy)
            })
            .expect("triangle has three edges")
    }

    pub fn total_volume(&self) -> f64 {
        self.cells.iter().map(|c| c.volume).sum()
    }

    /// Product of the period lengths, if periodic.
    pub fn domain_volume(&self) -> Option<f64> {
        self.period.as_ref().map(|p| p.iter().product())
    }

    /// Sum of face areas around cell `k`.
    pub fn perimeter(&self, k: usize) -> f64 {
        self.adjacency[k].iter().map(|&(_, f)| self.faces[f].area).sum()
    }
}

/// Checks every geometric invariant and computes the regularity constants.
/// The first violation found is reported with the offending cell or face.
pub fn validate(mesh: &Mesh) -> Result<GeometryReport> {
    let d = mesh.dimension;
    if mesh.cells.len() < 2 {
        return Err(Error::mesh("mesh has fewer than 2 cells"));
    }
    for c in &mesh.cells {
        if !(c.volume.is_finite() && c.volume > 0.0) {
            return Err(Error::mesh(format!("cell {} has non-positive volume {}", c.id, c.volume)));
        }
        if mesh.adjacency[c.id].is_empty() {
            return Err(Error::mesh(format!("cell {} has no faces", c.id)));
        }
    }
    let tol = 1e-12 * mesh.h_max.max(1.0);
    for f in &mesh.faces {
        let (k, l) = f.cells;
        if !(f.area.is_finite() && f.area > 0.0) {
            return Err(Error::mesh(format!("face {} has non-positive area {}", f.id, f.area)));
        }
        if d == 1 && f.area != 1.0 {
            return Err(Error::mesh(format!("1-D face {} must have unit area", f.id)));
        }
        if (f.normal.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::mesh(format!("face {} normal is not a unit vector", f.id)));
        }
        let t = &mesh.faces[f.twin];
        if t.twin != f.id || t.cells != (l, k) {
            return Err(Error::mesh(format!("face {} and its twin {} disagree on incidence", f.id, t.id)));
        }
        if t.normal != -f.normal {
            return Err(Error::mesh(format!("face {} normal is not the negation of its twin's", f.id)));
        }
        if t.area != f.area || t.shift != -f.shift {
            return Err(Error::mesh(format!("face {} area/shift inconsistent with twin {}", f.id, t.id)));
        }
        if ((t.barycenter + f.shift) - f.barycenter).norm() > tol {
            return Err(Error::mesh(format!("face {} barycenter does not match its twin", f.id)));
        }
        if d == 1 && f.normal.y != 0.0 {
            return Err(Error::mesh(format!("1-D face {} has a transverse normal", f.id)));
        }
        let pts = mesh.cell_points(k);
        let on_boundary = if d == 1 {
            pts.iter().map(|p| (p - f.barycenter).norm()).fold(f64::INFINITY, f64::min)
        } else {
            (0..3)
                .map(|i| distance_to_segment(&f.barycenter, &pts[i], &pts[(i + 1) % 3]))
                .fold(f64::INFINITY, f64::min)
        };
        if on_boundary > tol {
            return Err(Error::mesh(format!(
                "face {} barycenter is not on the boundary of cell {k}",
                f.id
            )));
        }
        if f.normal.dot(&(f.barycenter - mesh.cells[k].barycenter)) <= 0.0 {
            return Err(Error::mesh(format!("face {} normal is not outward from cell {k}", f.id)));
        }
    }
    if let Some(expected) = mesh.domain_volume() {
        let total = mesh.total_volume();
        if ((total - expected) / expected).abs() > 1e-12 {
            return Err(Error::mesh(format!(
                "total volume {total} differs from the period volume {expected}"
            )));
        }
    }
    let h = mesh.h_max;
    let hd = h.powi(d as i32);
    let hd1 = h.powi(d as i32 - 1);
    let mut alpha: f64 = 0.0;
    let mut beta: f64 = 0.0;
    for c in &mesh.cells {
        let per = mesh.perimeter(c.id);
        alpha = alpha.max(h * per / c.volume);
        beta = beta.max(hd / c.volume).max(per / hd1);
    }
    let volumes = mesh.cells.iter().map(|c| c.volume);
    Ok(GeometryReport {
        dimension: d,
        cell_count: mesh.cells.len(),
        face_count: mesh.faces.len(),
        h_max: h,
        min_volume: volumes.clone().fold(f64::INFINITY, f64::min),
        max_volume: volumes.fold(0.0, f64::max),
        total_volume: mesh.total_volume(),
        alpha,
        beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_alpha_is_two() {
        let m = build_uniform_1d(4, 1.0, true).unwrap();
        let r = validate(&m).unwrap();
        assert!((r.alpha - 2.0).abs() < 1e-12);
        assert_eq!(r.cell_count, 4);
    }

    #[test]
    fn torus_alpha_matches_worst_triangle() {
        let m = build_triangulated_torus_2d(4).unwrap();
        let r = validate(&m).unwrap();
        let expected = (2f64.sqrt() / 4.0) * 8.0 * (2.0 + 2f64.sqrt());
        assert!((r.alpha - expected).abs() < 1e-12, "{} vs {expected}", r.alpha);
        assert!((r.alpha - 9.657).abs() < 1e-3);
    }

    #[test]
    fn zero_volume_cell_is_rejected() {
        let mut m = build_uniform_1d(4, 1.0, true).unwrap();
        m.cells[2].volume = 0.0;
        let err = validate(&m).unwrap_err().to_string();
        assert!(err.contains("cell 2"), "{err}");
    }

    #[test]
    fn broken_twin_normal_is_named() {
        let mut m = build_triangulated_torus_2d(2).unwrap();
        m.faces[5].normal = -m.faces[5].normal;
        let err = validate(&m).unwrap_err().to_string();
        assert!(err.contains("face"), "{err}");
    }

    #[test]
    fn face_segment_matches_barycenter() {
        let m = build_triangulated_torus_2d(4).unwrap();
        for f in &m.faces {
            let (a, b) = m.face_segment(f.id);
            assert!(((a + b) * 0.5 - f.barycenter).norm() < 1e-14);
            let t = b - a;
            let n = pt(t.y, -t.x) / t.norm();
            assert!((n - f.normal).norm() < 1e-14);
        }
    }
}
