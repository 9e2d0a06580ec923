use super::{Face, Mesh};
use crate::error::{Error, Result};
use crate::geometry::{pt, pt1, Point};

/// `n_cells` intervals of width `length / n_cells`.
pub fn build_uniform_1d(n_cells: usize, length: f64, periodic: bool) -> Result<Mesh> {
    if n_cells < 2 {
        return Err(Error::invalid(format!("need at least 2 cells, got {n_cells}")));
    }
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::invalid(format!("length must be positive, got {length}")));
    }
    let xs: Vec<f64> = (0..=n_cells)
        .map(|i| i as f64 * length / n_cells as f64)
        .collect();
    interval_mesh(xs, periodic)
}

/// Intervals of the given widths laid out from the origin.
pub fn build_nonuniform_1d(widths: &[f64], periodic: bool) -> Result<Mesh> {
    if widths.len() < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 cells, got {}",
            widths.len()
        )));
    }
    if let Some((i, w)) = widths.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::invalid(format!("width {i} is not positive: {w}")));
    }
    let mut xs = Vec::with_capacity(widths.len() + 1);
    let mut x = 0.0;
    xs.push(x);
    for w in widths {
        x += w;
        xs.push(x);
    }
    interval_mesh(xs, periodic)
}

fn interval_mesh(xs: Vec<f64>, periodic: bool) -> Result<Mesh> {
    let n = xs.len() - 1;
    let length = xs[n];
    let mut faces = Vec::new();
    let mut pair = |k: usize, l: usize, at: f64, normal: f64, shift: f64| {
        let id = faces.len();
        faces.push(Face {
            id,
            area: 1.0,
            barycenter: pt1(at),
            normal: pt1(normal),
            cells: (k, l),
            twin: id + 1,
            shift: pt1(shift),
        });
        faces.push(Face {
            id: id + 1,
            area: 1.0,
            barycenter: pt1(at - shift),
            normal: pt1(-normal),
            cells: (l, k),
            twin: id,
            shift: pt1(-shift),
        });
    };
    for i in 1..n {
        pair(i - 1, i, xs[i], 1.0, 0.0);
    }
    if periodic {
        pair(n - 1, 0, xs[n], 1.0, length);
    }
    let vertices = xs.iter().map(|&x| pt1(x)).collect();
    let cells = (0..n).map(|i| vec![i, i + 1]).collect();
    Mesh::assemble(1, periodic.then(|| vec![length]), vertices, cells, faces)
}

/// Unit torus cut into an `n x n` grid of squares, each split along its
/// anti-diagonal into a lower-left and an upper-right triangle.
///
/// Cell `2 (j n + i)` is the lower-left triangle of square `(i, j)` and
/// `2 (j n + i) + 1` the upper-right one.
pub fn build_triangulated_torus_2d(n: usize) -> Result<Mesh> {
    if n < 2 {
        return Err(Error::invalid(format!("need n >= 2, got {n}")));
    }
    let nf = n as f64;
    let vid = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(pt(i as f64 / nf, j as f64 / nf));
        }
    }
    let lower = |i: usize, j: usize| 2 * (j * n + i);
    let upper = |i: usize, j: usize| 2 * (j * n + i) + 1;
    let mut cells = vec![Vec::new(); 2 * n * n];
    for j in 0..n {
        for i in 0..n {
            cells[lower(i, j)] = vec![vid(i, j), vid(i + 1, j), vid(i, j + 1)];
            cells[upper(i, j)] = vec![vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)];
        }
    }
    let v = |i: usize, j: usize| vertices[vid(i, j)];
    let mut faces: Vec<Face> = Vec::with_capacity(6 * n * n);
    let mut pair = |k: usize, l: usize, a: Point, b: Point, shift: Point| {
        let id = faces.len();
        let t = b - a;
        let area = t.norm();
        let normal = pt(t.y, -t.x) / area;
        let mid = (a + b) * 0.5;
        faces.push(Face { id, area, barycenter: mid, normal, cells: (k, l), twin: id + 1, shift });
        faces.push(Face {
            id: id + 1,
            area,
            barycenter: mid - shift,
            normal: -normal,
            cells: (l, k),
            twin: id,
            shift: -shift,
        });
    };
    for j in 0..n {
        for i in 0..n {
            let k = lower(i, j);
            // bottom edge, shared with the upper triangle of the square below
            let (jb, sy) = if j == 0 { (n - 1, -1.0) } else { (j - 1, 0.0) };
            pair(k, upper(i, jb), v(i, j), v(i + 1, j), pt(0.0, sy));
            // anti-diagonal, shared with the upper triangle of the same square
            pair(k, upper(i, j), v(i + 1, j), v(i, j + 1), pt(0.0, 0.0));
            // left edge, shared with the upper triangle of the square to the left
            let (il, sx) = if i == 0 { (n - 1, -1.0) } else { (i - 1, 0.0) };
            pair(k, upper(il, j), v(i, j + 1), v(i, j), pt(sx, 0.0));
        }
    }
    Mesh::assemble(2, Some(vec![1.0, 1.0]), vertices, cells, faces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::validate;

    #[test]
    fn uniform_periodic_four_cells() {
        let m = build_uniform_1d(4, 1.0, true).unwrap();
        assert_eq!(m.len(), 4);
        assert!(m.cells.iter().all(|c| (c.volume - 0.25).abs() < 1e-15));
        assert!((m.h_max - 0.25).abs() < 1e-15);
        assert!(m.adjacency.iter().all(|a| a.len() == 2));
    }

    #[test]
    fn two_cell_cycle_has_distinct_faces() {
        let m = build_uniform_1d(2, 1.0, true).unwrap();
        for k in 0..2 {
            let adj = &m.adjacency[k];
            assert_eq!(adj.len(), 2);
            assert!(adj.iter().all(|&(l, _)| l == 1 - k));
            assert_ne!(adj[0].1, adj[1].1);
        }
        validate(&m).unwrap();
    }

    #[test]
    fn open_mesh_boundary_cells_have_one_neighbor() {
        let m = build_uniform_1d(10, 2.0, false).unwrap();
        assert_eq!(m.adjacency[0].len(), 1);
        assert_eq!(m.adjacency[9].len(), 1);
        assert!(m.adjacency[1..9].iter().all(|a| a.len() == 2));
        validate(&m).unwrap();
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(build_uniform_1d(1, 1.0, true).is_err());
        assert!(build_nonuniform_1d(&[0.5], true).is_err());
        assert!(build_nonuniform_1d(&[], true).is_err());
        assert!(build_nonuniform_1d(&[0.5, -0.1], false).is_err());
        assert!(build_triangulated_torus_2d(1).is_err());
    }

    #[test]
    fn nonuniform_widths() {
        let m = build_nonuniform_1d(&[0.1, 0.2, 0.1, 0.2], true).unwrap();
        assert!((m.h_max - 0.2).abs() < 1e-15);
        assert!((m.total_volume() - 0.6).abs() < 1e-15);
        validate(&m).unwrap();

        let widths: Vec<f64> = (0..10).map(|k| 0.9f64.powi(k)).collect();
        let g = build_nonuniform_1d(&widths, false).unwrap();
        assert!((g.h_max - widths[0]).abs() < 1e-15);
        assert!(g.cells.windows(2).all(|w| w[1].volume < w[0].volume));
    }

    #[test]
    fn torus_geometry() {
        let m = build_triangulated_torus_2d(4).unwrap();
        assert_eq!(m.len(), 32);
        assert!(m.cells.iter().all(|c| (c.volume - 0.03125).abs() < 1e-15));
        assert!((m.h_max - 2f64.sqrt() / 4.0).abs() < 1e-15);
        assert!((m.total_volume() - 1.0).abs() < 1e-14);
        for k in 0..m.len() {
            assert_eq!(m.adjacency[k].len(), 3);
        }
        for f in &m.faces {
            let axis = (f.area - 0.25).abs() < 1e-15;
            let diag = (f.area - 2f64.sqrt() / 4.0).abs() < 1e-15;
            assert!(axis || diag, "face {} area {}", f.id, f.area);
        }
        validate(&m).unwrap();
    }

    #[test]
    fn smallest_torus_validates() {
        let m = build_triangulated_torus_2d(2).unwrap();
        assert_eq!(m.len(), 8);
        validate(&m).unwrap();
    }
}
