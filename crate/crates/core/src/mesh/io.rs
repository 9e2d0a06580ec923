//! Versioned JSON persistence for meshes.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Face, Mesh};
use crate::error::{Error, Result};
use crate::geometry::{pt, Point};

const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshFile {
    version: u32,
    dimension: usize,
    periodic: Option<Vec<f64>>,
    vertices: Vec<Vec<f64>>,
    cells: Vec<CellRecord>,
    faces: Vec<FaceRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellRecord {
    id: usize,
    vertices: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FaceRecord {
    id: usize,
    cells: [usize; 2],
    normal: Vec<f64>,
    barycenter: Vec<f64>,
    area: f64,
    twin: usize,
    shift: Vec<f64>,
}

fn coords(p: &Point, d: usize) -> Vec<f64> {
    p.iter().take(d).copied().collect()
}

fn point(v: &[f64], d: usize, what: &str) -> Result<Point> {
    if v.len() != d {
        return Err(Error::Parse {
            context: what.to_string(),
            message: format!("expected {d} coordinates, found {}", v.len()),
        });
    }
    Ok(if d == 1 { pt(v[0], 0.0) } else { pt(v[0], v[1]) })
}

pub fn mesh_to_json(mesh: &Mesh) -> String {
    let d = mesh.dimension;
    let file = MeshFile {
        version: VERSION,
        dimension: d,
        periodic: mesh.period.clone(),
        vertices: mesh.vertices.iter().map(|p| coords(p, d)).collect(),
        cells: mesh
            .cells
            .iter()
            .map(|c| CellRecord { id: c.id, vertices: c.vertices.clone() })
            .collect(),
        faces: mesh
            .faces
            .iter()
            .map(|f| FaceRecord {
                id: f.id,
                cells: [f.cells.0, f.cells.1],
                normal: coords(&f.normal, d),
                barycenter: coords(&f.barycenter, d),
                area: f.area,
                twin: f.twin,
                shift: coords(&f.shift, d),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("mesh serialization cannot fail")
}

pub fn mesh_from_json(text: &str, context: &str) -> Result<Mesh> {
    let file: MeshFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        context: context.to_string(),
        message: e.to_string(),
    })?;
    if file.version != VERSION {
        return Err(Error::Parse {
            context: format!("{context}: version"),
            message: format!("unsupported version {}", file.version),
        });
    }
    let d = file.dimension;
    if d != 1 && d != 2 {
        return Err(Error::Parse {
            context: format!("{context}: dimension"),
            message: format!("unsupported dimension {d}"),
        });
    }
    let vertices = file
        .vertices
        .iter()
        .enumerate()
        .map(|(i, v)| point(v, d, &format!("{context}: vertices[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    let mut cell_vertices = Vec::with_capacity(file.cells.len());
    for (i, c) in file.cells.into_iter().enumerate() {
        if c.id != i {
            return Err(Error::Parse {
                context: format!("{context}: cells[{i}].id"),
                message: format!("expected id {i}, found {}", c.id),
            });
        }
        cell_vertices.push(c.vertices);
    }
    let mut faces = Vec::with_capacity(file.faces.len());
    for (i, f) in file.faces.iter().enumerate() {
        let at = |field: &str| format!("{context}: faces[{i}].{field}");
        faces.push(Face {
            id: f.id,
            area: f.area,
            barycenter: point(&f.barycenter, d, &at("barycenter"))?,
            normal: point(&f.normal, d, &at("normal"))?,
            cells: (f.cells[0], f.cells[1]),
            twin: f.twin,
            shift: point(&f.shift, d, &at("shift"))?,
        });
    }
    Mesh::assemble(d, file.periodic, vertices, cell_vertices, faces)
}

pub fn save_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, mesh_to_json(mesh))?;
    Ok(())
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    mesh_from_json(&text, &path.display().to_string())
}

/// Short content hash of the serialized mesh, used to tie dumps to meshes.
pub fn mesh_hash(mesh: &Mesh) -> String {
    let digest = Sha256::digest(mesh_to_json(mesh).as_bytes());
    hex::encode(&digest[..8])
}
