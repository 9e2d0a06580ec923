//! Upwind transition kernels `p`, `q`, `gamma` and their diagnostics.
//!
//! Rows are stored face by face: two distinct faces may lead to the same
//! neighbour (2-cell rings, the `n = 2` torus), and the chain needs to know
//! which face a jump crossed.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::{FieldMoments, VelocityField};
use crate::geometry::Point;
use crate::mesh::{mesh_hash, Mesh};

/// Slack accepted on the assembled CFL sum before it counts as a violation.
pub const CFL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// `p`, upwind weights for `a`.
    Forward,
    /// `q`, upwind weights for `-a`; rows need not sum to 1.
    Co,
    /// `gamma = q / (1 + delta_K dt)`.
    Reversed,
}

impl KernelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            KernelKind::Forward => "forward",
            KernelKind::Co => "co",
            KernelKind::Reversed => "reversed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEntry {
    pub face: usize,
    pub target: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    pub kind: KernelKind,
    pub dt: f64,
    row_ptr: Vec<usize>,
    entries: Vec<KernelEntry>,
    self_weight: Vec<f64>,
}

impl TransitionKernel {
    fn from_rows(kind: KernelKind, dt: f64, rows: Vec<Vec<KernelEntry>>, self_weight: Vec<f64>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut entries = Vec::new();
        row_ptr.push(0);
        for r in rows {
            entries.extend(r);
            row_ptr.push(entries.len());
        }
        TransitionKernel { kind, dt, row_ptr, entries, self_weight }
    }

    /// The kernel that never moves.
    pub fn identity(n: usize, dt: f64, kind: KernelKind) -> Self {
        Self::from_rows(kind, dt, vec![Vec::new(); n], vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.self_weight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.self_weight.is_empty()
    }

    /// Off-diagonal entries of row `k`, in increasing face order.
    pub fn row(&self, k: usize) -> &[KernelEntry] {
        &self.entries[self.row_ptr[k]..self.row_ptr[k + 1]]
    }

    pub fn self_weight(&self, k: usize) -> f64 {
        self.self_weight[k]
    }

    pub fn row_sum(&self, k: usize) -> f64 {
        self.self_weight[k] + self.row(k).iter().map(|e| e.weight).sum::<f64>()
    }

    /// Number of positive-weight successors of `k`, counting the stay.
    pub fn support(&self, k: usize) -> usize {
        usize::from(self.self_weight[k] > 0.0) + self.row(k).iter().filter(|e| e.weight > 0.0).count()
    }

    pub fn max_support(&self) -> usize {
        (0..self.len()).map(|k| self.support(k)).max().unwrap_or(0)
    }

    /// Aggregated weight from `k` to `l` over all faces (plus the stay when `k == l`).
    pub fn weight(&self, k: usize, l: usize) -> f64 {
        let base = if k == l { self.self_weight[k] } else { 0.0 };
        base + self.row(k).iter().filter(|e| e.target == l).map(|e| e.weight).sum::<f64>()
    }

    /// Entry of row `k` that crosses face `f`.
    pub fn entry_for_face(&self, k: usize, f: usize) -> Option<&KernelEntry> {
        self.row(k).iter().find(|e| e.face == f)
    }

    /// `v_K = p_KK u_K + sum_f p_f u_{L_f}`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                self.row(k)
                    .iter()
                    .fold(self.self_weight[k] * u[k], |acc, e| acc + e.weight * u[e.target])
            })
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut m = vec![vec![0.0; n]; n];
        for (k, row) in m.iter_mut().enumerate() {
            row[k] += self.self_weight[k];
            for e in self.row(k) {
                row[e.target] += e.weight;
            }
        }
        m
    }

    /// CSV body `K,L,weight`, aggregated by cell pair, targets ascending.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("K,L,weight\n");
        for k in 0..self.len() {
            let mut targets: Vec<usize> = self.row(k).iter().map(|e| e.target).collect();
            targets.push(k);
            targets.sort_unstable();
            targets.dedup();
            for l in targets {
                let _ = writeln!(out, "{k},{l},{:.17e}", self.weight(k, l));
            }
        }
        out
    }

    /// First 8 bytes of the SHA-256 of [`Self::to_csv`] plus `dt` and kind, hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.kind.as_str().as_bytes());
        h.update(self.dt.to_le_bytes());
        h.update(self.to_csv().as_bytes());
        hex::encode(&h.finalize()[..8])
    }

    pub fn header_json(&self, mesh: &Mesh) -> serde_json::Value {
        serde_json::json!({
            "dt": self.dt,
            "kind": self.kind.as_str(),
            "mesh_hash": mesh_hash(mesh),
        })
    }

    /// Writes the CSV to `path` and its header next to it as `*.header.json`.
    pub fn write_dump(&self, mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv())?;
        let header = serde_json::to_string_pretty(&self.header_json(mesh)).expect("header serializes");
        std::fs::write(path.with_extension("header.json"), header)?;
        Ok(())
    }
}

/// Largest admissible step: `min_K |K| / sum_{K^-} -<a,n>|K n L|`.
pub fn cfl_dt_max(mesh: &Mesh, moments: &FieldMoments) -> f64 {
    (0..mesh.len())
        .map(|k| {
            let out: f64 = mesh.adjacency[k]
                .iter()
                .map(|&(_, f)| (-moments.face_flux[f]).max(0.0) * mesh.faces[f].area)
                .sum();
            if out > 0.0 {
                mesh.cells[k].volume / out
            } else {
                f64::INFINITY
            }
        })
        .fold(f64::INFINITY, f64::min)
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("time step must be positive and finite, got {dt}")));
    }
    Ok(())
}

/// Weights `|<a,n>| dt |f| / |K|` over faces whose flux has the requested sign.
fn upwind_rows(mesh: &Mesh, moments: &FieldMoments, dt: f64, inflow: bool) -> Vec<Vec<KernelEntry>> {
    (0..mesh.len())
        .map(|k| {
            let vol = mesh.cells[k].volume;
            mesh.adjacency[k]
                .iter()
                .filter_map(|&(l, f)| {
                    let flux = moments.face_flux[f];
                    let selected = if inflow { flux < 0.0 } else { flux > 0.0 };
                    selected.then(|| KernelEntry {
                        face: f,
                        target: l,
                        weight: flux.abs() * dt * mesh.faces[f].area / vol,
                    })
                })
                .collect()
        })
        .collect()
}

fn forward_self_weights(mesh: &Mesh, moments: &FieldMoments, rows: &[Vec<KernelEntry>]) -> Result<Vec<f64>> {
    let sums: Vec<f64> = rows.iter().map(|r| r.iter().map(|e| e.weight).sum()).collect();
    let (worst, ratio) = sums
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |acc, (k, s)| if s > acc.1 { (k, s) } else { acc });
    if ratio > 1.0 + CFL_SLACK {
        return Err(Error::Cfl { cell: worst, ratio, dt_max: cfl_dt_max(mesh, moments) });
    }
    Ok(sums.iter().map(|s| (1.0 - s).max(0.0)).collect())
}

/// Forward kernel `p`; fails with the worst cell and the admissible step
/// when the CFL condition is violated.
pub fn build_forward(mesh: &Mesh, moments: &FieldMoments, dt: f64) -> Result<TransitionKernel> {
    check_dt(dt)?;
    let rows = upwind_rows(mesh, moments, dt, true);
    let selfw = forward_self_weights(mesh, moments, &rows)?;
    Ok(TransitionKernel::from_rows(KernelKind::Forward, dt, rows, selfw))
}

/// Co-kernel `q`; the stay weight `1 - sum q` is stored even when negative.
pub fn build_co(mesh: &Mesh, moments: &FieldMoments, dt: f64) -> Result<TransitionKernel> {
    check_dt(dt)?;
    let inflow = upwind_rows(mesh, moments, dt, true);
    forward_self_weights(mesh, moments, &inflow)?;
    let rows = upwind_rows(mesh, moments, dt, false);
    let selfw = rows.iter().map(|r| 1.0 - r.iter().map(|e| e.weight).sum::<f64>()).collect();
    Ok(TransitionKernel::from_rows(KernelKind::Co, dt, rows, selfw))
}

/// Reversed kernel `gamma`; requires `max |delta_K| dt < 1 - eta`.
pub fn build_reversed(mesh: &Mesh, moments: &FieldMoments, dt: f64, eta: f64) -> Result<TransitionKernel> {
    check_dt(dt)?;
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::invalid(format!("eta must lie in (0, 1), got {eta}")));
    }
    let max_div_dt = moments.max_abs_divergence() * dt;
    if max_div_dt >= 1.0 - eta {
        return Err(Error::ReversalCondition { max_div_dt, limit: 1.0 - eta });
    }
    let p = build_forward(mesh, moments, dt)?;
    let mut rows = upwind_rows(mesh, moments, dt, false);
    let mut selfw = Vec::with_capacity(mesh.len());
    for (k, row) in rows.iter_mut().enumerate() {
        let scale = 1.0 + moments.divergence[k] * dt;
        for e in row.iter_mut() {
            e.weight /= scale;
        }
        selfw.push(p.self_weight(k) / scale);
    }
    Ok(TransitionKernel::from_rows(KernelKind::Reversed, dt, rows, selfw))
}

/// Per-cell entry points `e_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnteringBarycenters {
    pub points: Vec<Point>,
    /// Cells where no rule applied and the cell barycenter was used.
    pub fallback: Vec<bool>,
}

impl EnteringBarycenters {
    /// 1-D: right end if `a > 0` on `K`, left end if `a < 0`, midpoint if
    /// `a` vanishes in `K`. 2-D: the `q`-weighted mean of the outflow face
    /// barycenters, or the cell barycenter when `K^+` is empty.
    pub fn compute(mesh: &Mesh, field: &VelocityField, moments: &FieldMoments) -> Self {
        let mut points = Vec::with_capacity(mesh.len());
        let mut fallback = Vec::with_capacity(mesh.len());
        for k in 0..mesh.len() {
            let (p, fb) = if mesh.dimension == 1 {
                let ends = mesh.cell_points(k);
                match field.sign_on_interval(ends[0].x, ends[1].x) {
                    Some(s) if s > 0.0 => (ends[1], false),
                    Some(_) => (ends[0], false),
                    None => (mesh.cells[k].barycenter, false),
                }
            } else {
                q_weighted(mesh, moments, k)
            };
            points.push(p);
            fallback.push(fb);
        }
        EnteringBarycenters { points, fallback }
    }

    pub fn get(&self, k: usize) -> Point {
        self.points[k]
    }
}

fn q_weighted(mesh: &Mesh, moments: &FieldMoments, k: usize) -> (Point, bool) {
    let mut acc = Point::zeros();
    let mut total = 0.0;
    for &(_, f) in &mesh.adjacency[k] {
        let flux = moments.face_flux[f];
        if flux > 0.0 {
            let w = flux * mesh.faces[f].area;
            acc += mesh.faces[f].barycenter * w;
            total += w;
        }
    }
    if total > 0.0 {
        (acc / total, false)
    } else {
        (mesh.cells[k].barycenter, true)
    }
}

/// Single-cell convenience wrapper around [`EnteringBarycenters::compute`].
pub fn entering_barycenter(mesh: &Mesh, field: &VelocityField, moments: &FieldMoments, k: usize) -> Point {
    if mesh.dimension == 1 {
        EnteringBarycenters::compute(mesh, field, moments).points[k]
    } else {
        q_weighted(mesh, moments, k).0
    }
}

/// `a_K dt + sum_{K^-} p (x_f - x0) - sum_{K^+} q (x_f - x0)`.
pub fn green_residual(mesh: &Mesh, moments: &FieldMoments, dt: f64, k: usize, x0: &Point) -> Point {
    let vol = mesh.cells[k].volume;
    let mut r = moments.cell_mean[k] * dt;
    for &(_, f) in &mesh.adjacency[k] {
        let face = &mesh.faces[f];
        let w = moments.face_flux[f].abs() * dt * face.area / vol;
        let d = face.barycenter - x0;
        if moments.face_flux[f] < 0.0 {
            r += d * w;
        } else if moments.face_flux[f] > 0.0 {
            r -= d * w;
        }
    }
    r
}

/// `|K| - sum_J |J| p_{J,K}` per cell.
pub fn invariance_residual(p: &TransitionKernel, mesh: &Mesh) -> Vec<f64> {
    let mut inflow = vec![0.0; p.len()];
    for j in 0..p.len() {
        let vj = mesh.cells[j].volume;
        inflow[j] += vj * p.self_weight(j);
        for e in p.row(j) {
            inflow[e.target] += vj * e.weight;
        }
    }
    (0..p.len()).map(|k| mesh.cells[k].volume - inflow[k]).collect()
}

/// `max |q_{K,J}|K| - p_{J,K}|J||` over twin face pairs.
pub fn reversal_identity_residual(p: &TransitionKernel, q: &TransitionKernel, mesh: &Mesh) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..p.len() {
        for e in p.row(j) {
            let twin = mesh.faces[e.face].twin;
            let k = e.target;
            let qw = q.entry_for_face(k, twin).map_or(0.0, |x| x.weight);
            worst = worst.max((qw * mesh.cells[k].volume - e.weight * mesh.cells[j].volume).abs());
        }
    }
    for k in 0..q.len() {
        for e in q.row(k) {
            let twin = mesh.faces[e.face].twin;
            let pw = p.entry_for_face(e.target, twin).map_or(0.0, |x| x.weight);
            worst = worst.max((e.weight * mesh.cells[k].volume - pw * mesh.cells[e.target].volume).abs());
        }
    }
    worst
}

/// `max_K |gamma_KK (1 + delta_K dt) - p_KK|`.
pub fn gamma_identity_residual(p: &TransitionKernel, gamma: &TransitionKernel, moments: &FieldMoments) -> f64 {
    (0..p.len())
        .map(|k| (gamma.self_weight(k) * (1.0 + moments.divergence[k] * p.dt) - p.self_weight(k)).abs())
        .fold(0.0, f64::max)
}

/// `max_K |-sum p + sum q - delta_K dt|`.
pub fn co_balance_residual(p: &TransitionKernel, q: &TransitionKernel, moments: &FieldMoments) -> f64 {
    (0..p.len())
        .map(|k| {
            let sp: f64 = p.row(k).iter().map(|e| e.weight).sum();
            let sq: f64 = q.row(k).iter().map(|e| e.weight).sum();
            (sq - sp - moments.divergence[k] * p.dt).abs()
        })
        .fold(0.0, f64::max)
}

/// `max_K |row sum - 1|`.
pub fn row_sum_residual(k: &TransitionKernel) -> f64 {
    (0..k.len()).map(|i| (k.row_sum(i) - 1.0).abs()).fold(0.0, f64::max)
}
