//! The Markov chain behind the scheme: sampling, random characteristics,
//! their martingale decomposition, and exhaustive enumeration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::VelocityField;
use crate::geometry::Point;
use crate::kernel::{EnteringBarycenters, KernelKind, TransitionKernel};
use crate::mesh::Mesh;
use crate::rng::{derive_seed, uniform, START_COUNTER};

/// Largest number of weighted paths the enumeration oracle will visit.
pub const ENUMERATION_LIMIT: f64 = 1e7;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainPath {
    /// `K_0, ..., K_N`.
    pub cells: Vec<usize>,
    /// Face crossed between `K_n` and `K_{n+1}`, `None` for a stay.
    pub faces: Vec<Option<usize>>,
    pub seed: u64,
    pub kind: KernelKind,
}

impl ChainPath {
    pub fn steps(&self) -> usize {
        self.faces.len()
    }

    pub fn last(&self) -> usize {
        *self.cells.last().expect("a path has at least one cell")
    }

    pub fn jumps(&self) -> usize {
        self.faces.iter().filter(|f| f.is_some()).count()
    }

    /// The same cells read backwards, each face replaced by its twin.
    pub fn reversed(&self, mesh: &Mesh, kind: KernelKind) -> ChainPath {
        ChainPath {
            cells: self.cells.iter().rev().copied().collect(),
            faces: self.faces.iter().rev().map(|f| f.map(|f| mesh.faces[f].twin)).collect(),
            seed: self.seed,
            kind,
        }
    }
}

/// Inverse-CDF draw from row `k`: the stay first, then the entries in face order.
#[inline]
pub fn next_step(kernel: &TransitionKernel, k: usize, u: f64) -> (usize, Option<usize>) {
    let mut acc = kernel.self_weight(k);
    if u < acc {
        return (k, None);
    }
    let row = kernel.row(k);
    for e in row {
        acc += e.weight;
        if u < acc {
            return (e.target, Some(e.face));
        }
    }
    // `u` fell in the rounding gap above the row sum
    row.iter()
        .rev()
        .find(|e| e.weight > 0.0)
        .map_or((k, None), |e| (e.target, Some(e.face)))
}

fn assert_markov(kernel: &TransitionKernel) {
    assert!(kernel.kind != KernelKind::Co, "the co-kernel is not a transition kernel");
}

/// Samples `K_0 = k0, ..., K_N`; step `n` consumes the draw at counter `n`.
pub fn sample_path(kernel: &TransitionKernel, k0: usize, n: usize, seed: u64) -> ChainPath {
    assert_markov(kernel);
    let mut cells = Vec::with_capacity(n + 1);
    let mut faces = Vec::with_capacity(n);
    let mut k = k0;
    cells.push(k);
    for step in 0..n {
        let (next, face) = next_step(kernel, k, uniform(seed, step as u64));
        cells.push(next);
        faces.push(face);
        k = next;
    }
    ChainPath { cells, faces, seed, kind: kernel.kind }
}

/// Final cell of the path [`sample_path`] would produce.
pub fn sample_endpoint(kernel: &TransitionKernel, k0: usize, n: usize, seed: u64) -> usize {
    (0..n).fold(k0, |k, step| next_step(kernel, k, uniform(seed, step as u64)).0)
}

/// The random characteristic attached to a path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub path: ChainPath,
    /// `X_0, ..., X_N`, lifted to the covering space.
    pub points: Vec<Point>,
    /// Lifted entering barycenters `e_{K_n}`.
    pub entering: Vec<Point>,
    /// Lattice offset of the copy of `K_n` the path is in.
    pub offsets: Vec<Point>,
}

/// `X_0 = e_{K_0}`; after a stay `X_n = e_{K_n}`, after a jump `X_n` is the
/// crossed face's barycenter. Crossing a periodic face moves the offset by
/// the face's shift, so consecutive points never jump across the domain.
pub fn trace_points(path: &ChainPath, mesh: &Mesh, eb: &EnteringBarycenters) -> Trajectory {
    let n = path.steps();
    let mut points = Vec::with_capacity(n + 1);
    let mut entering = Vec::with_capacity(n + 1);
    let mut offsets = Vec::with_capacity(n + 1);
    let mut offset = Point::zeros();
    let e0 = eb.get(path.cells[0]);
    points.push(e0);
    entering.push(e0);
    offsets.push(offset);
    for i in 0..n {
        let k = path.cells[i + 1];
        match path.faces[i] {
            None => points.push(eb.get(k) + offset),
            Some(f) => {
                let face = &mesh.faces[f];
                points.push(face.barycenter + offset);
                offset += face.shift;
            }
        }
        entering.push(eb.get(k) + offset);
        offsets.push(offset);
    }
    Trajectory { path: path.clone(), points, entering, offsets }
}

/// `S_n`, `R_n`, `M_n` (and `Xi_n` for reversed paths), each of length `N + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub s: Vec<Point>,
    pub r: Vec<Point>,
    pub m: Vec<Point>,
    pub xi: Option<Vec<Point>>,
    /// One-step increments `X_{k+1} - E_k[X_{k+1}]`.
    pub dm: Vec<Point>,
}

/// Exact one-step conditional mean of `X_{k+1}` given step `k` of `traj`:
/// `p_KK e_K + sum_f p_f x_f`, in the lifted frame of step `k`.
pub fn conditional_mean(traj: &Trajectory, mesh: &Mesh, kernel: &TransitionKernel, i: usize) -> Point {
    let k = traj.path.cells[i];
    let off = traj.offsets[i];
    kernel.row(k).iter().fold(traj.entering[i] * kernel.self_weight(k), |acc, e| {
        acc + (mesh.faces[e.face].barycenter + off) * e.weight
    })
}

/// `S_n = sum [X_{i+1} - e_{K_i} + dt a(X_i)]`, `R_n = sum [e_{K_i} - X_i]`,
/// `M_n = sum [X_{k+1} - E_k X_{k+1}]` and, under a reversed kernel,
/// `Xi_n = sum [(e_{Gamma_i} - x_{Gamma_i, Gamma_{i+1}}) 1_jump]`.
pub fn decompose(traj: &Trajectory, mesh: &Mesh, field: &VelocityField, kernel: &TransitionKernel) -> Decomposition {
    let n = traj.path.steps();
    let dt = kernel.dt;
    let mut s = vec![Point::zeros(); n + 1];
    let mut r = vec![Point::zeros(); n + 1];
    let mut m = vec![Point::zeros(); n + 1];
    let mut dm = Vec::with_capacity(n);
    let reversed = kernel.kind == KernelKind::Reversed;
    let mut xi = reversed.then(|| vec![Point::zeros(); n + 1]);
    for i in 0..n {
        let x = traj.points[i];
        let e = traj.entering[i];
        let x1 = traj.points[i + 1];
        s[i + 1] = s[i] + (x1 - e) + field.eval(&x) * dt;
        r[i + 1] = r[i] + (e - x);
        let d = x1 - conditional_mean(traj, mesh, kernel, i);
        dm.push(d);
        m[i + 1] = m[i] + d;
        if let Some(xi) = xi.as_mut() {
            let gap = if traj.path.faces[i].is_some() { e - x1 } else { Point::zeros() };
            xi[i + 1] = xi[i] + gap;
        }
    }
    Decomposition { s, r, m, xi, dm }
}

/// `sum_f w_f (e_K - x_f)` over row `k`: the conditional mean of one step of `Xi`.
pub fn gap_row_mean(kernel: &TransitionKernel, mesh: &Mesh, eb: &EnteringBarycenters, k: usize) -> Point {
    let e = eb.get(k);
    kernel
        .row(k)
        .iter()
        .fold(Point::zeros(), |acc, en| acc + (e - mesh.faces[en.face].barycenter) * en.weight)
}

impl Trajectory {
    /// CSV `n,cell,x[,y],S..,R..,M..`; vector columns carry a coordinate suffix in 2-D.
    pub fn to_csv(&self, dec: &Decomposition, dimension: usize) -> String {
        let axes: &[&str] = if dimension == 1 { &[""] } else { &["_x", "_y"] };
        let mut out = String::from("n,cell");
        let coords = if dimension == 1 { vec!["x"] } else { vec!["x", "y"] };
        for c in &coords {
            let _ = write!(out, ",{c}");
        }
        for name in ["S", "R", "M"] {
            for a in axes {
                let _ = write!(out, ",{name}{a}");
            }
        }
        out.push('\n');
        for (i, x) in self.points.iter().enumerate() {
            let _ = write!(out, "{i},{}", self.path.cells[i]);
            for d in 0..dimension {
                let _ = write!(out, ",{:.17e}", x[d]);
            }
            for v in [&dec.s, &dec.r, &dec.m] {
                for d in 0..dimension {
                    let _ = write!(out, ",{:.17e}", v[i][d]);
                }
            }
            out.push('\n');
        }
        out
    }

    /// Writes the CSV and a `*.header.json` with the seed and kernel hash.
    pub fn write_dump(
        &self,
        dec: &Decomposition,
        mesh: &Mesh,
        kernel: &TransitionKernel,
        path: impl AsRef<Path>,
    ) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv(dec, mesh.dimension))?;
        let header = serde_json::json!({ "seed": self.path.seed, "kernel_hash": kernel.hash() });
        std::fs::write(path.with_extension("header.json"), serde_json::to_string_pretty(&header).expect("json"))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Mean and standard error (`sample std / sqrt(M)`) of `values`, summed in index order.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Seeds of chains `0..m` under `master`.
pub fn batch_seeds(master: u64, m: usize) -> Vec<u64> {
    (0..m as u64).map(|i| derive_seed(master, i)).collect()
}

/// `E_{K0}[u^0_{K_N}]` by `M` independent chains; chain `i` uses
/// `derive_seed(master, i)`. The reduction runs in chain order, so the
/// result does not depend on the thread count.
pub fn mc_expectation(kernel: &TransitionKernel, u0: &[f64], k0: usize, n: usize, m: usize, master: u64) -> McEstimate {
    assert_markov(kernel);
    let values: Vec<f64> = (0..m as u64)
        .into_par_iter()
        .map(|i| u0[sample_endpoint(kernel, k0, n, derive_seed(master, i))])
        .collect();
    let (mean, stderr) = mean_stderr(&values);
    McEstimate { mean, stderr, samples: m, seed: master }
}

fn check_guard(kernel: &TransitionKernel, n: usize) -> Result<()> {
    let support = kernel.max_support().max(1);
    if (support as f64).powi(n as i32) > ENUMERATION_LIMIT {
        return Err(Error::EnumerationGuard { support, steps: n, limit: ENUMERATION_LIMIT });
    }
    Ok(())
}

/// Exact `E_{K0}[u^0_{K_N}]` by depth-first enumeration of every
/// positive-weight path; also returns the number of such paths.
pub fn enumerate_expectation(kernel: &TransitionKernel, u0: &[f64], k0: usize, n: usize) -> Result<(f64, u64)> {
    assert_markov(kernel);
    check_guard(kernel, n)?;
    fn dfs(kernel: &TransitionKernel, u0: &[f64], k: usize, left: usize, w: f64, acc: &mut f64, count: &mut u64) {
        if left == 0 {
            *acc += w * u0[k];
            *count += 1;
            return;
        }
        let s = kernel.self_weight(k);
        if s > 0.0 {
            dfs(kernel, u0, k, left - 1, w * s, acc, count);
        }
        for e in kernel.row(k) {
            if e.weight > 0.0 {
                dfs(kernel, u0, e.target, left - 1, w * e.weight, acc, count);
            }
        }
    }
    let mut acc = 0.0;
    let mut count = 0;
    dfs(kernel, u0, k0, n, 1.0, &mut acc, &mut count);
    Ok((acc, count))
}

/// A positive-weight path with its probability.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPath {
    pub cells: Vec<usize>,
    pub faces: Vec<Option<usize>>,
    pub probability: f64,
}

/// Every positive-weight path of length `n` from `k0`.
pub fn enumerate_paths(kernel: &TransitionKernel, k0: usize, n: usize) -> Result<Vec<WeightedPath>> {
    assert_markov(kernel);
    check_guard(kernel, n)?;
    let mut out = Vec::new();
    let mut stack = vec![WeightedPath { cells: vec![k0], faces: Vec::new(), probability: 1.0 }];
    while let Some(p) = stack.pop() {
        if p.faces.len() == n {
            out.push(p);
            continue;
        }
        let k = *p.cells.last().expect("nonempty");
        let mut children = Vec::new();
        if kernel.self_weight(k) > 0.0 {
            children.push((k, None, kernel.self_weight(k)));
        }
        for e in kernel.row(k) {
            if e.weight > 0.0 {
                children.push((e.target, Some(e.face), e.weight));
            }
        }
        for (next, face, w) in children.into_iter().rev() {
            let mut c = p.clone();
            c.cells.push(next);
            c.faces.push(face);
            c.probability *= w;
            stack.push(c);
        }
    }
    Ok(out)
}

/// Probability of following `cells`/`faces` under `kernel`.
pub fn path_probability(kernel: &TransitionKernel, cells: &[usize], faces: &[Option<usize>]) -> f64 {
    faces.iter().enumerate().fold(1.0, |p, (i, f)| {
        let k = cells[i];
        p * match f {
            None => kernel.self_weight(k),
            Some(f) => kernel.entry_for_face(k, *f).map_or(0.0, |e| e.weight),
        }
    })
}

/// Observed `(from -> to)` transition counts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransitionCounts {
    pub counts: BTreeMap<(usize, usize), u64>,
    pub totals: BTreeMap<usize, u64>,
}

impl TransitionCounts {
    pub fn frequency(&self, k: usize, l: usize) -> f64 {
        match self.totals.get(&k) {
            Some(&t) if t > 0 => *self.counts.get(&(k, l)).unwrap_or(&0) as f64 / t as f64,
            _ => 0.0,
        }
    }

    pub fn total(&self, k: usize) -> u64 {
        *self.totals.get(&k).unwrap_or(&0)
    }

    pub fn merge(&mut self, other: &TransitionCounts) {
        for (key, c) in &other.counts {
            *self.counts.entry(*key).or_insert(0) += c;
        }
        for (key, c) in &other.totals {
            *self.totals.entry(*key).or_insert(0) += c;
        }
    }
}

/// Transition counts over every step of `paths`; with `backwards` each path
/// is read from its end, counting `K_{n+1} -> K_n`.
pub fn empirical_transition(paths: &[ChainPath], backwards: bool) -> TransitionCounts {
    let mut out = TransitionCounts::default();
    for p in paths {
        for w in p.cells.windows(2) {
            let (from, to) = if backwards { (w[1], w[0]) } else { (w[0], w[1]) };
            *out.counts.entry((from, to)).or_insert(0) += 1;
            *out.totals.entry(from).or_insert(0) += 1;
        }
    }
    out
}

/// Draws cells with probability `|K| / sum |J|`.
#[derive(Debug, Clone)]
pub struct LebesgueSampler {
    cdf: Vec<f64>,
}

impl LebesgueSampler {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        if !mesh.is_periodic() {
            return Err(Error::invalid("Lebesgue start requires a periodic mesh"));
        }
        let total = mesh.total_volume();
        let mut acc = 0.0;
        let cdf = mesh
            .cells
            .iter()
            .map(|c| {
                acc += c.volume / total;
                acc
            })
            .collect();
        Ok(LebesgueSampler { cdf })
    }

    /// Uses the counter reserved for starting cells, so the draw does not
    /// overlap the path's step draws under the same seed.
    pub fn sample(&self, seed: u64) -> usize {
        let u = uniform(seed, START_COUNTER);
        let i = self.cdf.partition_point(|&c| c <= u);
        i.min(self.cdf.len() - 1)
    }
}

pub fn sample_lebesgue_start(mesh: &Mesh, seed: u64) -> Result<usize> {
    Ok(LebesgueSampler::new(mesh)?.sample(seed))
}

/// `M` paths of length `n`; chain `i` starts at `start(seed_i)`.
pub fn sample_batch(
    kernel: &TransitionKernel,
    n: usize,
    m: usize,
    master: u64,
    start: impl Fn(u64) -> usize + Sync,
) -> Vec<ChainPath> {
    (0..m as u64)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(master, i);
            sample_path(kernel, start(seed), n, seed)
        })
        .collect()
}
