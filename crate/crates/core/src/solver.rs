//! Deterministic upwind scheme, reference solutions and error norms.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{mean_sin, FieldMoments, VelocityField};
use crate::geometry::{periodic_distance, pt, wrap, Point};
use crate::kernel::{EnteringBarycenters, KernelKind, TransitionKernel};
use crate::mesh::{mesh_hash, Mesh};
use crate::quadrature::{gauss_legendre, triangle_mean, triangle_nodes};

/// Initial data catalog. Coordinates past the dimension are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatumKind {
    Constant { value: f64 },
    /// `offset + slope x`.
    Linear { slope: f64, offset: f64 },
    /// `amp sin(2 pi freq x)` in 1-D, `amp sin(2 pi freq (x + y))` in 2-D.
    Sine { freq: f64, amp: f64 },
    /// `max(0, 1 - slope |x - center|)`.
    LipschitzHat { center: Vec<f64>, slope: f64 },
    /// Indicator of `0 <= x < threshold` (first coordinate).
    Step { threshold: f64 },
    /// `exp(-|x - center|^2 / (2 width^2))`.
    Gaussian { center: Vec<f64>, width: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDatum {
    #[serde(flatten)]
    pub kind: DatumKind,
    /// Period per axis; when set, the datum is the periodic extension of its
    /// restriction to the fundamental cell.
    #[serde(default)]
    pub period: Option<Vec<f64>>,
}

fn center_point(c: &[f64]) -> Point {
    pt(c.first().copied().unwrap_or(0.0), c.get(1).copied().unwrap_or(0.0))
}

impl InitialDatum {
    pub fn new(kind: DatumKind, period: Option<Vec<f64>>) -> Self {
        InitialDatum { kind, period }
    }

    /// Same datum with the periodicity of `mesh`.
    pub fn for_mesh(kind: DatumKind, mesh: &Mesh) -> Self {
        InitialDatum { kind, period: mesh.period.clone() }
    }

    fn wrapped(&self, x: &Point) -> Point {
        match &self.period {
            Some(p) => {
                let mut y = *x;
                for (i, &l) in p.iter().enumerate() {
                    y[i] = wrap(y[i], l);
                }
                y
            }
            None => *x,
        }
    }

    pub fn eval(&self, x: &Point) -> f64 {
        let period = self.period.as_deref();
        match &self.kind {
            DatumKind::Constant { value } => *value,
            DatumKind::Linear { slope, offset } => offset + slope * self.wrapped(x).x,
            DatumKind::Sine { freq, amp } => {
                let dim2 = period.map_or(x.y != 0.0, |p| p.len() == 2);
                let arg = if dim2 { x.x + x.y } else { x.x };
                amp * (2.0 * PI * freq * arg).sin()
            }
            DatumKind::LipschitzHat { center, slope } => {
                let r = periodic_distance(x, &center_point(center), period);
                (1.0 - slope * r).max(0.0)
            }
            DatumKind::Step { threshold } => {
                let y = self.wrapped(x);
                if y.x >= 0.0 && y.x < *threshold {
                    1.0
                } else {
                    0.0
                }
            }
            DatumKind::Gaussian { center, width } => {
                let r = periodic_distance(x, &center_point(center), period);
                (-r * r / (2.0 * width * width)).exp()
            }
        }
    }

    /// Lipschitz constant, if finite.
    pub fn lipschitz(&self) -> Option<f64> {
        let dim2 = self.period.as_ref().is_some_and(|p| p.len() == 2);
        match &self.kind {
            DatumKind::Constant { .. } => Some(0.0),
            DatumKind::Linear { slope, .. } => Some(slope.abs()),
            DatumKind::Sine { freq, amp } => {
                Some(2.0 * PI * (freq * amp).abs() * if dim2 { 2f64.sqrt() } else { 1.0 })
            }
            DatumKind::LipschitzHat { slope, .. } => Some(slope.abs()),
            DatumKind::Step { .. } => None,
            DatumKind::Gaussian { width, .. } => Some((-0.5f64).exp() / width),
        }
    }

    /// Total variation over one period of the 1-D restriction.
    pub fn bv_seminorm(&self) -> Option<f64> {
        match &self.kind {
            DatumKind::Constant { .. } => Some(0.0),
            DatumKind::Step { .. } => Some(if self.period.is_some() { 2.0 } else { 1.0 }),
            DatumKind::LipschitzHat { .. } | DatumKind::Gaussian { .. } => Some(2.0),
            DatumKind::Sine { amp, freq } => Some(4.0 * (amp * freq).abs()),
            DatumKind::Linear { .. } => None,
        }
    }

    /// Points in one period (or on the whole line) where the 1-D datum is
    /// not smooth.
    pub fn breakpoints_1d(&self) -> Vec<f64> {
        match &self.kind {
            DatumKind::LipschitzHat { center, slope } => {
                let c = center.first().copied().unwrap_or(0.0);
                let r = 1.0 / slope;
                let mut v = vec![c - r, c, c + r];
                if let Some(p) = &self.period {
                    // the periodic distance also kinks half a period away
                    v.push(c + 0.5 * p[0]);
                }
                v
            }
            DatumKind::Step { threshold } => vec![0.0, *threshold],
            _ => Vec::new(),
        }
    }
}

/// All images of `points` under the 1-D period that fall strictly inside `(a, b)`,
/// together with `a` and `b`, sorted.
fn split_interval(a: f64, b: f64, points: &[f64], period: Option<f64>) -> Vec<f64> {
    let mut v = vec![a, b];
    for &p in points {
        match period {
            Some(l) => {
                let k0 = ((a - p) / l).floor() as i64;
                let k1 = ((b - p) / l).ceil() as i64;
                for k in k0..=k1 {
                    let x = p + k as f64 * l;
                    if x > a && x < b {
                        v.push(x);
                    }
                }
            }
            None => {
                if p > a && p < b {
                    v.push(p);
                }
            }
        }
    }
    v.sort_by(f64::total_cmp);
    v
}

/// Mean over `[a, b]` of a function that is smooth between the split
/// points, via 5-point Gauss-Legendre on each smooth piece.
fn piecewise_mean(a: f64, b: f64, cuts: &[f64], pieces: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let knots = split_interval(a, b, cuts, None);
    let rule = gauss_legendre(5);
    let mut acc = 0.0;
    for w in knots.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let len = (x1 - x0) / pieces as f64;
        for i in 0..pieces {
            let s = x0 + i as f64 * len;
            for &(t, wt) in &rule {
                acc += f(s + t * len) * wt * len;
            }
        }
    }
    acc / (b - a)
}

/// Area of `tri` with `lo <= x < hi`.
fn triangle_strip_area(tri: &[Point; 3], lo: f64, hi: f64) -> f64 {
    let clipped = clip_half_plane(&clip_half_plane(tri, hi, true), lo, false);
    polygon_area(&clipped)
}

/// Sutherland-Hodgman against `x <= c` (`keep_below`) or `x >= c`.
fn clip_half_plane(poly: &[Point], c: f64, keep_below: bool) -> Vec<Point> {
    let inside = |p: &Point| if keep_below { p.x <= c } else { p.x >= c };
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        match (inside(&a), inside(&b)) {
            (true, true) => out.push(b),
            (true, false) => out.push(a + (b - a) * ((c - a.x) / (b.x - a.x))),
            (false, true) => {
                out.push(a + (b - a) * ((c - a.x) / (b.x - a.x)));
                out.push(b);
            }
            (false, false) => {}
        }
    }
    out
}

fn polygon_area(poly: &[Point]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        s += a.x * b.y - a.y * b.x;
    }
    0.5 * s.abs()
}

/// One value per cell at time index `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    pub values: Vec<f64>,
    pub n: usize,
    pub dt: f64,
}

impl CellField {
    pub fn new(values: Vec<f64>) -> Self {
        CellField { values, n: 0, dt: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `sum_K |K| u_K`.
    pub fn mass(&self, mesh: &Mesh) -> f64 {
        self.values.iter().zip(&mesh.cells).map(|(u, c)| u * c.volume).sum()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell_id,value\n");
        for (k, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{k},{v:.17e}");
        }
        out
    }

    pub fn header_json(&self, mesh: &Mesh) -> serde_json::Value {
        serde_json::json!({ "n": self.n, "dt": self.dt, "mesh_hash": mesh_hash(mesh) })
    }

    /// Writes the CSV to `path` and its header as `*.header.json`.
    pub fn write_dump(&self, mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv())?;
        let header = serde_json::to_string_pretty(&self.header_json(mesh)).expect("header serializes");
        std::fs::write(path.with_extension("header.json"), header)?;
        Ok(())
    }
}

/// Cell averages `u_K^0 = |K|^{-1} int_K u^0`.
///
/// 1-D cells are split at the datum's kinks and jumps so every piece is
/// integrated by an exact or degree-9 rule; 2-D step data are clipped
/// exactly against the strip.
pub fn project_initial(datum: &InitialDatum, mesh: &Mesh) -> CellField {
    let values = (0..mesh.len()).map(|k| cell_average(datum, mesh, k)).collect();
    CellField::new(values)
}

fn cell_average(datum: &InitialDatum, mesh: &Mesh, k: usize) -> f64 {
    if let DatumKind::Constant { value } = datum.kind {
        return value;
    }
    if mesh.dimension == 1 {
        let ends = mesh.cell_points(k);
        let (a, b) = (ends[0].x, ends[1].x);
        if let DatumKind::Sine { freq, amp } = datum.kind {
            let w = 2.0 * PI * freq;
            return amp * mean_sin(w * a, w * (b - a));
        }
        let period = datum.period.as_ref().map(|p| p[0]);
        let cuts = split_interval(a, b, &datum.breakpoints_1d(), period);
        piecewise_mean(a, b, &cuts, 2, |x| datum.eval(&pt(x, 0.0)))
    } else {
        let tri = mesh.triangle(k);
        match &datum.kind {
            DatumKind::Step { threshold } => {
                let area = mesh.cells[k].volume;
                let inside = match &datum.period {
                    Some(p) => {
                        let l = p[0];
                        let xmin = tri.iter().map(|v| v.x).fold(f64::INFINITY, f64::min);
                        let xmax = tri.iter().map(|v| v.x).fold(f64::NEG_INFINITY, f64::max);
                        let k0 = (xmin / l).floor() as i64 - 1;
                        let k1 = (xmax / l).ceil() as i64 + 1;
                        (k0..=k1)
                            .map(|j| {
                                let s = j as f64 * l;
                                triangle_strip_area(&tri, s, s + threshold.min(l))
                            })
                            .sum::<f64>()
                    }
                    None => triangle_strip_area(&tri, 0.0, *threshold),
                };
                inside / area
            }
            DatumKind::LipschitzHat { .. } => triangle_mean(&tri, 8, |x| datum.eval(&x)),
            _ => triangle_mean(&tri, 4, |x| datum.eval(&x)),
        }
    }
}

/// `u^{n+1} = p u^n`.
pub fn step(p: &TransitionKernel, u: &CellField) -> CellField {
    debug_assert_eq!(p.kind, KernelKind::Forward);
    CellField { values: p.apply(&u.values), n: u.n + 1, dt: p.dt }
}

/// `N` applications of [`step`].
pub fn run(p: &TransitionKernel, u0: &CellField, steps: usize) -> CellField {
    let mut u = CellField { values: u0.values.clone(), n: u0.n, dt: p.dt };
    for _ in 0..steps {
        u = step(p, &u);
    }
    u
}

/// Like [`run`], also returning every intermediate field (index 0 is `u0`).
pub fn run_history(p: &TransitionKernel, u0: &CellField, steps: usize) -> Vec<CellField> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(CellField { values: u0.values.clone(), n: u0.n, dt: p.dt });
    for _ in 0..steps {
        let next = step(p, out.last().expect("nonempty"));
        out.push(next);
    }
    out
}

/// `Z(t, x)` for `dZ/ds = -a(Z)`, `Z(0) = x`, by classical RK4 with
/// `substeps` uniform steps. Global error is `O(substeps^-4)`.
pub fn exact_characteristic(field: &VelocityField, t: f64, x: &Point, substeps: usize) -> Point {
    if field.is_constant() {
        return x - field.eval(x) * t;
    }
    let n = substeps.max(1);
    let h = t / n as f64;
    let rhs = |z: &Point| -field.eval(z);
    let mut z = *x;
    for _ in 0..n {
        let k1 = rhs(&z);
        let k2 = rhs(&(z + k1 * (0.5 * h)));
        let k3 = rhs(&(z + k2 * (0.5 * h)));
        let k4 = rhs(&(z + k3 * h));
        z += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    z
}

/// `u(t, x) = u^0(Z(t, x))`.
pub fn exact_solution(datum: &InitialDatum, field: &VelocityField, t: f64, x: &Point, substeps: usize) -> f64 {
    datum.eval(&exact_characteristic(field, t, x, substeps))
}

/// Diffusion coefficient `D = |a| (h - |a| dt) / 2` of the modified equation.
pub fn modified_diffusion(a: f64, h: f64, dt: f64) -> f64 {
    0.5 * a.abs() * (h - a.abs() * dt)
}

/// Solution of `v_t + a v_x = D v_xx` with `v(0) = u^0`, for constant 1-D `a`.
/// Sine data decay in closed form; other data are convolved with the heat
/// kernel by composite Simpson quadrature over `+-8` standard deviations.
pub fn modified_solution(
    datum: &InitialDatum,
    field: &VelocityField,
    h: f64,
    dt: f64,
    t: f64,
    x: f64,
) -> Result<f64> {
    let a = match field {
        VelocityField::Constant { v } if v.len() == 1 => v[0],
        _ => return Err(Error::invalid("modified equation requires a constant 1-D velocity")),
    };
    if a.abs() * dt > h * (1.0 + 1e-12) {
        return Err(Error::invalid("modified equation requires |a| dt <= h"));
    }
    let d = modified_diffusion(a, h, dt).max(0.0);
    let xc = x - a * t;
    if let DatumKind::Sine { freq, amp } = datum.kind {
        let w = 2.0 * PI * freq;
        return Ok(amp * (-d * w * w * t).exp() * (w * xc).sin());
    }
    let var = 2.0 * d * t;
    if var <= 0.0 {
        return Ok(datum.eval(&pt(xc, 0.0)));
    }
    let sigma = var.sqrt();
    let n = 800usize;
    let span = 8.0 * sigma;
    let step = 2.0 * span / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        let y = -span + i as f64 * step;
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let g = (-y * y / (2.0 * var)).exp() / (sigma * (2.0 * PI).sqrt());
        acc += w * g * datum.eval(&pt(xc - y, 0.0));
    }
    Ok(acc * step / 3.0)
}

/// Quadrature and sampling settings for [`error_norms`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorOptions {
    /// RK4 substeps per scheme step for reference characteristics.
    pub substeps_per_step: usize,
    /// Sub-intervals per smooth piece (1-D) or refinement level (2-D).
    pub pieces: usize,
    /// Exponent of the localized norm.
    pub p: f64,
    /// Center of the localized norm.
    pub center: Vec<f64>,
}

impl Default for ErrorOptions {
    fn default() -> Self {
        ErrorOptions { substeps_per_step: 20, pieces: 8, p: 2.0, center: vec![0.0, 0.0] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalLp {
    pub p: f64,
    pub radius: f64,
    pub center: Vec<f64>,
    /// `[h^{-d/2} sum_{|e_K - x| <= sqrt h} ||u_K - u||_p^p]^{1/p}`.
    pub value: f64,
    pub cells: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorReport {
    pub l1: f64,
    pub linf: f64,
    pub local_lp: LocalLp,
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub t: f64,
    pub linf_samples: String,
}

/// Per-cell error integrals.
#[derive(Debug, Clone)]
pub struct CellErrors {
    /// `int_K |u_K - u(t)|`.
    pub l1: Vec<f64>,
    /// `int_K |u_K - u(t)|^p`.
    pub lp: Vec<f64>,
    /// Max of `|u_K - u(t)|` over the cell's sample points.
    pub sup: Vec<f64>,
}

impl CellErrors {
    pub fn l1_total(&self) -> f64 {
        self.l1.iter().sum()
    }

    pub fn linf(&self) -> f64 {
        self.sup.iter().copied().fold(0.0, f64::max)
    }
}

/// Evaluates `|u_K - u(t, .)|` on each cell: Gauss-Legendre nodes on pieces
/// split at the transported datum kinks (constant 1-D fields), the cell
/// ends, and the barycenter in 1-D; the 7-point rule nodes, vertices, edge
/// midpoints and barycenter in 2-D.
pub fn cell_errors(
    u: &CellField,
    datum: &InitialDatum,
    field: &VelocityField,
    mesh: &Mesh,
    t: f64,
    opts: &ErrorOptions,
) -> CellErrors {
    let steps = if u.dt > 0.0 { (t / u.dt).round().max(1.0) as usize } else { 1 };
    let substeps = opts.substeps_per_step.max(1) * steps;
    let exact = |x: &Point| exact_solution(datum, field, t, x, substeps);
    let p = opts.p;
    let mut l1 = Vec::with_capacity(mesh.len());
    let mut lp = Vec::with_capacity(mesh.len());
    let mut sup = Vec::with_capacity(mesh.len());
    for k in 0..mesh.len() {
        let uk = u.values[k];
        let vol = mesh.cells[k].volume;
        if mesh.dimension == 1 {
            let ends = mesh.cell_points(k);
            let (a, b) = (ends[0].x, ends[1].x);
            let cuts = match field {
                VelocityField::Constant { v } => {
                    let shift = v[0] * t;
                    let bps: Vec<f64> = datum.breakpoints_1d().iter().map(|x| x + shift).collect();
                    split_interval(a, b, &bps, datum.period.as_ref().map(|q| q[0]))
                }
                _ => vec![a, b],
            };
            let m1 = piecewise_mean(a, b, &cuts, opts.pieces, |x| (uk - exact(&pt(x, 0.0))).abs());
            let mp = piecewise_mean(a, b, &cuts, opts.pieces, |x| (uk - exact(&pt(x, 0.0))).abs().powf(p));
            let rule = gauss_legendre(5);
            let mut s: f64 = [a, b, 0.5 * (a + b)]
                .iter()
                .map(|&x| (uk - exact(&pt(x, 0.0))).abs())
                .fold(0.0, f64::max);
            for w in cuts.windows(2) {
                let len = (w[1] - w[0]) / opts.pieces as f64;
                for i in 0..opts.pieces {
                    for &(r, _) in &rule {
                        let x = w[0] + (i as f64 + r) * len;
                        s = s.max((uk - exact(&pt(x, 0.0))).abs());
                    }
                }
            }
            l1.push(m1 * vol);
            lp.push(mp * vol);
            sup.push(s);
        } else {
            let tri = mesh.triangle(k);
            let m = opts.pieces.clamp(1, 8);
            let m1: f64 = triangle_mean(&tri, m, |x| (uk - exact(&x)).abs());
            let mp: f64 = triangle_mean(&tri, m, |x| (uk - exact(&x)).abs().powf(p));
            let mut pts = triangle_nodes(&tri, m);
            pts.extend_from_slice(&tri);
            for i in 0..3 {
                pts.push((tri[i] + tri[(i + 1) % 3]) * 0.5);
            }
            pts.push(mesh.cells[k].barycenter);
            let s = pts.iter().map(|x| (uk - exact(x)).abs()).fold(0.0, f64::max);
            l1.push(m1 * vol);
            lp.push(mp * vol);
            sup.push(s);
        }
    }
    CellErrors { l1, lp, sup }
}

/// `[h^{-d/2} sum_{K : |e_K - x| <= sqrt h} lp_K]^{1/p}`, with periodic
/// distance on periodic meshes.
pub fn local_lp(mesh: &Mesh, eb: &EnteringBarycenters, lp: &[f64], p: f64, center: &Point) -> (f64, usize) {
    let h = mesh.h_max;
    let radius = h.sqrt();
    let mut acc = 0.0;
    let mut count = 0;
    for k in 0..mesh.len() {
        if periodic_distance(&eb.get(k), center, mesh.period.as_deref()) <= radius {
            acc += lp[k];
            count += 1;
        }
    }
    ((h.powf(-(mesh.dimension as f64) / 2.0) * acc).powf(1.0 / p), count)
}

/// L1, sampled L-infinity and localized L^p errors of `u` against the exact
/// solution at time `t`.
pub fn error_norms(
    u: &CellField,
    datum: &InitialDatum,
    field: &VelocityField,
    mesh: &Mesh,
    t: f64,
    opts: &ErrorOptions,
) -> ErrorReport {
    let errs = cell_errors(u, datum, field, mesh, t, opts);
    let moments = FieldMoments::compute(mesh, field);
    let eb = EnteringBarycenters::compute(mesh, field, &moments);
    let center = center_point(&opts.center);
    let (value, cells) = local_lp(mesh, &eb, &errs.lp, opts.p, &center);
    let linf_samples = if mesh.dimension == 1 {
        format!("cell ends, midpoint, 5-point Gauss-Legendre nodes on {} pieces per smooth part", opts.pieces)
    } else {
        format!("vertices, edge midpoints, barycenter, 7-point rule nodes on a {0}x{0} refinement", opts.pieces.clamp(1, 8))
    };
    ErrorReport {
        l1: errs.l1_total(),
        linf: errs.linf(),
        local_lp: LocalLp { p: opts.p, radius: mesh.h_max.sqrt(), center: opts.center.clone(), value, cells },
        n: u.n,
        h: mesh.h_max,
        dt: u.dt,
        t,
        linf_samples,
    }
}
