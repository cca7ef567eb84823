//! Hull rasters (left hulls directly, right hulls through the dual driver),
//! frontier traces of two-sided curves and set comparisons between rasters.

use crate::driver::{Driver, DriverError};
use crate::engine::{self, EngineError, SolverOptions};
use crate::exec::{self, Exec};
use crate::geometry::{self, Contact};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HullError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("fields are not comparable: {0}")]
    Mismatch(String),
    #[error("frontier limit failed at t = {t}: {detail}")]
    Frontier { t: f64, detail: String },
}

/// Cell-centred lattice over `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64, nx: usize, ny: usize) -> Result<Self, HullError> {
        if !(x1 > x0 && y1 > y0) || nx == 0 || ny == 0 || ![x0, x1, y0, y1].iter().all(|v| v.is_finite()) {
            return Err(HullError::Grid(format!("[{x0}, {x1}] x [{y0}, {y1}] with {nx} x {ny} cells")));
        }
        Ok(Self { x0, x1, y0, y1, nx, ny })
    }

    /// Square grid of side `2 half` centred on `center`.
    pub fn square(center: Complex64, half: f64, n: usize) -> Result<Self, HullError> {
        Self::new(center.re - half, center.re + half, center.im - half, center.im + half, n, n)
    }

    /// Grid over the real strip spanned by the driver on `[0, t]`, with a
    /// vertical extent of `sup|l - l(0)| + 4 sqrt(t)`, padded by 20%.
    pub fn default_for(driver: &Driver, t: f64, n: usize) -> Result<Self, HullError> {
        let r = driver.range_on(t)?;
        let l0 = driver.eval(0.0)?;
        let reach = r.sup_dev + 4.0 * t.sqrt() + 1e-3;
        let xc = 0.5 * (r.re_min + r.re_max);
        let half_x = (0.5 * (r.re_max - r.re_min)).max(0.25 * reach) * 1.2;
        let half_y = reach * 1.2;
        Self::new(xc - half_x, xc + half_x, l0.im - half_y, l0.im + half_y, n, n)
    }

    pub fn dx(&self) -> f64 {
        (self.x1 - self.x0) / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y1 - self.y0) / self.ny as f64
    }

    pub fn cell_diag(&self) -> f64 {
        self.dx().hypot(self.dy())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Centre of cell `(i, j)`; `i` counts columns from `x0`, `j` rows from `y0`.
    pub fn center(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.x0 + (i as f64 + 0.5) * self.dx(), self.y0 + (j as f64 + 0.5) * self.dy())
    }

    /// Centre of the cell with row-major index `k = j * nx + i`.
    pub fn center_of(&self, k: usize) -> Complex64 {
        self.center(k % self.nx, k / self.nx)
    }

    pub fn cell_of(&self, z: Complex64) -> Option<(usize, usize)> {
        let u = (z.re - self.x0) / self.dx();
        let v = (z.im - self.y0) / self.dy();
        (u >= 0.0 && v >= 0.0 && u < self.nx as f64 && v < self.ny as f64).then_some((u as usize, v as usize))
    }
}

/// How a raster cell decides membership.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    /// First time the hull comes within half a cell diagonal of the cell
    /// centre (distance-estimate test). Curves show up as connected cell chains.
    #[default]
    Arrival,
    /// Swallow time of the cell centre itself (threshold `blow_up_eps`).
    Swallow,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RasterOptions {
    pub membership: Membership,
    pub exec: Exec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellValue {
    Reached(f64),
    Escaped,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// Per-cell hull time over a grid: the sublevel set `{value <= t}` is the
/// raster of the hull at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HullField {
    pub grid: Grid,
    pub values: Vec<CellValue>,
    pub fingerprint: String,
    pub t_max: f64,
    pub membership: Membership,
    pub side: Side,
}

impl HullField {
    pub fn value(&self, i: usize, j: usize) -> CellValue {
        self.values[j * self.grid.nx + i]
    }

    pub fn mask(&self, t: f64) -> Vec<bool> {
        self.values.iter().map(|v| matches!(v, CellValue::Reached(s) if *s <= t)).collect()
    }

    /// Cell centres belonging to the hull at time `t`.
    pub fn members(&self, t: f64) -> Vec<Complex64> {
        self.mask(t)
            .iter()
            .enumerate()
            .filter(|(_, m)| **m)
            .map(|(k, _)| self.grid.center_of(k))
            .collect()
    }

    pub fn failed(&self) -> usize {
        self.values.iter().filter(|v| matches!(v, CellValue::Failed)).count()
    }
}

fn cell_value(driver: &Driver, z: Complex64, t: f64, radius: f64, opts: &SolverOptions, m: Membership) -> CellValue {
    let res = match m {
        Membership::Arrival => engine::arrival_time(driver, z, t, radius, opts),
        Membership::Swallow => engine::blow_up_time(driver, z, t, opts),
    };
    match res {
        Ok(Some(v)) => CellValue::Reached(v),
        Ok(None) => CellValue::Escaped,
        Err(_) => CellValue::Failed,
    }
}

/// Left hull raster up to time `t`. Per-cell solver failures are recorded,
/// not raised.
pub fn left_hull_field(
    driver: &Driver,
    t: f64,
    grid: &Grid,
    opts: &SolverOptions,
    raster: &RasterOptions,
) -> Result<HullField, HullError> {
    opts.validate()?;
    if t > driver.t_max() {
        return Err(DriverError::Domain { t, t_max: driver.t_max() }.into());
    }
    let radius = 0.5 * grid.cell_diag();
    let values = exec::map_indexed(raster.exec, grid.len(), |k| {
        cell_value(driver, grid.center_of(k), t, radius, opts, raster.membership)
    });
    Ok(HullField {
        grid: *grid,
        values,
        fingerprint: driver.fingerprint(),
        t_max: t,
        membership: raster.membership,
        side: Side::Left,
    })
}

/// Right hull raster `R_t = i L_t(-i l(t - .))`: the cell at `w` carries the
/// dual-driver hull time of the seed `-i w`.
pub fn right_hull_field(
    driver: &Driver,
    t: f64,
    grid: &Grid,
    opts: &SolverOptions,
    raster: &RasterOptions,
) -> Result<HullField, HullError> {
    opts.validate()?;
    let dual = driver.dual(t)?;
    let radius = 0.5 * grid.cell_diag();
    let minus_i = Complex64::new(0.0, -1.0);
    let values = exec::map_indexed(raster.exec, grid.len(), |k| {
        cell_value(&dual, minus_i * grid.center_of(k), t, radius, opts, raster.membership)
    });
    Ok(HullField {
        grid: *grid,
        values,
        fingerprint: driver.fingerprint(),
        t_max: t,
        membership: raster.membership,
        side: Side::Right,
    })
}

/// Cells shared by two rasters on the same grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntersectionReport {
    pub points: Vec<Complex64>,
    pub hausdorff_to_expected: Option<f64>,
    /// Cell diagonal of the common grid.
    pub resolution: f64,
    /// Cells excluded because one of the solves failed.
    pub unresolved: usize,
}

impl IntersectionReport {
    /// Symmetric Hausdorff distance between the cell centres and a polyline.
    pub fn compare_to_polyline(&mut self, line: &[Complex64], exec: Exec) -> f64 {
        let dense = resample(line, 0.25 * self.resolution);
        let h = if self.points.is_empty() {
            f64::INFINITY
        } else {
            geometry::directed_to_polyline(exec, &self.points, line).max(directed_max(exec, &dense, &self.points))
        };
        self.hausdorff_to_expected = Some(h);
        h
    }
}

fn directed_max(exec: Exec, a: &[Complex64], b: &[Complex64]) -> f64 {
    exec::map_indexed(exec, a.len(), |i| b.iter().map(|q| (a[i] - q).norm()).fold(f64::INFINITY, f64::min))
        .into_iter()
        .fold(0.0, f64::max)
}

/// Points along `line` no further than `spacing` apart.
pub fn resample(line: &[Complex64], spacing: f64) -> Vec<Complex64> {
    let mut out = Vec::new();
    for w in line.windows(2) {
        let n = ((w[1] - w[0]).norm() / spacing).ceil().max(1.0) as usize;
        for k in 0..n {
            out.push(w[0] + (w[1] - w[0]) * (k as f64 / n as f64));
        }
    }
    if let Some(last) = line.last() {
        out.push(*last);
    }
    out
}

pub fn hull_intersection(a: &HullField, t_a: f64, b: &HullField, t_b: f64) -> Result<IntersectionReport, HullError> {
    if a.grid != b.grid {
        return Err(HullError::Mismatch("different grids".into()));
    }
    let (ma, mb) = (a.mask(t_a), b.mask(t_b));
    let points = (0..a.grid.len()).filter(|&k| ma[k] && mb[k]).map(|k| a.grid.center_of(k)).collect();
    let unresolved = (0..a.grid.len())
        .filter(|&k| matches!(a.values[k], CellValue::Failed) || matches!(b.values[k], CellValue::Failed))
        .count();
    Ok(IntersectionReport { points, hausdorff_to_expected: None, resolution: a.grid.cell_diag(), unresolved })
}

/// Number of 4-connected components of the cells not blocked by `mask`.
pub fn complement_components(grid: &Grid, blocked: &[bool]) -> usize {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut seen = blocked.to_vec();
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..nx * ny {
        if seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(k) = queue.pop_front() {
            let (i, j) = (k % nx, k / nx);
            let mut visit = |n: usize| {
                if !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            };
            if i > 0 {
                visit(k - 1);
            }
            if i + 1 < nx {
                visit(k + 1);
            }
            if j > 0 {
                visit(k - nx);
            }
            if j + 1 < ny {
                visit(k + nx);
            }
        }
    }
    count
}

/// Branch bookkeeping carried by pioneer-equation traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchInfo {
    pub ell: i64,
    /// Continuously unwrapped `arg(2 - c z)`.
    pub theta: f64,
    /// `log |2 - c z|`, kept separately because `z` may sit within rounding of `2/c`.
    pub log_modulus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceSample {
    pub t: f64,
    /// `gamma(t)`, the top frontier.
    pub plus: Complex64,
    /// `gamma(-t)`, the bottom frontier; absent once that end stopped growing.
    pub minus: Option<Complex64>,
    pub plus_info: Option<BranchInfo>,
    pub minus_info: Option<BranchInfo>,
    pub residual: f64,
}

/// Sampled two-sided curve `t -> (gamma(t), gamma(-t))`.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct CurveTrace {
    pub samples: Vec<TraceSample>,
}

impl CurveTrace {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn plus(&self) -> Vec<Complex64> {
        self.samples.iter().map(|s| s.plus).collect()
    }

    /// Bottom branch as `(t, gamma(-t))` for the samples where it exists.
    pub fn minus(&self) -> Vec<(f64, Complex64)> {
        self.samples.iter().filter_map(|s| s.minus.map(|m| (s.t, m))).collect()
    }

    pub fn max_residual(&self) -> f64 {
        self.samples.iter().map(|s| s.residual).fold(0.0, f64::max)
    }

    /// Closest sample index to time `t`.
    pub fn nearest(&self, t: f64) -> Option<usize> {
        let i = self.samples.partition_point(|s| s.t < t);
        [i.checked_sub(1), (i < self.samples.len()).then_some(i)]
            .into_iter()
            .flatten()
            .min_by(|&a, &b| (self.samples[a].t - t).abs().total_cmp(&(self.samples[b].t - t).abs()))
    }

    /// Combined polyline from `gamma(-T)` through `gamma(0)` to `gamma(T)`,
    /// with one time per segment (the larger `|t|` of its endpoints).
    pub fn two_sided_polyline(&self) -> (Vec<Complex64>, Vec<f64>) {
        let mut pts: Vec<(f64, Complex64)> = self.minus().into_iter().rev().collect();
        let mut plus = self.samples.iter().map(|s| (s.t, s.plus));
        if pts.last().is_some_and(|p| p.0 == 0.0) {
            plus.next();
        }
        pts.extend(plus);
        let times = pts.windows(2).map(|w| w[0].0.max(w[1].0)).collect();
        (pts.into_iter().map(|p| p.1).collect(), times)
    }
}

/// Earliest self-contact of the combined two-sided polyline.
pub fn simplicity_scan(trace: &CurveTrace, tol: f64, exec: Exec) -> Option<Contact> {
    let (pts, times) = trace.two_sided_polyline();
    geometry::simplicity_scan(exec, &pts, &times, tol)
}

/// Offsets used for the frontier limits `g_t^{-1}(l(t) +- i eps)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierOptions {
    pub eps: Vec<f64>,
    /// Cancel the leading `eps^2` error term using the last two offsets.
    pub richardson: bool,
}

impl Default for FrontierOptions {
    fn default() -> Self {
        Self { eps: vec![1e-2, 1e-3, 1e-4], richardson: true }
    }
}

/// Top (`side = +1`) or bottom (`side = -1`) frontier limit at time `t`,
/// with the gap between the last two offsets as residual.
pub fn frontier_point(
    driver: &Driver,
    t: f64,
    side: f64,
    opts: &SolverOptions,
    fopts: &FrontierOptions,
) -> Result<(Complex64, f64), HullError> {
    let l = driver.eval(t)?;
    if t == 0.0 {
        return Ok((l, 0.0));
    }
    let mut hits: Vec<(f64, Complex64)> = Vec::new();
    let mut last_err = None;
    for &eps in &fopts.eps {
        match engine::inverse_map(driver, t, l + Complex64::new(0.0, side * eps), opts) {
            Ok(z) => hits.push((eps, z)),
            Err(e @ EngineError::Stiff { .. }) => last_err = Some(e.to_string()),
            Err(e) => return Err(e.into()),
        }
    }
    match hits.as_slice() {
        [] => Err(HullError::Frontier { t, detail: last_err.unwrap_or_default() }),
        [(_, z)] => Ok((*z, f64::INFINITY)),
        [.., (e2, z2), (e3, z3)] => {
            let resid = (z3 - z2).norm();
            if fopts.richardson {
                let rho = (e2 / e3).powi(2);
                Ok((z3 + (z3 - z2) / (rho - 1.0), resid))
            } else {
                Ok((*z3, resid))
            }
        }
    }
}

/// Frontier trace of a general driver at the given increasing times.
pub fn trace_two_sided_curve(
    driver: &Driver,
    times: &[f64],
    opts: &SolverOptions,
    fopts: &FrontierOptions,
    exec: Exec,
) -> Result<CurveTrace, HullError> {
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HullError::Grid("trace times must be strictly increasing".into()));
    }
    let rows = exec::map_indexed(exec, times.len(), |k| {
        let t = times[k];
        let (p, rp) = frontier_point(driver, t, 1.0, opts, fopts)?;
        let (m, rm) = frontier_point(driver, t, -1.0, opts, fopts)?;
        Ok(TraceSample { t, plus: p, minus: Some(m), plus_info: None, minus_info: None, residual: rp.max(rm) })
    });
    let samples = rows.into_iter().collect::<Result<Vec<_>, HullError>>()?;
    Ok(CurveTrace { samples })
}

/// `n + 1` equally spaced times on `[0, t]`.
pub fn uniform_times(t: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| t * k as f64 / n as f64).collect()
}
