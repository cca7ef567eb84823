//! Executable checks of the structural identities of Loewner chains
//! (translation, scaling, reflections, duality, concatenation, time reversal,
//! the simple-curve criterion) and the end-to-end counterexample run.
//!
//! Checks never raise on a failed identity: every sample contributes a
//! residual and the report carries the verdict.

use crate::driver::{Driver, DriverError};
use crate::engine::{self, EngineError, MapValue, SolverOptions};
use crate::exec::{self, Exec};
use crate::geometry;
use crate::hull::{self, CellValue, FrontierOptions, Grid, HullError, HullField, Membership, RasterOptions};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error(transparent)]
    Hull(#[from] HullError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Offender {
    pub point: Complex64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub name: String,
    pub fingerprint: String,
    pub samples: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Up to five samples with the largest residuals.
    pub worst: Vec<Offender>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl VerificationReport {
    /// Report over `(point, residual)` samples. Non-finite residuals fail.
    pub fn from_samples(name: &str, fingerprint: &str, tolerance: f64, samples: &[(Complex64, f64)]) -> Self {
        let mut ranked: Vec<Offender> =
            samples.iter().map(|&(point, residual)| Offender { point, residual: if residual.is_nan() { f64::INFINITY } else { residual } }).collect();
        ranked.sort_by(|a, b| b.residual.total_cmp(&a.residual));
        let max_residual = ranked.first().map_or(0.0, |o| o.residual);
        ranked.truncate(5);
        Self {
            name: name.to_string(),
            fingerprint: fingerprint.to_string(),
            samples: samples.len(),
            max_residual,
            tolerance,
            pass: max_residual <= tolerance,
            worst: ranked,
            note: None,
        }
    }

    fn with_note(mut self, note: String) -> Self {
        self.note = Some(note);
        self
    }

    /// `PASS name [fingerprint] max=... tol=... n=...`
    pub fn summary_line(&self) -> String {
        let mut line = format!(
            "{} {} [{}] max={:.3e} tol={:.3e} n={}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.fingerprint,
            self.max_residual,
            self.tolerance,
            self.samples
        );
        if let Some(n) = &self.note {
            line.push_str(" ; ");
            line.push_str(n);
        }
        line
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckOptions {
    pub solver: SolverOptions,
    #[serde(skip)]
    pub exec: Exec,
    pub seed: u64,
    pub probes: usize,
    /// Raster side length for the raster variants.
    pub grid_n: usize,
    /// Trajectory tolerance; defaults to `1e3 * rel_tol`.
    pub trajectory_tol: Option<f64>,
    /// Raster tolerance in cell diagonals.
    pub raster_cells: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            exec: Exec::default(),
            seed: 0x5eed,
            probes: 100,
            grid_n: 64,
            trajectory_tol: None,
            raster_cells: 2.0,
        }
    }
}

impl CheckOptions {
    pub fn traj_tol(&self) -> f64 {
        self.trajectory_tol.unwrap_or(1e3 * self.solver.rel_tol)
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(stream);
        r
    }

    fn raster(&self, membership: Membership) -> RasterOptions {
        RasterOptions { membership, exec: self.exec }
    }
}

/// Probe points uniform (by area) on the annulus between one and two
/// half-diagonals of the hull's bounding box, around its centre.
pub fn annulus_probes(driver: &Driver, t: f64, n: usize, rng: &mut impl Rng) -> Result<Vec<Complex64>, VerifyError> {
    let g = Grid::default_for(driver, t, 1)?;
    let center = Complex64::new(0.5 * (g.x0 + g.x1), 0.5 * (g.y0 + g.y1));
    let r = 0.5 * (g.x1 - g.x0).hypot(g.y1 - g.y0);
    Ok((0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            let rad = r * (1.0 + 3.0 * u).sqrt();
            let phi = rng.gen_range(0.0..2.0 * PI);
            center + Complex64::from_polar(rad, phi)
        })
        .collect())
}

fn alive(driver: &Driver, z: Complex64, t: f64, opts: &SolverOptions) -> Option<Complex64> {
    match engine::forward_map(driver, z, t, opts) {
        Ok(MapValue::Alive(w)) => Some(w),
        _ => None,
    }
}

/// Residual `|lhs(z) - rhs(z)|` over probes; a failed or swallowed side counts as infinite.
fn trajectory_residuals<F>(exec: Exec, probes: &[Complex64], f: F) -> Vec<(Complex64, f64)>
where
    F: Fn(Complex64) -> Option<(Complex64, Complex64)> + Sync,
{
    exec::map_indexed(exec, probes.len(), |k| {
        let z = probes[k];
        (z, f(z).map_or(f64::INFINITY, |(a, b)| (a - b).norm()))
    })
}

fn set_distance(exec: Exec, a: &[Complex64], b: &[Complex64]) -> f64 {
    geometry::hausdorff(exec, a, b)
}

fn raster_report(name: &str, driver: &Driver, ctx: &CheckOptions, grid: &Grid, a: &[Complex64], b: &[Complex64]) -> VerificationReport {
    let d = set_distance(ctx.exec, a, b);
    let rep = VerificationReport::from_samples(name, &driver.fingerprint(), ctx.raster_cells * grid.cell_diag(), &[(Complex64::new(0.0, 0.0), d)]);
    VerificationReport { samples: a.len().max(b.len()), ..rep }
}

fn field(driver: &Driver, t: f64, grid: &Grid, ctx: &CheckOptions) -> Result<HullField, VerifyError> {
    Ok(hull::left_hull_field(driver, t, grid, &ctx.solver, &ctx.raster(Membership::Arrival))?)
}

/// `g_t^{l+a}(z+a) = g_t^l(z) + a` on probes, and `L_t(l+a) = a + L_t(l)` on rasters.
pub fn check_translation(driver: &Driver, a: Complex64, t: f64, ctx: &CheckOptions) -> Result<Vec<VerificationReport>, VerifyError> {
    let moved = driver.translated(a);
    let probes = annulus_probes(driver, t, ctx.probes, &mut ctx.rng(1))?;
    let o = &ctx.solver;
    let res = trajectory_residuals(ctx.exec, &probes, |z| Some((alive(&moved, z + a, t, o)?, alive(driver, z, t, o)? + a)));
    let fp = driver.fingerprint();
    let traj = VerificationReport::from_samples("translation.trajectory", &fp, ctx.traj_tol(), &res);
    let g = Grid::default_for(driver, t, ctx.grid_n)?;
    let gm = Grid::new(g.x0 + a.re, g.x1 + a.re, g.y0 + a.im, g.y1 + a.im, g.nx, g.ny)?;
    let base: Vec<Complex64> = field(driver, t, &g, ctx)?.members(t).into_iter().map(|z| z + a).collect();
    let other = field(&moved, t, &gm, ctx)?.members(t);
    Ok(vec![traj, raster_report("translation.raster", driver, ctx, &g, &base, &other)])
}

/// `g_{a^2 t}^{(a)}(a z) = a g_t(z)` for the scaled driver `a l(./a^2)`.
pub fn check_scaling(driver: &Driver, a: f64, t: f64, ctx: &CheckOptions) -> Result<Vec<VerificationReport>, VerifyError> {
    if !(a > 0.0) {
        return Err(VerifyError::Parameter(format!("scale {a} must be positive")));
    }
    let scaled = driver.scaled(a)?;
    let probes = annulus_probes(driver, t, ctx.probes, &mut ctx.rng(2))?;
    let o = &ctx.solver;
    let res = trajectory_residuals(ctx.exec, &probes, |z| Some((alive(&scaled, z * a, a * a * t, o)?, alive(driver, z, t, o)? * a)));
    let fp = driver.fingerprint();
    // Residual relative to the scale so that a and 1/a are judged alike.
    let res: Vec<_> = res.into_iter().map(|(z, r)| (z, r / a.max(1.0))).collect();
    let traj = VerificationReport::from_samples("scaling.trajectory", &fp, ctx.traj_tol(), &res);
    let g = Grid::default_for(driver, t, ctx.grid_n)?;
    let gs = Grid::new(a * g.x0, a * g.x1, a * g.y0, a * g.y1, g.nx, g.ny)?;
    let base: Vec<Complex64> = field(driver, t, &g, ctx)?.members(t).into_iter().map(|z| z * a).collect();
    let other = field(&scaled, a * a * t, &gs, ctx)?.members(a * a * t);
    Ok(vec![traj, raster_report("scaling.raster", driver, ctx, &gs, &base, &other)])
}

/// The three reflection identities on probes, plus the conjugation identity on rasters.
pub fn check_reflections(driver: &Driver, t: f64, ctx: &CheckOptions) -> Result<Vec<VerificationReport>, VerifyError> {
    let probes = annulus_probes(driver, t, ctx.probes, &mut ctx.rng(3))?;
    let o = &ctx.solver;
    let fp = driver.fingerprint();
    let (rr, ri, ro) = (driver.conjugated(), driver.conj_negated(), driver.negated());
    let res = trajectory_residuals(ctx.exec, &probes, |z| Some((alive(&rr, z.conj(), t, o)?, alive(driver, z, t, o)?.conj())));
    let r1 = VerificationReport::from_samples("reflection.rr", &fp, ctx.traj_tol(), &res);
    let res = trajectory_residuals(ctx.exec, &probes, |z| Some((alive(&ri, -z.conj(), t, o)?, -alive(driver, z, t, o)?.conj())));
    let r2 = VerificationReport::from_samples("reflection.ri", &fp, ctx.traj_tol(), &res);
    let res = trajectory_residuals(ctx.exec, &probes, |z| Some((alive(&ro, -z, t, o)?, -alive(driver, z, t, o)?)));
    let r3 = VerificationReport::from_samples("reflection.ro", &fp, ctx.traj_tol(), &res);
    let g = Grid::default_for(driver, t, ctx.grid_n)?;
    let gc = Grid::new(g.x0, g.x1, -g.y1, -g.y0, g.nx, g.ny)?;
    let base: Vec<Complex64> = field(driver, t, &g, ctx)?.members(t).into_iter().map(|z| z.conj()).collect();
    let other = field(&rr, t, &gc, ctx)?.members(t);
    Ok(vec![r1, r2, r3, raster_report("reflection.rr_raster", driver, ctx, &g, &base, &other)])
}

/// Grid `i G` (a quarter turn of `G`).
fn rotate_grid(g: &Grid, quarter_turns_ccw: bool) -> Result<Grid, VerifyError> {
    if quarter_turns_ccw {
        Ok(Grid::new(-g.y1, -g.y0, g.x0, g.x1, g.ny, g.nx)?)
    } else {
        Ok(Grid::new(g.y0, g.y1, -g.x1, -g.x0, g.ny, g.nx)?)
    }
}

/// Right hull raster against backward-flow membership at sampled cells, and
/// `L_t(l) = i R_t(-i l(t - .))` on rasters.
pub fn check_duality(driver: &Driver, t: f64, ctx: &CheckOptions) -> Result<Vec<VerificationReport>, VerifyError> {
    let fp = driver.fingerprint();
    let o = &ctx.solver;
    let dual = driver.dual(t)?;
    let g_left = Grid::default_for(&dual, t, ctx.grid_n)?;
    let g = rotate_grid(&g_left, true)?;
    let right = hull::right_hull_field(driver, t, &g, o, &ctx.raster(Membership::Arrival))?;
    let mask = right.mask(t);
    let inside: Vec<usize> = (0..g.len()).filter(|&k| mask[k]).collect();
    let inside_pts: Vec<Complex64> = inside.iter().map(|&k| g.center_of(k)).collect();
    let cell = g.cell_diag();
    let far = ctx.raster_cells * cell;
    let outside: Vec<usize> = (0..g.len())
        .filter(|&k| !mask[k] && !matches!(right.values[k], CellValue::Failed))
        .filter(|&k| {
            let w = g.center_of(k);
            inside_pts.iter().all(|p| (p - w).norm() >= far)
        })
        .collect();
    let mut rng = ctx.rng(4);
    let mut pick = |pool: &[usize]| -> Vec<Complex64> {
        if pool.len() <= ctx.probes {
            return pool.iter().map(|&k| g.center_of(k)).collect();
        }
        rand::seq::index::sample(&mut rng, pool.len(), ctx.probes).into_iter().map(|i| g.center_of(pool[i])).collect()
    };
    let pin = pick(&inside);
    let pout = pick(&outside);
    let res_in = exec::map_indexed(ctx.exec, pin.len(), |k| {
        let w = pin[k];
        (w, engine::inverse_map_distance(driver, t, w, o).unwrap_or(0.0))
    });
    let res_out = trajectory_residuals(ctx.exec, &pout, |w| {
        let z = engine::inverse_map(driver, t, w, o).ok()?;
        Some((alive(driver, z, t, o)?, w))
    });
    let r_in = VerificationReport::from_samples("duality.inside", &fp, far, &res_in);
    let r_out = VerificationReport::from_samples("duality.outside", &fp, ctx.traj_tol(), &res_out);
    // i R_t(dual) has to reproduce L_t(l).
    let gl = Grid::default_for(driver, t, ctx.grid_n)?;
    let gr = rotate_grid(&gl, false)?;
    let left = field(driver, t, &gl, ctx)?.members(t);
    let rot: Vec<Complex64> = hull::right_hull_field(&dual, t, &gr, o, &ctx.raster(Membership::Arrival))?
        .members(t)
        .into_iter()
        .map(|w| w * Complex64::new(0.0, 1.0))
        .collect();
    Ok(vec![r_in, r_out, raster_report("duality.rotation", driver, ctx, &gl, &left, &rot)])
}

/// `g_{t+s} = g^{(t)}_s o g_t` on probes, and the arrival-time shift on raster
/// cells reached in `(t, t+s]`.
pub fn check_concatenation(driver: &Driver, t: f64, s: f64, ctx: &CheckOptions) -> Result<Vec<VerificationReport>, VerifyError> {
    let fp = driver.fingerprint();
    let o = &ctx.solver;
    let shifted = driver.shifted(t)?;
    let probes = annulus_probes(driver, t + s, ctx.probes, &mut ctx.rng(5))?;
    let res = trajectory_residuals(ctx.exec, &probes, |z| {
        let mid = alive(driver, z, t, o)?;
        Some((alive(driver, z, t + s, o)?, alive(&shifted, mid, s, o)?))
    });
    let traj = VerificationReport::from_samples("concatenation.trajectory", &fp, ctx.traj_tol(), &res);
    let g = Grid::default_for(driver, t + s, ctx.grid_n)?;
    let f = field(driver, t + s, &g, ctx)?;
    let cells: Vec<(Complex64, f64)> = (0..g.len())
        .filter_map(|k| match f.values[k] {
            CellValue::Reached(tau) if tau > t && tau <= t + s => Some((g.center_of(k), tau)),
            _ => None,
        })
        .collect();
    let mut rng = ctx.rng(6);
    let cells: Vec<(Complex64, f64)> = if cells.len() > ctx.probes {
        rand::seq::index::sample(&mut rng, cells.len(), ctx.probes).into_iter().map(|i| cells[i]).collect()
    } else {
        cells
    };
    let radius = 0.5 * g.cell_diag();
    let res = exec::map_indexed(ctx.exec, cells.len(), |k| {
        let (z, tau) = cells[k];
        let r = engine::forward_map_with_derivative(driver, z, t, o).ok().flatten().and_then(|(w, d)| {
            engine::arrival_time(&shifted, w, s, radius * d.norm(), o).ok().flatten()
        });
        (z, r.map_or(f64::INFINITY, |a| (a - (tau - t)).abs()))
    });
    let rast = VerificationReport::from_samples("concatenation.arrival", &fp, ctx.traj_tol(), &res);
    Ok(vec![traj, rast])
}

/// `g_T(h_T(w)) = w` for probes `w` off the right hull.
pub fn check_time_reversal(driver: &Driver, t: f64, ctx: &CheckOptions) -> Result<Vec<VerificationReport>, VerifyError> {
    let probes = annulus_probes(driver, t, ctx.probes, &mut ctx.rng(7))?;
    let o = &ctx.solver;
    let res = trajectory_residuals(ctx.exec, &probes, |w| {
        let z = engine::inverse_map(driver, t, w, o).ok()?;
        Some((alive(driver, z, t, o)?, w))
    });
    Ok(vec![VerificationReport::from_samples("time_reversal", &driver.fingerprint(), ctx.traj_tol(), &res)])
}

/// Sufficient criterion for a simple curve: at every interior breakpoint
/// `t_k`, `L_{t_k, T}` and `R_{t_{k-1}, t_k}` meet only at `l(t_k)`. The
/// residual is the distance of shared raster cells from `l(t_k)`.
pub fn check_simple_criterion(driver: &Driver, breakpoints: &[f64], ctx: &CheckOptions) -> Result<Vec<VerificationReport>, VerifyError> {
    if breakpoints.len() < 2 || breakpoints.windows(2).any(|w| w[1] <= w[0]) {
        return Err(VerifyError::Parameter("need at least two increasing breakpoints".into()));
    }
    let t_end = *breakpoints.last().expect("non-empty");
    let fp = driver.fingerprint();
    let o = &ctx.solver;
    let mut samples = Vec::new();
    let mut cell = 0.0f64;
    let mut components = Vec::new();
    for k in 1..breakpoints.len() - 1 {
        let (prev, tk) = (breakpoints[k - 1], breakpoints[k]);
        let lk = driver.eval(tk)?;
        let later = driver.shifted(tk)?;
        let earlier = driver.shifted(prev)?;
        let reach_l = later.range_on(t_end - tk)?.sup_dev + 4.0 * (t_end - tk).sqrt();
        let reach_r = earlier.range_on(tk - prev)?.sup_dev + 4.0 * (tk - prev).sqrt();
        let grid = Grid::square(lk, 1.2 * reach_l.max(reach_r), ctx.grid_n)?;
        cell = cell.max(grid.cell_diag());
        let a = field(&later, t_end - tk, &grid, ctx)?;
        let b = hull::right_hull_field(&earlier, tk - prev, &grid, o, &ctx.raster(Membership::Arrival))?;
        let rep = hull::hull_intersection(&a, t_end - tk, &b, tk - prev)?;
        samples.extend(rep.points.iter().map(|&p| (p, (p - lk).norm())));
        let blocked: Vec<bool> = a.mask(t_end - tk).iter().zip(b.mask(tk - prev)).map(|(x, y)| *x || y).collect();
        components.push((lk, hull::complement_components(&grid, &blocked) as f64 - 1.0));
    }
    let crit = VerificationReport::from_samples("simple_criterion.intersection", &fp, ctx.raster_cells * cell, &samples);
    let conn = VerificationReport::from_samples("simple_criterion.complement_connected", &fp, 0.0, &components);
    Ok(vec![crit, conn])
}

/// Ray angle of the hull of `a sqrt(t)`, from the top frontier on `[T/4, T]`.
pub fn sqrt_driver_angle(a: f64, t: f64, opts: &SolverOptions) -> Result<f64, VerifyError> {
    let driver = Driver::sqrt_forward(a)?;
    let fo = FrontierOptions::default();
    let mut sum = 0.0;
    let n = 8;
    for k in 0..n {
        let tk = t * (0.25 + 0.75 * k as f64 / (n - 1) as f64);
        let (z, _) = hull::frontier_point(&driver, tk, 1.0, opts, &fo)?;
        sum += z.arg();
    }
    Ok(sum / n as f64)
}

/// `pi/2 (1 - a / sqrt(16 + a^2))`.
pub fn sqrt_angle_formula(a: f64) -> f64 {
    FRAC_PI_2 * (1.0 - a / (16.0 + a * a).sqrt())
}

/// Tip modulus `2 sqrt(t) ((1-al)/al)^(1/2-al)` of the slit grown by `a sqrt(t)`,
/// with `al pi` the slit angle. It follows from the slit map
/// `(w - p)^(1-al) (w + q)^al` normalised at infinity.
pub fn sqrt_slit_tip(a: f64, t: f64) -> f64 {
    let al = sqrt_angle_formula(a) / PI;
    if al >= 0.5 {
        return 2.0 * t.sqrt();
    }
    2.0 * t.sqrt() * ((1.0 - al) / al).powf(0.5 - al)
}

pub fn check_sqrt_angle(a: f64, t: f64, tol: f64, opts: &SolverOptions) -> Result<VerificationReport, VerifyError> {
    let driver = Driver::sqrt_forward(a)?;
    let theta = sqrt_driver_angle(a, t, opts)?;
    let expect = sqrt_angle_formula(a);
    Ok(VerificationReport::from_samples("sqrt_angle", &driver.fingerprint(), tol, &[(Complex64::from_polar(1.0, theta), (theta - expect).abs())])
        .with_note(format!("measured {theta:.6} expected {expect:.6}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CounterexampleOptions {
    pub resolution: usize,
    /// Expected modulus of the tip of the shared segment.
    pub tip_radius: f64,
    pub tip_tol: f64,
    pub drift_tol: f64,
    pub simplicity_tol: f64,
    pub axis_tol: f64,
    /// Frontier samples per unit time.
    pub samples_per_unit: usize,
}

impl Default for CounterexampleOptions {
    fn default() -> Self {
        Self {
            resolution: 512,
            tip_radius: sqrt_slit_tip(4.0 / 3f64.sqrt(), 1.0),
            tip_tol: 1e-2,
            drift_tol: 5e-3,
            simplicity_tol: 1e-3,
            axis_tol: 1e-6,
            samples_per_unit: 200,
        }
    }
}

/// End-to-end run of the driver that is `(4i/sqrt 3) sqrt(1-t)` on `[0,1]`
/// and `(4/sqrt 3) sqrt(t-1)` on `[1,2]`: its curve is simple although
/// `L_{1,2}` and `R_1` share a whole segment.
pub fn run_counterexample(cx: &CounterexampleOptions, ctx: &CheckOptions) -> Result<Vec<VerificationReport>, VerifyError> {
    let driver = Driver::counterexample();
    let fp = driver.fingerprint();
    let o = &ctx.solver;
    let fo = FrontierOptions::default();
    let mut out = Vec::new();

    // Frontier of the whole run.
    let n1 = cx.samples_per_unit.max(4);
    let times: Vec<f64> = (0..=2 * n1).map(|k| k as f64 / n1 as f64).collect();
    let trace = hull::trace_two_sided_curve(&driver, &times, o, &fo, ctx.exec)?;
    let first: Vec<_> = trace.samples.iter().filter(|s| s.t <= 1.0).collect();
    let axis: Vec<(Complex64, f64)> = first
        .iter()
        .flat_map(|s| [(s.plus, s.plus.re.abs()), (s.minus.unwrap_or(s.plus), s.minus.map_or(0.0, |m| m.re.abs()))])
        .collect();
    out.push(VerificationReport::from_samples("counterexample.first_phase_axis", &fp, cx.axis_tol, &axis));

    // L_{1,2} and R_1 on a common grid.
    let later = driver.shifted(1.0)?;
    let (tip, tip_resid) = hull::frontier_point(&later, 1.0, 1.0, o, &fo)?;
    let half = 1.2 * tip.re.abs().max(tip.im.abs()).max(cx.tip_radius * FRAC_PI_4.sin());
    let grid = Grid::square(Complex64::new(0.0, 0.0), half, cx.resolution)?;
    let raster = ctx.raster(Membership::Arrival);
    let l12 = hull::left_hull_field(&later, 1.0, &grid, o, &raster)?;
    let r1 = hull::right_hull_field(&driver, 1.0, &grid, o, &raster)?;
    let mut inter = hull::hull_intersection(&l12, 1.0, &r1, 1.0)?;
    let seg = [Complex64::new(0.0, 0.0), Complex64::from_polar(cx.tip_radius, FRAC_PI_4)];
    let h = inter.compare_to_polyline(&seg, ctx.exec);
    let cell = grid.cell_diag();
    out.push(
        VerificationReport::from_samples("counterexample.intersection", &fp, ctx.raster_cells * cell, &[(seg[1], h)])
            .with_note(format!("{} shared cells, {} unresolved, cell {cell:.4e}", inter.points.len(), inter.unresolved)),
    );
    let expected_tip = Complex64::from_polar(cx.tip_radius, FRAC_PI_4);
    out.push(
        VerificationReport::from_samples("counterexample.tip", &fp, cx.tip_tol, &[(tip, (tip - expected_tip).norm())])
            .with_note(format!("tip {:.6}{:+.6}i, frontier residual {tip_resid:.2e}", tip.re, tip.im)),
    );
    let far = inter.points.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm()));
    out.push(VerificationReport::from_samples(
        "counterexample.tip_raster",
        &fp,
        ctx.raster_cells * cell,
        &[(far.unwrap_or(tip), far.map_or(f64::INFINITY, |p| (p - tip).norm()))],
    ));
    let blocked: Vec<bool> = l12.mask(1.0).iter().zip(r1.mask(1.0)).map(|(a, b)| *a || b).collect();
    let comps = hull::complement_components(&grid, &blocked);
    out.push(VerificationReport::from_samples(
        "counterexample.complement_connected",
        &fp,
        0.0,
        &[(Complex64::new(0.0, 0.0), comps as f64 - 1.0)],
    ));

    // After t = 1 the top end stops: new top-frontier points lie on L_1.
    let l1: Vec<Complex64> = {
        let mut v: Vec<Complex64> = first.iter().rev().map(|s| s.plus).collect();
        v.extend(first.iter().filter_map(|s| s.minus));
        v
    };
    let top1 = first.last().expect("samples up to t = 1").plus;
    let later_plus: Vec<_> = trace.samples.iter().filter(|s| s.t > 1.0).collect();
    let on_l1: Vec<(Complex64, f64)> = later_plus.iter().map(|s| (s.plus, geometry::polyline_distance(s.plus, &l1))).collect();
    let literal = later_plus.iter().map(|s| (s.plus - top1).norm()).fold(0.0, f64::max);
    out.push(
        VerificationReport::from_samples("counterexample.top_end_stops", &fp, cx.drift_tol, &on_l1)
            .with_note(format!("distance of the top frontier from gamma+(1) reaches {literal:.4e}")),
    );
    let moved = later_plus.iter().filter_map(|s| s.minus).map(|m| geometry::polyline_distance(m, &l1)).fold(0.0, f64::max);
    out.push(VerificationReport::from_samples(
        "counterexample.bottom_end_grows",
        &fp,
        0.0,
        &[(Complex64::new(0.0, 0.0), if moved > cx.drift_tol { 0.0 } else { 1.0 })],
    ));

    // The curve gamma+[0,1] u gamma-[0,2] is simple.
    let mut pts: Vec<Complex64> = first.iter().rev().map(|s| s.plus).collect();
    let mut seg_t: Vec<f64> = first.iter().rev().skip(1).map(|s| s.t).collect();
    // Prepend times match the later endpoint of each segment on the plus side.
    seg_t = seg_t.iter().map(|&t| t + 1.0 / n1 as f64).collect();
    for w in trace.samples.windows(2) {
        if let Some(m) = w[1].minus {
            pts.push(m);
            seg_t.push(w[1].t);
        }
    }
    let contact = geometry::simplicity_scan(ctx.exec, &pts, &seg_t, cx.simplicity_tol);
    let (r, note) = match contact {
        Some(c) => (
            (c.point, cx.simplicity_tol - c.distance + f64::MIN_POSITIVE),
            format!("contact at t = {:.4} near {:.4}{:+.4}i, segments {:?}", c.time, c.point.re, c.point.im, c.segments),
        ),
        None => ((Complex64::new(0.0, 0.0), 0.0), "no contact".to_string()),
    };
    out.push(VerificationReport::from_samples("counterexample.simple_polyline", &fp, 0.0, &[r]).with_note(note));
    Ok(out)
}

/// Named groups of checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Symmetries,
    Counterexample,
    Angles,
    All,
}

impl std::str::FromStr for Suite {
    type Err = VerifyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "symmetries" => Ok(Suite::Symmetries),
            "counterexample" => Ok(Suite::Counterexample),
            "angles" => Ok(Suite::Angles),
            "all" => Ok(Suite::All),
            other => Err(VerifyError::Parameter(format!("unknown suite {other:?}"))),
        }
    }
}

/// The symmetry checks for one driver, on `[0, 1]` (time reversal on `[0, 2]` when available).
pub fn symmetry_suite(driver: &Driver, ctx: &CheckOptions) -> Result<Vec<VerificationReport>, VerifyError> {
    let t = driver.t_max().min(1.0);
    let mut out = Vec::new();
    out.extend(check_translation(driver, Complex64::new(1.0, 1.0), t, ctx)?);
    out.extend(check_scaling(driver, 2.0, t, ctx)?);
    out.extend(check_reflections(driver, t, ctx)?);
    out.extend(check_duality(driver, t, ctx)?);
    out.extend(check_concatenation(driver, 0.5 * t, 0.5 * t, ctx)?);
    out.extend(check_time_reversal(driver, driver.t_max().min(2.0), ctx)?);
    Ok(out)
}

/// Drivers exercised by the default symmetry suite.
pub fn default_drivers() -> Vec<Driver> {
    vec![
        Driver::constant(Complex64::new(0.0, 0.0)),
        Driver::linear(Complex64::new(1.0, 1.0)),
        Driver::linear(Complex64::new(2.0, 1.0)),
        Driver::sqrt_forward(4.0 / 3f64.sqrt()).expect("positive slope"),
        Driver::counterexample(),
    ]
}

/// Runs a suite; reports are ordered by name, then fingerprint.
pub fn run_suite(suite: Suite, drivers: &[Driver], ctx: &CheckOptions) -> Result<Vec<VerificationReport>, VerifyError> {
    let mut out = Vec::new();
    if matches!(suite, Suite::Symmetries | Suite::All) {
        let per = exec::map_indexed(ctx.exec, drivers.len(), |k| symmetry_suite(&drivers[k], ctx));
        for r in per {
            out.extend(r?);
        }
    }
    if matches!(suite, Suite::Angles | Suite::All) {
        for a in [0.0, 4.0 / 3f64.sqrt(), 4.0] {
            out.push(check_sqrt_angle(a, 1.0, 1e-2, &ctx.solver)?);
        }
    }
    if matches!(suite, Suite::Counterexample | Suite::All) {
        out.extend(run_counterexample(&CounterexampleOptions::default(), ctx)?);
    }
    out.sort_by(|a, b| a.name.cmp(&b.name).then_with(|| a.fingerprint.cmp(&b.fingerprint)));
    Ok(out)
}

pub fn all_pass(reports: &[VerificationReport]) -> bool {
    reports.iter().all(|r| r.pass)
}
