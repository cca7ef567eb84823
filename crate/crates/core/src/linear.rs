//! The linear driver `l(t) = c t`: phase classification, the pioneer equation
//! `cz + 2 log(2 - cz) = 2 log 2 + c^2 t` and its continuation, and the
//! diagnostics of the spiralling and exotic phases.
//!
//! The equation is solved in the chart `s = log((2 - cz)/2)` (imaginary part
//! unwrapped), where it reads `expm1(s) - s = -c^2 t / 2`. Shifting `s` by the
//! nearest multiple of `2 pi i` keeps the Newton iteration on a bounded strip,
//! and `z = -2 expm1(s) / c` stays accurate even when `2 - cz` underflows.

use crate::exec::{self, Exec};
use crate::hull::{BranchInfo, CurveTrace, TraceSample};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI, TAU};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearError {
    #[error("{op} needs c in {expected}, got {c} ({found:?})")]
    Phase { op: &'static str, expected: &'static str, c: Complex64, found: Region },
    #[error("pioneer point hit the singular value z = 2/c")]
    Singular,
    #[error("continuation failed at t = {t}: {detail}")]
    Continuation { t: f64, detail: String },
    #[error("trace ends at t = {t_end}, before the required {needed}")]
    TraceTooShort { t_end: f64, needed: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    #[serde(rename = "Omega+")]
    OmegaPlus,
    #[serde(rename = "Omega-")]
    OmegaMinus,
    Omega0,
    RealAxis,
    ImagAxis,
    Origin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReflectedClass {
    #[serde(rename = "C+")]
    CPlus,
    #[serde(rename = "C-")]
    CMinus,
    C0,
    #[serde(rename = "boundary")]
    Boundary,
}

/// Reflection carrying `c` into the closed first quadrant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reflection {
    /// `c -> conj(c)`
    RR,
    /// `c -> -conj(c)`
    RI,
    /// `c -> -c`
    RO,
}

/// Phase of a linear driver. Region-specific constants are those of the
/// first-quadrant representative.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseRecord {
    pub c: Complex64,
    pub region: Region,
    pub reflected_class: ReflectedClass,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reflection: Option<Reflection>,
    pub fq_representative: Complex64,
    pub re_c2: f64,
    pub im_c2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rates: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spiral_target: Option<Complex64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spiral_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_cut: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holder_at_tstar: Option<f64>,
}

/// `Re(c^2)` counts as zero below this multiple of `|c|^2`.
const DIAGONAL_TOL: f64 = 1e-12;

fn region_of_fq(q: Complex64) -> Region {
    if q.re == 0.0 && q.im == 0.0 {
        Region::Origin
    } else if q.im == 0.0 {
        Region::RealAxis
    } else if q.re == 0.0 {
        Region::ImagAxis
    } else {
        let re_c2 = q.re * q.re - q.im * q.im;
        if re_c2.abs() <= DIAGONAL_TOL * q.norm_sqr() {
            Region::Omega0
        } else if re_c2 > 0.0 {
            Region::OmegaPlus
        } else {
            Region::OmegaMinus
        }
    }
}

pub fn classify(c: Complex64) -> PhaseRecord {
    let (rep, reflection) = match (c.re < 0.0, c.im < 0.0) {
        (false, false) => (c, None),
        (true, false) => (-c.conj(), Some(Reflection::RI)),
        (true, true) => (-c, Some(Reflection::RO)),
        (false, true) => (c.conj(), Some(Reflection::RR)),
    };
    let rep = Complex64::new(rep.re.abs(), rep.im.abs());
    let region = region_of_fq(rep);
    let c2 = rep * rep;
    let mut rec = PhaseRecord {
        c,
        region,
        reflected_class: match region {
            Region::OmegaPlus => ReflectedClass::CPlus,
            Region::OmegaMinus => ReflectedClass::CMinus,
            Region::Omega0 => ReflectedClass::C0,
            _ => ReflectedClass::Boundary,
        },
        reflection,
        fq_representative: rep,
        re_c2: c2.re,
        im_c2: c2.im,
        rates: None,
        spiral_target: None,
        spiral_rate: None,
        t_cut: None,
        t_star: None,
        holder_at_tstar: None,
    };
    match region {
        Region::OmegaPlus => rec.rates = Some(rates_formula(rep)),
        Region::OmegaMinus => {
            rec.spiral_target = Some(2.0 / rep);
            rec.spiral_rate = Some(c2.im);
        }
        Region::Omega0 => {
            rec.t_cut = Some(TAU / c2.im);
            rec.t_star = Some(2.0 * TAU / c2.im);
            rec.holder_at_tstar = Some(rep.norm() * (2.0 * TAU / c2.im).sqrt());
        }
        _ => {}
    }
    rec
}

fn rates_formula(c: Complex64) -> (f64, f64) {
    let c2 = c * c;
    let n = c.norm_sqr();
    ((c2.re * c.re + c.im * c2.im) / n, (c.re * c2.im - c2.re * c.im) / n)
}

fn require(op: &'static str, c: Complex64, want: Region, expected: &'static str) -> Result<PhaseRecord, LinearError> {
    let rec = classify(c);
    if rec.region == want {
        Ok(rec)
    } else {
        Err(LinearError::Phase { op, expected, c, found: rec.region })
    }
}

/// Limits of `Re gamma(t)/t` and `Im gamma(t)/t` in the simple phase.
pub fn asymptotic_rates(c: Complex64) -> Result<(f64, f64), LinearError> {
    require("asymptotic_rates", c, Region::OmegaPlus, "Omega+")?;
    Ok(rates_formula(c))
}

/// `|c| sqrt(t*)`, the Hölder-1/2 norm of `c t` on `[0, t*]`.
pub fn holder_at_tstar(c: Complex64) -> Result<f64, LinearError> {
    require("holder_at_tstar", c, Region::Omega0, "Omega0")?;
    let im_c2 = (c * c).im.abs();
    Ok(c.norm() * (2.0 * TAU / im_c2).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Top frontier, `z ~ +2i sqrt(t)` for small `t`.
    Plus,
    /// Bottom frontier, `z ~ -2i sqrt(t)`.
    Minus,
}

/// A pioneer point with its unwrapped branch data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PioneerState {
    pub c: Complex64,
    pub t: f64,
    pub branch: Branch,
    pub z: Complex64,
    /// Unwrapped `arg(2 - c z)`.
    pub theta: f64,
    /// `log |2 - c z|`.
    pub log_modulus: f64,
    pub ell: i64,
    /// `|PE|` at the state.
    pub residual: f64,
    /// Set when the Newton Jacobian nearly vanishes (`z` close to 0 away from `t = 0`).
    pub degenerate: bool,
}

impl PioneerState {
    /// State from a point and an unwrapped angle; `log |2 - cz|` is taken from `z`.
    pub fn from_z(c: Complex64, t: f64, branch: Branch, z: Complex64, theta: f64) -> Self {
        let w = Complex64::new(2.0, 0.0) - c * z;
        let mut st = PioneerState {
            c,
            t,
            branch,
            z,
            theta,
            log_modulus: w.norm().ln(),
            ell: winding_index(theta),
            residual: 0.0,
            degenerate: false,
        };
        st.residual = pioneer_residual(&st).map_or(f64::INFINITY, |r| r.norm());
        st
    }

    /// The chart coordinate `log((2 - cz)/2)`.
    pub fn s(&self) -> Complex64 {
        Complex64::new(self.log_modulus - LN_2, self.theta)
    }

    fn from_s(c: Complex64, t: f64, branch: Branch, s: Complex64) -> Self {
        let m = (s.im / TAU).round();
        let sigma = s - Complex64::new(0.0, TAU * m);
        let e = expm1(sigma);
        let z = -2.0 * e / c;
        let q = Complex64::new(0.0, TAU * m) - c * c * t * 0.5;
        let mut st = PioneerState {
            c,
            t,
            branch,
            z,
            theta: s.im,
            log_modulus: LN_2 + s.re,
            ell: winding_index(s.im),
            residual: 0.0,
            degenerate: t > 0.0 && e.norm() < 1e-6,
        };
        // PE = -2 (phi(sigma) - q) in the chart; the direct form is kept as a cross-check.
        let chart = 2.0 * (phi(sigma) - q).norm();
        st.residual = pioneer_residual(&st).map_or(chart, |r| r.norm().max(chart));
        st
    }

    pub fn info(&self) -> BranchInfo {
        BranchInfo { ell: self.ell, theta: self.theta, log_modulus: self.log_modulus }
    }
}

/// `round((theta - ARG)/2 pi)` with `ARG` the principal argument.
fn winding_index(theta: f64) -> i64 {
    let principal = theta.sin().atan2(theta.cos());
    ((theta - principal) / TAU).round() as i64
}

/// `cz + 2(log|2-cz| + i theta) - 2 log 2 - c^2 t` with the unwrapped angle.
pub fn pioneer_residual(st: &PioneerState) -> Result<Complex64, LinearError> {
    if !st.log_modulus.is_finite() {
        return Err(LinearError::Singular);
    }
    let c = st.c;
    Ok(c * st.z + 2.0 * Complex64::new(st.log_modulus, st.theta) - 2.0 * LN_2 - c * c * st.t)
}

/// `exp(s) - 1` without cancellation near 0.
fn expm1(s: Complex64) -> Complex64 {
    let (sin_half, cos) = ((0.5 * s.im).sin(), s.im.cos());
    let em = s.re.exp_m1();
    Complex64::new(em * cos - 2.0 * sin_half * sin_half, (em + 1.0) * s.im.sin())
}

/// `expm1(s) - s`, by its Taylor series near 0.
fn phi(s: Complex64) -> Complex64 {
    if s.norm() < 0.5 {
        let mut term = s * s * 0.5;
        let mut acc = term;
        for k in 3..=24 {
            term = term * s / k as f64;
            acc += term;
            if term.norm() < 1e-18 * acc.norm() {
                break;
            }
        }
        acc
    } else {
        expm1(s) - s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PioneerOptions {
    pub max_newton: usize,
    /// Newton stops once the update is below this (relative to `1 + |sigma|`).
    pub newton_tol: f64,
    pub min_substep: f64,
    /// Largest allowed change of the chart coordinate per accepted substep.
    pub max_chart_step: f64,
}

impl Default for PioneerOptions {
    fn default() -> Self {
        Self { max_newton: 60, newton_tol: 1e-15, min_substep: 1e-13, max_chart_step: 0.3 }
    }
}

/// Newton on `phi(sigma) = q` in the strip fixed by the guess.
fn newton(c: Complex64, t: f64, guess: Complex64, opts: &PioneerOptions) -> Option<Complex64> {
    let m = (guess.im / TAU).round();
    let shift = Complex64::new(0.0, TAU * m);
    let q = shift - c * c * t * 0.5;
    let mut sigma = guess - shift;
    for _ in 0..opts.max_newton {
        if (phi(sigma) - q).norm() <= 1e-16 * (1.0 + q.norm()) {
            return Some(sigma + shift);
        }
        let d = expm1(sigma);
        if d.norm() == 0.0 {
            return None;
        }
        let mut delta = (phi(sigma) - q) / d;
        if delta.norm() > 1.0 {
            delta /= delta.norm();
        }
        sigma -= delta;
        if !(sigma.re.is_finite() && sigma.im.is_finite()) {
            return None;
        }
        if delta.norm() <= opts.newton_tol * (1.0 + sigma.norm()) {
            let r = (phi(sigma) - q).norm();
            return (r <= 1e-12 * (1.0 + q.norm())).then_some(sigma + shift);
        }
    }
    let r = (phi(sigma) - q).norm();
    (r <= 1e-12 * (1.0 + q.norm())).then_some(sigma + shift)
}

/// Leading terms of the small-time root, `s = -+ i c sqrt(t) + c^2 t / 6`.
fn small_time_chart(c: Complex64, t: f64, branch: Branch) -> Complex64 {
    let sign = match branch {
        Branch::Plus => -1.0,
        Branch::Minus => 1.0,
    };
    Complex64::new(0.0, sign) * c * t.sqrt() + c * c * t / 6.0
}

/// Largest `|c|^2 t` for which a solve may start without a warm start.
const COLD_START_LIMIT: f64 = 0.05;

/// Pioneer point at time `t` on `branch`. Without a warm start the solve is
/// seeded from the small-time expansion and only allowed when `|c|^2 t` is small.
pub fn solve_pioneer(
    c: Complex64,
    t: f64,
    branch: Branch,
    warm_start: Option<&PioneerState>,
    opts: &PioneerOptions,
) -> Result<PioneerState, LinearError> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(LinearError::Parameter(format!("time {t} must be >= 0")));
    }
    if c == Complex64::new(0.0, 0.0) {
        return Err(LinearError::Parameter("c must be non-zero".into()));
    }
    if t == 0.0 {
        return Ok(PioneerState::from_s(c, 0.0, branch, Complex64::new(0.0, 0.0)));
    }
    let guess = match warm_start {
        Some(w) if w.t > 0.0 => predict(c, w, t),
        _ => {
            if c.norm_sqr() * t > COLD_START_LIMIT {
                return Err(LinearError::Continuation { t, detail: "a warm start is required".into() });
            }
            small_time_chart(c, t, branch)
        }
    };
    let s = newton(c, t, guess, opts).ok_or_else(|| LinearError::Continuation { t, detail: "Newton diverged".into() })?;
    Ok(PioneerState::from_s(c, t, branch, s))
}

/// Predicted chart coordinate at `t` from the state `w`.
fn predict(c: Complex64, w: &PioneerState, t: f64) -> Complex64 {
    let s = w.s();
    let m = (s.im / TAU).round();
    let shift = Complex64::new(0.0, TAU * m);
    let sigma = s - shift;
    let c2 = c * c;
    let q_old = shift - c2 * w.t * 0.5;
    if sigma.norm() < 0.25 && q_old.norm() > 0.0 {
        // Near a lattice point phi is quadratic, so sigma scales like sqrt(q).
        let q_new = shift - c2 * t * 0.5;
        return shift + sigma * (q_new / q_old).sqrt();
    }
    let rate = |s: Complex64| -c2 / (2.0 * expm1(s));
    let h = t - w.t;
    let mid = s + rate(s) * (0.5 * h);
    s + rate(mid) * h
}

/// One continuation substep, rejected when the chart coordinate jumps.
fn advance(c: Complex64, st: &PioneerState, t: f64, opts: &PioneerOptions) -> Option<PioneerState> {
    let old = st.s();
    let guess = if st.t == 0.0 { small_time_chart(c, t, st.branch) } else { predict(c, st, t) };
    if st.t == 0.0 && c.norm_sqr() * t > COLD_START_LIMIT {
        return None;
    }
    let s = newton(c, t, guess, opts)?;
    let sigma_reduced = s - Complex64::new(0.0, TAU * (s.im / TAU).round());
    let jump = (s - guess).norm();
    let room = 0.2 * sigma_reduced.norm().min(1.0) + 1e-12;
    if jump > room || (s.im - old.im).abs() >= 0.5 * PI || (s - old).norm() > opts.max_chart_step {
        return None;
    }
    Some(PioneerState::from_s(c, t, st.branch, s))
}

/// Continues one branch through the given output times.
fn continue_branch(
    c: Complex64,
    branch: Branch,
    times: &[f64],
    stop_after: Option<f64>,
    opts: &PioneerOptions,
) -> Result<Vec<Option<PioneerState>>, LinearError> {
    let mut out = Vec::with_capacity(times.len());
    let mut st = PioneerState::from_s(c, 0.0, branch, Complex64::new(0.0, 0.0));
    let mut h = (COLD_START_LIMIT / c.norm_sqr()).min(times.get(1).copied().unwrap_or(1.0));
    for &target in times {
        if stop_after.is_some_and(|ts| target > ts * (1.0 + 1e-12)) {
            out.push(None);
            continue;
        }
        while st.t < target {
            let step = h.min(target - st.t);
            let t_new = if step >= target - st.t { target } else { st.t + step };
            match advance(c, &st, t_new, opts) {
                Some(next) => {
                    st = next;
                    h = step * 2.0;
                }
                None => {
                    h = step * 0.5;
                    if h < opts.min_substep * (1.0 + st.t) {
                        return Err(LinearError::Continuation {
                            t: st.t,
                            detail: format!("substep underflow on the {branch:?} branch"),
                        });
                    }
                }
            }
        }
        out.push(Some(st));
    }
    Ok(out)
}

/// Output times `k dt` up to `t_end`, plus `t*` for the exotic phase.
fn trace_times(c: Complex64, t_end: f64, dt: f64) -> Vec<f64> {
    let n = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
    let mut times: Vec<f64> = (0..=n).map(|k| (k as f64 * dt).min(t_end)).collect();
    times.dedup();
    if let Some(ts) = tstar_of(c) {
        if ts < t_end && !times.iter().any(|&t| (t - ts).abs() <= 1e-12 * ts) {
            let i = times.partition_point(|&t| t < ts);
            times.insert(i, ts);
        }
    }
    times
}

fn tstar_of(c: Complex64) -> Option<f64> {
    (region_of_fq(c) == Region::Omega0 && c.re > 0.0 && c.im > 0.0).then(|| 2.0 * TAU / (c * c).im)
}

/// Traces both branches of the pioneer curve on `[0, t_end]`. In the exotic
/// phase the bottom branch ends at `t*`, where it closes its loop.
pub fn trace_pioneer_curve(c: Complex64, t_end: f64, dt: f64, opts: &PioneerOptions) -> Result<CurveTrace, LinearError> {
    trace_pioneer_curve_with(Exec::default(), c, t_end, dt, opts)
}

pub fn trace_pioneer_curve_with(
    exec: Exec,
    c: Complex64,
    t_end: f64,
    dt: f64,
    opts: &PioneerOptions,
) -> Result<CurveTrace, LinearError> {
    if c.re == 0.0 || c.im == 0.0 {
        return Err(LinearError::Parameter(format!("c = {c} lies on an axis; trace its frontier instead")));
    }
    if !(t_end > 0.0 && dt > 0.0) {
        return Err(LinearError::Parameter("t_end and dt must be positive".into()));
    }
    let times = trace_times(c, t_end, dt);
    let stop = tstar_of(c);
    let branches = exec::map_indexed(exec, 2, |k| {
        let (branch, stop) = if k == 0 { (Branch::Plus, None) } else { (Branch::Minus, stop) };
        continue_branch(c, branch, &times, stop, opts)
    });
    let mut it = branches.into_iter();
    let plus = it.next().expect("two branches")?;
    let minus = it.next().expect("two branches")?;
    let samples = times
        .iter()
        .zip(plus.iter().zip(&minus))
        .map(|(&t, (p, m))| {
            let p = p.expect("plus branch always continues");
            TraceSample {
                t,
                plus: p.z,
                minus: m.map(|m| m.z),
                plus_info: Some(p.info()),
                minus_info: m.map(|m| m.info()),
                residual: p.residual.max(m.map_or(0.0, |m| m.residual)),
            }
        })
        .collect();
    Ok(CurveTrace { samples })
}

/// Rebuilds the pioneer state of a trace sample.
fn state_at(c: Complex64, s: &TraceSample, branch: Branch) -> Option<PioneerState> {
    let (z, info) = match branch {
        Branch::Plus => (s.plus, s.plus_info?),
        Branch::Minus => (s.minus?, s.minus_info?),
    };
    Some(PioneerState {
        c,
        t: s.t,
        branch,
        z,
        theta: info.theta,
        log_modulus: info.log_modulus,
        ell: info.ell,
        residual: s.residual,
        degenerate: false,
    })
}

/// Branch state at an arbitrary time, continued from the nearest trace sample.
fn solve_near(c: Complex64, trace: &CurveTrace, t: f64, branch: Branch, opts: &PioneerOptions) -> Result<PioneerState, LinearError> {
    let missing = || LinearError::TraceTooShort { t_end: trace.samples.last().map_or(0.0, |s| s.t), needed: t };
    let mut k = trace.nearest(t).ok_or_else(missing)?;
    while state_at(c, &trace.samples[k], branch).is_none() && k > 0 {
        k -= 1;
    }
    let start = state_at(c, &trace.samples[k], branch).ok_or_else(missing)?;
    walk(c, &start, t, opts).ok_or_else(|| LinearError::Continuation { t, detail: "local re-solve failed".into() })
}

/// Continues a state forwards or backwards to time `t` with adaptive substeps.
fn walk(c: Complex64, from: &PioneerState, t: f64, opts: &PioneerOptions) -> Option<PioneerState> {
    let mut st = *from;
    let mut h = (t - st.t).abs();
    while st.t != t {
        let remaining = t - st.t;
        let tn = if h >= remaining.abs() { t } else { st.t + h * remaining.signum() };
        match advance(c, &st, tn, opts) {
            Some(n) => {
                st = n;
                h *= 2.0;
            }
            None => {
                h *= 0.5;
                if h < opts.min_substep * (1.0 + t.abs()) {
                    return None;
                }
            }
        }
    }
    Some(st)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticSample {
    pub t: f64,
    /// `gamma(+-t)/t`
    pub rate_plus: Complex64,
    pub rate_minus: Option<Complex64>,
    /// `log|2 - c gamma(+-t)| / t`
    pub log_rate_plus: f64,
    pub log_rate_minus: Option<f64>,
}

/// Final value of a ratio with its spread over the last decade of times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Limit<T> {
    pub value: T,
    pub drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpiralReport {
    /// `gamma(-T)` and its distance to `2/c`.
    pub limit: Complex64,
    pub target: Complex64,
    pub limit_error: f64,
    /// `(t, |gamma(-t) - 2/c|)`.
    pub distance_series: Vec<(f64, f64)>,
    /// Least-squares slope of `2 theta(t)` over the last decade.
    pub angle_slope: f64,
    /// `2 theta(T) / T`.
    pub angle_ratio: f64,
    pub spiral_rate: f64,
    /// Earliest sample time after which `Im gamma(-t) <= 1e-6` holds throughout.
    pub im_sign_onset: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticsReport {
    pub c: Complex64,
    pub t_end: f64,
    pub samples: Vec<AsymptoticSample>,
    pub rate_plus: Limit<Complex64>,
    pub rate_minus: Option<Limit<Complex64>>,
    pub log_rate_plus: Limit<f64>,
    pub log_rate_minus: Option<Limit<f64>>,
    pub spiral: Option<SpiralReport>,
}

/// Ratios `gamma(+-t)/t` and `log|2 - c gamma(+-t)|/t` along a pioneer trace.
pub fn asymptotics(c: Complex64, trace: &CurveTrace) -> Result<AsymptoticsReport, LinearError> {
    let last = trace.samples.last().ok_or(LinearError::TraceTooShort { t_end: 0.0, needed: 1.0 })?;
    let t_end = last.t;
    let samples: Vec<AsymptoticSample> = trace
        .samples
        .iter()
        .filter(|s| s.t > 0.0)
        .map(|s| AsymptoticSample {
            t: s.t,
            rate_plus: s.plus / s.t,
            rate_minus: s.minus.map(|m| m / s.t),
            log_rate_plus: s.plus_info.map_or(f64::NAN, |i| i.log_modulus / s.t),
            log_rate_minus: s.minus_info.map(|i| i.log_modulus / s.t),
        })
        .collect();
    let tail: Vec<&AsymptoticSample> = samples.iter().filter(|s| s.t >= 0.1 * t_end).collect();
    let fin = *samples.last().ok_or(LinearError::TraceTooShort { t_end, needed: t_end })?;
    let drift_c = |f: &dyn Fn(&AsymptoticSample) -> Option<Complex64>, v: Complex64| {
        tail.iter().filter_map(|s| f(s)).map(|x| (x - v).norm()).fold(0.0, f64::max)
    };
    let drift_r = |f: &dyn Fn(&AsymptoticSample) -> Option<f64>, v: f64| {
        tail.iter().filter_map(|s| f(s)).map(|x| (x - v).abs()).fold(0.0, f64::max)
    };
    let rate_plus = Limit { value: fin.rate_plus, drift: drift_c(&|s| Some(s.rate_plus), fin.rate_plus) };
    let rate_minus = fin.rate_minus.map(|v| Limit { value: v, drift: drift_c(&|s| s.rate_minus, v) });
    let log_rate_plus = Limit { value: fin.log_rate_plus, drift: drift_r(&|s| Some(s.log_rate_plus), fin.log_rate_plus) };
    let log_rate_minus = fin.log_rate_minus.map(|v| Limit { value: v, drift: drift_r(&|s| s.log_rate_minus, v) });
    Ok(AsymptoticsReport { c, t_end, samples, rate_plus, rate_minus, log_rate_plus, log_rate_minus, spiral: None })
}

/// Spiral of the bottom branch into `2/c` in the phase `Re(c^2) < 0`.
pub fn spiral_diagnostics(c: Complex64, trace: &CurveTrace) -> Result<AsymptoticsReport, LinearError> {
    require("spiral_diagnostics", c, Region::OmegaMinus, "Omega-")?;
    let mut rep = asymptotics(c, trace)?;
    let target = 2.0 / c;
    let minus: Vec<(f64, Complex64, f64)> = trace
        .samples
        .iter()
        .filter_map(|s| Some((s.t, s.minus?, s.minus_info?.theta)))
        .collect();
    let &(t_end, limit, theta_end) = minus.last().ok_or(LinearError::TraceTooShort { t_end: 0.0, needed: 1.0 })?;
    let tail: Vec<(f64, f64)> = minus.iter().filter(|m| m.0 >= 0.1 * t_end).map(|m| (m.0, 2.0 * m.2)).collect();
    let n = tail.len() as f64;
    let (mt, my) = tail.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
    let (sxy, sxx) = tail.iter().fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mt) * (p.1 - my), a.1 + (p.0 - mt).powi(2)));
    let mut onset = None;
    for &(t, z, _) in minus.iter().rev() {
        if z.im > 1e-6 {
            break;
        }
        onset = Some(t);
    }
    rep.spiral = Some(SpiralReport {
        limit,
        target,
        limit_error: (limit - target).norm(),
        distance_series: minus.iter().map(|m| (m.0, (m.1 - target).norm())).collect(),
        angle_slope: if sxx > 0.0 { sxy / sxx } else { f64::NAN },
        angle_ratio: 2.0 * theta_end / t_end,
        spiral_rate: (c * c).im,
        im_sign_onset: onset,
    });
    Ok(rep)
}

/// Landmarks of the bottom branch in the exotic phase.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Omega0Events {
    pub c: Complex64,
    /// First crossing of the cut `{2 - cz <= 0}`, and its prediction `2 pi / Im(c^2)`.
    pub t_cut: Option<f64>,
    pub t_cut_predicted: f64,
    pub cut_point: Option<Complex64>,
    /// `4 pi / Im(c^2)`.
    pub t_star: f64,
    /// Zero of `|gamma(-t)|^2` extrapolated from the samples just before its minimum.
    pub origin_revisit_time: f64,
    /// `min |gamma(-t)|` over the trace.
    pub origin_revisit_norm: f64,
    /// `sup |-i conj(gamma(-(t* - t))) - gamma(-t)|` over `[0, t*]`.
    pub reflection_residual: f64,
    /// Same sup restricted to `[0.05 t*, 0.95 t*]`.
    pub reflection_residual_interior: f64,
    /// `ell = 1` on every sample of `(t_cut, t*)`.
    pub ell_window_ok: bool,
}

pub fn omega0_events(c: Complex64, trace: &CurveTrace, opts: &PioneerOptions) -> Result<Omega0Events, LinearError> {
    require("omega0_events", c, Region::Omega0, "Omega0")?;
    if !(c.re > 0.0 && c.im > 0.0) {
        return Err(LinearError::Parameter("reflect c into the first quadrant first".into()));
    }
    let t_star = 2.0 * TAU / (c * c).im;
    let minus: Vec<PioneerState> = trace.samples.iter().filter_map(|s| state_at(c, s, Branch::Minus)).collect();
    let t_end = minus.last().map_or(0.0, |s| s.t);
    if t_end < t_star * (1.0 - 1e-9) {
        return Err(LinearError::TraceTooShort { t_end, needed: t_star });
    }
    // Cut crossing: theta passes an odd multiple of pi, i.e. 2 - cz crosses the negative axis.
    let mut t_cut = None;
    let mut cut_point = None;
    for w in minus.windows(2) {
        let (a, b) = (w[0].theta.min(w[1].theta), w[0].theta.max(w[1].theta));
        let lv = PI + TAU * ((a - PI) / TAU).ceil();
        if lv > b || a == b {
            continue;
        }
        let (mut lo, mut hi) = (w[0], w[1]);
        for _ in 0..80 {
            if hi.t - lo.t <= 1e-14 * hi.t {
                break;
            }
            let Some(mid) = walk(c, &lo, 0.5 * (lo.t + hi.t), opts) else { break };
            if (lo.theta - lv) * (mid.theta - lv) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        t_cut = Some(0.5 * (lo.t + hi.t));
        cut_point = Some(hi.z);
        break;
    }

    // The branch leaves the origin at t = 0; the revisit is sought in the second half.
    let (kmin, zmin) = minus
        .iter()
        .enumerate()
        .filter(|(_, s)| s.t >= 0.5 * t_star)
        .map(|(k, s)| (k, s.z.norm()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty trace");
    let origin_revisit_time = if kmin >= 2 {
        let (a, b) = (&minus[kmin - 2], &minus[kmin - 1]);
        let (fa, fb) = (a.z.norm_sqr(), b.z.norm_sqr());
        if fa > fb {
            b.t + fb * (b.t - a.t) / (fa - fb)
        } else {
            minus[kmin].t
        }
    } else {
        minus[kmin].t
    };

    let mut refl = 0.0f64;
    let mut refl_in = 0.0f64;
    for s in minus.iter().filter(|s| s.t <= t_star) {
        let u = (t_star - s.t).max(0.0);
        let mirror = solve_near(c, trace, u, Branch::Minus, opts)?;
        let r = (Complex64::new(0.0, -1.0) * mirror.z.conj() - s.z).norm();
        refl = refl.max(r);
        if s.t >= 0.05 * t_star && s.t <= 0.95 * t_star {
            refl_in = refl_in.max(r);
        }
    }

    let ell_window_ok = match t_cut {
        Some(tc) => minus.iter().filter(|s| s.t > tc + 1e-9 && s.t < t_star * (1.0 - 1e-12)).all(|s| s.ell == 1),
        None => false,
    };
    Ok(Omega0Events {
        c,
        t_cut,
        t_cut_predicted: TAU / (c * c).im,
        cut_point,
        t_star,
        origin_revisit_time,
        origin_revisit_norm: zmin,
        reflection_residual: refl,
        reflection_residual_interior: refl_in,
        ell_window_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn classification_examples() {
        let r = classify(c(2.0, 1.0));
        assert_eq!(r.region, Region::OmegaPlus);
        assert_eq!(r.rates, Some((2.0, 1.0)));
        let r = classify(c(1.0, 1.0));
        assert_eq!(r.region, Region::Omega0);
        assert_abs_diff_eq!(r.t_cut.unwrap(), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(r.t_star.unwrap(), TAU, epsilon = 1e-15);
        assert_abs_diff_eq!(r.holder_at_tstar.unwrap(), 2.0 * PI.sqrt(), epsilon = 1e-14);
        let r = classify(c(-1.0, 1.0));
        assert_eq!(r.reflected_class, ReflectedClass::C0);
        assert_eq!(r.reflection, Some(Reflection::RI));
        assert_eq!(r.fq_representative, c(1.0, 1.0));
        let r = classify(c(3.0, 0.0));
        assert_eq!((r.region, r.reflected_class), (Region::RealAxis, ReflectedClass::Boundary));
        assert_eq!(classify(c(0.0, 0.0)).region, Region::Origin);
        assert_eq!(classify(c(0.0, -2.0)).region, Region::ImagAxis);
        let r = classify(c(1.0, 2.0));
        assert_eq!(r.region, Region::OmegaMinus);
        assert_eq!(r.spiral_target, Some(2.0 / c(1.0, 2.0)));
        assert_eq!(r.spiral_rate, Some(4.0));
        assert_eq!(classify(Complex64::from_polar(2.0, PI / 4.0)).region, Region::Omega0);
    }

    #[test]
    fn classify_json_shape() {
        let v: serde_json::Value = serde_json::to_value(classify(c(2.0, 1.0))).unwrap();
        assert_eq!(v["region"], "Omega+");
        assert_eq!(v["rates"], serde_json::json!([2.0, 1.0]));
        assert!(v.get("t_star").is_none());
    }

    #[test]
    fn rates_and_phase_errors() {
        assert_eq!(asymptotic_rates(c(2.0, 1.0)).unwrap(), (2.0, 1.0));
        let (r, i) = asymptotic_rates(c(1.0, 0.5)).unwrap();
        assert_abs_diff_eq!(r, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(i, 0.5, epsilon = 1e-15);
        assert!(matches!(asymptotic_rates(c(1.0, 2.0)), Err(LinearError::Phase { .. })));
        assert!(matches!(holder_at_tstar(c(2.0, 1.0)), Err(LinearError::Phase { .. })));
        assert_abs_diff_eq!(holder_at_tstar(Complex64::from_polar(2.0, PI / 4.0)).unwrap(), 2.0 * PI.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn residual_examples() {
        let st = PioneerState::from_z(c(1.3, 0.4), 0.0, Branch::Plus, c(0.0, 0.0), 0.0);
        assert_eq!(pioneer_residual(&st).unwrap(), c(0.0, 0.0));
        let st = PioneerState::from_z(c(1.0, 1.0), 0.0, Branch::Plus, c(1.0, 0.0), -PI / 4.0);
        let expect = c(1.0, 1.0) + 2.0 * (c(1.0, 0.0) - c(1.0, 1.0) / 2.0).ln();
        let r = pioneer_residual(&st).unwrap();
        assert!(r.norm() > 0.1);
        assert!((r - expect).norm() < 1e-14);
        let cc = c(1.0, 1.0);
        let st = PioneerState::from_z(cc, 1.0, Branch::Plus, 2.0 / cc, 0.0);
        assert_eq!(pioneer_residual(&st), Err(LinearError::Singular));
    }

    #[test]
    fn small_time_roots() {
        let o = PioneerOptions::default();
        let t = 1e-4;
        for cc in [c(1.0, 1.0), c(2.0, 1.0), c(1.0, 2.0)] {
            let p = solve_pioneer(cc, t, Branch::Plus, None, &o).unwrap();
            let m = solve_pioneer(cc, t, Branch::Minus, None, &o).unwrap();
            assert!((p.z - c(0.0, 2.0 * t.sqrt())).norm() <= 10.0 * t, "{p:?}");
            assert!((m.z + c(0.0, 2.0 * t.sqrt())).norm() <= 10.0 * t);
            assert!(p.residual < 1e-12 && m.residual < 1e-12);
            assert_eq!((p.ell, m.ell), (0, 0));
        }
        let z0 = solve_pioneer(c(3.0, -1.0), 0.0, Branch::Minus, None, &o).unwrap();
        assert_eq!((z0.z, z0.ell), (c(0.0, 0.0), 0));
        assert!(solve_pioneer(c(1.0, 1.0), 5.0, Branch::Plus, None, &o).is_err());
    }

    #[test]
    fn converged_residual_at_unit_time() {
        let tr = trace_pioneer_curve(c(1.0, 1.0), 1.0, 0.01, &PioneerOptions::default()).unwrap();
        let st = state_at(c(1.0, 1.0), tr.samples.last().unwrap(), Branch::Plus).unwrap();
        assert!(pioneer_residual(&st).unwrap().norm() < 1e-12);
    }

    #[test]
    fn simple_phase_rates() {
        let cc = c(2.0, 1.0);
        let tr = trace_pioneer_curve(cc, 200.0, 0.05, &PioneerOptions::default()).unwrap();
        let at = |t: f64| tr.samples[tr.nearest(t).unwrap()];
        // The approach is logarithmic: |z/t - c| ~ 2 log(|c|^2 t) / (|c| t).
        let s100 = at(100.0);
        assert!((s100.plus / 100.0 - cc).norm() < 0.03 * cc.norm());
        let s200 = at(200.0);
        assert!((s200.plus / 200.0 - cc).norm() <= 0.02 * cc.norm());
        assert!((s200.minus.unwrap() / 200.0 - cc).norm() <= 0.02 * cc.norm());
        assert!(tr.samples.iter().all(|s| s.residual <= 1e-9 * (1.0 + 5.0 * s.t)));
    }

    #[test]
    fn spiral_phase_limit() {
        let cc = c(1.0, 2.0);
        let tr = trace_pioneer_curve(cc, 200.0, 0.05, &PioneerOptions::default()).unwrap();
        let rep = spiral_diagnostics(cc, &tr).unwrap();
        let sp = rep.spiral.unwrap();
        assert!(sp.limit_error < 1e-2, "{sp:?}");
        assert!((sp.angle_slope - 4.0).abs() < 0.08, "{}", sp.angle_slope);
        assert!(sp.im_sign_onset.unwrap() <= 50.0);
    }

    #[test]
    fn exotic_phase_minus_branch_stops() {
        let tr = trace_pioneer_curve(c(1.0, 1.0), 8.0, 0.01, &PioneerOptions::default()).unwrap();
        assert!(tr.samples.iter().any(|s| s.t == TAU && s.minus.is_some()));
        assert!(tr.samples.iter().filter(|s| s.t > TAU).all(|s| s.minus.is_none()));
        let ev = omega0_events(c(1.0, 1.0), &tr, &PioneerOptions::default()).unwrap();
        assert!((ev.t_cut.unwrap() - PI).abs() < 1e-6 * PI, "{ev:?}");
        assert!(ev.ell_window_ok);
        assert!(ev.origin_revisit_norm < 1e-3);
    }

    #[test]
    fn too_short_trace() {
        let tr = trace_pioneer_curve(c(1.0, 1.0), 3.0, 0.01, &PioneerOptions::default()).unwrap();
        assert!(matches!(omega0_events(c(1.0, 1.0), &tr, &PioneerOptions::default()), Err(LinearError::TraceTooShort { .. })));
        assert!(matches!(spiral_diagnostics(c(2.0, 1.0), &tr), Err(LinearError::Phase { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn rate_identity(re in 0.1..3.0f64, im in 0.1..3.0f64) {
            prop_assume!(re > im * 1.01);
            let (r, i) = asymptotic_rates(c(re, im)).unwrap();
            prop_assert!((r - re).abs() <= 4.0 * f64::EPSILON * re && (i - im).abs() <= 4.0 * f64::EPSILON * re.max(1.0) * 2.0);
        }

        #[test]
        fn branch_integrity(re in 0.3..2.5f64, im in 0.3..2.5f64) {
            let tr = trace_pioneer_curve(c(re, im), 6.0, 0.02, &PioneerOptions::default()).unwrap();
            let mut prev: Option<(f64, i64)> = None;
            for s in &tr.samples {
                let info = s.minus_info.unwrap_or(s.plus_info.unwrap());
                if s.minus_info.is_none() { break; }
                if let Some((th, ell)) = prev {
                    prop_assert!((info.theta - th).abs() < PI);
                    prop_assert!((info.ell - ell).abs() <= 1);
                }
                prev = Some((info.theta, info.ell));
                prop_assert!(s.residual <= 1e-9 * (1.0 + (re * re + im * im) * s.t));
            }
        }

        #[test]
        fn conjugate_swaps_branches(re in 0.3..2.5f64, im in 0.3..2.5f64) {
            let o = PioneerOptions::default();
            let a = trace_pioneer_curve(c(re, im), 3.0, 0.05, &o).unwrap();
            let b = trace_pioneer_curve(c(re, -im), 3.0, 0.05, &o).unwrap();
            for (x, y) in a.samples.iter().zip(&b.samples) {
                if let (Some(xm), Some(ym)) = (x.minus, y.minus) {
                    prop_assert!((x.plus.conj() - ym).norm() < 1e-9 * (1.0 + x.t));
                    prop_assert!((xm.conj() - y.plus).norm() < 1e-9 * (1.0 + x.t));
                }
            }
        }

        #[test]
        fn first_quadrant_strip(re in 0.3..2.5f64, im in 0.3..2.5f64) {
            let tr = trace_pioneer_curve(c(re, im), 5.0, 0.05, &PioneerOptions::default()).unwrap();
            for s in &tr.samples {
                prop_assert!(s.plus.re >= -1e-6);
                if let Some(m) = s.minus { prop_assert!(m.re >= -1e-6); }
            }
        }
    }
}
