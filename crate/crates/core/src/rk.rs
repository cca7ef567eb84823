//! Dormand–Prince 4(5) stepper for small complex systems with a moving
//! singularity. The field reports the distance to the singularity alongside the
//! derivative and the step is capped at `safety * gap^2 / 2`.

use crate::engine::{EngineError, SolverOptions};
use num_complex::Complex64;

pub(crate) type State<const N: usize> = [Complex64; N];

pub(crate) trait Field<const N: usize> {
    /// Derivative at `(t, y)` and the distance from `y[0]` to the singularity.
    fn eval(&self, t: f64, y: &State<N>) -> Result<(State<N>, f64), EngineError>;

    /// Increasing times where the field is not smooth; steps never straddle them.
    fn cuts(&self) -> &[f64] {
        &[]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Stop {
    End,
    Event,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Run<const N: usize> {
    pub t: f64,
    pub y: State<N>,
    pub gap: f64,
    pub stop: Stop,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn comb<const N: usize>(y: &State<N>, h: f64, terms: &[(f64, &State<N>)]) -> State<N> {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (w, k) in terms {
            acc += k[i] * *w;
        }
        *o += acc * h;
    }
    out
}

fn finite<const N: usize>(y: &State<N>) -> bool {
    y.iter().all(|v| v.re.is_finite() && v.im.is_finite())
}

struct Step<const N: usize> {
    y: State<N>,
    err: f64,
}

fn try_step<const N: usize, F: Field<N>>(
    field: &F,
    t: f64,
    y: &State<N>,
    k1: &State<N>,
    h: f64,
    opts: &SolverOptions,
) -> Result<Option<(Step<N>, State<N>, f64)>, EngineError> {
    macro_rules! stage {
        ($tt:expr, $yy:expr) => {{
            let yy = $yy;
            if !finite(&yy) {
                return Ok(None);
            }
            let (k, _) = field.eval($tt, &yy)?;
            if !finite(&k) {
                return Ok(None);
            }
            k
        }};
    }
    let k2 = stage!(t + C2 * h, comb(y, h, &[(A21, k1)]));
    let k3 = stage!(t + C3 * h, comb(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = stage!(t + C4 * h, comb(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = stage!(t + C5 * h, comb(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = stage!(t + h, comb(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
    let y5 = comb(y, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    if !finite(&y5) {
        return Ok(None);
    }
    let (k7, gap) = field.eval(t + h, &y5)?;
    if !finite(&k7) {
        return Ok(None);
    }
    let mut err: f64 = 0.0;
    for i in 0..N {
        let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
        let sc = opts.abs_tol + opts.rel_tol * y[i].norm().max(y5[i].norm());
        err = err.max(e.norm() / sc);
    }
    Ok(Some((Step { y: y5, err }, k7, gap)))
}

fn cap(opts: &SolverOptions, gap: f64) -> f64 {
    0.5 * opts.singularity_safety * gap * gap
}

/// Integrates from `t0` to `t_end`, stopping early at the first time the
/// event function becomes `<= 0`. Crossings are refined by the Illinois method
/// on a single step from the last accepted state. `observe` sees every accepted
/// state, including the initial one.
pub(crate) fn run<const N: usize, F, E, O>(
    field: &F,
    t0: f64,
    y0: State<N>,
    t_end: f64,
    opts: &SolverOptions,
    event: E,
    mut observe: O,
) -> Result<Run<N>, EngineError>
where
    F: Field<N>,
    E: Fn(f64, &State<N>, f64) -> f64,
    O: FnMut(f64, &State<N>),
{
    let (mut k1, mut gap) = field.eval(t0, &y0)?;
    let mut t = t0;
    let mut y = y0;
    observe(t, &y);
    if event(t, &y, gap) <= 0.0 {
        return Ok(Run { t, y, gap, stop: Stop::Event });
    }
    let cuts = field.cuts();
    let stop_after = |t: f64| cuts.iter().copied().find(|&c| c > t).map_or(t_end, |c| c.min(t_end));
    let mut h = opts.max_step.min(cap(opts, gap)).min(t_end - t);
    while t < t_end {
        let stop = stop_after(t);
        let remaining = stop - t;
        let last = h >= remaining * (1.0 - 1e-12);
        if last {
            h = remaining;
        }
        let attempt = try_step(field, t, &y, &k1, h, opts)?;
        let accepted = match attempt {
            Some((step, k_new, gap_new)) if step.err <= 1.0 => Some((step, k_new, gap_new)),
            Some((step, _, _)) => {
                let fac = (0.9 * step.err.powf(-0.2)).clamp(0.2, 1.0);
                h *= fac;
                None
            }
            None => {
                h *= 0.25;
                None
            }
        };
        let Some((step, k_new, gap_new)) = accepted else {
            if h < opts.min_step {
                return Err(EngineError::Stiff { t, gap, detail: "step size underflow".into() });
            }
            continue;
        };
        let t_new = if last { stop } else { t + h };
        if event(t_new, &step.y, gap_new) <= 0.0 {
            let (tc, yc, gc) = refine(field, t, &y, &k1, gap, t_new - t, (&step.y, gap_new), opts, &event)?;
            observe(tc, &yc);
            return Ok(Run { t: tc, y: yc, gap: gc, stop: Stop::Event });
        }
        let fac = if step.err == 0.0 { 5.0 } else { (0.9 * step.err.powf(-0.2)).clamp(0.2, 5.0) };
        t = t_new;
        y = step.y;
        k1 = k_new;
        gap = gap_new;
        observe(t, &y);
        h = (h * fac).min(opts.max_step).min(cap(opts, gap));
        if h < opts.min_step && t < t_end {
            return Err(EngineError::Stiff { t, gap, detail: "singularity cap below min_step".into() });
        }
    }
    Ok(Run { t, y, gap, stop: Stop::End })
}

#[allow(clippy::too_many_arguments)]
fn refine<const N: usize, F, E>(
    field: &F,
    t: f64,
    y: &State<N>,
    k1: &State<N>,
    gap0: f64,
    h: f64,
    end: (&State<N>, f64),
    opts: &SolverOptions,
    event: &E,
) -> Result<(f64, State<N>, f64), EngineError>
where
    F: Field<N>,
    E: Fn(f64, &State<N>, f64) -> f64,
{
    let mut lo = 0.0;
    let mut f_lo = event(t, y, gap0);
    let mut hi = h;
    let mut f_hi = event(t + h, end.0, end.1);
    let mut best = (t + h, *end.0, end.1);
    let mut side = 0i8;
    for _ in 0..60 {
        if hi - lo <= 1e-14 * (1.0 + t.abs()) {
            break;
        }
        let mut tau = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if !(tau > lo && tau < hi) {
            tau = 0.5 * (lo + hi);
        }
        let Some((step, _, g)) = try_step(field, t, y, k1, tau, opts)? else {
            tau = 0.5 * (lo + hi);
            hi = tau;
            continue;
        };
        let f_mid = event(t + tau, &step.y, g);
        if f_mid <= 0.0 {
            hi = tau;
            f_hi = f_mid;
            best = (t + tau, step.y, g);
            if side == -1 {
                f_lo *= 0.5;
            }
            side = -1;
        } else {
            lo = tau;
            f_lo = f_mid;
            if side == 1 {
                f_hi *= 0.5;
            }
            side = 1;
        }
        if f_mid.abs() <= 1e-13 {
            break;
        }
    }
    Ok(best)
}
