//! Forward and backward Loewner flows, blow-up detection, inverse maps and the
//! hydrodynamic expansion at infinity.

use crate::driver::{Driver, DriverError};
use crate::rk::{self, Field, State, Stop};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("integration stalled at t = {t} (distance to driver {gap:e}): {detail}")]
    Stiff { t: f64, gap: f64, detail: String },
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error("ill-conditioned expansion fit: {0}")]
    Conditioning(String),
    #[error("invalid solver parameter: {0}")]
    Parameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Distance to the driver at which a seed counts as swallowed.
    pub blow_up_eps: f64,
    pub max_step: f64,
    pub min_step: f64,
    /// Steps are capped at `singularity_safety * |g - l|^2 / 2`.
    pub singularity_safety: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-9,
            blow_up_eps: 1e-4,
            max_step: 0.1,
            min_step: 1e-13,
            singularity_safety: 0.1,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), EngineError> {
        let pos = [self.rel_tol, self.abs_tol, self.blow_up_eps, self.min_step];
        if pos.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(EngineError::Parameter("tolerances and thresholds must be positive".into()));
        }
        if !(self.min_step <= self.max_step) {
            return Err(EngineError::Parameter("min_step must not exceed max_step".into()));
        }
        if !(self.singularity_safety > 0.0 && self.singularity_safety < 1.0) {
            return Err(EngineError::Parameter("singularity_safety must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Alive,
    Swallowed,
}

/// Forward solution `t -> g_t(z)` for one seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub seed: Complex64,
    pub samples: Vec<(f64, Complex64)>,
    pub status: Status,
}

impl Trajectory {
    /// Last sample time: the horizon when alive, the swallow time otherwise.
    pub fn end_time(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.0)
    }

    pub fn swallow_time(&self) -> Option<f64> {
        (self.status == Status::Swallowed).then(|| self.end_time())
    }

    pub fn final_value(&self) -> Complex64 {
        self.samples.last().map_or(self.seed, |s| s.1)
    }

    /// Re-expresses the samples relative to the driver, `f_t = g_t - l(t)`.
    pub fn centered(&self, driver: &Driver) -> Result<CenteredChain, DriverError> {
        let samples = self
            .samples
            .iter()
            .map(|&(t, g)| Ok((t, g - driver.eval(t)?)))
            .collect::<Result<_, DriverError>>()?;
        Ok(CenteredChain { seed: self.seed, samples, status: self.status })
    }
}

/// Trajectory samples stored as `f_t(z) = g_t(z) - l(t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CenteredChain {
    pub seed: Complex64,
    pub samples: Vec<(f64, Complex64)>,
    pub status: Status,
}

/// The Loewner field `ds/dt = 2 sign / (y - l(.))` in a displaced variable
/// `y = offset + state[0]`. The second state component, when present, is
/// `log` of the spatial derivative.
pub(crate) struct Flow<'a> {
    pub driver: &'a Driver,
    /// `+1` forward, `-1` backward.
    pub sign: f64,
    /// Backward flows read the driver at `reverse_at - u`.
    pub reverse_at: Option<f64>,
    pub offset: Complex64,
    cuts: Vec<f64>,
}

impl Flow<'_> {
    pub(crate) fn forward(driver: &Driver) -> Flow<'_> {
        Flow { driver, sign: 1.0, reverse_at: None, offset: Complex64::new(0.0, 0.0), cuts: driver.kinks() }
    }

    pub(crate) fn backward(driver: &Driver, t: f64) -> Flow<'_> {
        let mut cuts: Vec<f64> = driver.kinks().into_iter().filter(|&k| k < t).map(|k| t - k).collect();
        cuts.reverse();
        Flow { driver, sign: -1.0, reverse_at: Some(t), offset: Complex64::new(0.0, 0.0), cuts }
    }

    #[inline]
    pub(crate) fn lambda(&self, t: f64) -> Result<Complex64, DriverError> {
        match self.reverse_at {
            Some(big_t) => self.driver.eval((big_t - t).max(0.0)),
            None => self.driver.eval(t),
        }
    }
}

impl Field<1> for Flow<'_> {
    fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    #[inline]
    fn eval(&self, t: f64, y: &State<1>) -> Result<(State<1>, f64), EngineError> {
        let f = self.offset + y[0] - self.lambda(t)?;
        Ok(([f.inv() * (2.0 * self.sign)], f.norm()))
    }
}

impl Field<2> for Flow<'_> {
    fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    #[inline]
    fn eval(&self, t: f64, y: &State<2>) -> Result<(State<2>, f64), EngineError> {
        let f = self.offset + y[0] - self.lambda(t)?;
        let inv = f.inv();
        Ok(([inv * (2.0 * self.sign), -(inv * inv) * (2.0 * self.sign)], f.norm()))
    }
}

fn no_event<const N: usize>(_: f64, _: &State<N>, _: f64) -> f64 {
    1.0
}

fn check_horizon(driver: &Driver, t: f64) -> Result<(), EngineError> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(EngineError::Parameter(format!("time {t} must be finite and >= 0")));
    }
    if t > driver.t_max() {
        return Err(DriverError::Domain { t, t_max: driver.t_max() }.into());
    }
    Ok(())
}

/// Solves `dg/dt = 2/(g - l(t))` from `g_0 = z` until `t_end` or until
/// `|g - l| <= blow_up_eps`.
pub fn integrate_forward(
    driver: &Driver,
    z: Complex64,
    t_end: f64,
    opts: &SolverOptions,
) -> Result<Trajectory, EngineError> {
    opts.validate()?;
    check_horizon(driver, t_end)?;
    if z == driver.eval(0.0)? {
        return Ok(Trajectory { seed: z, samples: vec![(0.0, z)], status: Status::Swallowed });
    }
    let mut samples = Vec::new();
    let eps = opts.blow_up_eps;
    let run = rk::run::<1, _, _, _>(
        &Flow::forward(driver),
        0.0,
        [z],
        t_end,
        opts,
        |_, _, gap| gap - eps,
        |t, y| samples.push((t, y[0])),
    )?;
    let status = if run.stop == Stop::Event { Status::Swallowed } else { Status::Alive };
    Ok(Trajectory { seed: z, samples, status })
}

/// Swallow time `T_z` if it is at most `t_max`.
pub fn blow_up_time(driver: &Driver, z: Complex64, t_max: f64, opts: &SolverOptions) -> Result<Option<f64>, EngineError> {
    Ok(match forward_map(driver, z, t_max, opts)? {
        MapValue::Alive(_) => None,
        MapValue::Swallowed(t) => Some(t),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MapValue {
    Alive(Complex64),
    Swallowed(f64),
}

/// `g_t(z)` without storing samples.
pub fn forward_map(driver: &Driver, z: Complex64, t: f64, opts: &SolverOptions) -> Result<MapValue, EngineError> {
    opts.validate()?;
    check_horizon(driver, t)?;
    if z == driver.eval(0.0)? {
        return Ok(MapValue::Swallowed(0.0));
    }
    let eps = opts.blow_up_eps;
    let run = rk::run::<1, _, _, _>(&Flow::forward(driver), 0.0, [z], t, opts, |_, _, gap| gap - eps, |_, _| {})?;
    Ok(match run.stop {
        Stop::Event => MapValue::Swallowed(run.t),
        Stop::End => MapValue::Alive(run.y[0]),
    })
}

/// `(g_t(z), g_t'(z))`, or `None` when `z` is swallowed by time `t`.
pub fn forward_map_with_derivative(
    driver: &Driver,
    z: Complex64,
    t: f64,
    opts: &SolverOptions,
) -> Result<Option<(Complex64, Complex64)>, EngineError> {
    opts.validate()?;
    check_horizon(driver, t)?;
    if z == driver.eval(0.0)? {
        return Ok(None);
    }
    let eps = opts.blow_up_eps;
    let zero = Complex64::new(0.0, 0.0);
    let run = rk::run::<2, _, _, _>(&Flow::forward(driver), 0.0, [z, zero], t, opts, |_, _, gap| gap - eps, |_, _| {})?;
    Ok(match run.stop {
        Stop::Event => None,
        Stop::End => Some((run.y[0], run.y[1].exp())),
    })
}

/// Distance estimate `|g_t(z) - l(t)| / (2 |g_t'(z)|)` for a state `[g, log g']`.
#[inline]
pub(crate) fn distance_estimate(gap: f64, log_deriv: Complex64) -> f64 {
    0.5 * gap * (-log_deriv.re).exp()
}

/// First time the hull comes within `radius` of `z`, measured by the distance
/// estimate `|g_t(z) - l(t)| / (2|g_t'(z)|)`; at `t = 0` the plain distance to
/// `l(0)` is used. Swallowing always counts as arrival.
pub fn arrival_time(
    driver: &Driver,
    z: Complex64,
    t_max: f64,
    radius: f64,
    opts: &SolverOptions,
) -> Result<Option<f64>, EngineError> {
    check_horizon(driver, t_max)?;
    if (z - driver.eval(0.0)?).norm() <= radius {
        return Ok(Some(0.0));
    }
    let flow = Flow::forward(driver);
    let eps = opts.blow_up_eps;
    let zero = Complex64::new(0.0, 0.0);
    let event = |t: f64, y: &State<2>, gap: f64| {
        if t == 0.0 {
            return 1.0;
        }
        if gap <= eps {
            return -1.0;
        }
        distance_estimate(gap, y[1]) - radius
    };
    let run = rk::run::<2, _, _, _>(&flow, 0.0, [z, zero], t_max, opts, event, |_, _| {})?;
    Ok((run.stop == Stop::Event).then_some(run.t))
}

/// Solves `dh/du = -2/(h - l(T - u))` from `h_0 = w` to `u = T`.
pub fn integrate_backward(driver: &Driver, w: Complex64, t: f64, opts: &SolverOptions) -> Result<Complex64, EngineError> {
    opts.validate()?;
    check_horizon(driver, t)?;
    if t == 0.0 {
        return Ok(w);
    }
    let flow = Flow::backward(driver, t);
    let gap0 = (w - driver.eval(t)?).norm();
    if gap0 == 0.0 {
        return Err(EngineError::Stiff { t: 0.0, gap: 0.0, detail: "start on the driver".into() });
    }
    let thresh = opts.blow_up_eps.min(0.1 * gap0);
    let run = rk::run::<1, _, _, _>(&flow, 0.0, [w], t, opts, |_, _, gap| gap - thresh, |_, _| {})?;
    match run.stop {
        Stop::End => Ok(run.y[0]),
        Stop::Event => Err(EngineError::Stiff {
            t: run.t,
            gap: run.gap,
            detail: "backward flow reached the driver; the point lies on the right hull".into(),
        }),
    }
}

/// `g_t^{-1}(w)`, computed as the backward flow driven by `l(t - .)`.
pub fn inverse_map(driver: &Driver, t: f64, w: Complex64, opts: &SolverOptions) -> Result<Complex64, EngineError> {
    integrate_backward(driver, w, t, opts)
}

/// Smallest distance estimate along the backward flow from `w`; zero when the
/// flow reaches the driver. This measures the distance from `w` to the right
/// hull `R_t` without rasterising the dual driver.
pub fn inverse_map_distance(driver: &Driver, t: f64, w: Complex64, opts: &SolverOptions) -> Result<f64, EngineError> {
    opts.validate()?;
    check_horizon(driver, t)?;
    let gap0 = (w - driver.eval(t)?).norm();
    if t == 0.0 || gap0 == 0.0 {
        return Ok(gap0);
    }
    let flow = Flow::backward(driver, t);
    let thresh = opts.blow_up_eps.min(0.1 * gap0);
    let mut best = f64::INFINITY;
    let zero = Complex64::new(0.0, 0.0);
    let res = rk::run::<2, _, _, _>(&flow, 0.0, [w, zero], t, opts, |_, _, gap| gap - thresh, |u, y| {
        if let Ok(l) = flow.lambda(u) {
            best = best.min(distance_estimate((y[0] - l).norm(), y[1]));
        }
    });
    match res {
        Ok(run) if run.stop == Stop::Event => Ok(0.0),
        Ok(_) => Ok(best),
        Err(EngineError::Stiff { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Coefficients of `g_t(z) = z + a/z + b/z^2 + ...` fitted on a probe circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionFit {
    pub t: f64,
    pub a_hat: Complex64,
    pub b_hat: Complex64,
    pub residual: f64,
}

pub fn expansion_fit(
    driver: &Driver,
    t: f64,
    probe_radius: f64,
    n_probes: usize,
    opts: &SolverOptions,
) -> Result<ExpansionFit, EngineError> {
    opts.validate()?;
    check_horizon(driver, t)?;
    if n_probes < 4 {
        return Err(EngineError::Parameter("expansion fit needs at least 4 probes".into()));
    }
    let zero = Complex64::new(0.0, 0.0);
    if t == 0.0 {
        return Ok(ExpansionFit { t, a_hat: zero, b_hat: zero, residual: 0.0 });
    }
    let range = driver.range_on(t)?;
    let scale = range.sup_abs + 4.0 * t.sqrt();
    if probe_radius < 10.0 * scale {
        return Err(EngineError::Conditioning(format!(
            "probe radius {probe_radius} is below 10x the hull scale {scale:.3}"
        )));
    }
    // The displacement g - z is tiny on the probe circle, so it gets its own
    // absolute tolerance.
    let disp_opts = SolverOptions { abs_tol: opts.abs_tol.min(1e-9) * 1e-4, ..*opts };
    let mut probes = Vec::with_capacity(n_probes);
    for k in 0..n_probes {
        let z = Complex64::from_polar(probe_radius, std::f64::consts::TAU * (k as f64 + 0.5) / n_probes as f64);
        let flow = Flow { driver, sign: 1.0, reverse_at: None, offset: z, cuts: driver.kinks() };
        let run = rk::run::<1, _, _, _>(&flow, 0.0, [zero], t, &disp_opts, no_event::<1>, |_, _| {})?;
        probes.push((z, run.y[0]));
    }
    // Uniform probes make z^-1 and z^-2 orthogonal, so the least-squares fit is
    // a discrete Fourier projection.
    let n = n_probes as f64;
    let a_hat = probes.iter().map(|(z, d)| d * z).sum::<Complex64>() / n;
    let b_hat = probes.iter().map(|(z, d)| d * z * z).sum::<Complex64>() / n;
    let residual = probes
        .iter()
        .map(|(z, d)| (d - a_hat / z - b_hat / (z * z)).norm())
        .fold(0.0, f64::max);
    Ok(ExpansionFit { t, a_hat, b_hat, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn zero() -> Driver {
        Driver::constant(c(0.0, 0.0))
    }

    #[test]
    fn constant_driver_closed_forms() {
        let o = SolverOptions::default();
        let tr = integrate_forward(&zero(), c(0.0, 1.0), 1.0, &o).unwrap();
        assert_eq!(tr.status, Status::Swallowed);
        assert_abs_diff_eq!(tr.end_time(), 0.25, epsilon = 1e-8);
        assert!((tr.final_value() - 0.0).norm() <= o.blow_up_eps * (1.0 + 1e-6));
        let tr = integrate_forward(&zero(), c(1.0, 0.0), 10.0, &o).unwrap();
        assert_eq!(tr.status, Status::Alive);
        assert_abs_diff_eq!(tr.final_value().re, 41f64.sqrt(), epsilon = 1e-8);
        assert!(tr.samples.windows(2).all(|w| w[1].0 > w[0].0));
    }

    #[test]
    fn blow_up_examples() {
        let o = SolverOptions::default();
        assert_abs_diff_eq!(blow_up_time(&zero(), c(0.0, 2.0), 2.0, &o).unwrap().unwrap(), 1.0, epsilon = 1e-8);
        assert_eq!(blow_up_time(&zero(), c(1.0, 0.0), 100.0, &o).unwrap(), None);
        let l = Driver::linear(c(1.0, 1.0));
        assert_eq!(blow_up_time(&l, c(0.0, 0.0), 1.0, &o).unwrap(), Some(0.0));
    }

    #[test]
    fn two_over_c_trajectory() {
        let o = SolverOptions::default();
        let cc = c(1.0, 1.0);
        let l = Driver::linear(cc);
        match forward_map(&l, 2.0 / cc, 1.0, &o).unwrap() {
            MapValue::Alive(g) => assert!((g - c(2.0, 0.0)).norm() < 1e-9, "{g}"),
            other => panic!("{other:?}"),
        }
        let back = integrate_backward(&l, 2.0 / cc + cc, 1.0, &o).unwrap();
        assert!((back - 2.0 / cc).norm() < 1e-8);
    }

    #[test]
    fn backward_examples() {
        let o = SolverOptions::default();
        let h = integrate_backward(&zero(), c(0.0, 2.0), 1.0, &o).unwrap();
        assert!((h - c(0.0, 8f64.sqrt())).norm() < 1e-8);
        let w = c(1e6, 0.0);
        let h = integrate_backward(&Driver::counterexample(), w, 0.1, &o).unwrap();
        assert!((h - w).norm() <= 3.0 * 0.1 / w.norm());
    }

    #[test]
    fn inverse_map_examples() {
        let o = SolverOptions::default();
        let tip = inverse_map(&zero(), 1.0, c(0.0, 0.01), &o).unwrap();
        assert!((tip - c(0.0, 2.0)).norm() < 0.05);
        let x = inverse_map(&zero(), 1.0, c(10.0, 0.0), &o).unwrap();
        assert_abs_diff_eq!(x.re, 96f64.sqrt(), epsilon = 1e-8);
        let l = Driver::linear(c(1.0, 0.0));
        let w = c(1.0, 1.0);
        let z = inverse_map(&l, 1.0, w, &o).unwrap();
        let MapValue::Alive(back) = forward_map(&l, z, 1.0, &o).unwrap() else { panic!() };
        assert!((back - w).norm() < 1e-8);
    }

    #[test]
    fn inverse_map_detects_right_hull() {
        let o = SolverOptions::default();
        // R_1 for the zero driver is the real segment [-2, 2].
        assert!(matches!(inverse_map(&zero(), 1.0, c(0.7, 0.0), &o), Err(EngineError::Stiff { .. })));
        assert!(inverse_map_distance(&zero(), 1.0, c(0.7, 0.0), &o).unwrap() == 0.0);
        let d = inverse_map_distance(&zero(), 1.0, c(2.1, 0.0), &o).unwrap();
        assert!(d > 0.05 && d < 0.2, "{d}");
    }

    #[test]
    fn arrival_matches_distance_near_tip() {
        let o = SolverOptions::default();
        // For the zero driver the estimate at iy is (y^2 - 4t)/(2y), which
        // equals the distance y - 2 sqrt(t) to the tip to first order.
        let (y, r) = (1.0, 0.01);
        let t = arrival_time(&zero(), c(0.0, y), 1.0, r, &o).unwrap().unwrap();
        let expect = y * (y - 2.0 * r) / 4.0;
        assert!((t - expect).abs() < 1e-8, "{t} vs {expect}");
        assert!((t - ((y - r) / 2.0f64).powi(2)).abs() < r * r);
        assert_eq!(arrival_time(&zero(), c(0.3, 0.0), 1.0, 0.01, &o).unwrap(), None);
        assert_eq!(arrival_time(&zero(), c(0.001, 0.0), 1.0, 0.01, &o).unwrap(), Some(0.0));
    }

    #[test]
    fn expansion_examples() {
        let o = SolverOptions::default();
        let cc = c(1.0, 1.0);
        let fit = expansion_fit(&Driver::linear(cc), 1.0, 1e3, 16, &o).unwrap();
        assert!((fit.a_hat - c(2.0, 0.0)).norm() < 1e-3, "{fit:?}");
        assert!((fit.b_hat - cc).norm() < 1e-2, "{fit:?}");
        let fit = expansion_fit(&zero(), 3.0, 1e3, 8, &o).unwrap();
        assert!((fit.a_hat - c(6.0, 0.0)).norm() < 1e-3);
        assert!(fit.b_hat.norm() < 1e-3);
        let fit = expansion_fit(&Driver::counterexample(), 0.0, 1e3, 8, &o).unwrap();
        assert_eq!((fit.a_hat, fit.b_hat), (c(0.0, 0.0), c(0.0, 0.0)));
        assert!(matches!(expansion_fit(&zero(), 1.0, 5.0, 8, &o), Err(EngineError::Conditioning(_))));
        assert!(matches!(expansion_fit(&zero(), 1.0, 1e3, 3, &o), Err(EngineError::Parameter(_))));
    }

    #[test]
    fn options_validation() {
        let bad = SolverOptions { min_step: 1.0, max_step: 0.1, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SolverOptions { singularity_safety: 1.5, ..Default::default() };
        assert!(integrate_forward(&zero(), c(1.0, 1.0), 1.0, &bad).is_err());
    }

    #[test]
    fn centered_chain_reproduces_trajectory() {
        let o = SolverOptions::default();
        let l = Driver::linear(c(2.0, 1.0));
        let tr = integrate_forward(&l, c(0.5, 2.0), 1.0, &o).unwrap();
        let ch = tr.centered(&l).unwrap();
        for ((t, g), (_, f)) in tr.samples.iter().zip(&ch.samples) {
            assert!((f + l.eval(*t).unwrap() - g).norm() < 1e-14);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn zero_driver_swallow_times(y in 0.2..4.0f64) {
            let t = blow_up_time(&zero(), c(0.0, y), 5.0, &SolverOptions::default()).unwrap().unwrap();
            prop_assert!((t - y * y / 4.0).abs() <= 1e-4);
        }

        #[test]
        fn swallow_time_stable_under_shorter_horizon(x in -0.5..0.5f64, y in 0.3..1.5f64) {
            let o = SolverOptions::default();
            let l = Driver::linear(c(0.3, 1.0));
            if let Some(tz) = blow_up_time(&l, c(x, y), 2.0, &o).unwrap() {
                let again = blow_up_time(&l, c(x, y), tz + 0.5 * (2.0 - tz), &o).unwrap().unwrap();
                prop_assert!((again - tz).abs() <= 1e-6);
            }
        }

        #[test]
        fn time_reversal_round_trip(re in -3.0..3.0f64, im in 1.0..3.0f64, t in 0.1..2.0f64) {
            let o = SolverOptions::default();
            let l = Driver::linear(c(1.0, 1.0));
            let w = c(re, im + 2.0);
            let z = inverse_map(&l, t, w, &o).unwrap();
            let MapValue::Alive(g) = forward_map(&l, z, t, &o).unwrap() else { panic!() };
            prop_assert!((g - w).norm() <= 10.0 * o.rel_tol * (1.0 + w.norm()));
        }
    }
}
