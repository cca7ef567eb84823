//! Driving functions: closed-form base drivers, tabulated drivers and the
//! transform wrappers realising the translation, scaling, reflection and
//! duality symmetries.

use crate::exec::{self, Exec};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Slack allowed when a time is evaluated just past the end of a domain.
const DOMAIN_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DriverError {
    #[error("time {t} outside driver domain [0, {t_max}]")]
    Domain { t: f64, t_max: f64 },
    #[error("invalid driver parameter: {0}")]
    Parameter(String),
    #[error("driver is not C1 on [{a}, {b}]")]
    Regularity { a: f64, b: f64 },
    #[error("malformed driver spec: {0}")]
    Spec(String),
}

/// Untransformed driver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Base {
    Constant {
        x: Complex64,
    },
    Linear {
        c: Complex64,
    },
    /// `a * sqrt(t)`.
    #[serde(rename = "sqrt")]
    SqrtForward {
        a: f64,
    },
    /// `(4i/sqrt 3) sqrt(1-t)` on `[0,1]`, then `(4/sqrt 3) sqrt(t-1)` on `[1,2]`.
    Counterexample,
    /// Piecewise-linear through `[t, re, im]` rows; times start at 0.
    Tabulated {
        samples: Vec<[f64; 3]>,
    },
}

/// Wrapper applied on top of a driver `l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    /// `l(t0 + t)`
    Shifted { t0: f64 },
    /// `l(t) + a`
    Translated { a: Complex64 },
    /// `a l(t / a^2)`
    Scaled { a: f64 },
    /// `conj(l(t))`
    Conjugated,
    /// `-l(t)`
    Negated,
    /// `-conj(l(t))`
    ConjNegated,
    /// `-i l(T - t)` on `[0, T]`
    DualRotated { t: f64 },
}

/// A driver: a base function followed by transforms applied left to right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Driver {
    #[serde(flatten)]
    base: Base,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    transforms: Vec<Transform>,
}

impl Driver {
    pub fn new(base: Base) -> Result<Self, DriverError> {
        if let Base::Tabulated { samples } = &base {
            validate_samples(samples)?;
        }
        if let Base::SqrtForward { a } = base {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(DriverError::Parameter(format!("sqrt coefficient {a} must be >= 0")));
            }
        }
        Ok(Self { base, transforms: Vec::new() })
    }

    pub fn constant(x: Complex64) -> Self {
        Self { base: Base::Constant { x }, transforms: Vec::new() }
    }

    pub fn linear(c: Complex64) -> Self {
        Self { base: Base::Linear { c }, transforms: Vec::new() }
    }

    pub fn sqrt_forward(a: f64) -> Result<Self, DriverError> {
        Self::new(Base::SqrtForward { a })
    }

    pub fn counterexample() -> Self {
        Self { base: Base::Counterexample, transforms: Vec::new() }
    }

    pub fn tabulated(samples: Vec<(f64, Complex64)>) -> Result<Self, DriverError> {
        Self::new(Base::Tabulated {
            samples: samples.into_iter().map(|(t, z)| [t, z.re, z.im]).collect(),
        })
    }

    /// Parses the JSON driver spec, e.g. `{"kind":"linear","c":[1,1]}`.
    pub fn from_json(text: &str) -> Result<Self, DriverError> {
        let raw: Driver = serde_json::from_str(text).map_err(|e| DriverError::Spec(e.to_string()))?;
        let mut d = Driver::new(raw.base)?;
        for tr in raw.transforms {
            d = d.transform(tr)?;
        }
        Ok(d)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("driver serialises")
    }

    pub fn base(&self) -> &Base {
        &self.base
    }

    pub fn transforms(&self) -> &[Transform] {
        &self.transforms
    }

    /// Short stable hash of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Wraps the driver in one more transform.
    pub fn transform(&self, tr: Transform) -> Result<Self, DriverError> {
        let t_max = self.t_max();
        match tr {
            Transform::Scaled { a } if !(a > 0.0 && a.is_finite()) => {
                return Err(DriverError::Parameter(format!("scale factor {a} must be > 0")));
            }
            Transform::Shifted { t0 } if !(t0 >= 0.0 && t0 <= t_max) => {
                return Err(DriverError::Parameter(format!("shift {t0} outside [0, {t_max}]")));
            }
            Transform::DualRotated { t } if !(t >= 0.0 && t <= t_max && t.is_finite()) => {
                return Err(DriverError::Parameter(format!("dual time {t} outside [0, {t_max}]")));
            }
            Transform::Translated { a } if !(a.re.is_finite() && a.im.is_finite()) => {
                return Err(DriverError::Parameter("translation must be finite".into()));
            }
            _ => {}
        }
        let mut out = self.clone();
        out.transforms.push(tr);
        Ok(out)
    }

    pub fn shifted(&self, t0: f64) -> Result<Self, DriverError> {
        self.transform(Transform::Shifted { t0 })
    }

    pub fn translated(&self, a: Complex64) -> Self {
        self.transform(Transform::Translated { a }).expect("finite translation")
    }

    pub fn scaled(&self, a: f64) -> Result<Self, DriverError> {
        self.transform(Transform::Scaled { a })
    }

    pub fn conjugated(&self) -> Self {
        self.transform(Transform::Conjugated).expect("infallible")
    }

    pub fn negated(&self) -> Self {
        self.transform(Transform::Negated).expect("infallible")
    }

    pub fn conj_negated(&self) -> Self {
        self.transform(Transform::ConjNegated).expect("infallible")
    }

    /// `-i l(t - .)` on `[0, t]`, the driver whose left hull is `-i` times the right hull.
    pub fn dual(&self, t: f64) -> Result<Self, DriverError> {
        self.transform(Transform::DualRotated { t })
    }

    /// End of the domain `[0, t_max]` (infinite for the closed forms).
    pub fn t_max(&self) -> f64 {
        let mut t = match &self.base {
            Base::Counterexample => 2.0,
            Base::Tabulated { samples } => samples.last().map_or(0.0, |s| s[0]),
            _ => f64::INFINITY,
        };
        for tr in &self.transforms {
            t = match *tr {
                Transform::Shifted { t0 } => t - t0,
                Transform::Scaled { a } => a * a * t,
                Transform::DualRotated { t: d } => d,
                _ => t,
            };
        }
        t
    }

    /// Interior times in `(0, t_max)` where the driver is not smooth, increasing.
    pub fn kinks(&self) -> Vec<f64> {
        let mut ks: Vec<f64> = match self.base {
            Base::Counterexample => vec![1.0],
            _ => Vec::new(),
        };
        for tr in &self.transforms {
            ks = match *tr {
                Transform::Shifted { t0 } => ks.into_iter().map(|k| k - t0).collect(),
                Transform::Scaled { a } => ks.into_iter().map(|k| a * a * k).collect(),
                Transform::DualRotated { t } => ks.into_iter().map(|k| t - k).collect(),
                _ => ks,
            };
        }
        let t_max = self.t_max();
        ks.retain(|&k| k > 0.0 && k < t_max);
        ks.sort_by(f64::total_cmp);
        ks
    }

    /// The slope `c` when the driver is exactly `c t` (transforms resolved).
    pub fn as_linear(&self) -> Option<Complex64> {
        let mut c = match self.base {
            Base::Linear { c } => c,
            _ => return None,
        };
        for tr in &self.transforms {
            c = match *tr {
                Transform::Scaled { a } => c / a,
                Transform::Conjugated => c.conj(),
                Transform::Negated => -c,
                Transform::ConjNegated => -c.conj(),
                _ => return None,
            };
        }
        Some(c)
    }

    pub fn eval(&self, t: f64) -> Result<Complex64, DriverError> {
        let t_max = self.t_max();
        if !(t >= -DOMAIN_SLACK && t <= t_max + DOMAIN_SLACK * t_max.max(1.0)) {
            return Err(DriverError::Domain { t, t_max });
        }
        Ok(self.eval_level(self.transforms.len(), t.clamp(0.0, t_max)))
    }

    fn eval_level(&self, level: usize, t: f64) -> Complex64 {
        if level == 0 {
            return eval_base(&self.base, t);
        }
        match self.transforms[level - 1] {
            Transform::Shifted { t0 } => self.eval_level(level - 1, t0 + t),
            Transform::Translated { a } => self.eval_level(level - 1, t) + a,
            Transform::Scaled { a } => self.eval_level(level - 1, t / (a * a)) * a,
            Transform::Conjugated => self.eval_level(level - 1, t).conj(),
            Transform::Negated => -self.eval_level(level - 1, t),
            Transform::ConjNegated => -self.eval_level(level - 1, t).conj(),
            Transform::DualRotated { t: d } => {
                self.eval_level(level - 1, (d - t).max(0.0)) * Complex64::new(0.0, -1.0)
            }
        }
    }

    /// `sup |l'|` over `[a, b]`, or `None` when the driver is not C1 there.
    pub fn deriv_sup_on(&self, a: f64, b: f64) -> Option<f64> {
        self.deriv_level(self.transforms.len(), a, b)
    }

    fn deriv_level(&self, level: usize, a: f64, b: f64) -> Option<f64> {
        if level == 0 {
            return base_deriv_sup(&self.base, a, b);
        }
        match self.transforms[level - 1] {
            Transform::Shifted { t0 } => self.deriv_level(level - 1, a + t0, b + t0),
            Transform::Scaled { a: s } => {
                self.deriv_level(level - 1, a / (s * s), b / (s * s)).map(|d| d / s)
            }
            Transform::DualRotated { t } => self.deriv_level(level - 1, t - b, t - a),
            _ => self.deriv_level(level - 1, a, b),
        }
    }

    /// Samples `n + 1` equally spaced values on `[0, t]`.
    pub fn sample(&self, t: f64, n: usize) -> Result<Vec<Complex64>, DriverError> {
        let n = n.max(1);
        (0..=n).map(|k| self.eval(t * k as f64 / n as f64)).collect()
    }

    /// Bounds of `Re l` and `sup |l - l(0)|` on `[0, t]`, from a dense sample.
    pub fn range_on(&self, t: f64) -> Result<DriverRange, DriverError> {
        let vals = self.sample(t, 2048)?;
        let l0 = vals[0];
        let mut r = DriverRange {
            re_min: f64::INFINITY,
            re_max: f64::NEG_INFINITY,
            im_min: f64::INFINITY,
            im_max: f64::NEG_INFINITY,
            sup_dev: 0.0,
            sup_abs: 0.0,
        };
        for v in vals {
            r.re_min = r.re_min.min(v.re);
            r.re_max = r.re_max.max(v.re);
            r.im_min = r.im_min.min(v.im);
            r.im_max = r.im_max.max(v.im);
            r.sup_dev = r.sup_dev.max((v - l0).norm());
            r.sup_abs = r.sup_abs.max(v.norm());
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverRange {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub sup_dev: f64,
    pub sup_abs: f64,
}

fn validate_samples(samples: &[[f64; 3]]) -> Result<(), DriverError> {
    if samples.len() < 2 {
        return Err(DriverError::Parameter("tabulated driver needs at least two samples".into()));
    }
    if samples[0][0] != 0.0 {
        return Err(DriverError::Parameter("tabulated times must start at 0".into()));
    }
    if samples.iter().flatten().any(|v| !v.is_finite()) {
        return Err(DriverError::Parameter("tabulated samples must be finite".into()));
    }
    if samples.windows(2).any(|w| w[1][0] <= w[0][0]) {
        return Err(DriverError::Parameter("tabulated times must be strictly increasing".into()));
    }
    Ok(())
}

fn eval_base(base: &Base, t: f64) -> Complex64 {
    match base {
        Base::Constant { x } => *x,
        Base::Linear { c } => c * t,
        Base::SqrtForward { a } => Complex64::new(a * t.sqrt(), 0.0),
        Base::Counterexample => {
            let k = 4.0 / SQRT3;
            if t <= 1.0 {
                Complex64::new(0.0, k * (1.0 - t).sqrt())
            } else {
                Complex64::new(k * (t - 1.0).sqrt(), 0.0)
            }
        }
        Base::Tabulated { samples } => {
            let i = samples.partition_point(|s| s[0] <= t);
            let i = i.clamp(1, samples.len() - 1);
            let (a, b) = (samples[i - 1], samples[i]);
            let u = ((t - a[0]) / (b[0] - a[0])).clamp(0.0, 1.0);
            Complex64::new(a[1] + u * (b[1] - a[1]), a[2] + u * (b[2] - a[2]))
        }
    }
}

fn base_deriv_sup(base: &Base, a: f64, b: f64) -> Option<f64> {
    match base {
        Base::Constant { .. } => Some(0.0),
        Base::Linear { c } => Some(c.norm()),
        Base::SqrtForward { a: k } => {
            if *k == 0.0 {
                Some(0.0)
            } else if a > 0.0 {
                Some(k / (2.0 * a.sqrt()))
            } else {
                None
            }
        }
        Base::Counterexample => {
            let k = 4.0 / SQRT3;
            if b < 1.0 {
                Some(k / (2.0 * (1.0 - b).sqrt()))
            } else if a > 1.0 {
                Some(k / (2.0 * (a - 1.0).sqrt()))
            } else {
                None
            }
        }
        Base::Tabulated { samples } => {
            let mut sup: f64 = 0.0;
            for w in samples.windows(2) {
                if w[1][0] > a && w[0][0] < b {
                    let dt = w[1][0] - w[0][0];
                    sup = sup.max(((w[1][1] - w[0][1]).powi(2) + (w[1][2] - w[0][2]).powi(2)).sqrt() / dt);
                }
            }
            Some(sup)
        }
    }
}

/// Sup of `|l(t) - l(s)| / |t - s|^(1/2)` over pairs of a uniform grid on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderEstimate {
    pub t_max: f64,
    /// Number of subintervals; the grid has `grid_size + 1` points.
    pub grid_size: usize,
    pub value: f64,
}

pub fn holder_half_norm(driver: &Driver, t: f64, grid_size: usize) -> Result<HolderEstimate, DriverError> {
    holder_half_norm_with(Exec::default(), driver, t, grid_size)
}

pub fn holder_half_norm_with(
    exec: Exec,
    driver: &Driver,
    t: f64,
    grid_size: usize,
) -> Result<HolderEstimate, DriverError> {
    if grid_size < 2 {
        return Err(DriverError::Parameter("grid_size must be >= 2".into()));
    }
    if !(t > 0.0) {
        return Err(DriverError::Parameter(format!("interval length {t} must be > 0")));
    }
    let times: Vec<f64> = (0..=grid_size).map(|k| t * k as f64 / grid_size as f64).collect();
    let vals: Vec<Complex64> = times.iter().map(|&s| driver.eval(s)).collect::<Result<_, _>>()?;
    let rows = exec::map_indexed(exec, grid_size, |i| {
        let mut best: f64 = 0.0;
        for j in i + 1..=grid_size {
            best = best.max((vals[j] - vals[i]).norm() / (times[j] - times[i]).sqrt());
        }
        best
    });
    let value = rows.into_iter().fold(0.0, f64::max);
    Ok(HolderEstimate { t_max: t, grid_size, value })
}

/// Breakpoints `0 = t_0 < ... < t_K = T` with uniform gaps no larger than `max_step`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    pub breakpoints: Vec<f64>,
    pub max_step: f64,
}

impl Partition {
    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.breakpoints.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn len(&self) -> usize {
        self.breakpoints.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Uniform partition of `[0, T]` with step `(sigma / sup|l'|)^2`, so that
/// `sup|l'| * sqrt(step) <= sigma` bounds the Hölder-1/2 norm of every piece.
/// `deriv_sup` overrides the analytic derivative bound when given.
pub fn c1_subdivision(
    driver: &Driver,
    t: f64,
    sigma: f64,
    deriv_sup: Option<f64>,
) -> Result<Partition, DriverError> {
    if !(sigma > 0.0) {
        return Err(DriverError::Parameter(format!("sigma {sigma} must be > 0")));
    }
    if !(t > 0.0 && t <= driver.t_max()) {
        return Err(DriverError::Parameter(format!("horizon {t} outside the driver domain")));
    }
    let analytic = driver.deriv_sup_on(0.0, t).ok_or(DriverError::Regularity { a: 0.0, b: t })?;
    let d = deriv_sup.unwrap_or(analytic);
    if !(d >= 0.0 && d.is_finite()) {
        return Err(DriverError::Parameter(format!("derivative bound {d} must be finite and >= 0")));
    }
    if d == 0.0 {
        return Ok(Partition { breakpoints: vec![0.0, t], max_step: t });
    }
    let delta = (sigma / d).powi(2);
    let k = ((t / delta - 1e-9).ceil() as usize).max(1);
    let step = t / k as f64;
    let mut breakpoints: Vec<f64> = (0..=k).map(|i| t * i as f64 / k as f64).collect();
    breakpoints[k] = t;
    Ok(Partition { breakpoints, max_step: step })
}
