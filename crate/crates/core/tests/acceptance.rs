//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion with the
//! measured values. The process exits non-zero on a failure only when
//! `ACCEPTANCE_STRICT` is set, so known-red items stay visible without
//! breaking the ordinary test run.

use loewner::driver::holder_half_norm;
use loewner::engine::{blow_up_time, expansion_fit, forward_map, MapValue};
use loewner::exec::{self, Exec};
use loewner::geometry::{polyline_distance, winding_number};
use loewner::hull::{self, CellValue, CurveTrace, FrontierOptions, Grid, Membership, RasterOptions};
use loewner::linear::{
    asymptotic_rates, holder_at_tstar, omega0_events, solve_pioneer, spiral_diagnostics, trace_pioneer_curve, Branch,
    PioneerOptions,
};
use loewner::verify::{self, CheckOptions, CounterexampleOptions, Suite};
use loewner::{Complex64, Driver, SolverOptions};
use rand::{Rng, SeedableRng};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};
use std::time::Instant;

type Verdict = Result<(bool, String), String>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

struct Runner {
    passed: usize,
    total: usize,
}

impl Runner {
    fn run(&mut self, id: u32, name: &str, budget_s: f64, f: impl FnOnce() -> Verdict) {
        let start = Instant::now();
        let verdict = f();
        let secs = start.elapsed().as_secs_f64();
        let (ok, detail) = match verdict {
            Ok((ok, d)) => (ok && secs < budget_s, d),
            Err(e) => (false, format!("error: {e}")),
        };
        self.total += 1;
        if ok {
            self.passed += 1;
        }
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("{tag} [{id:>2}] {name} ({secs:.2} s of {budget_s} s): {detail}");
    }
}

fn trace(cc: Complex64, t_end: f64, dt: f64) -> Result<CurveTrace, String> {
    trace_pioneer_curve(cc, t_end, dt, &PioneerOptions::default()).map_err(err)
}

fn simple_phase_growth() -> Verdict {
    let cc = c(2.0, 1.0);
    let tr = trace(cc, 200.0, 0.1)?;
    let last = tr.samples.last().ok_or("empty trace")?;
    let tol = 0.02 * cc.norm();
    let ep = (last.plus / last.t - cc).norm();
    let em = (last.minus.ok_or("no bottom branch")? / last.t - cc).norm();
    let (a, b) = asymptotic_rates(cc).map_err(err)?;
    let exact = a == 2.0 && b == 1.0;
    Ok((
        ep <= tol && em <= tol && exact,
        format!("t={} |g+/t-c|={ep:.4e} |g-/t-c|={em:.4e} tol {tol:.4e}; rates ({a}, {b})", last.t),
    ))
}

fn spiral_phase() -> Verdict {
    let cc = c(1.0, 2.0);
    let tr = trace(cc, 200.0, 0.1)?;
    let rep = spiral_diagnostics(cc, &tr).map_err(err)?;
    let sp = rep.spiral.ok_or("no spiral report")?;
    let target = c(0.4, -0.8);
    let lim = (sp.limit - target).norm();
    let slope = rel(sp.angle_slope, 4.0);
    let im_max = tr
        .samples
        .iter()
        .filter(|s| s.t >= 50.0)
        .filter_map(|s| s.minus)
        .map(|m| m.im)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((
        lim <= 1e-2 && slope <= 0.02 && im_max <= 1e-6,
        format!("|g(-200)-2/c|={lim:.3e} angle slope {:.5} (rel {slope:.2e}) max Im g(-t), t>=50: {im_max:.3e}", sp.angle_slope),
    ))
}

fn exotic_events(cc: Complex64, t_cut: f64, t_star: f64) -> Verdict {
    let tr = trace(cc, t_star, 0.01 * t_star)?;
    let ev = omega0_events(cc, &tr, &PioneerOptions::default()).map_err(err)?;
    let tc = ev.t_cut.ok_or("no cut crossing")?;
    let ok = rel(tc, t_cut) <= 1e-3
        && rel(ev.origin_revisit_time, t_star) <= 1e-2
        && ev.origin_revisit_norm <= 1e-3
        && ev.reflection_residual <= 1e-3
        && ev.reflection_residual_interior <= 1e-5
        && ev.ell_window_ok;
    Ok((
        ok,
        format!(
            "c={cc:.4} t_cut={tc:.10} revisit={:.6} |g(-t*)|={:.2e} reflection {:.2e} / interior {:.2e} ell=1: {}",
            ev.origin_revisit_time, ev.origin_revisit_norm, ev.reflection_residual, ev.reflection_residual_interior, ev.ell_window_ok
        ),
    ))
}

fn simplicity_bound() -> Verdict {
    let cc = c(1.0, 1.0);
    let t_star = 2.0 * PI;
    let tr = trace(cc, t_star, 1e-3 * t_star)?;
    let contact = hull::simplicity_scan(&tr, 1e-3, Exec::Parallel).ok_or("no contact at all")?;
    let ok = rel(contact.time, t_star) <= 1e-2 && contact.point.norm() <= 1e-2;
    Ok((
        ok,
        format!("first contact t={:.6} (t*={t_star:.6}) at |z|={:.2e}, gap {:.2e}", contact.time, contact.point.norm(), contact.distance),
    ))
}

fn holder_constant() -> Verdict {
    let expect = 2.0 * PI.sqrt();
    let h = holder_half_norm(&Driver::linear(c(1.0, 1.0)), TAU, 1024).map_err(err)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let r = rng.gen_range(0.2..5.0);
        let v = holder_at_tstar(Complex64::from_polar(r, FRAC_PI_4)).map_err(err)?;
        worst = worst.max((v - expect).abs());
    }
    let ulp = 4.0 * f64::EPSILON * expect;
    Ok((
        (h.value - expect).abs() <= 1e-6 && worst <= ulp,
        format!("grid sup {:.12} vs 2 sqrt(pi) {expect:.12}; closed form worst error {worst:.1e}", h.value),
    ))
}

fn counterexample() -> Verdict {
    let ctx = CheckOptions::default();
    let literal_tip = 1.5;
    let cx = CounterexampleOptions { tip_radius: literal_tip, ..Default::default() };
    let reports = verify::run_counterexample(&cx, &ctx).map_err(err)?;
    let get = |name: &str| reports.iter().find(|r| r.name == name).ok_or(format!("missing report {name}"));
    let inter = get("counterexample.intersection")?;
    let tip = get("counterexample.tip")?;
    let simple = get("counterexample.simple_polyline")?;
    let on_l1 = get("counterexample.top_end_stops")?;

    // Literal fixed-point reading of the top end, measured separately.
    let driver = Driver::counterexample();
    let fo = FrontierOptions::default();
    let o = SolverOptions::default();
    let (top1, _) = hull::frontier_point(&driver, 1.0, 1.0, &o, &fo).map_err(err)?;
    let times: Vec<f64> = (1..=40).map(|k| 1.0 + k as f64 / 40.0).collect();
    let later = hull::trace_two_sided_curve(&driver, &times, &o, &fo, Exec::Parallel).map_err(err)?;
    let drift = later.samples.iter().map(|s| (s.plus - top1).norm()).fold(0.0, f64::max);

    let closed = verify::sqrt_slit_tip(4.0 / 3f64.sqrt(), 1.0);
    let (g_tip, _) = hull::frontier_point(&driver.shifted(1.0).map_err(err)?, 1.0, 1.0, &o, &fo).map_err(err)?;
    let closed_err = (g_tip - Complex64::from_polar(closed, FRAC_PI_4)).norm();

    let ok = inter.pass && tip.pass && simple.pass && drift <= cx.drift_tol;
    Ok((
        ok,
        format!(
            "hausdorff to 1.5 segment {:.3e} (tol {:.3e}); tip {:.3e} (tol {:.0e}); simple: {}; drift from gamma+(1) {drift:.3e} (tol {:.0e}), distance to L_1 {:.2e}; closed-form tip {closed:.6} misses by {closed_err:.2e}",
            inter.max_residual, inter.tolerance, tip.max_residual, cx.tip_tol, simple.pass, cx.drift_tol, on_l1.max_residual
        ),
    ))
}

fn angles() -> Verdict {
    let o = SolverOptions::default();
    let cases = [(0.0, FRAC_PI_2), (4.0 / 3f64.sqrt(), FRAC_PI_4), (4.0, 0.4601)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (a, expect) in cases {
        let th = verify::sqrt_driver_angle(a, 1.0, &o).map_err(err)?;
        ok &= (th - expect).abs() <= 1e-2;
        parts.push(format!("a={a:.4}: {th:.5} vs {expect:.4}"));
    }
    Ok((ok, parts.join("; ")))
}

fn symmetries() -> Verdict {
    let ctx = CheckOptions::default();
    let reports = verify::run_suite(Suite::Symmetries, &verify::default_drivers(), &ctx).map_err(err)?;
    let fails: Vec<String> = reports.iter().filter(|r| !r.pass).map(|r| r.summary_line()).collect();
    let margin = reports
        .iter()
        .filter(|r| r.tolerance > 0.0)
        .map(|r| r.max_residual / r.tolerance)
        .fold(0.0, f64::max);
    let detail = if fails.is_empty() {
        format!("{} reports, worst residual/tolerance {margin:.3}", reports.len())
    } else {
        fails.join(" | ")
    };
    Ok((fails.is_empty(), detail))
}

fn engine_oracles() -> Verdict {
    let o = SolverOptions::default();
    let zero = Driver::constant(c(0.0, 0.0));
    let mut swallow: f64 = 0.0;
    for k in 0..=38 {
        let y = 0.2 + 0.1 * k as f64;
        let t = blow_up_time(&zero, c(0.0, y), 5.0, &o).map_err(err)?.ok_or("not swallowed")?;
        swallow = swallow.max((t - y * y / 4.0).abs());
    }
    let mut pole: f64 = 0.0;
    let mut a_err: f64 = 0.0;
    let mut b_err: f64 = 0.0;
    for cc in [c(1.0, 1.0), c(2.0, 1.0), c(1.0, 2.0)] {
        let l = Driver::linear(cc);
        for t in [0.5, 1.0, 2.0] {
            match forward_map(&l, 2.0 / cc, t, &o).map_err(err)? {
                MapValue::Alive(g) => pole = pole.max((g - (2.0 / cc + cc * t)).norm()),
                MapValue::Swallowed(_) => return Err(format!("2/c swallowed for c={cc}")),
            }
        }
        let t = 1.0;
        let fit = expansion_fit(&l, t, 1e3, 16, &o).map_err(err)?;
        a_err = a_err.max((fit.a_hat - 2.0 * t).norm());
        b_err = b_err.max((fit.b_hat - cc * t * t).norm());
    }
    Ok((
        swallow <= 1e-4 && pole <= 1e-8 && a_err <= 1e-3 && b_err <= 1e-2,
        format!("swallow {swallow:.2e}; g_t(2/c) {pole:.2e}; a(t) {a_err:.2e}; b(t) {b_err:.2e}"),
    ))
}

fn small_time() -> Verdict {
    let t: f64 = 1e-4;
    let opts = PioneerOptions::default();
    let slit = 2.0 * t.sqrt();
    let mut worst: f64 = 0.0;
    for cc in [c(1.0, 1.0), c(2.0, 1.0), c(1.0, 2.0)] {
        let p = solve_pioneer(cc, t, Branch::Plus, None, &opts).map_err(err)?;
        let m = solve_pioneer(cc, t, Branch::Minus, None, &opts).map_err(err)?;
        worst = worst.max((p.z - c(0.0, slit)).norm()).max((m.z + c(0.0, slit)).norm());
    }
    // The zero driver's slit tip is the same leading term.
    let zero = Driver::constant(c(0.0, 0.0));
    let (tip, _) = hull::frontier_point(&zero, t, 1.0, &SolverOptions::default(), &FrontierOptions::default()).map_err(err)?;
    let oracle = (tip - c(0.0, slit)).norm();
    Ok((
        worst <= 10.0 * t && oracle <= 10.0 * t,
        format!("max |g(+-t) -+ 2i sqrt t| = {worst:.3e} (tol {:.0e}); zero-driver tip off by {oracle:.2e}", 10.0 * t),
    ))
}

fn loop_interior() -> Verdict {
    let cc = c(1.0, 1.0);
    let t_star = 2.0 * PI;
    let tr = trace(cc, t_star, 2e-3 * t_star)?;
    let mut poly: Vec<Complex64> = tr.minus().into_iter().map(|(_, z)| z).collect();
    poly.push(poly[0]);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for z in &poly {
        x0 = x0.min(z.re);
        x1 = x1.max(z.re);
        y0 = y0.min(z.im);
        y1 = y1.max(z.im);
    }
    let pad = 0.05 * (x1 - x0).max(y1 - y0);
    let grid = Grid::new(x0 - pad, x1 + pad, y0 - pad, y1 + pad, 512, 512).map_err(err)?;
    let half_diag = 0.5 * grid.cell_diag();
    let inside: Vec<usize> = (0..grid.len())
        .filter(|&k| {
            let z = grid.center_of(k);
            winding_number(z, &poly) != 0 && polyline_distance(z, &poly) > half_diag
        })
        .collect();
    let l = Driver::linear(cc);
    let o = SolverOptions::default();
    let horizon = t_star + 3.0;
    let raster = RasterOptions { membership: Membership::Swallow, exec: Exec::Parallel };
    let field = hull::left_hull_field(&l, horizon, &grid, &o, &raster).map_err(err)?;
    let mut bad = [0usize; 2];
    for (n, t) in [t_star + 1.0, horizon].into_iter().enumerate() {
        bad[n] = inside
            .iter()
            .filter(|&&k| !matches!(field.values[k], CellValue::Escaped) && !matches!(field.values[k], CellValue::Reached(s) if s > t))
            .count();
    }
    // Direct check on a few interior cells, outside the raster path.
    let spot: Vec<bool> = exec::map_indexed(Exec::Parallel, 8, |i| {
        let z = grid.center_of(inside[i * inside.len() / 8]);
        matches!(blow_up_time(&l, z, horizon, &o), Ok(None))
    });
    Ok((
        !inside.is_empty() && bad == [0, 0] && spot.iter().all(|s| *s),
        format!(
            "{} interior cells; swallowed by t*+1: {}, by t*+3: {}; spot checks escaped: {}",
            inside.len(),
            bad[0],
            bad[1],
            spot.iter().filter(|s| **s).count()
        ),
    ))
}

fn main() {
    let mut r = Runner { passed: 0, total: 0 };
    r.run(1, "simple phase growth rates", 1.0, simple_phase_growth);
    r.run(2, "spiral phase limit and angle", 5.0, spiral_phase);
    r.run(3, "exotic events, c = 1+i", 5.0, || exotic_events(c(1.0, 1.0), PI, TAU));
    r.run(3, "exotic events, c = 2e^(i pi/4)", 5.0, || exotic_events(Complex64::from_polar(2.0, FRAC_PI_4), FRAC_PI_2, PI));
    r.run(4, "first self-contact at the loop closing time", 10.0, simplicity_bound);
    r.run(5, "Holder-1/2 constant", 5.0, holder_constant);
    r.run(6, "counterexample reproduction", 60.0, counterexample);
    r.run(7, "sqrt driver hull angles", 10.0, angles);
    r.run(8, "symmetry suite", 120.0, symmetries);
    r.run(9, "engine oracles", 10.0, engine_oracles);
    r.run(10, "small-time pioneer points", 1.0, small_time);
    r.run(11, "exotic loop interior is never swallowed", 60.0, loop_interior);
    println!("acceptance: {}/{} checks pass", r.passed, r.total);
    if std::env::var_os("ACCEPTANCE_STRICT").is_some() && r.passed != r.total {
        std::process::exit(1);
    }
}
