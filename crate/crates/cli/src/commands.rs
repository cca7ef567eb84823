use crate::config::{emit, sibling, write_output, CliError, DriverArgs, Result, RunConfig};
use crate::{Command, ExportKind, FieldFormat, MembershipArg, SideArg, TraceMethod};
use loewner::engine::integrate_forward;
use loewner::hull::{self, CurveTrace, FrontierOptions, Grid, HullField, Membership, RasterOptions};
use loewner::io::{self, Polyline};
use loewner::linear::{self, PioneerOptions, Region};
use loewner::verify::{self, CheckOptions, CounterexampleOptions, Suite};
use loewner::{Complex64, Driver, Exec, SolverOptions};
use serde_json::json;
use std::path::Path;

/// Runs one subcommand; `Ok(false)` means the run completed but a check failed.
pub fn run(cmd: Command, exec: Exec) -> Result<bool> {
    match cmd {
        Command::Trace { driver, t_max, dt, method, solver, out, svg } => {
            let d = driver.require()?;
            let opts = solver.resolve()?;
            trace(&d, t_max, dt, method, &opts, exec, out.as_deref(), svg.as_deref())
        }
        Command::Hull { driver, t_max, n, bounds, side, membership, format, at, solver, out } => {
            let d = driver.require()?;
            let opts = solver.resolve()?;
            let grid = match bounds {
                Some(b) => parse_bounds(&b, n)?,
                None => default_grid(&d, t_max, n, side)?,
            };
            let membership = match membership {
                MembershipArg::Arrival => Membership::Arrival,
                MembershipArg::Swallow => Membership::Swallow,
            };
            let ro = RasterOptions { membership, exec };
            let field = match side {
                SideArg::Left => hull::left_hull_field(&d, t_max, &grid, &opts, &ro)?,
                SideArg::Right => hull::right_hull_field(&d, t_max, &grid, &opts, &ro)?,
            };
            let at = at.unwrap_or(t_max);
            let cfg = RunConfig::new(
                "hull",
                Some(&d),
                json!({"t_max": t_max, "grid": grid, "side": format!("{side:?}").to_lowercase(), "membership": membership, "format": format!("{format:?}").to_lowercase(), "at": at}),
                opts,
            );
            let bytes = field_bytes(&field, format, at);
            emit(out.as_deref(), &bytes, &cfg)?;
            if field.failed() > 0 {
                eprintln!("warning: {} cells failed to integrate", field.failed());
            }
            Ok(true)
        }
        Command::Classify { c, out } => {
            let rec = linear::classify(c);
            let cfg = RunConfig::new("classify", None, json!({"c": c}), SolverOptions::default());
            emit(out.as_deref(), &json_bytes(&rec)?, &cfg)?;
            Ok(true)
        }
        Command::Verify { suite, driver, grid_n, probes, seed, resolution, solver, out } => {
            let suite: Suite = suite.parse()?;
            let d = driver.resolve()?;
            let ctx = CheckOptions { solver: solver.resolve()?, exec, seed, probes, grid_n, ..Default::default() };
            let reports = verify_reports(suite, d.as_ref(), resolution, &ctx)?;
            for r in &reports {
                println!("{}", r.summary_line());
            }
            let pass = verify::all_pass(&reports);
            println!("{} of {} checks pass", reports.iter().filter(|r| r.pass).count(), reports.len());
            if let Some(p) = out {
                let mut cfg = RunConfig::new(
                    "verify",
                    d.as_ref(),
                    json!({"suite": suite, "grid_n": grid_n, "probes": probes, "resolution": resolution}),
                    ctx.solver,
                );
                cfg.seed = Some(seed);
                write_output(&p, &json_bytes(&reports)?, &cfg)?;
            }
            Ok(pass)
        }
        Command::Holder { driver, t_max, grid, out } => {
            let d = driver.require()?;
            let est = loewner::driver::holder_half_norm_with(exec, &d, t_max, grid)?;
            let mut doc = serde_json::to_value(est)?;
            if let Some(c) = d.as_linear().filter(|&c| linear::classify(c).region == Region::Omega0) {
                let v = linear::holder_at_tstar(c)?;
                let two_sqrt_pi = 2.0 * std::f64::consts::PI.sqrt();
                doc["at_tstar"] = json!({"value": v, "two_sqrt_pi": two_sqrt_pi, "difference": v - two_sqrt_pi});
            }
            let cfg = RunConfig::new("holder", Some(&d), json!({"t_max": t_max, "grid": grid}), SolverOptions::default());
            emit(out.as_deref(), &json_bytes(&doc)?, &cfg)?;
            Ok(true)
        }
        Command::Export { kind, driver, t_max, z, dt, n, solver, out } => export(kind, &driver, t_max, z, dt, n, &solver.resolve()?, exec, out.as_deref()),
    }
}

fn json_bytes<T: serde::Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn parse_bounds(s: &str, n: usize) -> Result<Grid> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("bad --bounds {s:?}: {e}")))?;
    let [x0, x1, y0, y1] = v[..] else {
        return Err(CliError::Usage(format!("--bounds needs x0,x1,y0,y1, got {s:?}")));
    };
    Ok(Grid::new(x0, x1, y0, y1, n, n)?)
}

/// Box around the hull; the right hull box is the dual driver's box turned by `i`.
fn default_grid(d: &Driver, t: f64, n: usize, side: SideArg) -> Result<Grid> {
    Ok(match side {
        SideArg::Left => Grid::default_for(d, t, n)?,
        SideArg::Right => {
            let g = Grid::default_for(&d.dual(t)?, t, n)?;
            Grid::new(-g.y1, -g.y0, g.x0, g.x1, n, n)?
        }
    })
}

fn field_bytes(field: &HullField, format: FieldFormat, at: f64) -> Vec<u8> {
    let mut buf = Vec::new();
    match format {
        FieldFormat::Csv => io::write_field_csv(&mut buf, field).expect("write to memory"),
        FieldFormat::Pgm => io::write_field_pgm(&mut buf, field, at).expect("write to memory"),
        FieldFormat::Svg => buf = io::render_svg(io::view_of_grid(&field.grid), &[], Some((field, at))).into_bytes(),
    }
    buf
}

fn pioneer_slope(d: &Driver, method: TraceMethod) -> Result<Option<Complex64>> {
    let c = d.as_linear().filter(|c| c.re != 0.0 && c.im != 0.0);
    match (method, c) {
        (TraceMethod::Frontier, _) => Ok(None),
        (TraceMethod::Auto, c) => Ok(c),
        (TraceMethod::Pioneer, Some(c)) => Ok(Some(c)),
        (TraceMethod::Pioneer, None) => Err(CliError::Usage("the pioneer method needs a linear driver off the axes".into())),
    }
}

fn curve(d: &Driver, t_max: f64, dt: f64, method: TraceMethod, opts: &SolverOptions, exec: Exec) -> Result<CurveTrace> {
    if !(t_max > 0.0 && dt > 0.0) {
        return Err(CliError::Usage("--t-max and --dt must be positive".into()));
    }
    Ok(match pioneer_slope(d, method)? {
        Some(c) => linear::trace_pioneer_curve_with(exec, c, t_max, dt, &PioneerOptions::default())?,
        None => {
            let n = (t_max / dt).ceil().max(1.0) as usize;
            hull::trace_two_sided_curve(d, &hull::uniform_times(t_max, n), opts, &FrontierOptions::default(), exec)?
        }
    })
}

fn trace_svg(tr: &CurveTrace, field: Option<(&HullField, f64)>) -> String {
    let plus = tr.plus();
    let minus: Vec<Complex64> = tr.minus().into_iter().map(|(_, z)| z).collect();
    let view = match field {
        Some((f, _)) => io::view_of_grid(&f.grid),
        None => io::view_of(plus.iter().chain(&minus).copied()),
    };
    let lines = [Polyline { points: &plus, stroke: "#c0392b" }, Polyline { points: &minus, stroke: "#27864a" }];
    io::render_svg(view, &lines, field)
}

#[allow(clippy::too_many_arguments)]
fn trace(d: &Driver, t_max: f64, dt: f64, method: TraceMethod, opts: &SolverOptions, exec: Exec, out: Option<&Path>, svg: Option<&Path>) -> Result<bool> {
    let tr = curve(d, t_max, dt, method, opts, exec)?;
    let cfg = RunConfig::new("trace", Some(d), json!({"t_max": t_max, "dt": dt, "method": format!("{method:?}").to_lowercase()}), *opts);
    let mut csv = Vec::new();
    io::write_trace_csv(&mut csv, &tr).expect("write to memory");
    emit(out, &csv, &cfg)?;
    if let Some(p) = svg {
        write_output(p, trace_svg(&tr, None).as_bytes(), &cfg)?;
    }
    let (Some(p), Some(c)) = (out, d.as_linear()) else {
        return Ok(true);
    };
    let rec = linear::classify(c);
    write_output(&sibling(p, "phase.json"), &json_bytes(&rec)?, &cfg)?;
    if pioneer_slope(d, method)?.is_none() {
        return Ok(true);
    }
    let events = match rec.region {
        Region::Omega0 if rec.t_star.is_some_and(|ts| t_max >= ts) => Some(serde_json::to_value(linear::omega0_events(c, &tr, &PioneerOptions::default())?)?),
        Region::OmegaMinus => {
            let rep = linear::spiral_diagnostics(c, &tr)?;
            Some(json!({"rate_plus": rep.rate_plus, "log_rate_minus": rep.log_rate_minus, "spiral": rep.spiral.map(|s| json!({
                "limit": s.limit, "target": s.target, "limit_error": s.limit_error, "angle_slope": s.angle_slope,
                "angle_ratio": s.angle_ratio, "spiral_rate": s.spiral_rate, "im_sign_onset": s.im_sign_onset,
            }))}))
        }
        Region::OmegaPlus => {
            let rep = linear::asymptotics(c, &tr)?;
            Some(json!({"rate_plus": rep.rate_plus, "rate_minus": rep.rate_minus, "log_rate_plus": rep.log_rate_plus, "log_rate_minus": rep.log_rate_minus}))
        }
        _ => None,
    };
    if let Some(ev) = events {
        write_output(&sibling(p, "events.json"), &json_bytes(&ev)?, &cfg)?;
    }
    Ok(true)
}

fn verify_reports(suite: Suite, driver: Option<&Driver>, resolution: usize, ctx: &CheckOptions) -> Result<Vec<verify::VerificationReport>> {
    let drivers = match driver {
        Some(d) => vec![d.clone()],
        None => verify::default_drivers(),
    };
    let mut out = Vec::new();
    if matches!(suite, Suite::Symmetries | Suite::All) {
        out.extend(verify::run_suite(Suite::Symmetries, &drivers, ctx)?);
    }
    if matches!(suite, Suite::Angles | Suite::All) {
        out.extend(verify::run_suite(Suite::Angles, &[], ctx)?);
    }
    if matches!(suite, Suite::Counterexample | Suite::All) {
        let cx = CounterexampleOptions { resolution, ..Default::default() };
        out.extend(verify::run_counterexample(&cx, ctx)?);
    }
    out.sort_by(|a, b| a.name.cmp(&b.name).then_with(|| a.fingerprint.cmp(&b.fingerprint)));
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn export(kind: ExportKind, driver: &DriverArgs, t_max: f64, z: Option<Complex64>, dt: f64, n: usize, opts: &SolverOptions, exec: Exec, out: Option<&Path>) -> Result<bool> {
    let d = driver.require()?;
    let kind_name = format!("{kind:?}").to_lowercase();
    match kind {
        ExportKind::Trajectory => {
            let z = z.ok_or_else(|| CliError::Usage("--z is required for a trajectory".into()))?;
            let traj = integrate_forward(&d, z, t_max, opts)?;
            let cfg = RunConfig::new("export", Some(&d), json!({"kind": kind_name, "t_max": t_max, "z": z}), *opts);
            let mut buf = Vec::new();
            io::write_trajectory_csv(&mut buf, &traj).expect("write to memory");
            emit(out, &buf, &cfg)?;
        }
        ExportKind::Driver => {
            let cfg = RunConfig::new("export", Some(&d), json!({"kind": kind_name}), *opts);
            emit(out, format!("{}\n", d.to_json()).as_bytes(), &cfg)?;
        }
        ExportKind::Svg => {
            let tr = curve(&d, t_max, dt, TraceMethod::Auto, opts, exec)?;
            let grid = Grid::default_for(&d, t_max, n)?;
            let field = hull::left_hull_field(&d, t_max, &grid, opts, &RasterOptions { membership: Membership::Arrival, exec })?;
            let cfg = RunConfig::new("export", Some(&d), json!({"kind": kind_name, "t_max": t_max, "dt": dt, "n": n}), *opts);
            emit(out, trace_svg(&tr, Some((&field, t_max))).as_bytes(), &cfg)?;
        }
    }
    Ok(true)
}
