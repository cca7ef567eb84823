//! Text exports: trajectory, trace and raster CSV, ASCII PGM, and SVG with
//! trace polylines and marching-squares hull contours. Numbers are written in
//! shortest round-trip form so output is reproducible byte for byte.

use crate::engine::{Status, Trajectory};
use crate::hull::{CellValue, CurveTrace, Grid, HullField};
use num_complex::Complex64;
use std::fmt::Write as _;
use std::io::{self, Write};

pub fn write_trajectory_csv<W: Write>(mut w: W, traj: &Trajectory) -> io::Result<()> {
    writeln!(w, "t,re_g,im_g,status")?;
    let n = traj.samples.len();
    for (k, (t, g)) in traj.samples.iter().enumerate() {
        let status = if k + 1 == n {
            match traj.status {
                Status::Alive => "alive",
                Status::Swallowed => "swallowed",
            }
        } else {
            ""
        };
        writeln!(w, "{},{},{},{status}", num(*t), num(g.re), num(g.im))?;
    }
    Ok(())
}

/// Shortest round-trip form, switching to exponent notation for tiny and huge values.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Columns `t, re_gp, im_gp, ell_p, re_gm, im_gm, ell_m, residual`; branch
/// indices are blank for traces without them, minus columns after the branch ends.
pub fn write_trace_csv<W: Write>(mut w: W, trace: &CurveTrace) -> io::Result<()> {
    writeln!(w, "t,re_gp,im_gp,ell_p,re_gm,im_gm,ell_m,residual")?;
    for s in &trace.samples {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            num(s.t),
            num(s.plus.re),
            num(s.plus.im),
            opt(s.plus_info.map(|i| i.ell)),
            opt(s.minus.map(|m| num(m.re))),
            opt(s.minus.map(|m| num(m.im))),
            opt(s.minus_info.map(|i| i.ell)),
            num(s.residual)
        )?;
    }
    Ok(())
}

/// Columns `x, y, t_blow` with `inf` for cells never reached and `fail` for solver failures.
pub fn write_field_csv<W: Write>(mut w: W, field: &HullField) -> io::Result<()> {
    writeln!(w, "x,y,t_blow")?;
    for (k, v) in field.values.iter().enumerate() {
        let z = field.grid.center_of(k);
        match v {
            CellValue::Reached(t) => writeln!(w, "{},{},{}", num(z.re), num(z.im), num(*t))?,
            CellValue::Escaped => writeln!(w, "{},{},inf", num(z.re), num(z.im))?,
            CellValue::Failed => writeln!(w, "{},{},fail", num(z.re), num(z.im))?,
        }
    }
    Ok(())
}

/// Plain PGM (P2), top row first. Members of the hull at `t` are shaded by
/// their hull time (0 at time 0, 254 at `t`), other cells are 255 and failed cells 0.
pub fn write_field_pgm<W: Write>(mut w: W, field: &HullField, t: f64) -> io::Result<()> {
    let g = &field.grid;
    writeln!(w, "P2")?;
    writeln!(w, "# hull time sublevel at t = {t}")?;
    writeln!(w, "{} {}", g.nx, g.ny)?;
    writeln!(w, "255")?;
    for j in (0..g.ny).rev() {
        let row: Vec<String> = (0..g.nx)
            .map(|i| {
                let px = match field.value(i, j) {
                    CellValue::Reached(s) if s <= t => {
                        if t > 0.0 {
                            (254.0 * s / t).round() as u32
                        } else {
                            0
                        }
                    }
                    CellValue::Failed => 0,
                    _ => 255,
                };
                px.to_string()
            })
            .collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

/// Iso-segments of the 0/1 indicator `mask` at level 1/2 on the cell centres.
pub fn marching_squares(grid: &Grid, mask: &[bool]) -> Vec<(Complex64, Complex64)> {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut out = Vec::new();
    if nx < 2 || ny < 2 {
        return out;
    }
    let at = |i: usize, j: usize| mask[j * nx + i];
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let (a, b, c, d) = (grid.center(i, j), grid.center(i + 1, j), grid.center(i + 1, j + 1), grid.center(i, j + 1));
            let code = (at(i, j) as u8) | (at(i + 1, j) as u8) << 1 | (at(i + 1, j + 1) as u8) << 2 | (at(i, j + 1) as u8) << 3;
            // Level 1/2 sits at edge midpoints for a 0/1 field.
            let (bot, right, top, left) = ((a + b) * 0.5, (b + c) * 0.5, (c + d) * 0.5, (d + a) * 0.5);
            match code {
                0 | 15 => {}
                1 | 14 => out.push((left, bot)),
                2 | 13 => out.push((bot, right)),
                3 | 12 => out.push((left, right)),
                4 | 11 => out.push((right, top)),
                6 | 9 => out.push((bot, top)),
                7 | 8 => out.push((left, top)),
                5 => {
                    out.push((left, top));
                    out.push((bot, right));
                }
                10 => {
                    out.push((left, bot));
                    out.push((right, top));
                }
                _ => unreachable!(),
            }
        }
    }
    out
}

/// A polyline to draw, with its stroke colour.
pub struct Polyline<'a> {
    pub points: &'a [Complex64],
    pub stroke: &'a str,
}

/// Bounds `(x0, x1, y0, y1)` of the SVG viewport in the complex plane.
pub type View = (f64, f64, f64, f64);

/// SVG of polylines and hull contours. The viewBox is the given view with
/// the imaginary axis pointing up.
pub fn render_svg(view: View, lines: &[Polyline<'_>], contours: Option<(&HullField, f64)>) -> String {
    let (x0, x1, y0, y1) = view;
    let (w, h) = (x1 - x0, y1 - y0);
    let stroke = 0.002 * w.max(h);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0} {} {w} {h}" width="800" height="{}">"#, -y1, (800.0 * h / w).round());
    let _ = writeln!(s, r#"<g transform="scale(1,-1)" fill="none" stroke-width="{stroke}">"#);
    if let Some((field, t)) = contours {
        let segs = marching_squares(&field.grid, &field.mask(t));
        let mut d = String::new();
        for (a, b) in segs {
            let _ = write!(d, "M{} {}L{} {}", a.re, a.im, b.re, b.im);
        }
        let _ = writeln!(s, r##"<path stroke="#1f4e9c" d="{d}"/>"##);
    }
    for l in lines {
        let pts: Vec<String> = l.points.iter().map(|z| format!("{},{}", z.re, z.im)).collect();
        let _ = writeln!(s, r#"<polyline stroke="{}" points="{}"/>"#, l.stroke, pts.join(" "));
    }
    s.push_str("</g>\n</svg>\n");
    s
}

/// View covering the given points, padded by 5%.
pub fn view_of(points: impl IntoIterator<Item = Complex64>) -> View {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for z in points {
        x0 = x0.min(z.re);
        x1 = x1.max(z.re);
        y0 = y0.min(z.im);
        y1 = y1.max(z.im);
    }
    if !(x1 >= x0 && y1 >= y0) {
        return (-1.0, 1.0, -1.0, 1.0);
    }
    let pad = 0.05 * (x1 - x0).max(y1 - y0).max(1e-9);
    (x0 - pad, x1 + pad, y0 - pad, y1 + pad)
}

pub fn view_of_grid(g: &Grid) -> View {
    (g.x0, g.x1, g.y0, g.y1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hull::{BranchInfo, Membership, Side, TraceSample};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn tiny_field() -> HullField {
        let grid = Grid::new(0.0, 3.0, 0.0, 2.0, 3, 2).unwrap();
        HullField {
            grid,
            values: vec![
                CellValue::Reached(0.5),
                CellValue::Escaped,
                CellValue::Failed,
                CellValue::Reached(1.0),
                CellValue::Reached(2.0),
                CellValue::Escaped,
            ],
            fingerprint: "f".into(),
            t_max: 2.0,
            membership: Membership::Arrival,
            side: Side::Left,
        }
    }

    #[test]
    fn field_exports() {
        let f = tiny_field();
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &f).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1), Some("0.5,0.5,0.5"));
        assert_eq!(text.lines().nth(2), Some("1.5,0.5,inf"));
        assert_eq!(text.lines().nth(3), Some("2.5,0.5,fail"));
        let mut buf = Vec::new();
        write_field_pgm(&mut buf, &f, 1.0).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().skip(4).collect();
        assert_eq!(rows, ["254 255 255", "127 255 0"]);
    }

    #[test]
    fn trace_csv_blanks() {
        let info = BranchInfo { ell: 1, theta: 4.0, log_modulus: 0.1 };
        let tr = CurveTrace {
            samples: vec![
                TraceSample { t: 0.0, plus: c(0.0, 0.0), minus: Some(c(0.0, 0.0)), plus_info: None, minus_info: None, residual: 0.0 },
                TraceSample { t: 1.0, plus: c(1.0, 2.0), minus: None, plus_info: Some(info), minus_info: None, residual: 1e-12 },
            ],
        };
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &tr).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1), Some("0.0,0.0,0.0,,0.0,0.0,,0.0"));
        assert_eq!(text.lines().nth(2), Some("1.0,1.0,2.0,1,,,,1e-12"));
    }

    #[test]
    fn contour_of_single_cell() {
        let grid = Grid::new(0.0, 3.0, 0.0, 3.0, 3, 3).unwrap();
        let mut mask = vec![false; 9];
        mask[4] = true;
        let segs = marching_squares(&grid, &mask);
        assert_eq!(segs.len(), 4);
        // The loop is a diamond around the centre cell.
        for (a, b) in segs {
            assert!(((a + b) * 0.5 - c(1.5, 1.5)).norm() < 0.6);
        }
    }

    #[test]
    fn svg_is_deterministic() {
        let pts = [c(0.0, 0.0), c(1.0, 1.0)];
        let f = tiny_field();
        let a = render_svg(view_of(pts), &[Polyline { points: &pts, stroke: "black" }], Some((&f, 1.0)));
        let b = render_svg(view_of(pts), &[Polyline { points: &pts, stroke: "black" }], Some((&f, 1.0)));
        assert_eq!(a, b);
        assert!(a.contains("<polyline"));
        assert!(a.starts_with("<svg"));
    }
}
