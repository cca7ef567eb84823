//! Planar helpers: segment distances, winding numbers, Hausdorff distance and
//! the self-contact scan for polylines.

use crate::exec::{self, Exec};
use num_complex::Complex64;
use serde::Serialize;

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

fn dot(a: Complex64, b: Complex64) -> f64 {
    a.re * b.re + a.im * b.im
}

/// Closest point to `p` on the segment `[a, b]`.
pub fn closest_on_segment(p: Complex64, a: Complex64, b: Complex64) -> Complex64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return a;
    }
    let u = (dot(p - a, d) / len2).clamp(0.0, 1.0);
    a + d * u
}

pub fn point_segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    (p - closest_on_segment(p, a, b)).norm()
}

fn proper_intersection(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Option<Complex64> {
    let r = b - a;
    let s = d - c;
    let den = cross(r, s);
    if den == 0.0 {
        return None;
    }
    let u = cross(c - a, s) / den;
    let v = cross(c - a, r) / den;
    ((0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v)).then(|| a + r * u)
}

/// Distance between segments `[a, b]` and `[c, d]` and the midpoint of a closest pair.
pub fn segment_distance(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> (f64, Complex64) {
    if let Some(x) = proper_intersection(a, b, c, d) {
        return (0.0, x);
    }
    let cands = [
        (a, closest_on_segment(a, c, d)),
        (b, closest_on_segment(b, c, d)),
        (c, closest_on_segment(c, a, b)),
        (d, closest_on_segment(d, a, b)),
    ];
    let mut best = (f64::INFINITY, a);
    for (p, q) in cands {
        let dist = (p - q).norm();
        if dist < best.0 {
            best = (dist, (p + q) * 0.5);
        }
    }
    best
}

/// Distance from `p` to an open polyline.
pub fn polyline_distance(p: Complex64, line: &[Complex64]) -> f64 {
    match line {
        [] => f64::INFINITY,
        [q] => (p - q).norm(),
        _ => line.windows(2).map(|w| point_segment_distance(p, w[0], w[1])).fold(f64::INFINITY, f64::min),
    }
}

/// Winding number of the closed polygon `poly` (last vertex joined to the first) around `p`.
pub fn winding_number(p: Complex64, poly: &[Complex64]) -> i32 {
    let n = poly.len();
    let mut wn = 0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if a.im <= p.im {
            if b.im > p.im && cross(b - a, p - a) > 0.0 {
                wn += 1;
            }
        } else if b.im <= p.im && cross(b - a, p - a) < 0.0 {
            wn -= 1;
        }
    }
    wn
}

/// Symmetric Hausdorff distance between finite point sets. Two empty sets are
/// at distance 0, an empty and a non-empty set at infinity.
pub fn hausdorff(exec: Exec, a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.is_empty() && b.is_empty() { 0.0 } else { f64::INFINITY };
    }
    directed(exec, a, b).max(directed(exec, b, a))
}

fn directed(exec: Exec, a: &[Complex64], b: &[Complex64]) -> f64 {
    exec::map_indexed(exec, a.len(), |i| b.iter().map(|q| (a[i] - q).norm_sqr()).fold(f64::INFINITY, f64::min))
        .into_iter()
        .fold(0.0, f64::max)
        .sqrt()
}

/// Directed distance from each point of `a` to the polyline `line`, maximised.
pub fn directed_to_polyline(exec: Exec, a: &[Complex64], line: &[Complex64]) -> f64 {
    exec::map_indexed(exec, a.len(), |i| polyline_distance(a[i], line)).into_iter().fold(0.0, f64::max)
}

/// First self-contact of a polyline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Contact {
    pub time: f64,
    pub point: Complex64,
    pub segments: (usize, usize),
    pub distance: f64,
}

/// Earliest time two non-adjacent segments of `points` come within `tol`.
/// Segment `k` joins `points[k]` and `points[k+1]` and carries `seg_time[k]`;
/// a pair is reported at the later of its two times. Pairs joined by less
/// than `2 tol` of polyline are neighbours, not contacts.
pub fn simplicity_scan(exec: Exec, points: &[Complex64], seg_time: &[f64], tol: f64) -> Option<Contact> {
    let n = points.len().saturating_sub(1);
    assert_eq!(seg_time.len(), n, "one time per segment");
    if n < 3 {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| seg_time[i].total_cmp(&seg_time[j]).then(i.cmp(&j)));
    let boxes: Vec<[f64; 4]> = (0..n)
        .map(|k| {
            let (a, b) = (points[k], points[k + 1]);
            [a.re.min(b.re) - tol, a.re.max(b.re) + tol, a.im.min(b.im) - tol, a.im.max(b.im) + tol]
        })
        .collect();
    let mut arc = Vec::with_capacity(n + 1);
    arc.push(0.0);
    for k in 0..n {
        arc.push(arc[k] + (points[k + 1] - points[k]).norm());
    }
    let between = |i: usize, j: usize| arc[i.max(j)] - arc[i.min(j) + 1];
    let overlap = |i: usize, j: usize| {
        let (p, q) = (&boxes[i], &boxes[j]);
        p[0] <= q[1] + tol && q[0] <= p[1] + tol && p[2] <= q[3] + tol && q[2] <= p[3] + tol
    };
    // Segment order[r] is tested against every earlier-ranked segment; the
    // first rank with a contact gives the earliest contact time.
    let check = |r: usize| -> Option<Contact> {
        let i = order[r];
        let mut best: Option<Contact> = None;
        for &j in &order[..r] {
            if i.abs_diff(j) < 2 || between(i, j) <= 2.0 * tol || !overlap(i, j) {
                continue;
            }
            let (d, p) = segment_distance(points[i], points[i + 1], points[j], points[j + 1]);
            if d <= tol && best.is_none_or(|b| d < b.distance) {
                best = Some(Contact { time: seg_time[i], point: p, segments: (i.min(j), i.max(j)), distance: d });
            }
        }
        best
    };
    let block = if exec.is_parallel() { 256 } else { 1 };
    let mut start = 0;
    while start < n {
        let end = (start + block).min(n);
        let hits = exec::map_indexed(exec, end - start, |k| check(start + k));
        if let Some(hit) = hits.into_iter().flatten().next() {
            return Some(hit);
        }
        start = end;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn segment_distances() {
        let (d, p) = segment_distance(c(0.0, 0.0), c(2.0, 0.0), c(1.0, -1.0), c(1.0, 1.0));
        assert_eq!(d, 0.0);
        assert!((p - c(1.0, 0.0)).norm() < 1e-15);
        let (d, _) = segment_distance(c(0.0, 0.0), c(1.0, 0.0), c(2.0, 1.0), c(3.0, 1.0));
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(point_segment_distance(c(0.5, 3.0), c(0.0, 0.0), c(1.0, 0.0)), 3.0);
    }

    #[test]
    fn winding() {
        let sq = [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 1.0), c(0.0, 1.0)];
        assert_eq!(winding_number(c(0.5, 0.5), &sq), 1);
        assert_eq!(winding_number(c(1.5, 0.5), &sq), 0);
        let rev: Vec<_> = sq.iter().rev().copied().collect();
        assert_eq!(winding_number(c(0.5, 0.5), &rev), -1);
    }

    #[test]
    fn hausdorff_basics() {
        let a = [c(0.0, 0.0), c(1.0, 0.0)];
        let b = [c(0.0, 0.0), c(1.0, 0.5)];
        assert!((hausdorff(Exec::Parallel, &a, &b) - 0.5).abs() < 1e-15);
        assert_eq!(hausdorff(Exec::Sequential, &[], &[]), 0.0);
        assert_eq!(hausdorff(Exec::Sequential, &a, &[]), f64::INFINITY);
    }

    #[test]
    fn scan_finds_loop_closure() {
        // A square traced in time order, closing back on its start at t = 4.
        let pts = [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 1.0), c(0.0, 1.0), c(0.0, 0.0005)];
        let times = [1.0, 2.0, 3.0, 4.0];
        let hit = simplicity_scan(Exec::Sequential, &pts, &times, 1e-3).unwrap();
        assert_eq!(hit.time, 4.0);
        assert_eq!(hit.segments, (0, 3));
        assert!(simplicity_scan(Exec::Sequential, &pts, &times, 1e-4).is_none());
        assert!(simplicity_scan(Exec::Sequential, &pts[..2], &times[..1], 1.0).is_none());
        // Short collinear steps are neighbours, not contacts.
        let line: Vec<Complex64> = (0..20).map(|k| c(0.0, 1e-4 * k as f64)).collect();
        let lt: Vec<f64> = (0..19).map(|k| k as f64).collect();
        assert!(simplicity_scan(Exec::Sequential, &line, &lt, 1e-3).is_none());
    }

    proptest! {
        #[test]
        fn scan_policies_agree(seed in 0u64..200) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Complex64> = (0..40).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let times: Vec<f64> = (0..39).map(|k| k as f64).collect();
            prop_assert_eq!(
                simplicity_scan(Exec::Sequential, &pts, &times, 0.01),
                simplicity_scan(Exec::Parallel, &pts, &times, 0.01)
            );
        }

        #[test]
        fn triangle_inequality(ax in -1.0..1.0f64, ay in -1.0..1.0f64, px in -2.0..2.0f64, py in -2.0..2.0f64) {
            let (a, b, p) = (c(ax, ay), c(0.3, 0.7), c(px, py));
            let d = point_segment_distance(p, a, b);
            prop_assert!(d <= (p - a).norm() + 1e-12 && d <= (p - b).norm() + 1e-12);
        }
    }
}
