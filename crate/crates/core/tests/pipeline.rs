use loewner::hull::{self, FrontierOptions, Grid, Membership, RasterOptions};
use loewner::io;
use loewner::linear::{trace_pioneer_curve, PioneerOptions};
use loewner::verify::{self, CheckOptions};
use loewner::{Complex64, Driver, Exec, SolverOptions};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn frontier_matches_pioneer_points() {
    let cc = c(2.0, 1.0);
    let tr = trace_pioneer_curve(cc, 5.0, 0.5, &PioneerOptions::default()).unwrap();
    let driver = Driver::linear(cc);
    let o = SolverOptions::default();
    let fo = FrontierOptions::default();
    for s in tr.samples.iter().filter(|s| s.t > 0.0) {
        let (top, _) = hull::frontier_point(&driver, s.t, 1.0, &o, &fo).unwrap();
        let (bottom, _) = hull::frontier_point(&driver, s.t, -1.0, &o, &fo).unwrap();
        assert!((top - s.plus).norm() < 1e-4, "t={} {top} vs {}", s.t, s.plus);
        assert!((bottom - s.minus.unwrap()).norm() < 1e-4, "t={}", s.t);
    }
}

#[test]
fn rasters_do_not_depend_on_execution_policy() {
    let driver = Driver::linear(c(1.0, 1.0));
    let grid = Grid::default_for(&driver, 1.0, 24).unwrap();
    let o = SolverOptions::default();
    let run = |exec| {
        hull::left_hull_field(&driver, 1.0, &grid, &o, &RasterOptions { membership: Membership::Arrival, exec }).unwrap()
    };
    let (a, b) = (run(Exec::Sequential), run(Exec::Parallel));
    assert_eq!(a, b);
    let mut csv_a = Vec::new();
    let mut csv_b = Vec::new();
    io::write_field_csv(&mut csv_a, &a).unwrap();
    io::write_field_csv(&mut csv_b, &b).unwrap();
    assert_eq!(csv_a, csv_b);
}

#[test]
fn suite_reports_are_reproducible() {
    let drivers = [Driver::constant(c(0.0, 0.0))];
    let seq = CheckOptions { exec: Exec::Sequential, grid_n: 24, ..Default::default() };
    let par = CheckOptions { exec: Exec::Parallel, ..seq.clone() };
    let a = verify::run_suite(verify::Suite::Symmetries, &drivers, &seq).unwrap();
    let b = verify::run_suite(verify::Suite::Symmetries, &drivers, &par).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert!(verify::all_pass(&a));
}

#[test]
fn exotic_trace_exports_loop() {
    let tr = trace_pioneer_curve(c(1.0, 1.0), 8.0, 0.5, &PioneerOptions::default()).unwrap();
    let mut buf = Vec::new();
    io::write_trace_csv(&mut buf, &tr).unwrap();
    let text = String::from_utf8(buf).unwrap();
    // The bottom branch ends at t* = 2 pi; later rows leave its columns blank.
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("8.0,"), "{last}");
    assert_eq!(last.split(',').nth(4), Some(""));
    assert!(text.lines().any(|l| l.starts_with("6.283185307179586,")));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn log_modulus_rate_decays(re in 1.2..3.0f64, frac in 0.1..0.8f64) {
        // Simple phase: Re(c^2) > 0 needs im < re.
        let cc = c(re, frac * re);
        let tr = trace_pioneer_curve(cc, 60.0, 1.0, &PioneerOptions::default()).unwrap();
        for s in tr.samples.iter().filter(|s| s.t >= 10.0) {
            let bound = 2.0 * (1.0 + cc.norm_sqr() * s.t).ln() / s.t;
            let lp = s.plus_info.unwrap().log_modulus / s.t;
            let lm = s.minus_info.unwrap().log_modulus / s.t;
            prop_assert!(lp.abs() <= bound && lm.abs() <= bound, "t={} {lp} {lm} {bound}", s.t);
            prop_assert!(s.plus.re >= -1e-6 && s.minus.unwrap().re >= -1e-6);
        }
    }

    #[test]
    fn driver_json_round_trip(re in -3.0..3.0f64, im in -3.0..3.0f64, t0 in 0.0..1.0f64) {
        let d = Driver::linear(c(re, im)).shifted(t0).unwrap().conjugated();
        let back = Driver::from_json(&d.to_json()).unwrap();
        prop_assert_eq!(back.fingerprint(), d.fingerprint());
        prop_assert_eq!(back.eval(0.7).unwrap(), d.eval(0.7).unwrap());
    }
}
