use sharpmax::gamma::{default_x_max, DEFAULT_RESID_TOL};
use sharpmax::special::{majorization_slack, u_in_region};
use sharpmax::verify::{
    check_majorization, check_tangent_majorant, empirical_bound_constant, GridSpec,
};
use sharpmax::{
    big_u_eval, big_u_grad, classify, solve_gamma, GammaSolution, Params, Point3, Region,
};

fn solve(p: f64, alpha: f64) -> GammaSolution {
    let params = Params::new(p, alpha).unwrap();
    solve_gamma(params, default_x_max(&params), DEFAULT_RESID_TOL).unwrap()
}

/// `(α+1)^p X^p - (p-1)^(1-p) (p(α+1)X - 1)` on `X + Y = 1`.
fn f_closed(x_big: f64, p: f64, alpha: f64) -> f64 {
    (alpha + 1.0).powf(p) * x_big.powf(p)
        - (p - 1.0).powf(1.0 - p) * (p * (alpha + 1.0) * x_big - 1.0)
}

#[test]
fn d1_slack_is_the_closed_form_and_touches_zero() {
    for (p, alpha) in [(2.0f64, 1.0f64), (3.0, 1.0), (3.0, 0.5), (4.0, 0.25)] {
        let sol = solve(p, alpha);
        let kappa = ((alpha + 1.0) * p).powf(p);
        for i in 0..=20 {
            let xb = i as f64 / 20.0;
            let (x, y) = (xb / p, (2.0 - xb) / p);
            let slack = u_in_region(Region::D1, x, y, &sol).unwrap() - (1.0 - kappa * x.powf(p));
            let oracle = f_closed(xb, p, alpha);
            assert!(
                (slack - oracle).abs() <= 1e-12 * (1.0 + oracle.abs()),
                "{p} {alpha} {xb}"
            );
            assert!(slack >= -1e-12);
        }
        let t = 1.0 / ((p - 1.0) * (alpha + 1.0));
        let (x, y) = (t / p, (2.0 - t) / p);
        let at = |x: f64, y: f64| {
            u_in_region(Region::D1, x, y, &sol).unwrap() - (1.0 - kappa * x.powf(p))
        };
        assert!(at(x, y).abs() <= 1e-9);
        let e = 1e-5;
        let d = (at(x + e / p, y - e / p) - at(x - e / p, y + e / p)) / (2.0 * e);
        assert!(d.abs() <= 1e-8, "F'(tangency) = {d}");
    }
}

#[test]
fn region_and_value_examples() {
    let sol = solve(2.0, 1.0);
    assert_eq!(classify(0.5, 1.0, &sol).unwrap(), Region::D2);
    assert_eq!(
        big_u_eval(&Point3::new(0.0, 0.0, 1.0).unwrap(), &sol).unwrap(),
        1.0
    );
    let x0 = 0.25;
    for y in [0.0, 0.3, 0.75] {
        let u = big_u_eval(&Point3::new(x0, y, 1.0).unwrap(), &sol).unwrap();
        assert!(u.abs() <= 1e-12, "U(x0, {y}, 1) = {u}");
    }
}

#[test]
fn start_values_non_positive_and_decreasing() {
    let sol = solve(2.0, 1.0);
    let u = |x: f64| big_u_eval(&Point3::new(x, 1.0, 1.0).unwrap(), &sol).unwrap();
    assert!(u(1.0) <= 0.0);
    let mut prev = u(1.0);
    for i in 1..=90 {
        let v = u(1.0 + 0.1 * i as f64);
        assert!(v <= prev + 1e-12);
        prev = v;
    }
    assert!(u(10.0) <= 0.0);
}

#[test]
fn flat_directional_derivative_near_the_axis() {
    for (p, alpha) in [(2.0f64, 1.0f64), (3.0, 0.5)] {
        let sol = solve(p, alpha);
        for y in [0.1, 0.5 / p, 1.0 / p] {
            let (_, ux, uy) = big_u_grad(&Point3::new(0.0, y, 1.0).unwrap(), &sol).unwrap();
            for a in [-alpha, 0.0, alpha] {
                assert!((ux + a * uy).abs() <= 1e-12, "p={p} y={y} a={a}");
            }
        }
    }
}

#[test]
fn right_derivative_on_the_axis() {
    let (p, alpha) = (3.0f64, 0.5f64);
    let sol = solve(p, alpha);
    for y in [0.4, 0.6, 0.9] {
        let (_, ux, uy) = big_u_grad(&Point3::new(0.0, y, 1.0).unwrap(), &sol).unwrap();
        for a in [-alpha, 0.0, alpha] {
            let oracle =
                -p * p * (p * y - 1.0).powf(p - 1.0) * (alpha - a) / (p - 1.0).powf(p - 1.0);
            assert!((ux + a * uy - oracle).abs() <= 1e-9 * (1.0 + oracle.abs()));
        }
    }
}

#[test]
fn majorization_holds_on_fine_grid() {
    let sol = solve(2.0, 1.0);
    let report = check_majorization(&sol, &GridSpec::default(), 1e-9).unwrap();
    assert!(report.passed(), "{}", report.to_json_line());
    for x in [0.3, 0.7, 1.5, 3.0] {
        for y in [-1.0, -0.2, 0.0, 0.5, 1.0] {
            assert!(majorization_slack(x, y, &sol).unwrap() >= -1e-12);
        }
    }
}

#[test]
fn tangent_plane_bound() {
    let sol = solve(3.0, 0.5);
    assert!(check_tangent_majorant(&sol, 10_000, 4, 1e-9)
        .unwrap()
        .passed());
}

#[test]
fn bound_constant_stable_under_refinement() {
    let sol = solve(2.0, 1.0);
    let coarse = GridSpec {
        nx: 32,
        ny: 32,
        nz: 8,
        ..GridSpec::default()
    };
    let fine = GridSpec {
        nx: 64,
        ny: 64,
        nz: 16,
        ..GridSpec::default()
    };
    let k1 = empirical_bound_constant(&sol, &coarse).unwrap();
    let k2 = empirical_bound_constant(&sol, &fine).unwrap();
    assert!(k1.is_finite() && k2.is_finite() && k1 > 0.0);
    assert!((k2 - k1).abs() <= 0.1 * k1, "{k1} vs {k2}");
}
