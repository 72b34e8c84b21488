use loewner_lab::driver::{holder_on, Driver, Interpolation, TimeGrid};
use loewner_lab::loewner::{reverse_hit_time, INTERVAL_CONSTANT};

/// Largest `x` of the given sign with `T(x) <= t`, by bisection on the hit time.
fn extent(v: &Driver<f64>, t: f64, sign: f64) -> f64 {
    let hit = |x: f64| reverse_hit_time(v, sign * x, t).unwrap().is_finite();
    let (mut lo, mut hi) = (0.0, 2.0 * t.sqrt() + 2.0 * v.sup_abs_until(t) + 1.0);
    assert!(!hit(hi));
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if hit(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Forcings with half-Hölder constant at most 3 on `[0, 1]`.
fn family() -> Vec<Driver<f64>> {
    let mut out = Vec::new();
    let one = TimeGrid::new(vec![0.0, 1.0]).unwrap();
    for a in [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0] {
        out.push(Driver::new(one.clone(), vec![0.0, a], Interpolation::PiecewiseSqrt).unwrap());
    }
    for s in [-3.0, 3.0] {
        out.push(Driver::new(one.clone(), vec![0.0, s], Interpolation::PiecewiseLinear).unwrap());
    }
    for h in [0.05f64, 0.25] {
        let g = TimeGrid::new(vec![0.0, h, 1.0]).unwrap();
        for a in [-3.0, 3.0] {
            let v = a * h.sqrt();
            out.push(Driver::new(g.clone(), vec![0.0, v, v], Interpolation::PiecewiseSqrt).unwrap());
        }
    }
    let fine = TimeGrid::uniform(256, 1.0).unwrap();
    for w in [4.0f64, 16.0] {
        out.push(Driver::from_fn(fine.clone(), Interpolation::PiecewiseLinear, move |t: f64| {
            -3.0 * (w * t).sin().abs().sqrt() / w.sqrt()
        }));
    }
    out
}

#[test]
fn calibration_reproduces_constant() {
    let mut worst = f64::INFINITY;
    for v in family() {
        let norm = holder_on(&v, 0.0, 1.0).unwrap();
        assert!(norm <= 3.0 + 1e-9, "family member with norm {norm}");
        for t in [0.25, 1.0] {
            let r = extent(&v, t, 1.0) / t.sqrt();
            let l = extent(&v, t, -1.0) / t.sqrt();
            println!("{:?} t={t} left {l:.5} right {r:.5}", v.values().last());
            worst = worst.min(r).min(l);
        }
    }
    // The extremal member is the square-root forcing against the point, with
    // T(x) = tau x^2 and ln(4 tau) = -(a / b)(pi / 2 - atan(a / (2 b))), b = sqrt(4 - a^2 / 4).
    let (a, b) = (-3.0f64, (4.0f64 - 9.0 / 4.0).sqrt());
    let tau = (-(a / b) * (std::f64::consts::FRAC_PI_2 - (a / (2.0 * b)).atan())).exp() / 4.0;
    println!("c' = {worst}, closed form {}", 1.0 / tau.sqrt());
    assert!((worst - 1.0 / tau.sqrt()).abs() < 1e-6);
    assert!(INTERVAL_CONSTANT <= worst / 2.0);
    assert!(worst / 2.0 - INTERVAL_CONSTANT < 2e-4, "{} vs {}", INTERVAL_CONSTANT, worst / 2.0);
}
